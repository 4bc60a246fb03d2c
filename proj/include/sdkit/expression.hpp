#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sdkit/error.hpp"
#include "sdkit/lookup.hpp"

namespace sdkit {

// Rate language: arithmetic over parameters, stocks, lookups and `time`.

enum class BinaryOp { Add, Sub, Mul, Div };
enum class Builtin { Exp, Min, Max };

struct ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

struct Literal {
    double value;
};
struct Reference {
    std::string name;
};
struct TimeRef {};
struct Negate {
    Expr operand;
};
struct Binary {
    BinaryOp op;
    Expr lhs;
    Expr rhs;
};
struct Call {
    Builtin fn;
    std::vector<Expr> args;
};
struct LookupCall {
    std::string table;
    Expr arg;
};

struct ExprNode {
    std::variant<Literal, Reference, TimeRef, Negate, Binary, Call, LookupCall> node;
};

namespace expr {

inline Expr make(auto node) { return std::make_shared<const ExprNode>(ExprNode{std::move(node)}); }

inline Expr lit(double v) { return make(Literal{v}); }
inline Expr ref(std::string name) { return make(Reference{std::move(name)}); }
inline Expr time() { return make(TimeRef{}); }
inline Expr neg(Expr e) { return make(Negate{std::move(e)}); }
inline Expr binary(BinaryOp op, Expr a, Expr b) { return make(Binary{op, std::move(a), std::move(b)}); }
inline Expr add(Expr a, Expr b) { return binary(BinaryOp::Add, std::move(a), std::move(b)); }
inline Expr sub(Expr a, Expr b) { return binary(BinaryOp::Sub, std::move(a), std::move(b)); }
inline Expr mul(Expr a, Expr b) { return binary(BinaryOp::Mul, std::move(a), std::move(b)); }
inline Expr div(Expr a, Expr b) { return binary(BinaryOp::Div, std::move(a), std::move(b)); }
inline Expr call(Builtin fn, std::vector<Expr> args) { return make(Call{fn, std::move(args)}); }
inline Expr lookup(std::string table, Expr arg) { return make(LookupCall{std::move(table), std::move(arg)}); }

}  // namespace expr

inline constexpr std::string_view kTimeSymbol = "time";

inline std::string_view builtin_name(Builtin fn) {
    switch (fn) {
        case Builtin::Exp: return "exp";
        case Builtin::Min: return "min";
        case Builtin::Max: return "max";
    }
    return "?";
}

inline std::size_t builtin_arity(Builtin fn) { return fn == Builtin::Exp ? 1 : 2; }

inline bool is_reserved_word(std::string_view word) {
    return word == "time" || word == "exp" || word == "min" || word == "max";
}

/// Structural equality. Literals compare bitwise so -0.0 and 0.0 differ.
inline bool structurally_equal(const Expr& a, const Expr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->node.index() != b->node.index()) return false;
    return std::visit(
        [&](const auto& x) -> bool {
            using T = std::decay_t<decltype(x)>;
            const auto& y = std::get<T>(b->node);
            if constexpr (std::is_same_v<T, Literal>) {
                return std::bit_cast<std::uint64_t>(x.value) == std::bit_cast<std::uint64_t>(y.value);
            } else if constexpr (std::is_same_v<T, Reference>) {
                return x.name == y.name;
            } else if constexpr (std::is_same_v<T, TimeRef>) {
                return true;
            } else if constexpr (std::is_same_v<T, Negate>) {
                return structurally_equal(x.operand, y.operand);
            } else if constexpr (std::is_same_v<T, Binary>) {
                return x.op == y.op && structurally_equal(x.lhs, y.lhs) && structurally_equal(x.rhs, y.rhs);
            } else if constexpr (std::is_same_v<T, Call>) {
                if (x.fn != y.fn || x.args.size() != y.args.size()) return false;
                for (std::size_t i = 0; i < x.args.size(); ++i)
                    if (!structurally_equal(x.args[i], y.args[i])) return false;
                return true;
            } else {
                return x.table == y.table && structurally_equal(x.arg, y.arg);
            }
        },
        a->node);
}

/// Visits every identifier the expression references. `applied` is true for
/// the table name of a lookup application. `time` is not reported.
inline void for_each_reference(const Expr& e, const std::function<void(const std::string&, bool applied)>& fn) {
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Reference>) {
                fn(x.name, false);
            } else if constexpr (std::is_same_v<T, Negate>) {
                for_each_reference(x.operand, fn);
            } else if constexpr (std::is_same_v<T, Binary>) {
                for_each_reference(x.lhs, fn);
                for_each_reference(x.rhs, fn);
            } else if constexpr (std::is_same_v<T, Call>) {
                for (const auto& a : x.args) for_each_reference(a, fn);
            } else if constexpr (std::is_same_v<T, LookupCall>) {
                fn(x.table, true);
                for_each_reference(x.arg, fn);
            }
        },
        e->node);
}

enum class EvalErrorKind { UnboundIdentifier, UnknownLookup, DivisionByZero, NonFiniteResult };

class EvalError : public Error {
public:
    EvalError(EvalErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
    EvalErrorKind kind() const { return kind_; }

private:
    EvalErrorKind kind_;
};

/// Identifier bindings for direct evaluation; the reserved key "time" binds
/// the time symbol.
using Environment = std::map<std::string, double, std::less<>>;
using LookupSet = std::map<std::string, LookupTable, std::less<>>;

namespace detail {

inline double checked(double v, std::string_view what) {
    if (!std::isfinite(v))
        throw EvalError(EvalErrorKind::NonFiniteResult, "non-finite result in " + std::string(what));
    return v;
}

inline double apply_binary(BinaryOp op, double a, double b) {
    switch (op) {
        case BinaryOp::Add: return checked(a + b, "addition");
        case BinaryOp::Sub: return checked(a - b, "subtraction");
        case BinaryOp::Mul: return checked(a * b, "multiplication");
        case BinaryOp::Div:
            if (b == 0.0) throw EvalError(EvalErrorKind::DivisionByZero, "division by zero");
            return checked(a / b, "division");
    }
    return 0.0;
}

inline double apply_builtin(Builtin fn, double a, double b) {
    switch (fn) {
        case Builtin::Exp: return checked(std::exp(a), "exp");
        case Builtin::Min: return std::min(a, b);
        case Builtin::Max: return std::max(a, b);
    }
    return 0.0;
}

}  // namespace detail

/// Tree-walking evaluation against named bindings.
inline double eval_expression(const Expr& e, const Environment& env, const LookupSet& lookups) {
    return std::visit(
        [&](const auto& x) -> double {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Literal>) {
                return detail::checked(x.value, "literal");
            } else if constexpr (std::is_same_v<T, Reference>) {
                auto it = env.find(x.name);
                if (it == env.end())
                    throw EvalError(EvalErrorKind::UnboundIdentifier, "unbound identifier '" + x.name + "'");
                return detail::checked(it->second, x.name);
            } else if constexpr (std::is_same_v<T, TimeRef>) {
                auto it = env.find(kTimeSymbol);
                if (it == env.end())
                    throw EvalError(EvalErrorKind::UnboundIdentifier, "unbound identifier 'time'");
                return detail::checked(it->second, "time");
            } else if constexpr (std::is_same_v<T, Negate>) {
                return -eval_expression(x.operand, env, lookups);
            } else if constexpr (std::is_same_v<T, Binary>) {
                const double a = eval_expression(x.lhs, env, lookups);
                const double b = eval_expression(x.rhs, env, lookups);
                return detail::apply_binary(x.op, a, b);
            } else if constexpr (std::is_same_v<T, Call>) {
                const double a = eval_expression(x.args.at(0), env, lookups);
                const double b = x.args.size() > 1 ? eval_expression(x.args[1], env, lookups) : 0.0;
                return detail::apply_builtin(x.fn, a, b);
            } else {
                auto it = lookups.find(x.table);
                if (it == lookups.end() || it->second.empty())
                    throw EvalError(EvalErrorKind::UnknownLookup, "unknown lookup '" + x.table + "'");
                const double arg = eval_expression(x.arg, env, lookups);
                return interpolate_lookup(it->second, arg);
            }
        },
        e->node);
}

/// Flat postfix form of an expression with identifiers resolved to slot
/// indices. This is what the integrator evaluates in its inner loop.
class CompiledExpr {
public:
    enum class Op : std::uint8_t { Const, Slot, Time, Neg, Add, Sub, Mul, Div, Exp, Min, Max, Lookup };
    struct Instr {
        Op op;
        std::uint32_t index = 0;  // slot or lookup index
        double value = 0.0;       // constant
    };

    /// `slot_of` maps a value identifier to its slot, `lookup_of` a table
    /// name to its index; both return -1 when unknown.
    static CompiledExpr compile(const Expr& e, const std::function<int(const std::string&)>& slot_of,
                                const std::function<int(const std::string&)>& lookup_of) {
        CompiledExpr out;
        out.emit(e, slot_of, lookup_of);
        return out;
    }

    /// `clamped` is set to true when a lookup argument falls outside its
    /// table's data range.
    double evaluate(const std::vector<double>& slots, double time, const std::vector<const LookupTable*>& lookups,
                    std::vector<char>& clamped) const {
        double stack[64];
        std::size_t sp = 0;
        std::vector<double> heap;
        double* st = stack;
        if (depth_ > 64) {
            heap.resize(depth_);
            st = heap.data();
        }
        for (const Instr& in : code_) {
            switch (in.op) {
                case Op::Const: st[sp++] = in.value; break;
                case Op::Slot: st[sp++] = slots[in.index]; break;
                case Op::Time: st[sp++] = time; break;
                case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
                case Op::Add: --sp; st[sp - 1] = detail::apply_binary(BinaryOp::Add, st[sp - 1], st[sp]); break;
                case Op::Sub: --sp; st[sp - 1] = detail::apply_binary(BinaryOp::Sub, st[sp - 1], st[sp]); break;
                case Op::Mul: --sp; st[sp - 1] = detail::apply_binary(BinaryOp::Mul, st[sp - 1], st[sp]); break;
                case Op::Div: --sp; st[sp - 1] = detail::apply_binary(BinaryOp::Div, st[sp - 1], st[sp]); break;
                case Op::Exp: st[sp - 1] = detail::apply_builtin(Builtin::Exp, st[sp - 1], 0.0); break;
                case Op::Min: --sp; st[sp - 1] = std::min(st[sp - 1], st[sp]); break;
                case Op::Max: --sp; st[sp - 1] = std::max(st[sp - 1], st[sp]); break;
                case Op::Lookup: {
                    const LookupTable& table = *lookups[in.index];
                    if (!table.covers(st[sp - 1])) clamped[in.index] = 1;
                    st[sp - 1] = interpolate_lookup(table, st[sp - 1]);
                    break;
                }
            }
        }
        return detail::checked(st[0], "expression");
    }

    std::size_t size() const { return code_.size(); }

private:
    std::size_t emit(const Expr& e, const std::function<int(const std::string&)>& slot_of,
                     const std::function<int(const std::string&)>& lookup_of) {
        // Returns the stack depth required by the subtree.
        return std::visit(
            [&](const auto& x) -> std::size_t {
                using T = std::decay_t<decltype(x)>;
                std::size_t need = 1;
                if constexpr (std::is_same_v<T, Literal>) {
                    code_.push_back({Op::Const, 0, x.value});
                } else if constexpr (std::is_same_v<T, Reference>) {
                    const int slot = slot_of(x.name);
                    if (slot < 0)
                        throw EvalError(EvalErrorKind::UnboundIdentifier, "unbound identifier '" + x.name + "'");
                    code_.push_back({Op::Slot, static_cast<std::uint32_t>(slot), 0.0});
                } else if constexpr (std::is_same_v<T, TimeRef>) {
                    code_.push_back({Op::Time, 0, 0.0});
                } else if constexpr (std::is_same_v<T, Negate>) {
                    need = emit(x.operand, slot_of, lookup_of);
                    code_.push_back({Op::Neg, 0, 0.0});
                } else if constexpr (std::is_same_v<T, Binary>) {
                    const std::size_t l = emit(x.lhs, slot_of, lookup_of);
                    const std::size_t r = emit(x.rhs, slot_of, lookup_of);
                    need = std::max(l, r + 1);
                    static constexpr Op ops[] = {Op::Add, Op::Sub, Op::Mul, Op::Div};
                    code_.push_back({ops[static_cast<int>(x.op)], 0, 0.0});
                } else if constexpr (std::is_same_v<T, Call>) {
                    need = emit(x.args.at(0), slot_of, lookup_of);
                    if (x.fn == Builtin::Exp) {
                        code_.push_back({Op::Exp, 0, 0.0});
                    } else {
                        need = std::max(need, emit(x.args.at(1), slot_of, lookup_of) + 1);
                        code_.push_back({x.fn == Builtin::Min ? Op::Min : Op::Max, 0, 0.0});
                    }
                } else {
                    const int idx = lookup_of(x.table);
                    if (idx < 0) throw EvalError(EvalErrorKind::UnknownLookup, "unknown lookup '" + x.table + "'");
                    need = emit(x.arg, slot_of, lookup_of);
                    code_.push_back({Op::Lookup, static_cast<std::uint32_t>(idx), 0.0});
                }
                depth_ = std::max(depth_, need);
                return need;
            },
            e->node);
    }

    std::vector<Instr> code_;
    std::size_t depth_ = 0;
};

}  // namespace sdkit

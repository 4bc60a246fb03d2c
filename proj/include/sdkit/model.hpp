#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sdkit/error.hpp"
#include "sdkit/expression.hpp"
#include "sdkit/lookup.hpp"

namespace sdkit {

/// Simulated interval in years.
struct TimeSpec {
    double start = 0.0;
    double end = 1.0;
    double step = 1.0;

    bool valid() const {
        return std::isfinite(start) && std::isfinite(end) && std::isfinite(step) && start < end && step > 0.0 &&
               step <= end - start;
    }
    friend bool operator==(const TimeSpec&, const TimeSpec&) = default;
};

struct Parameter {
    std::string name;
    double value = 0.0;
    friend bool operator==(const Parameter&, const Parameter&) = default;
};

struct Stock {
    std::string name;
    double initial_value = 0.0;
    friend bool operator==(const Stock&, const Stock&) = default;
};

/// A rate moving quantity out of `source` and into `sink`. A missing end is
/// the model boundary.
struct Flow {
    std::string name;
    std::optional<std::string> source;
    std::optional<std::string> sink;
    Expr rate;
};

/// Lookup declaration. File-backed lookups carry the path as written in the
/// model source; their table stays empty until the file is loaded.
struct Lookup {
    std::string name;
    LookupTable table;
    std::optional<std::string> source_path;
};

struct Output {
    std::string name;
    Expr value;
};

enum class DeclKind { Parameter, Lookup, Stock, Flow, Output };

struct DeclRef {
    DeclKind kind;
    std::size_t index;
    friend bool operator==(const DeclRef&, const DeclRef&) = default;
};

/// A complete stock-and-flow system. Each collection keeps declaration
/// order, and the interleaving across collections is kept as well so that
/// serialization reproduces the source layout.
class Model {
public:
    Model() = default;
    explicit Model(std::string name, TimeSpec time = {}) : name_(std::move(name)), time_(time) {}

    const std::string& name() const { return name_; }
    void set_name(std::string name) { name_ = std::move(name); }
    const TimeSpec& time_spec() const { return time_; }
    void set_time_spec(TimeSpec ts) { time_ = ts; }

    const std::vector<Parameter>& parameters() const { return parameters_; }
    const std::vector<Lookup>& lookups() const { return lookups_; }
    const std::vector<Stock>& stocks() const { return stocks_; }
    const std::vector<Flow>& flows() const { return flows_; }
    const std::vector<Output>& outputs() const { return outputs_; }
    const std::vector<DeclRef>& declaration_order() const { return order_; }

    Model& add_parameter(std::string name, double value) {
        order_.push_back({DeclKind::Parameter, parameters_.size()});
        parameters_.push_back({std::move(name), value});
        return *this;
    }
    Model& add_lookup(std::string name, LookupTable table, std::optional<std::string> source_path = std::nullopt) {
        order_.push_back({DeclKind::Lookup, lookups_.size()});
        lookups_.push_back({std::move(name), std::move(table), std::move(source_path)});
        return *this;
    }
    Model& add_stock(std::string name, double initial_value) {
        order_.push_back({DeclKind::Stock, stocks_.size()});
        stocks_.push_back({std::move(name), initial_value});
        return *this;
    }
    Model& add_flow(std::string name, std::optional<std::string> source, std::optional<std::string> sink, Expr rate) {
        order_.push_back({DeclKind::Flow, flows_.size()});
        flows_.push_back({std::move(name), std::move(source), std::move(sink), std::move(rate)});
        return *this;
    }
    Model& add_output(std::string name, Expr value) {
        order_.push_back({DeclKind::Output, outputs_.size()});
        outputs_.push_back({std::move(name), std::move(value)});
        return *this;
    }

    const Parameter* find_parameter(std::string_view name) const { return find_named(parameters_, name); }
    const Lookup* find_lookup(std::string_view name) const { return find_named(lookups_, name); }
    const Stock* find_stock(std::string_view name) const { return find_named(stocks_, name); }
    const Output* find_output(std::string_view name) const { return find_named(outputs_, name); }

    /// Returns false when no parameter has that name.
    bool set_parameter(std::string_view name, double value) {
        for (auto& p : parameters_)
            if (p.name == name) {
                p.value = value;
                return true;
            }
        return false;
    }

    /// Replaces the table of a lookup, keeping its declared source path.
    bool set_lookup_table(std::string_view name, LookupTable table) {
        for (auto& l : lookups_)
            if (l.name == name) {
                l.table = std::move(table);
                return true;
            }
        return false;
    }

    /// True for names of stocks and outputs, i.e. the series a run records.
    bool has_series(std::string_view name) const { return find_stock(name) || find_output(name); }

private:
    template <class T>
    static const T* find_named(const std::vector<T>& items, std::string_view name) {
        for (const auto& item : items)
            if (item.name == name) return &item;
        return nullptr;
    }

    std::string name_;
    TimeSpec time_;
    std::vector<Parameter> parameters_;
    std::vector<Lookup> lookups_;
    std::vector<Stock> stocks_;
    std::vector<Flow> flows_;
    std::vector<Output> outputs_;
    std::vector<DeclRef> order_;
};

/// Bitwise comparison of reals so that structural equality is exact.
inline bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

inline bool structurally_equal(const Model& a, const Model& b) {
    if (a.name() != b.name() || a.declaration_order() != b.declaration_order()) return false;
    const auto& ta = a.time_spec();
    const auto& tb = b.time_spec();
    if (!same_bits(ta.start, tb.start) || !same_bits(ta.end, tb.end) || !same_bits(ta.step, tb.step)) return false;
    auto same_table = [](const LookupTable& x, const LookupTable& y) {
        if (x.size() != y.size()) return false;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (!same_bits(x.points()[i].t, y.points()[i].t) || !same_bits(x.points()[i].value, y.points()[i].value))
                return false;
        return true;
    };
    return std::ranges::equal(a.parameters(), b.parameters(),
                              [](auto& x, auto& y) { return x.name == y.name && same_bits(x.value, y.value); }) &&
           std::ranges::equal(a.lookups(), b.lookups(),
                              [&](auto& x, auto& y) {
                                  return x.name == y.name && x.source_path == y.source_path &&
                                         same_table(x.table, y.table);
                              }) &&
           std::ranges::equal(a.stocks(), b.stocks(),
                              [](auto& x, auto& y) {
                                  return x.name == y.name && same_bits(x.initial_value, y.initial_value);
                              }) &&
           std::ranges::equal(a.flows(), b.flows(),
                              [](auto& x, auto& y) {
                                  return x.name == y.name && x.source == y.source && x.sink == y.sink &&
                                         structurally_equal(x.rate, y.rate);
                              }) &&
           std::ranges::equal(a.outputs(), b.outputs(), [](auto& x, auto& y) {
               return x.name == y.name && structurally_equal(x.value, y.value);
           });
}

// ---------------------------------------------------------------------------
// Validation

enum class Severity { Error, Warning };

enum class DiagnosticCode {
    DuplicateIdentifier,
    UnresolvedReference,
    ReservedIdentifier,
    InvalidFlow,
    BadTimeSpec,
    InvalidLookup,
    NonFiniteValue,
    LookupMisuse,
    NegativeStock,
};

inline std::string_view to_string(DiagnosticCode code) {
    switch (code) {
        case DiagnosticCode::DuplicateIdentifier: return "DUPLICATE_IDENTIFIER";
        case DiagnosticCode::UnresolvedReference: return "UNRESOLVED_REFERENCE";
        case DiagnosticCode::ReservedIdentifier: return "RESERVED_IDENTIFIER";
        case DiagnosticCode::InvalidFlow: return "INVALID_FLOW";
        case DiagnosticCode::BadTimeSpec: return "BAD_TIME_SPEC";
        case DiagnosticCode::InvalidLookup: return "INVALID_LOOKUP";
        case DiagnosticCode::NonFiniteValue: return "NON_FINITE_VALUE";
        case DiagnosticCode::LookupMisuse: return "LOOKUP_MISUSE";
        case DiagnosticCode::NegativeStock: return "NEGATIVE_STOCK";
    }
    return "UNKNOWN";
}

struct Diagnostic {
    Severity severity = Severity::Error;
    DiagnosticCode code;
    std::string identifier;
    std::string message;
};

inline bool has_errors(const std::vector<Diagnostic>& diags) {
    return std::ranges::any_of(diags, [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

/// Checks every structural invariant of a model. An empty result means the
/// model can be run (once its file-backed lookups are loaded).
inline std::vector<Diagnostic> validate_model(const Model& model) {
    std::vector<Diagnostic> out;
    auto error = [&](DiagnosticCode code, const std::string& id, std::string msg) {
        out.push_back({Severity::Error, code, id, std::move(msg)});
    };

    if (!model.time_spec().valid()) {
        const auto& ts = model.time_spec();
        error(DiagnosticCode::BadTimeSpec, "time",
              "time spec must satisfy start < end and 0 < step <= end - start (got " + std::to_string(ts.start) +
                  " .. " + std::to_string(ts.end) + " step " + std::to_string(ts.step) + ")");
    }

    // One namespace across every declared element.
    enum class Role { Parameter, Lookup, Stock, Flow, Output };
    std::map<std::string, Role, std::less<>> names;
    auto declare = [&](const std::string& name, Role role) {
        if (is_reserved_word(name)) {
            error(DiagnosticCode::ReservedIdentifier, name, "'" + name + "' is a reserved word");
            return;
        }
        if (!names.emplace(name, role).second)
            error(DiagnosticCode::DuplicateIdentifier, name, "identifier '" + name + "' is declared more than once");
    };
    for (const auto& p : model.parameters()) {
        declare(p.name, Role::Parameter);
        if (!std::isfinite(p.value))
            error(DiagnosticCode::NonFiniteValue, p.name, "parameter '" + p.name + "' is not finite");
    }
    for (const auto& l : model.lookups()) {
        declare(l.name, Role::Lookup);
        if (l.table.empty() && !l.source_path) {
            error(DiagnosticCode::InvalidLookup, l.name, "lookup '" + l.name + "' has no points");
        } else if (std::size_t bad = l.table.first_invalid_point(); bad < l.table.size()) {
            error(DiagnosticCode::InvalidLookup, l.name,
                  "lookup '" + l.name + "' point " + std::to_string(bad + 1) +
                      " is not finite or not strictly increasing in t");
        }
    }
    for (const auto& s : model.stocks()) {
        declare(s.name, Role::Stock);
        if (!std::isfinite(s.initial_value))
            error(DiagnosticCode::NonFiniteValue, s.name, "stock '" + s.name + "' has a non-finite initial value");
    }
    for (const auto& f : model.flows()) declare(f.name, Role::Flow);
    for (const auto& o : model.outputs()) declare(o.name, Role::Output);

    auto check_expr = [&](const std::string& owner, const Expr& e) {
        if (!e) {
            error(DiagnosticCode::UnresolvedReference, owner, "'" + owner + "' has no expression");
            return;
        }
        for_each_reference(e, [&](const std::string& id, bool applied) {
            auto it = names.find(id);
            if (it == names.end() || it->second == Role::Flow || it->second == Role::Output) {
                error(DiagnosticCode::UnresolvedReference, id, "'" + owner + "' references undeclared '" + id + "'");
            } else if (applied && it->second != Role::Lookup) {
                error(DiagnosticCode::LookupMisuse, id, "'" + owner + "' applies '" + id + "' which is not a lookup");
            } else if (!applied && it->second == Role::Lookup) {
                error(DiagnosticCode::LookupMisuse, id,
                      "'" + owner + "' uses lookup '" + id + "' without an argument");
            }
        });
    };

    for (const auto& f : model.flows()) {
        if (!f.source && !f.sink)
            error(DiagnosticCode::InvalidFlow, f.name, "flow '" + f.name + "' has neither source nor sink");
        if (f.source && f.sink && *f.source == *f.sink)
            error(DiagnosticCode::InvalidFlow, f.name, "flow '" + f.name + "' has the same source and sink");
        for (const auto* end : {&f.source, &f.sink})
            if (*end && !model.find_stock(**end))
                error(DiagnosticCode::UnresolvedReference, **end,
                      "flow '" + f.name + "' connects undeclared stock '" + **end + "'");
        check_expr(f.name, f.rate);
    }
    for (const auto& o : model.outputs()) check_expr(o.name, o.value);
    return out;
}

// ---------------------------------------------------------------------------
// Derivatives

/// Flow rate evaluation failure with the flow name attached.
class FlowEvalError : public Error {
public:
    FlowEvalError(std::string flow, const EvalError& cause)
        : Error("flow '" + flow + "': " + cause.what()), flow_(std::move(flow)), kind_(cause.kind()) {}
    const std::string& flow() const { return flow_; }
    EvalErrorKind kind() const { return kind_; }

private:
    std::string flow_;
    EvalErrorKind kind_;
};

using ValueMap = std::map<std::string, double, std::less<>>;

/// Net rate of change of every stock: inflow rates minus outflow rates, each
/// rate evaluated once and applied with opposite signs to both ends.
inline ValueMap net_derivatives(const Model& model, const ValueMap& stock_values, double t) {
    Environment env;
    for (const auto& p : model.parameters()) env[p.name] = p.value;
    for (const auto& s : model.stocks()) {
        auto it = stock_values.find(s.name);
        if (it == stock_values.end())
            throw EvalError(EvalErrorKind::UnboundIdentifier, "no value bound for stock '" + s.name + "'");
        env[s.name] = it->second;
    }
    env[std::string(kTimeSymbol)] = t;
    LookupSet lookups;
    for (const auto& l : model.lookups()) lookups.emplace(l.name, l.table);

    ValueMap out;
    for (const auto& s : model.stocks()) out[s.name] = 0.0;
    for (const auto& f : model.flows()) {
        double rate;
        try {
            rate = eval_expression(f.rate, env, lookups);
        } catch (const EvalError& e) {
            throw FlowEvalError(f.name, e);
        }
        if (f.sink) out[*f.sink] += rate;
        if (f.source) out[*f.source] -= rate;
    }
    return out;
}

}  // namespace sdkit

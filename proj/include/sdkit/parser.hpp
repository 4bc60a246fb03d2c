#pragma once

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sdkit/format.hpp"
#include "sdkit/model.hpp"

namespace sdkit {

// ---------------------------------------------------------------------------
// Source positions and errors

/// 1-based line and byte column. A span may start one column past the last
/// character of a line to point at "end of line".
struct SourceSpan {
    int line = 1;
    int column = 1;
    int length = 1;
    friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

enum class ParseErrorCode { Syntax, DuplicateIdentifier, UnresolvedReference, BadNumber, BadTimeSpec };

inline std::string_view to_string(ParseErrorCode code) {
    switch (code) {
        case ParseErrorCode::Syntax: return "SYNTAX";
        case ParseErrorCode::DuplicateIdentifier: return "DUPLICATE_IDENTIFIER";
        case ParseErrorCode::UnresolvedReference: return "UNRESOLVED_REFERENCE";
        case ParseErrorCode::BadNumber: return "BAD_NUMBER";
        case ParseErrorCode::BadTimeSpec: return "BAD_TIME_SPEC";
    }
    return "SYNTAX";
}

struct ParseError {
    SourceSpan span;
    ParseErrorCode code = ParseErrorCode::Syntax;
    std::string message;
};

/// `file:line:col: CODE: message`
inline std::string format_error(std::string_view file, const ParseError& e) {
    std::string out(file);
    out += ':' + std::to_string(e.span.line) + ':' + std::to_string(e.span.column) + ": ";
    out += to_string(e.code);
    out += ": " + e.message;
    return out;
}

/// Either a parsed value or the complete list of errors found.
template <class T>
struct Parsed {
    std::optional<T> value;
    std::vector<ParseError> errors;

    explicit operator bool() const { return value.has_value(); }
};

/// Splits text into lines on '\n'; a trailing '\r' is dropped. Empty text is
/// a single empty line.
inline std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (true) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return lines;
}

inline bool span_in_bounds(std::string_view text, const SourceSpan& span) {
    const auto lines = split_lines(text);
    if (span.line < 1 || span.line > static_cast<int>(lines.size())) return false;
    if (span.column < 1 || span.length < 1) return false;
    const int len = static_cast<int>(lines[span.line - 1].size());
    return span.column + span.length - 1 <= len + 1;
}

// ---------------------------------------------------------------------------
// Line lexer shared by the model, experiment and calibration formats.

namespace detail {

enum class Tok {
    Ident,
    Number,
    String,
    Arrow,
    DotDot,
    Dot,
    Colon,
    Equals,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    End,
};

struct Token {
    Tok kind;
    std::string_view text;
    int column;  // 1-based
};

/// Raised inside a statement parser; the driver records it and moves on to
/// the next line.
struct StatementError {
    ParseError error;
};

inline bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
inline bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9') || c == '_'; }
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

inline std::vector<Token> lex_line(std::string_view line, int line_no) {
    std::vector<Token> toks;
    std::size_t i = 0;
    auto fail = [&](std::size_t at, std::size_t len, ParseErrorCode code, std::string msg) {
        throw StatementError{{{line_no, static_cast<int>(at) + 1, static_cast<int>(std::max<std::size_t>(len, 1))},
                              code,
                              std::move(msg)}};
    };
    while (i < line.size()) {
        const char c = line[i];
        if (c == ' ' || c == '\t') {
            ++i;
            continue;
        }
        if (c == '#') break;
        const std::size_t start = i;
        auto push = [&](Tok k, std::size_t len) {
            toks.push_back({k, line.substr(start, len), static_cast<int>(start) + 1});
            i = start + len;
        };
        if (is_ident_start(c)) {
            std::size_t j = i + 1;
            while (j < line.size() && is_ident_char(line[j])) ++j;
            push(Tok::Ident, j - i);
        } else if (is_digit(c)) {
            std::size_t j = i;
            while (j < line.size() && is_digit(line[j])) ++j;
            if (j < line.size() && line[j] == '.' && !(j + 1 < line.size() && line[j + 1] == '.')) {
                ++j;
                while (j < line.size() && is_digit(line[j])) ++j;
            }
            if (j < line.size() && (line[j] == 'e' || line[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < line.size() && (line[k] == '+' || line[k] == '-')) ++k;
                if (k < line.size() && is_digit(line[k])) {
                    while (k < line.size() && is_digit(line[k])) ++k;
                    j = k;
                }
            }
            // A number running straight into letters or a second dot is malformed.
            std::size_t end = j;
            while (end < line.size() && (is_ident_char(line[end]) ||
                                         (line[end] == '.' && !(end + 1 < line.size() && line[end + 1] == '.'))))
                ++end;
            if (end != j) fail(start, end - start, ParseErrorCode::BadNumber, "malformed number");
            push(Tok::Number, j - i);
        } else if (c == '"') {
            std::size_t j = line.find('"', i + 1);
            if (j == std::string_view::npos) fail(start, line.size() - start, ParseErrorCode::Syntax, "unterminated string");
            push(Tok::String, j - i + 1);
        } else if (c == '-' && i + 1 < line.size() && line[i + 1] == '>') {
            push(Tok::Arrow, 2);
        } else if (c == '.' && i + 1 < line.size() && line[i + 1] == '.') {
            push(Tok::DotDot, 2);
        } else {
            Tok k;
            switch (c) {
                case '.': k = Tok::Dot; break;
                case ':': k = Tok::Colon; break;
                case '=': k = Tok::Equals; break;
                case '(': k = Tok::LParen; break;
                case ')': k = Tok::RParen; break;
                case '{': k = Tok::LBrace; break;
                case '}': k = Tok::RBrace; break;
                case '[': k = Tok::LBracket; break;
                case ']': k = Tok::RBracket; break;
                case ',': k = Tok::Comma; break;
                case '+': k = Tok::Plus; break;
                case '-': k = Tok::Minus; break;
                case '*': k = Tok::Star; break;
                case '/': k = Tok::Slash; break;
                default: fail(start, 1, ParseErrorCode::Syntax, "unexpected character"); return toks;
            }
            push(k, 1);
        }
    }
    toks.push_back({Tok::End, line.substr(line.size()), static_cast<int>(line.size()) + 1});
    return toks;
}

/// Cursor over the tokens of one statement.
class Cursor {
public:
    Cursor(std::vector<Token> toks, int line_no) : toks_(std::move(toks)), line_(line_no) {}

    const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
    const Token& next() {
        const Token& t = toks_[pos_];
        if (pos_ + 1 < toks_.size()) ++pos_;
        return t;
    }
    bool at_end() const { return peek().kind == Tok::End; }
    int line() const { return line_; }

    SourceSpan span(const Token& t) const {
        return {line_, t.column, std::max(1, static_cast<int>(t.text.size()))};
    }
    /// Span from the start of `first` to the end of the previously consumed token.
    SourceSpan span_from(const Token& first) const {
        const Token& last = toks_[pos_ == 0 ? 0 : pos_ - 1];
        const int end = last.column + static_cast<int>(last.text.size());
        return {line_, first.column, std::max(1, end - first.column)};
    }

    [[noreturn]] void fail(const Token& at, ParseErrorCode code, std::string msg) const {
        throw StatementError{{span(at), code, std::move(msg)}};
    }
    [[noreturn]] void fail(SourceSpan s, ParseErrorCode code, std::string msg) const {
        throw StatementError{{s, code, std::move(msg)}};
    }

    static std::string describe(const Token& t) {
        return t.kind == Tok::End ? std::string("end of line") : "'" + std::string(t.text) + "'";
    }

    const Token& expect(Tok kind, std::string_view what) {
        if (peek().kind != kind) fail(peek(), ParseErrorCode::Syntax, "expected " + std::string(what) + ", found " + describe(peek()));
        return next();
    }
    bool accept(Tok kind) {
        if (peek().kind != kind) return false;
        next();
        return true;
    }
    bool accept_word(std::string_view word) {
        if (peek().kind != Tok::Ident || peek().text != word) return false;
        next();
        return true;
    }
    void expect_word(std::string_view word) {
        if (!accept_word(word))
            fail(peek(), ParseErrorCode::Syntax, "expected '" + std::string(word) + "', found " + describe(peek()));
    }
    void expect_end() {
        if (!at_end()) fail(peek(), ParseErrorCode::Syntax, "unexpected " + describe(peek()) + " at end of statement");
    }

    /// Identifier that is not a reserved word.
    const Token& identifier(std::string_view what) {
        const Token& t = expect(Tok::Ident, what);
        if (is_reserved_word(t.text))
            fail(t, ParseErrorCode::Syntax, "'" + std::string(t.text) + "' is reserved and cannot be used as " + std::string(what));
        return t;
    }

    double number_value(const Token& t, double sign = 1.0) const {
        std::string buf(t.text);
        errno = 0;
        char* end = nullptr;
        double v = std::strtod(buf.c_str(), &end);
        if (end != buf.c_str() + buf.size() || !std::isfinite(v) || (errno == ERANGE && v == 0.0))
            fail(t, ParseErrorCode::BadNumber, "number '" + buf + "' is out of range");
        return sign * v;
    }

    /// Optionally signed real literal.
    double real(std::string_view what) {
        double sign = 1.0;
        if (accept(Tok::Minus)) sign = -1.0;
        else accept(Tok::Plus);
        const Token& t = peek();
        if (t.kind != Tok::Number) fail(t, ParseErrorCode::Syntax, "expected " + std::string(what) + ", found " + describe(t));
        next();
        return number_value(t, sign);
    }

    std::string string_literal(std::string_view what) {
        const Token& t = expect(Tok::String, what);
        return std::string(t.text.substr(1, t.text.size() - 2));
    }

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    int line_;
};

struct NameRef {
    std::string name;
    SourceSpan span;
    bool applied;  // name(arg) lookup application
};

inline constexpr int kMaxExpressionDepth = 200;

class ExpressionParser {
public:
    ExpressionParser(Cursor& cur, std::vector<NameRef>& refs) : cur_(cur), refs_(refs) {}

    Expr parse() { return additive(0); }

private:
    void guard(int depth) {
        if (depth > kMaxExpressionDepth) cur_.fail(cur_.peek(), ParseErrorCode::Syntax, "expression nested too deeply");
    }

    Expr additive(int depth) {
        Expr lhs = multiplicative(depth);
        while (true) {
            if (cur_.accept(Tok::Plus)) lhs = expr::add(lhs, multiplicative(depth));
            else if (cur_.accept(Tok::Minus)) lhs = expr::sub(lhs, multiplicative(depth));
            else return lhs;
        }
    }

    Expr multiplicative(int depth) {
        Expr lhs = unary(depth);
        while (true) {
            if (cur_.accept(Tok::Star)) lhs = expr::mul(lhs, unary(depth));
            else if (cur_.accept(Tok::Slash)) lhs = expr::div(lhs, unary(depth));
            else return lhs;
        }
    }

    Expr unary(int depth) {
        guard(depth);
        if (cur_.accept(Tok::Minus)) {
            // A minus directly on a number literal folds into a negative literal.
            if (cur_.peek().kind == Tok::Number) {
                const Token& t = cur_.next();
                return expr::lit(cur_.number_value(t, -1.0));
            }
            return expr::neg(unary(depth + 1));
        }
        return primary(depth);
    }

    Expr primary(int depth) {
        const Token& t = cur_.peek();
        switch (t.kind) {
            case Tok::Number: cur_.next(); return expr::lit(cur_.number_value(t));
            case Tok::LParen: {
                cur_.next();
                guard(depth + 1);
                Expr inner = additive(depth + 1);
                cur_.expect(Tok::RParen, "')'");
                return inner;
            }
            case Tok::Ident: {
                cur_.next();
                const std::string name(t.text);
                if (name == kTimeSymbol) {
                    if (cur_.peek().kind == Tok::LParen) cur_.fail(cur_.peek(), ParseErrorCode::Syntax, "'time' cannot be applied");
                    return expr::time();
                }
                if (name == "exp" || name == "min" || name == "max") {
                    const Builtin fn = name == "exp" ? Builtin::Exp : name == "min" ? Builtin::Min : Builtin::Max;
                    cur_.expect(Tok::LParen, "'(' after '" + name + "'");
                    std::vector<Expr> args;
                    args.push_back(additive(depth + 1));
                    while (cur_.accept(Tok::Comma)) args.push_back(additive(depth + 1));
                    cur_.expect(Tok::RParen, "')'");
                    if (args.size() != builtin_arity(fn))
                        cur_.fail(cur_.span(t), ParseErrorCode::Syntax,
                                  "'" + name + "' takes " + std::to_string(builtin_arity(fn)) + " argument(s)");
                    return expr::call(fn, std::move(args));
                }
                if (cur_.accept(Tok::LParen)) {
                    Expr arg = additive(depth + 1);
                    cur_.expect(Tok::RParen, "')'");
                    refs_.push_back({name, cur_.span(t), true});
                    return expr::lookup(name, std::move(arg));
                }
                refs_.push_back({name, cur_.span(t), false});
                return expr::ref(name);
            }
            default:
                cur_.fail(t, ParseErrorCode::Syntax, "expected an expression, found " + Cursor::describe(t));
        }
    }

    Cursor& cur_;
    std::vector<NameRef>& refs_;
};

/// Runs `statement` on every non-blank line, collecting one error per failed
/// statement.
template <class Fn>
void for_each_statement(std::string_view text, std::vector<ParseError>& errors, Fn&& statement) {
    const auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const int line_no = static_cast<int>(i) + 1;
        try {
            Cursor cur(lex_line(lines[i], line_no), line_no);
            if (cur.at_end()) continue;
            statement(cur);
        } catch (const StatementError& e) {
            errors.push_back(e.error);
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Model language

/// Parses SDL model text. Every syntactic statement is checked before names
/// are resolved, so one bad line does not hide errors in later lines.
inline Parsed<Model> parse_model(std::string_view text) {
    using namespace detail;
    Parsed<Model> out;
    auto& errors = out.errors;

    struct Decl {
        DeclKind kind;
        std::string name;
        SourceSpan name_span;
        bool ok = false;  // statement parsed completely
        double value = 0.0;
        LookupTable table;
        std::optional<std::string> path;
        std::optional<std::pair<std::string, SourceSpan>> source, sink;
        Expr expr;
        std::vector<NameRef> refs;
    };
    std::vector<Decl> decls;
    std::optional<std::pair<std::string, SourceSpan>> model_name;
    std::optional<std::pair<TimeSpec, SourceSpan>> time_spec;

    for_each_statement(text, errors, [&](Cursor& cur) {
        const Token& kw = cur.next();
        if (kw.kind != Tok::Ident) cur.fail(kw, ParseErrorCode::Syntax, "expected a statement keyword, found " + Cursor::describe(kw));
        const std::string_view word = kw.text;
        if (word == "model") {
            const Token& name = cur.identifier("a model name");
            cur.expect_end();
            if (model_name) cur.fail(cur.span_from(kw), ParseErrorCode::Syntax, "model name declared more than once");
            model_name.emplace(std::string(name.text), cur.span(name));
            return;
        }
        if (word == "time") {
            TimeSpec ts;
            ts.start = cur.real("a start time");
            cur.expect(Tok::DotDot, "'..'");
            ts.end = cur.real("an end time");
            cur.expect_word("step");
            ts.step = cur.real("a time step");
            cur.expect_end();
            const SourceSpan span = cur.span_from(kw);
            if (time_spec) cur.fail(span, ParseErrorCode::BadTimeSpec, "time spec declared more than once");
            time_spec.emplace(ts, span);
            if (!ts.valid())
                cur.fail(span, ParseErrorCode::BadTimeSpec, "time spec must satisfy start < end and 0 < step <= end - start");
            return;
        }

        Decl d;
        if (word == "param") d.kind = DeclKind::Parameter;
        else if (word == "stock") d.kind = DeclKind::Stock;
        else if (word == "lookup") d.kind = DeclKind::Lookup;
        else if (word == "flow") d.kind = DeclKind::Flow;
        else if (word == "output") d.kind = DeclKind::Output;
        else cur.fail(kw, ParseErrorCode::Syntax, "unknown statement '" + std::string(word) + "'");

        const Token& name = cur.identifier("a name");
        d.name = std::string(name.text);
        d.name_span = cur.span(name);
        // Register the name before parsing the rest so that a failed statement
        // still declares it and does not cascade into unresolved references.
        decls.push_back(d);
        Decl& cur_decl = decls.back();

        switch (d.kind) {
            case DeclKind::Parameter:
            case DeclKind::Stock:
                cur.expect(Tok::Equals, "'='");
                cur_decl.value = cur.real("a number");
                break;
            case DeclKind::Lookup:
                if (cur.accept_word("from")) {
                    cur_decl.path = cur.string_literal("a quoted file path");
                } else if (cur.accept_word("inline")) {
                    cur.expect(Tok::LBrace, "'{'");
                    std::vector<LookupPoint> pts;
                    do {
                        const Token& open = cur.expect(Tok::LParen, "'('");
                        LookupPoint p;
                        p.t = cur.real("a time");
                        cur.expect(Tok::Comma, "','");
                        p.value = cur.real("a value");
                        cur.expect(Tok::RParen, "')'");
                        if (!pts.empty() && !(p.t > pts.back().t))
                            cur.fail(cur.span_from(open), ParseErrorCode::Syntax, "lookup points must be strictly increasing in t");
                        pts.push_back(p);
                    } while (cur.accept(Tok::Comma));
                    cur.expect(Tok::RBrace, "'}'");
                    cur_decl.table = LookupTable(std::move(pts));
                } else {
                    cur.fail(cur.peek(), ParseErrorCode::Syntax, "expected 'from' or 'inline', found " + Cursor::describe(cur.peek()));
                }
                break;
            case DeclKind::Flow: {
                const Token& colon = cur.expect(Tok::Colon, "':'");
                if (cur.peek().kind == Tok::Ident) {
                    const Token& s = cur.identifier("a source stock");
                    cur_decl.source.emplace(std::string(s.text), cur.span(s));
                }
                cur.expect(Tok::Arrow, "'->'");
                if (cur.peek().kind == Tok::Ident && cur.peek(1).kind == Tok::Ident && cur.peek(1).text == "rate") {
                    const Token& s = cur.identifier("a sink stock");
                    cur_decl.sink.emplace(std::string(s.text), cur.span(s));
                }
                if (!cur_decl.source && !cur_decl.sink)
                    cur.fail(cur.span_from(colon), ParseErrorCode::Syntax, "flow needs a source or a sink stock");
                if (cur_decl.source && cur_decl.sink && cur_decl.source->first == cur_decl.sink->first)
                    cur.fail(cur_decl.sink->second, ParseErrorCode::Syntax, "flow source and sink must differ");
                cur.expect_word("rate");
                cur_decl.expr = ExpressionParser(cur, cur_decl.refs).parse();
                break;
            }
            case DeclKind::Output:
                cur.expect(Tok::Equals, "'='");
                cur_decl.expr = ExpressionParser(cur, cur_decl.refs).parse();
                break;
        }
        cur.expect_end();
        cur_decl.ok = true;
    });

    if (!model_name) errors.push_back({{1, 1, 1}, ParseErrorCode::Syntax, "missing 'model <name>' statement"});
    if (!time_spec) errors.push_back({{1, 1, 1}, ParseErrorCode::BadTimeSpec, "missing 'time <start> .. <end> step <h>' statement"});

    // Name resolution.
    std::map<std::string, DeclKind, std::less<>> names;
    for (const auto& d : decls) {
        if (!names.emplace(d.name, d.kind).second)
            errors.push_back({d.name_span, ParseErrorCode::DuplicateIdentifier, "'" + d.name + "' is already declared"});
    }
    for (const auto& d : decls) {
        if (!d.ok) continue;
        for (const auto* end : {&d.source, &d.sink}) {
            if (!*end) continue;
            auto it = names.find((*end)->first);
            if (it == names.end())
                errors.push_back({(*end)->second, ParseErrorCode::UnresolvedReference, "undeclared stock '" + (*end)->first + "'"});
            else if (it->second != DeclKind::Stock)
                errors.push_back({(*end)->second, ParseErrorCode::UnresolvedReference, "'" + (*end)->first + "' is not a stock"});
        }
        for (const auto& r : d.refs) {
            auto it = names.find(r.name);
            if (it == names.end())
                errors.push_back({r.span, ParseErrorCode::UnresolvedReference, "undeclared identifier '" + r.name + "'"});
            else if (it->second == DeclKind::Flow || it->second == DeclKind::Output)
                errors.push_back({r.span, ParseErrorCode::UnresolvedReference,
                                  "'" + r.name + "' is a flow or output and cannot be referenced"});
            else if (r.applied && it->second != DeclKind::Lookup)
                errors.push_back({r.span, ParseErrorCode::UnresolvedReference, "'" + r.name + "' is not a lookup"});
            else if (!r.applied && it->second == DeclKind::Lookup)
                errors.push_back({r.span, ParseErrorCode::UnresolvedReference,
                                  "lookup '" + r.name + "' must be applied to an argument"});
        }
    }
    if (!errors.empty()) return out;

    Model m(model_name->first, time_spec->first);
    for (auto& d : decls) {
        auto name_of = [](const auto& opt) { return opt ? std::optional<std::string>(opt->first) : std::nullopt; };
        switch (d.kind) {
            case DeclKind::Parameter: m.add_parameter(d.name, d.value); break;
            case DeclKind::Stock: m.add_stock(d.name, d.value); break;
            case DeclKind::Lookup: m.add_lookup(d.name, std::move(d.table), std::move(d.path)); break;
            case DeclKind::Flow: m.add_flow(d.name, name_of(d.source), name_of(d.sink), d.expr); break;
            case DeclKind::Output: m.add_output(d.name, d.expr); break;
        }
    }
    for (const auto& diag : validate_model(m))
        errors.push_back({{1, 1, 1}, ParseErrorCode::Syntax, diag.message});
    if (errors.empty()) out.value = std::move(m);
    return out;
}

namespace detail {

inline int precedence(const Expr& e) {
    if (const auto* b = std::get_if<Binary>(&e->node))
        return (b->op == BinaryOp::Add || b->op == BinaryOp::Sub) ? 1 : 2;
    if (const auto* l = std::get_if<Literal>(&e->node)) return std::signbit(l->value) ? 3 : 4;
    if (std::holds_alternative<Negate>(e->node)) return 3;
    return 4;
}

inline void write_expr(std::string& out, const Expr& e) {
    auto wrapped = [&](const Expr& child, bool paren) {
        if (paren) out += '(';
        write_expr(out, child);
        if (paren) out += ')';
    };
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Literal>) {
                out += format_real(x.value);
            } else if constexpr (std::is_same_v<T, Reference>) {
                out += x.name;
            } else if constexpr (std::is_same_v<T, TimeRef>) {
                out += kTimeSymbol;
            } else if constexpr (std::is_same_v<T, Negate>) {
                out += '-';
                // Anything but a plain atom gets parentheses; a bare number
                // would otherwise fold into a negative literal.
                const bool atom = precedence(x.operand) == 4 && !std::holds_alternative<Literal>(x.operand->node);
                wrapped(x.operand, !atom);
            } else if constexpr (std::is_same_v<T, Binary>) {
                const int p = precedence(e);
                wrapped(x.lhs, precedence(x.lhs) < p);
                static constexpr const char* ops[] = {" + ", " - ", " * ", " / "};
                out += ops[static_cast<int>(x.op)];
                wrapped(x.rhs, precedence(x.rhs) <= p);
            } else if constexpr (std::is_same_v<T, Call>) {
                out += builtin_name(x.fn);
                out += '(';
                for (std::size_t i = 0; i < x.args.size(); ++i) {
                    if (i) out += ", ";
                    write_expr(out, x.args[i]);
                }
                out += ')';
            } else {
                out += x.table;
                out += '(';
                write_expr(out, x.arg);
                out += ')';
            }
        },
        e->node);
}

}  // namespace detail

inline std::string serialize_expression(const Expr& e) {
    std::string out;
    detail::write_expr(out, e);
    return out;
}

/// Renders a model as SDL text that parses back to a structurally identical
/// model. File-backed lookups are written as `from` references; their loaded
/// points are not embedded.
inline std::string serialize_model(const Model& m) {
    std::string out;
    out += "model " + m.name() + "\n";
    const auto& ts = m.time_spec();
    out += "time " + format_real(ts.start) + " .. " + format_real(ts.end) + " step " + format_real(ts.step) + "\n";
    for (const auto& d : m.declaration_order()) {
        switch (d.kind) {
            case DeclKind::Parameter: {
                const auto& p = m.parameters()[d.index];
                out += "param " + p.name + " = " + format_real(p.value) + "\n";
                break;
            }
            case DeclKind::Lookup: {
                const auto& l = m.lookups()[d.index];
                out += "lookup " + l.name;
                if (l.source_path) {
                    out += " from \"" + *l.source_path + "\"\n";
                } else {
                    out += " inline {";
                    for (std::size_t i = 0; i < l.table.size(); ++i) {
                        out += i ? ", (" : " (";
                        out += format_real(l.table.points()[i].t) + ", " + format_real(l.table.points()[i].value) + ")";
                    }
                    out += " }\n";
                }
                break;
            }
            case DeclKind::Stock: {
                const auto& s = m.stocks()[d.index];
                out += "stock " + s.name + " = " + format_real(s.initial_value) + "\n";
                break;
            }
            case DeclKind::Flow: {
                const auto& f = m.flows()[d.index];
                out += "flow " + f.name + ": ";
                if (f.source) out += *f.source + " ";
                out += "->";
                if (f.sink) out += " " + *f.sink;
                out += " rate " + serialize_expression(f.rate) + "\n";
                break;
            }
            case DeclKind::Output: {
                const auto& o = m.outputs()[d.index];
                out += "output " + o.name + " = " + serialize_expression(o.value) + "\n";
                break;
            }
        }
    }
    return out;
}

}  // namespace sdkit

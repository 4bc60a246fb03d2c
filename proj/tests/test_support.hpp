#pragma once

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "sdkit/io.hpp"
#include "sdkit/model.hpp"

namespace sdkit::test_support {

/// Random well-formed models for property tests. Names avoid statement
/// keywords so that generated text stays unambiguous.
class ModelGenerator {
public:
    explicit ModelGenerator(std::uint64_t seed) : rng_(seed) {}

    double real() {
        switch (pick(6)) {
            case 0: return 0.0;
            case 1: return static_cast<double>(pick(100));
            case 2: return std::uniform_real_distribution<double>(-1e3, 1e3)(rng_);
            case 3: return std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
            case 4: return std::ldexp(std::uniform_real_distribution<double>(-1.0, 1.0)(rng_), pick(120) - 60);
            default: return -static_cast<double>(pick(50)) / 7.0;
        }
    }

    Expr expression(const std::vector<std::string>& values, const std::vector<std::string>& lookups, int depth = 0) {
        const int choice = depth > 3 ? pick(3) : pick(9);
        switch (choice) {
            case 0: return expr::lit(real());
            case 1: return values.empty() ? expr::lit(1.0) : expr::ref(values[pick(values.size())]);
            case 2: return expr::time();
            case 3: return expr::neg(expression(values, lookups, depth + 1));
            case 4:
            case 5:
                return expr::binary(static_cast<BinaryOp>(pick(4)), expression(values, lookups, depth + 1),
                                    expression(values, lookups, depth + 1));
            case 6: return expr::call(Builtin::Exp, {expression(values, lookups, depth + 1)});
            case 7:
                return expr::call(pick(2) ? Builtin::Min : Builtin::Max,
                                  {expression(values, lookups, depth + 1), expression(values, lookups, depth + 1)});
            default:
                if (lookups.empty()) return expr::lit(2.5);
                return expr::lookup(lookups[pick(lookups.size())], expression(values, lookups, depth + 1));
        }
    }

    Model model() {
        Model m("m" + std::to_string(pick(1000)));
        const double start = static_cast<double>(pick(10));
        const double span = 1.0 + pick(50);
        m.set_time_spec({start, start + span, span / (1 + pick(100))});
        std::vector<std::string> values, lookups, stocks;
        int counter = 0;
        auto fresh = [&](const char* prefix) { return std::string(prefix) + std::to_string(counter++); };

        // Random interleaving of declarations; expressions only reference
        // names declared earlier.
        const int n_decls = 1 + pick(12);
        for (int i = 0; i < n_decls; ++i) {
            switch (pick(5)) {
                case 0: {
                    auto name = fresh("k");
                    m.add_parameter(name, real());
                    values.push_back(name);
                    break;
                }
                case 1: {
                    auto name = fresh("L");
                    std::vector<LookupPoint> pts;
                    double t = std::uniform_real_distribution<double>(-100.0, 100.0)(rng_);
                    for (int j = 0, n = 1 + pick(5); j < n; ++j) {
                        pts.push_back({t, real()});
                        t += 0.25 + pick(10);
                    }
                    if (pick(4) == 0)
                        m.add_lookup(name, {}, "data/" + name + ".csv");
                    else
                        m.add_lookup(name, LookupTable(std::move(pts)));
                    lookups.push_back(name);
                    break;
                }
                case 2: {
                    auto name = fresh("S");
                    m.add_stock(name, real());
                    values.push_back(name);
                    stocks.push_back(name);
                    break;
                }
                case 3: {
                    if (stocks.empty()) break;
                    std::optional<std::string> src, dst;
                    const int kind = pick(3);
                    if (kind != 0) src = stocks[pick(stocks.size())];
                    if (kind != 1) dst = stocks[pick(stocks.size())];
                    if (src && dst && *src == *dst) dst.reset();
                    m.add_flow(fresh("f"), src, dst, expression(values, lookups));
                    break;
                }
                default: m.add_output(fresh("out"), expression(values, lookups)); break;
            }
        }
        return m;
    }

    int pick(std::size_t n) { return static_cast<int>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_)); }

    std::mt19937_64& rng() { return rng_; }

private:
    std::mt19937_64 rng_;
};

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("sdkit_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

struct CliOutcome {
    int code = -1;
    std::string out, err;
};

inline std::string shell_quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

/// Runs the executable at `exe` with `args`; both streams are captured
/// through files in `scratch`.
inline CliOutcome run_cli(const std::string& exe, const std::vector<std::string>& args, const TempDir& scratch) {
    std::string cmd = shell_quote(exe);
    for (const auto& a : args) cmd += " " + shell_quote(a);
    const auto out = scratch / "stdout.txt", err = scratch / "stderr.txt";
    cmd += " >" + shell_quote(out.string()) + " 2>" + shell_quote(err.string());
    const int status = std::system(cmd.c_str());
    CliOutcome o;
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.out = read_text_file(out);
    o.err = read_text_file(err);
    return o;
}

/// dx/dt = -rate * x with one stock.
inline Model decay_model(double rate, double x0, TimeSpec ts) {
    Model m("decay", ts);
    m.add_parameter("k", rate).add_stock("x", x0).add_flow("loss", "x", std::nullopt, expr::mul(expr::ref("k"), expr::ref("x")));
    return m;
}

/// Closed A -> B transfer at rate k * A.
inline Model transfer_model(double k, double a0, double b0, TimeSpec ts) {
    Model m("transfer", ts);
    m.add_parameter("k", k)
        .add_stock("A", a0)
        .add_stock("B", b0)
        .add_flow("move", "A", "B", expr::mul(expr::ref("k"), expr::ref("A")))
        .add_output("Total", expr::add(expr::ref("A"), expr::ref("B")));
    return m;
}

}  // namespace sdkit::test_support

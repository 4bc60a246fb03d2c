#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "sdkit/calibrate.hpp"
#include "sdkit/engine.hpp"
#include "sdkit/io.hpp"
#include "sdkit/parser.hpp"

namespace sdkit {

// ---------------------------------------------------------------------------
// Experiment files (.sdx)
//
//   scenario <name> model "<path>" [integrator euler|rk4] [step <h>]
//   set <scenario>.<param> = <real>
//   observe <series> from "<csv path>"
//   report <series> [, <series>]...
//
// Paths are relative to the experiment file.

struct Scenario {
    std::string name;
    std::string model_path;
    RunConfig run_config;  // parameter overrides live here
};

struct ObservationRef {
    std::string series;
    std::string csv_path;
};

struct ExperimentSpec {
    std::vector<Scenario> scenarios;
    std::vector<ObservationRef> observations;
    std::vector<std::string> report_outputs;
};

class InvalidExperimentError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void parse_run_option(Cursor& cur, RunConfig& cfg) {
    if (cur.accept_word("integrator")) {
        const Token& t = cur.expect(Tok::Ident, "'euler' or 'rk4'");
        auto kind = parse_integrator(t.text);
        if (!kind) cur.fail(t, ParseErrorCode::Syntax, "unknown integrator '" + std::string(t.text) + "'");
        cfg.integrator = *kind;
    } else if (cur.accept_word("step")) {
        const Token& at = cur.peek();
        const double h = cur.real("a step size");
        if (!(h > 0.0)) cur.fail(at, ParseErrorCode::BadTimeSpec, "step must be positive");
        cfg.step_override = h;
    } else {
        cur.fail(cur.peek(), ParseErrorCode::Syntax, "expected 'integrator' or 'step', found " + Cursor::describe(cur.peek()));
    }
}

}  // namespace detail

inline Parsed<ExperimentSpec> parse_experiment(std::string_view text) {
    using namespace detail;
    Parsed<ExperimentSpec> out;
    ExperimentSpec spec;
    struct PendingSet {
        std::string scenario;
        SourceSpan span;
        std::string param;
        double value;
    };
    std::vector<PendingSet> sets;
    std::map<std::string, std::size_t> index;

    for_each_statement(text, out.errors, [&](Cursor& cur) {
        const Token& kw = cur.expect(Tok::Ident, "a statement keyword");
        if (kw.text == "scenario") {
            const Token& name = cur.identifier("a scenario name");
            Scenario sc;
            sc.name = std::string(name.text);
            cur.expect_word("model");
            sc.model_path = cur.string_literal("a quoted model path");
            while (!cur.at_end()) parse_run_option(cur, sc.run_config);
            if (index.count(sc.name))
                cur.fail(name, ParseErrorCode::DuplicateIdentifier, "scenario '" + sc.name + "' is already declared");
            index[sc.name] = spec.scenarios.size();
            spec.scenarios.push_back(std::move(sc));
        } else if (kw.text == "set") {
            const Token& sc = cur.identifier("a scenario name");
            cur.expect(Tok::Dot, "'.'");
            const Token& param = cur.identifier("a parameter name");
            cur.expect(Tok::Equals, "'='");
            const double v = cur.real("a number");
            cur.expect_end();
            sets.push_back({std::string(sc.text), cur.span(sc), std::string(param.text), v});
        } else if (kw.text == "observe") {
            const Token& series = cur.identifier("a series name");
            cur.expect_word("from");
            std::string path = cur.string_literal("a quoted CSV path");
            cur.expect_end();
            spec.observations.push_back({std::string(series.text), std::move(path)});
        } else if (kw.text == "report") {
            do {
                spec.report_outputs.emplace_back(cur.identifier("a series name").text);
            } while (cur.accept(Tok::Comma));
            cur.expect_end();
        } else {
            cur.fail(kw, ParseErrorCode::Syntax, "unknown statement '" + std::string(kw.text) + "'");
        }
    });
    for (const auto& s : sets) {
        auto it = index.find(s.scenario);
        if (it == index.end())
            out.errors.push_back({s.span, ParseErrorCode::UnresolvedReference, "unknown scenario '" + s.scenario + "'"});
        else
            spec.scenarios[it->second].run_config.parameter_overrides[s.param] = s.value;
    }
    if (out.errors.empty()) out.value = std::move(spec);
    return out;
}

// ---------------------------------------------------------------------------
// Calibration files (.sdc)
//
//   free <param> in [<lo>, <hi>] guess <real>
//   observe <series> from "<csv path>" [weight <real>]
//   set <param> = <real>
//   integrator euler|rk4
//   step <h>
//   option max_evaluations|tolerance|restarts|seed = <real>

struct CalibrationSpec {
    std::vector<FreeParameter> free_parameters;
    std::vector<ObservationRef> observations;
    std::vector<double> weights;  // parallel to observations
    RunConfig run_config;
    CalibrationOptions options;
};

inline Parsed<CalibrationSpec> parse_calibration_spec(std::string_view text) {
    using namespace detail;
    Parsed<CalibrationSpec> out;
    CalibrationSpec spec;
    for_each_statement(text, out.errors, [&](Cursor& cur) {
        const Token& kw = cur.peek();
        if (kw.kind != Tok::Ident) cur.fail(kw, ParseErrorCode::Syntax, "expected a statement keyword");
        if (kw.text == "integrator" || kw.text == "step") {
            parse_run_option(cur, spec.run_config);
            cur.expect_end();
            return;
        }
        cur.next();
        if (kw.text == "free") {
            FreeParameter fp;
            fp.name = std::string(cur.identifier("a parameter name").text);
            cur.expect_word("in");
            cur.expect(Tok::LBracket, "'['");
            fp.lower = cur.real("a lower bound");
            cur.expect(Tok::Comma, "','");
            fp.upper = cur.real("an upper bound");
            cur.expect(Tok::RBracket, "']'");
            cur.expect_word("guess");
            fp.initial_guess = cur.real("an initial guess");
            cur.expect_end();
            spec.free_parameters.push_back(std::move(fp));
        } else if (kw.text == "observe") {
            const Token& series = cur.identifier("a series name");
            cur.expect_word("from");
            std::string path = cur.string_literal("a quoted CSV path");
            double weight = 1.0;
            if (cur.accept_word("weight")) {
                const Token& at = cur.peek();
                weight = cur.real("a weight");
                if (!(weight > 0.0)) cur.fail(at, ParseErrorCode::BadNumber, "weight must be positive");
            }
            cur.expect_end();
            spec.observations.push_back({std::string(series.text), std::move(path)});
            spec.weights.push_back(weight);
        } else if (kw.text == "set") {
            const Token& param = cur.identifier("a parameter name");
            cur.expect(Tok::Equals, "'='");
            spec.run_config.parameter_overrides[std::string(param.text)] = cur.real("a number");
            cur.expect_end();
        } else if (kw.text == "option") {
            const Token& name = cur.expect(Tok::Ident, "an option name");
            cur.expect(Tok::Equals, "'='");
            const Token& at = cur.peek();
            const double v = cur.real("a number");
            cur.expect_end();
            auto integral = [&](double lo) {
                if (v != std::floor(v) || v < lo || v > 1e15)
                    cur.fail(at, ParseErrorCode::BadNumber, "option '" + std::string(name.text) + "' needs an integer >= " + format_real(lo));
                return v;
            };
            if (name.text == "max_evaluations") spec.options.max_evaluations = static_cast<int>(std::min(integral(1), 2e9));
            else if (name.text == "restarts") spec.options.restarts = static_cast<int>(std::min(integral(0), 1e6));
            else if (name.text == "seed") spec.options.seed = static_cast<std::uint64_t>(integral(0));
            else if (name.text == "tolerance") {
                if (!(v >= 0.0)) cur.fail(at, ParseErrorCode::BadNumber, "tolerance must be non-negative");
                spec.options.simplex_tolerance = v;
            } else {
                cur.fail(name, ParseErrorCode::Syntax, "unknown option '" + std::string(name.text) + "'");
            }
        } else {
            cur.fail(kw, ParseErrorCode::Syntax, "unknown statement '" + std::string(kw.text) + "'");
        }
    });
    if (out.errors.empty()) out.value = std::move(spec);
    return out;
}

// ---------------------------------------------------------------------------
// Validation report

struct ValidationRow {
    std::string scenario;
    std::string series;
    double rmse = 0.0;
    double mae = 0.0;
    double max_abs_error = 0.0;
    int n_points = 0;
    bool extrapolation_flag = false;
};

/// Fit metrics of one simulated series against observations. Throws
/// UnknownSeriesError / OutOfRangeError from sample_result.
inline ValidationRow validate_series(const SimulationResult& r, const std::string& scenario, const std::string& series,
                                     const std::vector<LookupPoint>& observed) {
    if (observed.empty()) throw Error("no observations for '" + series + "'");
    ValidationRow row{scenario, series};
    double sq = 0.0, abs_sum = 0.0;
    for (const auto& p : observed) {
        const double d = std::abs(sample_result(r, series, p.t) - p.value);
        sq += d * d;
        abs_sum += d;
        row.max_abs_error = std::max(row.max_abs_error, d);
    }
    row.n_points = static_cast<int>(observed.size());
    row.rmse = std::sqrt(sq / row.n_points);
    row.mae = abs_sum / row.n_points;
    row.extrapolation_flag = r.lookups_clamped();
    return row;
}

inline std::string format_validation_csv(const std::vector<ValidationRow>& rows) {
    std::string out = "scenario,series,n_points,rmse,mae,max_abs_error,extrapolation_flag\n";
    for (const auto& r : rows)
        out += r.scenario + "," + r.series + "," + std::to_string(r.n_points) + "," + format_real(r.rmse) + "," +
               format_real(r.mae) + "," + format_real(r.max_abs_error) + "," + (r.extrapolation_flag ? "true" : "false") +
               "\n";
    return out;
}

/// Parses a dense result CSV (`t,<series>...`) back into a result.
inline SimulationResult parse_result_csv(std::string_view text, const std::string& origin = "<csv>") {
    SimulationResult r;
    const auto lines = split_lines(text);
    auto fields = [](std::string_view line) {
        std::vector<std::string> f;
        std::size_t pos = 0;
        while (true) {
            auto c = line.find(',', pos);
            f.emplace_back(line.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos));
            if (c == std::string_view::npos) break;
            pos = c + 1;
        }
        return f;
    };
    bool header = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty() || lines[i].front() == '#') continue;
        auto f = fields(lines[i]);
        const int line_no = static_cast<int>(i) + 1;
        if (!header) {
            if (f.empty() || f[0] != "t") throw CsvError(origin, line_no, "expected header starting with 't'");
            for (std::size_t k = 1; k < f.size(); ++k) r.series.push_back({f[k], {}});
            header = true;
            continue;
        }
        if (f.size() != r.series.size() + 1) throw CsvError(origin, line_no, "wrong number of columns");
        std::vector<double> row;
        for (const auto& s : f) {
            char* end = nullptr;
            const double v = std::strtod(s.c_str(), &end);
            if (s.empty() || end != s.c_str() + s.size()) throw CsvError(origin, line_no, "'" + s + "' is not a number");
            row.push_back(v);
        }
        r.times.push_back(row[0]);
        for (std::size_t k = 0; k < r.series.size(); ++k) r.series[k].values.push_back(row[k + 1]);
    }
    if (!header) throw CsvError(origin, 1, "missing header");
    return r;
}

// ---------------------------------------------------------------------------
// Batch runs

struct ScenarioOutcome {
    std::string scenario;
    std::optional<SimulationResult> result;
    std::string error;  // set when the run failed
};

/// Runs every (model, config) pair, using up to `jobs` threads. Results come
/// back in input order and do not depend on the number of threads.
inline std::vector<ScenarioOutcome> run_scenarios(const std::vector<std::pair<const Model*, const Scenario*>>& work,
                                                  unsigned jobs) {
    std::vector<ScenarioOutcome> outcomes(work.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < work.size(); i = next++) {
            auto& o = outcomes[i];
            o.scenario = work[i].second->name;
            try {
                o.result = run(*work[i].first, work[i].second->run_config);
            } catch (const Error& e) {
                o.error = e.what();
            }
        }
    };
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, work.size()))));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }
    return outcomes;
}

}  // namespace sdkit

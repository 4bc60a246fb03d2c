#pragma once

#include <chrono>
#include <filesystem>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "sdkit/calibrate.hpp"
#include "sdkit/engine.hpp"
#include "sdkit/experiment.hpp"
#include "sdkit/io.hpp"
#include "sdkit/svg.hpp"
#include "sdkit/tcell.hpp"

// Subcommand implementations behind the `sdkit` executable. Each returns the
// process exit code: 0 ok, 1 input or validation error, 2 runtime failure.

namespace sdkit::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kInputError = 1, kRuntimeError = 2 };

struct Streams {
    std::ostream& out;
    std::ostream& err;
};

namespace detail {

inline void report_warnings(const Model& m, const SimulationResult& r, std::ostream& err) {
    for (const auto& d : check_result(m, r)) err << "warning: " << to_string(d.code) << ": " << d.message << "\n";
}

inline std::vector<svg::Series> as_lines(const SimulationResult& r, const std::string& series, const std::string& label) {
    std::vector<svg::Series> out;
    if (const auto* v = r.find(series)) out.push_back({label, r.times, *v});
    return out;
}

inline svg::Series as_markers(const std::string& name, const std::vector<LookupPoint>& pts) {
    svg::Series s{name, {}, {}};
    for (const auto& p : pts) {
        s.x.push_back(p.t);
        s.y.push_back(p.value);
    }
    return s;
}

/// Loads a model, printing load errors. Returns nullopt on failure.
inline std::optional<Model> load(const fs::path& path, Streams io) {
    try {
        return load_model_file(path);
    } catch (const ModelLoadError& e) {
        io.err << e.what() << "\n";
        if (e.errors().empty()) io.err << path.string() << ": could not be loaded\n";
        return std::nullopt;
    }
}

}  // namespace detail

/// Parse and validate only.
inline int cmd_check(const fs::path& model_path, Streams io) {
    auto model = detail::load(model_path, io);
    if (!model) return kInputError;
    io.out << "ok: model " << model->name() << " (" << model->stocks().size() << " stocks, " << model->flows().size()
           << " flows, " << model->outputs().size() << " outputs)\n";
    return kOk;
}

struct RunOptions {
    std::map<std::string, double, std::less<>> overrides;
    IntegratorKind integrator = IntegratorKind::Rk4;
    std::optional<double> step;
    fs::path out_dir = "out";
};

inline int cmd_run(const fs::path& model_path, const RunOptions& opts, Streams io) {
    auto model = detail::load(model_path, io);
    if (!model) return kInputError;
    RunConfig cfg{opts.integrator, opts.step, opts.overrides};
    const auto started = std::chrono::steady_clock::now();
    SimulationResult result;
    try {
        result = run(*model, cfg);
    } catch (const InvalidRunConfigError& e) {
        io.err << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const InvalidModelError& e) {
        io.err << model_path.string() << ": " << e.what() << "\n";
        return kInputError;
    } catch (const RunFailure& e) {
        io.err << "runtime error: " << e.what() << "\n";
        return kRuntimeError;
    }
    const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started);
    detail::report_warnings(*model, result, io.err);
    try {
        const std::string stem = model->name() + "_default";
        write_text_file(opts.out_dir / (stem + ".csv"), format_result_csv(result));
        for (const auto& s : result.series)
            svg::emit_svg(detail::as_lines(result, s.name, s.name), {}, model->name() + ": " + s.name,
                          opts.out_dir / (stem + "_" + s.name + ".svg"));
    } catch (const IoError& e) {
        io.err << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    io.out << "grid points: " << result.times.size() << "\n";
    io.out << "wall time: " << elapsed.count() << " ms\n";
    io.out << "wrote " << (opts.out_dir / (model->name() + "_default.csv")).string() << "\n";
    return kOk;
}

struct ObservationArg {
    std::string series;
    fs::path csv;
};

inline int cmd_validate(const fs::path& model_path, const std::vector<ObservationArg>& obs, const fs::path& out_dir,
                        Streams io) {
    auto model = detail::load(model_path, io);
    if (!model) return kInputError;
    if (obs.empty()) {
        io.err << "error: no observations given (use --obs <series>=<csv>)\n";
        return kInputError;
    }
    std::vector<std::vector<LookupPoint>> data;
    for (const auto& o : obs) {
        if (!model->has_series(o.series)) {
            io.err << "error: unknown series '" << o.series << "'\n";
            return kInputError;
        }
        try {
            data.push_back(read_series_csv(o.csv));
        } catch (const IoError& e) {
            io.err << "error: " << e.what() << "\n";
            return kInputError;
        }
        const auto& ts = model->time_spec();
        for (const auto& p : data.back())
            if (!(p.t >= ts.start && p.t <= ts.end)) {
                io.err << "error: observation time " << format_real(p.t) << " in " << o.csv.string()
                       << " is outside the simulated range\n";
                return kInputError;
            }
    }
    SimulationResult result;
    try {
        result = run(*model);
    } catch (const RunFailure& e) {
        io.err << "runtime error: " << e.what() << "\n";
        return kRuntimeError;
    } catch (const Error& e) {
        io.err << "error: " << e.what() << "\n";
        return kInputError;
    }
    std::vector<ValidationRow> rows;
    for (std::size_t i = 0; i < obs.size(); ++i) rows.push_back(validate_series(result, "default", obs[i].series, data[i]));

    io.out << "series  n  RMSE  MAE  max_abs_error  extrapolated\n";
    for (const auto& r : rows)
        io.out << r.series << "  " << r.n_points << "  " << format_real(r.rmse) << "  " << format_real(r.mae) << "  "
               << format_real(r.max_abs_error) << "  " << (r.extrapolation_flag ? "yes" : "no") << "\n";
    if (result.lookups_clamped()) {
        io.out << "note: lookups held at their endpoint values outside their data range:";
        for (const auto& n : result.clamped_lookups) io.out << " " << n;
        io.out << "\n";
    }
    try {
        write_text_file(out_dir / "validation.csv", format_validation_csv(rows));
        for (std::size_t i = 0; i < obs.size(); ++i)
            svg::emit_svg(detail::as_lines(result, obs[i].series, obs[i].series + " (simulated)"),
                          {detail::as_markers(obs[i].series + " (observed)", data[i])},
                          model->name() + ": " + obs[i].series + " vs observed",
                          out_dir / (model->name() + "_validation_" + obs[i].series + ".svg"));
    } catch (const IoError& e) {
        io.err << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kOk;
}

namespace detail {

inline std::string csv_field(std::string s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

}  // namespace detail

struct BatchOptions {
    fs::path out_dir = "out";
    unsigned jobs = 0;  // 0 = hardware concurrency
};

inline int cmd_batch(const fs::path& experiment_path, const BatchOptions& opts, Streams io) {
    std::string text;
    try {
        text = read_text_file(experiment_path);
    } catch (const IoError& e) {
        io.err << "error: " << e.what() << "\n";
        return kInputError;
    }
    auto parsed = parse_experiment(text);
    if (!parsed) {
        for (const auto& e : parsed.errors) io.err << format_error(experiment_path.string(), e) << "\n";
        return kInputError;
    }
    const ExperimentSpec& spec = *parsed.value;
    if (spec.scenarios.empty()) {
        io.err << experiment_path.string() << ": InvalidExperiment: no scenarios declared\n";
        return kInputError;
    }
    const fs::path base = experiment_path.parent_path();
    std::vector<Model> models;
    models.reserve(spec.scenarios.size());
    for (const auto& sc : spec.scenarios) {
        auto m = detail::load(base / sc.model_path, io);
        if (!m) return kInputError;
        for (const auto& [name, value] : sc.run_config.parameter_overrides)
            if (!m->find_parameter(name)) {
                io.err << experiment_path.string() << ": InvalidExperiment: scenario '" << sc.name
                       << "' sets unknown parameter '" << name << "'\n";
                return kInputError;
            }
        for (const auto& r : spec.report_outputs)
            if (!m->has_series(r)) {
                io.err << experiment_path.string() << ": InvalidExperiment: report series '" << r
                       << "' is missing from the model of scenario '" << sc.name << "'\n";
                return kInputError;
            }
        for (const auto& o : spec.observations)
            if (!m->has_series(o.series)) {
                io.err << experiment_path.string() << ": InvalidExperiment: observed series '" << o.series
                       << "' is missing from the model of scenario '" << sc.name << "'\n";
                return kInputError;
            }
        models.push_back(std::move(*m));
    }
    std::vector<std::vector<LookupPoint>> obs_data;
    for (const auto& o : spec.observations) {
        try {
            obs_data.push_back(read_series_csv(base / o.csv_path));
        } catch (const IoError& e) {
            io.err << "error: " << e.what() << "\n";
            return kInputError;
        }
    }

    std::vector<std::pair<const Model*, const Scenario*>> work;
    for (std::size_t i = 0; i < models.size(); ++i) work.push_back({&models[i], &spec.scenarios[i]});
    const unsigned jobs = opts.jobs ? opts.jobs : std::max(1u, std::thread::hardware_concurrency());
    const auto outcomes = run_scenarios(work, jobs);

    // Header: per report series its final value, then each observed series
    // sampled at every observation time.
    std::string csv = "scenario,status";
    for (const auto& r : spec.report_outputs) csv += "," + r + "@final";
    for (std::size_t k = 0; k < spec.observations.size(); ++k)
        for (const auto& p : obs_data[k]) csv += "," + spec.observations[k].series + "@" + format_real(p.t);
    csv += ",message\n";

    std::vector<ValidationRow> validation;
    std::size_t ok = 0;
    try {
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            const auto& o = outcomes[i];
            csv += o.scenario;
            if (!o.result) {
                csv += ",failed";
                for (std::size_t k = 0; k < spec.report_outputs.size(); ++k) csv += ",";
                for (const auto& d : obs_data) csv += std::string(d.size(), ',');
                csv += "," + detail::csv_field(o.error) + "\n";
                io.err << "scenario " << o.scenario << " failed: " << o.error << "\n";
                continue;
            }
            ++ok;
            const SimulationResult& r = *o.result;
            csv += ",ok";
            for (const auto& name : spec.report_outputs) csv += "," + format_real(r.find(name)->back());
            for (std::size_t k = 0; k < spec.observations.size(); ++k) {
                for (const auto& p : obs_data[k]) {
                    csv += ",";
                    try {
                        csv += format_real(sample_result(r, spec.observations[k].series, p.t));
                    } catch (const OutOfRangeError&) {
                    }
                }
                try {
                    validation.push_back(validate_series(r, o.scenario, spec.observations[k].series, obs_data[k]));
                } catch (const OutOfRangeError&) {
                }
            }
            csv += ",\n";
            write_text_file(opts.out_dir / (models[i].name() + "_" + o.scenario + ".csv"), format_result_csv(r));
        }
        write_text_file(opts.out_dir / "comparison.csv", csv);
        if (!validation.empty()) write_text_file(opts.out_dir / "validation.csv", format_validation_csv(validation));
        for (const auto& name : spec.report_outputs) {
            std::vector<svg::Series> lines, markers;
            for (const auto& o : outcomes)
                if (o.result) lines.push_back({o.scenario, o.result->times, *o.result->find(name)});
            for (std::size_t k = 0; k < spec.observations.size(); ++k)
                if (spec.observations[k].series == name)
                    markers.push_back(detail::as_markers(name + " (observed)", obs_data[k]));
            if (!lines.empty())
                svg::emit_svg(lines, markers, "Scenario comparison: " + name, opts.out_dir / ("comparison_" + name + ".svg"));
        }
    } catch (const IoError& e) {
        io.err << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    io.out << ok << " of " << outcomes.size() << " scenarios succeeded; wrote "
           << (opts.out_dir / "comparison.csv").string() << "\n";
    return ok > 0 ? kOk : kRuntimeError;
}

inline int cmd_calibrate(const fs::path& model_path, const fs::path& spec_path, const fs::path& out_dir, Streams io) {
    auto model = detail::load(model_path, io);
    if (!model) return kInputError;
    std::string text;
    try {
        text = read_text_file(spec_path);
    } catch (const IoError& e) {
        io.err << "error: " << e.what() << "\n";
        return kInputError;
    }
    auto parsed = parse_calibration_spec(text);
    if (!parsed) {
        for (const auto& e : parsed.errors) io.err << format_error(spec_path.string(), e) << "\n";
        return kInputError;
    }
    CalibrationSpec& spec = *parsed.value;
    CalibrationProblem problem{*model, spec.free_parameters, {}, spec.run_config};
    for (std::size_t i = 0; i < spec.observations.size(); ++i) {
        try {
            problem.observations.push_back(
                {spec.observations[i].series, read_series_csv(spec_path.parent_path() / spec.observations[i].csv_path),
                 spec.weights[i]});
        } catch (const IoError& e) {
            io.err << "error: " << e.what() << "\n";
            return kInputError;
        }
    }
    CalibrationResult result;
    try {
        result = calibrate(problem, spec.options);
    } catch (const InvalidProblemError& e) {
        io.err << spec_path.string() << ": " << e.what() << "\n";
        return kInputError;
    }
    if (!std::isfinite(result.objective_value)) {
        io.err << "runtime error: every evaluated candidate failed to simulate\n";
        return kRuntimeError;
    }

    std::string fragment = "# best fit: objective " + format_real(result.objective_value) + " after " +
                           std::to_string(result.evaluations) + " evaluations" +
                           (result.converged ? "" : " (not converged)") + "\n";
    for (const auto& fp : problem.free_parameters)
        fragment += "param " + fp.name + " = " + format_real(result.best_parameters.at(fp.name)) + "\n";
    std::string trace = "evaluation,objective\n";
    for (const auto& t : result.trace) trace += std::to_string(t.evaluation) + "," + format_real(t.objective) + "\n";

    try {
        write_text_file(out_dir / "best_params.sdl", fragment);
        write_text_file(out_dir / "trace.csv", trace);
        RunConfig fitted = problem.run_config;
        for (const auto& [k, v] : result.best_parameters) fitted.parameter_overrides[k] = v;
        const SimulationResult r = run(problem.model, fitted);
        for (const auto& obs : problem.observations)
            svg::emit_svg(detail::as_lines(r, obs.output_name, obs.output_name + " (fitted)"),
                          {detail::as_markers(obs.output_name + " (observed)", obs.points)},
                          model->name() + ": fitted " + obs.output_name, out_dir / ("fit_" + obs.output_name + ".svg"));
    } catch (const IoError& e) {
        io.err << "error: " << e.what() << "\n";
        return kRuntimeError;
    } catch (const RunFailure& e) {
        io.err << "runtime error: " << e.what() << "\n";
        return kRuntimeError;
    }

    io.out << (result.converged ? "converged" : "not converged") << " after " << result.evaluations
           << " evaluations; objective " << format_real(result.objective_value) << "\n";
    for (const auto& [k, v] : result.best_parameters) io.out << "  " << k << " = " << format_real(v) << "\n";
    return kOk;
}

/// Writes the synthetic stand-in data for the T-cell model.
inline int cmd_standin_data(const fs::path& out_dir, Streams io) {
    try {
        tcell::write_standin_dataset(out_dir);
    } catch (const IoError& e) {
        io.err << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    for (const char* f : {tcell::kNaivesFile, tcell::kActivesFile, tcell::kTotalNaiveFile})
        io.out << "wrote " << (out_dir / f).string() << "\n";
    return kOk;
}

}  // namespace sdkit::cli

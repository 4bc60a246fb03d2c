#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "sdkit/engine.hpp"
#include "sdkit/format.hpp"

namespace sdkit {

struct ObservedSeries {
    std::string output_name;
    std::vector<LookupPoint> points;
    double weight = 1.0;
};

struct FreeParameter {
    std::string name;
    double lower = 0.0;
    double upper = 1.0;
    double initial_guess = 0.5;
};

struct CalibrationProblem {
    Model model;
    std::vector<FreeParameter> free_parameters;
    std::vector<ObservedSeries> observations;
    RunConfig run_config;
};

struct CalibrationOptions {
    int max_evaluations = 2000;
    double simplex_tolerance = 1e-10;
    int restarts = 2;
    std::uint64_t seed = 1;
    /// Called with every evaluated (clamped) candidate and its objective.
    std::function<void(const std::vector<double>&, double)> on_evaluation;
};

struct TraceEntry {
    int evaluation;  // 1-based index of the evaluation that improved the best
    double objective;
    friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct CalibrationResult {
    std::map<std::string, double> best_parameters;
    std::vector<double> best_vector;  // free-parameter order
    double objective_value = 0.0;
    int evaluations = 0;
    bool converged = false;
    std::vector<TraceEntry> trace;
};

class InvalidProblemError : public Error {
public:
    using Error::Error;
};

class GridTooLargeError : public Error {
public:
    using Error::Error;
};

inline constexpr double kFailedRun = std::numeric_limits<double>::infinity();

/// Throws InvalidProblemError describing every violated invariant.
inline void validate_problem(const CalibrationProblem& p) {
    std::vector<std::string> issues;
    for (const auto& d : validate_model(p.model))
        if (d.severity == Severity::Error) issues.push_back("model: " + d.message);
    std::set<std::string> seen;
    for (const auto& fp : p.free_parameters) {
        if (!p.model.find_parameter(fp.name)) issues.push_back("free parameter '" + fp.name + "' is not a model parameter");
        if (!seen.insert(fp.name).second) issues.push_back("free parameter '" + fp.name + "' listed twice");
        if (!(std::isfinite(fp.lower) && std::isfinite(fp.upper) && fp.lower < fp.upper))
            issues.push_back("free parameter '" + fp.name + "' needs finite bounds with lower < upper");
        else if (!(fp.initial_guess >= fp.lower && fp.initial_guess <= fp.upper))
            issues.push_back("initial guess for '" + fp.name + "' lies outside its bounds");
    }
    const auto& ts = p.model.time_spec();
    for (const auto& obs : p.observations) {
        if (!p.model.has_series(obs.output_name))
            issues.push_back("observed series '" + obs.output_name + "' is not a stock or output of the model");
        if (!(obs.weight > 0.0 && std::isfinite(obs.weight)))
            issues.push_back("weight of '" + obs.output_name + "' must be positive");
        if (obs.points.empty()) issues.push_back("observed series '" + obs.output_name + "' has no points");
        for (std::size_t i = 0; i < obs.points.size(); ++i) {
            const auto& pt = obs.points[i];
            if (!(pt.t >= ts.start && pt.t <= ts.end)) {
                issues.push_back("observation of '" + obs.output_name + "' at t=" + format_real(pt.t) +
                                 " lies outside the simulated range");
                break;
            }
            if (i > 0 && !(pt.t > obs.points[i - 1].t)) {
                issues.push_back("observation times of '" + obs.output_name + "' are not strictly increasing");
                break;
            }
        }
    }
    for (const auto& [name, value] : p.run_config.parameter_overrides)
        if (!p.model.find_parameter(name)) issues.push_back("run override names unknown parameter '" + name + "'");
    if (!issues.empty()) {
        std::string msg = "invalid calibration problem";
        for (const auto& i : issues) msg += "\n  " + i;
        throw InvalidProblemError(msg);
    }
}

/// Weighted sum of squared residuals between the simulated series (sampled by
/// linear interpolation) and the observations. A run that fails returns
/// kFailedRun.
inline double objective(const CalibrationProblem& problem, const std::vector<double>& candidate) {
    if (candidate.size() != problem.free_parameters.size())
        throw InvalidProblemError("candidate has " + std::to_string(candidate.size()) + " values, expected " +
                                  std::to_string(problem.free_parameters.size()));
    RunConfig cfg = problem.run_config;
    for (std::size_t i = 0; i < candidate.size(); ++i) {
        const auto& fp = problem.free_parameters[i];
        if (!(candidate[i] >= fp.lower && candidate[i] <= fp.upper))
            throw InvalidProblemError("candidate value for '" + fp.name + "' lies outside its bounds");
        cfg.parameter_overrides[fp.name] = candidate[i];
    }
    SimulationResult r;
    try {
        r = run(problem.model, cfg);
    } catch (const RunFailure&) {
        return kFailedRun;
    }
    double sse = 0.0;
    for (const auto& obs : problem.observations) {
        double part = 0.0;
        for (const auto& pt : obs.points) {
            const double d = sample_result(r, obs.output_name, pt.t) - pt.value;
            part += d * d;
        }
        sse += obs.weight * part;
    }
    return std::isfinite(sse) ? sse : kFailedRun;
}

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

class SimplexSearch {
public:
    SimplexSearch(const CalibrationProblem& p, const CalibrationOptions& o) : problem_(p), opts_(o) {
        for (const auto& fp : p.free_parameters) {
            lower_.push_back(fp.lower);
            upper_.push_back(fp.upper);
        }
    }

    CalibrationResult solve() {
        const std::size_t n = lower_.size();
        std::vector<double> x0;
        for (const auto& fp : problem_.free_parameters) x0.push_back(fp.initial_guess);
        double f0;
        if (!evaluate(x0, f0)) return finish(false);
        if (n == 0) return finish(true);

        std::mt19937_64 rng(opts_.seed);
        bool converged = false;
        for (int round = 0; round <= std::max(0, opts_.restarts); ++round) {
            std::vector<std::vector<double>> simplex{best_x_};
            std::vector<double> values{best_f_};
            for (std::size_t i = 0; i < n; ++i) {
                const double range = upper_[i] - lower_[i];
                double d = 0.1 * range;
                if (round > 0) {
                    d *= 0.5 + unit_uniform(rng);
                    if (rng() & 1u) d = -d;
                }
                std::vector<double> v = best_x_;
                v[i] = best_x_[i] + d;
                if (v[i] > upper_[i] || v[i] < lower_[i]) v[i] = best_x_[i] - d;
                v[i] = std::clamp(v[i], lower_[i], upper_[i]);
                double fv;
                if (!evaluate(v, fv)) return finish(false);
                simplex.push_back(std::move(v));
                values.push_back(fv);
            }
            converged = false;
            if (!iterate(simplex, values, converged)) return finish(false);
        }
        return finish(converged);
    }

private:
    /// Runs Nelder-Mead on the given simplex. Returns false when the
    /// evaluation budget ran out.
    bool iterate(std::vector<std::vector<double>>& x, std::vector<double>& f, bool& converged) {
        const std::size_t n = x.size() - 1;
        std::vector<std::size_t> order(n + 1);
        while (true) {
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
            {
                std::vector<std::vector<double>> xs;
                std::vector<double> fs;
                for (auto i : order) {
                    xs.push_back(std::move(x[i]));
                    fs.push_back(f[i]);
                }
                x = std::move(xs);
                f = std::move(fs);
            }
            if (f[n] - f[0] < opts_.simplex_tolerance) {
                converged = true;
                return true;
            }
            std::vector<double> c(n, 0.0);
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t i = 0; i < n; ++i) c[i] += x[j][i];
            for (auto& ci : c) ci /= static_cast<double>(n);

            auto along = [&](const std::vector<double>& from, double scale) {
                std::vector<double> p(n);
                for (std::size_t i = 0; i < n; ++i) p[i] = c[i] + scale * (from[i] - c[i]);
                return p;
            };

            std::vector<double> xr = along(x[n], -1.0);
            double fr;
            if (!evaluate(xr, fr)) return false;
            if (fr < f[0]) {
                std::vector<double> xe = along(xr, 2.0);
                double fe;
                if (!evaluate(xe, fe)) return false;
                if (fe < fr) {
                    x[n] = std::move(xe);
                    f[n] = fe;
                } else {
                    x[n] = std::move(xr);
                    f[n] = fr;
                }
                continue;
            }
            if (fr < f[n - 1]) {
                x[n] = std::move(xr);
                f[n] = fr;
                continue;
            }
            const bool outside = fr < f[n];
            std::vector<double> xc = outside ? along(xr, 0.5) : along(x[n], 0.5);
            double fc;
            if (!evaluate(xc, fc)) return false;
            if (fc < (outside ? fr : f[n])) {
                x[n] = std::move(xc);
                f[n] = fc;
                continue;
            }
            for (std::size_t j = 1; j <= n; ++j) {
                for (std::size_t i = 0; i < n; ++i) x[j][i] = x[0][i] + 0.5 * (x[j][i] - x[0][i]);
                if (!evaluate(x[j], f[j])) return false;
            }
        }
    }

    /// Clamps `x` into the box and evaluates it. Returns false without
    /// evaluating once the budget is spent.
    bool evaluate(std::vector<double>& x, double& fx) {
        if (evaluations_ >= opts_.max_evaluations) return false;
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lower_[i], upper_[i]);
        fx = objective(problem_, x);
        ++evaluations_;
        if (opts_.on_evaluation) opts_.on_evaluation(x, fx);
        if (evaluations_ == 1 || fx < best_f_) {
            best_f_ = fx;
            best_x_ = x;
            trace_.push_back({evaluations_, fx});
        }
        return true;
    }

    CalibrationResult finish(bool converged) {
        CalibrationResult r;
        r.best_vector = best_x_;
        for (std::size_t i = 0; i < best_x_.size(); ++i) r.best_parameters[problem_.free_parameters[i].name] = best_x_[i];
        r.objective_value = best_f_;
        r.evaluations = evaluations_;
        r.converged = converged;
        r.trace = trace_;
        return r;
    }

    const CalibrationProblem& problem_;
    const CalibrationOptions& opts_;
    std::vector<double> lower_, upper_;
    std::vector<double> best_x_;
    double best_f_ = kFailedRun;
    int evaluations_ = 0;
    std::vector<TraceEntry> trace_;
};

}  // namespace detail

/// Box-constrained Nelder-Mead over the free parameters. The first simplex
/// displaces each coordinate of the initial guess by 10% of its bound range;
/// each restart rebuilds it around the best point with seeded jitter.
/// Proposed vertices are clamped into the bounds before evaluation.
inline CalibrationResult calibrate(const CalibrationProblem& problem, const CalibrationOptions& options = {}) {
    validate_problem(problem);
    if (options.max_evaluations < 1) throw InvalidProblemError("max_evaluations must be at least 1");
    return detail::SimplexSearch(problem, options).solve();
}

struct GridPoint {
    std::vector<double> parameters;
    double objective;
};

inline constexpr std::size_t kMaxGridPoints = 1'000'000;

/// Objective over the full Cartesian grid spanning each parameter's bounds,
/// sorted ascending (ties keep grid order). `resolution` holds one entry per
/// free parameter, or a single entry applied to all of them.
inline std::vector<GridPoint> grid_scan(const CalibrationProblem& problem, std::vector<int> resolution,
                                        unsigned threads = 0) {
    validate_problem(problem);
    const std::size_t n = problem.free_parameters.size();
    if (resolution.size() == 1 && n > 1) resolution.assign(n, resolution[0]);
    if (resolution.size() != n) throw InvalidProblemError("need one resolution per free parameter");
    double total = 1.0;
    for (int r : resolution) {
        if (r < 2) throw InvalidProblemError("grid resolution must be at least 2");
        total *= r;
    }
    if (total > static_cast<double>(kMaxGridPoints))
        throw GridTooLargeError("grid of " + format_real(total) + " points exceeds the limit of " +
                                std::to_string(kMaxGridPoints));
    const auto count = static_cast<std::size_t>(total);

    std::vector<GridPoint> points(count);
    for (std::size_t k = 0; k < count; ++k) {
        std::size_t rem = k;
        auto& x = points[k].parameters;
        x.resize(n);
        for (std::size_t i = n; i-- > 0;) {
            const auto r = static_cast<std::size_t>(resolution[i]);
            const std::size_t idx = rem % r;
            rem /= r;
            const auto& fp = problem.free_parameters[i];
            x[i] = idx + 1 == r ? fp.upper : fp.lower + (fp.upper - fp.lower) * static_cast<double>(idx) / static_cast<double>(r - 1);
        }
    }

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t k = w; k < count; k += threads)
                    points[k].objective = objective(problem, points[k].parameters);
            });
    }
    std::stable_sort(points.begin(), points.end(),
                     [](const GridPoint& a, const GridPoint& b) { return a.objective < b.objective; });
    return points;
}

}  // namespace sdkit

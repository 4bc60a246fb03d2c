#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sdkit/model.hpp"

namespace sdkit {

enum class IntegratorKind { Euler, Rk4 };

inline std::string_view to_string(IntegratorKind k) { return k == IntegratorKind::Euler ? "euler" : "rk4"; }

inline std::optional<IntegratorKind> parse_integrator(std::string_view s) {
    if (s == "euler") return IntegratorKind::Euler;
    if (s == "rk4") return IntegratorKind::Rk4;
    return std::nullopt;
}

inline constexpr double kDefaultStep = 0.05;

struct RunConfig {
    IntegratorKind integrator = IntegratorKind::Rk4;
    std::optional<double> step_override;
    std::map<std::string, double, std::less<>> parameter_overrides;
};

/// Dense output of one run: every stock then every output, in declaration
/// order, sampled on the integration grid.
struct SimulationResult {
    struct Series {
        std::string name;
        std::vector<double> values;
    };

    std::vector<double> times;
    std::vector<Series> series;
    /// Names of lookups that were evaluated outside their data range.
    std::vector<std::string> clamped_lookups;

    const std::vector<double>* find(std::string_view name) const {
        for (const auto& s : series)
            if (s.name == name) return &s.values;
        return nullptr;
    }
    bool lookups_clamped() const { return !clamped_lookups.empty(); }
};

class InvalidModelError : public Error {
public:
    explicit InvalidModelError(std::vector<Diagnostic> diags)
        : Error(summary(diags)), diagnostics_(std::move(diags)) {}
    const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

private:
    static std::string summary(const std::vector<Diagnostic>& d) {
        std::string s = "invalid model";
        for (const auto& x : d) s += "\n  " + std::string(to_string(x.code)) + ": " + x.message;
        return s;
    }
    std::vector<Diagnostic> diagnostics_;
};

class InvalidRunConfigError : public Error {
public:
    using Error::Error;
};

/// Base for failures during time stepping; reports the time they occurred at.
class RunFailure : public Error {
public:
    RunFailure(double time, const std::string& what) : Error(what), time_(time) {}
    double time() const { return time_; }

private:
    double time_;
};

/// A flow or output expression could not be evaluated.
class EvaluationError : public RunFailure {
public:
    EvaluationError(double time, std::string element, const std::string& cause)
        : RunFailure(time, "evaluation of '" + element + "' failed at t=" + format_time(time) + ": " + cause),
          element_(std::move(element)) {}
    const std::string& element() const { return element_; }

    static std::string format_time(double t) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", t);
        return buf;
    }

private:
    std::string element_;
};

/// A stock became non-finite; the run is abandoned.
class NonFiniteStateError : public RunFailure {
public:
    NonFiniteStateError(double time, std::string stock)
        : RunFailure(time, "stock '" + stock + "' became non-finite at t=" + EvaluationError::format_time(time)),
          stock_(std::move(stock)) {}
    const std::string& stock() const { return stock_; }

private:
    std::string stock_;
};

/// Model lowered to slot-indexed form: slots hold parameters then stocks.
class CompiledModel {
public:
    CompiledModel(const Model& model, const RunConfig& config = {}) : model_(&model) {
        if (auto diags = validate_model(model); has_errors(diags)) throw InvalidModelError(std::move(diags));
        for (const auto& [name, value] : config.parameter_overrides) {
            if (!model.find_parameter(name))
                throw InvalidRunConfigError("override names unknown parameter '" + name + "'");
            if (!std::isfinite(value)) throw InvalidRunConfigError("override for '" + name + "' is not finite");
        }
        std::map<std::string, int, std::less<>> slot_index, lookup_index;
        for (const auto& p : model.parameters()) {
            slot_index[p.name] = static_cast<int>(base_slots_.size());
            auto ov = config.parameter_overrides.find(p.name);
            base_slots_.push_back(ov != config.parameter_overrides.end() ? ov->second : p.value);
        }
        stock_offset_ = base_slots_.size();
        for (const auto& s : model.stocks()) {
            slot_index[s.name] = static_cast<int>(base_slots_.size());
            base_slots_.push_back(s.initial_value);
        }
        for (const auto& l : model.lookups()) {
            if (l.table.empty())
                throw InvalidModelError({{Severity::Error, DiagnosticCode::InvalidLookup, l.name,
                                          "lookup '" + l.name + "' has no data loaded"}});
            lookup_index[l.name] = static_cast<int>(lookups_.size());
            lookups_.push_back(&l.table);
        }
        auto slot_of = [&](const std::string& n) {
            auto it = slot_index.find(n);
            return it == slot_index.end() ? -1 : it->second;
        };
        auto lookup_of = [&](const std::string& n) {
            auto it = lookup_index.find(n);
            return it == lookup_index.end() ? -1 : it->second;
        };
        for (const auto& f : model.flows()) {
            CompiledFlow cf{CompiledExpr::compile(f.rate, slot_of, lookup_of), -1, -1};
            if (f.source) cf.source = slot_of(*f.source) - static_cast<int>(stock_offset_);
            if (f.sink) cf.sink = slot_of(*f.sink) - static_cast<int>(stock_offset_);
            flows_.push_back(std::move(cf));
        }
        for (const auto& o : model.outputs()) outputs_.push_back(CompiledExpr::compile(o.value, slot_of, lookup_of));
        clamped_.assign(lookups_.size(), 0);
    }

    const Model& model() const { return *model_; }
    std::size_t stock_count() const { return base_slots_.size() - stock_offset_; }

    std::vector<double> initial_state() const {
        return {base_slots_.begin() + static_cast<std::ptrdiff_t>(stock_offset_), base_slots_.end()};
    }

    /// Writes d(state)/dt into `out`. Each flow rate is computed once and
    /// added to its sink and subtracted from its source.
    void derivatives(const std::vector<double>& state, double t, std::vector<double>& out) {
        load(state);
        out.assign(state.size(), 0.0);
        for (std::size_t i = 0; i < flows_.size(); ++i) {
            const CompiledFlow& f = flows_[i];
            double rate;
            try {
                rate = f.rate.evaluate(slots_, t, lookups_, clamped_);
            } catch (const EvalError& e) {
                throw EvaluationError(t, model_->flows()[i].name, e.what());
            }
            if (f.sink >= 0) out[static_cast<std::size_t>(f.sink)] += rate;
            if (f.source >= 0) out[static_cast<std::size_t>(f.source)] -= rate;
        }
    }

    double output(std::size_t i, const std::vector<double>& state, double t) {
        load(state);
        try {
            return outputs_[i].evaluate(slots_, t, lookups_, clamped_);
        } catch (const EvalError& e) {
            throw EvaluationError(t, model_->outputs()[i].name, e.what());
        }
    }

    std::vector<std::string> clamped_lookups() const {
        std::vector<std::string> names;
        for (std::size_t i = 0; i < clamped_.size(); ++i)
            if (clamped_[i]) names.push_back(model_->lookups()[i].name);
        return names;
    }

private:
    struct CompiledFlow {
        CompiledExpr rate;
        int source;
        int sink;
    };

    void load(const std::vector<double>& state) {
        slots_ = base_slots_;
        std::copy(state.begin(), state.end(), slots_.begin() + static_cast<std::ptrdiff_t>(stock_offset_));
    }

    const Model* model_;
    std::vector<double> base_slots_;
    std::vector<double> slots_;
    std::size_t stock_offset_ = 0;
    std::vector<const LookupTable*> lookups_;
    std::vector<CompiledFlow> flows_;
    std::vector<CompiledExpr> outputs_;
    std::vector<char> clamped_;
};

/// x + h * f(t, x)
inline std::vector<double> euler_step(CompiledModel& m, const std::vector<double>& state, double t, double h) {
    std::vector<double> k;
    m.derivatives(state, t, k);
    std::vector<double> next(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) next[i] = state[i] + h * k[i];
    return next;
}

/// Classical four-stage Runge-Kutta. Stage derivatives are evaluated at
/// t, t + h/2, t + h/2 and t + h, so lookups see the stage times.
inline std::vector<double> rk4_step(CompiledModel& m, const std::vector<double>& state, double t, double h) {
    const std::size_t n = state.size();
    std::vector<double> k1, k2, k3, k4, tmp(n);
    m.derivatives(state, t, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * h * k1[i];
    m.derivatives(tmp, t + 0.5 * h, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * h * k2[i];
    m.derivatives(tmp, t + 0.5 * h, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + h * k3[i];
    m.derivatives(tmp, t + h, k4);
    std::vector<double> next(n);
    for (std::size_t i = 0; i < n; ++i) next[i] = state[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return next;
}

/// Convenience overloads taking the model directly.
inline std::vector<double> euler_step(const Model& model, const std::vector<double>& state, double t, double h) {
    CompiledModel m(model);
    return euler_step(m, state, t, h);
}
inline std::vector<double> rk4_step(const Model& model, const std::vector<double>& state, double t, double h) {
    CompiledModel m(model);
    return rk4_step(m, state, t, h);
}

/// Uniform grid from start to end; the last interval is shortened so the
/// grid lands on `end` exactly. A quotient within 1e-9 of an integer counts
/// as that integer so that e.g. 60 / 0.05 gives 1200 intervals.
inline std::vector<double> make_grid(double start, double end, double h) {
    const double q = (end - start) / h;
    double intervals = std::round(q);
    if (std::abs(q - intervals) > 1e-9 * std::max(1.0, q)) intervals = std::ceil(q);
    const auto n = static_cast<std::size_t>(std::max(1.0, intervals));
    std::vector<double> times(n + 1);
    for (std::size_t i = 0; i < n; ++i) times[i] = start + static_cast<double>(i) * h;
    times[n] = end;
    return times;
}

inline double effective_step(const Model& model, const RunConfig& config) {
    return config.step_override.value_or(model.time_spec().step);
}

/// Integrates the model over its time spec.
inline SimulationResult run(const Model& model, const RunConfig& config = {}) {
    const double h = effective_step(model, config);
    TimeSpec ts = model.time_spec();
    ts.step = h;
    if (!ts.valid()) throw InvalidRunConfigError("step " + EvaluationError::format_time(h) + " is not valid for the time span");

    CompiledModel cm(model, config);
    SimulationResult result;
    result.times = make_grid(ts.start, ts.end, h);
    const std::size_t n_points = result.times.size();
    const std::size_t n_stocks = cm.stock_count();
    for (const auto& s : model.stocks()) result.series.push_back({s.name, {}});
    for (const auto& o : model.outputs()) result.series.push_back({o.name, {}});
    for (auto& s : result.series) s.values.reserve(n_points);

    auto record = [&](const std::vector<double>& state, double t) {
        for (std::size_t i = 0; i < n_stocks; ++i) {
            if (!std::isfinite(state[i])) throw NonFiniteStateError(t, model.stocks()[i].name);
            result.series[i].values.push_back(state[i]);
        }
        for (std::size_t j = 0; j < model.outputs().size(); ++j)
            result.series[n_stocks + j].values.push_back(cm.output(j, state, t));
    };

    std::vector<double> state = cm.initial_state();
    record(state, result.times[0]);
    for (std::size_t i = 1; i < n_points; ++i) {
        const double t = result.times[i - 1];
        const double step = result.times[i] - t;
        state = config.integrator == IntegratorKind::Euler ? euler_step(cm, state, t, step) : rk4_step(cm, state, t, step);
        record(state, result.times[i]);
    }
    result.clamped_lookups = cm.clamped_lookups();
    return result;
}

class UnknownSeriesError : public Error {
public:
    using Error::Error;
};
class OutOfRangeError : public Error {
public:
    using Error::Error;
};

/// Linear interpolation of a result series on its grid.
inline double sample_result(const SimulationResult& result, std::string_view series, double t) {
    const auto* values = result.find(series);
    if (!values) throw UnknownSeriesError("unknown series '" + std::string(series) + "'");
    const auto& times = result.times;
    if (!(t >= times.front() && t <= times.back()))
        throw OutOfRangeError("time " + EvaluationError::format_time(t) + " is outside the simulated range");
    auto hi = std::lower_bound(times.begin(), times.end(), t);
    const auto i = static_cast<std::size_t>(hi - times.begin());
    if (*hi == t) return (*values)[i];
    const double w = (t - times[i - 1]) / (times[i] - times[i - 1]);
    return (*values)[i - 1] + w * ((*values)[i] - (*values)[i - 1]);
}

/// Post-run checks. Negative stock values are allowed while integrating but
/// reported here as warnings.
inline std::vector<Diagnostic> check_result(const Model& model, const SimulationResult& result) {
    std::vector<Diagnostic> out;
    for (const auto& s : model.stocks()) {
        const auto* values = result.find(s.name);
        if (!values) continue;
        for (std::size_t i = 0; i < values->size(); ++i) {
            if ((*values)[i] < 0.0) {
                out.push_back({Severity::Warning, DiagnosticCode::NegativeStock, s.name,
                               "stock '" + s.name + "' is negative (" + std::to_string((*values)[i]) +
                                   ") at t=" + EvaluationError::format_time(result.times[i])});
                break;
            }
        }
    }
    return out;
}

}  // namespace sdkit

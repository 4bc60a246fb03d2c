#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "sdkit/engine.hpp"
#include "sdkit/io.hpp"

// Naive T-cell population model: naive cells from peripheral proliferation
// (NaiveProliferation) and memory cells (Memory) are stocks; thymic naive
// cells (RealNaives) and active cells (RealActives) are exogenous lookups.

namespace sdkit::tcell {

/// Rates per year. Defaults are the reference run's values; the peripheral
/// proliferation rate has no reported value and defaults to 0.
struct Parameters {
    double naive_thymus_proliferation_rate = 0.025;
    double naive_proliferation_rate = 0.0;
    double naive_proliferation_death_rate = 0.017;
    double memory_to_np_rate = 0.001;
    double memory_death_rate = 0.05;
    double reversion_to_memory_rate = 0.0;

    bool valid() const {
        for (double v : {naive_thymus_proliferation_rate, naive_proliferation_rate, naive_proliferation_death_rate,
                         memory_to_np_rate, memory_death_rate, reversion_to_memory_rate})
            if (!(v >= 0.0) || !std::isfinite(v)) return false;
        return true;
    }
};

struct Dataset {
    LookupTable real_naives;
    LookupTable real_actives;
};

inline constexpr int kFirstAge = 1;
inline constexpr int kLastAge = 55;

/// Thymic naive count: flat 100 up to age 20, then decaying at 5% per year.
inline double standin_real_naives(double age) { return age <= 20.0 ? 100.0 : 100.0 * std::exp(-0.05 * (age - 20.0)); }
inline double standin_real_actives(double) { return 10.0; }

/// Deterministic synthetic replacement for the measured series, sampled at
/// integer ages 1..55.
inline Dataset generate_standin_dataset() {
    std::vector<LookupPoint> naives, actives;
    for (int a = kFirstAge; a <= kLastAge; ++a) {
        naives.push_back({double(a), standin_real_naives(a)});
        actives.push_back({double(a), standin_real_actives(a)});
    }
    return {LookupTable(std::move(naives)), LookupTable(std::move(actives))};
}

inline constexpr const char* kNaivesFile = "real_naives_synthetic.csv";
inline constexpr const char* kActivesFile = "real_actives_synthetic.csv";

inline constexpr const char* kStandinNotice =
    "SYNTHETIC STAND-IN: not measured data.\n"
    "Generated by sdkit standin-data; ages 1..55 years, arbitrary cell-count units.\n";

/// Six-flow model over 0..60 years with step 0.05. Both stocks start at 0.
inline Model build_tcell_model(const Parameters& p = {}, const Dataset& data = generate_standin_dataset()) {
    using namespace expr;
    Model m("tcell", TimeSpec{0.0, 60.0, 0.05});
    m.add_parameter("NaiveThymusProliferationRate", p.naive_thymus_proliferation_rate)
        .add_parameter("NaiveProliferationRate", p.naive_proliferation_rate)
        .add_parameter("NaiveProliferationDeathRate", p.naive_proliferation_death_rate)
        .add_parameter("MemoryToNPRate", p.memory_to_np_rate)
        .add_parameter("MemoryDeathRate", p.memory_death_rate)
        .add_parameter("ReversionToMemoryRate", p.reversion_to_memory_rate)
        .add_lookup("RealNaives", data.real_naives)
        .add_lookup("RealActives", data.real_actives)
        .add_stock("NaiveProliferation", 0.0)
        .add_stock("Memory", 0.0)
        .add_flow("ThymicInflow", std::nullopt, "NaiveProliferation",
                  mul(ref("NaiveThymusProliferationRate"), lookup("RealNaives", time())))
        .add_flow("PeripheralProliferation", std::nullopt, "NaiveProliferation",
                  mul(ref("NaiveProliferationRate"), ref("NaiveProliferation")))
        .add_flow("MemoryReversion", "Memory", "NaiveProliferation", mul(ref("MemoryToNPRate"), ref("Memory")))
        .add_flow("NaiveProliferationDeath", "NaiveProliferation", std::nullopt,
                  mul(ref("NaiveProliferationDeathRate"), ref("NaiveProliferation")))
        .add_flow("ActiveToMemory", std::nullopt, "Memory",
                  mul(ref("ReversionToMemoryRate"), lookup("RealActives", time())))
        .add_flow("MemoryDeath", "Memory", std::nullopt, mul(ref("MemoryDeathRate"), ref("Memory")))
        .add_output("TotalNaive", add(lookup("RealNaives", time()), ref("NaiveProliferation")));
    return m;
}

inline constexpr const char* kTotalNaiveFile = "total_naive_synthetic.csv";

/// TotalNaive at integer ages 1..60 from a fine-step (h = 0.005) RK4 run with
/// the given parameters. Used as calibration target data.
inline std::vector<LookupPoint> generate_total_naive_observations(const Parameters& p = {}) {
    RunConfig fine;
    fine.step_override = 0.005;
    const SimulationResult r = run(build_tcell_model(p, generate_standin_dataset()), fine);
    std::vector<LookupPoint> out;
    for (int a = 1; a <= 60; ++a) out.push_back({double(a), sample_result(r, "TotalNaive", a)});
    return out;
}

/// Writes the two lookup series and the derived TotalNaive observations.
inline void write_standin_dataset(const std::filesystem::path& dir) {
    const Dataset d = generate_standin_dataset();
    write_text_file(dir / kNaivesFile,
                    format_series_csv(d.real_naives.points(),
                                      std::string(kStandinNotice) + "RealNaives(a) = 100 for a <= 20, 100*exp(-0.05*(a-20)) after"));
    write_text_file(dir / kActivesFile,
                    format_series_csv(d.real_actives.points(), std::string(kStandinNotice) + "RealActives(a) = 10"));
    write_text_file(dir / kTotalNaiveFile,
                    format_series_csv(generate_total_naive_observations(),
                                      "SYNTHETIC STAND-IN: simulated, not measured.\n"
                                      "TotalNaive of the tcell model with default parameters, RK4 h=0.005, ages 1..60."));
}

inline constexpr double kPrevalenceAge = 50.0;

/// True iff NaiveProliferation makes up more than half of TotalNaive at
/// every grid time from age 50 on.
inline bool check_np_prevalence(const SimulationResult& r) {
    const auto* np = r.find("NaiveProliferation");
    const auto* total = r.find("TotalNaive");
    if (!np || !total) throw UnknownSeriesError("result lacks NaiveProliferation or TotalNaive");
    bool any = false;
    for (std::size_t i = 0; i < r.times.size(); ++i) {
        if (r.times[i] < kPrevalenceAge) continue;
        any = true;
        if (!((*total)[i] > 0.0) || !((*np)[i] / (*total)[i] > 0.5)) return false;
    }
    return any;
}

}  // namespace sdkit::tcell

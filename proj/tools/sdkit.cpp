#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sdkit/cli.hpp"

namespace {

bool split_assignment(const std::string& arg, std::string& key, std::string& value) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos || eq == 0) return false;
    key = arg.substr(0, eq);
    value = arg.substr(eq + 1);
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    namespace cli = sdkit::cli;
    CLI::App app{"sdkit: stock-and-flow simulation toolkit"};
    app.require_subcommand(1);

    std::string model_path, spec_path, out_dir = "out", integrator = "rk4";
    std::vector<std::string> sets, obs;
    double step = 0.0;
    unsigned jobs = 0;

    auto* check = app.add_subcommand("check", "Parse and validate a model");
    check->add_option("model", model_path, "Model file (.sdl)")->required();

    auto* run = app.add_subcommand("run", "Simulate a model and write CSV and SVG output");
    run->add_option("model", model_path, "Model file (.sdl)")->required();
    run->add_option("--set", sets, "Parameter override name=value (repeatable)");
    run->add_option("--integrator", integrator, "euler or rk4")->check(CLI::IsMember({"euler", "rk4"}));
    auto* step_opt = run->add_option("--step", step, "Integration step in years");
    run->add_option("--out", out_dir, "Output directory");

    auto* batch = app.add_subcommand("batch", "Run every scenario of an experiment file");
    batch->add_option("experiment", spec_path, "Experiment file (.sdx)")->required();
    batch->add_option("--out", out_dir, "Output directory");
    batch->add_option("--jobs", jobs, "Worker threads (0 = all cores)");

    auto* validate = app.add_subcommand("validate", "Compare a run against observed series");
    validate->add_option("model", model_path, "Model file (.sdl)")->required();
    validate->add_option("--obs", obs, "Observed series name=csv (repeatable)");
    validate->add_option("--out", out_dir, "Output directory");

    auto* calibrate = app.add_subcommand("calibrate", "Fit parameters to observed series");
    calibrate->add_option("model", model_path, "Model file (.sdl)")->required();
    calibrate->add_option("spec", spec_path, "Calibration file (.sdc)")->required();
    calibrate->add_option("--out", out_dir, "Output directory");

    auto* standin = app.add_subcommand("standin-data", "Write the synthetic T-cell stand-in data");
    standin->add_option("--out", out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::kInputError;
    }

    cli::Streams io{std::cout, std::cerr};
    try {
        if (*check) return cli::cmd_check(model_path, io);
        if (*run) {
            cli::RunOptions opts;
            opts.integrator = integrator == "euler" ? sdkit::IntegratorKind::Euler : sdkit::IntegratorKind::Rk4;
            if (*step_opt) opts.step = step;
            opts.out_dir = out_dir;
            for (const auto& s : sets) {
                std::string key, value;
                if (!split_assignment(s, key, value)) {
                    std::cerr << "error: --set expects name=value, got '" << s << "'\n";
                    return cli::kInputError;
                }
                try {
                    std::size_t used = 0;
                    opts.overrides[key] = std::stod(value, &used);
                    if (used != value.size()) throw std::invalid_argument(value);
                } catch (const std::exception&) {
                    std::cerr << "error: --set " << key << ": '" << value << "' is not a number\n";
                    return cli::kInputError;
                }
            }
            return cli::cmd_run(model_path, opts, io);
        }
        if (*batch) return cli::cmd_batch(spec_path, {out_dir, jobs}, io);
        if (*validate) {
            std::vector<cli::ObservationArg> args;
            for (const auto& o : obs) {
                std::string key, value;
                if (!split_assignment(o, key, value)) {
                    std::cerr << "error: --obs expects series=csv, got '" << o << "'\n";
                    return cli::kInputError;
                }
                args.push_back({key, value});
            }
            return cli::cmd_validate(model_path, args, out_dir, io);
        }
        if (*calibrate) return cli::cmd_calibrate(model_path, spec_path, out_dir, io);
        if (*standin) return cli::cmd_standin_data(out_dir, io);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kRuntimeError;
    }
    return cli::kInputError;
}

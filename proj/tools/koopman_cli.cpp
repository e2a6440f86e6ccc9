// koopman: simulate systems, decompose snapshot files, run Monte Carlo experiments.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "koopman/config.hpp"
#include "koopman/dmd.hpp"
#include "koopman/io.hpp"
#include "koopman/stats.hpp"
#include "koopman/systems.hpp"

namespace fs = std::filesystem;
using namespace koopman;

namespace {

constexpr int kExitUsage     = 2;
constexpr int kExitNumerical = 3;

void require_writable_dir(const fs::path& file)
{
    const auto dir = file.has_parent_path() ? file.parent_path() : fs::path(".");
    std::error_code ec;
    if (!fs::is_directory(dir, ec))
        throw ParameterError("output directory does not exist: " + dir.string());
}

struct SimulateArgs {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& args)
{
    auto cfg = load_simulate_config(args.config);
    if (args.out)
        cfg.output = *args.out;
    if (args.seed)
        cfg.noise.seed = *args.seed;
    require_writable_dir(cfg.output);

    const auto y = simulate(cfg.system, cfg.noise, cfg.m);
    write_file_atomic(cfg.output, snapshot_csv_string(y));
    std::cout << "n=" << y.channels() << " m=" << y.snapshots() << " dt=" << format_double(y.dt) << '\n';
    return 0;
}

struct DmdArgs {
    std::string input;
    std::string method = "subspace";
    std::optional<Index> rank;
    std::optional<double> sigma_o;
    std::optional<std::string> out;
};

int cmd_dmd(const DmdArgs& args)
{
    const Method method = require_method(args.method);
    if (method == Method::moment_corrected && !args.sigma_o)
        throw ParameterError("method nc requires --sigma-o");
    if (method != Method::moment_corrected && args.sigma_o)
        throw ParameterError("--sigma-o applies to method nc only");
    if (args.out)
        require_writable_dir(*args.out);

    const auto y = read_snapshot_csv(fs::path(args.input));
    std::optional<ComplexMatrix> q_cov;
    if (args.sigma_o) {
        if (!std::isfinite(*args.sigma_o) || *args.sigma_o < 0.0)
            throw ParameterError("--sigma-o must be finite and non-negative");
        q_cov = observation_noise_covariance(*args.sigma_o, y.channels(), !y.is_real());
    }
    const auto outcome = decompose(y, method, args.rank, q_cov);
    const auto text    = dmd_result_json(outcome, y).dump(2) + '\n';
    if (args.out)
        write_file_atomic(*args.out, text);
    else
        std::cout << text;
    return 0;
}

struct ExperimentArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<Index> trials;
    std::optional<std::string> out;
};

std::string system_name(const SystemSpec& s)
{
    if (std::holds_alternative<LtiSpec>(s))
        return "lti";
    if (std::holds_alternative<StuartLandauSpec>(s))
        return "stuart_landau";
    return "burgers";
}

int cmd_experiment(const ExperimentArgs& args)
{
    auto cfg = load_experiment_config(args.config);
    if (args.seed)
        cfg.base_seed = *args.seed;
    if (args.trials)
        cfg.trials = *args.trials;
    if (args.out) {
        cfg.stats_path = *args.out;
        cfg.table_path = fs::path(*args.out).replace_extension(".csv");
    }
    if (cfg.stats_path == cfg.table_path)
        throw ParameterError("stats and table outputs must be different files");
    require_writable_dir(cfg.stats_path);
    require_writable_dir(cfg.table_path);

    std::vector<std::optional<double>> points;
    if (cfg.sweep)
        points.assign(cfg.sweep->values.begin(), cfg.sweep->values.end());
    else
        points.push_back(std::nullopt);

    Json results = Json::array();
    std::string table = "method,";
    if (cfg.sweep)
        table += std::string(to_string(cfg.sweep->parameter)) + ',';
    table += "trial,eig,re,im,epsilon\n";

    for (const auto& spec : cfg.methods) {
        for (const auto& value : points) {
            const auto point = cfg.point(spec, value);
            const auto stats = run_trials(point);

            Json entry{{"method", to_string(spec.method)}, {"rank", spec.rank ? Json(*spec.rank) : Json(nullptr)}};
            std::string prefix = std::string(to_string(spec.method)) + ',';
            if (value) {
                entry["sweep_value"] = *value;
                prefix += format_double_short(*value) + ',';
            }
            entry["m"]     = point.m;
            entry["stats"] = trial_stats_json(stats);
            results.push_back(std::move(entry));
            append_trial_rows(table, stats, prefix);

            std::cout << to_string(spec.method);
            if (value)
                std::cout << ' ' << to_string(cfg.sweep->parameter) << '=' << format_double_short(*value);
            std::cout << " succeeded=" << stats.succeeded() << '/' << stats.trials
                      << " median_epsilon=" << format_double(stats.median_error()) << '\n';
        }
    }

    const Json doc{
        {"schema_version", kSchemaVersion},
        {"version", kToolVersion},
        {"system", system_name(cfg.system)},
        {"trials", cfg.trials},
        {"base_seed", cfg.base_seed},
        {"interval", "2.5 and 97.5 percentiles per component, linear interpolation"},
        {"sweep_parameter", cfg.sweep ? Json(to_string(cfg.sweep->parameter)) : Json(nullptr)},
        {"results", std::move(results)},
    };
    write_file_atomic(cfg.stats_path, doc.dump(2) + '\n');
    write_file_atomic(cfg.table_path, table);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Subspace and baseline dynamic mode decomposition toolkit"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate_cmd = app.add_subcommand("simulate", "Simulate a system to a snapshot CSV file");
    simulate_cmd->add_option("config", sim.config, "Simulation config JSON")->required();
    simulate_cmd->add_option("--out", sim.out, "Output CSV path (overrides the config)");
    simulate_cmd->add_option("--seed", sim.seed, "Noise seed (overrides the config)");

    DmdArgs dmd;
    auto* dmd_cmd = app.add_subcommand("dmd", "Decompose a snapshot CSV file");
    dmd_cmd->add_option("input", dmd.input, "Snapshot CSV")->required();
    dmd_cmd->add_option("--method", dmd.method, "standard, tls, nc or subspace")->capture_default_str();
    dmd_cmd->add_option("--rank", dmd.rank, "Retained rank")->check(CLI::PositiveNumber);
    dmd_cmd->add_option("--sigma-o", dmd.sigma_o, "Observation noise level (nc only)");
    dmd_cmd->add_option("--out", dmd.out, "Result JSON path (default: standard output)");

    ExperimentArgs exp;
    auto* experiment_cmd = app.add_subcommand("experiment", "Run a Monte Carlo experiment config");
    experiment_cmd->add_option("config", exp.config, "Experiment config JSON")->required();
    experiment_cmd->add_option("--seed", exp.seed, "Base seed (overrides the config)");
    experiment_cmd->add_option("--trials", exp.trials, "Trial count (overrides the config)")
        ->check(CLI::PositiveNumber);
    experiment_cmd->add_option("--out", exp.out, "Stats JSON path; the table goes next to it as .csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*simulate_cmd)
            return cmd_simulate(sim);
        if (*dmd_cmd)
            return cmd_dmd(dmd);
        return cmd_experiment(exp);
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}

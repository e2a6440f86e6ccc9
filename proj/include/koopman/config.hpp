#pragma once

/// \file config.hpp
/// JSON configuration files for the command-line tool.
///
/// Simulation config:
///
///     {
///       "schema_version": 1,
///       "system": {"type": "lti", "a": [[...], ...], "x0": [...], "dt": 1},
///       "noise": {"sigma_p": 0.1, "sigma_o": 0.1, "seed": 7},
///       "m": 1000,
///       "output": "snapshots.csv"
///     }
///
/// Experiment config: the same "system" and "noise" blocks plus
///
///     "methods": ["standard", {"name": "subspace", "rank": 2}],
///     "m": 1000, "trials": 200, "base_seed": 1,
///     "truth": [{"re": 0, "im": 0.9}, ...],
///     "sweep": {"parameter": "sigma_o", "values": [0.02, 0.1]},
///     "output": {"stats": "stats.json", "table": "trials.csv"}
///
/// "method" (a single entry) is accepted in place of "methods". Complex
/// entries are either plain numbers or {"re", "im"} objects.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "koopman/errors.hpp"
#include "koopman/io.hpp"
#include "koopman/stats.hpp"
#include "koopman/systems.hpp"

namespace koopman {

struct MethodSpec {
    Method method = Method::subspace;
    std::optional<Index> rank;
    std::optional<ComplexMatrix> q_cov;
};

enum class SweepParameter { sigma_o, sigma_p, m };

struct Sweep {
    SweepParameter parameter = SweepParameter::sigma_o;
    std::vector<double> values;
};

struct SimulateConfig {
    SystemSpec system;
    NoiseSpec noise;
    Index m = 0; // ignored for Burgers, whose grid fixes the snapshot count
    std::filesystem::path output = "snapshots.csv";
};

struct ExperimentFile {
    SystemSpec system;
    NoiseSpec noise;
    std::vector<MethodSpec> methods;
    Index m                 = 1000;
    Index trials            = 1;
    std::uint64_t base_seed = 0;
    std::optional<std::vector<Complex>> truth;
    unsigned threads = 0;
    std::optional<Sweep> sweep;
    std::filesystem::path stats_path = "stats.json";
    std::filesystem::path table_path = "trials.csv";

    /// Harness config for one method at one sweep point.
    ExperimentConfig point(const MethodSpec& method, std::optional<double> sweep_value) const;
};

inline std::string_view to_string(SweepParameter p)
{
    switch (p) {
    case SweepParameter::sigma_o: return "sigma_o";
    case SweepParameter::sigma_p: return "sigma_p";
    case SweepParameter::m: return "m";
    }
    return "?";
}

namespace detail {

inline const Json& require_key(const Json& j, const char* key, const char* where)
{
    if (!j.is_object() || !j.contains(key))
        throw ParameterError(std::string(where) + ": missing \"" + key + "\"");
    return j.at(key);
}

inline Index positive_count(const Json& j, const char* what)
{
    if (!j.is_number_integer() || j.get<std::int64_t>() < 1)
        throw ParameterError(std::string(what) + " must be a positive integer");
    return static_cast<Index>(j.get<std::int64_t>());
}

inline std::uint64_t seed_value(const Json& j, const char* what)
{
    if (j.is_number_unsigned())
        return j.get<std::uint64_t>();
    if (j.is_number_integer() && j.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(j.get<std::int64_t>());
    throw ParameterError(std::string(what) + " must be a non-negative integer");
}

inline ComplexVector complex_vector(const Json& j, const char* what)
{
    if (!j.is_array() || j.empty())
        throw ParameterError(std::string(what) + " must be a non-empty array");
    ComplexVector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Index>(i)] = complex_from_json(j[i]);
    return v;
}

inline ComplexMatrix complex_matrix(const Json& j, const char* what)
{
    if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty())
        throw ParameterError(std::string(what) + " must be a non-empty array of rows");
    const auto rows = static_cast<Index>(j.size());
    const auto cols = static_cast<Index>(j[0].size());
    ComplexMatrix out(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Index>(row.size()) != cols)
            throw ParameterError(std::string(what) + ": rows differ in length");
        for (Index c = 0; c < cols; ++c)
            out(r, c) = complex_from_json(row[static_cast<std::size_t>(c)]);
    }
    return out;
}

inline void check_schema(const Json& j)
{
    if (!j.is_object())
        throw ParameterError("config must be a JSON object");
    if (j.contains("schema_version") && j.at("schema_version") != kSchemaVersion)
        throw ParameterError("unsupported schema_version " + j.at("schema_version").dump());
}

} // namespace detail

inline SystemSpec parse_system(const Json& j)
{
    const auto type = detail::require_key(j, "type", "system").get<std::string>();
    if (type == "lti") {
        LtiSpec s;
        s.a  = detail::complex_matrix(detail::require_key(j, "a", "system"), "system.a");
        s.x0 = detail::complex_vector(detail::require_key(j, "x0", "system"), "system.x0");
        s.dt = j.value("dt", 1.0);
        s.validate();
        return s;
    }
    if (type == "stuart_landau") {
        StuartLandauSpec s;
        s.mu     = j.value("mu", s.mu);
        s.gamma  = j.value("gamma", s.gamma);
        s.beta   = j.value("beta", s.beta);
        s.dt     = j.value("dt", s.dt);
        s.r0     = j.value("r0", s.r0);
        s.theta0 = j.value("theta0", s.theta0);
        if (j.contains("orders")) {
            const auto& o = j.at("orders");
            if (!o.is_array() || o.size() != 2)
                throw ParameterError("system.orders must be [min, max]");
            s.order_min = o[0].get<int>();
            s.order_max = o[1].get<int>();
        }
        if (j.contains("burn_in")) {
            if (!j.at("burn_in").is_number_integer() || j.at("burn_in").get<std::int64_t>() < 0)
                throw ParameterError("system.burn_in must be a non-negative integer");
            s.burn_in = static_cast<Index>(j.at("burn_in").get<std::int64_t>());
        }
        s.validate();
        return s;
    }
    if (type == "burgers") {
        BurgersSpec s;
        s.k            = j.value("k", s.k);
        s.dx           = j.value("dx", s.dx);
        s.dt_solver    = j.value("dt_solver", s.dt_solver);
        s.t_end        = j.value("t_end", s.t_end);
        s.ic_amplitude = j.value("ic_amplitude", s.ic_amplitude);
        if (j.contains("sample_stride"))
            s.sample_stride = detail::positive_count(j.at("sample_stride"), "system.sample_stride");
        s.validate();
        return s;
    }
    throw ParameterError("unknown system type \"" + type + "\" (expected lti, stuart_landau or burgers)");
}

inline NoiseSpec parse_noise(const Json& j)
{
    NoiseSpec n;
    if (j.is_null())
        return n;
    if (!j.is_object())
        throw ParameterError("noise must be an object");
    n.sigma_p = j.value("sigma_p", 0.0);
    n.sigma_o = j.value("sigma_o", 0.0);
    if (j.contains("seed"))
        n.seed = detail::seed_value(j.at("seed"), "noise.seed");
    n.validate();
    return n;
}

inline Method require_method(std::string_view name)
{
    if (const auto m = parse_method(name))
        return *m;
    throw ParameterError("unknown method \"" + std::string(name) + "\" (expected standard, tls, nc or subspace)");
}

inline MethodSpec parse_method_spec(const Json& j)
{
    MethodSpec spec;
    if (j.is_string()) {
        spec.method = require_method(j.get<std::string>());
        return spec;
    }
    spec.method = require_method(detail::require_key(j, "name", "method").get<std::string>());
    if (j.contains("rank") && !j.at("rank").is_null())
        spec.rank = detail::positive_count(j.at("rank"), "method.rank");
    if (j.contains("q_cov") && !j.at("q_cov").is_null())
        spec.q_cov = detail::complex_matrix(j.at("q_cov"), "method.q_cov");
    if (spec.method == Method::moment_corrected && spec.rank)
        throw ParameterError("nc method takes no rank");
    if (spec.method != Method::moment_corrected && spec.q_cov)
        throw ParameterError("q_cov applies to the nc method only");
    return spec;
}

namespace detail {

template <class Fn>
auto translate_json_errors(Fn&& fn)
{
    try {
        return fn();
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("config: ") + e.what());
    }
}

inline Json load_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParameterError("cannot open config " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError("config " + path.string() + ": " + e.what());
    }
}

} // namespace detail

inline SimulateConfig parse_simulate_config(const Json& j)
{
    return detail::translate_json_errors([&] {
        detail::check_schema(j);
        SimulateConfig c;
        c.system = parse_system(detail::require_key(j, "system", "config"));
        c.noise  = parse_noise(j.value("noise", Json()));
        if (!std::holds_alternative<BurgersSpec>(c.system))
            c.m = detail::positive_count(detail::require_key(j, "m", "config"), "m");
        if (j.contains("output"))
            c.output = j.at("output").get<std::string>();
        return c;
    });
}

inline ExperimentFile parse_experiment_config(const Json& j)
{
    return detail::translate_json_errors([&] {
        detail::check_schema(j);
        ExperimentFile c;
        c.system = parse_system(detail::require_key(j, "system", "config"));
        c.noise  = parse_noise(j.value("noise", Json()));

        if (j.contains("methods")) {
            const auto& list = j.at("methods");
            if (!list.is_array() || list.empty())
                throw ParameterError("methods must be a non-empty array");
            for (const auto& m : list)
                c.methods.push_back(parse_method_spec(m));
        } else {
            c.methods.push_back(parse_method_spec(detail::require_key(j, "method", "config")));
        }

        if (!std::holds_alternative<BurgersSpec>(c.system))
            c.m = detail::positive_count(detail::require_key(j, "m", "config"), "m");
        if (j.contains("trials"))
            c.trials = detail::positive_count(j.at("trials"), "trials");
        if (j.contains("base_seed"))
            c.base_seed = detail::seed_value(j.at("base_seed"), "base_seed");
        if (j.contains("threads"))
            c.threads = static_cast<unsigned>(detail::positive_count(j.at("threads"), "threads"));
        if (j.contains("truth") && !j.at("truth").is_null()) {
            const auto v = detail::complex_vector(j.at("truth"), "truth");
            c.truth      = std::vector<Complex>(v.data(), v.data() + v.size());
        } else if (!std::holds_alternative<LtiSpec>(c.system)) {
            throw ParameterError("truth eigenvalues are required for this system");
        }

        if (j.contains("sweep")) {
            const auto& s = j.at("sweep");
            Sweep sweep;
            const auto name = detail::require_key(s, "parameter", "sweep").get<std::string>();
            if (name == "sigma_o")
                sweep.parameter = SweepParameter::sigma_o;
            else if (name == "sigma_p")
                sweep.parameter = SweepParameter::sigma_p;
            else if (name == "m")
                sweep.parameter = SweepParameter::m;
            else
                throw ParameterError("sweep.parameter must be sigma_o, sigma_p or m");
            sweep.values = detail::require_key(s, "values", "sweep").get<std::vector<double>>();
            if (sweep.values.empty())
                throw ParameterError("sweep.values is empty");
            for (double v : sweep.values) {
                if (!std::isfinite(v) || v < 0.0)
                    throw ParameterError("sweep values must be finite and non-negative");
                if (sweep.parameter == SweepParameter::m && (v < 1.0 || v != std::floor(v)))
                    throw ParameterError("sweep over m needs positive integer values");
            }
            if (sweep.parameter == SweepParameter::m && std::holds_alternative<BurgersSpec>(c.system))
                throw ParameterError("the Burgers grid fixes m; sweep sigma_o or sigma_p instead");
            c.sweep = std::move(sweep);
        }

        if (j.contains("output")) {
            const auto& o = j.at("output");
            c.stats_path  = o.value("stats", c.stats_path.string());
            c.table_path  = o.value("table", c.table_path.string());
        }

        for (const auto& m : c.methods)
            if (m.q_cov && m.q_cov->rows() != m.q_cov->cols())
                throw ParameterError("method.q_cov must be square");
        return c;
    });
}

inline SimulateConfig load_simulate_config(const std::filesystem::path& path)
{
    return parse_simulate_config(detail::load_json(path));
}

inline ExperimentFile load_experiment_config(const std::filesystem::path& path)
{
    return parse_experiment_config(detail::load_json(path));
}

inline ExperimentConfig ExperimentFile::point(const MethodSpec& spec, std::optional<double> sweep_value) const
{
    ExperimentConfig c;
    c.system    = system;
    c.noise     = noise;
    c.method    = spec.method;
    c.rank      = spec.rank;
    c.q_cov     = spec.q_cov;
    c.m         = m;
    c.trials    = trials;
    c.base_seed = base_seed;
    c.truth     = truth;
    c.threads   = threads;
    if (sweep && sweep_value) {
        switch (sweep->parameter) {
        case SweepParameter::sigma_o: c.noise.sigma_o = *sweep_value; break;
        case SweepParameter::sigma_p: c.noise.sigma_p = *sweep_value; break;
        case SweepParameter::m: c.m = static_cast<Index>(*sweep_value); break;
        }
    }
    return c;
}

} // namespace koopman

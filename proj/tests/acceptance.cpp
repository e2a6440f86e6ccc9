// Acceptance run: one PASS/FAIL line per criterion, result files in the
// output directory, then a second execution compared byte for byte.
#include <Eigen/QR>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "koopman/dmd.hpp"
#include "koopman/io.hpp"
#include "koopman/stats.hpp"
#include "koopman/systems.hpp"

using namespace koopman;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
    std::string output; // deterministic content written to disk
};

struct Criterion {
    std::string id;
    std::string file;
    std::function<Outcome()> run;
    double time_limit_s = 0.0; // 0: no limit
};

constexpr Complex kI{0.0, 1.0};

std::string fmt(double v) { return format_double_short(v); }

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json complex_list_json(const std::vector<Complex>& values)
{
    Json out = Json::array();
    for (const auto z : values)
        out.push_back(complex_json(z));
    return out;
}

LtiSpec rotation(double r)
{
    LtiSpec spec;
    spec.a       = ComplexMatrix::Zero(2, 2);
    spec.a(0, 0) = r * kI;
    spec.a(1, 1) = -r * kI;
    spec.x0      = ComplexVector::Ones(2);
    return spec;
}

double mean_matched_distance(const std::vector<Complex>& est, const std::vector<Complex>& ref)
{
    const auto pairing = match_eigenvalues(est, ref);
    return pairing.total_distance() / static_cast<double>(pairing.pairs.size());
}

ExperimentConfig lti_experiment(const LtiSpec& spec, double sigma_p, double sigma_o, Method method, Index m,
                                Index trials, std::uint64_t seed)
{
    ExperimentConfig cfg;
    cfg.system    = spec;
    cfg.noise     = {sigma_p, sigma_o, 0};
    cfg.method    = method;
    cfg.m         = m;
    cfg.trials    = trials;
    cfg.base_seed = seed;
    return cfg;
}

const EigenStats& stats_for(const TrialStats& stats, Complex truth)
{
    for (const auto& e : stats.eigen)
        if (std::abs(e.truth - truth) < 1e-12)
            return e;
    throw std::runtime_error("truth eigenvalue missing from trial statistics");
}

Json box_json(const EigenStats& e)
{
    return Json{{"mean", complex_json(e.mean)}, {"re", {e.re_lo, e.re_hi}}, {"im", {e.im_lo, e.im_hi}}};
}

const std::vector<Method> kThree = {Method::standard, Method::tls, Method::subspace};

// Noiseless exactness on a random stable 3x3 system.
Outcome noiseless_exactness()
{
    SplitMix64 rng(2024);
    ComplexMatrix a(3, 3);
    for (Index j = 0; j < 3; ++j)
        for (Index i = 0; i < 3; ++i)
            a(i, j) = rng.normal();
    a *= 0.95 / numkit::eig(a).values.cwiseAbs().maxCoeff();
    ComplexVector x0(3);
    for (Index i = 0; i < 3; ++i)
        x0(i) = rng.normal();
    const LtiSpec spec{a, x0, 1.0};
    const auto y     = lti_trajectory(spec, NoiseSpec{}, 200);
    const auto truth = to_list(numkit::eig(a).values);

    Outcome out{true, "", ""};
    Json j{{"truth", complex_list_json(truth)}, {"max_distance", Json::object()}};
    for (const auto method : kThree) {
        const auto est     = decompose(y, method);
        const auto pairing = match_eigenvalues(to_list(est.eigenvalues), truth);
        double worst       = pairing.pairs.size() == truth.size() ? 0.0 : INFINITY;
        for (const auto& p : pairing.pairs)
            worst = std::max(worst, p.distance);
        out.pass = out.pass && worst < 1e-8;
        out.detail += std::string(to_string(method)) + " " + fmt(worst) + " ";
        j["max_distance"][std::string(to_string(method))] = worst;
    }
    out.output = dump(j);
    return out;
}

// Operator convergence of subspace DMD as m grows.
Outcome operator_convergence()
{
    const auto spec = rotation(0.9);
    const std::vector<Index> sizes{1000, 10000, 100000};
    const int seeds = 5;
    std::vector<double> mean_error;
    for (const Index m : sizes) {
        double sum = 0.0;
        for (int s = 0; s < seeds; ++s) {
            const auto y = lti_trajectory(spec, {0.1, 0.1, derive_seed(20, static_cast<std::uint64_t>(s))}, m);
            sum += (subspace_dmd(y).full_operator() - spec.a).norm();
        }
        mean_error.push_back(sum / seeds);
    }
    Outcome out;
    out.pass = mean_error[0] > mean_error[1] && mean_error[1] > mean_error[2] && mean_error[2] < 0.05;
    out.detail = "mean ||K - a||_F over " + std::to_string(seeds) + " seeds: " + fmt(mean_error[0]) + ", " +
                 fmt(mean_error[1]) + ", " + fmt(mean_error[2]);
    out.output = dump(Json{{"m", sizes}, {"mean_frobenius_error", mean_error}});
    return out;
}

// 95% boxes over 1000 trials; only subspace DMD covers 0.9i.
Outcome percentile_boxes()
{
    const Complex truth = 0.9 * kI;
    Json j              = Json::object();
    bool inside[3]      = {};
    std::string detail;
    for (std::size_t i = 0; i < kThree.size(); ++i) {
        const auto stats = run_trials(lti_experiment(rotation(0.9), 0.1, 0.1, kThree[i], 1000, 1000, 3));
        const auto& e    = stats_for(stats, truth);
        inside[i]        = e.inside_box(truth);
        const std::string name(to_string(kThree[i]));
        j[name]         = box_json(e);
        j[name]["succeeded"] = stats.succeeded();
        detail += name + (inside[i] ? " covers " : " misses ");
    }
    return {!inside[0] && !inside[1] && inside[2], detail + "0.9i", dump(j)};
}

// Observation-noise sweep ordering.
Outcome noise_sweep()
{
    const std::vector<double> sigmas{0.02, 0.05, 0.1, 0.2};
    Json j{{"sigma_o", sigmas}};
    std::vector<std::vector<double>> med(kThree.size());
    for (std::size_t i = 0; i < kThree.size(); ++i) {
        for (const double s : sigmas)
            med[i].push_back(run_trials(lti_experiment(rotation(0.9), 0.1, s, kThree[i], 1000, 200, 4)).median_error());
        j[std::string(to_string(kThree[i]))] = med[i];
    }
    bool pass = true;
    std::string detail;
    for (std::size_t k = 0; k < sigmas.size(); ++k) {
        if (sigmas[k] < 0.1)
            continue;
        pass = pass && med[2][k] < med[1][k] && med[1][k] < med[0][k];
        detail += "sigma_o=" + fmt(sigmas[k]) + ": subspace " + fmt(med[2][k]) + " tls " + fmt(med[1][k]) +
                  " standard " + fmt(med[0][k]) + "; ";
    }
    return {pass, detail, dump(j)};
}

// Large-m medians for r = 1.0 and r = 0.9.
Outcome large_sample()
{
    Json j = Json::object();
    double med[2][3];
    const double radii[2] = {1.0, 0.9};
    for (int r = 0; r < 2; ++r)
        for (std::size_t i = 0; i < kThree.size(); ++i) {
            med[r][i] = run_trials(lti_experiment(rotation(radii[r]), 0.1, 0.1, kThree[i], 100000, 20, 5)).median_error();
            j["r=" + fmt(radii[r])][std::string(to_string(kThree[i]))] = med[r][i];
        }
    const bool unit   = med[0][0] < 0.05 && med[0][1] < 0.05 && med[0][2] < 0.05;
    const bool damped = med[1][2] < 0.02 && med[1][0] >= 0.02 && med[1][1] >= 0.02;
    std::string detail = "r=1: " + fmt(med[0][0]) + "/" + fmt(med[0][1]) + "/" + fmt(med[0][2]) +
                         "  r=0.9: " + fmt(med[1][0]) + "/" + fmt(med[1][1]) + "/" + fmt(med[1][2]) +
                         " (standard/tls/subspace)";
    return {unit && damped, detail, dump(j)};
}

// Second-moment identities of the observed LTI process.
Outcome moment_identities()
{
    const auto spec  = rotation(0.9);
    const NoiseSpec noise{0.1, 0.1, 6};
    const auto y     = lti_trajectory(spec, noise, 100000);
    const Index m    = y.snapshots();
    auto lagged      = [&](Index tau) {
        return empirical_moment(y.data.rightCols(m - tau), y.data.leftCols(m - tau));
    };
    const auto h0    = lagged(0), h1 = lagged(1), h2 = lagged(2);
    const auto model = lti_moment_model(spec, noise);
    const double lag = (h2 - spec.a * h1).norm() / h1.norm();
    const auto g_q   = model.expected_h(0);
    const double zero = (h0 - g_q).norm() / g_q.norm();
    return {lag < 0.05 && zero < 0.05, "lag relation " + fmt(lag) + ", zero-lag " + fmt(zero),
            dump(Json{{"lag_residual", lag}, {"zero_lag_residual", zero}})};
}

// Noiseless limit cycle with observation noise.
Outcome limit_cycle()
{
    StuartLandauSpec spec;
    const auto y  = simulate(spec, NoiseSpec{0.0, 0.05, 7}, 5000);
    auto lam      = to_list(decompose(y, Method::subspace).continuous_eigenvalues());
    std::sort(lam.begin(), lam.end(), [](Complex a, Complex b) {
        return std::abs(a.imag()) != std::abs(b.imag()) ? std::abs(a.imag()) > std::abs(b.imag()) : a.imag() > b.imag();
    });
    lam.resize(std::min<std::size_t>(lam.size(), 10));
    bool pass       = lam.size() == 10;
    double worst_re = 0.0, worst_rel = 0.0;
    for (const auto z : lam) {
        const double k = std::round(z.imag() / spec.gamma);
        worst_re       = std::max(worst_re, std::abs(z.real()));
        worst_rel      = std::max(worst_rel, k == 0.0 ? INFINITY : std::abs(z.imag() - k * spec.gamma) / std::abs(k * spec.gamma));
    }
    pass = pass && worst_re < 0.05 && worst_rel < 0.05;
    return {pass, "max |Re| " + fmt(worst_re) + ", max harmonic deviation " + fmt(worst_rel),
            dump(Json{{"eigenvalues", complex_list_json(lam)}})};
}

// Phase diffusion bends the spectrum; subspace DMD follows the clean data.
Outcome bent_line()
{
    StuartLandauSpec spec;
    std::vector<Complex> nominal;
    for (int k = spec.order_min; k <= spec.order_max; ++k)
        nominal.emplace_back(0.0, k * spec.gamma);

    bool pass = true;
    std::string detail;
    Json runs = Json::array();
    for (const std::uint64_t seed : {1, 2, 3}) {
        const auto traj  = stuart_landau_trajectory(spec, NoiseSpec{0.5, 0.05, seed}, 20000);
        const auto noisy = trig_observe(traj.theta, spec.order_min, spec.order_max, 0.05, seed, spec.dt);
        const auto clean = trig_observe(traj.theta, spec.order_min, spec.order_max, 0.0, seed, spec.dt);
        const auto ref   = to_list(decompose(clean, Method::standard).continuous_eigenvalues());
        const auto sub   = to_list(decompose(noisy, Method::subspace).continuous_eigenvalues());
        const auto tls   = to_list(decompose(noisy, Method::tls).continuous_eigenvalues());

        // Pool +k and -k against the nominal harmonics.
        const auto pairing = match_eigenvalues(sub, nominal);
        std::vector<double> re(6, 0.0);
        std::vector<int> hits(6, 0);
        for (const auto& p : pairing.pairs) {
            const int k = std::abs(static_cast<int>(std::lround(nominal[static_cast<std::size_t>(p.truth)].imag())));
            if (k >= 1 && k <= 5) {
                re[static_cast<std::size_t>(k)] += sub[static_cast<std::size_t>(p.estimated)].real();
                ++hits[static_cast<std::size_t>(k)];
            }
        }
        bool bent = true;
        std::vector<double> pooled;
        for (int k = 1; k <= 5; ++k) {
            bent = bent && hits[static_cast<std::size_t>(k)] > 0;
            pooled.push_back(hits[static_cast<std::size_t>(k)] ? re[static_cast<std::size_t>(k)] / hits[static_cast<std::size_t>(k)] : NAN);
            if (k > 1)
                bent = bent && pooled[static_cast<std::size_t>(k - 1)] < pooled[static_cast<std::size_t>(k - 2)];
        }
        const double d_sub = mean_matched_distance(sub, ref);
        const double d_tls = mean_matched_distance(tls, ref);
        pass               = pass && bent && d_sub < d_tls;
        detail += "seed " + std::to_string(seed) + (bent ? " bent" : " not bent") + ", distance subspace " +
                  fmt(d_sub) + " tls " + fmt(d_tls) + "; ";
        runs.push_back(Json{{"seed", seed}, {"pooled_re", pooled}, {"subspace_distance", d_sub}, {"tls_distance", d_tls}});
    }
    return {pass, detail, dump(Json{{"runs", runs}})};
}

// Stochastic Burgers at desk scale.
Outcome burgers_modes()
{
    BurgersSpec spec;
    spec.dx        = 1.0 / 50.0;
    spec.dt_solver = 2e-4;
    spec.t_end     = 1.0;
    const NoiseSpec noise{0.01, 0.001, 1};
    const auto clean = burgers_solve(spec, noise);
    const auto noisy = add_observation_noise(clean, noise.sigma_o, noise.seed);
    const Index rank = 10;
    const auto ref   = to_list(decompose(clean, Method::standard, rank).continuous_eigenvalues());
    const auto sub   = to_list(decompose(noisy, Method::subspace, rank).continuous_eigenvalues());
    const auto tls   = to_list(decompose(noisy, Method::tls, rank).continuous_eigenvalues());
    double max_re    = -INFINITY;
    for (const auto z : sub)
        max_re = std::max(max_re, z.real());
    const double d_sub = mean_matched_distance(sub, ref);
    const double d_tls = mean_matched_distance(tls, ref);
    return {max_re < 0.0 && d_sub < 0.5 * d_tls,
            "max Re " + fmt(max_re) + ", distance subspace " + fmt(d_sub) + " tls " + fmt(d_tls),
            dump(Json{{"subspace", complex_list_json(sub)}, {"tls", complex_list_json(tls)},
                      {"clean", complex_list_json(ref)}, {"subspace_distance", d_sub}, {"tls_distance", d_tls}})};
}

// Reduced high-dimensional case: a rank-2 rotation embedded in 50 channels.
Outcome high_dimensional()
{
    const Index n = 50;
    SplitMix64 rng(99);
    Eigen::MatrixXd g(n, 2);
    for (Index j = 0; j < 2; ++j)
        for (Index i = 0; i < n; ++i)
            g(i, j) = rng.normal();
    const Eigen::MatrixXd l = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() * Eigen::MatrixXd::Identity(n, 2);
    ComplexMatrix d         = ComplexMatrix::Zero(2, 2);
    d(0, 0)                 = kI;
    d(1, 1)                 = -kI;
    const ComplexMatrix lc  = l.cast<Complex>();
    const LtiSpec spec{lc * d * lc.transpose(), lc * ComplexVector::Ones(2), 1.0};

    bool pass = true;
    std::string detail;
    Json j = Json::object();
    for (const Index m : {Index{50}, Index{200}}) {
        auto cfg  = lti_experiment(spec, 0.1, 0.1, Method::subspace, m, 100, 8);
        cfg.rank  = 2;
        cfg.truth = std::vector<Complex>{kI, -kI};
        const auto stats = run_trials(cfg);
        const bool up    = stats_for(stats, kI).inside_box(kI);
        const bool down  = stats_for(stats, -kI).inside_box(-kI);
        pass             = pass && up && down;
        detail += "m=" + std::to_string(m) + (up && down ? " covers +-i; " : " misses; ");
        j["m=" + std::to_string(m)] = Json{{"+i", box_json(stats_for(stats, kI))}, {"-i", box_json(stats_for(stats, -kI))}};
    }
    return {pass, detail, dump(j)};
}

std::string read_all(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

} // namespace

int main(int argc, char** argv)
{
    const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
    fs::create_directories(dir);

    const std::vector<Criterion> criteria{
        {"1", "noiseless_exactness.json", noiseless_exactness, 1.0},
        {"2", "operator_convergence.json", operator_convergence, 30.0},
        {"3", "percentile_boxes.json", percentile_boxes, 120.0},
        {"4", "noise_sweep.json", noise_sweep, 120.0},
        {"5", "large_sample.json", large_sample, 0.0},
        {"6", "moment_identities.json", moment_identities, 0.0},
        {"7", "limit_cycle.json", limit_cycle, 0.0},
        {"8", "bent_line.json", bent_line, 0.0},
        {"9", "burgers_modes.json", burgers_modes, 60.0},
        {"n=50", "high_dimensional.json", high_dimensional, 0.0},
    };

    bool all = true;
    auto report = [&](const std::string& id, bool pass, const std::string& detail) {
        std::printf("%s criterion %s: %s\n", pass ? "PASS" : "FAIL", id.c_str(), detail.c_str());
        std::fflush(stdout);
        all = all && pass;
    };

    for (const auto& c : criteria) {
        Outcome o;
        const auto start = std::chrono::steady_clock::now();
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what(), ""};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = c.time_limit_s <= 0.0 || secs < c.time_limit_s;
        write_file_atomic(dir / c.file, o.output);
        char timing[64];
        std::snprintf(timing, sizeof timing, " [%.1f s%s]", secs, in_time ? "" : ", over time limit");
        report(c.id, o.pass && in_time, o.detail + timing);
    }

    // Re-execute everything and compare against the files just written.
    std::string mismatched;
    for (const auto& c : criteria) {
        std::string again;
        try {
            again = c.run().output;
        } catch (const std::exception&) {
            again.clear();
        }
        if (again != read_all(dir / c.file))
            mismatched += " " + c.file;
    }
    report("10", mismatched.empty(),
           mismatched.empty() ? "all " + std::to_string(criteria.size()) + " output files reproduced bit for bit"
                              : "differences in" + mismatched);
    return all ? 0 : 1;
}

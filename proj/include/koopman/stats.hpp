#pragma once

/// \file stats.hpp
/// Empirical moments, eigenvalue matching and error metrics, and the Monte
/// Carlo harness aggregating repeated decompositions of simulated data.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "koopman/dmd.hpp"
#include "koopman/errors.hpp"
#include "koopman/numkit.hpp"
#include "koopman/rng.hpp"
#include "koopman/systems.hpp"

namespace koopman {

/// (1/m) y_a y_b^H over the shared column count m.
inline ComplexMatrix empirical_moment(const ComplexMatrix& y_a, const ComplexMatrix& y_b)
{
    if (y_a.cols() != y_b.cols())
        throw DimensionError("empirical_moment: column counts differ");
    if (y_a.cols() < 1 || y_a.rows() < 1 || y_b.rows() < 1)
        throw DimensionError("empirical_moment: empty operand");
    return y_a * y_b.adjoint() / static_cast<double>(y_a.cols());
}

/// |est - truth| / |truth|.
inline double relative_error(Complex est, Complex truth)
{
    if (truth == Complex(0.0, 0.0))
        throw ParameterError("relative error undefined for a zero reference");
    return std::abs(est - truth) / std::abs(truth);
}

struct EigenPair {
    Index estimated;
    Index truth;
    double distance;
};

struct EigenPairing {
    std::vector<EigenPair> pairs; // ordered by truth index
    std::vector<Index> unmatched_estimated;
    std::vector<Index> unmatched_truth;

    double total_distance() const
    {
        double s = 0.0;
        for (const auto& p : pairs)
            s += p.distance;
        return s;
    }

    std::optional<Index> estimate_for(Index truth) const
    {
        for (const auto& p : pairs)
            if (p.truth == truth)
                return p.estimated;
        return std::nullopt;
    }
};

namespace detail {

/// Minimum-cost assignment of every row to a distinct column (rows <= cols),
/// Hungarian method with potentials. cost is row-major rows x cols.
inline std::vector<std::size_t> assign_rows(const std::vector<double>& cost, std::size_t rows, std::size_t cols)
{
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
    std::vector<std::size_t> match(cols + 1, 0), way(cols + 1, 0);
    for (std::size_t i = 1; i <= rows; ++i) {
        match[0]        = i;
        std::size_t col = 0;
        std::vector<double> minv(cols + 1, inf);
        std::vector<bool> used(cols + 1, false);
        do {
            used[col]             = true;
            const std::size_t row = match[col];
            double delta          = inf;
            std::size_t next      = 0;
            for (std::size_t j = 1; j <= cols; ++j) {
                if (used[j])
                    continue;
                const double reduced = cost[(row - 1) * cols + (j - 1)] - u[row] - v[j];
                if (reduced < minv[j]) {
                    minv[j] = reduced;
                    way[j]  = col;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    next  = j;
                }
            }
            for (std::size_t j = 0; j <= cols; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col = next;
        } while (match[col] != 0);
        do {
            const std::size_t prev = way[col];
            match[col]             = match[prev];
            col                    = prev;
        } while (col != 0);
    }
    std::vector<std::size_t> row_to_col(rows, 0);
    for (std::size_t j = 1; j <= cols; ++j)
        if (match[j] != 0)
            row_to_col[match[j] - 1] = j - 1;
    return row_to_col;
}

} // namespace detail

/// Partial bijection between estimated and true eigenvalues minimising the
/// total distance |est - truth| over all bijections of size min(#est, #truth).
inline EigenPairing match_eigenvalues(const std::vector<Complex>& estimated, const std::vector<Complex>& truth)
{
    if (estimated.empty() || truth.empty())
        throw ParameterError("match_eigenvalues: empty list");
    const bool est_rows     = estimated.size() <= truth.size();
    const auto& row_values  = est_rows ? estimated : truth;
    const auto& col_values  = est_rows ? truth : estimated;
    const std::size_t rows  = row_values.size();
    const std::size_t cols  = col_values.size();
    std::vector<double> cost(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            cost[i * cols + j] = std::abs(row_values[i] - col_values[j]);
    const auto row_to_col = detail::assign_rows(cost, rows, cols);

    EigenPairing out;
    std::vector<bool> est_used(estimated.size(), false), truth_used(truth.size(), false);
    for (std::size_t i = 0; i < rows; ++i) {
        const std::size_t e = est_rows ? i : row_to_col[i];
        const std::size_t t = est_rows ? row_to_col[i] : i;
        est_used[e] = truth_used[t] = true;
        out.pairs.push_back({static_cast<Index>(e), static_cast<Index>(t), std::abs(estimated[e] - truth[t])});
    }
    std::sort(out.pairs.begin(), out.pairs.end(), [](const auto& a, const auto& b) { return a.truth < b.truth; });
    for (std::size_t e = 0; e < estimated.size(); ++e)
        if (!est_used[e])
            out.unmatched_estimated.push_back(static_cast<Index>(e));
    for (std::size_t t = 0; t < truth.size(); ++t)
        if (!truth_used[t])
            out.unmatched_truth.push_back(static_cast<Index>(t));
    return out;
}

inline std::vector<Complex> to_list(const ComplexVector& v)
{
    return {v.data(), v.data() + v.size()};
}

/// Empirical quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> values, double q)
{
    if (values.empty())
        throw ParameterError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo    = static_cast<std::size_t>(std::floor(pos));
    const auto hi    = std::min(lo + 1, values.size() - 1);
    const double w   = pos - static_cast<double>(lo);
    return values[lo] + w * (values[hi] - values[lo]);
}

inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

/// Monte Carlo description; the CLI adds output locations on top of this.
struct ExperimentConfig {
    SystemSpec system;
    NoiseSpec noise; // seed is replaced per trial
    Method method = Method::subspace;
    std::optional<Index> rank;
    std::optional<ComplexMatrix> q_cov; // nc only; default from sigma_o
    Index m                 = 1000;
    Index trials            = 1;
    std::uint64_t base_seed = 0;
    std::optional<std::vector<Complex>> truth; // discrete-time; defaults to eig(a) for LTI
    unsigned threads = 0;                      // 0: KOOPMAN_THREADS or hardware concurrency
};

/// Record of one truth eigenvalue across the successful trials.
struct EigenStats {
    Complex truth;
    Complex mean;
    double re_lo = 0.0, re_hi = 0.0, im_lo = 0.0, im_hi = 0.0;
    std::vector<Index> trial;       // trial index of each matched estimate
    std::vector<Complex> estimates; // matched estimate per listed trial
    std::vector<double> errors;     // relative error per listed trial

    bool inside_box(Complex z) const
    {
        return z.real() >= re_lo && z.real() <= re_hi && z.imag() >= im_lo && z.imag() <= im_hi;
    }
};

struct TrialFailure {
    Index trial;
    std::string reason;
};

struct TrialStats {
    std::vector<EigenStats> eigen;
    Index trials = 0;
    std::vector<TrialFailure> failures;

    Index succeeded() const { return trials - static_cast<Index>(failures.size()); }

    /// Median of the relative errors pooled over every truth eigenvalue.
    double median_error() const
    {
        std::vector<double> pooled;
        for (const auto& e : eigen)
            pooled.insert(pooled.end(), e.errors.begin(), e.errors.end());
        return pooled.empty() ? std::numeric_limits<double>::quiet_NaN() : median(std::move(pooled));
    }
};

/// Worker count: explicit request, else KOOPMAN_THREADS, else the hardware.
inline unsigned resolve_threads(unsigned requested)
{
    unsigned n = requested;
    if (n == 0) {
        n = std::max(1u, std::thread::hardware_concurrency());
        if (const char* env = std::getenv("KOOPMAN_THREADS")) {
            char* end        = nullptr;
            const long value = std::strtol(env, &end, 10);
            if (end != env && value >= 1)
                n = std::min(n, static_cast<unsigned>(value));
        }
    }
    return std::max(1u, n);
}

inline std::vector<Complex> default_truth(const ExperimentConfig& config)
{
    if (config.truth)
        return *config.truth;
    if (const auto* lti = std::get_if<LtiSpec>(&config.system))
        return to_list(numkit::eig(lti->a).values);
    throw ParameterError("experiment needs explicit truth eigenvalues for this system");
}

/// Data and decomposition of trial `t`: seed derived from (base_seed, t).
inline DmdOutcome run_single_trial(const ExperimentConfig& config, Index t)
{
    NoiseSpec noise = config.noise;
    noise.seed      = derive_seed(config.base_seed, static_cast<std::uint64_t>(t));
    const auto y    = simulate(config.system, noise, config.m);
    std::optional<ComplexMatrix> q_cov = config.q_cov;
    if (config.method == Method::moment_corrected && !q_cov)
        q_cov = observation_noise_covariance(config.noise.sigma_o, y.channels(), !y.is_real());
    return decompose(y, config.method, config.rank, q_cov);
}

/// Runs every trial (possibly in parallel), matches eigenvalues against the
/// truth and aggregates means, 2.5/97.5 percentile boxes and relative errors.
/// Trials failing with a numerical error are excluded and listed. The result
/// does not depend on the worker count.
inline TrialStats run_trials(const ExperimentConfig& config)
{
    if (config.trials < 1)
        throw ParameterError("trial count must be at least 1");
    config.noise.validate();
    const auto truth = default_truth(config);
    if (truth.empty())
        throw ParameterError("truth eigenvalue list is empty");

    struct Slot {
        std::optional<std::vector<Complex>> matched; // per truth, NaN when unmatched
        std::string failure;
    };
    std::vector<Slot> slots(static_cast<std::size_t>(config.trials));

    std::atomic<Index> next{0};
    std::mutex error_mutex;
    std::exception_ptr fatal;
    auto worker = [&] {
        for (Index t = next++; t < config.trials; t = next++) {
            auto& slot = slots[static_cast<std::size_t>(t)];
            try {
                const auto outcome = run_single_trial(config, t);
                const auto pairing = match_eigenvalues(to_list(outcome.eigenvalues), truth);
                std::vector<Complex> matched(truth.size(), Complex(std::nan(""), std::nan("")));
                for (const auto& p : pairing.pairs)
                    matched[static_cast<std::size_t>(p.truth)] = outcome.eigenvalues[p.estimated];
                slot.matched = std::move(matched);
            } catch (const NumericalError& e) {
                slot.failure = e.what();
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!fatal)
                    fatal = std::current_exception();
                next = config.trials;
            }
        }
    };
    const unsigned workers = std::min<unsigned>(resolve_threads(config.threads),
                                                static_cast<unsigned>(std::min<Index>(config.trials, 1 << 16)));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back(worker);
    }
    if (fatal)
        std::rethrow_exception(fatal);

    TrialStats stats;
    stats.trials = config.trials;
    stats.eigen.resize(truth.size());
    for (std::size_t k = 0; k < truth.size(); ++k)
        stats.eigen[k].truth = truth[k];
    for (Index t = 0; t < config.trials; ++t) {
        const auto& slot = slots[static_cast<std::size_t>(t)];
        if (!slot.matched) {
            stats.failures.push_back({t, slot.failure});
            continue;
        }
        for (std::size_t k = 0; k < truth.size(); ++k) {
            const Complex z = (*slot.matched)[k];
            if (std::isnan(z.real()))
                continue;
            auto& e = stats.eigen[k];
            e.trial.push_back(t);
            e.estimates.push_back(z);
            e.errors.push_back(truth[k] == Complex(0.0, 0.0) ? std::abs(z) : relative_error(z, truth[k]));
        }
    }
    for (auto& e : stats.eigen) {
        if (e.estimates.empty()) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            e.mean           = {nan, nan};
            e.re_lo = e.re_hi = e.im_lo = e.im_hi = nan;
            continue;
        }
        Complex sum{};
        std::vector<double> re, im;
        for (const auto& z : e.estimates) {
            sum += z;
            re.push_back(z.real());
            im.push_back(z.imag());
        }
        e.mean  = sum / static_cast<double>(e.estimates.size());
        e.re_lo = quantile(re, 0.025);
        e.re_hi = quantile(re, 0.975);
        e.im_lo = quantile(im, 0.025);
        e.im_hi = quantile(im, 0.975);
    }
    return stats;
}

} // namespace koopman

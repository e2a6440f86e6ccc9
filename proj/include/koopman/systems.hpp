#pragma once

/// \file systems.hpp
/// Reference random dynamical systems and noisy observables: a linear
/// time-invariant system, the polar-discretized stochastic Stuart-Landau
/// oscillator with trigonometric observables, and the stochastic viscous
/// Burgers equation on [0, 1].
///
/// Noise convention: a standard deviation sigma applies to every real
/// component. Complex channels therefore carry E|w|^2 = 2 sigma^2, while
/// real-valued data (Burgers) receives real noise only.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <variant>
#include <vector>

#include "koopman/dmd.hpp"
#include "koopman/errors.hpp"
#include "koopman/numkit.hpp"
#include "koopman/rng.hpp"

namespace koopman {

struct NoiseSpec {
    double sigma_p     = 0.0;
    double sigma_o     = 0.0;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (!(sigma_p >= 0.0) || !(sigma_o >= 0.0) || !std::isfinite(sigma_p) || !std::isfinite(sigma_o))
            throw ParameterError("noise standard deviations must be finite and nonnegative");
    }
};

struct LtiSpec {
    ComplexMatrix a;
    ComplexVector x0;
    double dt = 1.0;

    void validate() const
    {
        numkit::require_square(a, "LTI system matrix");
        if (x0.size() != a.rows())
            throw DimensionError("LTI initial state length differs from system size");
        if (!x0.allFinite())
            throw ParameterError("LTI initial state has non-finite entries");
        if (!(dt > 0.0))
            throw ParameterError("LTI dt must be positive");
    }
};

struct StuartLandauSpec {
    double mu       = 1.0;
    double gamma    = 1.0;
    double beta     = 0.0;
    double dt       = 0.01;
    double r0       = 1.0;
    double theta0   = 0.0;
    int order_min   = -10;
    int order_max   = 10;
    Index burn_in   = 1000; // steps discarded before the first snapshot

    Index channels() const { return static_cast<Index>(order_max - order_min + 1); }

    void validate() const
    {
        if (!(dt > 0.0))
            throw ParameterError("Stuart-Landau dt must be positive");
        if (!(r0 > 0.0))
            throw ParameterError("Stuart-Landau r0 must be positive");
        if (order_max < order_min)
            throw ParameterError("Stuart-Landau observable orders are empty");
        if (burn_in < 0)
            throw ParameterError("Stuart-Landau burn-in must be nonnegative");
    }
};

struct BurgersSpec {
    double k            = 0.01;
    double dx           = 1e-2;
    double dt_solver    = 5e-5;
    double t_end        = 1.0;
    Index sample_stride = 1;
    double ic_amplitude = 1.0; // u(x, 0) = ic_amplitude * sin(2 pi x)

    Index intervals() const { return static_cast<Index>(std::llround(1.0 / dx)); }
    Index steps() const { return static_cast<Index>(std::llround(t_end / dt_solver)); }
    Index snapshot_count() const { return steps() / sample_stride + 1; }
    double snapshot_dt() const { return dt_solver * static_cast<double>(sample_stride); }

    void validate() const
    {
        if (!(k > 0.0))
            throw ParameterError("Burgers viscosity k must be positive");
        if (!(dx > 0.0) || !(dt_solver > 0.0) || !(t_end > 0.0))
            throw ParameterError("Burgers dx, dt and t_end must be positive");
        if (sample_stride < 1)
            throw ParameterError("Burgers sample stride must be at least 1");
        const double cells = 1.0 / dx;
        if (intervals() < 2 || std::abs(cells - std::round(cells)) > 1e-9 * cells)
            throw ParameterError("Burgers dx must divide [0, 1] evenly");
        const double steps_exact = t_end / dt_solver;
        if (std::abs(steps_exact - std::round(steps_exact)) > 1e-9 * steps_exact)
            throw ParameterError("Burgers dt must divide t_end evenly");
    }
};

using SystemSpec = std::variant<LtiSpec, StuartLandauSpec, BurgersSpec>;

namespace detail {

inline Complex complex_normal(SplitMix64& rng, double sigma)
{
    const double re = rng.normal();
    const double im = rng.normal();
    return {sigma * re, sigma * im};
}

} // namespace detail

/// x_t = a x_{t-1} + e_t, y_t = x_t + w_t, with x_0 = spec.x0.
inline SnapshotMatrix lti_trajectory(const LtiSpec& spec, const NoiseSpec& noise, Index m)
{
    spec.validate();
    noise.validate();
    if (m < 1)
        throw ParameterError("trajectory length must be at least 1");
    const Index n = spec.a.rows();
    SplitMix64 process(noise.seed, Stream::process);
    SplitMix64 observation(noise.seed, Stream::observation);

    SnapshotMatrix y{ComplexMatrix(n, m), spec.dt};
    ComplexVector x = spec.x0;
    ComplexVector e(n);
    for (Index t = 0; t < m; ++t) {
        if (t > 0) {
            for (Index i = 0; i < n; ++i)
                e[i] = noise.sigma_p > 0.0 ? detail::complex_normal(process, noise.sigma_p) : Complex{};
            x = (spec.a * x + e).eval();
        }
        for (Index i = 0; i < n; ++i)
            y.data(i, t) = x[i] + (noise.sigma_o > 0.0 ? detail::complex_normal(observation, noise.sigma_o)
                                                       : Complex{});
    }
    return y;
}

/// Analytic second moments of the LTI system for oracle checks.
///
/// Covariances are stored per unit of sigma^2 (p_cov = sigma_p^2 I,
/// q_cov = sigma_o^2 I); `noise_power` is the factor relating them to the
/// actual complex second moments, 2 for the complex-noise convention.
struct MomentModel {
    ComplexMatrix k_op;
    ComplexMatrix g_cov;
    ComplexMatrix p_cov;
    ComplexMatrix q_cov;
    ComplexMatrix r_cross;
    ComplexMatrix d;
    double noise_power = 2.0;

    /// E[g_{t+tau} g_t^H] = noise_power * K^tau G.
    ComplexMatrix expected_g(Index tau) const
    {
        ComplexMatrix out = noise_power * g_cov;
        for (Index i = 0; i < tau; ++i)
            out = k_op * out;
        return out;
    }

    /// E[h_{t+tau} h_t^H]: noise_power * (G + Q) at tau = 0,
    /// noise_power * K^{tau-1} D otherwise.
    ComplexMatrix expected_h(Index tau) const
    {
        if (tau == 0)
            return noise_power * (g_cov + q_cov);
        ComplexMatrix out = noise_power * d;
        for (Index i = 1; i < tau; ++i)
            out = k_op * out;
        return out;
    }
};

inline MomentModel lti_moment_model(const LtiSpec& spec, const NoiseSpec& noise)
{
    spec.validate();
    noise.validate();
    const Index n = spec.a.rows();
    const auto id = ComplexMatrix::Identity(n, n);
    MomentModel out;
    out.k_op    = spec.a;
    out.p_cov   = noise.sigma_p * noise.sigma_p * id;
    out.q_cov   = noise.sigma_o * noise.sigma_o * id;
    out.r_cross = ComplexMatrix::Zero(n, n);
    out.g_cov   = numkit::lyapunov_stationary_cov(spec.a, out.p_cov);
    out.d       = spec.a * out.g_cov + out.r_cross;
    return out;
}

struct PolarTrajectory {
    std::vector<double> r;
    std::vector<double> theta;
};

/// Radial floor guarding the dt / r_t phase-noise gain.
inline constexpr double kStuartLandauRadiusFloor = 1e-6;

/// Polar Euler-Maruyama scheme:
///   r' = r + (mu r - r^3) dt + dt e_r
///   theta' = theta + (gamma - beta r^2) dt + (dt / r) e_theta
/// with e ~ N(0, sigma_p^2 I). The first `burn_in` steps are discarded.
inline PolarTrajectory stuart_landau_trajectory(const StuartLandauSpec& spec, const NoiseSpec& noise, Index m)
{
    spec.validate();
    noise.validate();
    if (m < 1)
        throw ParameterError("trajectory length must be at least 1");
    SplitMix64 process(noise.seed, Stream::process);

    PolarTrajectory out;
    out.r.reserve(static_cast<std::size_t>(m));
    out.theta.reserve(static_cast<std::size_t>(m));
    double r     = spec.r0;
    double theta = spec.theta0;
    const Index total = spec.burn_in + m;
    for (Index t = 0; t < total; ++t) {
        if (t >= spec.burn_in) {
            out.r.push_back(r);
            out.theta.push_back(theta);
        }
        double e_r = 0.0, e_theta = 0.0;
        if (noise.sigma_p > 0.0) {
            e_r     = noise.sigma_p * process.normal();
            e_theta = noise.sigma_p * process.normal();
        }
        const double r_next     = r + (spec.mu * r - r * r * r) * spec.dt + spec.dt * e_r;
        const double theta_next = theta + (spec.gamma - spec.beta * r * r) * spec.dt + (spec.dt / r) * e_theta;
        r                       = std::max(r_next, kStuartLandauRadiusFloor);
        theta                   = theta_next;
    }
    return out;
}

/// Channel for order k (rows ordered order_min..order_max) is e^{i k theta_t}
/// plus complex noise of per-component std sigma_o.
inline SnapshotMatrix trig_observe(const std::vector<double>& theta, int order_min, int order_max, double sigma_o,
                                   std::uint64_t seed, double dt = 1.0)
{
    if (order_max < order_min)
        throw ParameterError("observable orders are empty");
    if (theta.empty())
        throw ParameterError("phase trajectory is empty");
    if (!(sigma_o >= 0.0))
        throw ParameterError("sigma_o must be nonnegative");
    const Index n = order_max - order_min + 1;
    const auto m  = static_cast<Index>(theta.size());
    SplitMix64 observation(seed, Stream::observation);
    SnapshotMatrix y{ComplexMatrix(n, m), dt};
    for (Index t = 0; t < m; ++t)
        for (Index row = 0; row < n; ++row) {
            const double k = static_cast<double>(order_min + row);
            y.data(row, t) = std::polar(1.0, k * theta[static_cast<std::size_t>(t)]);
            if (sigma_o > 0.0)
                y.data(row, t) += detail::complex_normal(observation, sigma_o);
        }
    return y;
}

/// Adds iid Gaussian noise of std sigma_o to every real component. Real-valued
/// input receives real noise only, so it stays real.
inline SnapshotMatrix add_observation_noise(const SnapshotMatrix& y, double sigma_o, std::uint64_t seed)
{
    y.validate();
    if (!(sigma_o >= 0.0) || !std::isfinite(sigma_o))
        throw ParameterError("sigma_o must be finite and nonnegative");
    SnapshotMatrix out = y;
    if (sigma_o == 0.0)
        return out;
    const bool real_only = y.is_real();
    SplitMix64 observation(seed, Stream::observation);
    for (Index t = 0; t < out.snapshots(); ++t)
        for (Index i = 0; i < out.channels(); ++i)
            out.data(i, t) += real_only ? Complex(sigma_o * observation.normal(), 0.0)
                                        : detail::complex_normal(observation, sigma_o);
    return out;
}

/// Magnitude beyond which the Burgers solver reports divergence.
inline constexpr double kBurgersBlowUp = 1e3;

/// Stochastic Burgers u_t + u u_x = k u_xx + sigma_p e(x, t) with
/// u(0, t) = u(1, t) = 0. Crank-Nicolson diffusion (tridiagonal solve),
/// explicit centred advection, and a Maruyama increment
/// sigma_p sqrt(dt / dx) xi at every interior node.
inline SnapshotMatrix burgers_solve(const BurgersSpec& spec, const NoiseSpec& noise)
{
    spec.validate();
    noise.validate();
    const Index cells    = spec.intervals();
    const Index nodes    = cells + 1;
    const Index interior = cells - 1;
    const double dx      = 1.0 / static_cast<double>(cells);
    const double dt      = spec.dt_solver;
    const double alpha   = spec.k * dt / (2.0 * dx * dx);
    const double adv     = dt / (2.0 * dx);
    const double kick    = noise.sigma_p * std::sqrt(dt / dx);

    std::vector<double> u(static_cast<std::size_t>(nodes), 0.0);
    for (Index i = 1; i < cells; ++i)
        u[static_cast<std::size_t>(i)] =
            spec.ic_amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) * dx);

    // Thomas factorisation of the constant matrix tridiag(-alpha, 1 + 2 alpha, -alpha).
    std::vector<double> c_prime(static_cast<std::size_t>(interior));
    std::vector<double> denom(static_cast<std::size_t>(interior));
    for (Index j = 0; j < interior; ++j) {
        const double prev = j == 0 ? 0.0 : c_prime[static_cast<std::size_t>(j - 1)];
        denom[static_cast<std::size_t>(j)]   = (1.0 + 2.0 * alpha) + alpha * prev;
        c_prime[static_cast<std::size_t>(j)] = -alpha / denom[static_cast<std::size_t>(j)];
    }

    const Index steps = spec.steps();
    SnapshotMatrix y{ComplexMatrix::Zero(nodes, spec.snapshot_count()), spec.snapshot_dt()};
    auto record = [&](Index column) {
        for (Index i = 0; i < nodes; ++i)
            y.data(i, column) = Complex(u[static_cast<std::size_t>(i)], 0.0);
    };
    record(0);

    SplitMix64 process(noise.seed, Stream::process);
    std::vector<double> rhs(static_cast<std::size_t>(interior));
    for (Index step = 1; step <= steps; ++step) {
        for (Index j = 0; j < interior; ++j) {
            const auto i        = static_cast<std::size_t>(j + 1);
            const double left   = u[i - 1];
            const double centre = u[i];
            const double right  = u[i + 1];
            double value = alpha * left + (1.0 - 2.0 * alpha) * centre + alpha * right - adv * centre * (right - left);
            if (kick > 0.0)
                value += kick * process.normal();
            rhs[static_cast<std::size_t>(j)] = value;
        }
        // Forward sweep then back substitution; boundary nodes stay pinned at 0.
        for (Index j = 0; j < interior; ++j) {
            const auto s      = static_cast<std::size_t>(j);
            const double prev = j == 0 ? 0.0 : rhs[s - 1];
            rhs[s]            = (rhs[s] + alpha * prev) / denom[s];
        }
        for (Index j = interior - 2; j >= 0; --j) {
            const auto s = static_cast<std::size_t>(j);
            rhs[s] -= c_prime[s] * rhs[s + 1];
        }
        for (Index j = 0; j < interior; ++j) {
            const double v = rhs[static_cast<std::size_t>(j)];
            if (!std::isfinite(v) || std::abs(v) > kBurgersBlowUp)
                throw NumericalError("solver diverged, reduce dt");
            u[static_cast<std::size_t>(j + 1)] = v;
        }
        if (step % spec.sample_stride == 0)
            record(step / spec.sample_stride);
    }
    return y;
}

/// Observation-noise covariance Q for data with per-component std sigma_o.
inline ComplexMatrix observation_noise_covariance(double sigma_o, Index n, bool complex_channels)
{
    const double power = complex_channels ? 2.0 : 1.0;
    return power * sigma_o * sigma_o * ComplexMatrix::Identity(n, n);
}

/// Simulates any system to an observed snapshot matrix. LTI and
/// Stuart-Landau take `m` snapshots; Burgers derives its count from the grid.
inline SnapshotMatrix simulate(const SystemSpec& system, const NoiseSpec& noise, Index m)
{
    return std::visit(
        [&](const auto& spec) -> SnapshotMatrix {
            using T = std::decay_t<decltype(spec)>;
            if constexpr (std::is_same_v<T, LtiSpec>) {
                return lti_trajectory(spec, noise, m);
            } else if constexpr (std::is_same_v<T, StuartLandauSpec>) {
                const auto traj = stuart_landau_trajectory(spec, noise, m);
                return trig_observe(traj.theta, spec.order_min, spec.order_max, noise.sigma_o, noise.seed, spec.dt);
            } else {
                return add_observation_noise(burgers_solve(spec, noise), noise.sigma_o, noise.seed);
            }
        },
        system);
}

} // namespace koopman

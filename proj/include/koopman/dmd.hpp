#pragma once

/// \file dmd.hpp
/// Dynamic mode decomposition estimators: standard (exact) DMD, total least
/// squares DMD, moment-corrected (noise-corrected) DMD and subspace DMD, plus
/// the modal post-processing shared by all of them.
///
/// Every estimator ends in the same shape: an orthonormal basis U (n x r) and a
/// lifted matrix B (n x r) such that the full operator estimate is B U^H and
/// the reduced operator is A~ = U^H B. Dynamic modes are w = B w~ / lambda for
/// each eigenpair (lambda, w~) of A~.

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "koopman/errors.hpp"
#include "koopman/numkit.hpp"

namespace koopman {

enum class Method { standard, tls, moment_corrected, subspace };

inline std::string_view to_string(Method m)
{
    switch (m) {
    case Method::standard: return "standard";
    case Method::tls: return "tls";
    case Method::moment_corrected: return "nc";
    case Method::subspace: return "subspace";
    }
    return "unknown";
}

/// Accepts the CLI spellings plus "moment_corrected" as an alias of "nc".
inline std::optional<Method> parse_method(std::string_view name)
{
    if (name == "standard") return Method::standard;
    if (name == "tls") return Method::tls;
    if (name == "nc" || name == "moment_corrected") return Method::moment_corrected;
    if (name == "subspace") return Method::subspace;
    return std::nullopt;
}

/// Observations of n channels at m equispaced times; column j is time index j.
struct SnapshotMatrix {
    ComplexMatrix data;
    double dt = 1.0;

    Index channels() const { return data.rows(); }
    Index snapshots() const { return data.cols(); }

    void validate() const
    {
        if (data.rows() < 1 || data.cols() < 1)
            throw DimensionError("snapshot matrix must have at least one channel and one snapshot");
        if (!(dt > 0.0) || !std::isfinite(dt))
            throw ParameterError("snapshot interval dt must be positive");
        if (!data.allFinite())
            throw ParameterError("snapshot matrix has non-finite entries");
    }

    /// True when every imaginary part is exactly zero.
    bool is_real() const { return data.imag().isZero(0.0); }
};

struct DmdOutcome {
    ComplexVector eigenvalues;                // sorted, |lambda| above the zero cutoff
    ComplexMatrix modes;                      // n x r, unit-norm columns
    std::optional<ComplexMatrix> left_vectors; // n x r, z_i^H w_i = 1 (simple spectra only)
    Index retained_rank = 0;
    Method method       = Method::standard;
    double dt           = 1.0;

    // Factors of the full operator estimate B U^H.
    ComplexMatrix basis;
    ComplexMatrix lift;

    Index size() const { return eigenvalues.size(); }
    ComplexMatrix full_operator() const { return lift * basis.adjoint(); }
    ComplexVector continuous_eigenvalues() const;
};

/// Relative cutoff below which eigenvalues are treated as zero and dropped.
inline constexpr double kZeroEigenvalueCutoff = 1e-10;

/// Principal-branch ln(lambda) / dt.
inline Complex to_continuous(Complex lambda, double dt)
{
    if (!(dt > 0.0))
        throw ParameterError("to_continuous: dt must be positive");
    if (lambda == Complex(0.0, 0.0))
        throw ParameterError("no continuous-time counterpart");
    return std::log(lambda) / dt;
}

inline ComplexVector DmdOutcome::continuous_eigenvalues() const
{
    ComplexVector out(eigenvalues.size());
    for (Index i = 0; i < eigenvalues.size(); ++i)
        out[i] = to_continuous(eigenvalues[i], dt);
    return out;
}

namespace detail {

/// Order by descending magnitude; magnitudes equal to 1e-12 relative form a
/// tie group ordered by descending imaginary part.
inline std::vector<Index> spectral_order(const ComplexVector& values)
{
    std::vector<Index> idx(static_cast<std::size_t>(values.size()));
    for (Index i = 0; i < values.size(); ++i)
        idx[static_cast<std::size_t>(i)] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Index a, Index b) { return std::abs(values[a]) > std::abs(values[b]); });
    std::size_t start = 0;
    while (start < idx.size()) {
        std::size_t end  = start + 1;
        const double ref = std::abs(values[idx[start]]);
        while (end < idx.size() && ref - std::abs(values[idx[end]]) <= 1e-12 * ref)
            ++end;
        std::stable_sort(idx.begin() + static_cast<std::ptrdiff_t>(start),
                         idx.begin() + static_cast<std::ptrdiff_t>(end),
                         [&](Index a, Index b) { return values[a].imag() > values[b].imag(); });
        start = end;
    }
    return idx;
}

/// Scales to unit norm and rotates so the largest-magnitude entry is real
/// positive (first such entry on ties). Returns the applied factor.
inline Complex normalize_mode(Eigen::Ref<ComplexVector> w)
{
    const double nrm = w.norm();
    if (!(nrm > 0.0))
        return Complex(1.0, 0.0);
    Index arg    = 0;
    double best  = -1.0;
    for (Index i = 0; i < w.size(); ++i) {
        const double a = std::abs(w[i]);
        if (a > best) {
            best = a;
            arg  = i;
        }
    }
    const Complex factor = std::conj(w[arg]) / (std::abs(w[arg]) * nrm);
    w *= factor;
    w[arg] = Complex(w[arg].real(), 0.0);
    return factor;
}

inline DmdOutcome finish(ComplexMatrix basis, ComplexMatrix lift, Method method, double dt)
{
    const ComplexMatrix reduced = basis.adjoint() * lift;
    const auto dec              = numkit::eig(reduced);

    const double max_abs = dec.values.size() > 0 ? dec.values.cwiseAbs().maxCoeff() : 0.0;
    if (!(max_abs > 0.0))
        throw NumericalError("operator estimate has no nonzero eigenvalues");
    const double cutoff = kZeroEigenvalueCutoff * max_abs;

    std::vector<Index> keep;
    for (Index i : spectral_order(dec.values))
        if (std::abs(dec.values[i]) >= cutoff)
            keep.push_back(i);

    const Index n = lift.rows();
    const auto r  = static_cast<Index>(keep.size());
    DmdOutcome out;
    out.method        = method;
    out.dt            = dt;
    out.retained_rank = basis.cols();
    out.eigenvalues.resize(r);
    out.modes.resize(n, r);
    ComplexMatrix left(n, r);
    for (Index k = 0; k < r; ++k) {
        const Index i        = keep[static_cast<std::size_t>(k)];
        const Complex lambda = dec.values[i];
        out.eigenvalues[k]   = lambda;
        out.modes.col(k)     = (lift * dec.right.col(i)) / lambda;
        const Complex factor = normalize_mode(out.modes.col(k));
        if (dec.simple_spectrum)
            left.col(k) = (basis * dec.left.col(i)) / std::conj(factor);
    }
    if (dec.simple_spectrum)
        out.left_vectors = std::move(left);
    out.basis = std::move(basis);
    out.lift  = std::move(lift);
    return out;
}

/// Shared tail of tls and subspace DMD: given the top and bottom blocks of an
/// orthonormal basis, estimates the operator bottom * pinv(top).
inline DmdOutcome finish_stacked(const ComplexMatrix& top, const ComplexMatrix& bottom, Method method,
                                 double dt, std::optional<Index> required_rank)
{
    const auto f = numkit::compact_svd(top);
    if (required_rank && f.rank() < *required_rank)
        throw NumericalError("tls projection singular");
    ComplexMatrix lift = bottom * f.v * f.s.cwiseInverse().cast<Complex>().asDiagonal();
    return finish(f.u, std::move(lift), method, dt);
}

inline void require_same_shape(const ComplexMatrix& y0, const ComplexMatrix& y1, const char* what)
{
    numkit::require_finite(y0, what);
    numkit::require_finite(y1, what);
    if (y0.rows() != y1.rows() || y0.cols() != y1.cols())
        throw DimensionError(std::string(what) + ": y0 and y1 differ in shape");
}

} // namespace detail

struct DataPair {
    ComplexMatrix y0;
    ComplexMatrix y1;
};

/// (Y0, Y1) = (columns 0..m-2, columns 1..m-1).
inline DataPair build_pair(const SnapshotMatrix& y)
{
    y.validate();
    if (y.snapshots() < 2)
        throw ParameterError("insufficient snapshots");
    const Index m = y.snapshots();
    return {y.data.leftCols(m - 1), y.data.rightCols(m - 1)};
}

struct PastFuture {
    ComplexMatrix past;   // [Y0; Y1]
    ComplexMatrix future; // [Y2; Y3]
};

/// Stacks the shifted blocks Y_t = columns t..t+m-4 into past [Y0; Y1] and
/// future [Y2; Y3], each 2n x (m-3).
inline PastFuture build_past_future(const SnapshotMatrix& y)
{
    y.validate();
    if (y.snapshots() < 5)
        throw ParameterError("insufficient snapshots for quadruple");
    const Index n  = y.channels();
    const Index mp = y.snapshots() - 3;
    PastFuture out{ComplexMatrix(2 * n, mp), ComplexMatrix(2 * n, mp)};
    out.past.topRows(n)      = y.data.middleCols(0, mp);
    out.past.bottomRows(n)   = y.data.middleCols(1, mp);
    out.future.topRows(n)    = y.data.middleCols(2, mp);
    out.future.bottomRows(n) = y.data.middleCols(3, mp);
    return out;
}

/// Exact DMD through the (optionally truncated) POD of y0.
inline DmdOutcome standard_dmd(const ComplexMatrix& y0, const ComplexMatrix& y1,
                               std::optional<Index> rank = std::nullopt, double dt = 1.0)
{
    detail::require_same_shape(y0, y1, "standard_dmd");
    const auto pod = rank ? numkit::truncated_svd(y0, *rank) : numkit::compact_svd(y0);
    ComplexMatrix lift = y1 * pod.v * pod.s.cwiseInverse().cast<Complex>().asDiagonal();
    return detail::finish(pod.u, std::move(lift), Method::standard, dt);
}

/// Total-least-squares DMD: leading left singular vectors of [y0; y1] split
/// into top U11 and bottom U21, operator U21 * pinv(U11).
inline DmdOutcome tls_dmd(const ComplexMatrix& y0, const ComplexMatrix& y1,
                          std::optional<Index> rank = std::nullopt, double dt = 1.0)
{
    detail::require_same_shape(y0, y1, "tls_dmd");
    const Index n = y0.rows();
    if (rank && (*rank < 1 || *rank > n))
        throw ParameterError("tls_dmd: rank must lie in [1, n]");
    ComplexMatrix z(2 * n, y0.cols());
    z.topRows(n)    = y0;
    z.bottomRows(n) = y1;
    const auto f  = numkit::compact_svd(z);
    const Index r = rank ? *rank : std::min(n, f.rank());
    if (r > f.rank())
        throw NumericalError("tls projection singular");
    return detail::finish_stacked(f.u.topLeftCorner(n, r), f.u.bottomLeftCorner(n, r), Method::tls, dt, r);
}

/// Noise-corrected DMD with known observation-noise covariance q_cov:
/// A = H1 * pinv(H0 - Q), H0 = y0 y0^H / m, H1 = y1 y0^H / m.
inline DmdOutcome moment_corrected_dmd(const ComplexMatrix& y0, const ComplexMatrix& y1,
                                       const ComplexMatrix& q_cov, double dt = 1.0)
{
    detail::require_same_shape(y0, y1, "moment_corrected_dmd");
    numkit::require_square(q_cov, "moment_corrected_dmd");
    const Index n = y0.rows();
    if (q_cov.rows() != n)
        throw DimensionError("moment_corrected_dmd: q_cov must be n x n");
    if ((q_cov - q_cov.adjoint()).norm() > 1e-12 * std::max(1.0, q_cov.norm()))
        throw ParameterError("moment_corrected_dmd: q_cov is not Hermitian");

    const double m          = static_cast<double>(y0.cols());
    const ComplexMatrix h0  = y0 * y0.adjoint() / m;
    const ComplexMatrix h1  = y1 * y0.adjoint() / m;
    ComplexMatrix corrected = h0 - q_cov;
    corrected               = 0.5 * (corrected + corrected.adjoint()).eval();

    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(corrected, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-8 * h0.norm())
        throw NumericalError("noise covariance too large for data");

    ComplexMatrix op = h1 * numkit::pinv(corrected);
    return detail::finish(ComplexMatrix::Identity(n, n), std::move(op), Method::moment_corrected, dt);
}

/// Default subspace rank: the noise-free projection has rank n, so the SVD of
/// the projection is cut at min(n, numerical rank) unless a rank is given.
inline DmdOutcome subspace_dmd(const SnapshotMatrix& y, std::optional<Index> rank = std::nullopt)
{
    const auto pf = build_past_future(y);
    const Index n = y.channels();
    if (rank && *rank < 1)
        throw ParameterError("subspace_dmd: rank must be at least 1");

    if (rank && *rank > std::min(pf.future.rows(), pf.future.cols()))
        throw ParameterError("subspace_dmd: rank exceeds min(2n, m - 3)");

    const ComplexMatrix o = numkit::row_space_projection(pf.future, pf.past);
    const auto f          = numkit::compact_svd(o);
    const Index q         = rank ? std::min(*rank, f.rank()) : std::min(n, f.rank());

    const ComplexMatrix uq = f.u.leftCols(q);
    return detail::finish_stacked(uq.topRows(n), uq.bottomRows(n), Method::subspace, y.dt, std::nullopt);
}

/// Convenience dispatch on a snapshot matrix. `q_cov` is required for
/// moment-corrected DMD and ignored otherwise.
inline DmdOutcome decompose(const SnapshotMatrix& y, Method method, std::optional<Index> rank = std::nullopt,
                            const std::optional<ComplexMatrix>& q_cov = std::nullopt)
{
    switch (method) {
    case Method::subspace: return subspace_dmd(y, rank);
    case Method::standard: {
        const auto p = build_pair(y);
        return standard_dmd(p.y0, p.y1, rank, y.dt);
    }
    case Method::tls: {
        const auto p = build_pair(y);
        return tls_dmd(p.y0, p.y1, rank, y.dt);
    }
    case Method::moment_corrected: {
        if (!q_cov)
            throw ParameterError("nc requires the observation-noise covariance");
        if (rank)
            throw ParameterError("nc does not take a rank");
        const auto p = build_pair(y);
        return moment_corrected_dmd(p.y0, p.y1, *q_cov, y.dt);
    }
    }
    throw ParameterError("unknown method");
}

struct Amplitudes {
    ComplexVector values;
    double residual = 0.0; // || modes * values - y_init ||
};

/// Least-squares amplitudes a with modes * a ~= y_init.
inline Amplitudes amplitudes(const DmdOutcome& outcome, const ComplexVector& y_init)
{
    if (y_init.size() != outcome.modes.rows())
        throw DimensionError("amplitudes: y_init length differs from channel count");
    Eigen::ColPivHouseholderQR<ComplexMatrix> qr(outcome.modes.rows(), outcome.modes.cols());
    qr.setThreshold(1e-10);
    qr.compute(outcome.modes);
    if (qr.rank() < outcome.modes.cols())
        throw NumericalError("amplitudes not identifiable");
    Amplitudes out;
    out.values   = qr.solve(y_init);
    out.residual = (outcome.modes * out.values - y_init).norm();
    return out;
}

namespace detail {

inline Complex int_power(Complex base, Index exponent)
{
    Complex result(1.0, 0.0);
    while (exponent > 0) {
        if (exponent & 1)
            result *= base;
        base *= base;
        exponent >>= 1;
    }
    return result;
}

} // namespace detail

/// sum_i lambda_i^t amps_i w_i.
inline ComplexVector reconstruct(const DmdOutcome& outcome, const ComplexVector& amps, Index t)
{
    if (amps.size() != outcome.size())
        throw DimensionError("reconstruct: amplitude count differs from mode count");
    if (t < 0)
        throw ParameterError("reconstruct: negative time index");
    ComplexVector coeff(amps.size());
    for (Index i = 0; i < amps.size(); ++i)
        coeff[i] = detail::int_power(outcome.eigenvalues[i], t) * amps[i];
    return outcome.modes * coeff;
}

} // namespace koopman

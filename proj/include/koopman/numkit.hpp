#pragma once

/// \file numkit.hpp
/// Dense complex linear-algebra primitives shared by the decomposition,
/// simulation and statistics layers. Everything here is a pure function of
/// its arguments.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "koopman/errors.hpp"

namespace koopman {

using Complex       = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector    = Eigen::VectorXd;
using Index         = Eigen::Index;

namespace numkit {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();

inline void require_nonempty(const ComplexMatrix& m, const char* what)
{
    if (m.rows() < 1 || m.cols() < 1)
        throw DimensionError(std::string(what) + ": empty matrix");
}

inline void require_finite(const ComplexMatrix& m, const char* what)
{
    require_nonempty(m, what);
    if (!m.allFinite())
        throw ParameterError(std::string(what) + ": non-finite entries");
}

inline void require_square(const ComplexMatrix& m, const char* what)
{
    require_finite(m, what);
    if (m.rows() != m.cols())
        throw DimensionError(std::string(what) + ": matrix must be square");
}

/// Thin singular factors m = u * diag(s) * v^H with k = s.size() retained triplets.
struct SvdFactors {
    ComplexMatrix u; // rows x k, orthonormal columns
    RealVector s;    // length k, nonincreasing, s[k-1] > 0
    ComplexMatrix v; // cols x k, orthonormal columns

    Index rank() const { return s.size(); }

    ComplexMatrix reconstruct() const { return u * s.cast<Complex>().asDiagonal() * v.adjoint(); }
};

namespace detail {

struct FullSvd {
    ComplexMatrix u;
    RealVector s;
    ComplexMatrix v;
};

inline FullSvd thin_svd(const ComplexMatrix& m)
{
    // Jacobi with a column-pivoting QR preconditioner: the QR step reduces
    // long snapshot matrices to a square core first.
    Eigen::JacobiSVD<ComplexMatrix, Eigen::ColPivHouseholderQRPreconditioner> svd(
        m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

inline double default_rank_tol(const ComplexMatrix& m, double s_max)
{
    return static_cast<double>(std::max(m.rows(), m.cols())) * kEps * s_max;
}

inline SvdFactors keep_leading(const FullSvd& full, Index k)
{
    return {full.u.leftCols(k), full.s.head(k), full.v.leftCols(k)};
}

inline Index count_above(const RealVector& s, double tol)
{
    Index k = 0;
    while (k < s.size() && s[k] > tol)
        ++k;
    return k;
}

} // namespace detail

/// Compact SVD keeping every singular value above `rank_tol`
/// (default max(rows, cols) * eps * s_max).
inline SvdFactors compact_svd(const ComplexMatrix& m, std::optional<double> rank_tol = std::nullopt)
{
    require_finite(m, "compact_svd");
    if (rank_tol && *rank_tol < 0.0)
        throw ParameterError("compact_svd: rank tolerance must be nonnegative");
    auto full = detail::thin_svd(m);
    const double s_max = full.s.size() > 0 ? full.s[0] : 0.0;
    if (!(s_max > 0.0))
        throw NumericalError("rank zero");
    const double tol = rank_tol ? *rank_tol : detail::default_rank_tol(m, s_max);
    const Index k = detail::count_above(full.s, tol);
    if (k == 0)
        throw NumericalError("rank zero");
    return detail::keep_leading(full, k);
}

/// Keeps min(rank, numerical rank) leading singular triplets.
inline SvdFactors truncated_svd(const ComplexMatrix& m, Index rank)
{
    require_finite(m, "truncated_svd");
    if (rank < 1 || rank > std::min(m.rows(), m.cols()))
        throw ParameterError("truncated_svd: rank must lie in [1, min(rows, cols)]");
    auto full = detail::thin_svd(m);
    const double s_max = full.s[0];
    if (!(s_max > 0.0))
        throw NumericalError("rank zero");
    const Index numerical = detail::count_above(full.s, detail::default_rank_tol(m, s_max));
    return detail::keep_leading(full, std::min(rank, numerical));
}

/// Moore-Penrose pseudoinverse. A zero matrix maps to the zero matrix.
inline ComplexMatrix pinv(const ComplexMatrix& m, std::optional<double> rank_tol = std::nullopt)
{
    require_finite(m, "pinv");
    if (m.isZero(0.0))
        return ComplexMatrix::Zero(m.cols(), m.rows());
    const auto f = compact_svd(m, rank_tol);
    return f.v * f.s.cwiseInverse().cast<Complex>().asDiagonal() * f.u.adjoint();
}

/// Orthogonal projection of the rows of `f` onto the row space of `p`,
/// O = f * P, with P built from an orthonormal basis of the row space of p
/// (rank-revealing QR of p^H). Normal equations are never formed.
inline ComplexMatrix row_space_projection(const ComplexMatrix& f, const ComplexMatrix& p)
{
    require_finite(f, "row_space_projection");
    require_finite(p, "row_space_projection");
    if (f.cols() != p.cols())
        throw DimensionError("row_space_projection: column counts differ");

    const ComplexMatrix pt = p.adjoint();
    Eigen::ColPivHouseholderQR<ComplexMatrix> qr(pt.rows(), pt.cols());
    qr.setThreshold(static_cast<double>(std::max(pt.rows(), pt.cols())) * kEps);
    qr.compute(pt);
    const Index r = qr.rank();
    if (r == 0)
        return ComplexMatrix::Zero(f.rows(), f.cols());

    // O^H = Q_r Q_r^H f^H, applied through the Householder reflectors.
    const auto q = qr.householderQ();
    ComplexMatrix coeffs = q.adjoint() * f.adjoint();
    coeffs.bottomRows(coeffs.rows() - r).setZero();
    ComplexMatrix projected = q * coeffs;
    return projected.adjoint();
}

struct EigenDecomposition {
    ComplexVector values;
    ComplexMatrix right; // unit-norm columns w_i
    ComplexMatrix left;  // z_i with z_i^H w_i = 1 when the spectrum is simple
    bool simple_spectrum = true;
};

/// Spectral decomposition with right and left eigenvectors.
///
/// For a simple spectrum the left vectors are the rows of W^{-1}, so that
/// z_i^H w_j = delta_ij. When two eigenvalues coincide (within 1e-6 of the
/// matrix scale) the biorthogonal scaling is skipped: left vectors are unit-norm
/// eigenvectors of a^H and `simple_spectrum` is false.
inline EigenDecomposition eig(const ComplexMatrix& a)
{
    require_square(a, "eig");
    Eigen::ComplexEigenSolver<ComplexMatrix> solver(a, true);
    if (solver.info() != Eigen::Success)
        throw NumericalError("eig: eigensolver did not converge");

    EigenDecomposition out;
    out.values = solver.eigenvalues();
    out.right  = solver.eigenvectors();
    for (Index i = 0; i < out.right.cols(); ++i) {
        const double nrm = out.right.col(i).norm();
        if (nrm > 0.0)
            out.right.col(i) /= nrm;
    }

    const Index n      = a.rows();
    const double scale = std::max(a.norm(), std::numeric_limits<double>::min());
    for (Index i = 0; i < n && out.simple_spectrum; ++i)
        for (Index j = i + 1; j < n; ++j)
            if (std::abs(out.values[i] - out.values[j]) <= 1e-6 * scale) {
                out.simple_spectrum = false;
                break;
            }

    if (out.simple_spectrum) {
        Eigen::PartialPivLU<ComplexMatrix> lu(out.right);
        out.left = lu.inverse().adjoint();
        return out;
    }

    Eigen::ComplexEigenSolver<ComplexMatrix> adj(a.adjoint(), true);
    if (adj.info() != Eigen::Success)
        throw NumericalError("eig: eigensolver did not converge");
    out.left = ComplexMatrix(n, n);
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (Index i = 0; i < n; ++i) {
        Index best       = -1;
        double best_dist = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < n; ++j) {
            if (used[static_cast<std::size_t>(j)])
                continue;
            const double d = std::abs(std::conj(adj.eigenvalues()[j]) - out.values[i]);
            if (d < best_dist) {
                best_dist = d;
                best      = j;
            }
        }
        used[static_cast<std::size_t>(best)] = true;
        out.left.col(i) = adj.eigenvectors().col(best).normalized();
    }
    return out;
}

inline double spectral_radius(const ComplexMatrix& a)
{
    require_square(a, "spectral_radius");
    Eigen::ComplexEigenSolver<ComplexMatrix> solver(a, false);
    if (solver.info() != Eigen::Success)
        throw NumericalError("spectral_radius: eigensolver did not converge");
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

/// Stationary covariance G = a G a^H + p_cov of x_{t+1} = a x_t + e_t,
/// Cov(e) = p_cov. Uses Smith's doubling iteration.
inline ComplexMatrix lyapunov_stationary_cov(const ComplexMatrix& a, const ComplexMatrix& p_cov)
{
    require_square(a, "lyapunov_stationary_cov");
    require_square(p_cov, "lyapunov_stationary_cov");
    if (a.rows() != p_cov.rows())
        throw DimensionError("lyapunov_stationary_cov: a and p_cov differ in size");
    const double p_scale = std::max(p_cov.norm(), 1.0);
    if ((p_cov - p_cov.adjoint()).norm() > 1e-12 * p_scale)
        throw ParameterError("lyapunov_stationary_cov: p_cov is not Hermitian");
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> psd(p_cov, Eigen::EigenvaluesOnly);
    if (psd.eigenvalues().minCoeff() < -1e-12 * p_scale)
        throw ParameterError("lyapunov_stationary_cov: p_cov is not positive semidefinite");
    if (spectral_radius(a) >= 1.0)
        throw NumericalError("unstable system, no stationary covariance");

    ComplexMatrix g     = p_cov;
    ComplexMatrix power = a;
    for (int iter = 0; iter < 200; ++iter) {
        const ComplexMatrix term = power * g * power.adjoint();
        g += term;
        power = power * power;
        if (term.norm() <= kEps * g.norm() || power.norm() == 0.0)
            break;
    }
    g = 0.5 * (g + g.adjoint()).eval();

    const ComplexMatrix residual = g - a * g * a.adjoint() - p_cov;
    if (residual.norm() > 1e-10 * std::max(g.norm(), 1.0))
        throw NumericalError("lyapunov_stationary_cov: fixed point did not converge");
    return g;
}

} // namespace numkit
} // namespace koopman

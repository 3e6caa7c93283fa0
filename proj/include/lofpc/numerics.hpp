#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "lofpc/error.hpp"

namespace lofpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Eigenvalues at or below this are treated as exact zeros.
inline double eig_cutoff(Index dim, double lambda_max) {
  return static_cast<double>(dim) * std::numeric_limits<double>::epsilon() *
         std::max(lambda_max, 0.0);
}

/// Rank floor, relative to the known spectral scale, for matrices assembled
/// from another pseudoinverse. Their zero eigenvalues carry roundoff well
/// above dim·ε·λmax, and an all-zero matrix has no λmax to be relative to.
inline constexpr double kAssembledRankTol = 1e-9;

/// Spectral form of a symmetric matrix, eigenvalues in descending order.
struct SpectralForm {
  Vector eigenvalues;
  Matrix eigenvectors;  // columns; empty when computed values-only
  Index rank = 0;
  double cutoff = 0.0;

  /// The `rank` leading eigenvalues.
  Vector nonzero() const { return eigenvalues.head(rank); }
  bool has_vectors() const { return eigenvectors.size() > 0; }
};

inline bool is_symmetric(const Matrix& a, double rel_tol = 1e-10) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

/// `abs_floor` raises the cutoff to at least that value.
inline SpectralForm sym_eig(const Matrix& a, bool with_vectors = true, double abs_floor = 0.0) {
  if (!is_symmetric(a)) throw Error(Errc::NotSymmetric, "sym_eig: matrix is not symmetric");
  SpectralForm out;
  const Index n = a.rows();
  if (n == 0) return out;
  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(
      sym, with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  // Eigen sorts ascending; flip to descending.
  out.eigenvalues = es.eigenvalues().reverse();
  if (with_vectors) out.eigenvectors = es.eigenvectors().rowwise().reverse();
  out.cutoff = std::max(eig_cutoff(n, out.eigenvalues(0)), abs_floor);
  out.rank = 0;
  while (out.rank < n && out.eigenvalues(out.rank) > out.cutoff) ++out.rank;
  return out;
}

/// Moore-Penrose inverse from a spectral form with vectors.
inline Matrix pinv(const SpectralForm& sf) {
  const Index r = sf.rank;
  const Matrix o = sf.eigenvectors.leftCols(r);
  return o * sf.eigenvalues.head(r).cwiseInverse().asDiagonal() * o.transpose();
}

/// Moore-Penrose inverse. Symmetric input goes through the eigendecomposition
/// with the shared cutoff; anything else through an SVD with the same rule.
inline Matrix pinv(const Matrix& a) {
  if (is_symmetric(a)) return pinv(sym_eig(a));
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double tau = s.size() ? eig_cutoff(std::max(a.rows(), a.cols()), s(0)) : 0.0;
  Vector inv = Vector::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > tau) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

namespace detail {
inline void check_psd(const SpectralForm& sf) {
  if (sf.eigenvalues.size() == 0) return;
  const double lmax = std::max(sf.eigenvalues(0), 0.0);
  const double lmin = sf.eigenvalues(sf.eigenvalues.size() - 1);
  if (lmin < -1e-8 * std::max(lmax, 1e-300))
    throw Error(Errc::NotPSD, "matrix has eigenvalue " + std::to_string(lmin));
}
}  // namespace detail

/// Symmetric PSD square root.
inline Matrix psd_sqrt(const Matrix& a) {
  const SpectralForm sf = sym_eig(a);
  detail::check_psd(sf);
  const Index r = sf.rank;
  const Matrix o = sf.eigenvectors.leftCols(r);
  return o * sf.eigenvalues.head(r).cwiseSqrt().asDiagonal() * o.transpose();
}

/// (A⁺)^{1/2} for symmetric PSD A.
inline Matrix psd_pinv_sqrt(const Matrix& a) {
  const SpectralForm sf = sym_eig(a);
  detail::check_psd(sf);
  const Index r = sf.rank;
  const Matrix o = sf.eigenvectors.leftCols(r);
  return o * sf.eigenvalues.head(r).cwiseSqrt().cwiseInverse().asDiagonal() * o.transpose();
}

inline double quad_form(const Vector& x, const Matrix& a) { return x.dot(a * x); }

inline double binom2(long k) { return 0.5 * static_cast<double>(k) * static_cast<double>(k - 1); }

}  // namespace lofpc

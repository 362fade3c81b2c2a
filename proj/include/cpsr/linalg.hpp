#pragma once

#include <Eigen/Dense>

namespace cpsr {

// Row-major dense types used throughout the library.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

// A truncated SVD: u (n x r), s (r, descending), v (m x r), with
// u diag(s) v^T approximating the decomposed matrix.
struct SvdFactors {
  Mat u;
  Vec s;
  Mat v;

  int rank() const { return static_cast<int>(s.size()); }
};

// Thin SVD keeping at most rank_limit triplets. Triplets whose singular value
// falls below sv_tol, or below numerical noise relative to the largest value,
// are dropped. Both truncation rules apply to the values of the matrix as
// given (callers scale beforehand when they want scaled thresholds).
SvdFactors thin_svd(const Mat& a, int rank_limit, double sv_tol);

// x -> V diag(1/s) U^T x, the least-norm solve through retained triplets.
Vec pinv_apply(const SvdFactors& f, const Vec& x);

// Factors of (U diag(s) V^T + delta), re-truncated with the same rules as
// thin_svd. The update expands the factor bases with the part of delta lying
// outside them, re-diagonalizes a small core matrix, truncates, and then
// re-orthonormalizes U and V to arrest drift across repeated updates.
SvdFactors incremental_svd_update(const SvdFactors& f, const Mat& delta,
                                  int rank_limit, double sv_tol);

}  // namespace cpsr

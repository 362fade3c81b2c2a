#include "cpsr/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cpsr/errors.hpp"

namespace cpsr {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void check_decomposable(const Mat& a) {
  if (a.size() == 0) throw NumericalError("cannot decompose an empty matrix");
  if (!a.allFinite()) throw NumericalError("matrix contains non-finite entries");
}

void check_truncation_params(int rank_limit, double sv_tol) {
  if (rank_limit < 1) throw UsageError("rank limit must be at least 1");
  if (!(sv_tol >= 0.0)) throw UsageError("singular value tolerance must be >= 0");
}

// Values at or below max(dim) * eps * s_max are indistinguishable from zero.
double noise_floor(const Vec& s, Eigen::Index rows, Eigen::Index cols) {
  if (s.size() == 0) return 0.0;
  return static_cast<double>(std::max(rows, cols)) * kEps * s(0);
}

SvdFactors truncate(const Mat& u, const Vec& s, const Mat& v, int rank_limit,
                    double sv_tol, Eigen::Index rows, Eigen::Index cols) {
  const double floor = noise_floor(s, rows, cols);
  int r = 0;
  while (r < s.size() && r < rank_limit && s(r) >= sv_tol && s(r) > floor) ++r;
  SvdFactors f;
  f.u = u.leftCols(r);
  f.s = s.head(r);
  f.v = v.leftCols(r);
  return f;
}

// One modified Gram-Schmidt sweep with re-orthogonalization; the columns are
// already near-orthonormal, so this only arrests rounding drift.
void orthonormalize_columns(Mat& q) {
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i < j; ++i) {
        q.col(j) -= q.col(i).dot(q.col(j)) * q.col(i);
      }
    }
    const double norm = q.col(j).norm();
    if (norm > 0.0) q.col(j) /= norm;
  }
}

// Thin Q factor and the rank-revealed rows of R (with the column permutation
// applied back), so that input ~= q * r_eff.
struct ThinQr {
  Mat q;      // n x k
  Mat r_eff;  // k x c
  int k = 0;
};

ThinQr rank_revealing_qr(const Mat& p) {
  const Eigen::Index n = p.rows();
  const Eigen::Index c = p.cols();
  Eigen::ColPivHouseholderQR<Mat> qr(p);
  Mat r_full = qr.matrixR().topLeftCorner(std::min(n, c), c);
  for (Eigen::Index i = 1; i < r_full.rows(); ++i) {
    r_full.row(i).head(std::min(i, r_full.cols())).setZero();
  }
  int k = 0;
  if (r_full.rows() > 0) {
    const double r00 = std::abs(r_full(0, 0));
    const double tol = static_cast<double>(std::max(n, c)) * kEps * r00;
    while (k < std::min(n, c) && std::abs(r_full(k, k)) > tol) ++k;
  }
  ThinQr out;
  out.k = k;
  out.q = qr.householderQ() * Mat::Identity(n, k);
  out.r_eff = r_full.topRows(k) * qr.colsPermutation().transpose();
  return out;
}

}  // namespace

SvdFactors thin_svd(const Mat& a, int rank_limit, double sv_tol) {
  check_decomposable(a);
  check_truncation_params(rank_limit, sv_tol);
  Eigen::BDCSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return truncate(svd.matrixU(), svd.singularValues(), svd.matrixV(), rank_limit,
                  sv_tol, a.rows(), a.cols());
}

Vec pinv_apply(const SvdFactors& f, const Vec& x) {
  if (x.size() != f.u.rows()) {
    throw UsageError("pinv_apply: vector length does not match factor rows");
  }
  if (f.rank() == 0) return Vec::Zero(f.v.rows());
  return f.v * (f.u.transpose() * x).cwiseQuotient(f.s);
}

SvdFactors incremental_svd_update(const SvdFactors& f, const Mat& delta,
                                  int rank_limit, double sv_tol) {
  check_decomposable(delta);
  check_truncation_params(rank_limit, sv_tol);
  if (f.u.rows() != delta.rows() || f.v.rows() != delta.cols()) {
    throw UsageError("incremental_svd_update: delta shape does not match factors");
  }
  if (f.u.cols() != f.s.size() || f.v.cols() != f.s.size()) {
    throw UsageError("incremental_svd_update: inconsistent factor shapes");
  }
  if (f.rank() == 0) return thin_svd(delta, rank_limit, sv_tol);
  if (delta.isZero(0.0)) return f;

  // Compact the additive term; noise-level directions are discarded up front.
  const Eigen::Index min_dim = std::min(delta.rows(), delta.cols());
  const SvdFactors d = thin_svd(delta, static_cast<int>(min_dim), 0.0);
  if (d.rank() == 0) return f;
  const Mat x = d.u * d.s.asDiagonal();
  const Mat& y = d.v;

  const int r = f.rank();
  const Mat m = f.u.transpose() * x;
  const ThinQr left = rank_revealing_qr(Mat(x - f.u * m));
  const Mat nn = f.v.transpose() * y;
  const ThinQr right = rank_revealing_qr(Mat(y - f.v * nn));

  // Core matrix in the expanded bases: diag(s) padded, plus the update.
  Mat k = Mat::Zero(r + left.k, r + right.k);
  k.topLeftCorner(r, r).diagonal() = f.s;
  Mat a(r + left.k, d.rank());
  a.topRows(r) = m;
  a.bottomRows(left.k) = left.r_eff;
  Mat b(r + right.k, d.rank());
  b.topRows(r) = nn;
  b.bottomRows(right.k) = right.r_eff;
  k += a * b.transpose();

  // Re-diagonalize, then truncate.
  const SvdFactors ks = thin_svd(k, rank_limit, sv_tol);

  SvdFactors out;
  out.s = ks.s;
  Mat u_basis(f.u.rows(), r + left.k);
  u_basis.leftCols(r) = f.u;
  u_basis.rightCols(left.k) = left.q;
  out.u = u_basis * ks.u;
  Mat v_basis(f.v.rows(), r + right.k);
  v_basis.leftCols(r) = f.v;
  v_basis.rightCols(right.k) = right.q;
  out.v = v_basis * ks.v;
  orthonormalize_columns(out.u);
  orthonormalize_columns(out.v);
  return out;
}

}  // namespace cpsr

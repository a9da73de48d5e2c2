#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#ifndef QINFLATE_NO_LAPACKE
#include <lapacke.h>
#endif

namespace qinflate {

/// Full symmetric eigendecomposition of a column-major n×n matrix.
/// On return `a` holds the eigenvectors (columns) and `w` the ascending
/// eigenvalues.
inline void symmetric_eig(int n, double* a, double* w) {
#ifndef QINFLATE_NO_LAPACKE
  lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, a, n, w);
  if (info == 0) return;
  // fall through to Eigen on LAPACK failure
#endif
  Eigen::Map<Eigen::MatrixXd> A(a, n, n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  Eigen::Map<Eigen::VectorXd>(w, n) = es.eigenvalues();
  A = es.eigenvectors();
}

inline double min_eigenvalue(int n, std::vector<double> a) {
  std::vector<double> w(static_cast<size_t>(n));
  symmetric_eig(n, a.data(), w.data());
  return w[0];
}

/// In-place projection of a symmetric matrix (dense, col-major) onto the
/// PSD cone. Reconstructs from whichever sign class has fewer eigenvalues.
class PsdProjector {
 public:
  explicit PsdProjector(int n) : n_(n), work_(static_cast<size_t>(n) * n), w_(static_cast<size_t>(n)) {}

  void project(std::vector<double>& m) {
    const int n = n_;
    Eigen::Map<Eigen::MatrixXd> M(m.data(), n, n);
    Eigen::Map<Eigen::MatrixXd> Q(work_.data(), n, n);
    // symmetrize, then decompose
    Q = 0.5 * (M + M.transpose());
    symmetric_eig(n, work_.data(), w_.data());
    int first_pos = 0;
    while (first_pos < n && w_[static_cast<size_t>(first_pos)] <= 0.0) ++first_pos;
    const int npos = n - first_pos;
    if (npos == 0) {
      M.setZero();
      return;
    }
    if (npos == n) {
      // already PSD up to symmetrization
      M = Q * Eigen::Map<Eigen::VectorXd>(w_.data(), n).asDiagonal() * Q.transpose();
      return;
    }
    if (npos <= first_pos) {
      auto Qp = Q.rightCols(npos);
      Eigen::VectorXd lp = Eigen::Map<Eigen::VectorXd>(w_.data(), n).tail(npos);
      M.noalias() = Qp * lp.asDiagonal() * Qp.transpose();
    } else {
      auto Qn = Q.leftCols(first_pos);
      Eigen::VectorXd ln = Eigen::Map<Eigen::VectorXd>(w_.data(), n).head(first_pos);
      Eigen::MatrixXd sym = 0.5 * (M + M.transpose());
      M.noalias() = sym - Qn * ln.asDiagonal() * Qn.transpose();
    }
  }

 private:
  int n_;
  std::vector<double> work_;
  std::vector<double> w_;
};

}  // namespace qinflate

#pragma once

// Matrix exponential by Taylor series with scaling and squaring. Slot
// generators here are ~2-3% dense (Kronecker sums of few-band operators), so
// the series phase multiplies by the sparse matrix from the right, column by
// column; only the squaring chain runs as dense products.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>

#include "hoc/hilbert.hpp"

namespace hoc {

using SpMat = Eigen::SparseMatrix<cplx>;

namespace detail {

inline double norm1(const Mat& a) { return a.cwiseAbs().colwise().sum().maxCoeff(); }

inline double norm1(const SpMat& a) {
  Eigen::VectorXd colsum = Eigen::VectorXd::Zero(a.cols());
  for (int k = 0; k < a.outerSize(); ++k)
    for (SpMat::InnerIterator it(a, k); it; ++it) colsum(it.col()) += std::abs(it.value());
  return colsum.size() ? colsum.maxCoeff() : 0.0;
}

/// Series phase on planar (split re/im) storage: each nonzero of the sparse
/// factor turns into four contiguous real AXPYs over a column.
inline Mat expm_taylor_ss(const SpMat& a, double norm, int n) {
  constexpr double theta = 1.0;
  const int s = norm <= theta ? 0 : int(std::ceil(std::log2(norm / theta)));
  const double scale = std::ldexp(1.0, -s);
  using RMat = Eigen::MatrixXd;
  RMat tot_r = RMat::Identity(n, n), tot_i = RMat::Zero(n, n);
  RMat term_r = tot_r, term_i = tot_i;
  RMat next_r(n, n), next_i(n, n);
  for (int k = 1; k <= 48; ++k) {
    next_r.setZero();
    next_i.setZero();
    const double alpha = scale / double(k);
    for (int j = 0; j < a.outerSize(); ++j) {
      double* nr = next_r.col(j).data();
      double* ni = next_i.col(j).data();
      for (SpMat::InnerIterator it(a, j); it; ++it) {
        const double vr = alpha * it.value().real();
        const double vi = alpha * it.value().imag();
        const double* tr = term_r.col(it.row()).data();
        const double* ti = term_i.col(it.row()).data();
        for (int i = 0; i < n; ++i) {
          nr[i] += vr * tr[i] - vi * ti[i];
          ni[i] += vr * ti[i] + vi * tr[i];
        }
      }
    }
    term_r.swap(next_r);
    term_i.swap(next_i);
    tot_r += term_r;
    tot_i += term_i;
    const double tmax = term_r.cwiseAbs().maxCoeff() + term_i.cwiseAbs().maxCoeff();
    const double smax = tot_r.cwiseAbs().maxCoeff() + tot_i.cwiseAbs().maxCoeff();
    if (tmax <= 1e-17 * smax) break;
  }
  Mat total(n, n);
  total.real() = tot_r;
  total.imag() = tot_i;
  Mat buf(n, n);
  for (int i = 0; i < s; ++i) {
    buf.noalias() = total * total;
    total.swap(buf);
  }
  return total;
}

inline Mat expm_taylor_ss(const Mat& a, double norm, int n) {
  constexpr double theta = 1.0;
  const int s = norm <= theta ? 0 : int(std::ceil(std::log2(norm / theta)));
  const double scale = std::ldexp(1.0, -s);
  Mat total = Mat::Identity(n, n);
  Mat term = Mat::Identity(n, n);
  Mat next(n, n);
  for (int k = 1; k <= 48; ++k) {
    next.noalias() = term * a;
    term.swap(next);
    term *= scale / double(k);
    total += term;
    if (term.cwiseAbs().maxCoeff() <= 1e-17 * total.cwiseAbs().maxCoeff()) break;
  }
  for (int i = 0; i < s; ++i) {
    next.noalias() = total * total;
    total.swap(next);
  }
  return total;
}

}  // namespace detail

/// exp(A) for a dense matrix; switches to sparse products when A is sparse.
inline Mat expm(const Mat& a) {
  const int n = int(a.rows());
  const double norm = detail::norm1(a);
  if (!(norm > 0)) return Mat::Identity(n, n);
  int nnz = 0;
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < n; ++r)
      if (a(r, c) != cplx(0, 0)) ++nnz;
  if (nnz < n * n / 8) {
    SpMat sp = a.sparseView();
    sp.makeCompressed();
    return detail::expm_taylor_ss(sp, norm, n);
  }
  return detail::expm_taylor_ss(a, norm, n);
}

/// exp(A) with A already sparse.
inline Mat expm(const SpMat& a) {
  const int n = int(a.rows());
  const double norm = detail::norm1(a);
  if (!(norm > 0)) return Mat::Identity(n, n);
  return detail::expm_taylor_ss(a, norm, n);
}

}  // namespace hoc

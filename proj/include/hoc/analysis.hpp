#pragma once

// State-quality metrics: partial trace, fidelity, Wigner function on a phase
// space grid, CV-mana and logarithmic negativity.

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "hoc/hilbert.hpp"

namespace hoc {

struct grid_too_small : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Reduced density operator on the kept subsystems, factor ordering preserved.
inline Mat partial_trace(const Mat& rho, const SpaceSpec& space, std::vector<Subsystem> keep) {
  if (keep.empty()) throw std::invalid_argument("partial_trace: keep set must be nonempty");
  std::array<bool, 3> keep_mask{false, false, false};
  for (Subsystem s : keep) keep_mask[int(s)] = true;
  const std::array<int, 3> dims{space.atom_dim, space.cavity_dim, space.osc_dim};
  int dkeep = 1;
  for (int f = 0; f < 3; ++f)
    if (keep_mask[f]) dkeep *= dims[f];
  auto reduced_index = [&](int ia, int ic, int io) {
    int idx = 0;
    const std::array<int, 3> v{ia, ic, io};
    for (int f = 0; f < 3; ++f)
      if (keep_mask[f]) idx = idx * dims[f] + v[f];
    return idx;
  };
  Mat out = Mat::Zero(dkeep, dkeep);
  for (int ia = 0; ia < dims[0]; ++ia)
    for (int ic = 0; ic < dims[1]; ++ic)
      for (int io = 0; io < dims[2]; ++io)
        for (int ja = 0; ja < dims[0]; ++ja)
          for (int jc = 0; jc < dims[1]; ++jc)
            for (int jo = 0; jo < dims[2]; ++jo) {
              // traced factors must match
              if (!keep_mask[0] && ia != ja) continue;
              if (!keep_mask[1] && ic != jc) continue;
              if (!keep_mask[2] && io != jo) continue;
              out(reduced_index(ia, ic, io), reduced_index(ja, jc, jo)) +=
                  rho(space.index(ia, ic, io), space.index(ja, jc, jo));
            }
  return out;
}

/// Lift an operator on the kept subsystems back to the full space (identity on
/// the traced factors); adjoint of partial_trace.
inline Mat lift_operator(const Mat& op, const SpaceSpec& space, std::vector<Subsystem> keep) {
  std::array<bool, 3> keep_mask{false, false, false};
  for (Subsystem s : keep) keep_mask[int(s)] = true;
  const std::array<int, 3> dims{space.atom_dim, space.cavity_dim, space.osc_dim};
  auto reduced_index = [&](int ia, int ic, int io) {
    int idx = 0;
    const std::array<int, 3> v{ia, ic, io};
    for (int f = 0; f < 3; ++f)
      if (keep_mask[f]) idx = idx * dims[f] + v[f];
    return idx;
  };
  const int n = space.total();
  Mat out = Mat::Zero(n, n);
  for (int ia = 0; ia < dims[0]; ++ia)
    for (int ic = 0; ic < dims[1]; ++ic)
      for (int io = 0; io < dims[2]; ++io)
        for (int ja = 0; ja < dims[0]; ++ja)
          for (int jc = 0; jc < dims[1]; ++jc)
            for (int jo = 0; jo < dims[2]; ++jo) {
              if (!keep_mask[0] && ia != ja) continue;
              if (!keep_mask[1] && ic != jc) continue;
              if (!keep_mask[2] && io != jo) continue;
              out(space.index(ia, ic, io), space.index(ja, jc, jo)) =
                  op(reduced_index(ia, ic, io), reduced_index(ja, jc, jo));
            }
  return out;
}

/// F(rho, |psi><psi|) = <psi| rho |psi>.
inline double fidelity(const Mat& rho, const Vec& psi) {
  if (rho.rows() != psi.size())
    throw std::invalid_argument("fidelity: state dimensions do not match");
  return (psi.adjoint() * rho * psi).value().real();
}

struct WignerGrid {
  double extent = 4.0;
  int n_points = 201;
  Eigen::VectorXd axis;      // shared x/p axis
  Eigen::MatrixXd values;    // values(i,j) = W(x_i + i p_j)
  double integral = 0.0;     // trapezoid of W
  double integral_abs = 0.0; // trapezoid of |W|
};

/// W(alpha) = (2/pi) tr[D(alpha) rho D^dag(alpha) Pi], Pi the parity operator,
/// D the displacement exp(alpha a^dag - conj(alpha) a). The state is padded
/// into a larger Fock truncation before displacing, sized so that displaced
/// states up to the grid corner stay inside the truncation.
inline WignerGrid wigner(const Mat& rho_osc, double extent = 4.0, int n_points = 201) {
  const int d = int(rho_osc.rows());
  const double corner = extent * std::sqrt(2.0);
  const int demb = std::max({10, d, int(std::ceil(corner * corner + 6.0 * corner + 8.0))});
  Mat rho = Mat::Zero(demb, demb);
  rho.topLeftCorner(d, d) = rho_osc;

  // D(alpha) = e^{i theta n} D(|alpha|) e^{-i theta n}; the radial displacement
  // exp(r (a^dag - a)) is evaluated through the eigenbasis of i(a^dag - a).
  const Mat a = annihilator(demb);
  Eigen::SelfAdjointEigenSolver<Mat> es(cplx(0, 1) * (a.adjoint() - a));
  const Mat& V = es.eigenvectors();
  const RVec k = es.eigenvalues();

  WignerGrid g;
  g.extent = extent;
  g.n_points = n_points;
  g.axis = Eigen::VectorXd::LinSpaced(n_points, -extent, extent);
  g.values.resize(n_points, n_points);

  Eigen::VectorXd parity(demb);
  for (int n = 0; n < demb; ++n) parity(n) = (n % 2 == 0) ? 1.0 : -1.0;

  // rank factorization: W = (2/pi) sum_s p_s sum_m parity_m |<m| D(alpha) v_s>|^2
  Eigen::SelfAdjointEigenSolver<Mat> rho_es(rho.topLeftCorner(d, d));
  std::vector<std::pair<double, Vec>> modes;
  for (int s = 0; s < d; ++s) {
    if (std::abs(rho_es.eigenvalues()(s)) < 1e-15) continue;
    Vec v = Vec::Zero(demb);
    v.head(d) = rho_es.eigenvectors().col(s);
    modes.emplace_back(rho_es.eigenvalues()(s), std::move(v));
  }

  std::map<double, Mat> radial;  // |alpha| -> D(|alpha|) = exp(|alpha| (a^dag - a))
  for (int i = 0; i < n_points; ++i) {
    for (int j = 0; j < n_points; ++j) {
      const double x = g.axis(i), p = g.axis(j);
      const double r = std::hypot(x, p), theta = std::atan2(p, x);
      auto it = radial.find(r);
      if (it == radial.end()) {
        Vec ph(demb);
        for (int m = 0; m < demb; ++m) ph(m) = std::exp(cplx(0, -r * k(m)));
        it = radial.emplace(r, (V * ph.asDiagonal() * V.adjoint()).eval()).first;
      }
      const Mat& D = it->second;
      double w = 0.0;
      for (const auto& [weight, v] : modes) {
        Vec vt(demb);
        for (int m = 0; m < demb; ++m) vt(m) = std::exp(cplx(0, -theta * m)) * v(m);
        const Vec dv = D * vt;
        double acc = 0;
        for (int m = 0; m < demb; ++m) acc += parity(m) * std::norm(dv(m));
        w += weight * acc;
      }
      g.values(i, j) = (2.0 / EIGEN_PI) * w;
    }
  }

  const double h = g.axis(1) - g.axis(0);
  auto trapezoid = [&](auto&& f) {
    double s = 0;
    for (int i = 0; i < n_points; ++i)
      for (int j = 0; j < n_points; ++j) {
        double w = 1.0;
        if (i == 0 || i == n_points - 1) w *= 0.5;
        if (j == 0 || j == n_points - 1) w *= 0.5;
        s += w * f(i, j);
      }
    return s * h * h;
  };
  g.integral = trapezoid([&](int i, int j) { return g.values(i, j); });
  g.integral_abs = trapezoid([&](int i, int j) { return std::abs(g.values(i, j)); });
  return g;
}

struct ManaResult {
  double raw;       // log of the |W| integral, unclamped
  double clamped;   // max(raw, 0)
  double integral_abs;
  double boundary_max;  // largest |W| on the outermost grid ring
};

/// CV-mana M = log int |W| d^2alpha (natural log, normalization int W = tr rho).
inline ManaResult cv_mana(const WignerGrid& g) {
  double boundary = 0.0;
  const int n = g.n_points;
  for (int i = 0; i < n; ++i) {
    boundary = std::max({boundary, std::abs(g.values(i, 0)), std::abs(g.values(i, n - 1)),
                         std::abs(g.values(0, i)), std::abs(g.values(n - 1, i))});
  }
  if (boundary >= 1e-8)
    throw grid_too_small("cv_mana: Wigner function has not decayed at the grid boundary");
  const double raw = std::log(g.integral_abs);
  return {raw, std::max(raw, 0.0), g.integral_abs, boundary};
}

inline ManaResult cv_mana(const Mat& rho_osc, double extent = 4.0, int n_points = 201) {
  return cv_mana(wigner(rho_osc, extent, n_points));
}

/// L = log2 of the trace norm of the partial transpose (transpose on the
/// second factor of a dA x dB bipartite state).
inline double log_negativity(const Mat& rho, int dim_a, int dim_b) {
  if (rho.rows() != dim_a * dim_b)
    throw std::invalid_argument("log_negativity: split does not match the state dimension");
  Mat pt(rho.rows(), rho.cols());
  for (int a = 0; a < dim_a; ++a)
    for (int b = 0; b < dim_b; ++b)
      for (int a2 = 0; a2 < dim_a; ++a2)
        for (int b2 = 0; b2 < dim_b; ++b2)
          pt(a * dim_b + b2, a2 * dim_b + b) = rho(a * dim_b + b, a2 * dim_b + b2);
  // partial transpose of a Hermitian matrix is Hermitian; trace norm from its spectrum
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (pt + pt.adjoint()), Eigen::EigenvaluesOnly);
  return std::log2(es.eigenvalues().cwiseAbs().sum());
}

}  // namespace hoc

#pragma once

// Drift/control Hamiltonians, Lindblad operators, and their superoperator
// (column-stacked) representations with matrix-exponential propagators.
//
// Superoperator conventions: vec stacks columns, the Hamiltonian commutator
// becomes H_hat = 1 (x) H - H^T (x) 1 and the dissipator
// Gamma_hat = sum_k Vbar (x) V - 1/2 (1 (x) V^dag V + V^T Vbar (x) 1),
// so that vec(rho_dot) = (-i H_hat + Gamma_hat) vec(rho).

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <vector>

#include "hoc/expm.hpp"
#include "hoc/hilbert.hpp"
#include "hoc/model.hpp"

namespace hoc {

struct normality_violation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HamiltonianSet {
  Mat drift;                   // Eq.-of-motion drift, angular units (1/us)
  std::array<Mat, 3> controls; // per-MHz generators: detuning, atomX, atomY
  SpaceSpec space;
};

struct LindbladSet {
  std::vector<Mat> ops;  // sqrt(rate) * jump operator, rate in 1/us
  SpaceSpec space;
};

/// Simulation-frame drift and control Hamiltonians.
/// The constant part of the atom frequency is pinned to the drive (wa0 = wr),
/// so u_detuning carries the whole atom-drive detuning.
inline HamiltonianSet build_hamiltonians(const PhysicalParams& p, const FrameParams& f,
                                         const SpaceSpec& space) {
  const Mat sm = embed(annihilator(2), Subsystem::atom, space);
  const Mat a = embed(annihilator(space.cavity_dim), Subsystem::cavity, space);
  const Mat b = embed(annihilator(space.osc_dim), Subsystem::oscillator, space);
  const Mat sp = sm.adjoint();

  HamiltonianSet h;
  h.space = space;
  const double mode_detuning = f.wc_prime - f.wr();  // = -delta_R' = +500 MHz
  h.drift = two_pi * (mode_detuning * (a.adjoint() * a + b.adjoint() * b)
                      - p.g_co * p.s * (a * b.adjoint() + b * a.adjoint())
                      + p.g_ac * (a * sp + a.adjoint() * sm));
  h.controls[0] = two_pi * (sp * sm);
  h.controls[1] = (two_pi / 2.0) * (sp + sm);
  h.controls[2] = (two_pi / 2.0) * cplx(0, -1) * (sp - sm);
  return h;
}

/// Jump operators of the transformed master equation:
/// sqrt(kappa) a, sqrt(gamma') b, sqrt(gamma' x) b^dag, sqrt(kappa_a) sigma-.
inline LindbladSet build_lindblads(const PhysicalParams& p, const SpaceSpec& space) {
  const ThermalParams th = thermal(p);
  const Mat sm = embed(annihilator(2), Subsystem::atom, space);
  const Mat a = embed(annihilator(space.cavity_dim), Subsystem::cavity, space);
  const Mat b = embed(annihilator(space.osc_dim), Subsystem::oscillator, space);
  LindbladSet l;
  l.space = space;
  l.ops = {std::sqrt(two_pi * p.kappa) * a,
           std::sqrt(two_pi * th.gamma_eff) * b,
           std::sqrt(two_pi * th.gamma_eff * th.x) * b.adjoint(),
           std::sqrt(two_pi * p.kappa_a) * sm};
  return l;
}

/// Hamiltonian governing the initial cooling period, written in the frame
/// co-rotating with the laser. With no atom control the frame choice wr = wl
/// makes every term static, so the cavity-oscillator interaction is kept in
/// full (a + a^dag)(b + b^dag) form rather than its co-rotating half.
/// `atom_detuning` is wa - wr in MHz (parked far below the drive).
inline Mat build_preparation_hamiltonian(const PhysicalParams& p, const FrameParams& f,
                                         const SpaceSpec& space, double atom_detuning) {
  const Mat sm = embed(annihilator(2), Subsystem::atom, space);
  const Mat a = embed(annihilator(space.cavity_dim), Subsystem::cavity, space);
  const Mat b = embed(annihilator(space.osc_dim), Subsystem::oscillator, space);
  const Mat sp = sm.adjoint();
  const double delta_a = atom_detuning + (f.delta_R_prime - f.delta_prime);  // wa - wl
  const Mat Q = a + a.adjoint();
  const Mat q = b + b.adjoint();
  return two_pi * (-f.delta_prime * a.adjoint() * a + p.Om * b.adjoint() * b
                   + delta_a * (sp * sm)
                   - p.g_co * p.s * (Q * q)
                   + p.g_ac * (a * sp + a.adjoint() * sm));
}

struct SuperOp {
  Mat mat;   // n^2 x n^2
  int dim;   // underlying Hilbert-space dimension n
};

/// H_hat = 1 (x) H - H^T (x) 1.
inline Mat hamiltonian_superop(const Mat& h) {
  const int n = int(h.rows());
  const Mat id = Mat::Identity(n, n);
  return kron(id, h) - kron(h.transpose(), id);
}

inline Vec vec_state(const Mat& rho) {
  return Eigen::Map<const Vec>(rho.data(), rho.size());
}

inline Mat unvec_state(const Vec& v, int n) {
  return Eigen::Map<const Mat>(v.data(), n, n);
}

/// Full generator L_hat = -i H_hat + Gamma_hat for Hermitian H.
inline SuperOp vectorize_liouvillian(const Mat& h_total, const std::vector<Mat>& jump_ops) {
  if (!is_hermitian(h_total, 1e-12))
    throw std::invalid_argument("vectorize_liouvillian: Hamiltonian is not Hermitian");
  const int n = int(h_total.rows());
  const Mat id = Mat::Identity(n, n);
  Mat L = cplx(0, -1) * hamiltonian_superop(h_total);
  for (const Mat& v : jump_ops) {
    const Mat vdv = v.adjoint() * v;
    L += kron(v.conjugate(), v) - 0.5 * kron(id, vdv) - 0.5 * kron(vdv.transpose(), id);
  }
  return {std::move(L), n};
}

inline SuperOp vectorize_liouvillian(const Mat& h_total, const LindbladSet& linds) {
  return vectorize_liouvillian(h_total, linds.ops);
}

/// F = exp(tau L), Taylor scaling-and-squaring.
inline SuperOp propagator(const SuperOp& L, double tau) {
  if (tau < 0) throw std::invalid_argument("propagator: tau must be nonnegative");
  return {expm(Mat(tau * L.mat)), L.dim};
}

/// One-sided finite-difference derivative of the propagator along control j:
/// (exp(tau (L - i delta H_j)) - exp(tau L)) / delta.
/// `f` optionally passes in a precomputed exp(tau L).
inline SuperOp propagator_derivative(const SuperOp& L, const Mat& h_super, double tau,
                                     double delta, const Mat* f = nullptr) {
  if (delta <= 0) throw std::invalid_argument("propagator_derivative: delta must be positive");
  if (tau < 0) throw std::invalid_argument("propagator_derivative: tau must be nonnegative");
  const Mat shifted = expm(Mat(tau * (L.mat - cplx(0, delta) * h_super)));
  if (f) return {(shifted - *f) / delta, L.dim};
  return {(shifted - expm(Mat(tau * L.mat))) / delta, L.dim};
}

/// Exact derivative for numerically normal L via its orthonormal eigenbasis:
/// matrix elements -<la| i H_j |lb> weighted by (e^{tau la}-e^{tau lb})/(la-lb),
/// degenerate pairs taking the tau e^{tau la} branch.
inline SuperOp propagator_derivative_spectral(const SuperOp& L, const Mat& h_super, double tau) {
  if (tau < 0) throw std::invalid_argument("propagator_derivative_spectral: tau negative");
  const Mat& A = L.mat;
  const double scale = A.norm();
  const double defect = (A * A.adjoint() - A.adjoint() * A).norm();
  if (defect > 1e-8 * scale * scale + 1e-300)
    throw normality_violation("propagator_derivative_spectral: generator is not normal");
  // Schur form of a normal matrix is diagonal with unitary basis.
  Eigen::ComplexSchur<Mat> schur(A, true);
  const Vec lam = schur.matrixT().diagonal();
  const Mat& U = schur.matrixU();
  const int n = int(A.rows());
  Vec elam(n);
  for (int i = 0; i < n; ++i) elam(i) = std::exp(tau * lam(i));
  Mat M = U.adjoint() * (cplx(0, -1) * h_super) * U;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const cplx diff = lam(i) - lam(j);
      if (std::abs(diff) < 1e-10)
        M(i, j) *= tau * elam(i);
      else
        M(i, j) *= (elam(i) - elam(j)) / diff;
    }
  return {U * M * U.adjoint(), L.dim};
}

/// Residual of the trace-functional condition vec(1)^dag L = 0.
inline double trace_functional_residual(const SuperOp& L) {
  const int n = L.dim;
  const Vec tr = vec_state(Mat::Identity(n, n));
  return (tr.adjoint() * L.mat).norm() / std::max(1.0, L.mat.norm());
}

/// Choi matrix of the map represented by superoperator F (reshuffled N^2 x N^2).
inline Mat choi_matrix(const Mat& F, int n) {
  Mat C(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          C(i * n + k, j * n + l) = F(k + n * l, i + n * j);
  return C;
}

}  // namespace hoc

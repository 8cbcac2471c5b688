#pragma once

// Piecewise-constant propagation of density operators and the driven steady
// state used as the initial state of every control task.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "hoc/expm.hpp"
#include "hoc/liouville.hpp"

namespace hoc {

struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ambiguous_steady_state : numerical_error {
  using numerical_error::numerical_error;
};

struct ChannelBounds {
  double detuning_min = -1000.0;
  double detuning_max = 1000.0;
  double drive_max = 32.0;  // |u_atomX|, |u_atomY| bound (R_max in ordinary MHz)
};

/// n_slots x 3 piecewise-constant control amplitudes (detuning, atomX, atomY) in MHz.
struct ControlSequence {
  int n_slots = 0;
  double tau = 0.0;  // slot duration, us
  Eigen::MatrixXd u;  // n_slots x 3
  ChannelBounds bounds;

  double total_time() const { return n_slots * tau; }

  static ControlSequence zeros(int n, double tau_, ChannelBounds b = {}) {
    ControlSequence s;
    s.n_slots = n;
    s.tau = tau_;
    s.u = Eigen::MatrixXd::Zero(n, 3);
    s.bounds = b;
    return s;
  }

  void clamp_to_bounds() {
    for (int k = 0; k < n_slots; ++k) {
      u(k, 0) = std::clamp(u(k, 0), bounds.detuning_min, bounds.detuning_max);
      u(k, 1) = std::clamp(u(k, 1), -bounds.drive_max, bounds.drive_max);
      u(k, 2) = std::clamp(u(k, 2), -bounds.drive_max, bounds.drive_max);
    }
  }

  bool within_bounds(double tol = 1e-9) const {
    for (int k = 0; k < n_slots; ++k) {
      if (u(k, 0) < bounds.detuning_min - tol || u(k, 0) > bounds.detuning_max + tol) return false;
      if (std::abs(u(k, 1)) > bounds.drive_max + tol) return false;
      if (std::abs(u(k, 2)) > bounds.drive_max + tol) return false;
    }
    return true;
  }
};

/// Everything needed to turn control amplitudes into slot generators. The
/// generator is kept both dense and as a shared sparse pattern with aligned
/// value arrays, so slot exponentials run on the sparse path.
struct ControlSystem {
  PhysicalParams params;
  FrameParams frame;
  SpaceSpec space;
  HamiltonianSet ham;
  LindbladSet linds;       // empty ops => closed system
  Mat drift_super;         // -i H_drift_hat + Gamma_hat
  std::array<Mat, 3> control_hsuper;  // Hermitian H_j_hat per control channel
  bool dissipative = true;

  SpMat slot_pattern;                       // union sparsity pattern, values unused
  std::vector<cplx> v_drift, v_c0, v_c1, v_c2;  // values aligned to the pattern

  Mat slot_generator(double u0, double u1, double u2) const {
    Mat L = drift_super;
    L.noalias() += cplx(0, -u0) * control_hsuper[0];
    L.noalias() += cplx(0, -u1) * control_hsuper[1];
    L.noalias() += cplx(0, -u2) * control_hsuper[2];
    return L;
  }

  /// tau * L(u) as a sparse matrix on the shared pattern.
  SpMat slot_generator_sparse(double tau, double u0, double u1, double u2) const {
    SpMat m = slot_pattern;
    cplx* v = m.valuePtr();
    for (std::size_t t = 0; t < v_drift.size(); ++t)
      v[t] = tau * (v_drift[t] + u0 * v_c0[t] + u1 * v_c1[t] + u2 * v_c2[t]);
    return m;
  }

  Mat slot_exponential(double tau, double u0, double u1, double u2) const {
    return expm(slot_generator_sparse(tau, u0, u1, u2));
  }

  Mat slot_hamiltonian(double u0, double u1, double u2) const {
    return ham.drift + u0 * ham.controls[0] + u1 * ham.controls[1] + u2 * ham.controls[2];
  }
};

inline ControlSystem make_control_system(const PhysicalParams& p, const FrameParams& f,
                                         const SpaceSpec& space, bool dissipative = true) {
  ControlSystem cs;
  cs.params = p;
  cs.frame = f;
  cs.space = space;
  cs.ham = build_hamiltonians(p, f, space);
  cs.linds = dissipative ? build_lindblads(p, space) : LindbladSet{{}, space};
  cs.dissipative = dissipative;
  cs.drift_super = vectorize_liouvillian(cs.ham.drift, cs.linds).mat;
  for (int j = 0; j < 3; ++j) cs.control_hsuper[j] = hamiltonian_superop(cs.ham.controls[j]);

  // union pattern of the drift and the three control directions
  const int n2 = cs.drift_super.rows();
  std::array<Mat, 3> ci;
  for (int j = 0; j < 3; ++j) ci[j] = cplx(0, -1) * cs.control_hsuper[j];
  std::vector<Eigen::Triplet<cplx>> trips;
  for (int c = 0; c < n2; ++c)
    for (int r = 0; r < n2; ++r)
      if (cs.drift_super(r, c) != cplx(0, 0) || ci[0](r, c) != cplx(0, 0) ||
          ci[1](r, c) != cplx(0, 0) || ci[2](r, c) != cplx(0, 0))
        trips.emplace_back(r, c, cplx(1, 0));
  cs.slot_pattern.resize(n2, n2);
  cs.slot_pattern.setFromTriplets(trips.begin(), trips.end());
  cs.slot_pattern.makeCompressed();
  const std::size_t nnz = cs.slot_pattern.nonZeros();
  cs.v_drift.resize(nnz);
  cs.v_c0.resize(nnz);
  cs.v_c1.resize(nnz);
  cs.v_c2.resize(nnz);
  std::size_t t = 0;
  for (int k = 0; k < cs.slot_pattern.outerSize(); ++k)
    for (SpMat::InnerIterator it(cs.slot_pattern, k); it; ++it, ++t) {
      cs.v_drift[t] = cs.drift_super(it.row(), it.col());
      cs.v_c0[t] = ci[0](it.row(), it.col());
      cs.v_c1[t] = ci[1](it.row(), it.col());
      cs.v_c2[t] = ci[2](it.row(), it.col());
    }
  return cs;
}

/// Propagators shared between slots carrying identical control vectors.
class PropagatorCache {
 public:
  const Mat& get(const ControlSystem& cs, double tau, double u0, double u1, double u2) {
    const Key key{u0, u1, u2};
    auto it = cache_.find(key);
    if (it != cache_.end()) return *it->second;
    auto f = std::make_shared<Mat>(cs.slot_exponential(tau, u0, u1, u2));
    return *cache_.emplace(key, std::move(f)).first->second;
  }
  void clear() { cache_.clear(); }
  std::size_t size() const { return cache_.size(); }

 private:
  struct Key {
    double a, b, c;
    bool operator==(const Key& o) const { return a == o.a && b == o.b && c == o.c; }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      auto h = [](double x) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof bits);
        bits ^= bits >> 33;
        bits *= 0xff51afd7ed558ccdULL;
        bits ^= bits >> 33;
        return bits;
      };
      return h(k.a) ^ (h(k.b) * 0x9e3779b97f4a7c15ULL) ^ (h(k.c) * 0xc2b2ae3d27d4eb4fULL);
    }
  };
  std::unordered_map<Key, std::shared_ptr<Mat>, KeyHash> cache_;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Mat> states;  // density operators at slot boundaries
  Eigen::MatrixXd pop_atom, pop_cavity, pop_osc;  // (n+1) x dim
  std::vector<double> purity;
};

namespace detail {

inline void check_state(const Mat& rho, double trace_tol = 1e-9, double eig_tol = -1e-8) {
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-9)
    throw numerical_error("propagated state lost Hermiticity");
  if (std::abs(rho.trace().real() - 1.0) > trace_tol || std::abs(rho.trace().imag()) > trace_tol)
    throw numerical_error("propagated state lost unit trace");
  Eigen::SelfAdjointEigenSolver<Mat> es(rho, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < eig_tol)
    throw numerical_error("propagated state lost positivity");
}

inline void record_observables(Trajectory& t, const Mat& rho, const SpaceSpec& space, int row) {
  const int da = space.atom_dim, dc = space.cavity_dim, dn = space.osc_dim;
  Eigen::VectorXd pa = Eigen::VectorXd::Zero(da), pc = Eigen::VectorXd::Zero(dc),
                  po = Eigen::VectorXd::Zero(dn);
  for (int ia = 0; ia < da; ++ia)
    for (int ic = 0; ic < dc; ++ic)
      for (int io = 0; io < dn; ++io) {
        const double p = rho(space.index(ia, ic, io), space.index(ia, ic, io)).real();
        pa(ia) += p;
        pc(ic) += p;
        po(io) += p;
      }
  t.pop_atom.row(row) = pa;
  t.pop_cavity.row(row) = pc;
  t.pop_osc.row(row) = po;
  t.purity[row] = (rho * rho).trace().real();
}

}  // namespace detail

/// Apply the slot propagators in order, recording the state at every boundary.
inline Trajectory propagate(const Mat& rho0, const ControlSequence& seq, const ControlSystem& cs,
                            PropagatorCache* cache = nullptr, bool validate = true) {
  const int n = cs.space.total();
  if (rho0.rows() != n || rho0.cols() != n)
    throw std::invalid_argument("propagate: state dimension does not match the model space");
  PropagatorCache local;
  PropagatorCache& c = cache ? *cache : local;

  Trajectory t;
  t.times.resize(seq.n_slots + 1);
  t.states.resize(seq.n_slots + 1);
  t.pop_atom.resize(seq.n_slots + 1, cs.space.atom_dim);
  t.pop_cavity.resize(seq.n_slots + 1, cs.space.cavity_dim);
  t.pop_osc.resize(seq.n_slots + 1, cs.space.osc_dim);
  t.purity.resize(seq.n_slots + 1);

  Vec v = vec_state(rho0);
  t.times[0] = 0.0;
  t.states[0] = rho0;
  detail::record_observables(t, rho0, cs.space, 0);
  for (int k = 0; k < seq.n_slots; ++k) {
    const Mat& f = c.get(cs, seq.tau, seq.u(k, 0), seq.u(k, 1), seq.u(k, 2));
    v = f * v;
    Mat rho = unvec_state(v, n);
    rho = 0.5 * (rho + rho.adjoint()).eval();
    if (validate) detail::check_state(rho);
    t.times[k + 1] = (k + 1) * seq.tau;
    t.states[k + 1] = rho;
    detail::record_observables(t, rho, cs.space, k + 1);
  }
  return t;
}

struct SteadyStateResult {
  Mat rho;
  cplx eigenvalue;       // eigenvalue of smallest modulus
  double gap;            // modulus of the next eigenvalue
  double residual;       // ||L vec(rho)|| / ||L||_F
};

namespace detail {

/// Ritz values/vector of the few eigenvalues of L closest to zero, via
/// Arnoldi iteration on (L - sigma)^{-1}.
inline SteadyStateResult steady_state_arnoldi(const Mat& L, int n) {
  const double scale = L.norm();
  const cplx sigma(1e-10 * scale, 0);
  Eigen::PartialPivLU<Mat> lu(L - sigma * Mat::Identity(L.rows(), L.cols()));
  const int m = std::min<int>(40, int(L.rows()));
  Mat V(L.rows(), m + 1);
  Mat H = Mat::Zero(m + 1, m);
  Vec v0 = vec_state(Mat::Identity(n, n));  // good overlap with the steady state
  V.col(0) = v0 / v0.norm();
  int built = m;
  for (int j = 0; j < m; ++j) {
    Vec w = lu.solve(V.col(j));
    for (int i = 0; i <= j; ++i) {  // modified Gram-Schmidt, one refinement pass
      const cplx hij = V.col(i).dot(w);
      H(i, j) += hij;
      w -= hij * V.col(i);
    }
    for (int i = 0; i <= j; ++i) {
      const cplx hij = V.col(i).dot(w);
      H(i, j) += hij;
      w -= hij * V.col(i);
    }
    H(j + 1, j) = w.norm();
    if (std::abs(H(j + 1, j)) < 1e-13) {
      built = j + 1;
      break;
    }
    V.col(j + 1) = w / H(j + 1, j);
  }
  Eigen::ComplexEigenSolver<Mat> es(H.topLeftCorner(built, built));
  // Largest |theta| of the inverse operator maps to the eigenvalue closest to sigma.
  int best = 0, second = -1;
  for (int i = 1; i < built; ++i)
    if (std::abs(es.eigenvalues()(i)) > std::abs(es.eigenvalues()(best))) best = i;
  for (int i = 0; i < built; ++i) {
    if (i == best) continue;
    if (second < 0 || std::abs(es.eigenvalues()(i)) > std::abs(es.eigenvalues()(second))) second = i;
  }
  SteadyStateResult r;
  r.eigenvalue = sigma + 1.0 / es.eigenvalues()(best);
  r.gap = second >= 0 ? std::abs(sigma + 1.0 / es.eigenvalues()(second))
                      : std::numeric_limits<double>::infinity();
  Vec x = V.leftCols(built) * es.eigenvectors().col(best);
  // One extra inverse-iteration pass sharpens the vector.
  x = lu.solve(x);
  x /= x.norm();
  r.residual = (L * x).norm() / std::max(scale, 1e-300);
  Mat rho = unvec_state(x, n);
  rho = 0.5 * (rho + rho.adjoint()).eval();
  rho /= rho.trace().real();
  r.rho = std::move(rho);
  return r;
}

}  // namespace detail

/// Null vector of the generator: the eigenvalue of smallest modulus, reshaped,
/// Hermitized and trace-normalized. Dense eigensolve at desk scale, shift-invert
/// Arnoldi above it.
inline SteadyStateResult steady_state(const SuperOp& L) {
  const int n = L.dim;
  SteadyStateResult r;
  if (L.mat.rows() <= 400) {
    Eigen::ComplexEigenSolver<Mat> es(L.mat);
    int best = 0, second = -1;
    for (int i = 1; i < es.eigenvalues().size(); ++i)
      if (std::abs(es.eigenvalues()(i)) < std::abs(es.eigenvalues()(best))) best = i;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
      if (i == best) continue;
      if (second < 0 || std::abs(es.eigenvalues()(i)) < std::abs(es.eigenvalues()(second)))
        second = i;
    }
    r.eigenvalue = es.eigenvalues()(best);
    r.gap = std::abs(es.eigenvalues()(second));
    Vec x = es.eigenvectors().col(best);
    r.residual = (L.mat * x).norm() / std::max(L.mat.norm(), 1e-300);
    Mat rho = unvec_state(x, n);
    rho = 0.5 * (rho + rho.adjoint()).eval();
    rho /= rho.trace().real();
    r.rho = std::move(rho);
  } else {
    r = detail::steady_state_arnoldi(L.mat, n);
  }
  if (r.gap < 1e-6)
    throw ambiguous_steady_state("steady state is not unique: near-zero spectral gap");
  if (r.residual > 1e-9)
    throw numerical_error("steady state residual exceeds tolerance");
  return r;
}

/// Generator of the initial cooling period (no atom control, atom parked
/// `atom_detuning` MHz from the drive carrier).
inline SuperOp preparation_liouvillian(const PhysicalParams& p, const FrameParams& f,
                                       const SpaceSpec& space, double atom_detuning = -1000.0) {
  const Mat h = build_preparation_hamiltonian(p, f, space, atom_detuning);
  return vectorize_liouvillian(h, build_lindblads(p, space));
}

/// The optimization's initial state: steady state of the cooling configuration.
inline SteadyStateResult initial_state(const PhysicalParams& p, const FrameParams& f,
                                       const SpaceSpec& space, double atom_detuning = -1000.0) {
  return steady_state(preparation_liouvillian(p, f, space, atom_detuning));
}

}  // namespace hoc

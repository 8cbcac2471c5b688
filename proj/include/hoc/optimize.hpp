#pragma once

// Optimal-control engine: cost functional with leakage penalty, gradient via
// slot propagator derivatives, BFGS with a weak-Wolfe line search under box
// bounds, and multi-restart orchestration (cheap lossy-model warm start, then
// the full dissipative optimization).

#include <Eigen/Dense>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hoc/analysis.hpp"
#include "hoc/dynamics.hpp"

namespace hoc {

// ---------------------------------------------------------------------------
// cost configuration

struct CostConfig {
  Mat target;  // density operator on the full space, or on reduce_to's space
  std::optional<std::vector<Subsystem>> reduce_to;  // compare partial traces
  double lambda = 10.0;
  std::vector<std::pair<Subsystem, int>> penalized;  // (subsystem, Fock level)

  static std::vector<std::pair<Subsystem, int>> top_levels(const SpaceSpec& s) {
    return {{Subsystem::cavity, s.cavity_dim - 1}, {Subsystem::oscillator, s.osc_dim - 1}};
  }
};

inline Mat penalty_projector(const SpaceSpec& space,
                             const std::vector<std::pair<Subsystem, int>>& penalized) {
  Mat pi = Mat::Zero(space.total(), space.total());
  for (auto& [sub, level] : penalized) pi += level_projector(space, sub, level);
  return pi;
}

struct CostBreakdown {
  double total = 0;
  double distance = 0;  // 1/2 ||rho(T)||^2 - Re tr(rho_T^dag rho(T))
  double penalty = 0;   // lambda * integrated penalized populations
};

namespace detail {

inline double distance_term(const Vec& x_final, const CostConfig& cfg, const SpaceSpec& space,
                            Mat* adjoint_seed = nullptr) {
  const int n = space.total();
  const Mat rho = unvec_state(x_final, n);
  if (cfg.reduce_to) {
    const Mat r = partial_trace(rho, space, *cfg.reduce_to);
    if (adjoint_seed) *adjoint_seed = lift_operator(r - cfg.target, space, *cfg.reduce_to);
    return 0.5 * r.squaredNorm() - (cfg.target.adjoint() * r).trace().real();
  }
  if (adjoint_seed) *adjoint_seed = rho - cfg.target;
  return 0.5 * rho.squaredNorm() - (cfg.target.adjoint() * rho).trace().real();
}

inline double trapezoid_weight(int m, int n) { return (m == 0 || m == n) ? 0.5 : 1.0; }

}  // namespace detail

/// L_eps plus the time-integrated leakage penalty (trapezoid over boundaries).
inline CostBreakdown cost(const ControlSequence& seq, const CostConfig& cfg,
                          const ControlSystem& cs, const Mat& rho0,
                          PropagatorCache* cache = nullptr) {
  const int n = seq.n_slots;
  const Vec vpi = vec_state(penalty_projector(cs.space, cfg.penalized));
  PropagatorCache local;
  PropagatorCache& c = cache ? *cache : local;
  Vec x = vec_state(rho0);
  double pen = detail::trapezoid_weight(0, n) * (vpi.dot(x)).real();
  for (int k = 0; k < n; ++k) {
    x = c.get(cs, seq.tau, seq.u(k, 0), seq.u(k, 1), seq.u(k, 2)) * x;
    pen += detail::trapezoid_weight(k + 1, n) * (vpi.dot(x)).real();
  }
  CostBreakdown b;
  b.distance = detail::distance_term(x, cfg, cs.space);
  b.penalty = cfg.lambda * seq.tau * pen;
  b.total = b.distance + b.penalty;
  return b;
}

enum class DerivativeMode { automatic, finite_difference, spectral };

struct GradientOptions {
  DerivativeMode mode = DerivativeMode::automatic;
  double fd_scale = 1e-6;  // delta = fd_scale * max(1, |u|)
  int workers = 1;
};

namespace detail {

template <typename F>
inline void parallel_for(int count, int workers, F&& body) {
  if (workers <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int w = 0; w < std::min(workers, count); ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace detail

/// Exact-as-implemented gradient of `cost` as an n_slots x 3 array. The slot
/// propagator derivatives use one-sided finite differences in the dissipative
/// case and the eigenbasis formula when the generator is normal (closed system).
inline Eigen::MatrixXd gradient(const ControlSequence& seq, const CostConfig& cfg,
                                const ControlSystem& cs, const Mat& rho0,
                                CostBreakdown* value = nullptr,
                                const GradientOptions& opts = {}) {
  const int n = seq.n_slots;
  Eigen::MatrixXd g(n, 3);
  if (n == 0) {
    if (value) *value = cost(seq, cfg, cs, rho0);
    return g;
  }
  const int dim = cs.space.total();
  const Vec vpi = vec_state(penalty_projector(cs.space, cfg.penalized));
  const bool use_spectral = opts.mode == DerivativeMode::spectral ||
                            (opts.mode == DerivativeMode::automatic && !cs.dissipative);

  // forward pass: states at boundaries and slot propagators
  std::vector<Vec> x(n + 1);
  std::vector<Mat> f(n);
  x[0] = vec_state(rho0);
  double pen = detail::trapezoid_weight(0, n) * (vpi.dot(x[0])).real();
  detail::parallel_for(n, opts.workers, [&](int k) {
    f[k] = cs.slot_exponential(seq.tau, seq.u(k, 0), seq.u(k, 1), seq.u(k, 2));
  });
  for (int k = 0; k < n; ++k) {
    x[k + 1] = f[k] * x[k];
    pen += detail::trapezoid_weight(k + 1, n) * (vpi.dot(x[k + 1])).real();
  }

  Mat seed;
  const double dist = detail::distance_term(x[n], cfg, cs.space, &seed);
  if (value) {
    value->distance = dist;
    value->penalty = cfg.lambda * seq.tau * pen;
    value->total = value->distance + value->penalty;
  }

  // adjoints at boundaries k+1, accumulated backwards
  std::vector<Vec> w(n);
  w[n - 1] = vec_state(seed) + cfg.lambda * seq.tau * detail::trapezoid_weight(n, n) * vpi;
  for (int k = n - 2; k >= 0; --k)
    w[k] = f[k + 1].adjoint() * w[k + 1] +
           cfg.lambda * seq.tau * detail::trapezoid_weight(k + 1, n) * vpi;

  detail::parallel_for(n, opts.workers, [&](int k) {
    if (use_spectral) {
      const SuperOp L{cs.slot_generator(seq.u(k, 0), seq.u(k, 1), seq.u(k, 2)), cs.space.total()};
      for (int j = 0; j < 3; ++j) {
        const SuperOp d = propagator_derivative_spectral(L, cs.control_hsuper[j], seq.tau);
        g(k, j) = (w[k].dot(d.mat * x[k])).real();
      }
      return;
    }
    // finite differences: the shifted generator is the slot generator at u + delta e_j
    const Vec fx = f[k] * x[k];
    for (int j = 0; j < 3; ++j) {
      const double delta = opts.fd_scale * std::max(1.0, std::abs(seq.u(k, j)));
      Eigen::Vector3d u = seq.u.row(k).transpose();
      u(j) += delta;
      const Mat fp = cs.slot_exponential(seq.tau, u(0), u(1), u(2));
      g(k, j) = (w[k].dot((fp * x[k] - fx) / delta)).real();
    }
  });
  (void)dim;
  return g;
}

/// Compare the finite-difference propagator derivative at two step sizes;
/// returns the largest relative disagreement over the three channels.
inline double fd_step_selftest(const ControlSystem& cs, double tau,
                               const Eigen::Vector3d& u_probe) {
  const SuperOp L{cs.slot_generator(u_probe(0), u_probe(1), u_probe(2)), cs.space.total()};
  const Mat f = expm(Mat(tau * L.mat));
  double worst = 0;
  for (int j = 0; j < 3; ++j) {
    const Mat d5 = propagator_derivative(L, cs.control_hsuper[j], tau, 1e-5, &f).mat;
    const Mat d6 = propagator_derivative(L, cs.control_hsuper[j], tau, 1e-6, &f).mat;
    worst = std::max(worst, (d5 - d6).norm() / std::max(d6.norm(), 1e-300));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// BFGS with weak-Wolfe line search under box bounds

struct BfgsOptions {
  int max_iterations = 2000;
  double grad_tol = 1e-7;        // on max|g_i|
  double wall_limit_s = std::numeric_limits<double>::infinity();
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search = 30;
};

struct BfgsOutcome {
  Eigen::VectorXd x;
  double f = 0;
  Eigen::VectorXd grad;
  std::vector<double> cost_history;       // accepted iterates, nonincreasing
  std::vector<double> grad_norm_history;  // max-abs gradient per iterate
  std::string termination;
  int iterations = 0;
  int evaluations = 0;
};

/// Minimize f over the box [lo, hi]. Iterates move along -H grad, are clipped
/// to the box, and steps satisfy sufficient decrease and curvature conditions;
/// updates with nonpositive curvature are skipped.
inline BfgsOutcome bfgs_minimize(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& func,
    const Eigen::VectorXd& x0, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
    const BfgsOptions& opts = {}) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };
  const int n = int(x0.size());
  auto project = [&](VectorXd v) {
    for (int i = 0; i < n; ++i) v(i) = std::clamp(v(i), lo(i), hi(i));
    return v;
  };

  BfgsOutcome out;
  out.x = project(x0);
  VectorXd g(n);
  out.f = func(out.x, g);
  out.evaluations = 1;
  out.grad = g;
  out.cost_history.push_back(out.f);
  out.grad_norm_history.push_back(g.cwiseAbs().maxCoeff());
  MatrixXd h = MatrixXd::Identity(n, n);
  bool first = true;
  out.termination = "max_iterations";

  for (int it = 0; it < opts.max_iterations; ++it) {
    // project the gradient at active bounds before testing convergence
    VectorXd gp = g;
    for (int i = 0; i < n; ++i) {
      if (out.x(i) <= lo(i) && g(i) > 0) gp(i) = 0;
      if (out.x(i) >= hi(i) && g(i) < 0) gp(i) = 0;
    }
    if (gp.cwiseAbs().maxCoeff() <= opts.grad_tol) {
      out.termination = "gradient_tolerance";
      break;
    }
    if (elapsed() > opts.wall_limit_s) {
      out.termination = "wall_clock";
      break;
    }

    VectorXd d = -(h * g);
    double slope = g.dot(d);
    if (!(slope < 0)) {  // reset on a non-descent direction
      h.setIdentity();
      d = -g;
      slope = g.dot(d);
      if (!(slope < 0)) {
        out.termination = "gradient_tolerance";
        break;
      }
    }

    // weak-Wolfe bisection on the projected path
    double alpha = 1.0, alpha_lo = 0.0, alpha_hi = std::numeric_limits<double>::infinity();
    VectorXd x1, g1(n);
    double f1 = 0;
    bool accepted = false;
    for (int ls = 0; ls < opts.max_line_search; ++ls) {
      x1 = project(out.x + alpha * d);
      f1 = func(x1, g1);
      ++out.evaluations;
      const VectorXd step = x1 - out.x;
      const double pred = g.dot(step);
      if (f1 > out.f + opts.c1 * pred || step.squaredNorm() == 0) {
        alpha_hi = alpha;
      } else if (g1.dot(step) < opts.c2 * pred) {
        alpha_lo = alpha;
      } else {
        accepted = true;
        break;
      }
      alpha = std::isinf(alpha_hi) ? 2.0 * alpha : 0.5 * (alpha_lo + alpha_hi);
      if (alpha < 1e-14) break;
    }
    if (!accepted && !(f1 < out.f)) {
      out.termination = "line_search_failure";
      break;
    }

    const VectorXd s = x1 - out.x;
    const VectorXd y = g1 - g;
    const double sy = s.dot(y);
    if (first && sy > 0) {
      h *= sy / y.squaredNorm();
      first = false;
    }
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const VectorXd hy = h * y;
      const double k = (1.0 + y.dot(hy) / sy) / sy;
      h.noalias() += k * (s * s.transpose());
      h.noalias() -= (hy * s.transpose() + s * hy.transpose()) / sy;
    }
    out.x = x1;
    out.f = f1;
    g = g1;
    out.grad = g;
    ++out.iterations;
    out.cost_history.push_back(out.f);
    out.grad_norm_history.push_back(g.cwiseAbs().maxCoeff());
  }
  return out;
}

// ---------------------------------------------------------------------------
// cheap warm-start model at Hilbert-space scale

/// Slot evolution rho -> K rho K^dag with K = exp(-i tau H_eff). With
/// `include_loss` H_eff carries -i/2 sum V^dag V, so the chain follows the
/// no-jump part of the master equation and sees decay losses at a fraction of
/// the superoperator cost; with include_loss = false it is the closed system.
class WarmStartModel {
 public:
  WarmStartModel(const ControlSystem& cs, const CostConfig& cfg, const Mat& rho0, double tau,
                 int n_slots, bool include_loss = true)
      : cfg_(cfg), space_(cs.space), rho0_(rho0), tau_(tau), n_(n_slots) {
    hd_ = cs.ham.drift;
    hc_ = cs.ham.controls;
    anti_ = Mat::Zero(hd_.rows(), hd_.cols());
    if (include_loss)
      for (const Mat& v : cs.linds.ops) anti_ += cplx(0, -0.5) * (v.adjoint() * v);
    pi_ = penalty_projector(space_, cfg.penalized);
  }

  /// Cost and gradient of the same functional evaluated along the K-chain.
  double cost_grad(const Eigen::MatrixXd& u, Eigen::MatrixXd& grad) const {
    const int nn = int(hd_.rows());
    std::vector<Mat> ks(n_), vs(n_), vis(n_), phis(n_), rhos(n_ + 1);
    std::vector<Vec> lams(n_);
    std::vector<bool> spectral_ok(n_, true);
    rhos[0] = rho0_;
    for (int k = 0; k < n_; ++k) {
      const Mat a = cplx(0, -tau_) * (hd_ + u(k, 0) * hc_[0] + u(k, 1) * hc_[1] +
                                      u(k, 2) * hc_[2] + anti_);
      Eigen::ComplexEigenSolver<Mat> es(a);
      const Mat& v = es.eigenvectors();
      const Vec& lam = es.eigenvalues();
      Mat vi = v.inverse();
      if ((v * lam.asDiagonal() * vi - a).norm() > 1e-10 * std::max(1.0, a.norm())) {
        spectral_ok[k] = false;  // defective slot generator, fall back below
        ks[k] = expm(a);
      } else {
        Vec elam(nn);
        for (int i = 0; i < nn; ++i) elam(i) = std::exp(lam(i));
        ks[k] = v * elam.asDiagonal() * vi;
        Mat phi(nn, nn);
        for (int i = 0; i < nn; ++i)
          for (int j = 0; j < nn; ++j) {
            const cplx diff = lam(i) - lam(j);
            phi(i, j) = std::abs(diff) < 1e-12 ? elam(i) : (elam(i) - elam(j)) / diff;
          }
        vs[k] = v;
        vis[k] = std::move(vi);
        lams[k] = lam;
        phis[k] = std::move(phi);
      }
      rhos[k + 1] = ks[k] * rhos[k] * ks[k].adjoint();
    }

    double pen = 0;
    for (int m = 0; m <= n_; ++m)
      pen += detail::trapezoid_weight(m, n_) * (pi_ * rhos[m]).trace().real();

    Mat seed;
    const double dist = detail::distance_term(vec_state(rhos[n_]), cfg_, space_, &seed);
    const double total = dist + cfg_.lambda * tau_ * pen;

    grad.resize(n_, 3);
    Mat gmat = seed + cfg_.lambda * tau_ * detail::trapezoid_weight(n_, n_) * pi_;
    for (int k = n_ - 1; k >= 0; --k) {
      for (int j = 0; j < 3; ++j) {
        Mat dk;
        if (spectral_ok[k]) {
          const Mat m = vis[k] * (cplx(0, -tau_) * hc_[j]) * vs[k];
          dk = vs[k] * m.cwiseProduct(phis[k]) * vis[k];
        } else {
          const Mat a = cplx(0, -tau_) * (hd_ + u(k, 0) * hc_[0] + u(k, 1) * hc_[1] +
                                          u(k, 2) * hc_[2] + anti_);
          const double delta = 1e-6 * std::max(1.0, std::abs(u(k, j)));
          dk = (expm(Mat(a + cplx(0, -tau_ * delta) * hc_[j])) - ks[k]) / delta;
        }
        grad(k, j) = 2.0 * (gmat * dk * rhos[k] * ks[k].adjoint()).trace().real();
      }
      gmat = (ks[k].adjoint() * gmat * ks[k]).eval() +
             cfg_.lambda * tau_ * detail::trapezoid_weight(k, n_) * pi_;
    }
    return total;
  }

 private:
  CostConfig cfg_;
  SpaceSpec space_;
  Mat rho0_;
  double tau_;
  int n_;
  Mat hd_, anti_, pi_;
  std::array<Mat, 3> hc_;
};

// ---------------------------------------------------------------------------
// multi-restart orchestration

struct StageBudget {
  int max_iterations = 2000;
  double wall_s = std::numeric_limits<double>::infinity();
};

struct OptimizeSchedule {
  StageBudget stage_a{200, 300.0};
  StageBudget stage_b{2000, std::numeric_limits<double>::infinity()};
  double init_scale = 1.0;           // random init amplitude as a fraction of the bounds
  bool stage_a_include_loss = true;  // lossy warm-start model (false = closed system)
  int stage_b_top_k = 0;             // run stage B only on the k best warm starts (0 = all)
  double early_stop_fidelity = std::numeric_limits<double>::infinity();
  double grad_tol = 1e-7;
  int workers = 1;
};

struct OptimizationProblem {
  ControlSystem system;  // dissipative
  Mat rho0;
  CostConfig cost;
  ChannelBounds bounds;
  int n_slots = 200;
  double tau = 0.005;
  // reported fidelity: overlap of the reduced final state with this target
  Mat report_target;
  std::vector<Subsystem> report_keep;
};

struct RestartRecord {
  int index = 0;
  double stage_a_cost = 0;
  double warm_fidelity = 0;  // dissipative fidelity of the stage-A pulse
  bool ran_stage_b = false;
  double final_cost = 0;
  double fidelity = 0;
  double penalty = 0;
  double max_penalized_pop = 0;
  int iterations_a = 0, iterations_b = 0;
  std::string termination;
  double wall_s = 0;
};

struct OptimizationResult {
  ControlSequence best_sequence;
  Mat final_state;
  RestartRecord best;
  std::vector<RestartRecord> restarts;
  std::vector<double> cost_history;       // of the winning stage-B run
  std::vector<double> grad_norm_history;
  double fd_selftest = 0;
  double wall_s = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic uniform doubles in [-1, 1] independent of libstdc++ details.
class UniformStream {
 public:
  explicit UniformStream(std::uint64_t seed) : state_(seed) {}
  double next() {
    state_ = splitmix64_state(state_);
    return 2.0 * (double(state_ >> 11) * 0x1.0p-53) - 1.0;
  }

 private:
  static std::uint64_t splitmix64_state(std::uint64_t& x) { return x = splitmix64(x); }
  std::uint64_t state_;
};

struct FinalMetrics {
  double fidelity;
  double penalty;
  double max_pop;
  double cost_total;
  Mat rho_final;
};

inline FinalMetrics evaluate_final(const ControlSequence& seq, const OptimizationProblem& prob) {
  PropagatorCache cache;
  const Trajectory t = propagate(prob.rho0, seq, prob.system, &cache, false);
  const Mat pi = penalty_projector(prob.system.space, prob.cost.penalized);
  double max_pop = 0, integral = 0;
  for (int m = 0; m <= seq.n_slots; ++m) {
    const double p = (pi * t.states[m]).trace().real();
    max_pop = std::max(max_pop, p);
    integral += detail::trapezoid_weight(m, seq.n_slots) * p;
  }
  const Mat reduced = partial_trace(t.states.back(), prob.system.space, prob.report_keep);
  FinalMetrics fm;
  fm.fidelity = (prob.report_target.adjoint() * reduced).trace().real();
  fm.penalty = prob.cost.lambda * seq.tau * integral;
  fm.max_pop = max_pop;
  fm.cost_total = detail::distance_term(vec_state(t.states.back()), prob.cost,
                                        prob.system.space) + fm.penalty;
  fm.rho_final = t.states.back();
  return fm;
}

}  // namespace detail

/// Random restarts, each optimized in two stages; returns the restart with the
/// best reported fidelity (ties: lower penalty, then lower index).
inline OptimizationResult multi_restart(const OptimizationProblem& prob, int n_restarts,
                                        std::uint64_t seed, const OptimizeSchedule& sched = {}) {
  if (n_restarts < 1) throw std::invalid_argument("multi_restart: need at least one restart");
  const auto t_start = std::chrono::steady_clock::now();
  auto now_s = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };
  const int n = prob.n_slots;

  OptimizationResult result;
  result.fd_selftest = fd_step_selftest(prob.system, prob.tau,
                                        {0.5 * prob.bounds.detuning_max,
                                         0.5 * prob.bounds.drive_max,
                                         -0.5 * prob.bounds.drive_max});

  Eigen::VectorXd lo(3 * n), hi(3 * n);
  for (int k = 0; k < n; ++k) {
    lo(3 * k) = prob.bounds.detuning_min;
    hi(3 * k) = prob.bounds.detuning_max;
    lo(3 * k + 1) = lo(3 * k + 2) = -prob.bounds.drive_max;
    hi(3 * k + 1) = hi(3 * k + 2) = prob.bounds.drive_max;
  }
  auto to_seq = [&](const Eigen::VectorXd& x) {
    ControlSequence s = ControlSequence::zeros(n, prob.tau, prob.bounds);
    for (int k = 0; k < n; ++k) s.u.row(k) = x.segment(3 * k, 3).transpose();
    return s;
  };

  const WarmStartModel warm(prob.system, prob.cost, prob.rho0, prob.tau, n,
                            sched.stage_a_include_loss);
  auto warm_func = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    Eigen::MatrixXd u(n, 3), gu;
    for (int k = 0; k < n; ++k) u.row(k) = x.segment(3 * k, 3).transpose();
    const double f = warm.cost_grad(u, gu);
    g.resize(3 * n);
    for (int k = 0; k < n; ++k) g.segment(3 * k, 3) = gu.row(k).transpose();
    return f;
  };
  GradientOptions gopts;
  gopts.workers = sched.workers;
  auto full_func = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const ControlSequence s = to_seq(x);
    CostBreakdown b;
    const Eigen::MatrixXd gu = gradient(s, prob.cost, prob.system, prob.rho0, &b, gopts);
    g.resize(3 * n);
    for (int k = 0; k < n; ++k) g.segment(3 * k, 3) = gu.row(k).transpose();
    return b.total;
  };

  // stage A for every restart
  struct WarmResult {
    Eigen::VectorXd x;
    BfgsOutcome outcome;
    double warm_fidelity;
  };
  std::vector<WarmResult> warms(n_restarts);
  for (int r = 0; r < n_restarts; ++r) {
    detail::UniformStream rng(detail::splitmix64(seed) ^ std::uint64_t(r) * 0x9e3779b97f4a7c15ULL);
    Eigen::VectorXd x0(3 * n);
    for (int k = 0; k < n; ++k) {
      x0(3 * k) = sched.init_scale * rng.next() *
                  std::max(std::abs(prob.bounds.detuning_min), prob.bounds.detuning_max);
      x0(3 * k + 1) = sched.init_scale * rng.next() * prob.bounds.drive_max;
      x0(3 * k + 2) = sched.init_scale * rng.next() * prob.bounds.drive_max;
    }
    BfgsOptions o;
    o.max_iterations = sched.stage_a.max_iterations;
    o.wall_limit_s = sched.stage_a.wall_s;
    o.grad_tol = sched.grad_tol;
    warms[r].outcome = bfgs_minimize(warm_func, x0, lo, hi, o);
    warms[r].x = warms[r].outcome.x;
    const auto fm = detail::evaluate_final(to_seq(warms[r].x), prob);
    warms[r].warm_fidelity = fm.fidelity;
  }

  // stage B on the selected restarts, best warm starts first
  std::vector<int> order(n_restarts);
  for (int r = 0; r < n_restarts; ++r) order[r] = r;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (warms[a].warm_fidelity != warms[b].warm_fidelity)
      return warms[a].warm_fidelity > warms[b].warm_fidelity;
    return a < b;
  });
  const int run_b = sched.stage_b_top_k > 0 ? std::min(sched.stage_b_top_k, n_restarts)
                                            : n_restarts;

  result.restarts.resize(n_restarts);
  int best = -1;
  for (int rank = 0; rank < n_restarts; ++rank) {
    const int r = order[rank];
    RestartRecord& rec = result.restarts[r];
    rec.index = r;
    rec.stage_a_cost = warms[r].outcome.f;
    rec.warm_fidelity = warms[r].warm_fidelity;
    rec.iterations_a = warms[r].outcome.iterations;
    Eigen::VectorXd xb = warms[r].x;
    BfgsOutcome ob;
    if (rank < run_b) {
      BfgsOptions o;
      o.max_iterations = sched.stage_b.max_iterations;
      o.wall_limit_s = sched.stage_b.wall_s;
      o.grad_tol = sched.grad_tol;
      ob = bfgs_minimize(full_func, xb, lo, hi, o);
      xb = ob.x;
      rec.ran_stage_b = true;
      rec.iterations_b = ob.iterations;
      rec.termination = ob.termination;
    } else {
      rec.termination = "stage_b_skipped";
    }
    const ControlSequence seq = to_seq(xb);
    const auto fm = detail::evaluate_final(seq, prob);
    rec.final_cost = fm.cost_total;
    rec.fidelity = fm.fidelity;
    rec.penalty = fm.penalty;
    rec.max_penalized_pop = fm.max_pop;
    rec.wall_s = now_s();

    const bool better =
        best < 0 || rec.fidelity > result.best.fidelity ||
        (rec.fidelity == result.best.fidelity &&
         (rec.penalty < result.best.penalty ||
          (rec.penalty == result.best.penalty && rec.index < result.best.index)));
    if (better) {
      best = r;
      result.best = rec;
      result.best_sequence = seq;
      result.final_state = fm.rho_final;
      result.cost_history = rec.ran_stage_b ? ob.cost_history : warms[r].outcome.cost_history;
      result.grad_norm_history =
          rec.ran_stage_b ? ob.grad_norm_history : warms[r].outcome.grad_norm_history;
    }
    if (result.best.fidelity >= sched.early_stop_fidelity) break;
  }
  result.wall_s = now_s();
  return result;
}

}  // namespace hoc

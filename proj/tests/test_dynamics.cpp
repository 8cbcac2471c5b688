#include <catch2/catch_amalgamated.hpp>

#include "hoc/dynamics.hpp"

using namespace hoc;
using Catch::Approx;

namespace {

double level_pop(const Mat& rho, const SpaceSpec& space, Subsystem s, int level) {
  return (level_projector(space, s, level) * rho).trace().real();
}

double trace_distance(const Mat& a, const Mat& b) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a - b, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace

TEST_CASE("cooling steady state reproduces the published populations") {
  const PhysicalParams p = params_set1();
  const FrameParams f = derive_frame(p);
  const SpaceSpec space(3, 3);
  const SteadyStateResult ss = initial_state(p, f, space);

  CHECK(level_pop(ss.rho, space, Subsystem::cavity, 0) == Approx(0.9922).margin(0.002));
  CHECK(level_pop(ss.rho, space, Subsystem::cavity, 1) == Approx(0.0078).margin(0.002));
  CHECK(level_pop(ss.rho, space, Subsystem::oscillator, 0) == Approx(0.9912).margin(0.002));
  CHECK(level_pop(ss.rho, space, Subsystem::oscillator, 1) == Approx(0.0087).margin(0.002));
  CHECK(ss.residual <= 1e-9);
  CHECK(ss.gap > 1e-6);

  // insensitive to the exact parking detuning
  const SteadyStateResult ss2 = initial_state(p, f, space, -700.0);
  CHECK(level_pop(ss2.rho, space, Subsystem::cavity, 1) == Approx(0.0078).margin(0.002));
}

TEST_CASE("decoupled cavity cools to the transformed vacuum") {
  PhysicalParams p = params_set1();
  p.g_co = 1e-9;
  p.g_ac = 1e-9;
  const FrameParams f = derive_frame(p);
  const SpaceSpec space(3, 3);
  const SteadyStateResult ss = initial_state(p, f, space);
  CHECK(level_pop(ss.rho, space, Subsystem::cavity, 0) == Approx(1.0).margin(1e-6));
}

TEST_CASE("steady state is a fixed point of its own generator") {
  const PhysicalParams p = params_set1();
  const FrameParams f = derive_frame(p);
  const SpaceSpec space(3, 3);
  const ControlSystem cs = make_control_system(p, f, space, true);

  // parked, zero-drive generator and its stationary state
  const SuperOp L{cs.slot_generator(-1000.0, 0.0, 0.0), space.total()};
  const SteadyStateResult ss = steady_state(L);

  ControlSequence seq = ControlSequence::zeros(40, 0.02);
  seq.u.col(0).setConstant(-1000.0);
  const Trajectory t = propagate(ss.rho, seq, cs);
  CHECK(trace_distance(t.states.back(), ss.rho) <= 1e-7);
  for (std::size_t m = 0; m < t.times.size(); ++m) {
    CHECK(std::abs(t.pop_cavity(m, 1) - t.pop_cavity(0, 1)) <= 1e-6);
    CHECK(std::abs(t.pop_osc(m, 1) - t.pop_osc(0, 1)) <= 1e-6);
    CHECK(std::abs(t.pop_atom(m, 1) - t.pop_atom(0, 1)) <= 1e-6);
  }
}

TEST_CASE("long-time propagation relaxes onto the null vector") {
  const PhysicalParams p = params_set1();
  const FrameParams f = derive_frame(p);
  const SpaceSpec space(3, 3);
  const SuperOp L = preparation_liouvillian(p, f, space);
  const SteadyStateResult ss = steady_state(L);

  // an arbitrary product start far from the steady state
  const Vec psi = fock_state(space, 1, 1, 1);
  const Mat rho0 = psi * psi.adjoint();
  const double horizon = 50.0 / (two_pi * p.kappa);
  const Mat F = propagator(L, horizon).mat;
  const Mat rho_final = unvec_state(F * vec_state(rho0), space.total());
  CHECK(trace_distance(rho_final, ss.rho) <= 1e-5);
}

TEST_CASE("closed propagation keeps pure states pure") {
  const PhysicalParams p = params_set1();
  const FrameParams f = derive_frame(p);
  const SpaceSpec space(3, 3);
  const ControlSystem closed = make_control_system(p, f, space, false);
  const Vec psi = fock_state(space, 1, 0, 0);
  ControlSequence seq = ControlSequence::zeros(25, 0.004);
  for (int k = 0; k < seq.n_slots; ++k) {
    seq.u(k, 0) = 200.0 * std::sin(0.4 * k);
    seq.u(k, 1) = 15.0 * std::cos(0.9 * k);
    seq.u(k, 2) = 9.0 * std::sin(1.3 * k + 0.5);
  }
  const Trajectory t = propagate(psi * psi.adjoint(), seq, closed);
  for (double pur : t.purity) CHECK(pur == Approx(1.0).margin(1e-9));
}

TEST_CASE("trajectory states stay physical under drive") {
  const PhysicalParams p = params_set1();
  const FrameParams f = derive_frame(p);
  const SpaceSpec space(3, 3);
  const ControlSystem cs = make_control_system(p, f, space, true);
  const Mat rho0 = initial_state(p, f, space).rho;
  ControlSequence seq = ControlSequence::zeros(30, 0.01);
  for (int k = 0; k < seq.n_slots; ++k) {
    seq.u(k, 0) = k < 10 ? 0.0 : 500.0;
    seq.u(k, 1) = k < 10 ? 30.0 : 0.0;
  }
  // propagate validates Hermiticity, trace and positivity at every boundary
  const Trajectory t = propagate(rho0, seq, cs);
  CHECK(t.states.size() == 31);
  CHECK(t.pop_atom(10, 1) > 0.5);  // the resonant pulse excited the atom
}

TEST_CASE("propagate rejects mismatched state dimensions") {
  const PhysicalParams p = params_set1();
  const FrameParams f = derive_frame(p);
  const ControlSystem cs = make_control_system(p, f, SpaceSpec(3, 3), true);
  const ControlSequence seq = ControlSequence::zeros(3, 0.01);
  CHECK_THROWS_AS(propagate(Mat::Identity(8, 8), seq, cs), std::invalid_argument);
}

TEST_CASE("slot propagators are shared between equal control vectors") {
  const PhysicalParams p = params_set1();
  const FrameParams f = derive_frame(p);
  const SpaceSpec space(2, 2);
  const ControlSystem cs = make_control_system(p, f, space, true);
  ControlSequence seq = ControlSequence::zeros(30, 0.002);
  for (int k = 10; k < 20; ++k) seq.u(k, 0) = 500.0;
  for (int k = 20; k < 30; ++k) seq.u(k, 0) = -1000.0;
  PropagatorCache cache;
  const Mat rho0 = initial_state(p, f, space).rho;
  propagate(rho0, seq, cs, &cache);
  CHECK(cache.size() == 3);
}

TEST_CASE("degenerate stationary subspace is flagged") {
  // two disconnected decay sinks: |0> and |2> of a 3-level chain with no
  // coupling between the lower and upper pair
  Mat v = Mat::Zero(3, 3);
  v(0, 1) = 1.0;  // |1> -> |0> only
  const SuperOp L = vectorize_liouvillian(Mat::Zero(3, 3), {v});
  CHECK_THROWS_AS(steady_state(L), ambiguous_steady_state);
}

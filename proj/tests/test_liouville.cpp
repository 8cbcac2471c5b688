#include <catch2/catch_amalgamated.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "hoc/dynamics.hpp"

using namespace hoc;
using Catch::Approx;

namespace {

Mat random_hermitian(int n, unsigned seed) {
  std::srand(seed);
  Mat m = Mat::Random(n, n);
  return 0.5 * (m + m.adjoint());
}

}  // namespace

TEST_CASE("drift Hamiltonian carries the published couplings") {
  const PhysicalParams p = params_set1();
  const FrameParams f = derive_frame(p);
  const SpaceSpec space(3, 3);
  const HamiltonianSet h = build_hamiltonians(p, f, space);

  for (const Mat& m : {h.drift, h.controls[0], h.controls[1], h.controls[2]})
    CHECK(is_hermitian(m, 1e-12));

  // hopping matrix element <0,0,1|H|0,1,0> = -2pi g0 s = -2pi * 1.2 MHz
  const int bra = space.index(0, 0, 1), ket = space.index(0, 1, 0);
  CHECK(h.drift(bra, ket).real() == Approx(-two_pi * 1.2).epsilon(1e-9));

  // a^dag a and b^dag b share the mode prefactor
  CHECK(h.drift(space.index(0, 1, 0), space.index(0, 1, 0)).real() ==
        Approx(h.drift(space.index(0, 0, 1), space.index(0, 0, 1)).real()));

  // atomX at u = 1 MHz has matrix 2-norm pi
  Eigen::JacobiSVD<Mat> svd(h.controls[1]);
  CHECK(svd.singularValues()(0) == Approx(two_pi / 2).epsilon(1e-12));

  // with wa0 = wr the drift has no atom detuning term
  CHECK(h.drift(space.index(1, 0, 0), space.index(1, 0, 0)).real() == Approx(0.0).margin(1e-12));
}

TEST_CASE("Lindblad set carries the four published operators") {
  const PhysicalParams p = params_set1();
  const SpaceSpec space(3, 3);
  const LindbladSet l = build_lindblads(p, space);
  REQUIRE(l.ops.size() == 4);
  const ThermalParams th = thermal(p);
  // rates enter as sqrt(2 pi rate)
  CHECK(l.ops[0].cwiseAbs().maxCoeff() ==
        Approx(std::sqrt(two_pi * p.kappa) * std::sqrt(2.0)));
  CHECK(l.ops[1].cwiseAbs().maxCoeff() ==
        Approx(std::sqrt(two_pi * th.gamma_eff) * std::sqrt(2.0)));
  CHECK(l.ops[2].cwiseAbs().maxCoeff() ==
        Approx(std::sqrt(two_pi * th.gamma_eff * th.x) * std::sqrt(2.0)));
  CHECK(l.ops[3].cwiseAbs().maxCoeff() == Approx(std::sqrt(two_pi * p.kappa_a)));
}

TEST_CASE("damped two-level mode has the textbook spectrum") {
  const double kappa = 1.7;
  const Mat a = annihilator(2);
  const SuperOp L = vectorize_liouvillian(Mat::Zero(2, 2), {std::sqrt(kappa) * a});
  Eigen::ComplexEigenSolver<Mat> es(L.mat);
  std::vector<double> re;
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(es.eigenvalues()(i).imag()) < 1e-12);
    re.push_back(es.eigenvalues()(i).real());
  }
  std::sort(re.begin(), re.end());
  CHECK(re[0] == Approx(-kappa));
  CHECK(re[1] == Approx(-kappa / 2));
  CHECK(re[2] == Approx(-kappa / 2));
  CHECK(re[3] == Approx(0.0).margin(1e-14));
}

TEST_CASE("closed-system generator has purely imaginary spectrum") {
  const Mat h = random_hermitian(4, 11);
  const SuperOp L = vectorize_liouvillian(h, std::vector<Mat>{});
  Eigen::ComplexEigenSolver<Mat> es(L.mat);
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    CHECK(std::abs(es.eigenvalues()(i).real()) < 1e-10);
}

TEST_CASE("full generator has a unique stationary direction") {
  const PhysicalParams p = params_set1();
  const FrameParams f = derive_frame(p);
  const SpaceSpec space(3, 3);
  const ControlSystem cs = make_control_system(p, f, space, true);
  const Mat L = cs.slot_generator(-1000.0, 0.0, 0.0);
  Eigen::ComplexEigenSolver<Mat> es(L);
  int near_zero = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const cplx lam = es.eigenvalues()(i);
    if (std::abs(lam) <= 1e-9) ++near_zero;
    else CHECK(lam.real() < 0.0);
  }
  CHECK(near_zero == 1);
  CHECK(trace_functional_residual({L, space.total()}) <= 1e-10);
}

TEST_CASE("vectorize rejects non-Hermitian input") {
  Mat h = Mat::Zero(2, 2);
  h(0, 1) = 1.0;
  CHECK_THROWS_AS(vectorize_liouvillian(h, std::vector<Mat>{}), std::invalid_argument);
}

TEST_CASE("propagator basics") {
  const double kappa = 0.9;
  const Mat a = annihilator(2);
  const SuperOp L = vectorize_liouvillian(Mat::Zero(2, 2), {std::sqrt(kappa) * a});

  const SuperOp id = propagator(L, 0.0);
  CHECK((id.mat - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-15);

  // population decays by e^{-1} after 1/kappa
  const SuperOp F = propagator(L, 1.0 / kappa);
  Mat excited = Mat::Zero(2, 2);
  excited(1, 1) = 1.0;
  const Mat rho = unvec_state(F.mat * vec_state(excited), 2);
  CHECK(rho(1, 1).real() == Approx(std::exp(-1.0)).epsilon(1e-10));

  CHECK_THROWS_AS(propagator(L, -1.0), std::invalid_argument);
}

TEST_CASE("matrix exponential agrees with the Pade reference") {
  const PhysicalParams p = params_set1();
  const FrameParams f = derive_frame(p);
  const SpaceSpec space(3, 3);
  const ControlSystem cs = make_control_system(p, f, space, true);
  const Mat L = cs.slot_generator(-480.0, 21.0, -13.0);
  const Mat ours = cs.slot_exponential(0.005, -480.0, 21.0, -13.0);
  const Mat pade = (0.005 * L).exp();
  CHECK((ours - pade).norm() / pade.norm() < 1e-11);

  // dense path too
  const Mat h = random_hermitian(6, 3);
  const Mat d1 = expm(Mat(cplx(0, -1) * h));
  const Mat d2 = (Mat(cplx(0, -1) * h)).exp();
  CHECK((d1 - d2).norm() / d2.norm() < 1e-12);
}

TEST_CASE("propagators compose as a semigroup") {
  const PhysicalParams p = params_set1();
  const FrameParams f = derive_frame(p);
  const SpaceSpec space(3, 3);
  const ControlSystem cs = make_control_system(p, f, space, true);
  const SuperOp L{cs.slot_generator(120.0, 8.0, -3.0), space.total()};
  const Mat f1 = propagator(L, 0.005).mat;
  const Mat f2 = propagator(L, 0.0125).mat;
  const Mat f3 = propagator(L, 0.0175).mat;
  CHECK((f2 * f1 - f3).norm() <= 1e-9 * f3.norm());
}

TEST_CASE("trace and Hermiticity preservation, complete positivity") {
  const PhysicalParams p = params_set1();
  const FrameParams f = derive_frame(p);
  const SpaceSpec space(3, 3);
  const ControlSystem cs = make_control_system(p, f, space, true);
  const int n = space.total();
  const Mat F = cs.slot_exponential(0.008, -310.0, 14.0, 9.0);

  // trace functional is a left fixed point
  const Vec tr = vec_state(Mat::Identity(n, n));
  CHECK(((tr.adjoint() * F).transpose() - tr).norm() <= 1e-9 * tr.norm());

  // Hermiticity preservation
  const Mat h = random_hermitian(n, 5);
  const Mat out = unvec_state(F * vec_state(h), n);
  CHECK((out - out.adjoint()).cwiseAbs().maxCoeff() <= 1e-10 * out.cwiseAbs().maxCoeff());

  // Choi matrix of the slot map is positive semidefinite
  Eigen::SelfAdjointEigenSolver<Mat> es(choi_matrix(F, n), Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues().minCoeff() >= -1e-8);
}

TEST_CASE("one-sided propagator derivative") {
  const Mat h = random_hermitian(3, 7);
  const Mat hsup = hamiltonian_superop(h);
  const SuperOp zero{Mat::Zero(9, 9), 3};

  // L = 0: derivative approaches -i tau H_hat
  const double tau = 1e-3;
  const SuperOp d = propagator_derivative(zero, hsup, tau, 1e-6);
  const Mat expected = cplx(0, -tau) * hsup;
  CHECK((d.mat - expected).norm() / expected.norm() < 1e-5);

  CHECK_THROWS_AS(propagator_derivative(zero, hsup, tau, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(propagator_derivative(zero, hsup, tau, -1e-6), std::invalid_argument);
}

TEST_CASE("derivative error scales linearly in the step") {
  const PhysicalParams p = params_set1();
  const FrameParams f = derive_frame(p);
  const SpaceSpec space(2, 2);
  const ControlSystem cs = make_control_system(p, f, space, true);
  const SuperOp L{cs.slot_generator(40.0, 6.0, 2.0), space.total()};
  const double tau = 0.004;
  const Mat base = propagator(L, tau).mat;

  // high-accuracy reference: central difference at a small step
  const Mat& hs = cs.control_hsuper[1];
  const double h = 1e-6;
  const Mat plus = expm(Mat(tau * (L.mat - cplx(0, h) * hs)));
  const Mat minus = expm(Mat(tau * (L.mat + cplx(0, h) * hs)));
  const Mat reference = (plus - minus) / (2 * h);

  const Mat d1 = propagator_derivative(L, hs, tau, 1e-4, &base).mat;
  const Mat d2 = propagator_derivative(L, hs, tau, 2e-4, &base).mat;
  const double e1 = (d1 - reference).norm();
  const double e2 = (d2 - reference).norm();
  CHECK(e2 / e1 == Approx(2.0).margin(0.25));  // leading error term is O(delta)

  // one-sided at the production step agrees with the central-difference oracle
  const Mat d6 = propagator_derivative(L, hs, tau, 1e-6, &base).mat;
  CHECK((d6 - reference).norm() / reference.norm() < 1e-5);
}

TEST_CASE("spectral derivative on normal generators") {
  const PhysicalParams p = params_set1();
  const FrameParams f = derive_frame(p);
  const SpaceSpec space(2, 2);
  const ControlSystem closed = make_control_system(p, f, space, false);
  const SuperOp L{closed.slot_generator(25.0, 10.0, -4.0), space.total()};
  const double tau = 0.006;

  const Mat spec = propagator_derivative_spectral(L, closed.control_hsuper[2], tau).mat;
  const Mat fd = propagator_derivative(L, closed.control_hsuper[2], tau, 1e-7).mat;
  CHECK((spec - fd).norm() / spec.norm() < 1e-7);

  // tau = 0 gives the zero matrix
  const Mat z = propagator_derivative_spectral(L, closed.control_hsuper[2], 0.0).mat;
  CHECK(z.cwiseAbs().maxCoeff() < 1e-14);

  // commuting case: d/du exp(tau(L - i u H_hat)) = -i tau H_hat F
  const Mat number = embed(number_op(2), Subsystem::cavity, space);
  const Mat drift = two_pi * 3.0 * number;
  const SuperOp Lc = vectorize_liouvillian(drift, std::vector<Mat>{});
  const Mat hsup = hamiltonian_superop(embed(number_op(2), Subsystem::oscillator, space));
  const Mat dc = propagator_derivative_spectral(Lc, hsup, tau).mat;
  const Mat expected = cplx(0, -tau) * hsup * propagator(Lc, tau).mat;
  CHECK((dc - expected).norm() / expected.norm() < 1e-10);

  // dissipative generators are rejected
  const ControlSystem open_cs = make_control_system(p, f, space, true);
  const SuperOp Lo{open_cs.slot_generator(25.0, 10.0, -4.0), space.total()};
  CHECK_THROWS_AS(propagator_derivative_spectral(Lo, open_cs.control_hsuper[0], tau),
                  normality_violation);
}

TEST_CASE("closed-system slot maps conserve purity") {
  const PhysicalParams p = params_set1();
  const FrameParams f = derive_frame(p);
  const SpaceSpec space(3, 3);
  const ControlSystem closed = make_control_system(p, f, space, false);
  const int n = space.total();
  const Vec psi = fock_state(space, 1, 1, 0);
  Mat rho = psi * psi.adjoint();
  for (int k = 0; k < 12; ++k) {
    const Mat F = closed.slot_exponential(0.004, -150.0 + 30.0 * k, 11.0, -7.0);
    rho = unvec_state(F * vec_state(rho), n);
  }
  CHECK((rho * rho).trace().real() == Approx(1.0).margin(1e-9));
}

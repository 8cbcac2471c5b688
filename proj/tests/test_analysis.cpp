#include <catch2/catch_amalgamated.hpp>

#include "hoc/analysis.hpp"
#include "hoc/expm.hpp"

using namespace hoc;
using Catch::Approx;

namespace {

Mat density_from(const Vec& psi) { return psi * psi.adjoint(); }

Mat thermal_state(int dim, double x) {
  Mat rho = Mat::Zero(dim, dim);
  double norm = 0;
  for (int n = 0; n < dim; ++n) norm += std::pow(x, n);
  for (int n = 0; n < dim; ++n) rho(n, n) = std::pow(x, n) / norm;
  return rho;
}

Mat random_density(int dim, unsigned seed) {
  std::srand(seed);
  const Mat g = Mat::Random(dim, dim);
  Mat rho = g * g.adjoint();
  return rho / rho.trace().real();
}

}  // namespace

TEST_CASE("partial trace recovers product factors") {
  const SpaceSpec space(3, 3);
  Mat rho_a = Mat::Zero(2, 2);
  rho_a(1, 1) = 1.0;
  const Mat rho_c = random_density(3, 1);
  const Mat rho_o = random_density(3, 2);
  const Mat full = kron(rho_a, kron(rho_c, rho_o));

  CHECK((partial_trace(full, space, {Subsystem::cavity}) - rho_c).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((partial_trace(full, space, {Subsystem::oscillator}) - rho_o).cwiseAbs().maxCoeff() <
        1e-12);
  const Mat co = partial_trace(full, space, {Subsystem::cavity, Subsystem::oscillator});
  CHECK((co - kron(rho_c, rho_o)).cwiseAbs().maxCoeff() < 1e-12);

  // trace preserved
  const Mat any = random_density(space.total(), 3);
  CHECK(partial_trace(any, space, {Subsystem::oscillator}).trace().real() ==
        Approx(any.trace().real()));

  CHECK_THROWS_AS(partial_trace(any, space, {}), std::invalid_argument);
}

TEST_CASE("noon state reduces to the maximally mixed marginal") {
  const SpaceSpec space(3, 3);
  const Vec noon = (fock_state(space, 0, 0, 1) + fock_state(space, 0, 1, 0)) / std::sqrt(2.0);
  const Mat osc = partial_trace(density_from(noon), space, {Subsystem::oscillator});
  CHECK(osc(0, 0).real() == Approx(0.5));
  CHECK(osc(1, 1).real() == Approx(0.5));
  CHECK(std::abs(osc(0, 1)) < 1e-14);
}

TEST_CASE("lift is the adjoint of partial trace") {
  const SpaceSpec space(2, 3);
  const Mat x = random_density(space.total(), 4);
  const Mat a = random_density(3, 5);  // operator on the oscillator factor
  const double lhs = (lift_operator(a, space, {Subsystem::oscillator}).adjoint() * x)
                         .trace()
                         .real();
  const double rhs =
      (a.adjoint() * partial_trace(x, space, {Subsystem::oscillator})).trace().real();
  CHECK(lhs == Approx(rhs).epsilon(1e-12));
}

TEST_CASE("fidelity endpoints") {
  Vec psi = Vec::Zero(3);
  psi(1) = 1.0;
  CHECK(fidelity(density_from(psi), psi) == Approx(1.0));
  Vec orth = Vec::Zero(3);
  orth(0) = 1.0;
  CHECK(fidelity(density_from(orth), psi) == Approx(0.0).margin(1e-15));
  CHECK(fidelity(Mat::Identity(3, 3) / 3.0, psi) == Approx(1.0 / 3.0));
  CHECK_THROWS_AS(fidelity(Mat::Identity(4, 4), psi), std::invalid_argument);
}

TEST_CASE("Wigner function of vacuum and the first Fock state") {
  Mat vac = Mat::Zero(3, 3);
  vac(0, 0) = 1.0;
  const WignerGrid gv = wigner(vac, 4.0, 101);
  const int c = 50;  // center index
  CHECK(gv.values(c, c) == Approx(2.0 / EIGEN_PI).epsilon(1e-10));
  CHECK(gv.integral == Approx(1.0).margin(2e-3));
  CHECK(gv.integral_abs == Approx(1.0).margin(2e-3));

  Mat one = Mat::Zero(3, 3);
  one(1, 1) = 1.0;
  const WignerGrid g1 = wigner(one, 4.0, 101);
  CHECK(g1.values(c, c) == Approx(-2.0 / EIGEN_PI).epsilon(1e-10));
  CHECK(g1.integral == Approx(1.0).margin(2e-3));
}

TEST_CASE("mana of the first Fock state matches the closed form") {
  Mat one = Mat::Zero(10, 10);
  one(1, 1) = 1.0;
  const WignerGrid g = wigner(one, 4.0, 201);
  // integral of |W| for |1>: 4 e^{-1/2} - 1
  CHECK(g.integral_abs == Approx(4.0 * std::exp(-0.5) - 1.0).margin(0.002));
  const ManaResult m = cv_mana(g);
  CHECK(m.raw == Approx(0.355).margin(0.005));
  CHECK(m.clamped == m.raw);
}

TEST_CASE("classical states carry zero mana") {
  Mat vac = Mat::Zero(3, 3);
  vac(0, 0) = 1.0;
  CHECK(cv_mana(vac).clamped == Approx(0.0).margin(1e-3));

  CHECK(cv_mana(thermal_state(8, 0.4)).clamped == Approx(0.0).margin(1e-3));

  // coherent state |alpha = 0.8>
  const int d = 12;
  const Mat a = annihilator(d);
  const Mat disp = expm(Mat(0.8 * a.adjoint() - 0.8 * a));
  Vec alpha = disp.col(0);
  CHECK(cv_mana(density_from(alpha)).clamped == Approx(0.0).margin(1e-3));
}

TEST_CASE("a too-small grid is reported") {
  // thermal state with large occupation spills past extent 1
  CHECK_THROWS_AS(cv_mana(thermal_state(12, 0.8), 1.0, 41), grid_too_small);
}

TEST_CASE("Wigner transform is linear in the state") {
  const Mat r1 = random_density(3, 6);
  const Mat r2 = random_density(3, 7);
  const double w = 0.3;
  const WignerGrid ga = wigner(Mat(w * r1 + (1 - w) * r2), 3.0, 41);
  const WignerGrid g1 = wigner(r1, 3.0, 41);
  const WignerGrid g2 = wigner(r2, 3.0, 41);
  const Eigen::MatrixXd mix = w * g1.values + (1 - w) * g2.values;
  CHECK((ga.values - mix).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("mana converges in the grid resolution") {
  Mat one = Mat::Zero(6, 6);
  one(1, 1) = 1.0;
  const double m1 = cv_mana(one, 4.0, 201).raw;
  const double m2 = cv_mana(one, 4.0, 402).raw;
  CHECK(std::abs(m2 - m1) <= 1e-3);
}

TEST_CASE("log negativity of the entangled target is one") {
  // (|01> + |10>)/sqrt(2) between two 3-level modes
  Vec psi = Vec::Zero(9);
  psi(0 * 3 + 1) = 1.0 / std::sqrt(2.0);
  psi(1 * 3 + 0) = 1.0 / std::sqrt(2.0);
  CHECK(log_negativity(density_from(psi), 3, 3) == Approx(1.0).margin(1e-9));
}

TEST_CASE("product states have zero log negativity") {
  const Mat rho = kron(random_density(3, 8), random_density(3, 9));
  CHECK(log_negativity(rho, 3, 3) == Approx(0.0).margin(1e-12));
}

TEST_CASE("maximally entangled qubit pair inside 3-level modes") {
  Vec psi = Vec::Zero(9);
  psi(0 * 3 + 0) = 1.0 / std::sqrt(2.0);
  psi(1 * 3 + 1) = 1.0 / std::sqrt(2.0);
  CHECK(log_negativity(density_from(psi), 3, 3) == Approx(1.0).margin(1e-9));
}

TEST_CASE("log negativity is invariant under local rotations") {
  Vec psi = Vec::Zero(9);
  psi(0 * 3 + 1) = 1.0 / std::sqrt(2.0);
  psi(1 * 3 + 0) = 1.0 / std::sqrt(2.0);
  const Mat rho = density_from(psi);
  const double base = log_negativity(rho, 3, 3);
  std::srand(10);
  for (int rep = 0; rep < 4; ++rep) {
    const Mat h1 = Mat::Random(3, 3);
    const Mat h2 = Mat::Random(3, 3);
    const Mat u1 = expm(Mat(cplx(0, 1) * 0.5 * (h1 + h1.adjoint())));
    const Mat u2 = expm(Mat(cplx(0, 1) * 0.5 * (h2 + h2.adjoint())));
    const Mat u = kron(u1, u2);
    CHECK(log_negativity(u * rho * u.adjoint(), 3, 3) == Approx(base).margin(1e-9));
  }
}

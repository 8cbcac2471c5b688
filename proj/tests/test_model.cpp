#include <catch2/catch_amalgamated.hpp>

#include "hoc/model.hpp"

using namespace hoc;
using Catch::Approx;

TEST_CASE("thermal quantities reproduce the published sets") {
  const ThermalParams t1 = thermal(params_set1());
  CHECK(t1.x == Approx(0.97).margin(0.005));
  CHECK(t1.n_bar == Approx(32.3).epsilon(0.01));
  CHECK(t1.gamma_eff == Approx(5.0e-3).epsilon(0.01));  // 5.0 kHz

  const ThermalParams t2 = thermal(params_set2());
  CHECK(t2.x == Approx(0.93).margin(0.005));
  CHECK(t2.n_bar == Approx(12.6).epsilon(0.01));
  CHECK(t2.gamma_eff == Approx(2.0e-3).epsilon(0.025));  // 2.0 kHz at 2-digit rounding
}

TEST_CASE("phonon number and effective decay grow with temperature") {
  PhysicalParams p = params_set1();
  double prev_n = 0, prev_g = 0;
  for (double temp : {10e-3, 25e-3, 100e-3, 1.0, 10.0}) {
    p.temperature = temp;
    const ThermalParams t = thermal(p);
    CHECK(t.x < 1.0);
    CHECK(t.n_bar > prev_n);
    CHECK(t.gamma_eff > prev_g);
    prev_n = t.n_bar;
    prev_g = t.gamma_eff;
  }
}

TEST_CASE("frame derivation matches the published shifts and drive") {
  const PhysicalParams p1 = params_set1();
  const FrameParams f1 = derive_frame(p1);
  CHECK(f1.re_r == Approx(7.5).epsilon(0.01));
  CHECK(f1.im_r == Approx(3.6e-5).epsilon(0.02));
  CHECK(f1.E == Approx(3180.0).epsilon(0.01));          // 3.18 GHz
  CHECK(-2 * p1.g_co * f1.re_r == Approx(-0.18).epsilon(0.01));
  CHECK(f1.delta_prime == -p1.Om);
  CHECK(f1.delta_R_prime == -500.0);

  const PhysicalParams p2 = params_set2();
  const FrameParams f2 = derive_frame(p2);
  CHECK(f2.re_r == Approx(2.7).epsilon(0.01));
  CHECK(f2.im_r == Approx(1.3e-5).epsilon(0.02));
  CHECK(f2.E == Approx(3820.0).epsilon(0.01));          // 3.82 GHz
  CHECK(-2 * p2.g_co * f2.re_r == Approx(-0.016).epsilon(0.02));
}

TEST_CASE("shift equations hold at the derived point") {
  for (const PhysicalParams& p : {params_set1(), params_set2()}) {
    const FrameParams f = derive_frame(p);
    CHECK(frame_residual(p, f) <= 1e-10);
    // gamma' << Om limit: r is close to g0 s^2 / Om
    const double approx_r = p.g_co * p.s * p.s / p.Om;
    CHECK(std::abs(f.re_r - approx_r) / f.re_r <= 1e-4);
  }
}

TEST_CASE("vanishing cavity linewidth pushes the drive into the phase quadrature") {
  PhysicalParams p = params_set1();
  p.kappa = 1e-9;
  const FrameParams f = derive_frame(p);
  CHECK(std::abs(f.eta) == Approx(two_pi / 2).margin(1e-9));
  CHECK(f.E == Approx(2 * p.s * p.Om).epsilon(1e-9));
}

TEST_CASE("parameter ratio table") {
  const Diagnostics d1 = diagnostics(params_set1());
  CHECK(d1.sideband_resolution == Approx(15.9).epsilon(0.02));
  CHECK(d1.co_cooperativity == Approx(298).epsilon(0.02));
  CHECK(d1.co_coupling_dissipation == Approx(1.2).epsilon(0.02));
  CHECK(d1.ac_cooperativity == Approx(156).epsilon(0.02));
  CHECK(d1.ac_coupling_dissipation == Approx(12.5).epsilon(0.02));

  const Diagnostics d2 = diagnostics(params_set2());
  CHECK(d2.sideband_resolution == Approx(79.5).epsilon(0.02));
  CHECK(d2.co_cooperativity == Approx(343).epsilon(0.02));
  CHECK(d2.co_coupling_dissipation == Approx(1.8).epsilon(0.02));
  CHECK(d2.ac_cooperativity == Approx(781).epsilon(0.02));
  CHECK(d2.ac_coupling_dissipation == Approx(12.5).epsilon(0.02));
}

TEST_CASE("sideband resolution of exactly one at kappa = Om") {
  PhysicalParams p = params_set1();
  p.kappa = p.Om;
  CHECK(diagnostics(p).sideband_resolution == Approx(1.0));
}

TEST_CASE("rotating-term significance table") {
  {
    const PhysicalParams p = params_set1();
    const RwaSignificance r = rwa_significance(p, derive_frame(p));
    CHECK(r.drive_co_rotating == Approx(99).epsilon(0.05));
    CHECK(r.drive_counter_rotating == Approx(0.078).epsilon(0.05));
    CHECK(r.control_counter_rotating == Approx(0.00082).epsilon(0.05));
    CHECK(r.g_co_nonlinear == Approx(0.00075).epsilon(0.05));
    CHECK(r.g_co_two_mode_squeezing == Approx(0.038).epsilon(0.05));
    CHECK(r.g_ac_counter_rotating == Approx(0.00063).epsilon(0.05));
    CHECK(r.g_ac_shift_counter_rotating == Approx(0.063).epsilon(0.05));
  }
  {
    const PhysicalParams p = params_set2();
    const RwaSignificance r = rwa_significance(p, derive_frame(p));
    CHECK(r.drive_co_rotating == Approx(120).epsilon(0.05));
    CHECK(r.drive_counter_rotating == Approx(0.094).epsilon(0.05));
    CHECK(r.control_counter_rotating == Approx(0.00098).epsilon(0.05));
    CHECK(r.g_co_nonlinear == Approx(0.00019).epsilon(0.05));
    CHECK(r.g_co_two_mode_squeezing == Approx(0.011).epsilon(0.05));
    CHECK(r.g_ac_counter_rotating == Approx(0.00063).epsilon(0.05));
    CHECK(r.g_ac_shift_counter_rotating == Approx(0.076).epsilon(0.05));
  }
}

TEST_CASE("suppressed drive zeroes the laser significance entries") {
  const PhysicalParams p = params_set1();
  FrameParams f = derive_frame(p);
  f.E = 0.0;
  const RwaSignificance r = rwa_significance(p, f);
  CHECK(r.drive_co_rotating == 0.0);
  CHECK(r.drive_counter_rotating == 0.0);
}

TEST_CASE("parameter validation") {
  PhysicalParams p = params_set1();
  p.kappa = -1.0;
  CHECK_THROWS_AS(p.validate(), config_error);
  p = params_set1();
  p.wa_min = p.wa_max;
  CHECK_THROWS_AS(p.validate(), config_error);
  CHECK_THROWS_AS(params_preset("set3"), config_error);
}

#pragma once

// Physical parameter sets, the transformed-frame derivation and the
// diagnostic ratio tables for the hybrid atom-cavity-oscillator device.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "hoc/units.hpp"

namespace hoc {

/// Lab-frame device constants. All frequencies ordinary MHz, temperature in K.
struct PhysicalParams {
  double wa_min = 9000.0;   // atom tuning range, lower edge
  double wa_max = 13500.0;  // atom tuning range, upper edge
  double wc = 10188.0;      // cavity resonance
  double Om = 15.9;         // oscillator resonance
  double g_ac = 12.5;       // atom-cavity coupling
  double g_co = 0.012;      // cavity-oscillator coupling (boosted single-photon value)
  double kappa_a = 1.0;     // atom decay rate
  double kappa = 1.0;       // cavity decay rate
  double gamma = 150e-6;    // oscillator decay rate
  double temperature = 25e-3;  // K
  double s = 100.0;         // coupling enhancement factor (cavity shift magnitude)
  double R_max = 32.0;      // atom control amplitude bound, per quadrature

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0)) throw config_error(std::string("parameter ") + name + " must be positive");
    };
    positive(wa_min, "wa_min");
    positive(wa_max, "wa_max");
    positive(wc, "wc");
    positive(Om, "Om");
    positive(g_ac, "g_ac");
    positive(g_co, "g_co");
    positive(kappa_a, "kappa_a");
    positive(kappa, "kappa");
    positive(gamma, "gamma");
    positive(temperature, "temperature");
    positive(s, "s");
    positive(R_max, "R_max");
    if (wa_min >= wa_max) throw config_error("atom tuning range is empty");
  }
};

/// Table III, Set 1: s = 100, g0/(2pi) boosted to 12 kHz, kappa/(2pi) = 1 MHz, T = 25 mK.
inline PhysicalParams params_set1() { return PhysicalParams{}; }

/// Table III, Set 2: s = 120, g0/(2pi) = 3 kHz, kappa/(2pi) = 0.2 MHz, T = 10 mK.
inline PhysicalParams params_set2() {
  PhysicalParams p;
  p.g_co = 0.003;
  p.kappa = 0.2;
  p.temperature = 10e-3;
  p.s = 120.0;
  p.R_max = 38.0;
  return p;
}

inline PhysicalParams params_preset(const std::string& name) {
  if (name == "set1") return params_set1();
  if (name == "set2") return params_set2();
  throw config_error("unknown preset '" + name + "' (expected set1 or set2)");
}

struct ThermalParams {
  double x;          // oscillator Boltzmann factor exp(-hbar Om / kT)
  double n_bar;      // mean phonon number x/(1-x)
  double gamma_eff;  // effective decay gamma*(n_bar+1), MHz
};

inline ThermalParams thermal(const PhysicalParams& p) {
  if (!(p.temperature > 0)) throw config_error("temperature must be positive");
  // hbar*Omega = h*f with f the ordinary frequency.
  const double x = std::exp(-planck_h * p.Om * 1e6 / (boltzmann_k * p.temperature));
  const double n_bar = x / (1.0 - x);
  return {x, n_bar, p.gamma * (n_bar + 1.0)};
}

/// Transformed-frame quantities fixed by the shift/rotation solve.
struct FrameParams {
  double re_r;           // oscillator shift, real part
  double im_r;           // oscillator shift, imaginary part
  double eta;            // cavity rotation angle, rad
  double E;              // laser drive amplitude, MHz
  double delta_prime;    // shifted laser detuning wl - wc', MHz (= -Om)
  double wc_prime;       // shifted cavity frequency, MHz
  double delta_R_prime;  // atomic-drive detuning wr - wc', MHz

  double wr() const { return wc_prime + delta_R_prime; }
  double wl() const { return wc_prime + delta_prime; }
};

/// Solve the shift equations with s given and the drive amplitude E free,
/// picking the red-detuned (hopping) operating point delta' = -Om.
inline FrameParams derive_frame(const PhysicalParams& p) {
  const ThermalParams th = thermal(p);
  const double damp = (1.0 - th.x) * th.gamma_eff / 2.0;
  FrameParams f;
  // linear 2x2 system: g0 s^2 = (Om + damp^2/Om) re(r),  Om im(r) = damp re(r)
  f.re_r = p.g_co * p.s * p.s / (p.Om + damp * damp / p.Om);
  f.im_r = damp / p.Om * f.re_r;
  f.wc_prime = p.wc - 2.0 * p.g_co * f.re_r;
  f.delta_prime = -p.Om;
  f.E = 2.0 * p.s * std::hypot(f.delta_prime, p.kappa / 2.0);
  f.eta = std::atan2(-p.kappa / 2.0, f.delta_prime);
  f.delta_R_prime = -500.0;  // drive sits 500 MHz below the shifted cavity resonance
  return f;
}

/// Largest relative residual of the four shift equations at (r, eta, E).
inline double frame_residual(const PhysicalParams& p, const FrameParams& f) {
  const ThermalParams th = thermal(p);
  const double damp = (1.0 - th.x) * th.gamma_eff / 2.0;
  const double delta = f.delta_prime - 2.0 * p.g_co * f.re_r;  // bare detuning wl - wc
  double worst = 0.0;
  auto rel = [&](double lhs, double rhs) {
    const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
    worst = std::max(worst, std::abs(lhs - rhs) / scale);
  };
  rel(f.E / 2.0 * std::cos(f.eta), (delta + 2.0 * p.g_co * f.re_r) * p.s);
  rel(f.E / 2.0 * std::sin(f.eta), -p.kappa / 2.0 * p.s);
  rel(p.g_co * p.s * p.s, p.Om * f.re_r + damp * f.im_r);
  rel(p.Om * f.im_r, damp * f.re_r);
  return worst;
}

/// Table IV ratios.
struct Diagnostics {
  double sideband_resolution;        // Om/kappa
  double co_cooperativity;           // |g0 s|^2/(kappa gamma n_bar)
  double co_coupling_dissipation;    // |g0 s|/max(kappa, gamma)
  double ac_cooperativity;           // g^2/(kappa kappa_a)
  double ac_coupling_dissipation;    // g/max(kappa, kappa_a)
};

inline Diagnostics diagnostics(const PhysicalParams& p) {
  const ThermalParams th = thermal(p);
  const double gs = std::abs(p.g_co * p.s);
  return {
      p.Om / p.kappa,
      gs * gs / (p.kappa * p.gamma * th.n_bar),
      gs / std::max(p.kappa, p.gamma),
      p.g_ac * p.g_ac / (p.kappa * p.kappa_a),
      p.g_ac / std::max(p.kappa, p.kappa_a),
  };
}

/// Table V significance estimates for the terms handled by rotating-wave steps.
/// min(wa) is the lower edge of the atom tuning range.
struct RwaSignificance {
  double drive_co_rotating;       // E/(2|wl - wc|)
  double drive_counter_rotating;  // E/(2|wl + wc|)
  double control_counter_rotating;  // R/(2|wr + min(wa)|)
  double g_co_nonlinear;          // g0/Om
  double g_co_two_mode_squeezing; // |g0 s|/|2 delta'|
  double g_ac_counter_rotating;   // g/|min(wa) + wc'|
  double g_ac_shift_counter_rotating;  // |g s|/|min(wa) + wl|
};

inline RwaSignificance rwa_significance(const PhysicalParams& p, const FrameParams& f) {
  const double wl = f.wl();
  const double wr = f.wr();
  return {
      f.E / (2.0 * std::abs(wl - p.wc)),
      f.E / (2.0 * std::abs(wl + p.wc)),
      p.R_max / (2.0 * std::abs(wr + p.wa_min)),
      p.g_co / p.Om,
      std::abs(p.g_co * p.s) / std::abs(2.0 * f.delta_prime),
      p.g_ac / std::abs(p.wa_min + f.wc_prime),
      std::abs(p.g_ac * p.s) / std::abs(p.wa_min + wl),
  };
}

}  // namespace hoc

#pragma once

// Three-segment pi-pulse excitation-transfer baseline: excite the atom on the
// drive carrier, swap to the cavity on resonance, then park the atom and let
// the excitation hop into the oscillator.

#include <array>
#include <cmath>
#include <functional>
#include <map>

#include "hoc/dynamics.hpp"

namespace hoc {

struct PiPulsePlan {
  double t1 = 0.0, t2 = 0.0, t3 = 0.0;  // segment durations, us
  double amp = 0.0;                     // atomX amplitude during segment 1, MHz
  double resonance_detuning = 500.0;    // u_detuning putting the atom on the cavity
  double park_detuning = -1000.0;       // far-detuned parking value
};

/// Analytic starting plan: a pi rotation at full drive amplitude, a quarter
/// vacuum-Rabi period, and a quarter period of the boosted hopping coupling.
inline PiPulsePlan nominal_pi_plan(const PhysicalParams& p, const FrameParams& f) {
  PiPulsePlan plan;
  plan.amp = p.R_max;
  plan.t1 = 1.0 / (2.0 * plan.amp);
  plan.t2 = 1.0 / (4.0 * p.g_ac);
  plan.t3 = 1.0 / (4.0 * p.g_co * p.s);
  plan.resonance_detuning = f.wc_prime - f.wr();
  return plan;
}

struct PiSequenceReport {
  std::array<int, 3> slots;            // whole-slot segment lengths
  std::array<double, 3> rounded;       // realized durations after rounding
  std::array<double, 3> requested;     // plan durations before rounding
};

/// Realize the plan on the slot grid. Durations are rounded to whole slots;
/// a segment shorter than half a slot is rejected.
inline ControlSequence build_pi_sequence(const PiPulsePlan& plan, double tau,
                                         ChannelBounds bounds = {},
                                         PiSequenceReport* report = nullptr) {
  const std::array<double, 3> req{plan.t1, plan.t2, plan.t3};
  std::array<int, 3> slots{};
  for (int s = 0; s < 3; ++s) {
    slots[s] = int(std::lround(req[s] / tau));
    if (slots[s] < 1)
      throw std::invalid_argument("build_pi_sequence: segment shorter than one slot");
  }
  ControlSequence seq = ControlSequence::zeros(slots[0] + slots[1] + slots[2], tau, bounds);
  int k = 0;
  for (int i = 0; i < slots[0]; ++i, ++k) {
    seq.u(k, 0) = 0.0;  // atom on the drive carrier
    seq.u(k, 1) = plan.amp;
  }
  for (int i = 0; i < slots[1]; ++i, ++k) seq.u(k, 0) = plan.resonance_detuning;
  for (int i = 0; i < slots[2]; ++i, ++k) seq.u(k, 0) = plan.park_detuning;
  if (report) *report = {slots, {slots[0] * tau, slots[1] * tau, slots[2] * tau}, req};
  return seq;
}

struct PiTuneResult {
  PiPulsePlan plan;                    // durations snapped to the slot grid
  std::array<int, 3> slots;
  std::array<double, 3> objectives;    // atom / cavity / oscillator transfer, per stage
  std::array<bool, 3> grid_fallback;   // true where the bracket was not unimodal
};

namespace detail {

/// Maximize f over integers in [lo, hi] by golden-section, falling back to a
/// 21-point grid when the bracket does not look unimodal.
inline std::pair<int, bool> golden_max_int(const std::function<double(int)>& f, int lo, int hi) {
  std::map<int, double> memo;
  auto eval = [&](int m) {
    auto it = memo.find(m);
    if (it != memo.end()) return it->second;
    const double v = f(m);
    memo.emplace(m, v);
    return v;
  };
  bool fallback = false;
  const int mid = (lo + hi) / 2;
  if (hi - lo >= 4 && eval(mid) < std::max(eval(lo), eval(hi))) {
    fallback = true;
    int best = lo;
    for (int i = 0; i <= 20; ++i) {
      const int m = lo + int(std::lround(i * double(hi - lo) / 20.0));
      if (eval(m) > eval(best)) best = m;
    }
    // refine around the grid winner
    lo = std::max(lo, best - std::max(1, (hi - lo) / 20));
    hi = std::min(hi, best + std::max(1, (hi - lo) / 20));
  }
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  while (b - a > 1.0) {
    if (eval(int(std::lround(c))) > eval(int(std::lround(d)))) {
      b = d;
      d = c;
      c = b - gr * (b - a);
    } else {
      a = c;
      c = d;
      d = a + gr * (b - a);
    }
  }
  int best = int(std::lround(0.5 * (a + b)));
  for (int m = std::max(lo, best - 2); m <= std::min(hi, best + 2); ++m)
    if (eval(m) > eval(best)) best = m;
  return {best, fallback};
}

}  // namespace detail

/// Sequentially maximize the per-stage population transfer over the three
/// segment durations (two sweeps, whole-slot resolution): atom excited
/// population after segment 1, cavity |1> after segment 2, oscillator |1>
/// after segment 3, each propagated with the full dissipative generator.
inline PiTuneResult tune_pi_sequence(const PiPulsePlan& plan0, const ControlSystem& cs,
                                     const Mat& rho0, double tau) {
  const SpaceSpec& sp = cs.space;
  const Vec v0 = vec_state(rho0);
  PropagatorCache cache;
  const Mat& f_drive = cache.get(cs, tau, 0.0, plan0.amp, 0.0);
  const Mat& f_swap = cache.get(cs, tau, plan0.resonance_detuning, 0.0, 0.0);
  const Mat& f_park = cache.get(cs, tau, plan0.park_detuning, 0.0, 0.0);
  const std::array<const Mat*, 3> seg_props{&f_drive, &f_swap, &f_park};

  const Mat proj_atom = level_projector(sp, Subsystem::atom, 1);
  const Mat proj_cav = level_projector(sp, Subsystem::cavity, 1);
  const Mat proj_osc = level_projector(sp, Subsystem::oscillator, 1);
  const std::array<Vec, 3> meters{vec_state(proj_atom), vec_state(proj_cav), vec_state(proj_osc)};

  std::array<int, 3> slots;
  for (int s = 0; s < 3; ++s) {
    const double nominal = (s == 0 ? plan0.t1 : s == 1 ? plan0.t2 : plan0.t3);
    slots[s] = std::max(1, int(std::lround(nominal / tau)));
  }

  auto advance = [](const Mat& f, Vec v, int m) {
    for (int i = 0; i < m; ++i) v = f * v;
    return v;
  };

  PiTuneResult result;
  result.grid_fallback = {false, false, false};
  for (int sweep = 0; sweep < 2; ++sweep) {
    for (int s = 0; s < 3; ++s) {
      Vec v_in = v0;
      for (int prev = 0; prev < s; ++prev) v_in = advance(*seg_props[prev], v_in, slots[prev]);
      auto objective = [&](int m) {
        const Vec v = advance(*seg_props[s], v_in, m);
        return (meters[s].adjoint() * v).value().real();
      };
      const double nominal = (s == 0 ? plan0.t1 : s == 1 ? plan0.t2 : plan0.t3);
      const int lo = std::max(1, int(std::lround(0.3 * nominal / tau)));
      const int hi = std::max(lo + 2, int(std::lround(2.0 * nominal / tau)));
      auto [best, fb] = detail::golden_max_int(objective, lo, hi);
      slots[s] = best;
      result.grid_fallback[s] = result.grid_fallback[s] || fb;
      result.objectives[s] = objective(best);
    }
  }
  result.slots = slots;
  result.plan = plan0;
  result.plan.t1 = slots[0] * tau;
  result.plan.t2 = slots[1] * tau;
  result.plan.t3 = slots[2] * tau;
  return result;
}

}  // namespace hoc

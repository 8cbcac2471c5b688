// Command-line pipeline: derive, steady, propagate, optimize, baseline, analyze.
// Every command writes its outputs plus a run manifest into --out-dir.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "hoc/baseline.hpp"
#include "hoc/io.hpp"

namespace fs = std::filesystem;
using namespace hoc;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_numerical = 3;
constexpr int exit_check = 4;

struct CommonArgs {
  std::string preset = "set1";
  std::string config_path;
  std::string out_dir = "out";
  int dim = 3;
  bool check = false;
};

json load_config_or_default(const CommonArgs& a) {
  if (!a.config_path.empty()) return read_json(a.config_path);
  json j;
  j["preset"] = a.preset;
  j["dim"] = a.dim;
  return j;
}

RunManifest start_manifest(const std::string& command, const json& config,
                           const ProblemConfig& cfg) {
  RunManifest m;
  m.command = command;
  m.config_hash = hex64(fnv1a_hash(config.dump()));
  m.parameter_set = cfg.preset;
  m.dim = cfg.dim;
  m.seed = cfg.seed;
  m.started = iso_timestamp();
  return m;
}

void finish_manifest(RunManifest& m, const fs::path& out_dir) {
  m.finished = iso_timestamp();
  m.outputs.push_back((out_dir / "manifest.json").string());
  write_json(out_dir / "manifest.json", m.to_json());
}

void track(RunManifest& m, const fs::path& p) { m.outputs.push_back(p.string()); }

json frame_report(const PhysicalParams& p, const FrameParams& f) {
  const ThermalParams th = thermal(p);
  json j;
  j["x"] = th.x;
  j["n_bar"] = th.n_bar;
  j["gamma_eff_MHz"] = th.gamma_eff;
  j["re_r"] = f.re_r;
  j["im_r"] = f.im_r;
  j["eta_rad"] = f.eta;
  j["E_MHz"] = f.E;
  j["delta_prime_MHz"] = f.delta_prime;
  j["wc_prime_MHz"] = f.wc_prime;
  j["delta_R_prime_MHz"] = f.delta_R_prime;
  j["cavity_shift_MHz"] = -2.0 * p.g_co * f.re_r;
  j["wa0_MHz"] = f.wr();  // constant atom frequency pinned to the drive
  j["shift_equation_residual"] = frame_residual(p, f);
  return j;
}

json diagnostics_report(const Diagnostics& d) {
  json j;
  j["sideband_resolution"] = d.sideband_resolution;
  j["co_cooperativity"] = d.co_cooperativity;
  j["co_coupling_dissipation"] = d.co_coupling_dissipation;
  j["ac_cooperativity"] = d.ac_cooperativity;
  j["ac_coupling_dissipation"] = d.ac_coupling_dissipation;
  return j;
}

json rwa_report(const RwaSignificance& r) {
  json j;
  j["drive_co_rotating"] = r.drive_co_rotating;
  j["drive_counter_rotating"] = r.drive_counter_rotating;
  j["control_counter_rotating"] = r.control_counter_rotating;
  j["g_co_nonlinear"] = r.g_co_nonlinear;
  j["g_co_two_mode_squeezing"] = r.g_co_two_mode_squeezing;
  j["g_ac_counter_rotating"] = r.g_ac_counter_rotating;
  j["g_ac_shift_counter_rotating"] = r.g_ac_shift_counter_rotating;
  return j;
}

std::vector<std::string> regime_warnings(const PhysicalParams& p) {
  const Diagnostics d = diagnostics(p);
  std::vector<std::string> w;
  if (d.sideband_resolution <= 1.0) w.push_back("not sideband-resolved: Om/kappa <= 1");
  if (d.co_cooperativity <= 1.0) w.push_back("cavity-oscillator cooperativity <= 1");
  if (d.co_coupling_dissipation <= 1.0) w.push_back("cavity-oscillator coupling below dissipation");
  if (d.ac_cooperativity <= 1.0) w.push_back("atom-cavity cooperativity <= 1");
  if (d.ac_coupling_dissipation <= 1.0) w.push_back("atom-cavity coupling below dissipation");
  return w;
}

int cmd_derive(const CommonArgs& a) {
  const json config = load_config_or_default(a);
  ProblemConfig cfg = problem_from_json(config);
  RunManifest manifest = start_manifest("derive", config, cfg);
  const fs::path out = a.out_dir;
  const PhysicalParams& p = cfg.params;
  const FrameParams f = derive_frame(p);

  const json jf = frame_report(p, f);
  const json jd = diagnostics_report(diagnostics(p));
  const json jr = rwa_report(rwa_significance(p, f));
  write_json(out / "frame.json", jf);
  write_json(out / "diagnostics.json", jd);
  write_json(out / "rwa_significance.json", jr);
  track(manifest, out / "frame.json");
  track(manifest, out / "diagnostics.json");
  track(manifest, out / "rwa_significance.json");

  std::printf("frame (%s):\n%s\n", cfg.preset.c_str(), jf.dump(2).c_str());
  std::printf("diagnostics:\n%s\n", jd.dump(2).c_str());
  std::printf("rwa significance:\n%s\n", jr.dump(2).c_str());
  const auto warnings = regime_warnings(p);
  for (const auto& w : warnings) std::printf("regime warning: %s\n", w.c_str());
  finish_manifest(manifest, out);
  if (a.check && !warnings.empty()) return exit_check;
  return exit_ok;
}

int cmd_steady(const CommonArgs& a) {
  const json config = load_config_or_default(a);
  ProblemConfig cfg = problem_from_json(config);
  RunManifest manifest = start_manifest("steady", config, cfg);
  const fs::path out = a.out_dir;
  const FrameParams f = derive_frame(cfg.params);
  const SpaceSpec space(cfg.dim, cfg.dim);
  const SteadyStateResult ss = initial_state(cfg.params, f, space, cfg.park_detuning);

  json j;
  j["eigenvalue_abs"] = std::abs(ss.eigenvalue);
  j["spectral_gap"] = ss.gap;
  j["residual"] = ss.residual;
  j["park_detuning_MHz"] = cfg.park_detuning;
  for (auto [name, sub] : {std::pair{"atom", Subsystem::atom}, {"cavity", Subsystem::cavity},
                           {"oscillator", Subsystem::oscillator}}) {
    std::vector<double> pops;
    for (int l = 0; l < space.dim_of(sub); ++l)
      pops.push_back((level_projector(space, sub, l) * ss.rho).trace().real());
    j[std::string("populations_") + name] = pops;
  }
  j["purity"] = (ss.rho * ss.rho).trace().real();
  write_json(out / "steady.json", j);
  write_json(out / "steady_state.json", state_to_json(ss.rho, space));
  track(manifest, out / "steady.json");
  track(manifest, out / "steady_state.json");
  std::printf("%s\n", j.dump(2).c_str());
  finish_manifest(manifest, out);
  return exit_ok;
}

int cmd_propagate(const CommonArgs& a, const std::string& sequence_path) {
  const json config = load_config_or_default(a);
  ProblemConfig cfg = problem_from_json(config);
  RunManifest manifest = start_manifest("propagate", config, cfg);
  const fs::path out = a.out_dir;
  const FrameParams f = derive_frame(cfg.params);
  const SpaceSpec space(cfg.dim, cfg.dim);
  if (sequence_path.empty() || !fs::exists(sequence_path))
    throw config_error("propagate needs --sequence pointing at a CSV produced by "
                       "`optimize` or `baseline`");
  cfg.bounds.drive_max = std::max(cfg.bounds.drive_max, cfg.params.R_max);
  const double tau = cfg.total_time / cfg.n_slots;
  ControlSequence seq = read_sequence_csv(sequence_path, tau, cfg.bounds);
  const ControlSystem cs = make_control_system(cfg.params, f, space, true);
  const SteadyStateResult ss = initial_state(cfg.params, f, space, cfg.park_detuning);
  PropagatorCache cache;
  const Trajectory t = propagate(ss.rho, seq, cs, &cache);
  write_trajectory_csv(out / "trajectory.csv", t, space);
  write_json(out / "final_state.json", state_to_json(t.states.back(), space));
  track(manifest, out / "trajectory.csv");
  track(manifest, out / "final_state.json");
  std::printf("propagated %d slots (T = %.6f us); final oscillator populations:", seq.n_slots,
              seq.total_time());
  for (int l = 0; l < space.osc_dim; ++l) std::printf(" %.4f", t.pop_osc(seq.n_slots, l));
  std::printf("\n");
  finish_manifest(manifest, out);
  return exit_ok;
}

json restart_to_json(const RestartRecord& r) {
  json j;
  j["index"] = r.index;
  j["stage_a_cost"] = r.stage_a_cost;
  j["warm_fidelity"] = r.warm_fidelity;
  j["ran_stage_b"] = r.ran_stage_b;
  j["final_cost"] = r.final_cost;
  j["fidelity"] = r.fidelity;
  j["penalty"] = r.penalty;
  j["max_penalized_pop"] = r.max_penalized_pop;
  j["iterations_a"] = r.iterations_a;
  j["iterations_b"] = r.iterations_b;
  j["termination"] = r.termination;
  j["wall_s"] = r.wall_s;
  return j;
}

int cmd_optimize(const CommonArgs& a, int restarts_override, long seed_override,
                 double budget_override, int verify_dim, int workers) {
  const json config = load_config_or_default(a);
  ProblemConfig cfg = problem_from_json(config);
  if (restarts_override > 0) cfg.restarts = restarts_override;
  if (seed_override >= 0) cfg.seed = std::uint64_t(seed_override);
  if (budget_override > 0) cfg.schedule.stage_b.wall_s = budget_override;
  cfg.schedule.workers = workers;
  RunManifest manifest = start_manifest("optimize", config, cfg);
  const fs::path out = a.out_dir;

  const FrameParams f = derive_frame(cfg.params);
  const SpaceSpec space(cfg.dim, cfg.dim);
  OptimizationProblem prob;
  prob.system = make_control_system(cfg.params, f, space, true);
  prob.rho0 = initial_state(cfg.params, f, space, cfg.park_detuning).rho;
  prob.cost.target = named_target(cfg.target, space);
  prob.cost.lambda = cfg.lambda;
  prob.cost.penalized = CostConfig::top_levels(space);
  prob.bounds = cfg.bounds;
  prob.n_slots = cfg.n_slots;
  prob.tau = cfg.total_time / cfg.n_slots;
  std::tie(prob.report_target, prob.report_keep) = named_report_target(cfg.target, space);

  const OptimizationResult res = multi_restart(prob, cfg.restarts, cfg.seed, cfg.schedule);
  if (res.fd_selftest > 1e-4)
    std::printf("warning: finite-difference step self-test disagreement %.2e exceeds 1e-4\n",
                res.fd_selftest);

  write_sequence_csv(out / "best_sequence.csv", res.best_sequence);
  track(manifest, out / "best_sequence.csv");
  PropagatorCache cache;
  const Trajectory t = propagate(prob.rho0, res.best_sequence, prob.system, &cache);
  write_trajectory_csv(out / "trajectory.csv", t, space);
  write_json(out / "final_state.json", state_to_json(res.final_state, space));
  track(manifest, out / "trajectory.csv");
  track(manifest, out / "final_state.json");

  json j;
  j["target"] = cfg.target;
  j["fidelity"] = res.best.fidelity;
  j["penalty"] = res.best.penalty;
  j["max_penalized_pop"] = res.best.max_penalized_pop;
  j["best_restart"] = res.best.index;
  j["fd_selftest"] = res.fd_selftest;
  j["wall_s"] = res.wall_s;
  j["n_slots"] = cfg.n_slots;
  j["tau_us"] = prob.tau;
  j["lambda"] = cfg.lambda;
  j["seed"] = cfg.seed;
  j["cost_history"] = res.cost_history;
  j["grad_norm_history"] = res.grad_norm_history;
  for (const auto& r : res.restarts) j["restarts"].push_back(restart_to_json(r));

  // non-classicality of the achieved state
  const Mat rho_osc = partial_trace(res.final_state, space, {Subsystem::oscillator});
  const ManaResult mana = cv_mana(rho_osc);
  j["mana_raw"] = mana.raw;
  j["mana"] = mana.clamped;
  if (cfg.target == "noon11") {
    const Mat rho_co = partial_trace(res.final_state, space,
                                     {Subsystem::cavity, Subsystem::oscillator});
    j["log_negativity"] = log_negativity(rho_co, space.cavity_dim, space.osc_dim);
  }

  if (verify_dim > 0) {
    const SpaceSpec vspace(verify_dim, verify_dim);
    const ControlSystem vcs = make_control_system(cfg.params, f, vspace, true);
    const Mat vrho0 = initial_state(cfg.params, f, vspace, cfg.park_detuning).rho;
    PropagatorCache vcache;
    const Trajectory vt = propagate(vrho0, res.best_sequence, vcs, &vcache);
    const auto [vtarget, vkeep] = named_report_target(cfg.target, vspace);
    const Mat vred = partial_trace(vt.states.back(), vspace, vkeep);
    const double vfid = (vtarget.adjoint() * vred).trace().real();
    j["verify_dim"] = verify_dim;
    j["verify_fidelity"] = vfid;
    j["verify_delta"] = std::abs(vfid - res.best.fidelity);
    std::printf("verify dim %d: fidelity %.4f (delta %.4f)\n", verify_dim, vfid,
                j["verify_delta"].get<double>());
  }

  write_json(out / "result.json", j);
  track(manifest, out / "result.json");
  std::printf("best fidelity %.4f (restart %d, penalty %.4f, mana %.4f)\n", res.best.fidelity,
              res.best.index, res.best.penalty, mana.clamped);
  finish_manifest(manifest, out);

  if (a.check && config.contains("accept")) {
    const json& acc = config.at("accept");
    bool ok = true;
    if (acc.contains("fidelity_min")) ok &= res.best.fidelity >= acc.at("fidelity_min").get<double>();
    if (acc.contains("mana_min")) ok &= mana.clamped >= acc.at("mana_min").get<double>();
    if (acc.contains("log_negativity_min"))
      ok &= j.value("log_negativity", 0.0) >= acc.at("log_negativity_min").get<double>();
    if (acc.contains("verify_delta_max") && j.contains("verify_delta"))
      ok &= j.at("verify_delta").get<double>() <= acc.at("verify_delta_max").get<double>();
    if (!ok) {
      std::printf("acceptance thresholds missed\n");
      return exit_check;
    }
  }
  return exit_ok;
}

int cmd_baseline(const CommonArgs& a, double tau_ns) {
  const json config = load_config_or_default(a);
  ProblemConfig cfg = problem_from_json(config);
  RunManifest manifest = start_manifest("baseline", config, cfg);
  const fs::path out = a.out_dir;
  const FrameParams f = derive_frame(cfg.params);
  const SpaceSpec space(cfg.dim, cfg.dim);
  const ControlSystem cs = make_control_system(cfg.params, f, space, true);
  const Mat rho0 = initial_state(cfg.params, f, space, cfg.park_detuning).rho;
  const double tau = tau_ns * 1e-3;

  const PiPulsePlan nominal = nominal_pi_plan(cfg.params, f);
  const PiTuneResult tuned = tune_pi_sequence(nominal, cs, rho0, tau);
  ChannelBounds bounds = cfg.bounds;
  bounds.drive_max = std::max(bounds.drive_max, nominal.amp);
  PiSequenceReport report;
  const ControlSequence seq = build_pi_sequence(tuned.plan, tau, bounds, &report);
  PropagatorCache cache;
  const Trajectory t = propagate(rho0, seq, cs, &cache);

  const Mat rho_osc = partial_trace(t.states.back(), space, {Subsystem::oscillator});
  Vec osc1 = Vec::Zero(space.osc_dim);
  osc1(1) = 1.0;
  const double fid = fidelity(rho_osc, osc1);
  const ManaResult mana = cv_mana(rho_osc);
  double cavity_peak = 0;
  for (int m = 0; m <= seq.n_slots; ++m) cavity_peak = std::max(cavity_peak, t.pop_cavity(m, 1));

  json j;
  j["nominal_t_us"] = {nominal.t1, nominal.t2, nominal.t3};
  j["tuned_t_us"] = {tuned.plan.t1, tuned.plan.t2, tuned.plan.t3};
  j["slots"] = tuned.slots;
  j["amp_MHz"] = nominal.amp;
  j["park_detuning_MHz"] = tuned.plan.park_detuning;
  j["resonance_detuning_MHz"] = tuned.plan.resonance_detuning;
  j["stage_objectives"] = tuned.objectives;
  j["grid_fallback"] = tuned.grid_fallback;
  j["tau_us"] = tau;
  j["fidelity"] = fid;
  j["mana_raw"] = mana.raw;
  j["mana"] = mana.clamped;
  j["cavity_peak"] = cavity_peak;
  write_json(out / "plan.json", j);
  write_sequence_csv(out / "sequence.csv", seq);
  write_trajectory_csv(out / "trajectory.csv", t, space);
  write_json(out / "final_state.json", state_to_json(t.states.back(), space));
  track(manifest, out / "plan.json");
  track(manifest, out / "sequence.csv");
  track(manifest, out / "trajectory.csv");
  track(manifest, out / "final_state.json");
  std::printf("pi-pulse %s: t = (%.1f, %.1f, %.1f) ns, fidelity %.4f, mana %.4f, cavity peak %.4f\n",
              cfg.preset.c_str(), tuned.plan.t1 * 1e3, tuned.plan.t2 * 1e3, tuned.plan.t3 * 1e3,
              fid, mana.clamped, cavity_peak);
  finish_manifest(manifest, out);

  if (a.check && config.contains("accept")) {
    const json& acc = config.at("accept");
    bool ok = true;
    if (acc.contains("fidelity")) {
      ok &= std::abs(fid - acc.at("fidelity").get<double>()) <=
            acc.value("fidelity_tol", 0.01);
    }
    if (acc.contains("mana_max")) ok &= mana.clamped <= acc.at("mana_max").get<double>();
    if (!ok) return exit_check;
  }
  return exit_ok;
}

int cmd_analyze(const CommonArgs& a, const std::string& state_path, const std::string& target) {
  const json config = load_config_or_default(a);
  ProblemConfig cfg = problem_from_json(config);
  RunManifest manifest = start_manifest("analyze", config, cfg);
  const fs::path out = a.out_dir;
  if (state_path.empty() || !fs::exists(state_path))
    throw config_error("analyze needs --state pointing at a state JSON written by "
                       "`steady`, `propagate`, `optimize` or `baseline`");
  auto [rho, space] = state_from_json(read_json(state_path));

  json j;
  const Mat rho_osc = partial_trace(rho, space, {Subsystem::oscillator});
  const WignerGrid grid = wigner(rho_osc);
  const ManaResult mana = cv_mana(grid);
  j["mana_raw"] = mana.raw;
  j["mana"] = mana.clamped;
  j["wigner_integral"] = grid.integral;
  const Mat rho_co = partial_trace(rho, space, {Subsystem::cavity, Subsystem::oscillator});
  j["log_negativity"] = log_negativity(rho_co, space.cavity_dim, space.osc_dim);
  if (!target.empty()) {
    const auto [rt, keep] = named_report_target(target, space);
    j["fidelity"] = (rt.adjoint() * partial_trace(rho, space, keep)).trace().real();
    j["target"] = target;
  }
  std::vector<double> pops;
  for (int l = 0; l < space.osc_dim; ++l) pops.push_back(rho_osc(l, l).real());
  j["osc_populations"] = pops;
  write_wigner_csv(out / "wigner.csv", grid);
  write_json(out / "metrics.json", j);
  track(manifest, out / "wigner.csv");
  track(manifest, out / "metrics.json");
  std::printf("%s\n", j.dump(2).c_str());
  finish_manifest(manifest, out);
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid atom-cavity-oscillator optimal control pipeline"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string sequence_path, state_path, target;
  int restarts_override = 0, verify_dim = 0, workers = 1;
  long seed_override = -1;
  double budget_override = 0, tau_ns = 5.0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--preset", common.preset, "built-in parameter set (set1 or set2)");
    cmd->add_option("--config", common.config_path, "JSON configuration file");
    cmd->add_option("--dims", common.dim, "cavity/oscillator truncation dimension");
    cmd->add_option("--out-dir", common.out_dir, "output directory");
    cmd->add_flag("--check", common.check, "exit 4 when acceptance thresholds are missed");
  };

  auto* derive = app.add_subcommand("derive", "transformed-frame parameters and ratio tables");
  add_common(derive);
  auto* steady = app.add_subcommand("steady", "driven steady state (the initial state)");
  add_common(steady);
  auto* propagate_cmd = app.add_subcommand("propagate", "propagate a control sequence");
  add_common(propagate_cmd);
  propagate_cmd->add_option("--sequence", sequence_path, "control sequence CSV");
  auto* optimize = app.add_subcommand("optimize", "pulse optimization (BFGS, multi-restart)");
  add_common(optimize);
  optimize->add_option("--restarts", restarts_override, "number of random restarts");
  optimize->add_option("--seed", seed_override, "random seed override");
  optimize->add_option("--budget", budget_override, "stage-B wall budget per restart, seconds");
  optimize->add_option("--verify-dim", verify_dim, "rerun the best sequence at this truncation");
  optimize->add_option("--workers", workers, "worker threads for slot derivatives");
  auto* baseline = app.add_subcommand("baseline", "three-segment pi-pulse reference");
  add_common(baseline);
  baseline->add_option("--tau-ns", tau_ns, "slot duration for the pi-pulse grid, ns");
  auto* analyze = app.add_subcommand("analyze", "state metrics: Wigner, mana, negativity");
  add_common(analyze);
  analyze->add_option("--state", state_path, "state JSON file");
  analyze->add_option("--target", target, "named target for fidelity (fock1 or noon11)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (derive->parsed()) return cmd_derive(common);
    if (steady->parsed()) return cmd_steady(common);
    if (propagate_cmd->parsed()) return cmd_propagate(common, sequence_path);
    if (optimize->parsed())
      return cmd_optimize(common, restarts_override, seed_override, budget_override, verify_dim,
                          workers);
    if (baseline->parsed()) return cmd_baseline(common, tau_ns);
    if (analyze->parsed()) return cmd_analyze(common, state_path, target);
  } catch (const config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return exit_config;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return exit_config;
  } catch (const numerical_error& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return exit_numerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_numerical;
  }
  return exit_ok;
}

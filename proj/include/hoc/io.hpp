#pragma once

// Configuration ingestion (JSON with explicit unit suffixes), result
// persistence (JSON bundles + CSV tables) and reproducibility manifests.

#include <json.hpp>

#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "hoc/dynamics.hpp"
#include "hoc/optimize.hpp"

namespace hoc {

using nlohmann::json;

inline constexpr const char* artifact_version = "0.1.0";

// ---------------------------------------------------------------------------
// parameter sets

inline PhysicalParams params_from_json(const json& j) {
  PhysicalParams p;
  auto freq = [&](const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_string())
      throw config_error(std::string(key) + " must be a string with a unit suffix");
    return parse_frequency_mhz(j.at(key).get<std::string>());
  };
  p.wa_min = freq("wa_min", p.wa_min);
  p.wa_max = freq("wa_max", p.wa_max);
  p.wc = freq("wc", p.wc);
  p.Om = freq("Om", p.Om);
  p.g_ac = freq("g_ac", p.g_ac);
  p.g_co = freq("g_co", p.g_co);
  p.kappa_a = freq("kappa_a", p.kappa_a);
  p.kappa = freq("kappa", p.kappa);
  p.gamma = freq("gamma", p.gamma);
  p.R_max = freq("R_max", p.R_max);
  if (j.contains("temperature"))
    p.temperature = parse_temperature_k(j.at("temperature").get<std::string>());
  if (j.contains("s")) p.s = j.at("s").get<double>();
  p.validate();
  return p;
}

inline json params_to_json(const PhysicalParams& p) {
  auto mhz = [](double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v << " MHz";
    return os.str();
  };
  json j;
  j["wa_min"] = mhz(p.wa_min);
  j["wa_max"] = mhz(p.wa_max);
  j["wc"] = mhz(p.wc);
  j["Om"] = mhz(p.Om);
  j["g_ac"] = mhz(p.g_ac);
  j["g_co"] = mhz(p.g_co);
  j["kappa_a"] = mhz(p.kappa_a);
  j["kappa"] = mhz(p.kappa);
  j["gamma"] = mhz(p.gamma);
  j["R_max"] = mhz(p.R_max);
  {
    std::ostringstream os;
    os << std::setprecision(17) << p.temperature << " K";
    j["temperature"] = os.str();
  }
  j["s"] = p.s;
  return j;
}

// ---------------------------------------------------------------------------
// problem configuration

struct ProblemConfig {
  std::string preset = "set1";      // ignored when params present in the file
  PhysicalParams params;
  int dim = 3;                      // cavity/oscillator truncation
  std::string target = "fock1";     // fock1 | noon11
  double total_time = 1.0;          // us
  int n_slots = 200;
  double lambda = 10.0;
  ChannelBounds bounds;
  double park_detuning = -1000.0;   // steady-state preparation detuning
  std::uint64_t seed = 1;
  int restarts = 1;
  OptimizeSchedule schedule;
};

inline ProblemConfig problem_from_json(const json& j) {
  ProblemConfig c;
  if (j.contains("preset")) c.preset = j.at("preset").get<std::string>();
  c.params = j.contains("params") ? params_from_json(j.at("params")) : params_preset(c.preset);
  c.bounds.drive_max = c.params.R_max;
  if (j.contains("dim")) c.dim = j.at("dim").get<int>();
  if (j.contains("target")) c.target = j.at("target").get<std::string>();
  if (j.contains("T")) c.total_time = parse_time_us(j.at("T").get<std::string>());
  if (j.contains("n_slots")) c.n_slots = j.at("n_slots").get<int>();
  if (j.contains("lambda")) c.lambda = j.at("lambda").get<double>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("restarts")) c.restarts = j.at("restarts").get<int>();
  if (j.contains("park_detuning"))
    c.park_detuning = parse_frequency_mhz(j.at("park_detuning").get<std::string>());
  if (j.contains("bounds")) {
    const json& b = j.at("bounds");
    if (b.contains("detuning_min"))
      c.bounds.detuning_min = parse_frequency_mhz(b.at("detuning_min").get<std::string>());
    if (b.contains("detuning_max"))
      c.bounds.detuning_max = parse_frequency_mhz(b.at("detuning_max").get<std::string>());
    if (b.contains("drive_max"))
      c.bounds.drive_max = parse_frequency_mhz(b.at("drive_max").get<std::string>());
  }
  if (j.contains("budgets")) {
    const json& b = j.at("budgets");
    if (b.contains("stage_a_iterations"))
      c.schedule.stage_a.max_iterations = b.at("stage_a_iterations").get<int>();
    if (b.contains("stage_a_seconds"))
      c.schedule.stage_a.wall_s = b.at("stage_a_seconds").get<double>();
    if (b.contains("stage_b_iterations"))
      c.schedule.stage_b.max_iterations = b.at("stage_b_iterations").get<int>();
    if (b.contains("stage_b_seconds"))
      c.schedule.stage_b.wall_s = b.at("stage_b_seconds").get<double>();
  }
  if (j.contains("init_scale")) c.schedule.init_scale = j.at("init_scale").get<double>();
  if (j.contains("stage_a_include_loss"))
    c.schedule.stage_a_include_loss = j.at("stage_a_include_loss").get<bool>();
  if (j.contains("stage_b_top_k")) c.schedule.stage_b_top_k = j.at("stage_b_top_k").get<int>();
  if (j.contains("early_stop_fidelity"))
    c.schedule.early_stop_fidelity = j.at("early_stop_fidelity").get<double>();
  if (j.contains("grad_tol")) c.schedule.grad_tol = j.at("grad_tol").get<double>();
  if (c.n_slots < 1) throw config_error("n_slots must be at least 1");
  if (c.restarts < 1) throw config_error("restarts must be at least 1");
  if (c.total_time <= 0) throw config_error("T must be positive");
  return c;
}

/// Full-space target density matrix for a named target keyword.
inline Mat named_target(const std::string& name, const SpaceSpec& space) {
  if (name == "fock1") {
    const Vec psi = fock_state(space, 0, 0, 1);
    return psi * psi.adjoint();
  }
  if (name == "noon11") {
    const Vec psi = (fock_state(space, 0, 0, 1) + fock_state(space, 0, 1, 0)) / std::sqrt(2.0);
    return psi * psi.adjoint();
  }
  throw config_error("unknown target '" + name + "' (expected fock1 or noon11)");
}

/// Reduced-space target + kept subsystems used for the reported fidelity.
inline std::pair<Mat, std::vector<Subsystem>> named_report_target(const std::string& name,
                                                                  const SpaceSpec& space) {
  if (name == "fock1") {
    Vec psi = Vec::Zero(space.osc_dim);
    psi(1) = 1.0;
    return {psi * psi.adjoint(), {Subsystem::oscillator}};
  }
  if (name == "noon11") {
    Vec psi = Vec::Zero(space.cavity_dim * space.osc_dim);
    psi(0 * space.osc_dim + 1) = 1.0 / std::sqrt(2.0);
    psi(1 * space.osc_dim + 0) = 1.0 / std::sqrt(2.0);
    return {psi * psi.adjoint(), {Subsystem::cavity, Subsystem::oscillator}};
  }
  throw config_error("unknown target '" + name + "'");
}

// ---------------------------------------------------------------------------
// hashing, timestamps, manifest

inline std::uint64_t fnv1a_hash(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::string parameter_set;
  int dim = 3;
  std::uint64_t seed = 0;
  std::string started;
  std::string finished;
  std::vector<std::string> outputs;

  json to_json() const {
    json j;
    j["command"] = command;
    j["config_hash"] = config_hash;
    j["parameter_set"] = parameter_set;
    j["dim"] = dim;
    j["seed"] = seed;
    j["artifact_version"] = artifact_version;
    j["started"] = started;
    j["finished"] = finished;
    j["outputs"] = outputs;
    return j;
  }
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw config_error("cannot open " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::parse_error& e) {
    throw config_error("parse error in " + path.string() + ": " + e.what());
  }
  return j;
}

// ---------------------------------------------------------------------------
// CSV tables

inline void write_sequence_csv(const std::filesystem::path& path, const ControlSequence& seq) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "slot,u_detuning,u_atomX,u_atomY\n";
  for (int k = 0; k < seq.n_slots; ++k)
    os << k << "," << seq.u(k, 0) << "," << seq.u(k, 1) << "," << seq.u(k, 2) << "\n";
  write_text(path, os.str());
}

inline ControlSequence read_sequence_csv(const std::filesystem::path& path, double tau,
                                         ChannelBounds bounds = {}) {
  std::ifstream f(path);
  if (!f) throw config_error("cannot open sequence file " + path.string());
  std::string line;
  if (!std::getline(f, line)) throw config_error("empty sequence file " + path.string());
  std::vector<std::array<double, 3>> rows;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::array<double, 3> r{};
    int slot;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf", &slot, &r[0], &r[1], &r[2]) != 4)
      throw config_error(path.string() + ":" + std::to_string(lineno) + ": bad sequence row");
    rows.push_back(r);
  }
  ControlSequence seq = ControlSequence::zeros(int(rows.size()), tau, bounds);
  for (int k = 0; k < seq.n_slots; ++k)
    seq.u.row(k) << rows[k][0], rows[k][1], rows[k][2];
  return seq;
}

inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& t,
                                 const SpaceSpec& space) {
  std::ostringstream os;
  os << std::setprecision(12);
  os << "time_us";
  for (int i = 0; i < space.atom_dim; ++i) os << ",atom_p" << i;
  for (int i = 0; i < space.cavity_dim; ++i) os << ",cavity_p" << i;
  for (int i = 0; i < space.osc_dim; ++i) os << ",osc_p" << i;
  os << ",purity\n";
  for (std::size_t m = 0; m < t.times.size(); ++m) {
    os << t.times[m];
    for (int i = 0; i < space.atom_dim; ++i) os << "," << t.pop_atom(m, i);
    for (int i = 0; i < space.cavity_dim; ++i) os << "," << t.pop_cavity(m, i);
    for (int i = 0; i < space.osc_dim; ++i) os << "," << t.pop_osc(m, i);
    os << "," << t.purity[m] << "\n";
  }
  write_text(path, os.str());
}

inline void write_wigner_csv(const std::filesystem::path& path, const WignerGrid& g) {
  std::ostringstream os;
  os << std::setprecision(12);
  os << "x,p,W\n";
  for (int i = 0; i < g.n_points; ++i)
    for (int j = 0; j < g.n_points; ++j)
      os << g.axis(i) << "," << g.axis(j) << "," << g.values(i, j) << "\n";
  write_text(path, os.str());
}

// density operators as JSON with shape metadata
inline json state_to_json(const Mat& rho, const SpaceSpec& space) {
  json j;
  j["atom_dim"] = space.atom_dim;
  j["cavity_dim"] = space.cavity_dim;
  j["osc_dim"] = space.osc_dim;
  std::vector<double> re, im;
  re.reserve(rho.size());
  im.reserve(rho.size());
  for (int c = 0; c < rho.cols(); ++c)
    for (int r = 0; r < rho.rows(); ++r) {
      re.push_back(rho(r, c).real());
      im.push_back(rho(r, c).imag());
    }
  j["re"] = re;
  j["im"] = im;
  return j;
}

inline std::pair<Mat, SpaceSpec> state_from_json(const json& j) {
  SpaceSpec space(j.at("cavity_dim").get<int>(), j.at("osc_dim").get<int>());
  const int n = space.total();
  const auto re = j.at("re").get<std::vector<double>>();
  const auto im = j.at("im").get<std::vector<double>>();
  if (int(re.size()) != n * n || int(im.size()) != n * n)
    throw config_error("state file does not match its declared dimensions");
  Mat rho(n, n);
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < n; ++r)
      rho(r, c) = cplx(re[c * n + r], im[c * n + r]);
  return {rho, space};
}

}  // namespace hoc

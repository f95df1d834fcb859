#pragma once

// Run configuration, dispatch and manifests for the fkp command-line tool.
//
// Config files are line oriented:
//   # comment
//   subcommand = experiment
//   alpha = 1.5
// Blank lines and text after '#' are ignored. Every key must be known.

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "acceptance.hpp"
#include "fkp/bifurcation.hpp"
#include "fkp/errors.hpp"
#include "fkp/experiments.hpp"
#include "fkp/ground_state.hpp"
#include "fkp/io.hpp"
#include "fkp/linear_analysis.hpp"
#include "json.hpp"

namespace fkp::cli {

inline constexpr const char* version = "fkp 1.0.0";

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s{"ground-state", "evolve", "experiment", "spectrum",
                                          "growth-rate",  "branch", "sweep",      "verify"};
  return s;
}

/// Known keys and their defaults, in canonical order.
inline const std::vector<std::pair<std::string, std::string>>& defaults() {
  static const std::vector<std::pair<std::string, std::string>> d{
      {"alpha", "2"},         {"sigma", "-1"},        {"c", "2"},
      {"Lx", "60"},           {"Ly", "30"},           {"nx", "512"},
      {"ny", "128"},          {"dt", "1e-3"},         {"t_end", "10"},
      {"perturbation", "psi1"}, {"rho", "0.1"},       {"x0", "10"},
      {"carrier_offset", "0"}, {"cadence", "100"},    {"dealias", "false"},
      {"track_energy", "false"}, {"snapshot_every", "0"}, {"out_dir", "out"},
      {"deterministic", "true"}, {"k", "0"},          {"k_min", "0.05"},
      {"k_max", "1.5"},       {"k_count", "30"},      {"modes", "8"},
      {"s_max", "1e-2"},      {"s_count", "7"},       {"sweep_alpha", ""},
      {"sweep_of", "experiment"}, {"workers", "1"},   {"only", ""},
  };
  return d;
}

struct RunConfig {
  std::string subcommand;
  FkpParams params;
  double Lx = 60.0, Ly = 30.0;
  std::size_t nx = 512, ny = 128;
  double dt = 1e-3, t_end = 10.0;
  PerturbationSpec perturbation;
  int cadence = 100;
  bool dealias = false;
  bool track_energy = false;
  int snapshot_every = 0;
  std::filesystem::path out_dir = "out";
  bool deterministic = true;
  double k = 0.0;
  double k_min = 0.05, k_max = 1.5;
  int k_count = 30;
  int modes = 8;
  double s_max = 1e-2;
  int s_count = 7;
  std::vector<double> sweep_alpha;
  std::string sweep_of = "experiment";
  int workers = 1;
  std::vector<std::string> only;
  /// Every key with its resolved value, canonical order.
  std::vector<std::pair<std::string, std::string>> echo;

  Grid1D grid_x() const { return Grid1D(Lx, nx); }
  Grid2D grid() const { return {Grid1D(Lx, nx), Grid1D(Ly, ny)}; }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    return io::parse_double(v);
  } catch (const std::exception&) {
    throw PreconditionError(key + ": not a number: '" + v + "'");
  }
}

inline long to_integer(const std::string& key, const std::string& v) {
  long out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw PreconditionError(key + ": not an integer: '" + v + "'");
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw PreconditionError(key + ": expected true or false, got '" + v + "'");
}

inline std::size_t grid_size(const std::string& key, const std::string& v) {
  const long n = to_integer(key, v);
  if (n < 8 || !is_power_of_two(static_cast<std::size_t>(n)))
    throw PreconditionError(key + "=" + v + ": power of two required (>= 8)");
  return static_cast<std::size_t>(n);
}

inline double positive(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (!(x > 0.0) || !std::isfinite(x)) throw PreconditionError(key + " must be positive");
  return x;
}

inline int at_least(const std::string& key, const std::string& v, long lo) {
  const long n = to_integer(key, v);
  if (n < lo) throw PreconditionError(key + " must be >= " + std::to_string(lo));
  return static_cast<int>(n);
}

inline void parse_assignment(const std::string& raw, std::map<std::string, std::string>& kv, bool allow_override,
                             const std::string& where) {
  const auto line = trim(raw.substr(0, raw.find('#')));
  if (line.empty()) return;
  const auto eq = line.find('=');
  if (eq == std::string::npos) throw PreconditionError(where + "expected key=value, got '" + line + "'");
  const auto key = trim(line.substr(0, eq));
  const auto value = trim(line.substr(eq + 1));
  if (key.empty()) throw PreconditionError(where + "empty key");
  if (!allow_override && kv.count(key)) throw PreconditionError(where + "duplicate key '" + key + "'");
  kv[key] = value;
}

}  // namespace detail

/// Builds a validated RunConfig from key/value pairs. `subcommand` is
/// required; every other key falls back to its default.
inline RunConfig make_config(const std::map<std::string, std::string>& given) {
  for (const auto& [key, value] : given) {
    if (key == "subcommand") continue;
    const bool known = std::any_of(defaults().begin(), defaults().end(),
                                   [&](const auto& d) { return d.first == key; });
    if (!known) throw PreconditionError("unknown key '" + key + "'");
  }
  const auto sub = given.find("subcommand");
  if (sub == given.end() || sub->second.empty()) throw PreconditionError("missing required key 'subcommand'");
  if (std::find(subcommands().begin(), subcommands().end(), sub->second) == subcommands().end())
    throw PreconditionError("unknown subcommand '" + sub->second + "'");

  std::map<std::string, std::string> kv(defaults().begin(), defaults().end());
  for (const auto& [key, value] : given) kv[key] = value;

  using namespace detail;
  RunConfig c;
  c.subcommand = sub->second;
  c.params.alpha = to_double("alpha", kv["alpha"]);
  c.params.sigma = static_cast<int>(to_integer("sigma", kv["sigma"]));
  c.params.c = to_double("c", kv["c"]);
  c.params.validate();
  c.Lx = positive("Lx", kv["Lx"]);
  c.Ly = positive("Ly", kv["Ly"]);
  c.nx = grid_size("nx", kv["nx"]);
  c.ny = grid_size("ny", kv["ny"]);
  c.dt = positive("dt", kv["dt"]);
  c.t_end = positive("t_end", kv["t_end"]);
  const auto& kind = kv["perturbation"];
  if (kind == "psi1") c.perturbation.kind = PerturbationKind::localized;
  else if (kind == "psi2") c.perturbation.kind = PerturbationKind::y_periodic;
  else throw PreconditionError("perturbation must be psi1 or psi2");
  c.perturbation.rho = to_double("rho", kv["rho"]);
  c.perturbation.x0 = to_double("x0", kv["x0"]);
  c.perturbation.carrier_offset = to_double("carrier_offset", kv["carrier_offset"]);
  c.perturbation.validate();
  c.cadence = at_least("cadence", kv["cadence"], 1);
  c.dealias = to_bool("dealias", kv["dealias"]);
  c.track_energy = to_bool("track_energy", kv["track_energy"]);
  c.snapshot_every = at_least("snapshot_every", kv["snapshot_every"], 0);
  if (kv["out_dir"].empty()) throw PreconditionError("out_dir must not be empty");
  c.out_dir = kv["out_dir"];
  c.deterministic = to_bool("deterministic", kv["deterministic"]);
  c.k = to_double("k", kv["k"]);
  if (!(c.k >= 0.0)) throw PreconditionError("k must be >= 0");
  c.k_min = positive("k_min", kv["k_min"]);
  c.k_max = positive("k_max", kv["k_max"]);
  c.k_count = at_least("k_count", kv["k_count"], 1);
  if (c.k_count > 1 && !(c.k_max > c.k_min)) throw PreconditionError("k_max must exceed k_min");
  c.modes = at_least("modes", kv["modes"], 1);
  c.s_max = positive("s_max", kv["s_max"]);
  c.s_count = at_least("s_count", kv["s_count"], 2);
  for (const auto& a : io::split(kv["sweep_alpha"], ','))
    if (!detail::trim(a).empty()) c.sweep_alpha.push_back(to_double("sweep_alpha", detail::trim(a)));
  for (double a : c.sweep_alpha) FkpParams{a, c.params.sigma, c.params.c}.validate();
  c.sweep_of = kv["sweep_of"];
  if (c.sweep_of == "sweep" || c.sweep_of == "verify" ||
      std::find(subcommands().begin(), subcommands().end(), c.sweep_of) == subcommands().end())
    throw PreconditionError("sweep_of must name a computing subcommand");
  if (c.subcommand == "sweep" && c.sweep_alpha.empty()) throw PreconditionError("missing required key 'sweep_alpha'");
  c.workers = at_least("workers", kv["workers"], 1);
  for (const auto& id : io::split(kv["only"], ','))
    if (!detail::trim(id).empty()) c.only.push_back(detail::trim(id));

  c.echo.emplace_back("subcommand", c.subcommand);
  for (const auto& [key, value] : defaults()) c.echo.emplace_back(key, kv[key]);
  return c;
}

/// Parses config text. Later `overrides` (key=value strings) replace file values.
inline RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {}) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  for (int n = 1; std::getline(in, line); ++n)
    detail::parse_assignment(line, kv, false, "line " + std::to_string(n) + ": ");
  for (const auto& o : overrides) detail::parse_assignment(o, kv, true, "");
  return make_config(kv);
}

inline RunConfig parse_config_file(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
  if (!std::filesystem::exists(path)) throw PreconditionError("config file not found: " + path.string());
  return parse_config(io::read_bytes(path), overrides);
}

/// Canonical key=value text that parses back to the same config.
inline std::string to_text(const RunConfig& c) {
  std::string out;
  for (const auto& [key, value] : c.echo) out += key + " = " + value + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned int i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

struct ProducedFile {
  std::string path;  // relative to the manifest's directory
  std::uintmax_t bytes = 0;
  std::string sha256;
};

struct RunManifest {
  std::vector<std::pair<std::string, std::string>> config;
  std::string code_version = version;
  std::string start_time, end_time;
  std::string status = "completed";
  std::string message;
  std::vector<ProducedFile> files;
  std::vector<std::string> children;  // child manifest paths, relative
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();

  bool completed() const { return status == "completed"; }
};

inline std::string wall_time_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::ordered_json to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["code_version"] = m.code_version;
  auto cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.config) cfg[k] = v;
  j["config"] = cfg;
  j["start_time"] = m.start_time;
  j["end_time"] = m.end_time;
  j["status"] = m.status;
  j["message"] = m.message;
  auto files = nlohmann::ordered_json::array();
  for (const auto& f : m.files) files.push_back({{"path", f.path}, {"bytes", f.bytes}, {"sha256", f.sha256}});
  j["files"] = files;
  j["children"] = m.children;
  j["summary"] = m.summary;
  return j;
}

inline RunManifest manifest_from_json(const nlohmann::ordered_json& j) {
  RunManifest m;
  m.code_version = j.at("code_version");
  for (const auto& [k, v] : j.at("config").items()) m.config.emplace_back(k, v.get<std::string>());
  m.start_time = j.at("start_time");
  m.end_time = j.at("end_time");
  m.status = j.at("status");
  m.message = j.at("message");
  for (const auto& f : j.at("files")) m.files.push_back({f.at("path"), f.at("bytes"), f.at("sha256")});
  m.children = j.at("children").get<std::vector<std::string>>();
  m.summary = j.at("summary");
  return m;
}

inline RunManifest read_manifest(const std::filesystem::path& path) {
  return manifest_from_json(nlohmann::ordered_json::parse(io::read_bytes(path)));
}

/// Files whose current content no longer matches the recorded hash.
inline std::vector<std::string> stale_files(const std::filesystem::path& manifest_path) {
  const auto m = read_manifest(manifest_path);
  const auto dir = manifest_path.parent_path();
  std::vector<std::string> bad;
  for (const auto& f : m.files) {
    const auto p = dir / f.path;
    if (!std::filesystem::exists(p) || sha256_hex(io::read_bytes(p)) != f.sha256) bad.push_back(f.path);
  }
  return bad;
}

// ---------------------------------------------------------------------------
// Dispatch

namespace detail {

class Outputs {
 public:
  Outputs(std::filesystem::path dir, RunManifest& m) : dir_(std::move(dir)), m_(m) {
    std::filesystem::create_directories(dir_);
  }
  const std::filesystem::path& dir() const { return dir_; }

  void text(const std::string& name, const std::string& content) {
    io::write_text(dir_ / name, content);
    record(name);
  }
  void snapshot(const std::string& name, const io::Snapshot& s) {
    io::write_snapshot(s, dir_ / name);
    record(name);
  }
  void record(const std::filesystem::path& rel) {
    const auto bytes = io::read_bytes(dir_ / rel);
    m_.files.push_back({rel.generic_string(), bytes.size(), sha256_hex(bytes)});
  }

 private:
  std::filesystem::path dir_;
  RunManifest& m_;
};

inline std::string csv(const std::string& header, const std::vector<std::vector<double>>& columns) {
  std::string out = header + "\n";
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (j) out += ',';
      out += io::format_double(columns[j][i]);
    }
    out += '\n';
  }
  return out;
}

inline void ground_state_run(const RunConfig& c, Outputs& out, RunManifest& m) {
  const auto gs = line_carrier(c.params, c.grid_x());
  const auto q = resample(gs.profile, c.grid_x());
  out.text("profile.csv", csv("x,q", {c.grid_x().points(), q.values}));
  out.snapshot("profile.fkps", {extend_in_y(q, Grid1D(c.Ly, c.ny)), 0.0, c.params});
  m.summary["amplitude"] = gs.amplitude();
  m.summary["residual_sup"] = gs.residual_sup;
  m.summary["iterations"] = gs.iterations;
  m.summary["boundary_value"] = gs.boundary_value();
}

inline void experiment_run(const RunConfig& c, bool perturbed, Outputs& out, RunManifest& m) {
  ExperimentConfig cfg(c.params, c.grid());
  cfg.dt = c.dt;
  cfg.t_end = c.t_end;
  cfg.perturbation = c.perturbation;
  if (!perturbed) {
    cfg.perturbation.rho = 0.0;
    cfg.perturbation.x0 = 0.0;
    cfg.perturbation.carrier_offset = 0.0;
  }
  cfg.cadence = c.cadence;
  cfg.dealias = c.dealias;
  cfg.track_energy = c.track_energy;
  cfg.snapshot_every = c.snapshot_every;
  cfg.output_dir = out.dir();
  const auto r = run_experiment(cfg);
  out.record("diagnostics.csv");
  for (const auto& p : r.snapshots) out.record(p.filename());
  m.status = to_string(r.status);
  m.message = r.message;
  m.summary["amplitude_A"] = r.amplitude_A;
  m.summary["initial_sup"] = r.initial_sup;
  m.summary["final_time"] = r.diagnostics.t.back();
  m.summary["final_sup"] = r.diagnostics.sup_norm.back();
  m.summary["doubling_time"] = r.doubling_time ? nlohmann::ordered_json(*r.doubling_time) : nullptr;
  m.summary["halving_time"] = r.halving_time ? nlohmann::ordered_json(*r.halving_time) : nullptr;
  if (!perturbed && r.diagnostics.has_perturbation())
    m.summary["soliton_error"] = r.diagnostics.perturbation_sup.back();
}

inline RealField1D operator_profile(const RunConfig& c) {
  return resample(line_carrier(c.params, c.grid_x()).profile, c.grid_x());
}

inline void spectrum_run(const RunConfig& c, Outputs& out, RunManifest& m) {
  if (c.params.sigma != -1) throw PreconditionError("spectrum: the operator L is defined for sigma = -1");
  const auto q = operator_profile(c);
  const auto rep = symmetric_spectrum(build_operator_matrix(OperatorTag::L_of_k, q, c.params, c.k));
  std::vector<double> idx(static_cast<std::size_t>(rep.eigenvalues.size()));
  std::iota(idx.begin(), idx.end(), 0.0);
  out.text("spectrum.csv", csv("index,eigenvalue", {idx, {rep.eigenvalues.data(),
                                                          rep.eigenvalues.data() + rep.eigenvalues.size()}}));
  m.summary["k"] = c.k;
  m.summary["lambda_min"] = rep.lambda_min;
  m.summary["negative_count"] = rep.negative_count;
  m.summary["omega0"] = rep.omega0 ? nlohmann::ordered_json(*rep.omega0) : nullptr;
}

inline void growth_rate_run(const RunConfig& c, Outputs& out, RunManifest& m) {
  if (c.params.sigma != -1) throw PreconditionError("growth-rate: defined for sigma = -1");
  const auto q = operator_profile(c);
  std::vector<double> ks;
  for (int j = 0; j < c.k_count; ++j)
    ks.push_back(c.k_count == 1 ? c.k_min : c.k_min + (c.k_max - c.k_min) * j / (c.k_count - 1));
  const auto curve = growth_rate_curve(q, c.params, ks);
  out.text("growth_rate.csv", csv("k,sigma_max", {curve.k, curve.sigma_max}));
  const auto& cert = curve.certificate;
  m.summary["lambda"] = cert.lambda;
  m.summary["omega0"] = cert.omega0;
  m.summary["negative_count"] = cert.negative_count;
  m.summary["certificate_passes"] = cert.passes();
}

inline void branch_run(const RunConfig& c, Outputs& out, RunManifest& m) {
  if (c.params.sigma != -1) throw PreconditionError("branch: defined for sigma = -1");
  const auto q = operator_profile(c);
  const BranchProblem prob(q, c.params, c.modes);
  std::vector<double> s_values;
  for (int j = 1; j <= c.s_count; ++j) s_values.push_back(c.s_max * j / c.s_count);
  const auto branch = continue_branch(prob, s_values);
  std::vector<double> s, omega, res, slope;
  for (std::size_t i = 0; i < branch.size(); ++i) {
    const auto& b = branch[i];
    const auto phi = reconstruct_phi(prob, b);
    double sup = 0.0;
    for (std::size_t iy = 0; iy < phi.grid.y.size(); ++iy)
      for (std::size_t ix = 0; ix < phi.grid.x.size(); ++ix) sup = std::max(sup, std::abs(phi(iy, ix) - q[ix]));
    s.push_back(b.s);
    omega.push_back(b.omega);
    res.push_back(b.residual_sup);
    slope.push_back(sup);
    char name[32];
    std::snprintf(name, sizeof name, "phi_%03zu.fkps", i);
    out.snapshot(name, {phi, 0.0, c.params});
  }
  out.text("branch.csv", csv("s,omega,residual,sup_dx_w", {s, omega, res, slope}));
  m.summary["omega0"] = prob.omega0();
  m.summary["omega_extrapolated"] = extrapolate_omega(branch);
}

inline void verify_run(const RunConfig& c, Outputs& out, RunManifest& m) {
  const auto path = out.dir() / "verify.txt";
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write " + path.string());
  const int failures = acceptance::run(c.only, stdout, f);
  std::fclose(f);
  out.record("verify.txt");
  m.summary["failures"] = failures;
  if (failures) {
    m.status = "failed";
    m.message = std::to_string(failures) + " acceptance criteria failed";
  }
}

}  // namespace detail

inline RunManifest run(const RunConfig& c);

namespace detail {

/// Shortest decimal that round-trips, for directory names.
inline std::string short_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline void sweep_run(const RunConfig& c, Outputs& out, RunManifest& m) {
  std::vector<RunConfig> jobs;
  for (double a : c.sweep_alpha) {
    std::vector<std::string> ov;
    for (const auto& [k, v] : c.echo)
      if (k != "sweep_alpha" && k != "subcommand") ov.push_back(k + "=" + v);
    ov.push_back("subcommand=" + c.sweep_of);
    ov.push_back("alpha=" + short_double(a));
    ov.push_back("out_dir=" + (out.dir() / ("alpha_" + short_double(a))).string());
    jobs.push_back(parse_config("", ov));
  }
  std::vector<RunManifest> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < jobs.size();) results[i] = run(jobs[i]);
  };
  std::vector<std::thread> pool;
  const auto nthreads = std::min<std::size_t>(static_cast<std::size_t>(c.workers), jobs.size());
  for (std::size_t t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  int failed = 0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto rel = std::filesystem::relative(jobs[i].out_dir / "manifest.json", out.dir());
    m.children.push_back(rel.generic_string());
    out.record(rel);
    if (!results[i].completed()) ++failed;
  }
  if (failed) {
    m.status = "failed";
    m.message = std::to_string(failed) + " child runs did not complete";
  }
}

}  // namespace detail

/// Runs one configuration and writes its outputs plus manifest.json into
/// out_dir. Module errors are caught and recorded as status "error".
inline RunManifest run(const RunConfig& c) {
  RunManifest m;
  m.config = c.echo;
  m.start_time = wall_time_now();
  detail::Outputs out(c.out_dir, m);
  try {
    out.text("config.txt", to_text(c));
    if (c.subcommand == "ground-state") detail::ground_state_run(c, out, m);
    else if (c.subcommand == "evolve") detail::experiment_run(c, false, out, m);
    else if (c.subcommand == "experiment") detail::experiment_run(c, true, out, m);
    else if (c.subcommand == "spectrum") detail::spectrum_run(c, out, m);
    else if (c.subcommand == "growth-rate") detail::growth_rate_run(c, out, m);
    else if (c.subcommand == "branch") detail::branch_run(c, out, m);
    else if (c.subcommand == "sweep") detail::sweep_run(c, out, m);
    else if (c.subcommand == "verify") detail::verify_run(c, out, m);
  } catch (const std::exception& e) {
    m.status = "error";
    m.message = e.what();
  }
  m.end_time = wall_time_now();
  io::write_text(c.out_dir / "manifest.json", to_json(m).dump(2) + "\n");
  return m;
}

}  // namespace fkp::cli

#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "anosov/cone.hpp"
#include "anosov/disk_lattice.hpp"
#include "anosov/embedding.hpp"
#include "anosov/errors.hpp"
#include "anosov/flow.hpp"
#include "anosov/mesh.hpp"
#include "anosov/model_space.hpp"
#include "anosov/rng.hpp"

#ifndef ANOSOV_VERSION
#define ANOSOV_VERSION "0.0.0"
#endif

namespace anosov::lab {

using json = nlohmann::json;

enum class Experiment {
  Horizon,
  ModelScan,
  Splitting,
  Lyapunov,
  Conjugate,
  Convergence,
  Periodicity,
  Mesh,
  GaussBonnet,
  PerturbationScan,
};

inline constexpr std::array<std::pair<Experiment, const char*>, 10> kExperimentNames{{
    {Experiment::Horizon, "horizon"},
    {Experiment::ModelScan, "model-scan"},
    {Experiment::Splitting, "splitting"},
    {Experiment::Lyapunov, "lyapunov"},
    {Experiment::Conjugate, "conjugate"},
    {Experiment::Convergence, "convergence"},
    {Experiment::Periodicity, "periodicity"},
    {Experiment::Mesh, "mesh"},
    {Experiment::GaussBonnet, "gauss-bonnet"},
    {Experiment::PerturbationScan, "perturbation-scan"},
}};

inline std::string to_string(Experiment e) {
  for (const auto& [k, name] : kExperimentNames)
    if (k == e) return name;
  return "unknown";
}

inline std::optional<Experiment> experiment_from_string(const std::string& s) {
  for (const auto& [k, name] : kExperimentNames)
    if (s == name) return k;
  return std::nullopt;
}

struct HorizonSection {
  int angular_samples = 64;
  int offset_samples = 64;
  double t_max = 50.0;
  std::size_t random_rays = 10000;
  int q_max = 20;
};

struct ScanSection {
  std::optional<double> tau;
  double tau_factor = 1.5;
  int spatial = 32;
  int angular = 64;
  bool backward = false;
};

struct SampleSection {
  int samples = 4;
  /// Lyapunov horizons; each sample is evaluated at every entry.
  std::vector<double> T{1000.0};
  /// Cone iterations for the splitting experiment.
  int iterations = 20;
};

struct ConjugateSection {
  double s = 7.0;
  double duration = 40.0;
  double u0 = 1.0;
  double v0 = 0.0;
  double angle = 0.0;
  /// Reference integration runs at max_step / refinement.
  double refinement = 10.0;
};

struct MeshSection {
  double s = 7.0;
  int cells_per_unit = 8;
  int tube_rings = 0;
  double collision_tol = 1e-3;
};

struct GaussBonnetSection {
  int t_panels = 256;
  int theta_nodes = 64;
  int plane_grid = 256;
};

enum class PerturbTarget { Plane, Tube, Both };

struct PerturbationSection {
  std::vector<double> amplitudes{0.0, 0.005, 0.01, 0.02, 0.03, 0.05};
  PerturbTarget target = PerturbTarget::Plane;
};

struct LabConfig {
  Experiment experiment = Experiment::ModelScan;
  std::vector<Disk> disks = default_lattice().disks();
  ProfileParams profile;
  QuotientSpec quotient;
  HorizonSection horizon;
  ScanSection scan;
  FlowOptions flow;
  SampleSection sampling;
  ConjugateSection conjugate;
  std::string schedule = "default";
  std::vector<double> s_values{10.0, 20.0, 40.0, 80.0};
  MeshSection mesh;
  GaussBonnetSection gauss_bonnet;
  PerturbationSection perturbation;
  std::uint64_t rng_seed = 1;
  std::string output_dir = "lab-output";
  unsigned threads = 0;

  DiskLattice lattice() const { return DiskLattice(disks); }
};

struct Diagnostic {
  std::string path;
  std::string message;
  std::string str() const { return path + ": " + message; }
};

namespace detail {

class Reader {
 public:
  explicit Reader(std::vector<Diagnostic>& out) : out_(out) {}

  void error(const std::string& path, const std::string& msg) { out_.push_back({path, msg}); }

  bool object(const json& j, const std::string& path, std::initializer_list<const char*> known) {
    if (!j.is_object()) {
      error(path, "must be an object");
      return false;
    }
    for (const auto& [key, _] : j.items()) {
      if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end()) {
        error(join(path, key), "unknown key");
      }
    }
    return true;
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  template <class Check>
  void number(const json& obj, const char* key, const std::string& path, double& out, Check check) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    const std::string p = join(path, key);
    if (!it->is_number()) return error(p, "must be a number");
    const double v = it->get<double>();
    if (!std::isfinite(v)) return error(p, "must be finite");
    if (auto msg = check(v)) return error(p, *msg);
    out = v;
  }

  template <class Int, class Check>
  void integer(const json& obj, const char* key, const std::string& path, Int& out, Check check) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    const std::string p = join(path, key);
    if (!it->is_number_integer()) return error(p, "must be an integer");
    if (it->is_number_unsigned()) {
      const auto v = it->get<std::uint64_t>();
      if (auto msg = check(static_cast<long double>(v))) return error(p, *msg);
      out = static_cast<Int>(v);
      return;
    }
    const auto v = it->get<std::int64_t>();
    if (auto msg = check(static_cast<long double>(v))) return error(p, *msg);
    out = static_cast<Int>(v);
  }

  void boolean(const json& obj, const char* key, const std::string& path, bool& out) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    if (!it->is_boolean()) return error(join(path, key), "must be true or false");
    out = it->get<bool>();
  }

  void string(const json& obj, const char* key, const std::string& path, std::string& out) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    if (!it->is_string()) return error(join(path, key), "must be a string");
    out = it->get<std::string>();
  }

  template <class Check>
  void number_list(const json& obj, const char* key, const std::string& path, std::vector<double>& out, Check check) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    const std::string p = join(path, key);
    if (!it->is_array() || it->empty()) return error(p, "must be a non-empty list of numbers");
    std::vector<double> vals;
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& x = (*it)[i];
      const std::string pi = p + "[" + std::to_string(i) + "]";
      if (!x.is_number() || !std::isfinite(x.get<double>())) {
        error(pi, "must be a finite number");
        continue;
      }
      if (auto msg = check(x.get<double>())) {
        error(pi, *msg);
        continue;
      }
      vals.push_back(x.get<double>());
    }
    out = vals;
  }

 private:
  std::vector<Diagnostic>& out_;
};

using Msg = std::optional<std::string>;

inline auto positive() {
  return [](double v) -> Msg { return v > 0.0 ? Msg{} : Msg{"must be positive"}; };
}
inline auto in_range(long double lo, long double hi) {
  return [lo, hi](long double v) -> Msg {
    if (v < lo || v > hi) {
      std::ostringstream os;
      os << "must lie in [" << static_cast<double>(lo) << ", " << static_cast<double>(hi) << "]";
      return os.str();
    }
    return std::nullopt;
  };
}

inline void read_lattice(Reader& r, const json& j, LabConfig& c) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "default") c.disks = default_lattice().disks();
    else if (s == "empty") c.disks.clear();
    else r.error("lattice", "must be \"default\", \"empty\" or an object with \"disks\"");
    return;
  }
  if (!r.object(j, "lattice", {"disks"})) return;
  const auto it = j.find("disks");
  if (it == j.end()) return r.error("lattice.disks", "missing");
  if (!it->is_array()) return r.error("lattice.disks", "must be a list");
  std::vector<Disk> disks;
  bool ok = true;
  for (std::size_t i = 0; i < it->size(); ++i) {
    const json& d = (*it)[i];
    const std::string p = "lattice.disks[" + std::to_string(i) + "]";
    if (!r.object(d, p, {"center", "radius"})) {
      ok = false;
      continue;
    }
    Disk disk;
    const auto ce = d.find("center");
    if (ce == d.end() || !ce->is_array() || ce->size() != 2 || !(*ce)[0].is_number() || !(*ce)[1].is_number()) {
      r.error(p + ".center", "must be a pair of numbers");
      ok = false;
    } else {
      disk.center = {(*ce)[0].get<double>(), (*ce)[1].get<double>()};
      if (!(disk.center.x >= 0.0 && disk.center.x < 1.0 && disk.center.y >= 0.0 && disk.center.y < 1.0)) {
        r.error(p + ".center", "center must lie in [0,1)^2");
        ok = false;
      }
    }
    const auto ra = d.find("radius");
    if (ra == d.end() || !ra->is_number()) {
      r.error(p + ".radius", "must be a number");
      ok = false;
    } else {
      disk.radius = ra->get<double>();
      if (!(disk.radius > 0.0)) {
        r.error(p + ".radius", "radius must be > 0");
        ok = false;
      } else if (!(disk.radius < 0.5)) {
        r.error(p + ".radius", "radius must be < 0.5");
        ok = false;
      }
    }
    disks.push_back(disk);
  }
  if (!ok) return;
  try {
    DiskLattice check(disks);
  } catch (const Error& e) {
    return r.error("lattice.disks", e.what());
  }
  c.disks = disks;
}

}  // namespace detail

/// Parses a config; diagnostics are appended to `diags` and the returned
/// config holds defaults for every field that failed.
inline LabConfig parse_config(const json& j, std::vector<Diagnostic>& diags) {
  using namespace detail;
  LabConfig c;
  Reader r(diags);
  if (!r.object(j, "", {"experiment", "lattice", "profile", "quotient", "horizon", "scan", "flow", "sampling",
                        "conjugate", "schedule", "s_values", "mesh", "gauss_bonnet", "perturbation", "rng_seed",
                        "output_dir", "threads"})) {
    return c;
  }

  if (const auto it = j.find("experiment"); it == j.end()) {
    r.error("experiment", "missing");
  } else if (!it->is_string() || !experiment_from_string(it->get<std::string>())) {
    std::string names;
    for (const auto& [_, n] : kExperimentNames) names += (names.empty() ? "" : ", ") + std::string(n);
    r.error("experiment", "must be one of " + names);
  } else {
    c.experiment = *experiment_from_string(it->get<std::string>());
  }

  if (const auto it = j.find("lattice"); it != j.end()) read_lattice(r, *it, c);

  if (const auto it = j.find("profile"); it != j.end() &&
      r.object(*it, "profile", {"depth", "edge_width", "collar", "min_waist_fraction"})) {
    auto open_unit = [](double v) -> Msg { return v > 0.0 && v < 1.0 ? Msg{} : Msg{"must lie in (0, 1)"}; };
    r.number(*it, "depth", "profile", c.profile.depth, open_unit);
    r.number(*it, "edge_width", "profile", c.profile.edge_width,
             [](double v) -> Msg { return v > 0.0 && v < 0.5 ? Msg{} : Msg{"must lie in (0, 0.5)"}; });
    r.number(*it, "collar", "profile", c.profile.collar,
             [](double v) -> Msg { return v > 0.0 && v <= 0.2 ? Msg{} : Msg{"must lie in (0, 0.2]"}; });
    r.number(*it, "min_waist_fraction", "profile", c.profile.min_waist_fraction, open_unit);
  }

  if (const auto it = j.find("quotient"); it != j.end()) {
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number_integer() || !(*it)[1].is_number_integer()) {
      r.error("quotient", "must be a pair of integers [a, b]");
    } else {
      const long a = (*it)[0].get<long>(), b = (*it)[1].get<long>();
      if (a < 1 || b < 1 || a > 64 || b > 64) r.error("quotient", "periods must lie in [1, 64]");
      else c.quotient = {static_cast<int>(a), static_cast<int>(b)};
    }
  }

  if (const auto it = j.find("horizon");
      it != j.end() && r.object(*it, "horizon", {"angular_samples", "offset_samples", "t_max", "random_rays", "q_max"})) {
    r.integer(*it, "angular_samples", "horizon", c.horizon.angular_samples, in_range(8, 4096));
    r.integer(*it, "offset_samples", "horizon", c.horizon.offset_samples, in_range(8, 4096));
    r.number(*it, "t_max", "horizon", c.horizon.t_max, positive());
    r.integer(*it, "random_rays", "horizon", c.horizon.random_rays, in_range(0, 1e8));
    r.integer(*it, "q_max", "horizon", c.horizon.q_max, in_range(1, 200));
  }

  if (const auto it = j.find("scan");
      it != j.end() && r.object(*it, "scan", {"tau", "tau_factor", "spatial", "angular", "backward"})) {
    if (const auto t = it->find("tau"); t != it->end() && !t->is_null()) {
      double tau = 0.0;
      r.number(*it, "tau", "scan", tau, [](double v) -> Msg { return v > 0.0 ? Msg{} : Msg{"tau must be positive"}; });
      if (tau > 0.0) c.scan.tau = tau;
    }
    r.number(*it, "tau_factor", "scan", c.scan.tau_factor, positive());
    r.integer(*it, "spatial", "scan", c.scan.spatial, in_range(2, 1024));
    r.integer(*it, "angular", "scan", c.scan.angular, in_range(2, 4096));
    r.boolean(*it, "backward", "scan", c.scan.backward);
  }

  if (const auto it = j.find("flow"); it != j.end() && r.object(*it, "flow", {"rtol", "atol", "max_step"})) {
    r.number(*it, "rtol", "flow", c.flow.rtol,
             [](double v) -> Msg { return v > 0.0 && v <= 1e-3 ? Msg{} : Msg{"must lie in (0, 1e-3]"}; });
    r.number(*it, "atol", "flow", c.flow.atol,
             [](double v) -> Msg { return v > 0.0 && v <= 1e-3 ? Msg{} : Msg{"must lie in (0, 1e-3]"}; });
    r.number(*it, "max_step", "flow", c.flow.max_step,
             [](double v) -> Msg { return v > 0.0 && v <= 1.0 ? Msg{} : Msg{"must lie in (0, 1]"}; });
  }

  if (const auto it = j.find("sampling"); it != j.end() && r.object(*it, "sampling", {"samples", "T", "iterations"})) {
    r.integer(*it, "samples", "sampling", c.sampling.samples, in_range(1, 100000));
    r.number_list(*it, "T", "sampling", c.sampling.T, positive());
    r.integer(*it, "iterations", "sampling", c.sampling.iterations, in_range(1, 10000));
  }

  if (const auto it = j.find("conjugate");
      it != j.end() && r.object(*it, "conjugate", {"s", "duration", "u0", "v0", "angle", "refinement"})) {
    r.number(*it, "s", "conjugate", c.conjugate.s, positive());
    r.number(*it, "duration", "conjugate", c.conjugate.duration, positive());
    r.number(*it, "u0", "conjugate", c.conjugate.u0, [](double) -> Msg { return std::nullopt; });
    r.number(*it, "v0", "conjugate", c.conjugate.v0, [](double) -> Msg { return std::nullopt; });
    r.number(*it, "angle", "conjugate", c.conjugate.angle, [](double) -> Msg { return std::nullopt; });
    r.number(*it, "refinement", "conjugate", c.conjugate.refinement,
             [](double v) -> Msg { return v >= 1.0 ? Msg{} : Msg{"must be >= 1"}; });
  }

  r.string(j, "schedule", "", c.schedule);
  if (!schedule_by_name(c.schedule)) r.error("schedule", "must be one of default, equal, sqrt2");
  r.number_list(j, "s_values", "", c.s_values, positive());

  if (const auto it = j.find("mesh");
      it != j.end() && r.object(*it, "mesh", {"s", "cells_per_unit", "tube_rings", "collision_tol"})) {
    r.number(*it, "s", "mesh", c.mesh.s, positive());
    r.integer(*it, "cells_per_unit", "mesh", c.mesh.cells_per_unit, in_range(1, 256));
    r.integer(*it, "tube_rings", "mesh", c.mesh.tube_rings, in_range(0, 100000));
    r.number(*it, "collision_tol", "mesh", c.mesh.collision_tol, positive());
  }

  if (const auto it = j.find("gauss_bonnet");
      it != j.end() && r.object(*it, "gauss_bonnet", {"t_panels", "theta_nodes", "plane_grid"})) {
    r.integer(*it, "t_panels", "gauss_bonnet", c.gauss_bonnet.t_panels, in_range(1, 1 << 20));
    r.integer(*it, "theta_nodes", "gauss_bonnet", c.gauss_bonnet.theta_nodes, in_range(1, 1 << 16));
    r.integer(*it, "plane_grid", "gauss_bonnet", c.gauss_bonnet.plane_grid, in_range(1, 1 << 14));
  }

  if (const auto it = j.find("perturbation");
      it != j.end() && r.object(*it, "perturbation", {"amplitudes", "target"})) {
    r.number_list(*it, "amplitudes", "perturbation", c.perturbation.amplitudes,
                  [](double v) -> Msg { return v > -1.0 ? Msg{} : Msg{"must exceed -1"}; });
    std::string target = "plane";
    r.string(*it, "target", "perturbation", target);
    if (target == "plane") c.perturbation.target = PerturbTarget::Plane;
    else if (target == "tube") c.perturbation.target = PerturbTarget::Tube;
    else if (target == "both") c.perturbation.target = PerturbTarget::Both;
    else r.error("perturbation.target", "must be plane, tube or both");
  }

  r.integer(j, "rng_seed", "", c.rng_seed, in_range(0, static_cast<long double>(UINT64_MAX)));
  r.string(j, "output_dir", "", c.output_dir);
  if (c.output_dir.empty()) r.error("output_dir", "must not be empty");
  r.integer(j, "threads", "", c.threads, in_range(0, 1024));

  // Cross-field checks that need the assembled surface.
  if (diags.empty()) {
    const bool needs_model = c.experiment == Experiment::ModelScan || c.experiment == Experiment::Splitting ||
                             c.experiment == Experiment::Lyapunov || c.experiment == Experiment::GaussBonnet ||
                             c.experiment == Experiment::PerturbationScan;
    if (needs_model) {
      try {
        ModelOptions opt;
        opt.profile = c.profile;
        opt.quotient = c.quotient;
        build_model_space(c.lattice(), opt);
      } catch (const Error& e) {
        r.error("profile", e.what());
      }
    }
    if (c.experiment == Experiment::Lyapunov) {
      for (std::size_t i = 0; i < c.sampling.T.size(); ++i) {
        if (c.scan.tau && c.sampling.T[i] < *c.scan.tau) {
          r.error("sampling.T[" + std::to_string(i) + "]", "must be at least scan.tau");
        }
      }
    }
    if (c.experiment == Experiment::Mesh || c.experiment == Experiment::Conjugate) {
      const std::string sec = c.experiment == Experiment::Mesh ? "mesh" : "conjugate";
      const double s = c.experiment == Experiment::Mesh ? c.mesh.s : c.conjugate.s;
      const EmbeddingParams e = schedule_by_name(c.schedule)->at(s);
      try {
        e.require_embedded_slab();
        if (!periodicity_check(e)) r.error(sec + ".s", "schedule radii are not integer multiples of 1/(2 pi) at this s");
      } catch (const Error& err) {
        r.error(sec + ".s", err.what());
      }
    }
  }
  return c;
}

inline std::vector<Diagnostic> validate(const json& j) {
  std::vector<Diagnostic> diags;
  parse_config(j, diags);
  return diags;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
}

/// Parses and validates, throwing ConfigError listing every diagnostic.
inline LabConfig load_config(const json& j) {
  std::vector<Diagnostic> diags;
  LabConfig c = parse_config(j, diags);
  if (!diags.empty()) {
    std::string msg = "invalid config:";
    for (const auto& d : diags) msg += "\n  " + d.str();
    throw ConfigError(msg);
  }
  return c;
}

/// The config with every default filled in, as echoed into the manifest.
inline json config_to_json(const LabConfig& c) {
  json disks = json::array();
  for (const Disk& d : c.disks) disks.push_back({{"center", {d.center.x, d.center.y}}, {"radius", d.radius}});
  const char* target = c.perturbation.target == PerturbTarget::Plane  ? "plane"
                       : c.perturbation.target == PerturbTarget::Tube ? "tube"
                                                                      : "both";
  return {
      {"experiment", to_string(c.experiment)},
      {"lattice", {{"disks", disks}}},
      {"profile",
       {{"depth", c.profile.depth},
        {"edge_width", c.profile.edge_width},
        {"collar", c.profile.collar},
        {"min_waist_fraction", c.profile.min_waist_fraction}}},
      {"quotient", {c.quotient.a, c.quotient.b}},
      {"horizon",
       {{"angular_samples", c.horizon.angular_samples},
        {"offset_samples", c.horizon.offset_samples},
        {"t_max", c.horizon.t_max},
        {"random_rays", c.horizon.random_rays},
        {"q_max", c.horizon.q_max}}},
      {"scan",
       {{"tau", c.scan.tau ? json(*c.scan.tau) : json(nullptr)},
        {"tau_factor", c.scan.tau_factor},
        {"spatial", c.scan.spatial},
        {"angular", c.scan.angular},
        {"backward", c.scan.backward}}},
      {"flow", {{"rtol", c.flow.rtol}, {"atol", c.flow.atol}, {"max_step", c.flow.max_step}}},
      {"sampling", {{"samples", c.sampling.samples}, {"T", c.sampling.T}, {"iterations", c.sampling.iterations}}},
      {"conjugate",
       {{"s", c.conjugate.s},
        {"duration", c.conjugate.duration},
        {"u0", c.conjugate.u0},
        {"v0", c.conjugate.v0},
        {"angle", c.conjugate.angle},
        {"refinement", c.conjugate.refinement}}},
      {"schedule", c.schedule},
      {"s_values", c.s_values},
      {"mesh",
       {{"s", c.mesh.s},
        {"cells_per_unit", c.mesh.cells_per_unit},
        {"tube_rings", c.mesh.tube_rings},
        {"collision_tol", c.mesh.collision_tol}}},
      {"gauss_bonnet",
       {{"t_panels", c.gauss_bonnet.t_panels},
        {"theta_nodes", c.gauss_bonnet.theta_nodes},
        {"plane_grid", c.gauss_bonnet.plane_grid}}},
      {"perturbation", {{"amplitudes", c.perturbation.amplitudes}, {"target", target}}},
      {"rng_seed", c.rng_seed},
      {"output_dir", c.output_dir},
      {"threads", c.threads},
  };
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw InvalidArgument("SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Number as JSON, with non-finite values as strings so they survive a round trip.
inline json json_number(double v) {
  if (std::isfinite(v)) return v;
  return csv_number(v);
}

inline int exit_code_for(ErrorClass cls) {
  switch (cls) {
    case ErrorClass::Config: return 2;
    case ErrorClass::Construction: return 3;
    case ErrorClass::Numerical: return 4;
  }
  return 4;
}

struct OutputFile {
  std::string name;
  std::string sha256;
  std::size_t bytes = 0;
};

struct RunResult {
  int exit_code = 0;
  std::string message;
  std::filesystem::path output_dir;
  std::vector<OutputFile> files;
  json summary;
};

namespace detail {

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Collects the files of one run and removes them if the run fails.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;
  ~OutputSet() {
    if (!committed_) discard();
  }

  void write(const std::string& name, const std::string& content) {
    const std::filesystem::path p = dir_ / name;
    written_.push_back(p);
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + p.string());
    out << content;
    out.close();
    if (!out) throw InvalidArgument("failed writing " + p.string());
    files_.push_back({name, sha256_hex(content), content.size()});
  }

  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  const std::vector<OutputFile>& files() const { return files_; }
  void commit() { committed_ = true; }

  void discard() {
    std::error_code ec;
    for (const auto& p : written_) std::filesystem::remove(p, ec);
    std::filesystem::remove(dir_ / "manifest.json", ec);
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> written_;
  std::vector<OutputFile> files_;
  bool committed_ = false;
};

inline HorizonOptions horizon_options(const LabConfig& c) {
  HorizonOptions h;
  h.angular_samples = c.horizon.angular_samples;
  h.offset_samples = c.horizon.offset_samples;
  h.t_max = c.horizon.t_max;
  h.random_rays = c.horizon.random_rays;
  h.q_max = c.horizon.q_max;
  h.seed = c.rng_seed;
  h.threads = c.threads;
  return h;
}

inline ModelOptions model_options(const LabConfig& c) {
  ModelOptions o;
  o.profile = c.profile;
  o.quotient = c.quotient;
  return o;
}

struct TauChoice {
  double tau = 0.0;
  std::string source;
  double bound_T = 0.0;
};

/// scan.tau when given; otherwise tau_factor x the horizon bound, or
/// tau_factor alone when the horizon is infinite.
inline TauChoice choose_tau(const LabConfig& c, const DiskLattice& lattice) {
  TauChoice t;
  const HorizonReport h = finite_horizon_bound(lattice, horizon_options(c));
  t.bound_T = h.bound_T;
  if (c.scan.tau) {
    t.tau = *c.scan.tau;
    t.source = "config";
  } else if (!h.violated) {
    t.tau = c.scan.tau_factor * h.bound_T;
    t.source = "tau_factor * bound_T";
  } else {
    t.tau = c.scan.tau_factor;
    t.source = "tau_factor (infinite horizon)";
  }
  return t;
}

inline json corridor_json(const std::optional<CorridorWitness>& w) {
  if (!w) return nullptr;
  return {{"angle", w->angle}, {"offset", w->offset}, {"width", w->width}};
}

/// Phase points drawn from the bottom plane with a counter-based generator.
inline std::vector<TangentState> random_states(const Atlas& atlas, const QuotientSpec& q, std::uint64_t seed,
                                               int count, std::uint64_t stream) {
  const CounterRng rng(seed, stream);
  const Chart& bottom = atlas.chart({ChartKind::PlaneBottom, 0});
  std::vector<TangentState> out;
  for (std::uint64_t k = 0; static_cast<int>(out.size()) < count; ++k) {
    if (k > 1000000) throw InvalidArgument("could not place random samples on the bottom plane");
    const Vec2 p{q.a * rng.uniform(3 * k), q.b * rng.uniform(3 * k + 1)};
    if (!bottom.owns(p)) continue;
    out.push_back(make_state(atlas, {bottom.id(), p}, 2.0 * std::numbers::pi * rng.uniform(3 * k + 2)));
  }
  return out;
}

inline json state_json(const TangentState& x) {
  return {{"chart", anosov::to_string(x.p.chart)}, {"x1", x.p.coords.x}, {"x2", x.p.coords.y},
          {"v1", x.v.x}, {"v2", x.v.y}};
}

inline ConeScanConfig scan_config(const LabConfig& c, double tau, bool keep) {
  ConeScanConfig s;
  s.tau = tau;
  s.spatial = c.scan.spatial;
  s.angular = c.scan.angular;
  s.flow = c.flow;
  s.threads = c.threads;
  s.backward = c.scan.backward;
  s.keep_samples = keep;
  return s;
}

inline json scan_summary(const ConeScanReport& r) {
  std::size_t errors = 0, zero_margin = 0;
  for (const auto& v : r.violations) {
    if (!v.error.empty()) ++errors;
    else if (std::fabs(v.margin) <= 1e-12) ++zero_margin;
  }
  const double n = static_cast<double>(std::max<std::size_t>(r.n_samples, 1));
  return {{"verdict", r.pass() ? "pass" : "fail"},
          {"label", "empirical"},
          {"c_star", r.max_delta_theta},
          {"min_margin", json_number(r.min_edge_margin)},
          {"samples", r.n_samples},
          {"violations", r.violations.size()},
          {"integration_failures", errors},
          {"violation_fraction", static_cast<double>(r.violations.size()) / n},
          {"zero_margin_fraction", static_cast<double>(zero_margin) / n}};
}

/// C^2 size of the bump term of a perturbation with unit amplitude: max of
/// |B|, |grad B| and the largest Hessian entry, in chart coordinates.
inline double bump_c2_norm(double radius) {
  double best = 0.0;
  for (int i = 0; i <= 2000; ++i) {
    const double x = radius * i / 2000.0;
    const Jet X = Jet::variable(x, 0), Y = Jet::variable(0.0, 1);
    const Jet b = bump_profile((X * X + Y * Y) / (radius * radius));
    best = std::max({best, std::fabs(b.v), std::hypot(b.d[0], b.d[1]), std::fabs(b.h[0]), std::fabs(b.h[1]),
                     std::fabs(b.h[2])});
  }
  return best;
}

inline void run_horizon(const LabConfig& c, OutputSet& out, json& summary) {
  const HorizonReport h = finite_horizon_bound(c.lattice(), horizon_options(c));
  const json j = {{"violated", h.violated},
                  {"bound_T", json_number(h.bound_T)},
                  {"worst_ray", {{"point", {h.worst_ray.point.x, h.worst_ray.point.y}}, {"angle", h.worst_ray.angle}}},
                  {"corridor_witness", corridor_json(h.corridor_witness)},
                  {"rays_traced", h.rays_traced},
                  {"t_max", c.horizon.t_max}};
  out.write_json("horizon.json", j);
  summary = {{"violated", h.violated}, {"bound_T", json_number(h.bound_T)}};
}

inline void run_model_scan(const LabConfig& c, OutputSet& out, json& summary) {
  const DiskLattice lattice = c.lattice();
  const ModelSpace ms = build_model_space(lattice, model_options(c));
  const TauChoice tau = choose_tau(c, lattice);
  const ConeScanReport r = scan_uniform_invariance(ms.atlas, scan_config(c, tau.tau, true));
  std::string csv = "chart,x1,x2,angle,delta_theta,margin\n";
  for (const ConeSample& s : r.samples) {
    csv += anosov::to_string(s.chart) + "," + csv_number(s.coords.x) + "," + csv_number(s.coords.y) + "," +
           csv_number(s.angle) + "," + csv_number(s.delta_theta) + "," + csv_number(s.margin) + "\n";
  }
  out.write("cone_scan.csv", csv);
  json j = scan_summary(r);
  j["tau"] = tau.tau;
  j["tau_source"] = tau.source;
  j["bound_T"] = json_number(tau.bound_T);
  j["grid"] = {{"spatial", c.scan.spatial}, {"angular", c.scan.angular}, {"charts", ms.atlas.charts().size()}};
  j["backward"] = c.scan.backward;
  out.write_json("cone_scan.json", j);
  summary = {{"verdict", j["verdict"]}, {"c_star", j["c_star"]}, {"min_margin", j["min_margin"]}, {"tau", tau.tau}};
}

inline void run_splitting(const LabConfig& c, OutputSet& out, json& summary) {
  const DiskLattice lattice = c.lattice();
  const ModelSpace ms = build_model_space(lattice, model_options(c));
  const TauChoice tau = choose_tau(c, lattice);
  const auto xs = random_states(ms.atlas, c.quotient, c.rng_seed, c.sampling.samples, 0x73706c6974ULL);
  std::vector<SplittingEstimate> est(xs.size());
  parallel_for(xs.size(), c.threads,
               [&](std::size_t i) { est[i] = estimate_splitting(ms.atlas, xs[i], tau.tau, c.sampling.iterations, c.flow); });
  std::string csv = "chart,x1,x2,v1,v2,eu_h,eu_v,es_h,es_v,residual_unstable,residual_stable,converged\n";
  std::size_t converged = 0;
  double worst = 0.0;
  for (const auto& e : est) {
    csv += anosov::to_string(e.x.p.chart) + "," + csv_number(e.x.p.coords.x) + "," + csv_number(e.x.p.coords.y) + "," +
           csv_number(e.x.v.x) + "," + csv_number(e.x.v.y) + "," + csv_number(e.eu.c_h) + "," + csv_number(e.eu.c_v) +
           "," + csv_number(e.es.c_h) + "," + csv_number(e.es.c_v) + "," + csv_number(e.residual_unstable) + "," +
           csv_number(e.residual_stable) + "," + (e.converged ? "1" : "0") + "\n";
    converged += e.converged ? 1 : 0;
    worst = std::max({worst, e.residual_unstable, e.residual_stable});
  }
  out.write("splitting.csv", csv);
  summary = {{"samples", est.size()}, {"converged", converged}, {"max_residual", worst}, {"tau", tau.tau},
             {"iterations", c.sampling.iterations}};
  out.write_json("splitting.json", summary);
}

inline void run_lyapunov(const LabConfig& c, OutputSet& out, json& summary) {
  const DiskLattice lattice = c.lattice();
  const ModelSpace ms = build_model_space(lattice, model_options(c));
  const TauChoice tau = choose_tau(c, lattice);
  const auto xs = random_states(ms.atlas, c.quotient, c.rng_seed, c.sampling.samples, 0x6c79617075ULL);
  const std::size_t nT = c.sampling.T.size();
  std::vector<LyapunovEstimate> est(xs.size() * nT);
  parallel_for(est.size(), c.threads, [&](std::size_t i) {
    est[i] = lyapunov_exponent(ms.atlas, xs[i / nT], c.sampling.T[i % nT], tau.tau, c.flow);
  });
  json rows = json::array();
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& e : est) {
    rows.push_back({{"x", state_json(e.x0)},
                    {"T", e.T},
                    {"lambda", e.lambda},
                    {"C_bounds", {e.C_bounds.first, e.C_bounds.second}}});
    lo = std::min(lo, e.lambda);
    hi = std::max(hi, e.lambda);
  }
  out.write_json("lyapunov.json", {{"tau", tau.tau}, {"estimates", rows}, {"lambda_min", lo}, {"lambda_max", hi}});
  summary = {{"lambda_min", lo}, {"lambda_max", hi}, {"estimates", est.size()}};
}

inline void run_conjugate(const LabConfig& c, OutputSet& out, json& summary) {
  const EmbeddingParams e = schedule_by_name(c.schedule)->at(c.conjugate.s);
  const ModelSpace ms = embedded_model_space(DiskLattice(), e, c.profile);
  const ChartPoint p{{ChartKind::PlaneBottom, 0}, {c.conjugate.u0, c.conjugate.v0}};
  const TangentState x = make_state(ms.atlas, p, c.conjugate.angle);
  const auto hit = detect_conjugate_point(ms.atlas, x, c.conjugate.duration, c.flow);
  const auto ref = torus_conjugate_time_reference(e, c.conjugate.u0, c.conjugate.v0, c.conjugate.angle,
                                                  c.conjugate.duration, c.flow.max_step / c.conjugate.refinement);
  const json j = {{"R1", e.R1},
                  {"R2", e.R2},
                  {"start", state_json(x)},
                  {"t_star", hit ? json(*hit) : json(nullptr)},
                  {"reference_t_star", ref ? json(*ref) : json(nullptr)},
                  {"reference_step", c.flow.max_step / c.conjugate.refinement},
                  {"difference", hit && ref ? json(std::fabs(*hit - *ref)) : json(nullptr)},
                  {"outer_equator_closed_form", std::numbers::pi * std::sqrt(e.R2 * (e.R1 + e.R2))}};
  out.write_json("conjugate.json", j);
  summary = {{"t_star", j["t_star"]}, {"reference_t_star", j["reference_t_star"]}};
}

inline void run_convergence(const LabConfig& c, OutputSet& out, json& summary) {
  const auto rows = convergence_report(*schedule_by_name(c.schedule), c.s_values);
  std::string csv = "s,sup0,sup1,sup2\n";
  for (const auto& r : rows) {
    csv += csv_number(r.s) + "," + csv_number(r.sup0) + "," + csv_number(r.sup1) + "," + csv_number(r.sup2) + "\n";
  }
  out.write("convergence.csv", csv);
  json ratios = json::array();
  for (std::size_t i = 1; i < rows.size(); ++i) ratios.push_back(rows[i].sup0 / rows[i - 1].sup0);
  summary = {{"schedule", c.schedule}, {"rows", rows.size()}, {"sup0_ratios", ratios}};
}

inline void run_periodicity(const LabConfig& c, OutputSet& out, json& summary) {
  const RadiusSchedule sch = *schedule_by_name(c.schedule);
  const long dpc = static_cast<long>(c.disks.size());
  json entries = json::array();
  std::size_t periodic = 0;
  for (double s : c.s_values) {
    const EmbeddingParams e = sch.at(s);
    const auto mn = periodicity_check(e);
    json row = {{"s", s}, {"R1", e.R1}, {"R2", e.R2}, {"periodic", mn.has_value()}};
    if (mn) {
      row["m"] = mn->first;
      row["n"] = mn->second;
      row["genus"] = embedded_genus(mn->first, mn->second, dpc);
      ++periodic;
    }
    entries.push_back(row);
  }
  out.write_json("periodicity.json", {{"schedule", c.schedule}, {"disks_per_cell", dpc}, {"entries", entries}});
  summary = {{"periodic", periodic}, {"tested", c.s_values.size()}};
}

inline void run_mesh(const LabConfig& c, OutputSet& out, json& summary) {
  const EmbeddingParams e = schedule_by_name(c.schedule)->at(c.mesh.s);
  const ModelSpace ms = embedded_model_space(c.lattice(), e, c.profile);
  const auto mn = *periodicity_check(e);
  MeshResolution res;
  res.nu = static_cast<int>(mn.first * c.mesh.cells_per_unit);
  res.nv = static_cast<int>(mn.second * c.mesh.cells_per_unit);
  res.tube_rings = c.mesh.tube_rings;
  const Mesh mesh = export_mesh(ms, e, res, c.threads);
  std::ostringstream os;
  mesh.write_obj(os);
  out.write("surface.obj", os.str());
  const CollisionReport col = tube_collision_spot_check(mesh, c.mesh.collision_tol);
  const long genus = embedded_genus(mn.first, mn.second, static_cast<long>(c.disks.size()));
  summary = {{"m", mn.first},
             {"n", mn.second},
             {"vertices", mesh.vertices.size()},
             {"faces", mesh.faces.size()},
             {"euler_characteristic", mesh.euler_characteristic()},
             {"expected_euler_characteristic", 2 - 2 * genus},
             {"closed", mesh.closed()},
             {"tube_collision_suspected", col.collision},
             {"collision_search_radius", c.mesh.collision_tol},
             {"min_tube_vertex_distance", std::isfinite(col.min_distance) ? json(col.min_distance) : json(nullptr)}};
  out.write_json("mesh.json", summary);
}

inline void run_gauss_bonnet(const LabConfig& c, OutputSet& out, json& summary) {
  const ModelSpace ms = build_model_space(c.lattice(), model_options(c));
  const double total =
      gauss_bonnet_integral(ms.atlas, c.gauss_bonnet.t_panels, c.gauss_bonnet.theta_nodes, c.gauss_bonnet.plane_grid);
  const int genus = ms.genus();
  const double expected = 2.0 * std::numbers::pi * (2.0 - 2.0 * genus);
  summary = {{"integral", total},
             {"genus", genus},
             {"expected", expected},
             {"relative_error", expected != 0.0 ? std::fabs(total - expected) / std::fabs(expected) : std::fabs(total)}};
  out.write_json("gauss_bonnet.json", summary);
}

inline void run_perturbation_scan(const LabConfig& c, OutputSet& out, json& summary) {
  const DiskLattice lattice = c.lattice();
  const TauChoice tau = choose_tau(c, lattice);
  std::vector<double> amps = c.perturbation.amplitudes;
  std::sort(amps.begin(), amps.end());
  const PerturbTarget target = c.perturbation.target;
  const bool plane = target != PerturbTarget::Tube, tube = target != PerturbTarget::Plane;
  const PlaneBump shape = default_plane_bump(lattice, c.profile.collar, 1.0);
  const double unit_c2 = bump_c2_norm(shape.radius);
  std::string csv = "epsilon,c2_norm,verdict,c_star,min_margin,violations\n";
  json rows = json::array();
  std::optional<double> eps0;
  bool all_pass_so_far = true;
  for (double eps : amps) {
    ModelOptions o = model_options(c);
    if (plane) o.plane_bump = PlaneBump{shape.center, shape.radius, eps};
    if (tube) o.tube_bump = eps;
    const ModelSpace ms = build_model_space(lattice, o);
    const ConeScanReport r = scan_uniform_invariance(ms.atlas, scan_config(c, tau.tau, false));
    const double c2 = std::fabs(eps) * unit_c2;
    csv += csv_number(eps) + "," + csv_number(c2) + "," + (r.pass() ? "pass" : "fail") + "," +
           csv_number(r.max_delta_theta) + "," + csv_number(r.min_edge_margin) + "," +
           std::to_string(r.violations.size()) + "\n";
    json row = scan_summary(r);
    row["epsilon"] = eps;
    row["c2_norm"] = c2;
    rows.push_back(row);
    if (eps >= 0.0 && all_pass_so_far && r.pass()) eps0 = eps;
    if (eps >= 0.0 && !r.pass()) all_pass_so_far = false;
  }
  out.write("perturbation_scan.csv", csv);
  summary = {{"tau", tau.tau},
             {"target", target == PerturbTarget::Plane ? "plane" : target == PerturbTarget::Tube ? "tube" : "both"},
             {"bump_center", {shape.center.x, shape.center.y}},
             {"bump_radius", shape.radius},
             {"unit_c2_norm", unit_c2},
             {"epsilon0", eps0 ? json(*eps0) : json(nullptr)},
             {"rows", rows}};
  out.write_json("perturbation_scan.json", summary);
  summary.erase("rows");
}

}  // namespace detail

/// Runs one experiment into cfg.output_dir. Never throws: failures are
/// reported through the exit code and message, and partial outputs removed.
inline RunResult run(const LabConfig& cfg) {
  RunResult res;
  res.output_dir = cfg.output_dir;
  const auto started = std::chrono::system_clock::now();
  std::error_code ec;
  std::filesystem::create_directories(res.output_dir, ec);
  if (ec) {
    res.exit_code = 3;
    res.message = "cannot create output directory " + res.output_dir.string() + ": " + ec.message();
    return res;
  }
  detail::OutputSet out(res.output_dir);
  try {
    json summary;
    switch (cfg.experiment) {
      case Experiment::Horizon: detail::run_horizon(cfg, out, summary); break;
      case Experiment::ModelScan: detail::run_model_scan(cfg, out, summary); break;
      case Experiment::Splitting: detail::run_splitting(cfg, out, summary); break;
      case Experiment::Lyapunov: detail::run_lyapunov(cfg, out, summary); break;
      case Experiment::Conjugate: detail::run_conjugate(cfg, out, summary); break;
      case Experiment::Convergence: detail::run_convergence(cfg, out, summary); break;
      case Experiment::Periodicity: detail::run_periodicity(cfg, out, summary); break;
      case Experiment::Mesh: detail::run_mesh(cfg, out, summary); break;
      case Experiment::GaussBonnet: detail::run_gauss_bonnet(cfg, out, summary); break;
      case Experiment::PerturbationScan: detail::run_perturbation_scan(cfg, out, summary); break;
    }
    json files = json::array();
    for (const auto& f : out.files()) files.push_back({{"path", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    const json manifest = {{"artifact", "anosov-lab"},
                           {"artifact_version", ANOSOV_VERSION},
                           {"experiment", to_string(cfg.experiment)},
                           {"started_at", detail::utc_timestamp(started)},
                           {"finished_at", detail::utc_timestamp(std::chrono::system_clock::now())},
                           {"config", config_to_json(cfg)},
                           {"summary", summary},
                           {"files", files}};
    std::ofstream mf(res.output_dir / "manifest.json", std::ios::trunc);
    mf << manifest.dump(2) << "\n";
    mf.close();
    if (!mf) throw InvalidArgument("failed writing manifest.json");
    out.commit();
    res.files = out.files();
    res.summary = summary;
    res.message = "ok";
  } catch (const Error& e) {
    res.exit_code = exit_code_for(e.error_class());
    res.message = e.what();
  } catch (const std::exception& e) {
    res.exit_code = 4;
    res.message = e.what();
  }
  return res;
}

}  // namespace anosov::lab

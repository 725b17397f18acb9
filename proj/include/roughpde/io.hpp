#pragma once
// Run configuration and artifact plumbing for the CLI. A run is described by
// one JSON file with flat sections (grid, spec, seeds, plan, solver, output);
// the loader is strict: unknown keys are rejected and every diagnostic names
// the offending key by JSON-pointer-style path. Artifacts are deterministic:
// the same config and seed reproduce them byte for byte, except for the
// timestamp field in each header, which is excluded from the config hash.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "roughpde/grid.hpp"
#include "roughpde/noise.hpp"
#include "roughpde/solver.hpp"

namespace roughpde {

// Config diagnostics carry the path of the bad key; what() renders as
// "section.key: message", which the CLI prints verbatim before exiting 2.
struct ConfigError : std::runtime_error {
  ConfigError(const std::string& path, const std::string& message)
      : std::runtime_error(path + ": " + message) {}
};

struct RunConfig {
  GridSpec grid{64, 512};
  CovarianceSpec spec;
  std::uint64_t seed = 1;

  // plan section
  std::vector<double> T_list;
  std::vector<double> eps_list;
  std::vector<double> a0_list{0.75};
  std::vector<double> a0p_list{0.9};
  std::vector<int> p_list{2};
  double alpha_prime = 0.65;
  double kappa = 0.5;
  int n_samples = 16;

  // solver section
  SolveParams solver;
  bool eta_auto = true;       // no explicit solver.eta: calibrate to eta_target
  double eta_target = 0.05;   // target negative norm for the calibration
  std::vector<double> eta_list;
  double solve_eps = 0.0;
  double g1 = 0.0, g2 = 0.0;  // constant counterterms for classical-check
  double sigma_shift = 1.0;   // defaults() argument for the nonlinearity pair
  bool renormalize = true;    // subtract the c1/c2 counterterms in solves
  int table_cutoff = 2048;

  std::string out_dir = "out";

  // The config as given (after command-line overrides, before defaults are
  // materialized); its dump is what the artifact hash covers.
  nlohmann::json raw;
};

namespace cfgdetail {

inline std::string join(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

inline void expect_object(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "must be an object");
}

inline void reject_unknown(const nlohmann::json& j, const std::string& path,
                           const std::set<std::string>& known) {
  for (const auto& item : j.items())
    if (!known.count(item.key())) throw ConfigError(join(path, item.key()), "unknown key");
}

inline double to_double(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "must be a number");
  return v.get<double>();
}

inline int to_posint(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<std::int64_t>() <= 0)
    throw ConfigError(path, "must be a positive integer");
  return static_cast<int>(v.get<std::int64_t>());
}

inline bool to_bool(const nlohmann::json& v, const std::string& path) {
  if (!v.is_boolean()) throw ConfigError(path, "must be a boolean");
  return v.get<bool>();
}

inline std::string to_string(const nlohmann::json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "must be a string");
  return v.get<std::string>();
}

inline std::vector<double> to_double_list(const nlohmann::json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "must be an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(to_double(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<int> to_int_list(const nlohmann::json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "must be an array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(to_posint(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace cfgdetail

// Strict parse of the run configuration. Defaults (applied when a key is
// absent): grid 64x512; spec.form "product", lambda1 0.4, lambda2 0,
// band_limit 0; seeds.run 1; plan.a0_list [0.75], a0p_list [0.9], p_list [2],
// alpha_prime 0.65, kappa 0.5, n_samples 16, T_list/eps_list empty (filled
// per subcommand); solver fields default to SolveParams{} with eta calibrated
// to eta_target 0.05, eps 0, g1 g2 0, sigma_shift 1, renormalize true,
// table_cutoff 2048; output.dir "out". spec.alpha and both grid sizes are
// required. Unknown keys anywhere are errors.
inline RunConfig load_run_config(const nlohmann::json& j) {
  using namespace cfgdetail;
  expect_object(j, "config");
  reject_unknown(j, "", {"grid", "spec", "seeds", "plan", "solver", "output"});
  RunConfig rc;
  rc.raw = j;

  if (!j.contains("grid")) throw ConfigError("grid", "required");
  {
    const nlohmann::json& g = j.at("grid");
    expect_object(g, "grid");
    reject_unknown(g, "grid", {"n1", "n2"});
    if (!g.contains("n1")) throw ConfigError("grid.n1", "required");
    if (!g.contains("n2")) throw ConfigError("grid.n2", "required");
    rc.grid = GridSpec{to_posint(g.at("n1"), "grid.n1"), to_posint(g.at("n2"), "grid.n2")};
    if (rc.grid.n1 % 2 != 0 || rc.grid.n1 < 4) throw ConfigError("grid.n1", "must be even and >= 4");
    if (rc.grid.n2 % 2 != 0 || rc.grid.n2 < 4) throw ConfigError("grid.n2", "must be even and >= 4");
  }

  if (!j.contains("spec")) throw ConfigError("spec", "required");
  {
    const nlohmann::json& s = j.at("spec");
    expect_object(s, "spec");
    reject_unknown(s, "spec", {"form", "lambda1", "lambda2", "alpha", "band_limit"});
    if (!s.contains("alpha")) throw ConfigError("spec.alpha", "required");
    CovarianceSpec cs;
    if (s.contains("form")) {
      std::string f = to_string(s.at("form"), "spec.form");
      if (f == "product")
        cs.form = CovarianceSpec::Form::product;
      else if (f == "spatial")
        cs.form = CovarianceSpec::Form::spatial_only;
      else
        throw ConfigError("spec.form", "must be \"product\" or \"spatial\"");
    }
    if (s.contains("lambda1")) cs.lambda1 = to_double(s.at("lambda1"), "spec.lambda1");
    if (s.contains("lambda2")) cs.lambda2 = to_double(s.at("lambda2"), "spec.lambda2");
    cs.alpha = to_double(s.at("alpha"), "spec.alpha");
    if (s.contains("band_limit")) cs.band_limit = to_posint(s.at("band_limit"), "spec.band_limit");
    try {
      cs.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("spec", e.what());
    }
    rc.spec = cs;
  }

  if (j.contains("seeds")) {
    const nlohmann::json& s = j.at("seeds");
    expect_object(s, "seeds");
    reject_unknown(s, "seeds", {"run"});
    if (s.contains("run")) {
      if (!s.at("run").is_number_integer() || s.at("run").get<std::int64_t>() < 0)
        throw ConfigError("seeds.run", "must be a nonnegative integer");
      rc.seed = s.at("run").get<std::uint64_t>();
    }
  }

  if (j.contains("plan")) {
    const nlohmann::json& p = j.at("plan");
    expect_object(p, "plan");
    reject_unknown(p, "plan",
                   {"T_list", "eps_list", "a0_list", "a0p_list", "p_list", "alpha_prime", "kappa",
                    "n_samples"});
    if (p.contains("T_list")) rc.T_list = to_double_list(p.at("T_list"), "plan.T_list");
    if (p.contains("eps_list")) rc.eps_list = to_double_list(p.at("eps_list"), "plan.eps_list");
    if (p.contains("a0_list")) rc.a0_list = to_double_list(p.at("a0_list"), "plan.a0_list");
    if (p.contains("a0p_list")) rc.a0p_list = to_double_list(p.at("a0p_list"), "plan.a0p_list");
    if (p.contains("p_list")) rc.p_list = to_int_list(p.at("p_list"), "plan.p_list");
    if (p.contains("alpha_prime"))
      rc.alpha_prime = to_double(p.at("alpha_prime"), "plan.alpha_prime");
    if (p.contains("kappa")) rc.kappa = to_double(p.at("kappa"), "plan.kappa");
    if (p.contains("n_samples")) rc.n_samples = to_posint(p.at("n_samples"), "plan.n_samples");
  }

  rc.solver.alpha = rc.spec.alpha;
  rc.solver.alpha_prime = rc.alpha_prime;
  if (j.contains("solver")) {
    const nlohmann::json& s = j.at("solver");
    expect_object(s, "solver");
    reject_unknown(s, "solver",
                   {"eta", "eta_target", "eta_list", "a0_star_policy", "damping",
                    "tol_fixed_point", "max_iters", "dealias", "eps", "g1", "g2", "sigma_shift",
                    "renormalize", "table_cutoff"});
    if (s.contains("eta")) {
      rc.solver.eta = to_double(s.at("eta"), "solver.eta");
      rc.eta_auto = false;
    }
    if (s.contains("eta_target")) rc.eta_target = to_double(s.at("eta_target"), "solver.eta_target");
    if (s.contains("eta_list")) rc.eta_list = to_double_list(s.at("eta_list"), "solver.eta_list");
    if (s.contains("a0_star_policy")) {
      std::string pol = to_string(s.at("a0_star_policy"), "solver.a0_star_policy");
      if (pol == "mean_of_a")
        rc.solver.a0_star_policy = A0Policy::mean_of_a;
      else if (pol == "fixed")
        rc.solver.a0_star_policy = A0Policy::fixed;
      else
        throw ConfigError("solver.a0_star_policy", "must be \"mean_of_a\" or \"fixed\"");
    }
    if (s.contains("damping")) rc.solver.damping = to_double(s.at("damping"), "solver.damping");
    if (s.contains("tol_fixed_point"))
      rc.solver.tol_fixed_point = to_double(s.at("tol_fixed_point"), "solver.tol_fixed_point");
    if (s.contains("max_iters")) rc.solver.max_iters = to_posint(s.at("max_iters"), "solver.max_iters");
    if (s.contains("dealias")) rc.solver.dealias = to_bool(s.at("dealias"), "solver.dealias");
    if (s.contains("eps")) {
      rc.solve_eps = to_double(s.at("eps"), "solver.eps");
      if (rc.solve_eps < 0.0) throw ConfigError("solver.eps", "must be nonnegative");
    }
    if (s.contains("g1")) rc.g1 = to_double(s.at("g1"), "solver.g1");
    if (s.contains("g2")) rc.g2 = to_double(s.at("g2"), "solver.g2");
    if (s.contains("sigma_shift")) rc.sigma_shift = to_double(s.at("sigma_shift"), "solver.sigma_shift");
    if (s.contains("renormalize")) rc.renormalize = to_bool(s.at("renormalize"), "solver.renormalize");
    if (s.contains("table_cutoff"))
      rc.table_cutoff = to_posint(s.at("table_cutoff"), "solver.table_cutoff");
  }
  if (!(rc.alpha_prime > 0.0 && rc.alpha_prime < rc.spec.alpha))
    throw ConfigError("plan.alpha_prime", "must lie in (0, spec.alpha)");
  if (!(rc.eta_target > 0.0)) throw ConfigError("solver.eta_target", "must be positive");
  try {
    rc.solver.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("solver", e.what());
  }

  if (j.contains("output")) {
    const nlohmann::json& o = j.at("output");
    expect_object(o, "output");
    reject_unknown(o, "output", {"dir"});
    if (o.contains("dir")) rc.out_dir = to_string(o.at("dir"), "output.dir");
  }
  return rc;
}

// Sets cfg at the dotted path, creating intermediate objects. The value text
// is parsed as a JSON literal when possible ("0.5", "[1,2]", "true") and
// falls back to a plain string otherwise. Validation of the resulting config
// is the loader's job, so a bogus path surfaces as an unknown-key error.
inline void apply_override(nlohmann::json& cfg, const std::string& dotted,
                           const std::string& value) {
  if (dotted.empty()) throw ConfigError("override", "empty key");
  nlohmann::json* node = &cfg;
  std::size_t start = 0;
  for (;;) {
    std::size_t dot = dotted.find('.', start);
    std::string key = dotted.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError("override", "empty path segment in \"" + dotted + "\"");
    if (dot == std::string::npos) {
      nlohmann::json v = nlohmann::json::parse(value, nullptr, false);
      (*node)[key] = v.is_discarded() ? nlohmann::json(value) : v;
      return;
    }
    if (!node->contains(key)) (*node)[key] = nlohmann::json::object();
    node = &(*node)[key];
    if (!node->is_object()) throw ConfigError(dotted.substr(0, dot), "is not an object");
    start = dot + 1;
  }
}

// FNV-1a over the canonical (key-sorted, whitespace-free) dump of the config
// as given. Sixteen hex digits; stable across runs and platforms. The output
// section only says where artifacts land, not what they contain, so it is
// excluded: rerouting a run must not change its identity.
inline std::string config_hash(nlohmann::json cfg) {
  cfg.erase("output");
  std::string s = cfg.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Every artifact opens with this header so any number in it traces back to
// (subcommand, config hash, seed). The timestamp is informational only: it is
// not part of the hash and reruns differ in nothing else.
struct ArtifactInfo {
  std::string subcommand;
  std::string hash;
  std::uint64_t seed = 0;

  std::string name(const std::string& kind, const std::string& ext) const {
    return subcommand + "_" + kind + "_" + hash + "_s" + std::to_string(seed) + "." + ext;
  }
};

inline std::string iso_timestamp() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

inline nlohmann::json artifact_header(const ArtifactInfo& info) {
  return nlohmann::json{{"subcommand", info.subcommand},
                        {"config_hash", info.hash},
                        {"seed", info.seed},
                        {"timestamp", iso_timestamp()}};
}

inline std::string csv_header(const ArtifactInfo& info) {
  std::string out;
  out += "# subcommand: " + info.subcommand + "\n";
  out += "# config_hash: " + info.hash + "\n";
  out += "# seed: " + std::to_string(info.seed) + "\n";
  out += "# timestamp: " + iso_timestamp() + "\n";
  return out;
}

inline std::filesystem::path write_artifact(const std::string& dir, const std::string& name,
                                            const std::string& content) {
  std::filesystem::create_directories(dir);
  std::filesystem::path p = std::filesystem::path(dir) / name;
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + p.string() + " for writing");
  os << content;
  return p;
}

inline std::filesystem::path write_json_artifact(const std::string& dir, const ArtifactInfo& info,
                                                 const std::string& kind, nlohmann::json body) {
  body["header"] = artifact_header(info);
  return write_artifact(dir, info.name(kind, "json"), body.dump(2) + "\n");
}

inline std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string field_csv(const PhysicalField& u, const ArtifactInfo& info) {
  std::string out = csv_header(info);
  out += "i1,i2,value\n";
  for (int i1 = 0; i1 < u.grid.n1; ++i1)
    for (int i2 = 0; i2 < u.grid.n2; ++i2)
      out += std::to_string(i1) + "," + std::to_string(i2) + "," + format_g(u.at(i1, i2)) + "\n";
  return out;
}

}  // namespace roughpde

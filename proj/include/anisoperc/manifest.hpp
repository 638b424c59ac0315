#pragma once

// Experiment manifest: a JSON document with sections
//   lattice, params, seeds, estimators, coupling, equivalence, fit, check, output.
// Every field has a default; unknown keys are rejected with their path.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "anisoperc/error.hpp"
#include "anisoperc/estimators.hpp"
#include "anisoperc/io.hpp"
#include "anisoperc/lattice.hpp"

namespace anisoperc {

inline constexpr const char* kToolVersion = "anisoperc 0.1.0";

// Invalid manifest content; `path` names the offending field, e.g. "lattice.side_d".
class ManifestError : public SpecError {
public:
  ManifestError(std::string path, const std::string& message)
      : SpecError(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

private:
  std::string path_;
};

namespace detail {

using json = nlohmann::json;

inline void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ManifestError(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ManifestError(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
}

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

template <typename T>
T get(const json& j, const std::string& path, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  const std::string where = join(path, key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ManifestError(where, "expected a boolean");
    return v.get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ManifestError(where, "expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.get<std::int64_t>() < 0 && !v.is_number_unsigned()) throw ManifestError(where, "must be >= 0");
    }
    return v.get<T>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ManifestError(where, "expected a number");
    return v.get<T>();
  } else {
    if (!v.is_string()) throw ManifestError(where, "expected a string");
    return v.get<std::string>();
  }
}

// A number or an array of numbers.
inline std::vector<double> get_grid(const json& j, const std::string& path, const std::string& key,
                                    std::vector<double> fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  const std::string where = join(path, key);
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) throw ManifestError(where, "expected a number or an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ManifestError(where + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

template <typename E, typename Parse>
E get_enum(const json& j, const std::string& path, const std::string& key, E fallback, Parse parse) {
  if (!j.contains(key)) return fallback;
  const std::string s = get<std::string>(j, path, key, "");
  try {
    return parse(s);
  } catch (const SpecError& e) {
    throw ManifestError(join(path, key), e.what());
  }
}

}  // namespace detail

// Config block keys: d, s, side_d, side_s, boundary, variant, range, norm, layers, multigraph.
// boundary is "free" | "periodic", or {"d": ..., "s": ...} when the factors differ.
inline nlohmann::ordered_json lattice_to_json(const LatticeSpec& spec) {
  nlohmann::ordered_json j;
  j["d"] = spec.d;
  j["s"] = spec.s;
  j["side_d"] = spec.side_d;
  j["side_s"] = spec.side_s;
  if (spec.boundary_d == spec.boundary_s) {
    j["boundary"] = to_string(spec.boundary_d);
  } else {
    j["boundary"] = {{"d", to_string(spec.boundary_d)}, {"s", to_string(spec.boundary_s)}};
  }
  j["variant"] = to_string(spec.variant);
  j["range"] = spec.range;
  j["norm"] = to_string(spec.norm);
  j["layers"] = spec.layers;
  j["multigraph"] = spec.multigraph;
  return j;
}

// Keys missing from `j` keep their value in `spec`.
inline LatticeSpec lattice_from_json(const nlohmann::json& j, const std::string& path = "lattice",
                                     LatticeSpec spec = {}) {
  using namespace detail;
  check_keys(j, path, {"d", "s", "side_d", "side_s", "boundary", "variant", "range", "norm", "layers", "multigraph"});
  spec.d = get<int>(j, path, "d", spec.d);
  spec.s = get<int>(j, path, "s", spec.s);
  spec.side_d = get<int>(j, path, "side_d", spec.side_d);
  spec.side_s = get<int>(j, path, "side_s", spec.side_s);
  spec.variant = get_enum(j, path, "variant", spec.variant, parse_variant);
  spec.range = get<int>(j, path, "range", spec.range);
  spec.norm = get_enum(j, path, "norm", spec.norm, parse_norm);
  spec.layers = get<int>(j, path, "layers", spec.layers);
  spec.multigraph = get<bool>(j, path, "multigraph", spec.multigraph);
  if (j.contains("boundary")) {
    const auto& b = j.at("boundary");
    const std::string bpath = join(path, "boundary");
    if (b.is_string()) {
      spec.boundary_d = spec.boundary_s = get_enum(j, path, "boundary", Boundary::periodic, parse_boundary);
    } else if (b.is_object()) {
      check_keys(b, bpath, {"d", "s"});
      spec.boundary_d = get_enum(b, bpath, "d", spec.boundary_d, parse_boundary);
      spec.boundary_s = get_enum(b, bpath, "s", spec.boundary_s, parse_boundary);
    } else {
      throw ManifestError(bpath, "expected a string or an object {d, s}");
    }
  }
  // Layered boxes: side_s follows from layers unless given.
  if (spec.variant == Variant::layered && !j.contains("side_s")) spec.side_s = spec.layers + 1;
  try {
    spec.validate();
  } catch (const std::exception& e) {
    throw ManifestError(path, e.what());
  }
  return spec;
}

struct Manifest {
  LatticeSpec lattice = LatticeSpec::nearest(2, 1, 32, 8, Boundary::periodic);

  // params
  std::vector<double> p_grid{0.45};
  std::vector<double> q_grid{0.2};
  std::optional<double> p_c;  // default: literature_pc(lattice.d)

  // seeds
  std::uint64_t seed = 1;
  std::uint32_t replicas = 100;  // samples per grid point (sample), runs (explore)

  // estimators
  Surrogate surrogate = Surrogate::spanning;
  int axis = 0;
  double level = 0.95;
  std::uint64_t n_per_probe = 200;
  std::uint64_t max_factor = 16;
  double tol = 0.01;
  std::vector<double> sizes;       // L values for qc-scan; default {lattice.side_d}
  std::uint64_t chi_samples = 0;   // > 0: add the q_c * chi_p diagnostic to qc-scan

  // coupling
  std::uint64_t step_budget = 0;
  std::int32_t window = 0;
  std::uint64_t check_every = 0;
  std::uint64_t trace_runs = 1;

  // equivalence
  std::uint64_t eq_samples = 100000;
  std::uint64_t exact_edge_limit = 20;
  double tv_tol = 0.01;

  // fit
  std::string fit_input;

  // check
  std::map<int, double> check_pc;  // overrides of the p_c table, by d
  std::uint64_t check_grid = 1000;

  // output
  std::string out_dir;

  double resolved_pc() const {
    if (p_c) return *p_c;
    if (auto v = literature_pc(lattice.d)) return *v;
    throw ManifestError("params.p_c", "no default p_c for d = " + std::to_string(lattice.d) + "; supply one");
  }

  std::vector<int> resolved_sizes() const {
    if (sizes.empty()) return {lattice.side_d};
    std::vector<int> out;
    for (double x : sizes) out.push_back(static_cast<int>(x));
    return out;
  }
};

// Fields missing from `j` keep their value in `m`.
inline Manifest manifest_from_json(const nlohmann::json& j, Manifest m = {}) {
  using namespace detail;
  check_keys(j, "", {"schema_version", "tool_version", "lattice", "params", "seeds", "estimators", "coupling",
                     "equivalence", "fit", "check", "output"});
  if (j.contains("schema_version") && j.at("schema_version") != kSchemaVersion)
    throw ManifestError("schema_version", "unsupported version (expected " + std::to_string(kSchemaVersion) + ")");
  if (j.contains("lattice")) m.lattice = lattice_from_json(j.at("lattice"), "lattice", m.lattice);

  static const json empty = json::object();
  auto section = [&](const char* name) -> const json& { return j.contains(name) ? j.at(name) : empty; };

  const json& params = section("params");
  check_keys(params, "params", {"p", "q", "p_c"});
  m.p_grid = get_grid(params, "params", "p", m.p_grid);
  m.q_grid = get_grid(params, "params", "q", m.q_grid);
  for (std::size_t i = 0; i < m.p_grid.size(); ++i)
    if (!(m.p_grid[i] >= 0 && m.p_grid[i] <= 1)) throw ManifestError("params.p[" + std::to_string(i) + "]", "must lie in [0,1]");
  for (std::size_t i = 0; i < m.q_grid.size(); ++i)
    if (!(m.q_grid[i] >= 0 && m.q_grid[i] <= 1)) throw ManifestError("params.q[" + std::to_string(i) + "]", "must lie in [0,1]");
  if (params.contains("p_c")) {
    const double pc = get<double>(params, "params", "p_c", 0.0);
    if (!(pc > 0 && pc <= 1)) throw ManifestError("params.p_c", "must lie in (0,1]");
    m.p_c = pc;
  }

  const json& seeds = section("seeds");
  check_keys(seeds, "seeds", {"master", "replicas"});
  m.seed = get<std::uint64_t>(seeds, "seeds", "master", m.seed);
  m.replicas = get<std::uint32_t>(seeds, "seeds", "replicas", m.replicas);

  const json& est = section("estimators");
  check_keys(est, "estimators", {"surrogate", "axis", "level", "n_per_probe", "max_factor", "tol", "L", "chi_samples"});
  m.surrogate = get_enum(est, "estimators", "surrogate", m.surrogate, parse_surrogate);
  m.axis = get<int>(est, "estimators", "axis", m.axis);
  m.level = get<double>(est, "estimators", "level", m.level);
  m.n_per_probe = get<std::uint64_t>(est, "estimators", "n_per_probe", m.n_per_probe);
  m.max_factor = get<std::uint64_t>(est, "estimators", "max_factor", m.max_factor);
  m.tol = get<double>(est, "estimators", "tol", m.tol);
  m.sizes = get_grid(est, "estimators", "L", m.sizes);
  m.chi_samples = get<std::uint64_t>(est, "estimators", "chi_samples", m.chi_samples);
  if (m.axis < 0 || m.axis >= m.lattice.d + m.lattice.s) throw ManifestError("estimators.axis", "out of range");
  if (!(m.level > 0 && m.level < 1)) throw ManifestError("estimators.level", "must lie in (0,1)");
  if (!(m.tol >= 1e-3)) throw ManifestError("estimators.tol", "must be >= 1e-3");
  if (m.n_per_probe < 1) throw ManifestError("estimators.n_per_probe", "must be >= 1");
  for (std::size_t i = 0; i < m.sizes.size(); ++i)
    if (m.sizes[i] < 2 || m.sizes[i] != static_cast<int>(m.sizes[i]))
      throw ManifestError("estimators.L[" + std::to_string(i) + "]", "must be an integer >= 2");

  const json& cpl = section("coupling");
  check_keys(cpl, "coupling", {"step_budget", "window", "check_every", "trace_runs"});
  m.step_budget = get<std::uint64_t>(cpl, "coupling", "step_budget", m.step_budget);
  m.window = get<std::int32_t>(cpl, "coupling", "window", m.window);
  m.check_every = get<std::uint64_t>(cpl, "coupling", "check_every", m.check_every);
  m.trace_runs = get<std::uint64_t>(cpl, "coupling", "trace_runs", m.trace_runs);
  if (m.window < 0) throw ManifestError("coupling.window", "must be >= 0");

  const json& eq = section("equivalence");
  check_keys(eq, "equivalence", {"samples", "exact_edge_limit", "tv_tol"});
  m.eq_samples = get<std::uint64_t>(eq, "equivalence", "samples", m.eq_samples);
  m.exact_edge_limit = get<std::uint64_t>(eq, "equivalence", "exact_edge_limit", m.exact_edge_limit);
  m.tv_tol = get<double>(eq, "equivalence", "tv_tol", m.tv_tol);
  if (m.exact_edge_limit > 30) throw ManifestError("equivalence.exact_edge_limit", "must be <= 30");

  const json& fit = section("fit");
  check_keys(fit, "fit", {"input"});
  m.fit_input = get<std::string>(fit, "fit", "input", m.fit_input);

  const json& chk = section("check");
  check_keys(chk, "check", {"p_c", "grid"});
  m.check_grid = get<std::uint64_t>(chk, "check", "grid", m.check_grid);
  if (chk.contains("p_c")) {
    const json& t = chk.at("p_c");
    if (!t.is_object()) throw ManifestError("check.p_c", "expected an object keyed by d");
    for (auto it = t.begin(); it != t.end(); ++it) {
      const std::string where = "check.p_c." + it.key();
      int d = 0;
      try {
        std::size_t pos = 0;
        d = std::stoi(it.key(), &pos);
        if (pos != it.key().size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw ManifestError(where, "key must be an integer dimension");
      }
      if (!it.value().is_number()) throw ManifestError(where, "expected a number");
      m.check_pc[d] = it.value().get<double>();
    }
  }
  if (m.check_grid < 1) throw ManifestError("check.grid", "must be >= 1");

  const json& out = section("output");
  check_keys(out, "output", {"dir"});
  m.out_dir = get<std::string>(out, "output", "dir", m.out_dir);
  return m;
}

inline Manifest load_manifest(const std::filesystem::path& path, Manifest base = {}) {
  const std::string text = read_text(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ManifestError("", std::string("malformed JSON in '") + path.string() + "': " + e.what());
  }
  return manifest_from_json(j, std::move(base));
}

// Fully resolved manifest; output.dir is left out because it never changes output bytes.
inline nlohmann::ordered_json manifest_to_json(const Manifest& m) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["tool_version"] = kToolVersion;
  j["lattice"] = lattice_to_json(m.lattice);
  j["params"]["p"] = m.p_grid;
  j["params"]["q"] = m.q_grid;
  if (m.p_c) j["params"]["p_c"] = *m.p_c;
  j["seeds"]["master"] = m.seed;
  j["seeds"]["replicas"] = m.replicas;
  auto& est = j["estimators"];
  est["surrogate"] = to_string(m.surrogate);
  est["axis"] = m.axis;
  est["level"] = m.level;
  est["n_per_probe"] = m.n_per_probe;
  est["max_factor"] = m.max_factor;
  est["tol"] = m.tol;
  est["L"] = m.resolved_sizes();
  est["chi_samples"] = m.chi_samples;
  j["coupling"] = {{"step_budget", m.step_budget},
                   {"window", m.window},
                   {"check_every", m.check_every},
                   {"trace_runs", m.trace_runs}};
  j["equivalence"] = {{"samples", m.eq_samples}, {"exact_edge_limit", m.exact_edge_limit}, {"tv_tol", m.tv_tol}};
  j["fit"] = {{"input", m.fit_input}};
  nlohmann::ordered_json pc = nlohmann::ordered_json::object();
  for (auto [d, v] : m.check_pc) pc[std::to_string(d)] = v;
  j["check"] = {{"p_c", pc}, {"grid", m.check_grid}};
  return j;
}

inline std::string manifest_hash(const Manifest& m) { return fnv1a_hex(manifest_to_json(m).dump()); }

}  // namespace anisoperc

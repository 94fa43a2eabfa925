#pragma once

// Scenario files: schema "qmetric.scenario/1".
//
// {
//   "schema": "qmetric.scenario/1", "name": "...", "seed": 1,
//   "algebra": {"blocks": [1, 1]},
//   "solver": {"tol": 1e-6, ...},                 (optional)
//   "lipnorms": {"L": {"variant": ...}, ...},
//   "experiment": {"type": "mk", ...parameters},
//   "output": "out/dir"
// }
//
// Parsing never stops at the first problem: every error is collected with
// its JSON path.

#include <optional>
#include <set>
#include <utility>
#include <variant>

#include "qmetric/io.hpp"

namespace qmetric {

inline constexpr const char* kScenarioSchema = "qmetric.scenario/1";
inline constexpr const char* kCodeVersion = "qmetric 1.0.0";
inline constexpr int kMaxCoveringSamples = 64;

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> errors)
      : Error(ErrorKind::InvalidInput, summarize(errors)), errors_(std::move(errors)) {}
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string summarize(const std::vector<std::string>& e) {
    std::string s = std::to_string(e.size()) + " validation error(s)";
    for (const auto& x : e) s += "\n  " + x;
    return s;
  }
  std::vector<std::string> errors_;
};

namespace scenario_detail {

using io::json;

class Collector {
 public:
  std::vector<std::string> errors;

  void add(const std::string& path, const std::string& msg) { errors.push_back(path + ": " + msg); }

  /// Runs f, recording any exception under path.
  template <class F>
  auto guard(const std::string& path, F&& f) -> std::optional<decltype(f())> {
    try {
      return f();
    } catch (const Error& e) {
      add(path, e.what());
    } catch (const json::exception& e) {
      add(path, e.what());
    } catch (const std::exception& e) {
      add(path, e.what());
    }
    return std::nullopt;
  }

  void allowed_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) return;
    for (const auto& [k, v] : obj.items()) {
      bool ok = false;
      for (const char* a : keys) ok = ok || k == a;
      if (!ok) add(path, "unknown field \"" + k + "\"");
    }
  }
};

}  // namespace scenario_detail

// ---------------------------------------------------------------------------
// Experiment parameters

struct MkParams {
  std::string lipnorm;
  std::vector<std::pair<DensityState, DensityState>> pairs;
  int random_pairs = 0;
  bool diameter = false;
};

struct HausLipParams {
  std::vector<std::pair<std::string, std::string>> pairs;
  DensityState slice;
};

struct BridgeParams {
  std::string lipnorm_a;
  std::string lipnorm_b;
  AlgebraSpec algebra_b;
  std::vector<BridgeSpec> bridges;
  std::optional<DensityState> slice_a;
  std::optional<DensityState> slice_b;
};

struct DilationItem {
  std::string from;
  std::string to;
  UnitaryMap unitary;
};

struct DilationParams {
  std::vector<DilationItem> items;
};

struct LipdParams {
  std::vector<std::pair<std::string, std::string>> pairs;
};

struct MkLengthParams {
  std::string lipnorm;
  std::vector<UnitaryMap> automorphisms;
  int random = 0;
};

struct PerturbationParams {
  CMatrix dirac;
  int amplification = 1;
  std::vector<CMatrix> omegas;
  std::vector<std::string> labels;
  DensityState slice;
};

struct ConformalParams {
  CMatrix dirac;
  int amplification = 1;
  std::vector<CMatrix> factors;
  int pairs = 1000;
  DensityState slice;
};

struct CurvedParams {
  std::vector<CMatrix> generators;
  std::vector<RMatrix> grid;
  DensityState slice;
};

struct CoveringParams {
  enum class Family { Scaled, Perturbed };
  Family family = Family::Scaled;
  std::string lipnorm;
  double lambda_lo = 1.0;
  double lambda_hi = 2.0;
  CMatrix dirac;
  int amplification = 1;
  double radius = 0.0;
  std::vector<int> sample_counts;
  double eps = 0.1;
  DensityState slice;
  int equivalence_subsample = 4;
  bool expect_saturation = true;
};

struct AxiomParams {
  std::vector<std::string> lipnorms;
  std::vector<UnitaryMap> automorphisms;
  int random_lipnorms = 2;
  int state_triples = 20;
  int random_automorphisms = 6;
  int lipd_triples = 1;
  double dilation_c = 2.0;
  double eps = 0.2;
  std::vector<int> net_samples;
};

using ExperimentParams = std::variant<MkParams, HausLipParams, BridgeParams, DilationParams, LipdParams, MkLengthParams,
                                      PerturbationParams, ConformalParams, CurvedParams, CoveringParams, AxiomParams>;

inline const std::vector<std::string>& experiment_types() {
  static const std::vector<std::string> types = {"mk",       "hauslip",  "bridge", "dilation", "lipd",
                                                 "mklength", "perturbation-continuity", "conformal-family",
                                                 "curved-family", "covering", "axiom-suite"};
  return types;
}

struct ScenarioConfig {
  std::string name;
  std::uint64_t seed = 0;
  AlgebraSpec algebra;
  SolverConfig solver;
  std::map<std::string, LipNormSpec> lipnorms;
  std::string experiment;
  ExperimentParams params;
  std::string output;
  io::json raw;

  const LipNormSpec& lip(const std::string& name) const {
    const auto it = lipnorms.find(name);
    require(it != lipnorms.end(), ErrorKind::InvalidInput, "unknown lipnorm '" + name + "'");
    return it->second;
  }
};

// ---------------------------------------------------------------------------
// Helpers shared by validation and the experiments

/// Random automorphism of a block algebra: a permutation of equal-size blocks
/// composed with a block-diagonal unitary.
inline UnitaryMap random_automorphism(std::uint64_t seed, const AlgebraSpec& algebra) {
  Rng rng(seed);
  const int n = algebra.total_dim();
  const auto nb = algebra.blocks.size();
  std::vector<int> offset(nb, 0);
  for (std::size_t b = 1; b < nb; ++b) offset[b] = offset[b - 1] + algebra.blocks[b - 1];
  std::vector<std::size_t> target(nb);
  std::iota(target.begin(), target.end(), 0);
  std::map<int, std::vector<std::size_t>> by_size;
  for (std::size_t b = 0; b < nb; ++b) by_size[algebra.blocks[b]].push_back(b);
  for (auto& [size, idx] : by_size) {
    std::vector<std::size_t> perm = idx;
    for (std::size_t i = perm.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i)) % i;
      std::swap(perm[i - 1], perm[j]);
    }
    for (std::size_t i = 0; i < idx.size(); ++i) target[idx[i]] = perm[i];
  }
  CMatrix u = CMatrix::Zero(n, n);
  for (std::size_t b = 0; b < nb; ++b) {
    const int sz = algebra.blocks[b];
    const CMatrix v = random_unitary(sub_seed(seed, b + 1), sz).matrix();
    u.block(offset[target[b]], offset[b], sz, sz) = v;
  }
  return UnitaryMap(u);
}

/// True when Ad_U maps the algebra onto itself.
inline bool normalizes(const CMatrix& u, const AlgebraSpec& algebra) {
  const HermitianBasis basis(algebra);
  for (int k = 0; k < basis.size(); ++k) {
    RVector e = RVector::Zero(basis.size());
    e(k) = 1.0;
    if (!algebra.contains(CMatrix(u * basis.reconstruct(e).matrix() * u.adjoint()), 1e-9)) return false;
  }
  return true;
}

inline UnitaryMap automorphism_from_json(const io::json& j, const AlgebraSpec& algebra, const std::string& what) {
  const CMatrix u = io::matrix_from_json(j, what);
  require(u.rows() == algebra.total_dim() && u.cols() == u.rows(), ErrorKind::Shape, what + ": dimension mismatch");
  require((u.adjoint() * u - identity_matrix(algebra.total_dim())).norm() <= 1e-9, ErrorKind::InvalidInput,
          what + ": not unitary");
  require(normalizes(u, algebra), ErrorKind::InvalidInput, what + ": does not map the algebra onto itself");
  return UnitaryMap(u);
}

// ---------------------------------------------------------------------------
// Parsing

namespace scenario_detail {

inline AlgebraSpec parse_algebra(const json& j, const std::string& path, Collector& c) {
  c.allowed_keys(j, path, {"blocks"});
  auto a = c.guard(path, [&] {
    AlgebraSpec s{j.at("blocks").get<std::vector<int>>()};
    s.validate();
    return s;
  });
  return a ? *a : AlgebraSpec{};
}

inline SolverConfig parse_solver(const json& j, Collector& c, std::uint64_t seed) {
  SolverConfig s;
  s.seed = seed;
  if (j.is_null()) return s;
  c.allowed_keys(j, "solver", {"tol", "max_iter", "restarts", "oracle_resolution", "hausdorff_directions",
                               "height_samples"});
  c.guard("solver", [&] {
    s.tol = j.value("tol", s.tol);
    s.max_iter = j.value("max_iter", s.max_iter);
    s.restarts = j.value("restarts", s.restarts);
    s.oracle_resolution = j.value("oracle_resolution", s.oracle_resolution);
    s.hausdorff_directions = j.value("hausdorff_directions", s.hausdorff_directions);
    s.height_samples = j.value("height_samples", s.height_samples);
    s.validate();
    return 0;
  });
  return s;
}

/// Resolves the lipnorm table, following Scaled "inner" references by name.
inline std::map<std::string, LipNormSpec> parse_lipnorms(const json& j, Collector& c) {
  std::map<std::string, LipNormSpec> out;
  if (!j.is_object() || j.empty()) {
    c.add("lipnorms", "must be a nonempty object of named Lip-norms");
    return out;
  }
  std::set<std::string> visiting, failed;
  std::function<LipNormSpec(const std::string&)> resolve = [&](const std::string& name) -> LipNormSpec {
    if (auto it = out.find(name); it != out.end()) return it->second;
    require(j.contains(name), ErrorKind::InvalidInput, "reference to unknown lipnorm '" + name + "'");
    require(!failed.count(name), ErrorKind::InvalidInput, "reference to invalid lipnorm '" + name + "'");
    require(!visiting.count(name), ErrorKind::InvalidInput, "cyclic lipnorm reference through '" + name + "'");
    visiting.insert(name);
    LipNormSpec spec = io::lipnorm_from_json(j.at(name), resolve);
    visiting.erase(name);
    validate_lipnorm(spec, spec.algebra_dim());
    out.emplace(name, spec);
    return spec;
  };
  for (const auto& [name, spec] : j.items()) {
    if (out.count(name)) continue;
    visiting.clear();
    if (!c.guard("lipnorms." + name, [&] { return resolve(name); })) failed.insert(name);
  }
  return out;
}

struct Context {
  const ScenarioConfig& cfg;
  Collector& c;
  std::string path = "experiment";

  int dim() const { return cfg.algebra.total_dim(); }

  std::string name_ref(const json& j, const std::string& key, const AlgebraSpec* algebra = nullptr) {
    auto r = c.guard(path + "." + key, [&] {
      const std::string n = j.at(key).get<std::string>();
      lip_ref(n, path + "." + key, algebra);
      return n;
    });
    return r.value_or("");
  }

  void lip_ref(const std::string& n, const std::string& where, const AlgebraSpec* algebra = nullptr) {
    const auto it = cfg.lipnorms.find(n);
    if (it == cfg.lipnorms.end()) {
      // Invalid table entries are already reported under "lipnorms".
      if (!cfg.raw.contains("lipnorms") || !cfg.raw["lipnorms"].is_object() || !cfg.raw["lipnorms"].contains(n))
        c.add(where, "unknown lipnorm '" + n + "'");
      return;
    }
    const int want = (algebra ? *algebra : cfg.algebra).total_dim();
    if (it->second.algebra_dim() != want)
      c.add(where, "lipnorm '" + n + "' acts on dimension " + std::to_string(it->second.algebra_dim()) +
                       ", the algebra has dimension " + std::to_string(want));
  }

  DensityState state(const json& j, const std::string& key, const char* fallback = "maximally-mixed",
                     int d = -1) {
    const int n = d < 0 ? dim() : d;
    auto s = c.guard(path + "." + key, [&] { return io::state_from_json(j.contains(key) ? j.at(key) : json(fallback), n, key); });
    return s ? *s : DensityState::maximally_mixed(std::max(1, n));
  }

  std::vector<std::pair<std::string, std::string>> name_pairs(const json& j, const std::string& key) {
    std::vector<std::pair<std::string, std::string>> out;
    c.guard(path + "." + key, [&] {
      const json& arr = j.at(key);
      require(arr.is_array() && !arr.empty(), ErrorKind::InvalidInput, "must be a nonempty list of [name, name] pairs");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto p = arr[i].get<std::vector<std::string>>();
        require(p.size() == 2, ErrorKind::InvalidInput, "each pair needs exactly two names");
        const std::string where = path + "." + key + "[" + std::to_string(i) + "]";
        lip_ref(p[0], where);
        lip_ref(p[1], where);
        out.emplace_back(p[0], p[1]);
      }
      return 0;
    });
    return out;
  }

  template <class T>
  T get(const json& j, const std::string& key, T fallback) {
    return c.guard(path + "." + key, [&] { return j.contains(key) ? j.at(key).get<T>() : fallback; }).value_or(fallback);
  }

  void positive(const std::string& key, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) c.add(path + "." + key, "must be > 0");
  }

  std::vector<int> counts(const json& j, const std::string& key, std::vector<int> fallback, int cap) {
    auto v = get<std::vector<int>>(j, key, std::move(fallback));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] < 1) c.add(path + "." + key, "sample counts must be >= 1");
      if (cap > 0 && v[i] > cap)
        c.add(path + "." + key, "sample count " + std::to_string(v[i]) + " exceeds the limit " + std::to_string(cap));
      if (i > 0 && v[i] <= v[i - 1]) c.add(path + "." + key, "sample counts must be strictly increasing");
    }
    return v;
  }

  std::vector<UnitaryMap> automorphisms(const json& j, const std::string& key) {
    std::vector<UnitaryMap> out;
    if (!j.contains(key)) return out;
    c.guard(path + "." + key, [&] {
      require(j.at(key).is_array(), ErrorKind::InvalidInput, "must be a list of unitaries");
      return 0;
    });
    if (!j.at(key).is_array()) return out;
    for (std::size_t i = 0; i < j.at(key).size(); ++i) {
      const std::string where = path + "." + key + "[" + std::to_string(i) + "]";
      auto u = c.guard(where, [&] { return automorphism_from_json(j.at(key)[i], cfg.algebra, "automorphism"); });
      if (u) out.push_back(*u);
    }
    return out;
  }

  CMatrix dirac(const json& j, int amplification) {
    auto d = c.guard(path + ".dirac", [&] {
      const CMatrix m = io::matrix_from_json(j.at("dirac"), "dirac");
      qmetric::detail::validate_rep(m, amplification, dim(), "dirac");
      return m;
    });
    return d.value_or(CMatrix::Zero(dim() * std::max(1, amplification), dim() * std::max(1, amplification)));
  }
};

inline Embedding parse_embedding(const json& j, const AlgebraSpec& source, const std::string& what) {
  Embedding e;
  e.source = source;
  e.block_map = j.at("block_map").get<std::vector<int>>();
  if (j.contains("unitary")) e.unitary = io::matrix_from_json(j.at("unitary"), what + ".unitary");
  e.validate();
  return e;
}

inline ExperimentParams parse_params(const std::string& type, const json& j, Context& x) {
  const ScenarioConfig& cfg = x.cfg;
  Collector& c = x.c;
  const std::string& path = x.path;

  if (type == "mk") {
    c.allowed_keys(j, path, {"type", "lipnorm", "pairs", "random_pairs", "diameter"});
    MkParams p;
    p.lipnorm = x.name_ref(j, "lipnorm");
    p.random_pairs = x.get<int>(j, "random_pairs", 0);
    p.diameter = x.get<bool>(j, "diameter", false);
    if (j.contains("pairs")) {
      c.guard(path + ".pairs", [&] {
        for (std::size_t i = 0; i < j.at("pairs").size(); ++i) {
          const json& pr = j.at("pairs")[i];
          require(pr.is_array() && pr.size() == 2, ErrorKind::InvalidInput, "each pair needs two states");
          p.pairs.emplace_back(io::state_from_json(pr[0], x.dim(), "pairs[" + std::to_string(i) + "][0]"),
                               io::state_from_json(pr[1], x.dim(), "pairs[" + std::to_string(i) + "][1]"));
        }
        return 0;
      });
    }
    if (p.random_pairs < 0) c.add(path + ".random_pairs", "must be >= 0");
    if (p.pairs.empty() && p.random_pairs <= 0 && !p.diameter)
      c.add(path, "nothing to compute: give \"pairs\", \"random_pairs\" or \"diameter\"");
    return p;
  }
  if (type == "hauslip") {
    c.allowed_keys(j, path, {"type", "pairs", "slice"});
    HausLipParams p{x.name_pairs(j, "pairs"), x.state(j, "slice")};
    return p;
  }
  if (type == "bridge") {
    c.allowed_keys(j, path, {"type", "lipnorm_a", "lipnorm_b", "algebra_b", "bridges", "slice_a", "slice_b"});
    BridgeParams p;
    p.algebra_b = j.contains("algebra_b") ? parse_algebra(j.at("algebra_b"), path + ".algebra_b", c) : cfg.algebra;
    p.lipnorm_a = x.name_ref(j, "lipnorm_a");
    p.lipnorm_b = x.name_ref(j, "lipnorm_b", &p.algebra_b);
    p.slice_a = x.state(j, "slice_a");
    if (p.algebra_b.blocks.empty()) return p;
    p.slice_b = x.state(j, "slice_b", "maximally-mixed", p.algebra_b.total_dim());
    c.guard(path + ".bridges", [&] {
      const json& arr = j.at("bridges");
      require(arr.is_array() && !arr.empty(), ErrorKind::InvalidInput, "must be a nonempty list");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string where = path + ".bridges[" + std::to_string(i) + "]";
        c.guard(where, [&] {
          const json& b = arr[i];
          if (b.is_string()) {
            require(b.get<std::string>() == "identity", ErrorKind::InvalidInput, "only \"identity\" is a named bridge");
            require(cfg.algebra == p.algebra_b, ErrorKind::InvalidInput, "identity bridge needs equal algebras");
            p.bridges.push_back(BridgeSpec::identity(cfg.algebra));
            return 0;
          }
          c.allowed_keys(b, where, {"ambient_dim", "omega", "embed_a", "embed_b"});
          BridgeSpec s;
          s.ambient_dim = b.at("ambient_dim").get<int>();
          s.omega = io::matrix_from_json(b.at("omega"), "omega");
          s.embed_a = parse_embedding(b.at("embed_a"), cfg.algebra, "embed_a");
          s.embed_b = parse_embedding(b.at("embed_b"), p.algebra_b, "embed_b");
          s.validate_structure();
          p.bridges.push_back(std::move(s));
          return 0;
        });
      }
      return 0;
    });
    return p;
  }
  if (type == "dilation") {
    c.allowed_keys(j, path, {"type", "pairs"});
    DilationParams p;
    c.guard(path + ".pairs", [&] {
      const json& arr = j.at("pairs");
      require(arr.is_array() && !arr.empty(), ErrorKind::InvalidInput, "must be a nonempty list");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string where = path + ".pairs[" + std::to_string(i) + "]";
        c.allowed_keys(arr[i], where, {"from", "to", "unitary"});
        Context sub{cfg, c, where};
        DilationItem item{sub.name_ref(arr[i], "from"), sub.name_ref(arr[i], "to"), UnitaryMap::identity(x.dim())};
        if (arr[i].contains("unitary")) {
          auto u = c.guard(where + ".unitary",
                           [&] { return automorphism_from_json(arr[i].at("unitary"), cfg.algebra, "unitary"); });
          if (u) item.unitary = *u;
        }
        p.items.push_back(std::move(item));
      }
      return 0;
    });
    return p;
  }
  if (type == "lipd") {
    c.allowed_keys(j, path, {"type", "pairs"});
    if (!cfg.algebra.single_block()) c.add(path, "lipd needs a single-block algebra");
    return LipdParams{x.name_pairs(j, "pairs")};
  }
  if (type == "mklength") {
    c.allowed_keys(j, path, {"type", "lipnorm", "automorphisms", "random"});
    MkLengthParams p{x.name_ref(j, "lipnorm"), x.automorphisms(j, "automorphisms"), x.get<int>(j, "random", 0)};
    if (p.random < 0) c.add(path + ".random", "must be >= 0");
    if (p.automorphisms.empty() && p.random <= 0 && !j.contains("automorphisms"))
      c.add(path, "give \"automorphisms\" or \"random\"");
    return p;
  }
  if (type == "perturbation-continuity") {
    c.allowed_keys(j, path, {"type", "dirac", "amplification", "omegas", "direction", "t", "slice"});
    PerturbationParams p;
    p.amplification = x.get<int>(j, "amplification", 1);
    p.dirac = x.dirac(j, p.amplification);
    p.slice = x.state(j, "slice");
    const int n = static_cast<int>(p.dirac.rows());
    if (j.contains("omegas")) {
      c.guard(path + ".omegas", [&] {
        for (std::size_t i = 0; i < j.at("omegas").size(); ++i) {
          const CMatrix w = io::hermitian_from_json(j.at("omegas")[i], "omegas[" + std::to_string(i) + "]").matrix();
          require(w.rows() == n, ErrorKind::Shape, "omega dimension must match the Dirac operator");
          p.omegas.push_back(w);
          p.labels.push_back("w" + std::to_string(i));
        }
        return 0;
      });
    } else {
      auto dir = c.guard(path + ".direction", [&] {
        const CMatrix w = io::hermitian_from_json(j.at("direction"), "direction").matrix();
        require(w.rows() == n, ErrorKind::Shape, "direction dimension must match the Dirac operator");
        return w;
      });
      const auto ts = x.get<std::vector<double>>(j, "t", {});
      if (dir)
        for (double t : ts) {
          p.omegas.push_back(t * *dir);
          p.labels.push_back("t=" + io::num(t));
        }
    }
    if (p.omegas.size() < 2) c.add(path, "the omega grid needs at least two points");
    return p;
  }
  if (type == "conformal-family") {
    c.allowed_keys(j, path, {"type", "dirac", "amplification", "factors", "pairs", "slice"});
    ConformalParams p;
    p.amplification = x.get<int>(j, "amplification", 1);
    p.dirac = x.dirac(j, p.amplification);
    p.pairs = x.get<int>(j, "pairs", 1000);
    p.slice = x.state(j, "slice");
    if (p.pairs < 1) c.add(path + ".pairs", "must be >= 1");
    c.guard(path + ".factors", [&] {
      const json& arr = j.at("factors");
      require(arr.is_array() && !arr.empty(), ErrorKind::InvalidInput, "must be a nonempty list");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        c.guard(path + ".factors[" + std::to_string(i) + "]", [&] {
          const CMatrix h = io::hermitian_from_json(arr[i], "factor").matrix();
          require(h.rows() == x.dim(), ErrorKind::Shape, "factor dimension must match the algebra");
          require(cfg.algebra.contains(h), ErrorKind::InvalidInput, "factor must lie in the algebra");
          qmetric::detail::inverse_checked(h, "factor");
          p.factors.push_back(h);
          return 0;
        });
      }
      return 0;
    });
    return p;
  }
  if (type == "curved-family") {
    c.allowed_keys(j, path, {"type", "generators", "H_grid", "slice"});
    CurvedParams p;
    p.slice = x.state(j, "slice");
    c.guard(path + ".generators", [&] {
      p.generators = io::generators_from_json(j.at("generators"));
      for (const auto& g : p.generators) {
        require(g.rows() == x.dim() && g.cols() == x.dim(), ErrorKind::Shape, "generator dimension must match the algebra");
        require(qmetric::detail::is_hermitian(g), ErrorKind::InvalidInput, "generators must be Hermitian");
      }
      return 0;
    });
    const auto m = static_cast<Eigen::Index>(p.generators.size());
    c.guard(path + ".H_grid", [&] {
      const json& arr = j.at("H_grid");
      require(arr.is_array() && arr.size() >= 2, ErrorKind::InvalidInput, "needs at least two coefficient matrices");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        c.guard(path + ".H_grid[" + std::to_string(i) + "]", [&] {
          const CMatrix h = io::matrix_from_json(arr[i], "H");
          require(h.imag().norm() == 0.0, ErrorKind::InvalidInput, "H must be real");
          require(m == 0 || (h.rows() == m && h.cols() == m), ErrorKind::Shape, "H must be m x m for m generators");
          qmetric::detail::inverse_checked(h, "H");
          p.grid.push_back(h.real());
          return 0;
        });
      }
      return 0;
    });
    return p;
  }
  if (type == "covering") {
    c.allowed_keys(j, path, {"type", "family", "sample_counts", "eps", "slice", "equivalence_subsample",
                             "expect_saturation"});
    CoveringParams p;
    p.sample_counts = x.counts(j, "sample_counts", {}, kMaxCoveringSamples);
    if (p.sample_counts.empty()) c.add(path + ".sample_counts", "must be a nonempty list");
    p.eps = x.get<double>(j, "eps", 0.1);
    x.positive("eps", p.eps);
    p.slice = x.state(j, "slice");
    p.equivalence_subsample = x.get<int>(j, "equivalence_subsample", 4);
    if (p.equivalence_subsample < 0) c.add(path + ".equivalence_subsample", "must be >= 0");
    p.expect_saturation = x.get<bool>(j, "expect_saturation", true);
    c.guard(path + ".family", [&] {
      const json& f = j.at("family");
      Context sub{cfg, c, path + ".family"};
      const std::string kind = f.at("type").get<std::string>();
      if (kind == "scaled") {
        c.allowed_keys(f, sub.path, {"type", "lipnorm", "lambda_range"});
        p.family = CoveringParams::Family::Scaled;
        p.lipnorm = sub.name_ref(f, "lipnorm");
        const auto r = f.at("lambda_range").get<std::vector<double>>();
        require(r.size() == 2 && r[0] > 0.0 && r[0] <= r[1], ErrorKind::InvalidInput,
                "lambda_range must be [lo, hi] with 0 < lo <= hi");
        p.lambda_lo = r[0];
        p.lambda_hi = r[1];
      } else if (kind == "perturbed") {
        c.allowed_keys(f, sub.path, {"type", "dirac", "amplification", "radius"});
        p.family = CoveringParams::Family::Perturbed;
        p.amplification = sub.get<int>(f, "amplification", 1);
        p.dirac = sub.dirac(f, p.amplification);
        p.radius = f.at("radius").get<double>();
        require(p.radius >= 0.0 && std::isfinite(p.radius), ErrorKind::InvalidInput, "radius must be >= 0");
      } else {
        fail(ErrorKind::InvalidInput, "family type must be \"scaled\" or \"perturbed\"");
      }
      return 0;
    });
    return p;
  }
  if (type == "axiom-suite") {
    c.allowed_keys(j, path, {"type", "lipnorms", "automorphisms", "random_lipnorms", "state_triples",
                             "random_automorphisms", "lipd_triples", "dilation_c", "eps", "net_samples"});
    AxiomParams p;
    if (j.contains("lipnorms")) {
      p.lipnorms = x.get<std::vector<std::string>>(j, "lipnorms", {});
      for (const auto& n : p.lipnorms) x.lip_ref(n, path + ".lipnorms");
    } else {
      for (const auto& [n, s] : cfg.lipnorms) {
        p.lipnorms.push_back(n);
        x.lip_ref(n, path + ".lipnorms");
      }
    }
    p.automorphisms = x.automorphisms(j, "automorphisms");
    p.random_lipnorms = x.get<int>(j, "random_lipnorms", 2);
    p.state_triples = x.get<int>(j, "state_triples", 20);
    p.random_automorphisms = x.get<int>(j, "random_automorphisms", 6);
    p.lipd_triples = x.get<int>(j, "lipd_triples", 1);
    p.dilation_c = x.get<double>(j, "dilation_c", 2.0);
    p.eps = x.get<double>(j, "eps", 0.2);
    p.net_samples = x.counts(j, "net_samples", {}, kMaxCoveringSamples);
    for (const char* k : {"random_lipnorms", "state_triples", "random_automorphisms", "lipd_triples"})
      if (x.get<int>(j, k, 0) < 0) c.add(path + "." + k, "must be >= 0");
    x.positive("dilation_c", p.dilation_c);
    x.positive("eps", p.eps);
    if (p.lipnorms.empty() && p.random_lipnorms == 0) c.add(path, "no Lip-norms to test");
    return p;
  }
  c.add(path + ".type", "unknown experiment type '" + type + "'");
  return MkParams{};
}

}  // namespace scenario_detail

/// Parses and fully validates a scenario; throws ValidationError listing
/// every problem found.
inline ScenarioConfig parse_scenario(const io::json& j) {
  using namespace scenario_detail;
  Collector c;
  ScenarioConfig cfg;
  cfg.raw = j;
  if (!j.is_object()) throw ValidationError({"scenario: must be a JSON object"});
  c.allowed_keys(j, "scenario", {"schema", "name", "seed", "algebra", "solver", "lipnorms", "experiment", "output"});

  const auto schema = c.guard("schema", [&] { return j.at("schema").get<std::string>(); });
  if (schema && *schema != kScenarioSchema) c.add("schema", "expected \"" + std::string(kScenarioSchema) + "\"");
  cfg.name = c.guard("name", [&] { return j.at("name").get<std::string>(); }).value_or("");
  if (j.contains("name") && cfg.name.empty()) c.add("name", "must be nonempty");
  const auto seed = c.guard("seed", [&] {
    const json& s = j.at("seed");
    require(s.is_number_unsigned() || (s.is_number_integer() && s.get<std::int64_t>() >= 0), ErrorKind::InvalidInput,
            "must be a nonnegative integer");
    return j.at("seed").get<std::uint64_t>();
  });
  cfg.seed = seed.value_or(0);
  if (j.contains("algebra")) {
    cfg.algebra = parse_algebra(j.at("algebra"), "algebra", c);
  } else {
    c.add("algebra", "missing");
  }
  cfg.solver = parse_solver(j.contains("solver") ? j.at("solver") : json(), c, cfg.seed);
  if (j.contains("lipnorms")) {
    cfg.lipnorms = parse_lipnorms(j.at("lipnorms"), c);
  } else {
    c.add("lipnorms", "missing");
  }
  cfg.output = c.guard("output", [&] { return j.at("output").get<std::string>(); }).value_or("");
  if (j.contains("output") && cfg.output.empty()) c.add("output", "must be a nonempty path");

  if (!j.contains("experiment")) {
    c.add("experiment", "missing");
  } else if (!cfg.algebra.blocks.empty()) {
    const json& e = j.at("experiment");
    if (auto type = c.guard("experiment.type", [&] { return e.at("type").get<std::string>(); })) {
      cfg.experiment = *type;
      Context x{cfg, c};
      cfg.params = parse_params(*type, e, x);
    }
  }
  if (!c.errors.empty()) throw ValidationError(c.errors);
  return cfg;
}

}  // namespace qmetric

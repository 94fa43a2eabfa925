#pragma once

// Experiment runners behind `qmetric run`.
//
// Each runner returns a flat table (frozen columns per experiment type), the
// full reports, extra manifest results and a list of checks. A run is
// tainted when any contributing report carries a taint flag or any check
// fails; the CLI maps that to exit status 3.

#include <atomic>
#include <exception>
#include <filesystem>
#include <thread>

#include "qmetric/scenario.hpp"

namespace qmetric {

struct Check {
  std::string name;
  bool passed = true;
  std::string detail;
};

struct ExperimentOutput {
  io::Table table;
  io::json reports = io::json::array();
  io::json results = io::json::object();
  std::vector<Check> checks;
  bool tainted = false;

  bool failed() const {
    return tainted || std::any_of(checks.begin(), checks.end(), [](const Check& c) { return !c.passed; });
  }
};

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int jobs = 1;
};

/// Maps fn over [0, n) with up to `jobs` threads; results keep index order.
template <class T, class F>
std::vector<T> parallel_map(std::size_t n, int jobs, F&& fn) {
  std::vector<std::optional<T>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= n) return;
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto k = static_cast<std::size_t>(std::max(1, jobs));
  if (k == 1 || n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(k, n); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

/// Greedy epsilon-net: repeatedly take the point covering most uncovered
/// points (ties to the lowest index). Returns the chosen centers.
inline std::vector<std::size_t> greedy_net(const std::vector<std::vector<double>>& dist, std::size_t n, double eps) {
  std::vector<bool> covered(n, false);
  std::vector<std::size_t> centers;
  std::size_t left = n;
  while (left > 0) {
    std::size_t best = 0, best_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t cnt = 0;
      for (std::size_t j = 0; j < n; ++j)
        if (!covered[j] && dist[i][j] <= eps) ++cnt;
      if (cnt > best_count) {
        best = i;
        best_count = cnt;
      }
    }
    centers.push_back(best);
    for (std::size_t j = 0; j < n; ++j)
      if (!covered[j] && dist[best][j] <= eps) {
        covered[j] = true;
        --left;
      }
  }
  return centers;
}

namespace experiments_detail {

using io::json;
using io::num;

inline std::string opt(const std::optional<double>& v) { return v ? num(*v) : ""; }

/// Kind and taint flags of the weakest contributing reports.
struct RowStatus {
  MetricReport acc;

  void add(const MetricReport& r) { acc.absorb(r); }
  std::string kind() const { return to_string(acc.kind); }
  std::string flags() const { return io::join_flags(acc.flags); }
};

class Builder {
 public:
  Builder(const ScenarioConfig& cfg, const SolverConfig& solver, int jobs) : cfg(cfg), solver(solver), jobs(jobs) {}

  const ScenarioConfig& cfg;
  SolverConfig solver;
  int jobs;
  ExperimentOutput out;

  void columns(std::vector<std::string> c) { out.table.columns = std::move(c); }

  void report(const std::string& label, const MetricReport& r) {
    out.reports.push_back({{"label", label}, {"report", io::report_to_json(r)}});
    if (r.tainted()) out.tainted = true;
  }

  void row(std::vector<std::string> cells, const RowStatus& s) {
    cells.push_back(s.kind());
    cells.push_back(s.flags());
    if (s.acc.tainted()) out.tainted = true;
    out.table.rows.push_back(std::move(cells));
  }

  void check(const std::string& name, bool passed, const std::string& detail) {
    out.checks.push_back({name, passed, detail});
  }

  std::uint64_t seed(std::uint64_t stream) const { return sub_seed(solver.seed, stream); }
};

inline MetricReport nan_report(const char* op, const std::string& flag) {
  MetricReport r;
  r.value = std::numeric_limits<double>::quiet_NaN();
  r.kind = ReportKind::LowerEstimate;
  r.provenance = op;
  r.add_flag(flag);
  return r;
}

inline bool is_lipnorm(const AlgebraSpec& algebra, const LipNormSpec& l, KernelCheckResult* out = nullptr) {
  const auto res = kernel_check(l, HermitianBasis(algebra));
  if (out) *out = res;
  return res.is_lipnorm;
}

// --------------------------------------------------------------------------

inline void run_mk(Builder& b, const MkParams& p) {
  const AlgebraSpec& alg = b.cfg.algebra;
  const LipNormSpec& l = b.cfg.lip(p.lipnorm);
  b.columns({"label", "lipnorm", "value", "lo", "hi", "kind", "flags"});
  struct Item {
    std::string label;
    DensityState a, c;
  };
  std::vector<Item> items;
  for (std::size_t i = 0; i < p.pairs.size(); ++i)
    items.push_back({"pair-" + std::to_string(i), p.pairs[i].first, p.pairs[i].second});
  for (int i = 0; i < p.random_pairs; ++i)
    items.push_back({"random-" + std::to_string(i), random_state(b.seed(0x6d6b0000ULL + 2 * i), alg),
                     random_state(b.seed(0x6d6b0001ULL + 2 * i), alg)});
  const auto reports = parallel_map<MetricReport>(items.size(), b.jobs, [&](std::size_t i) {
    return mk_distance(alg, l, items[i].a, items[i].c, b.solver);
  });
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& r = reports[i];
    RowStatus s;
    s.add(r);
    b.report(items[i].label, r);
    b.row({items[i].label, p.lipnorm, num(r.value), opt(r.lo), opt(r.hi)}, s);
  }
  if (p.diameter) {
    const auto r = mk_diameter(alg, l, b.solver);
    RowStatus s;
    s.add(r);
    b.report("diameter", r);
    b.row({"diameter", p.lipnorm, num(r.value), opt(r.lo), opt(r.hi)}, s);
  }
}

inline void run_hauslip(Builder& b, const HausLipParams& p) {
  b.columns({"label", "lipnorm_a", "lipnorm_b", "value", "lo", "hi", "kind", "flags"});
  const auto reports = parallel_map<MetricReport>(p.pairs.size(), b.jobs, [&](std::size_t i) {
    return hauslip(b.cfg.algebra, b.cfg.lip(p.pairs[i].first), b.cfg.lip(p.pairs[i].second), p.slice, b.solver);
  });
  for (std::size_t i = 0; i < p.pairs.size(); ++i) {
    const std::string label = p.pairs[i].first + "|" + p.pairs[i].second;
    RowStatus s;
    s.add(reports[i]);
    b.report(label, reports[i]);
    b.row({label, p.pairs[i].first, p.pairs[i].second, num(reports[i].value), opt(reports[i].lo), opt(reports[i].hi)}, s);
  }
}

inline void run_bridge(Builder& b, const BridgeParams& p) {
  b.columns({"label", "reach", "height", "length", "kind", "flags"});
  const BridgeSides sides{b.cfg.algebra, b.cfg.lip(p.lipnorm_a), p.algebra_b, b.cfg.lip(p.lipnorm_b), p.slice_a, p.slice_b};
  struct Parts {
    MetricReport reach, height, length;
  };
  const auto parts = parallel_map<Parts>(p.bridges.size(), b.jobs, [&](std::size_t i) {
    Parts out;
    out.reach = bridge_reach(p.bridges[i], sides, b.solver);
    try {
      out.height = bridge_height(p.bridges[i], sides, b.solver);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InvalidBridge) throw;
      out.height = nan_report("bridge_height", "invalid-bridge");
    }
    out.length = detail::length_from(out.reach, out.height, b.solver);
    return out;
  });
  std::vector<BridgeSpec> valid;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string label = "bridge-" + std::to_string(i);
    RowStatus s;
    s.add(parts[i].length);
    b.report(label + ".reach", parts[i].reach);
    b.report(label + ".height", parts[i].height);
    b.report(label + ".length", parts[i].length);
    b.row({label, num(parts[i].reach.value), num(parts[i].height.value), num(parts[i].length.value)}, s);
    if (std::isfinite(parts[i].height.value)) valid.push_back(p.bridges[i]);
  }
  if (!valid.empty()) {
    const auto bound = propinquity_upper_bound(valid, sides, b.solver);
    RowStatus s;
    s.add(bound);
    b.report("propinquity-upper-bound", bound);
    b.row({"propinquity-upper-bound", "", "", num(bound.value)}, s);
  }
}

inline void run_dilation(Builder& b, const DilationParams& p) {
  b.columns({"label", "from", "to", "value", "lo", "kind", "flags"});
  const auto reports = parallel_map<MetricReport>(p.items.size(), b.jobs, [&](std::size_t i) {
    const auto& it = p.items[i];
    return dilation(it.unitary, b.cfg.algebra, b.cfg.lip(it.from), b.cfg.lip(it.to), b.solver);
  });
  for (std::size_t i = 0; i < p.items.size(); ++i) {
    const std::string label = "dilation-" + std::to_string(i);
    RowStatus s;
    s.add(reports[i]);
    b.report(label, reports[i]);
    b.row({label, p.items[i].from, p.items[i].to, num(reports[i].value), opt(reports[i].lo)}, s);
  }
}

inline void run_lipd(Builder& b, const LipdParams& p) {
  b.columns({"label", "lipnorm_a", "lipnorm_b", "value", "tolerance", "propinquity_bound", "kind", "flags"});
  struct Out {
    LipschitzDistanceResult res;
    MetricReport da, db;
  };
  const auto results = parallel_map<Out>(p.pairs.size(), b.jobs, [&](std::size_t i) {
    const auto& la = b.cfg.lip(p.pairs[i].first);
    const auto& lb = b.cfg.lip(p.pairs[i].second);
    return Out{lipschitz_distance(b.cfg.algebra, la, lb, b.solver), mk_diameter(b.cfg.algebra, la, b.solver),
               mk_diameter(b.cfg.algebra, lb, b.solver)};
  });
  for (std::size_t i = 0; i < p.pairs.size(); ++i) {
    const auto& r = results[i];
    const std::string label = p.pairs[i].first + "|" + p.pairs[i].second;
    const double bound = lipd_propinquity_bound(r.res.report.value, r.da.hi.value_or(r.da.value), r.db.hi.value_or(r.db.value));
    RowStatus s;
    s.add(r.res.report);
    b.report(label, r.res.report);
    b.out.reports.back()["best_unitary"] = io::matrix_to_json(r.res.best_unitary.matrix(), "unitary");
    b.row({label, p.pairs[i].first, p.pairs[i].second, num(r.res.report.value),
           num(lipschitz_distance_tolerance(r.res.report.value, b.solver)), num(bound)},
          s);
  }
}

inline void run_mklength(Builder& b, const MkLengthParams& p) {
  b.columns({"label", "value", "lo", "kind", "flags"});
  std::vector<std::pair<std::string, UnitaryMap>> items;
  for (std::size_t i = 0; i < p.automorphisms.size(); ++i) items.emplace_back("automorphism-" + std::to_string(i), p.automorphisms[i]);
  for (int i = 0; i < p.random; ++i)
    items.emplace_back("random-" + std::to_string(i), random_automorphism(b.seed(0x6d6b6c00ULL + i), b.cfg.algebra));
  const auto reports = parallel_map<MetricReport>(items.size(), b.jobs, [&](std::size_t i) {
    return mk_length(items[i].second, b.cfg.algebra, b.cfg.lip(p.lipnorm), b.solver);
  });
  for (std::size_t i = 0; i < items.size(); ++i) {
    RowStatus s;
    s.add(reports[i]);
    b.report(items[i].first, reports[i]);
    b.out.reports.back()["unitary"] = io::matrix_to_json(items[i].second.matrix(), "unitary");
    b.row({items[i].first, num(reports[i].value), opt(reports[i].lo)}, s);
  }
}

// --------------------------------------------------------------------------

inline void run_perturbation(Builder& b, const PerturbationParams& p) {
  const AlgebraSpec& alg = b.cfg.algebra;
  b.columns({"row", "label_a", "label_b", "omega_dist", "hauslip", "hauslip_hi", "bridge_length", "kind", "flags"});
  const std::size_t g = p.omegas.size();
  std::vector<LipNormSpec> lips;
  for (const auto& w : p.omegas) lips.push_back(LipNormSpec::perturbed(p.dirac, w, p.amplification));
  const auto ok = parallel_map<char>(g, b.jobs, [&](std::size_t i) { return static_cast<char>(is_lipnorm(alg, lips[i])); });
  for (std::size_t i = 0; i < g; ++i)
    if (!ok[i]) b.check("kernel:" + p.labels[i], false, "not a Lip-norm at this grid point");
  std::vector<std::optional<detail::HausSide>> sides(g);
  {
    auto built = parallel_map<std::optional<detail::HausSide>>(g, b.jobs, [&](std::size_t i) {
      return ok[i] ? std::optional(detail::haus_side(alg, lips[i], p.slice, b.solver)) : std::nullopt;
    });
    sides = std::move(built);
  }
  // Base point: smallest ||omega||, so reversing the grid gives the same rows.
  std::size_t base = 0;
  for (std::size_t i = 1; i < g; ++i)
    if (operator_norm(p.omegas[i]) < operator_norm(p.omegas[base])) base = i;

  struct Pair {
    std::string type;
    std::size_t a, c;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i + 1 < g; ++i) {
    std::size_t a = i, c = i + 1;
    if (operator_norm(p.omegas[c]) < operator_norm(p.omegas[a])) std::swap(a, c);
    pairs.push_back({"consecutive", a, c});
  }
  for (std::size_t i = 0; i < g; ++i)
    if (i != base) pairs.push_back({"base", base, i});

  struct Out {
    MetricReport haus, length;
  };
  const BridgeSpec identity = BridgeSpec::identity(alg);
  const auto outs = parallel_map<Out>(pairs.size(), b.jobs, [&](std::size_t k) {
    const auto& pr = pairs[k];
    if (!sides[pr.a] || !sides[pr.c])
      return Out{nan_report("hauslip", "not-a-lipnorm"), nan_report("bridge_length", "not-a-lipnorm")};
    const BridgeSides bs{alg, lips[pr.a], alg, lips[pr.c], p.slice, p.slice};
    return Out{detail::hauslip_sides(*sides[pr.a], *sides[pr.c], b.solver), bridge_length(identity, bs, b.solver)};
  });

  double slope = 0.0;
  std::vector<std::tuple<double, double, double>> base_rows;  // dist, value, error
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& pr = pairs[k];
    const auto& o = outs[k];
    const double dist = operator_norm(CMatrix(p.omegas[pr.c] - p.omegas[pr.a]));
    const std::string label = pr.type + ":" + p.labels[pr.a] + "|" + p.labels[pr.c];
    RowStatus s;
    s.add(o.haus);
    s.add(o.length);
    b.report(label + ".hauslip", o.haus);
    b.report(label + ".bridge_length", o.length);
    b.row({pr.type, p.labels[pr.a], p.labels[pr.c], num(dist), num(o.haus.value), opt(o.haus.hi), num(o.length.value)}, s);
    if (!std::isfinite(o.haus.value)) continue;
    const double err = o.haus.hi.value_or(o.haus.value) - o.haus.value + 10.0 * b.solver.tol;
    if (pr.type == "consecutive") {
      if (dist > 0.0) slope = std::max(slope, o.haus.hi.value_or(o.haus.value) / dist);
      if (dist == 0.0 && o.haus.value > err) b.check("zero-at-equal-omega", false, label);
    } else {
      base_rows.emplace_back(dist, o.haus.value, err);
    }
  }
  // Local slope from consecutive steps bounds every distance to the base.
  bool bounded = std::isfinite(slope);
  std::string worst;
  for (const auto& [dist, v, err] : base_rows)
    if (v > slope * dist + err) {
      bounded = false;
      worst = "hauslip " + num(v) + " > slope * " + num(dist);
    }
  b.check("hauslip<=slope*dist", bounded, bounded ? "slope=" + num(slope) : worst);
  std::sort(base_rows.begin(), base_rows.end());
  bool monotone = true;
  for (std::size_t i = 1; i < base_rows.size(); ++i)
    if (std::get<1>(base_rows[i]) + std::get<2>(base_rows[i]) + std::get<2>(base_rows[i - 1]) < std::get<1>(base_rows[i - 1]))
      monotone = false;
  b.check("hauslip-monotone-in-omega-dist", monotone, "");
  b.out.results["fitted_slope"] = slope;
  b.out.results["base_label"] = p.labels[base];
}

inline void run_conformal(Builder& b, const ConformalParams& p) {
  const AlgebraSpec& alg = b.cfg.algebra;
  b.columns({"label", "M", "max_defect", "violations", "hauslip_to_base", "hauslip_prev", "lip_h_hprev_inv",
             "lip_hprev_inv_h", "kind", "flags"});
  const LipNormSpec base = LipNormSpec::dirac(p.dirac, p.amplification);
  const std::size_t g = p.factors.size();
  std::vector<LipNormSpec> lips;
  for (const auto& h : p.factors) lips.push_back(LipNormSpec::conformal(p.dirac, h, p.amplification));
  const auto base_side = detail::haus_side(alg, base, p.slice, b.solver);

  struct Out {
    double m = 0.0, max_defect = -std::numeric_limits<double>::infinity();
    int violations = 0;
    std::optional<detail::HausSide> side;
  };
  const auto outs = parallel_map<Out>(g, b.jobs, [&](std::size_t i) {
    Out o;
    const CMatrix h2 = p.factors[i] * p.factors[i];
    o.m = operator_norm(h2) * operator_norm(qmetric::detail::inverse_checked(h2, "h^2"));
    const AdmissibleF f = AdmissibleF::scaled_leibniz(std::max(1.0, o.m));
    for (int k = 0; k < p.pairs; ++k) {
      const auto a = random_hermitian(b.seed(0x636f0000ULL + (i << 24) + 2 * k), alg);
      const auto c = random_hermitian(b.seed(0x636f0001ULL + (i << 24) + 2 * k), alg);
      const double d = quasi_leibniz_defect(lips[i], f, a, c);
      o.max_defect = std::max(o.max_defect, d);
      if (d > 1e-9) ++o.violations;
    }
    if (is_lipnorm(alg, lips[i])) o.side = detail::haus_side(alg, lips[i], p.slice, b.solver);
    return o;
  });
  int total_violations = 0;
  for (std::size_t i = 0; i < g; ++i) {
    const std::string label = "h" + std::to_string(i);
    RowStatus s;
    MetricReport to_base = nan_report("hauslip", "not-a-lipnorm"), prev;
    if (outs[i].side) to_base = detail::hauslip_sides(base_side, *outs[i].side, b.solver);
    s.add(to_base);
    b.report(label + ".hauslip_to_base", to_base);
    std::string prev_cell, diag1, diag2;
    if (i > 0) {
      prev = (outs[i].side && outs[i - 1].side) ? detail::hauslip_sides(*outs[i - 1].side, *outs[i].side, b.solver)
                                                : nan_report("hauslip", "not-a-lipnorm");
      s.add(prev);
      b.report(label + ".hauslip_prev", prev);
      prev_cell = num(prev.value);
      const CMatrix prev_inv = qmetric::detail::inverse_checked(p.factors[i - 1], "factor");
      diag1 = num(eval_lipnorm_general(base, CMatrix(p.factors[i] * prev_inv)));
      diag2 = num(eval_lipnorm_general(base, CMatrix(prev_inv * p.factors[i])));
    }
    total_violations += outs[i].violations;
    b.row({label, num(outs[i].m), num(outs[i].max_defect), std::to_string(outs[i].violations), num(to_base.value),
           prev_cell, diag1, diag2},
          s);
  }
  b.check("quasi-leibniz-defect<=1e-9", total_violations == 0,
          std::to_string(total_violations) + " violations over " + std::to_string(p.pairs) + " pairs per factor");
  b.out.results["violations"] = total_violations;
}

inline void run_curved(Builder& b, const CurvedParams& p) {
  const AlgebraSpec& alg = b.cfg.algebra;
  b.columns({"label_a", "label_b", "B", "diam", "bridge_length", "bound", "kind", "flags"});
  const auto m = static_cast<Eigen::Index>(p.generators.size());
  const LipNormSpec base = LipNormSpec::curved(p.generators, RMatrix::Identity(m, m));
  const auto diam = mk_diameter(alg, base, b.solver);
  b.report("diameter", diam);
  const double d = diam.hi.value_or(diam.value);
  const BridgeSpec identity = BridgeSpec::identity(alg);
  const std::size_t rows = p.grid.size() - 1;
  const auto lengths = parallel_map<MetricReport>(rows, b.jobs, [&](std::size_t i) {
    const BridgeSides bs{alg, LipNormSpec::curved(p.generators, p.grid[i]), alg,
                         LipNormSpec::curved(p.generators, p.grid[i + 1]), p.slice, p.slice};
    return bridge_length(identity, bs, b.solver);
  });
  bool b_down = true, len_down = true;
  double prev_b = std::numeric_limits<double>::infinity(), prev_len = prev_b;
  for (std::size_t i = 0; i < rows; ++i) {
    const double bv = curved_bound(p.grid[i], p.grid[i + 1], d);
    const auto& len = lengths[i];
    const std::string la = "H" + std::to_string(i), lb = "H" + std::to_string(i + 1);
    RowStatus s;
    s.add(diam);
    s.add(len);
    b.report(la + "|" + lb + ".bridge_length", len);
    const double err = len.hi.value_or(len.value) - len.value + 10.0 * b.solver.tol;
    if (bv > prev_b + 1e-12) b_down = false;
    if (len.value > prev_len + err) len_down = false;
    prev_b = bv;
    prev_len = len.value;
    b.row({la, lb, num(bv), num(d), num(len.value), num(std::min(bv, len.value))}, s);
  }
  b.check("B-nonincreasing-along-grid", b_down, "");
  b.check("bridge-length-nonincreasing-along-grid", len_down, "");
  b.out.results["diameter_hi"] = d;
}

inline void run_covering(Builder& b, const CoveringParams& p) {
  const AlgebraSpec& alg = b.cfg.algebra;
  b.columns({"samples", "net_size", "eps", "max_pairwise", "kind", "flags"});
  const int total = p.sample_counts.back();
  LipNormSpec base;
  std::vector<LipNormSpec> members;
  std::vector<std::string> labels;
  if (p.family == CoveringParams::Family::Scaled) {
    base = b.cfg.lip(p.lipnorm);
    Rng rng(b.seed(0x636f7600ULL));
    for (int i = 0; i < total; ++i) {
      const double lambda = rng.uniform(p.lambda_lo, p.lambda_hi);
      members.push_back(LipNormSpec::scaled(lambda, base));
      labels.push_back("lambda=" + num(lambda));
    }
  } else {
    base = LipNormSpec::dirac(p.dirac, p.amplification);
    Rng rng(b.seed(0x636f7700ULL));
    for (int i = 0; i < total; ++i) {
      const auto w = random_hermitian(b.seed(0x636f7800ULL + i), static_cast<int>(p.dirac.rows()));
      const double nw = operator_norm(w);
      const double r = p.radius * rng.uniform();
      members.push_back(LipNormSpec::perturbed(p.dirac, nw > 0.0 ? CMatrix(w.matrix() * (r / nw)) : CMatrix(w.matrix()),
                                               p.amplification));
      labels.push_back("member-" + std::to_string(i));
    }
  }
  const auto ok = parallel_map<char>(members.size(), b.jobs,
                                     [&](std::size_t i) { return static_cast<char>(is_lipnorm(alg, members[i])); });
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (ok[i]) {
      keep.push_back(i);
    } else {
      b.check("kernel:" + labels[i], false, "family member is not a Lip-norm");
    }
  }
  const auto sides = parallel_map<detail::HausSide>(keep.size(), b.jobs, [&](std::size_t k) {
    return detail::haus_side(alg, members[keep[k]], p.slice, b.solver);
  });
  const std::size_t n = keep.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  const auto dists = parallel_map<MetricReport>(pairs.size(), b.jobs, [&](std::size_t k) {
    return detail::hauslip_sides(sides[pairs[k].first], sides[pairs[k].second], b.solver);
  });
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  RowStatus all;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    d[pairs[k].first][pairs[k].second] = d[pairs[k].second][pairs[k].first] = dists[k].value;
    all.add(dists[k]);
  }
  std::vector<std::size_t> sizes;
  for (int count : p.sample_counts) {
    // Members are nested: the first `count` draws, minus rejected ones.
    std::size_t m = 0;
    while (m < n && keep[m] < static_cast<std::size_t>(count)) ++m;
    double maxd = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) maxd = std::max(maxd, d[i][j]);
    const auto net = greedy_net(d, m, p.eps);
    sizes.push_back(net.size());
    b.row({std::to_string(count), std::to_string(net.size()), num(p.eps), num(maxd)}, all);
  }
  bool nondecreasing = true;
  for (std::size_t i = 1; i < sizes.size(); ++i) nondecreasing = nondecreasing && sizes[i] >= sizes[i - 1];
  b.check("net-size-nondecreasing", nondecreasing, "");
  if (p.expect_saturation && sizes.size() >= 2)
    b.check("net-size-saturates", sizes[sizes.size() - 1] == sizes[sizes.size() - 2],
            "last two sizes " + std::to_string(sizes[sizes.size() - 2]) + ", " + std::to_string(sizes.back()));

  // Hypothesis L <= C' L_member on a subsample.
  const std::size_t sub = std::min<std::size_t>(static_cast<std::size_t>(p.equivalence_subsample), keep.size());
  const auto consts = parallel_map<MetricReport>(sub, b.jobs, [&](std::size_t k) {
    return best_equivalence_constant(alg, members[keep[k]], base, b.solver);
  });
  double cmax = 0.0;
  for (std::size_t k = 0; k < sub; ++k) {
    cmax = std::max(cmax, consts[k].value);
    b.report("equivalence-constant:" + labels[keep[k]], consts[k]);
  }
  b.out.results["equivalence_constant_max"] = cmax;
  b.out.results["net_sizes"] = sizes;
  b.out.results["members_used"] = n;
}

}  // namespace experiments_detail

}  // namespace qmetric

#include "qmetric/axiom_suite.hpp"

namespace qmetric {

/// Runs one validated scenario and returns its output tables.
inline ExperimentOutput run_experiment(const ScenarioConfig& cfg, int jobs = 1) {
  using namespace experiments_detail;
  Builder b(cfg, cfg.solver, jobs);
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, MkParams>) run_mk(b, p);
        else if constexpr (std::is_same_v<T, HausLipParams>) run_hauslip(b, p);
        else if constexpr (std::is_same_v<T, BridgeParams>) run_bridge(b, p);
        else if constexpr (std::is_same_v<T, DilationParams>) run_dilation(b, p);
        else if constexpr (std::is_same_v<T, LipdParams>) run_lipd(b, p);
        else if constexpr (std::is_same_v<T, MkLengthParams>) run_mklength(b, p);
        else if constexpr (std::is_same_v<T, PerturbationParams>) run_perturbation(b, p);
        else if constexpr (std::is_same_v<T, ConformalParams>) run_conformal(b, p);
        else if constexpr (std::is_same_v<T, CurvedParams>) run_curved(b, p);
        else if constexpr (std::is_same_v<T, CoveringParams>) run_covering(b, p);
        else run_axiom_suite(b, p);
      },
      cfg.params);
  return std::move(b.out);
}

inline int exit_status(const ExperimentOutput& out) { return out.failed() ? 3 : 0; }

/// Writes report.json, results.csv and manifest.json into `dir`.
inline void write_outputs(const ScenarioConfig& cfg, const ExperimentOutput& out, const std::string& dir,
                          bool seed_overridden) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorKind::Io, "cannot create output directory '" + dir + "'");

  io::json report;
  report["schema"] = "qmetric.report/1";
  report["name"] = cfg.name;
  report["experiment"] = cfg.experiment;
  report["reports"] = out.reports;

  io::json checks = io::json::array();
  for (const auto& c : out.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  io::json manifest;
  manifest["schema"] = "qmetric.manifest/1";
  manifest["name"] = cfg.name;
  manifest["code_version"] = kCodeVersion;
  manifest["experiment"] = cfg.experiment;
  manifest["seed"] = cfg.seed;
  manifest["seed_overridden"] = seed_overridden;
  manifest["solver_hash"] = cfg.solver.hash();
  manifest["config"] = cfg.raw;
  manifest["columns"] = out.table.columns;
  manifest["checks"] = checks;
  manifest["results"] = out.results;
  manifest["tainted"] = out.tainted;
  manifest["exit_status"] = exit_status(out);

  const fs::path base(dir);
  io::write_file((base / "report.json").string(), report.dump(2) + "\n");
  io::write_file((base / "results.csv").string(), out.table.to_csv());
  io::write_file((base / "manifest.json").string(), manifest.dump(2) + "\n");
}

/// Parse, run and write one scenario. Returns the process exit status
/// (0 ok, 3 tainted or failed check); validation problems throw.
inline int run_scenario(const io::json& config, const RunOptions& opts = {}) {
  io::json j = config;
  if (opts.seed) j["seed"] = *opts.seed;
  const ScenarioConfig cfg = parse_scenario(j);
  const ExperimentOutput out = run_experiment(cfg, opts.jobs);
  write_outputs(cfg, out, opts.out.value_or(cfg.output), opts.seed.has_value());
  return exit_status(out);
}

}  // namespace qmetric

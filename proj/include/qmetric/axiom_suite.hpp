#pragma once

// The axiom-suite experiment: metric axioms, dilation bounds, Lipschitz
// distance and mk-length properties, one row per property instance.
// Included from experiments.hpp.

namespace qmetric::experiments_detail {

class AxiomTable {
 public:
  explicit AxiomTable(Builder& b) : b_(b) {
    b_.columns({"property", "instance", "value", "bound", "margin", "status", "kind", "flags"});
  }

  /// value <= bound
  void le(const std::string& prop, const std::string& inst, double value, double bound, const RowStatus& s) {
    emit(prop, inst, value, bound, bound - value, s);
  }
  /// value >= bound
  void ge(const std::string& prop, const std::string& inst, double value, double bound, const RowStatus& s) {
    emit(prop, inst, value, bound, value - bound, s);
  }
  void info(const std::string& prop, const std::string& inst, double value, const RowStatus& s) {
    b_.row({prop, inst, num(value), "", "", "info"}, s);
  }
  void skip(const std::string& prop, const std::string& reason) { b_.row({prop, reason, "", "", "", "skip"}, RowStatus{}); }
  void verdict(const std::string& prop, const std::string& inst, bool passed, double value, const RowStatus& s) {
    if (!passed) ++failures_;
    b_.row({prop, inst, num(value), "", "", passed ? "pass" : "fail"}, s);
  }

  int failures() const { return failures_; }
  int rows() const { return static_cast<int>(b_.out.table.rows.size()); }

 private:
  void emit(const std::string& prop, const std::string& inst, double value, double bound, double margin,
            const RowStatus& s) {
    const bool pass = std::isfinite(margin) && margin >= 0.0;
    if (!pass) ++failures_;
    b_.row({prop, inst, num(value), num(bound), num(margin), pass ? "pass" : "fail"}, s);
  }

  Builder& b_;
  int failures_ = 0;
};

inline RowStatus status_of(std::initializer_list<const MetricReport*> reports) {
  RowStatus s;
  for (const auto* r : reports) s.add(*r);
  return s;
}

inline void run_axiom_suite(Builder& b, const AxiomParams& p) {
  const AlgebraSpec& alg = b.cfg.algebra;
  const int n = alg.total_dim();
  const double tol = b.solver.tol;
  AxiomTable t(b);

  // Lip-norms under test: the named ones plus seeded random Dirac operators.
  std::vector<std::pair<std::string, LipNormSpec>> all;
  for (const auto& name : p.lipnorms) all.emplace_back(name, b.cfg.lip(name));
  for (int k = 0; k < p.random_lipnorms; ++k)
    all.emplace_back("random-" + std::to_string(k),
                     LipNormSpec::dirac(random_hermitian(b.seed(0x72616e00ULL + k), 2 * n).matrix(), 2));

  const auto kernels = parallel_map<KernelCheckResult>(all.size(), b.jobs, [&](std::size_t i) {
    return kernel_check(all[i].second, HermitianBasis(alg));
  });
  std::vector<std::pair<std::string, LipNormSpec>> lips;
  for (std::size_t i = 0; i < all.size(); ++i) {
    t.verdict("kernel", all[i].first, kernels[i].is_lipnorm, kernels[i].min_value, RowStatus{});
    if (kernels[i].is_lipnorm) lips.push_back(all[i]);
  }

  // Monge-Kantorovich axioms and diameter bounds.
  const auto diams = parallel_map<MetricReport>(lips.size(), b.jobs,
                                                [&](std::size_t i) { return mk_diameter(alg, lips[i].second, b.solver); });
  struct Triple {
    MetricReport ab, ba, bc, ac, aa;
  };
  const std::size_t triples = static_cast<std::size_t>(p.state_triples);
  const auto mk = parallel_map<Triple>(lips.size() * triples, b.jobs, [&](std::size_t w) {
    const std::size_t li = w / triples, k = w % triples;
    const auto& l = lips[li].second;
    const std::uint64_t s = 0x6d6b7400ULL + 3 * k;
    const DensityState a = random_pure_state(b.seed(s), alg);
    const DensityState c = random_state(b.seed(s + 1), alg);
    const DensityState d = k % 2 ? random_pure_state(b.seed(s + 2), alg) : random_state(b.seed(s + 2), alg);
    return Triple{mk_distance(alg, l, a, c, b.solver), mk_distance(alg, l, c, a, b.solver), mk_distance(alg, l, c, d, b.solver),
                  mk_distance(alg, l, a, d, b.solver), mk_distance(alg, l, a, a, b.solver)};
  });
  for (std::size_t li = 0; li < lips.size(); ++li) {
    const auto& name = lips[li].first;
    const auto& dm = diams[li];
    b.report("diameter:" + name, dm);
    t.le("diameter-interval", name, dm.value, dm.hi.value_or(dm.value), status_of({&dm}));
    for (std::size_t k = 0; k < triples; ++k) {
      const auto& x = mk[li * triples + k];
      const std::string inst = name + "#" + std::to_string(k);
      t.le("mk-identity", inst, x.aa.value, 3.0 * tol, status_of({&x.aa}));
      t.le("mk-symmetry", inst, std::abs(x.ab.value - x.ba.value), 3.0 * tol, status_of({&x.ab, &x.ba}));
      t.le("mk-triangle", inst, x.ac.value, x.ab.value + x.bc.value + 3.0 * tol, status_of({&x.ab, &x.bc, &x.ac}));
      t.le("mk<=diameter", inst, std::max({x.ab.value, x.bc.value, x.ac.value}), dm.hi.value_or(dm.value) + 3.0 * tol,
           status_of({&x.ab, &x.bc, &x.ac, &dm}));
    }
  }

  // Dilation (equivalence constant) bounds: C(i,j) is the least C with L_j <= C L_i.
  const std::size_t nl = lips.size();
  const auto cs = parallel_map<MetricReport>(nl * nl, b.jobs, [&](std::size_t w) {
    const std::size_t i = w / nl, j = w % nl;
    if (i == j) return detail::make_report("best_equivalence_constant", b.solver, 1.0, ReportKind::ExactWithinTol);
    return best_equivalence_constant(alg, lips[i].second, lips[j].second, b.solver);
  });
  auto C = [&](std::size_t i, std::size_t j) -> const MetricReport& { return cs[i * nl + j]; };
  for (std::size_t i = 0; i < nl; ++i)
    for (std::size_t j = i + 1; j < nl; ++j) {
      const std::string inst = lips[i].first + "|" + lips[j].first;
      const double prod = C(i, j).value * C(j, i).value;
      t.ge("dilation-product>=1", inst, prod, 1.0 - 4.0 * tol, status_of({&C(i, j), &C(j, i)}));
    }
  for (std::size_t i = 0; i < nl; ++i)
    for (std::size_t j = 0; j < nl; ++j)
      for (std::size_t k = 0; k < nl; ++k) {
        if (i == j || j == k || i == k) continue;
        const double chain = C(i, j).value * C(j, k).value;
        t.le("dilation-chain", lips[i].first + ">" + lips[j].first + ">" + lips[k].first, C(i, k).value,
             chain + 4.0 * tol * std::max(1.0, chain), status_of({&C(i, j), &C(j, k), &C(i, k)}));
      }

  // Lipschitz distance: identity, symmetry, triangle.
  if (!alg.single_block()) {
    t.skip("lipd", "multi-block algebra: automorphisms are not all inner");
  } else if (nl < 2 || p.lipd_triples == 0) {
    t.skip("lipd", "needs at least two Lip-norms");
  } else {
    struct L3 {
      double aa, ab, ba, bc, ac;
      MetricReport r;
    };
    const auto ls = parallel_map<L3>(static_cast<std::size_t>(p.lipd_triples), b.jobs, [&](std::size_t k) {
      const auto& a = lips[k % nl].second;
      const auto& c = lips[(k + 1) % nl].second;
      const auto& d = lips[(k + 2) % nl].second;
      L3 o{};
      const auto raa = lipschitz_distance(alg, a, a, b.solver).report;
      const auto rab = lipschitz_distance(alg, a, c, b.solver).report;
      const auto rba = lipschitz_distance(alg, c, a, b.solver).report;
      const auto rbc = lipschitz_distance(alg, c, d, b.solver).report;
      const auto rac = lipschitz_distance(alg, a, d, b.solver).report;
      o = {raa.value, rab.value, rba.value, rbc.value, rac.value, raa};
      for (const auto* r : {&rab, &rba, &rbc, &rac}) o.r.absorb(*r);
      return o;
    });
    for (std::size_t k = 0; k < ls.size(); ++k) {
      const auto& x = ls[k];
      const std::string inst = lips[k % nl].first + "|" + lips[(k + 1) % nl].first + "|" + lips[(k + 2) % nl].first;
      RowStatus s;
      s.add(x.r);
      auto ptol = [&](double v) { return lipschitz_distance_tolerance(v, b.solver); };
      t.le("lipd-identity", inst, x.aa, 3.0 * ptol(0.0), s);
      t.le("lipd-symmetry", inst, std::abs(x.ab - x.ba), 3.0 * ptol(x.ab), s);
      t.le("lipd-triangle", inst, x.ac, x.ab + x.bc + 3.0 * std::max({ptol(x.ab), ptol(x.bc), ptol(x.ac)}), s);
    }
  }

  if (lips.empty()) {
    t.skip("mkl", "no valid Lip-norm");
  } else {
    // mk length function axioms for the first valid Lip-norm.
    const auto& [lname, l] = lips.front();
    const double diam_hi = diams.front().hi.value_or(diams.front().value);
    std::vector<UnitaryMap> autos = p.automorphisms;
    for (int k = 0; k < p.random_automorphisms; ++k) autos.push_back(random_automorphism(b.seed(0x6175746fULL + k), alg));
    const std::size_t na = autos.size();
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < na; ++i)
      for (std::size_t j = i + 1; j < na; ++j) pairs.emplace_back(i, j);
    // Work items: id, each alpha, each inverse, each composition.
    const std::size_t items = 1 + 2 * na + pairs.size();
    const auto len = parallel_map<MetricReport>(items, b.jobs, [&](std::size_t w) {
      UnitaryMap u = UnitaryMap::identity(n);
      if (w >= 1 && w <= na) u = autos[w - 1];
      else if (w > na && w <= 2 * na) u = autos[w - 1 - na].inverse();
      else if (w > 2 * na) u = autos[pairs[w - 1 - 2 * na].first].compose(autos[pairs[w - 1 - 2 * na].second]);
      return mk_length(u, alg, l, b.solver);
    });
    t.le("mkl-identity", lname, len[0].value, 3.0 * tol, status_of({&len[0]}));
    for (std::size_t i = 0; i < na; ++i) {
      const auto& a = len[1 + i];
      const auto& ai = len[1 + na + i];
      const std::string inst = lname + "#" + std::to_string(i);
      t.le("mkl-inverse-symmetry", inst, std::abs(a.value - ai.value), 3.0 * tol, status_of({&a, &ai}));
      t.le("mkl<=diameter", inst, a.value, diam_hi + 3.0 * tol, status_of({&a}));
    }
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto& [i, j] = pairs[k];
      const auto& comp = len[1 + 2 * na + k];
      t.le("mkl-subadditivity", lname + "#" + std::to_string(i) + "o" + std::to_string(j), comp.value,
           len[1 + i].value + len[1 + j].value + 3.0 * tol, status_of({&comp, &len[1 + i], &len[1 + j]}));
    }

    // Total boundedness of {alpha : L o alpha <= C L} through greedy nets in
    // the mk-length metric d(alpha, beta) = mkl(alpha^-1 beta).
    if (!p.net_samples.empty()) {
      const auto want = static_cast<std::size_t>(p.net_samples.back());
      std::vector<UnitaryMap> kept;
      RowStatus sampling;
      const std::size_t batch = std::max<std::size_t>(want, 8);
      std::size_t drawn = 0;
      while (kept.size() < want && drawn < 20 * want) {
        std::vector<UnitaryMap> cand;
        for (std::size_t k = 0; k < batch; ++k) cand.push_back(random_automorphism(b.seed(0x6e657400ULL + drawn + k), alg));
        drawn += batch;
        const auto dil = parallel_map<MetricReport>(cand.size(), b.jobs, [&](std::size_t k) {
          return dilation(cand[k], alg, l, l, b.solver);
        });
        for (std::size_t k = 0; k < cand.size() && kept.size() < want; ++k) {
          sampling.add(dil[k]);
          if (dil[k].value <= p.dilation_c) kept.push_back(cand[k]);
        }
      }
      t.verdict("mkl-net-sampling", lname, kept.size() == want, static_cast<double>(kept.size()), sampling);
      const std::size_t m = kept.size();
      std::vector<std::pair<std::size_t, std::size_t>> dp;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) dp.emplace_back(i, j);
      const auto dd = parallel_map<MetricReport>(dp.size(), b.jobs, [&](std::size_t k) {
        return mk_length(kept[dp[k].first].inverse().compose(kept[dp[k].second]), alg, l, b.solver);
      });
      std::vector<std::vector<double>> d(m, std::vector<double>(m, 0.0));
      RowStatus net_status;
      for (std::size_t k = 0; k < dp.size(); ++k) {
        d[dp[k].first][dp[k].second] = d[dp[k].second][dp[k].first] = dd[k].value;
        net_status.add(dd[k]);
      }
      std::vector<std::size_t> sizes;
      for (int count : p.net_samples) {
        const std::size_t c = std::min<std::size_t>(static_cast<std::size_t>(count), m);
        sizes.push_back(greedy_net(d, c, p.eps).size());
        t.info("mkl-net-size", lname + "@N=" + std::to_string(count), static_cast<double>(sizes.back()), net_status);
      }
      if (sizes.size() >= 2) {
        const double jump = std::abs(static_cast<double>(sizes.back()) - static_cast<double>(sizes[sizes.size() - 2]));
        t.le("mkl-net-saturation", lname, jump, 0.0, net_status);
      }
      b.out.results["mkl_net_sizes"] = sizes;
    }
  }

  b.check("axiom-rows", t.failures() == 0,
          std::to_string(t.failures()) + " of " + std::to_string(t.rows()) + " rows failed");
  b.out.results["failed_rows"] = t.failures();
}

}  // namespace qmetric::experiments_detail

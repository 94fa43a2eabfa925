// qmetric: scenario runner and oracle front end.
//
// Exit status: 0 ok, 1 runtime or I/O failure, 2 invalid input,
// 3 tainted report or failed check.

#include <iostream>

#include <CLI11.hpp>

#include "qmetric/experiments.hpp"

namespace {

using qmetric::io::json;

int status_for(const qmetric::Error& e) {
  switch (e.kind()) {
    case qmetric::ErrorKind::Io:
    case qmetric::ErrorKind::Contract:
      return 1;
    default:
      return 2;
  }
}

qmetric::OracleProblem oracle_kind(const std::string& s) {
  if (s == "max-linear") return qmetric::OracleProblem::MaxLinear;
  if (s == "min-distance") return qmetric::OracleProblem::MinDistance;
  if (s == "max-convex") return qmetric::OracleProblem::MaxConvex;
  qmetric::fail(qmetric::ErrorKind::InvalidInput, "problem must be max-linear, min-distance or max-convex");
}

// {"problem", "algebra": {"blocks"}, "lipnorm", "radius", "slice", "c" |
//  "target" | "functional": "operator-norm" | "spread" | {"linear": matrix},
//  "resolution"}
json run_oracle(const json& j) {
  using namespace qmetric;
  const auto kind = oracle_kind(j.at("problem").get<std::string>());
  AlgebraSpec algebra{j.at("algebra").at("blocks").get<std::vector<int>>()};
  algebra.validate();
  const int n = algebra.total_dim();
  BallSpec spec{algebra, io::lipnorm_from_json(j.at("lipnorm")), j.value("radius", 1.0), std::nullopt};
  if (j.contains("slice") && !j.at("slice").is_null()) spec.slice = io::state_from_json(j.at("slice"), n, "slice");
  OraclePayload payload{HermitianMatrix::zero(n), HermitianMatrix::zero(n), std::nullopt};
  if (kind == OracleProblem::MaxLinear) payload.c = io::hermitian_from_json(j.at("c"), "c");
  if (kind == OracleProblem::MinDistance) payload.target = io::hermitian_from_json(j.at("target"), "target");
  if (kind == OracleProblem::MaxConvex) {
    const json& f = j.at("functional");
    if (f == "operator-norm") {
      payload.g = ConvexFunctional::operator_norm();
    } else if (f == "spread") {
      payload.g = ConvexFunctional::spread();
    } else if (f.is_object() && f.contains("linear")) {
      payload.g = ConvexFunctional::linear(io::hermitian_from_json(f.at("linear"), "functional.linear"));
    } else {
      fail(ErrorKind::InvalidInput, "functional must be operator-norm, spread or {\"linear\": matrix}");
    }
  }
  const auto res = brute_force_oracle(kind, spec, payload, j.value("resolution", SolverConfig{}.oracle_resolution));
  json out;
  out["value"] = res.value;
  out["error_bound"] = res.error_bound;
  out["coords"] = std::vector<double>(res.coords.data(), res.coords.data() + res.coords.size());
  out["evaluations"] = res.evaluations;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical toolkit for finite-dimensional quantum compact metric spaces"};
  app.require_subcommand(1);

  std::string config;
  std::string out_dir;
  std::uint64_t seed = 0;
  int jobs = 1;
  auto* run = app.add_subcommand("run", "Run a scenario and write report.json, results.csv, manifest.json");
  run->add_option("config", config, "Scenario file")->required();
  auto* out_opt = run->add_option("--out", out_dir, "Output directory (overrides the scenario)");
  auto* seed_opt = run->add_option("--seed", seed, "Seed (overrides the scenario)");
  run->add_option("--jobs", jobs, "Worker threads")->check(CLI::Range(1, 256));

  std::string vconfig;
  auto* validate = app.add_subcommand("validate", "Validate a scenario file");
  validate->add_option("config", vconfig, "Scenario file")->required();

  std::string problem;
  auto* oracle = app.add_subcommand("oracle", "Brute-force oracle for a small problem (d <= 3)");
  oracle->add_option("problem", problem, "Problem file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      qmetric::RunOptions opts;
      if (*out_opt) opts.out = out_dir;
      if (*seed_opt) opts.seed = seed;
      opts.jobs = jobs;
      const int rc = qmetric::run_scenario(qmetric::io::read_json_file(config), opts);
      if (rc == 3) std::cerr << "qmetric: tainted report or failed check (see manifest.json)\n";
      return rc;
    }
    if (*validate) {
      const auto cfg = qmetric::parse_scenario(qmetric::io::read_json_file(vconfig));
      std::cout << "ok: " << cfg.name << " (" << cfg.experiment << ")\n";
      return 0;
    }
    if (*oracle) {
      std::cout << run_oracle(qmetric::io::read_json_file(problem)).dump(2) << "\n";
      return 0;
    }
  } catch (const qmetric::ValidationError& e) {
    std::cerr << "qmetric: " << e.errors().size() << " validation error(s)\n";
    for (const auto& m : e.errors()) std::cerr << "  " << m << "\n";
    return 2;
  } catch (const qmetric::Error& e) {
    std::cerr << "qmetric: " << e.what() << "\n";
    return status_for(e);
  } catch (const json::exception& e) {
    std::cerr << "qmetric: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "qmetric: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

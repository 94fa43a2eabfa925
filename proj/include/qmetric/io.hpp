#pragma once

// JSON exchange formats.
//
// Matrices: {"dim": n, "re": [[...]], "im": [[...]]} with an optional "kind"
// tag ("matrix", "hermitian", "state", "unitary"). Rectangular matrices use
// "rows"/"cols" instead of "dim". Readers also accept a few generators so
// scenario files stay short: {"identity": n}, {"diagonal": [...]},
// {"random_hermitian": {"seed", "dim", "scale"}}, {"random_unitary":
// {"seed", "dim"}}, {"pauli": "x"|"y"|"z"} and plain nested arrays of reals.

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qmetric/qmetrics.hpp"

namespace qmetric::io {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Matrices

inline json matrix_to_json(const CMatrix& m, const char* kind = "matrix") {
  json re = json::array(), im = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json rr = json::array(), ii = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      rr.push_back(m(i, j).real());
      ii.push_back(m(i, j).imag());
    }
    re.push_back(std::move(rr));
    im.push_back(std::move(ii));
  }
  json out;
  if (m.rows() == m.cols()) {
    out["dim"] = m.rows();
  } else {
    out["rows"] = m.rows();
    out["cols"] = m.cols();
  }
  out["kind"] = kind;
  out["re"] = std::move(re);
  out["im"] = std::move(im);
  return out;
}

namespace detail {

inline CMatrix pauli(const std::string& which) {
  CMatrix p(2, 2);
  if (which == "x") {
    p << 0, 1, 1, 0;
  } else if (which == "y") {
    p << 0, -kI, kI, 0;
  } else if (which == "z") {
    p << 1, 0, 0, -1;
  } else {
    fail(ErrorKind::InvalidInput, "unknown Pauli matrix '" + which + "'");
  }
  return p;
}

inline RMatrix real_grid(const json& j, const std::string& what) {
  require(j.is_array() && !j.empty(), ErrorKind::InvalidInput, what + ": expected a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  require(j[0].is_array(), ErrorKind::InvalidInput, what + ": rows must be arrays");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  RMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    require(row.is_array() && static_cast<Eigen::Index>(row.size()) == cols, ErrorKind::Shape, what + ": ragged rows");
    for (Eigen::Index k = 0; k < cols; ++k) {
      require(row[static_cast<std::size_t>(k)].is_number(), ErrorKind::InvalidInput, what + ": entries must be numbers");
      m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
    }
  }
  return m;
}

}  // namespace detail

inline CMatrix matrix_from_json(const json& j, const std::string& what = "matrix") {
  if (j.is_array()) return detail::real_grid(j, what).cast<cplx>();
  require(j.is_object(), ErrorKind::InvalidInput, what + ": expected a matrix object");
  if (j.contains("identity")) return identity_matrix(j.at("identity").get<int>());
  if (j.contains("diagonal")) return HermitianMatrix::diagonal(j.at("diagonal").get<std::vector<double>>()).matrix();
  if (j.contains("pauli")) return detail::pauli(j.at("pauli").get<std::string>());
  if (j.contains("random_hermitian")) {
    const json& p = j.at("random_hermitian");
    return random_hermitian(p.at("seed").get<std::uint64_t>(), p.at("dim").get<int>(), p.value("scale", 1.0)).matrix();
  }
  if (j.contains("random_unitary")) {
    const json& p = j.at("random_unitary");
    return random_unitary(p.at("seed").get<std::uint64_t>(), p.at("dim").get<int>()).matrix();
  }
  require(j.contains("re"), ErrorKind::InvalidInput, what + ": missing \"re\"");
  const RMatrix re = detail::real_grid(j.at("re"), what + ".re");
  RMatrix im = RMatrix::Zero(re.rows(), re.cols());
  if (j.contains("im")) im = detail::real_grid(j.at("im"), what + ".im");
  require(im.rows() == re.rows() && im.cols() == re.cols(), ErrorKind::Shape, what + ": re/im shape mismatch");
  if (j.contains("dim")) {
    const auto n = j.at("dim").get<Eigen::Index>();
    require(re.rows() == n && re.cols() == n, ErrorKind::Shape, what + ": \"dim\" does not match the entries");
  }
  CMatrix m(re.rows(), re.cols());
  m.real() = re;
  m.imag() = im;
  require(all_finite(m), ErrorKind::InvalidInput, what + ": non-finite entries");
  return m;
}

inline HermitianMatrix hermitian_from_json(const json& j, const std::string& what = "matrix") {
  const CMatrix m = matrix_from_json(j, what);
  require(m.rows() == m.cols(), ErrorKind::Shape, what + ": must be square");
  require(qmetric::detail::is_hermitian(m), ErrorKind::InvalidInput, what + ": must be Hermitian");
  return HermitianMatrix(m);
}

/// States: "maximally-mixed", "basis:k", {"pure": [re...], "pure_im": [...]},
/// {"random_state": {"seed"}} or a density matrix in the matrix format.
inline DensityState state_from_json(const json& j, int dim, const std::string& what = "state") {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "maximally-mixed") return DensityState::maximally_mixed(dim);
    if (s.rfind("basis:", 0) == 0) return DensityState::basis_state(dim, std::stoi(s.substr(6)));
    fail(ErrorKind::InvalidInput, what + ": unknown state shorthand '" + s + "'");
  }
  require(j.is_object(), ErrorKind::InvalidInput, what + ": expected a state");
  if (j.contains("pure")) {
    const auto re = j.at("pure").get<std::vector<double>>();
    const auto im = j.value("pure_im", std::vector<double>(re.size(), 0.0));
    require(static_cast<int>(re.size()) == dim && im.size() == re.size(), ErrorKind::Shape, what + ": vector length");
    CVector psi(dim);
    for (int k = 0; k < dim; ++k) psi(k) = cplx(re[static_cast<std::size_t>(k)], im[static_cast<std::size_t>(k)]);
    return DensityState::pure(psi);
  }
  if (j.contains("random_state")) return random_state(j.at("random_state").at("seed").get<std::uint64_t>(), dim);
  const CMatrix m = matrix_from_json(j, what);
  require(m.rows() == dim && m.cols() == dim, ErrorKind::Shape, what + ": dimension mismatch");
  return DensityState(m);
}

inline json state_to_json(const DensityState& s) { return matrix_to_json(s.matrix(), "state"); }

// ---------------------------------------------------------------------------
// Lip-norms

/// Resolver for {"ref": name} references inside Scaled specs.
using LipNormResolver = std::function<LipNormSpec(const std::string&)>;

inline std::vector<CMatrix> generators_from_json(const json& j) {
  if (j.is_object() && j.contains("clock_shift")) {
    const int n = j.at("clock_shift").get<int>();
    require(n >= 2, ErrorKind::InvalidInput, "generators: clock_shift needs n >= 2");
    CMatrix clock = CMatrix::Zero(n, n);
    for (int k = 0; k < n; ++k) clock(k, k) = static_cast<double>(k) - 0.5 * (n - 1);
    CMatrix f(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) f(a, b) = std::polar(1.0 / std::sqrt(n), 2.0 * std::numbers::pi * a * b / n);
    return {clock, f * clock * f.adjoint()};
  }
  require(j.is_array() && !j.empty(), ErrorKind::InvalidInput, "generators: expected a nonempty list");
  std::vector<CMatrix> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(matrix_from_json(j[k], "generators[" + std::to_string(k) + "]"));
  return out;
}

inline LipNormSpec lipnorm_from_json(const json& j, const LipNormResolver& resolve = {}) {
  if (j.is_string()) {
    require(static_cast<bool>(resolve), ErrorKind::InvalidInput, "lipnorm: bare name without a lipnorm table");
    return resolve(j.get<std::string>());
  }
  require(j.is_object() && j.contains("variant"), ErrorKind::InvalidInput, "lipnorm: missing \"variant\"");
  const std::string v = j.at("variant").get<std::string>();
  const int amp = j.value("amplification", 1);
  if (v == "DiracCommutator") return LipNormSpec::dirac(matrix_from_json(j.at("D"), "D"), amp);
  if (v == "Perturbed")
    return LipNormSpec::perturbed(matrix_from_json(j.at("D"), "D"), matrix_from_json(j.at("omega"), "omega"), amp);
  if (v == "Conformal") return LipNormSpec::conformal(matrix_from_json(j.at("D"), "D"), matrix_from_json(j.at("h"), "h"), amp);
  if (v == "Curved") {
    const CMatrix h = matrix_from_json(j.at("H"), "H");
    require(h.imag().norm() == 0.0, ErrorKind::InvalidInput, "Curved: H must be real");
    return LipNormSpec::curved(generators_from_json(j.at("generators")), h.real());
  }
  if (v == "Scaled") {
    const double lambda = j.at("lambda").get<double>();
    require(lambda > 0.0 && std::isfinite(lambda), ErrorKind::InvalidInput, "Scaled: lambda must be > 0");
    return LipNormSpec::scaled(lambda, lipnorm_from_json(j.at("inner"), resolve));
  }
  fail(ErrorKind::InvalidInput, "lipnorm: unknown variant '" + v + "'");
}

inline json lipnorm_to_json(const LipNormSpec& l) {
  json out;
  out["variant"] = l.variant_name();
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, DiracCommutator>) {
          out["D"] = matrix_to_json(s.dirac, "hermitian");
          out["amplification"] = s.amplification;
        } else if constexpr (std::is_same_v<T, Perturbed>) {
          out["D"] = matrix_to_json(s.dirac, "hermitian");
          out["omega"] = matrix_to_json(s.omega, "hermitian");
          out["amplification"] = s.amplification;
        } else if constexpr (std::is_same_v<T, Conformal>) {
          out["D"] = matrix_to_json(s.dirac, "hermitian");
          out["h"] = matrix_to_json(s.factor, "hermitian");
          out["amplification"] = s.amplification;
        } else if constexpr (std::is_same_v<T, Curved>) {
          json gens = json::array();
          for (const auto& x : s.generators) gens.push_back(matrix_to_json(x, "hermitian"));
          out["generators"] = std::move(gens);
          out["H"] = matrix_to_json(s.coefficients.template cast<cplx>());
        } else {
          out["lambda"] = s.lambda;
          out["inner"] = lipnorm_to_json(*s.inner);
        }
      },
      l.variant());
  return out;
}

// ---------------------------------------------------------------------------
// Reports and tables

inline json report_to_json(const MetricReport& r) {
  json out;
  out["value"] = r.value;
  out["kind"] = to_string(r.kind);
  out["lo"] = r.lo ? json(*r.lo) : json(nullptr);
  out["hi"] = r.hi ? json(*r.hi) : json(nullptr);
  out["flags"] = r.flags;
  out["provenance"] = r.provenance;
  return out;
}

/// Fixed-precision text for CSV cells.
inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string join_flags(const std::vector<std::string>& flags) {
  std::string out;
  for (std::size_t i = 0; i < flags.size(); ++i) out += (i ? ";" : "") + flags[i];
  return out;
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << csv_escape(columns[i]);
    os << "\n";
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_escape(row[i]);
      os << "\n";
    }
    return os.str();
  }
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorKind::Io, "cannot open '" + path + "' for writing");
  f << content;
  f.close();
  require(static_cast<bool>(f), ErrorKind::Io, "failed writing '" + path + "'");
}

inline json read_json_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorKind::Io, "cannot open '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::InvalidInput, "'" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace qmetric::io

#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "semicone/cones.hpp"
#include "semicone/fields.hpp"
#include "semicone/ornstein.hpp"
#include "semicone/tensor.hpp"

namespace semicone {

using nlohmann::json;

// 17 significant digits: enough to reproduce any double exactly on re-read
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
public:
  explicit CsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
  }
  void header(const std::vector<std::string>& cols) { row_strings(cols); }
  void row_strings(const std::vector<std::string>& cols) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i) out_ << ',';
      out_ << cols[i];
    }
    out_ << '\n';
  }
  void row(const std::vector<double>& vals) {
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (i) out_ << ',';
      out_ << fmt17(vals[i]);
    }
    out_ << '\n';
  }

private:
  std::ofstream out_;
};

// {n, k, dimY, entries: [[multi-index...], [values...]]} with every value
// rendered at 17 significant digits
inline std::string tensor_to_json_string(const SymTensor& t) {
  std::ostringstream os;
  os << "{\"n\":" << t.shape().n << ",\"k\":" << t.shape().k << ",\"dimY\":" << t.shape().dimY
     << ",\"entries\":[";
  for (int i = 0; i < t.entries(); ++i) {
    if (i) os << ',';
    os << "[[";
    const auto& idx = t.table().index(i);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      if (j) os << ',';
      os << idx[j] + 1;  // 1-based on the wire
    }
    os << "],[";
    for (int c = 0; c < t.shape().dimY; ++c) {
      if (c) os << ',';
      os << fmt17(t.coeffs()(i, c));
    }
    os << "]]";
  }
  os << "]}";
  return os.str();
}

inline SymTensor tensor_from_json(const json& j) {
  TensorShape shape{j.at("n").get<int>(), j.at("k").get<int>(), j.at("dimY").get<int>()};
  SymTensor t(shape);
  for (const auto& entry : j.at("entries")) {
    std::vector<int> idx;
    for (const auto& v : entry.at(0)) idx.push_back(v.get<int>() - 1);
    Eigen::VectorXd val(shape.dimY);
    for (int c = 0; c < shape.dimY; ++c) val[c] = entry.at(1).at(c).get<double>();
    t.set_coeff(idx, val);
  }
  return t;
}

inline json tensor_to_json(const SymTensor& t) { return json::parse(tensor_to_json_string(t)); }

// cone spec: {kind, params..., seed}
inline DirectionCone cone_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const std::uint64_t seed = j.value("seed", 1);
  if (kind == "symmetric_dyad") return DirectionCone::symmetric_dyad(j.at("n").get<int>(), seed);
  if (kind == "rank_one")
    return DirectionCone::rank_one_matrix(j.at("n").get<int>(), j.at("N").get<int>(), seed);
  if (kind == "higher_dyad")
    return DirectionCone::higher_dyad(
        TensorShape{j.at("n").get<int>(), j.at("k").get<int>(), j.at("dimY").get<int>()}, seed);
  if (kind == "eps_cone") {
    const auto& rows = j.at("xi0");
    const int n = static_cast<int>(rows.size());
    Eigen::MatrixXd xi0(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) xi0(r, c) = rows.at(r).at(c).get<double>();
    return DirectionCone::eps_cone(xi0, j.at("eps0").get<double>(), seed);
  }
  if (kind == "axes") return DirectionCone::axes(j.at("dim").get<int>(), seed);
  if (kind == "custom") {
    std::vector<Eigen::VectorXd> gens;
    for (const auto& g : j.at("generators")) {
      Eigen::VectorXd v(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) v[i] = g.at(i).get<double>();
      gens.push_back(v);
    }
    return DirectionCone::custom(gens, seed);
  }
  throw std::invalid_argument("cone_from_json: unknown kind " + kind);
}

inline json cone_to_json(const DirectionCone& c) {
  json j;
  j["kind"] = c.kind_name();
  j["seed"] = c.seed();
  j["n"] = c.shape().n;
  j["k"] = c.shape().k;
  j["dimY"] = c.shape().dimY;
  if (c.kind() == DirectionCone::Kind::EpsCone) j["eps0"] = c.eps0();
  return j;
}

inline Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
  json j = json::array();
  for (int i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

// named field registry used by the CLI
inline ScalarField field_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "frobenius") return fields::frobenius(j.at("dim").get<int>());
  if (kind == "nuclear_sym2") return fields::nuclear_sym2();
  if (kind == "spectral_sym2") return fields::spectral_sym2();
  if (kind == "spectral_2x2") return fields::spectral_mat2();
  if (kind == "det_augmented") return fields::det_augmented_sym2(j.at("beta").get<double>());
  if (kind == "norm_plus_linear") return fields::norm_plus_linear(vector_from_json(j.at("slope")));
  if (kind == "l1_minus_min")
    return fields::l1_minus_min(j.at("dim").get<int>(), j.at("beta").get<double>());
  if (kind == "fc_classical") return fields::fc_classical(j.at("c").get<double>());
  if (kind == "neg_det_sym2") return fields::neg_det_sym2();
  if (kind == "neg_sqnorm") return fields::neg_sqnorm(j.at("dim").get<int>());
  if (kind == "two_well") return fields::two_well(vector_from_json(j.at("P")));
  if (kind == "sqrt1p") return fields::sqrt_one_plus_sq(j.at("dim").get<int>());
  if (kind == "linear") return fields::linear(vector_from_json(j.at("slope")));
  if (kind == "weighted_max_abs")
    return fields::weighted_max_abs(vector_from_json(j.at("weights")));
  throw std::invalid_argument("field_from_json: unknown kind " + kind);
}

inline OperatorFamily operator_from_json(const json& j) {
  OperatorFamily op;
  op.k = j.at("k").get<int>();
  op.n = j.at("n").get<int>();
  op.dimV = j.value("V", 1);
  op.dimW = j.at("W").get<int>();
  auto parse_terms = [&](const json& terms) {
    std::vector<OperatorTerm> out;
    for (const auto& t : terms) {
      OperatorTerm term;
      for (const auto& a : t.at("alpha")) term.alpha.push_back(a.get<int>());
      const auto& m = t.at("matrix");
      term.coef = Eigen::MatrixXd(op.dimW, op.dimV);
      for (int r = 0; r < op.dimW; ++r)
        for (int c = 0; c < op.dimV; ++c) term.coef(r, c) = m.at(r).at(c).get<double>();
      out.push_back(std::move(term));
    }
    return out;
  };
  if (j.contains("pieces")) {
    for (const auto& p : j.at("pieces")) {
      OperatorPiece piece;
      Box b;
      b.lo = vector_from_json(p.at("box").at("lo"));
      b.hi = vector_from_json(p.at("box").at("hi"));
      piece.box = b;
      piece.terms = parse_terms(p.at("terms"));
      op.pieces.push_back(std::move(piece));
    }
  } else {
    OperatorPiece piece;
    piece.terms = parse_terms(j.at("terms"));
    op.pieces.push_back(std::move(piece));
  }
  op.validate();
  return op;
}

inline json laminate_tree_to_json(const LaminateTree& t) {
  json j;
  j["point"] = vector_to_json(t.point);
  j["weight"] = t.weight;
  j["value"] = t.value;
  if (t.split) {
    j["split"] = {{"dir", vector_to_json(t.split->dir)},
                  {"t_plus", t.split->t_plus},
                  {"t_minus", t.split->t_minus},
                  {"lambda", t.split->lambda}};
    j["children"] = json::array();
    for (const auto& c : t.children) j["children"].push_back(laminate_tree_to_json(*c));
  }
  return j;
}

}  // namespace semicone

#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "semicone/dconvexity.hpp"
#include "semicone/json_io.hpp"
#include "semicone/ornstein.hpp"
#include "semicone/relaxation.hpp"
#include "semicone/subdifferential.hpp"
#include "semicone/version.hpp"

namespace semicone {
namespace cli {

namespace fs = std::filesystem;

struct ExperimentConfig {
  std::string command;
  json params;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
};

inline void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline void write_json_file(const fs::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

// every run leaves a manifest: config echo, version, wall time
class RunScope {
public:
  RunScope(const ExperimentConfig& cfg) : cfg_(cfg), start_(std::chrono::steady_clock::now()) {
    fs::create_directories(cfg.output_dir);
  }
  ~RunScope() {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json m;
    m["command"] = cfg_.command;
    m["params"] = cfg_.params;
    m["seed"] = cfg_.seed;
    m["version"] = kVersion;
    m["wall_time_seconds"] = secs;
    try {
      write_json_file(fs::path(cfg_.output_dir) / "manifest.json", m);
    } catch (...) {
    }
  }

private:
  ExperimentConfig cfg_;
  std::chrono::steady_clock::time_point start_;
};

inline Box box_from_json(const json& j) {
  Box b;
  b.lo = vector_from_json(j.at("lo"));
  b.hi = vector_from_json(j.at("hi"));
  return b;
}

inline int run_check_dconvex(const ExperimentConfig& cfg) {
  const auto& p = cfg.params;
  ScalarField f = field_from_json(p.at("field"));
  DirectionCone cone = cone_from_json(p.at("cone"));
  Box region = box_from_json(p.at("region"));
  const int n_segments = p.value("n_segments", 200);
  const int n_points = p.value("n_points", 17);
  CsvWriter csv((fs::path(cfg.output_dir) / "profiles.csv").string());
  csv.header({"segment", "t", "f"});
  auto rep = check_dconvex(f, cone, region, n_segments, n_points, cfg.seed,
                           [&csv](int s, double t, double v) {
                             csv.row({static_cast<double>(s), t, v});
                           });
  json out;
  out["samples_tested"] = rep.samples_tested;
  out["worst_violation"] = rep.worst_violation;
  out["neg_infinity_seen"] = rep.neg_infinity_seen;
  if (rep.witness) {
    out["witness"] = {{"x", vector_to_json(rep.witness->x)},
                      {"y", vector_to_json(rep.witness->y)},
                      {"direction", vector_to_json(rep.witness->direction)}};
  }
  write_json_file(fs::path(cfg.output_dir) / "report.json", out);
  return rep.witness ? 2 : 0;
}

inline int run_subgradient(const ExperimentConfig& cfg) {
  const auto& p = cfg.params;
  ScalarField f = field_from_json(p.at("field"));
  DirectionCone cone = cone_from_json(p.at("cone"));
  Eigen::VectorXd x0 = vector_from_json(p.at("x0"));
  SubgradientOptions opts;
  opts.n_verify = p.value("samples", 100000);
  opts.seed = cfg.seed;
  json out;
  int code = 0;
  try {
    SupportCertificate cert = subgradient_at(f, cone, x0, opts);
    out["x0"] = vector_to_json(cert.x0);
    out["ell"] = vector_to_json(cert.ell);
    out["touch_residual"] = cert.touch_residual;
    out["min_slack"] = cert.min_slack;
    out["n_samples"] = cert.n_samples;
    out["certified"] = true;
    // slack distribution dump
    CsvWriter csv((fs::path(cfg.output_dir) / "slack.csv").string());
    csv.header({"sample", "slack"});
    CounterRng rng(cfg.seed + 1);
    const long dump = std::min<long>(opts.n_verify, 20000);
    for (long i = 0; i < dump; ++i) {
      Eigen::VectorXd y = rng.on_sphere(f.dim);
      csv.row({static_cast<double>(i), f(y) - cert.ell.dot(y)});
    }
  } catch (const CertificateError& e) {
    out["certified"] = false;
    out["reason"] = e.what();
    out["witness"] = vector_to_json(e.witness);
    out["slack"] = e.slack;
    code = 2;
  }
  write_json_file(fs::path(cfg.output_dir) / "certificate.json", out);
  return code;
}

inline int run_laminate_gen(const ExperimentConfig& cfg) {
  const auto& p = cfg.params;
  SymTensor xi = tensor_from_json(p.at("xi"));
  SymTensor eta = tensor_from_json(p.at("eta"));
  const double lambda = p.at("lambda").get<double>();
  const double eps = p.at("eps").get<double>();
  Box omega = p.contains("omega") ? box_from_json(p.at("omega")) : Box::unit(xi.shape().n);
  const int grid = p.value("grid", 512);
  BuildOscillationOptions opts;
  opts.verify_grid = p.value("verify_grid", 256);
  OscillationResult osc = build_oscillation(xi, eta, lambda, eps, omega, opts);
  SplitReport rep = verify_split(osc.map, xi, eta, lambda, eps, grid);

  json out;
  out["b"] = vector_to_json(osc.map.b);
  out["a"] = vector_to_json(osc.map.a);
  out["j"] = osc.map.j;
  out["j_analytic"] = osc.j_analytic;
  out["tail_bound"] = osc.tail_bound;
  out["profile"] = {{"lambda", osc.map.profile.lambda},
                    {"width", osc.map.profile.width},
                    {"h1_sup", osc.map.profile.h1_sup}};
  out["verify"] = {{"sup_dist", rep.sup_dist},      {"sup_lower", rep.sup_lower},
                   {"vol_xi", rep.vol_xi},          {"vol_eta", rep.vol_eta},
                   {"vol_err", rep.vol_err},        {"exactness", rep.exactness},
                   {"cond_i", rep.cond_i},          {"cond_ii", rep.cond_ii},
                   {"cond_iii", rep.cond_iii},      {"grid", rep.grid}};
  write_json_file(fs::path(cfg.output_dir) / "testmap.json", out);

  // plot-ready samples on a coarse grid: position, phi, selected jet entries
  const int sg = p.value("sample_grid", 64);
  CsvWriter csv((fs::path(cfg.output_dir) / "samples.csv").string());
  std::vector<std::string> cols = {"x", "y", "phi0", "dk_first", "dk_last"};
  csv.header(cols);
  const int n = omega.dim();
  Eigen::VectorXd x(n), dk(xi.to_coords().size());
  TestMap::Jet jt;
  for (int i = 0; i < sg; ++i)
    for (int q = 0; q < sg; ++q) {
      x[0] = omega.lo[0] + (omega.hi[0] - omega.lo[0]) * (i + 0.5) / sg;
      x[1] = omega.lo[1] + (omega.hi[1] - omega.lo[1]) * (q + 0.5) / sg;
      for (int r = 2; r < n; ++r) x[r] = 0.5 * (omega.lo[r] + omega.hi[r]);
      osc.map.jet(x, jt);
      osc.map.dk_total_coords(jt, dk);
      csv.row({x[0], x[1], osc.map.phi(x)[0], dk[0], dk[dk.size() - 1]});
    }
  return rep.pass(eps) ? 0 : 2;
}

inline int run_envelope(const ExperimentConfig& cfg) {
  const auto& p = cfg.params;
  ScalarField f = field_from_json(p.at("field"));
  DirectionCone cone = cone_from_json(p.at("cone"));
  const double radius = p.value("radius", 2.0);
  const double spacing = p.value("spacing", 0.125);
  EnvelopeOptions opts;
  opts.max_sweeps = p.value("sweeps", 12);
  opts.tol = p.value("tol", 1e-3);
  opts.dirs = p.value("dirs", 32);
  opts.reach = p.value("reach", 8);
  EnvelopeResult res = envelope(f, cone, Box::centered(f.dim, radius), spacing, opts);

  CsvWriter grid_csv((fs::path(cfg.output_dir) / "grid.csv").string());
  {
    std::vector<std::string> cols;
    for (int i = 0; i < f.dim; ++i) cols.push_back("x" + std::to_string(i));
    cols.push_back("value");
    cols.push_back("neg_inf");
    grid_csv.header(cols);
    Eigen::VectorXd x(f.dim);
    for (long fl = 0; fl < res.grid.size(); ++fl) {
      res.grid.node_coord(fl, x);
      std::vector<double> row(x.data(), x.data() + x.size());
      const double v = res.grid.values[fl];
      row.push_back(v == kNegInf ? 0.0 : v);
      row.push_back(v == kNegInf ? 1.0 : 0.0);
      grid_csv.row(row);
    }
  }
  CsvWriter trace_csv((fs::path(cfg.output_dir) / "trace.csv").string());
  trace_csv.header({"sweep", "max_decrease"});
  for (std::size_t i = 0; i < res.trace.size(); ++i)
    trace_csv.row({static_cast<double>(i), res.trace[i]});

  json out;
  out["sweeps"] = res.sweeps;
  out["diverged"] = res.diverged;
  out["interp_bound"] = res.interp_bound;
  if (p.contains("queries")) {
    out["trees"] = json::array();
    for (const auto& q : p.at("queries")) {
      Eigen::VectorXd point = vector_from_json(q);
      auto tree = extract_laminate(res.grid, f, res.dirs, opts.reach, point, opts.tol, 8);
      out["trees"].push_back(laminate_tree_to_json(*tree));
    }
  }
  write_json_file(fs::path(cfg.output_dir) / "envelope.json", out);
  return 0;
}

inline int run_ornstein_check(const ExperimentConfig& cfg) {
  const auto& p = cfg.params;
  OperatorFamily a1 = operator_from_json(p.at("a1"));
  OperatorFamily a2 = operator_from_json(p.at("a2"));
  FactorizeResult fr = factorize(a1, a2);
  json out;
  out["threshold"] = fr.threshold;
  out["factorizable"] = fr.factorizable;
  out["max_norm"] = fr.max_norm;
  out["pieces"] = json::array();
  for (const auto& piece : fr.pieces) {
    json jp;
    jp["kernel_included"] = piece.kernel_included;
    if (piece.C) {
      json rows = json::array();
      for (int r = 0; r < piece.C->rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < piece.C->cols(); ++c) row.push_back((*piece.C)(r, c));
        rows.push_back(row);
      }
      jp["C"] = rows;
      jp["norm"] = piece.norm_C;
      jp["column_residual"] = piece.column_residual;
    }
    if (piece.kernel_witness) jp["kernel_witness"] = vector_to_json(*piece.kernel_witness);
    out["pieces"].push_back(jp);
  }
  int code = 0;
  if (p.contains("c")) {
    const double c = p.at("c").get<double>();
    out["c"] = c;
    out["holds"] = fr.holds_with(c);
    code = fr.holds_with(c) ? 0 : 2;
  } else {
    code = fr.factorizable ? 0 : 2;
  }
  write_json_file(fs::path(cfg.output_dir) / "verdict.json", out);
  return code;
}

inline OperatorFamily classical_a1() {
  return make_scalar_operator(2, 2, {{2, 0}, {0, 2}}, {{1, 0}, {0, 1}});
}
inline OperatorFamily classical_a2() {
  return make_scalar_operator(2, 2, {{1, 1}}, {{1}});
}

inline int run_ornstein_blowup(const ExperimentConfig& cfg) {
  const auto& p = cfg.params;
  OperatorFamily a1 = p.contains("a1") ? operator_from_json(p.at("a1")) : classical_a1();
  OperatorFamily a2 = p.contains("a2") ? operator_from_json(p.at("a2")) : classical_a2();
  const double c = p.at("c").get<double>();
  const int depth = p.value("depth", 3);
  BlowupOptions opts;
  opts.measure_grid = p.value("grid", 1024);
  opts.eps = p.value("eps", 0.05);
  BlowupResult res = blowup_sequence(a1, a2, c, depth, opts);
  json out;
  out["verdict"] = res.verdict;
  out["found"] = res.found;
  out["envelope_at_zero"] = res.envelope_at_zero;
  out["depth"] = res.depth;
  out["best_ratio"] = res.best_ratio;
  if (res.tree) out["tree"] = laminate_tree_to_json(*res.tree);
  if (res.oscillation) {
    out["map"] = {{"b", vector_to_json(res.oscillation->map.b)},
                  {"a", vector_to_json(res.oscillation->map.a)},
                  {"j", res.oscillation->map.j}};
  }
  write_json_file(fs::path(cfg.output_dir) / "blowup.json", out);
  CsvWriter csv((fs::path(cfg.output_dir) / "ratios.csv").string());
  csv.header({"copy", "numerator", "denominator", "ratio"});
  for (std::size_t i = 0; i < res.ratios.size(); ++i)
    csv.row({static_cast<double>(i), res.ratios[i].numerator, res.ratios[i].denominator,
             res.ratios[i].ratio});
  return res.found ? 2 : 0;
}

inline int run_hessian_demo(const ExperimentConfig& cfg) {
  const auto& p = cfg.params;
  // quadratic forms on symmetric 2x2 matrices: the base space is R^3, the
  // forms live in jets of shape (3, 2, 1)
  const TensorShape shape{3, 2, 1};
  SymTensor mu0 = dyad_to_tensor(Dyad{1.0, Eigen::VectorXd::Ones(1),
                                      (Eigen::VectorXd(3) << 1, 0, 1).finished(), 2});
  SymTensor dten(shape);
  dten.set_coeff({0, 2}, Eigen::VectorXd::Ones(1));
  dten.set_coeff({1, 1}, -Eigen::VectorXd::Ones(1));
  const Eigen::VectorXd mu0c = mu0.to_coords();
  const Eigen::VectorXd dc = dten.to_coords();
  ScalarField F = make_field(static_cast<int>(mu0c.size()), "neg_norm",
                             [](const Eigen::VectorXd& v) { return -v.norm(); }, true);
  // directions of the base space: dyad coordinates in sym 2x2 (ambient R^3)
  DirectionCone base_cone = DirectionCone::symmetric_dyad(2, cfg.seed);
  auto samples = base_cone.sample_unit(256);
  auto in_cone = [&](const Eigen::VectorXd& mu) {
    SymTensor q = SymTensor::from_coords(shape, mu);
    for (const auto& e : samples) {
      std::vector<Eigen::VectorXd> args(2, e);
      if (q.eval(args)[0] <= 0.0) return false;
    }
    return true;
  };
  json out;
  out["norm_d"] = dten.norm();
  out["witnesses"] = json::array();
  std::vector<double> Ms = {-10.0, -1000.0, -1000000.0};
  if (p.contains("M")) {
    Ms.clear();
    for (const auto& m : p.at("M")) Ms.push_back(m.get<double>());
  }
  for (double M : Ms) {
    auto w = certify_unbounded(F, shape, mu0c, dc, M, in_cone);
    out["witnesses"].push_back({{"M", M}, {"t_star", w.t_star}, {"value", w.value}});
  }
  write_json_file(fs::path(cfg.output_dir) / "hessian_demo.json", out);
  return 0;
}

inline int run_recession(const ExperimentConfig& cfg) {
  const auto& p = cfg.params;
  ScalarField f = field_from_json(p.at("field"));
  Eigen::VectorXd x = vector_from_json(p.at("x"));
  const double t_max = p.value("t_max", 1e8);
  const int levels = p.value("levels", 8);
  RecessionResult r = recession(f, x, t_max, levels);
  json out;
  out["value"] = r.value;
  out["converged"] = r.converged;
  out["ladder"] = json::array();
  for (const auto& [t, v] : r.ladder) out["ladder"].push_back({{"t", t}, {"v", v}});
  write_json_file(fs::path(cfg.output_dir) / "recession.json", out);
  return 0;
}

inline int run(const ExperimentConfig& cfg) {
  RunScope scope(cfg);
  if (cfg.command == "check-dconvex") return run_check_dconvex(cfg);
  if (cfg.command == "subgradient") return run_subgradient(cfg);
  if (cfg.command == "laminate-gen") return run_laminate_gen(cfg);
  if (cfg.command == "envelope") return run_envelope(cfg);
  if (cfg.command == "ornstein-check") return run_ornstein_check(cfg);
  if (cfg.command == "ornstein-blowup") return run_ornstein_blowup(cfg);
  if (cfg.command == "hessian-demo") return run_hessian_demo(cfg);
  if (cfg.command == "recession") return run_recession(cfg);
  throw std::invalid_argument("unknown command " + cfg.command);
}

// small canned configurations shared by the smoke and figure suites
inline std::vector<ExperimentConfig> suite_configs(const std::string& name,
                                                   const std::string& out_root) {
  const bool figures = name == "paper-figures";
  if (!figures && name != "smoke") throw std::invalid_argument("unknown suite " + name);
  std::vector<ExperimentConfig> cfgs;
  auto out = [&](const std::string& leaf) { return out_root + "/" + leaf; };

  ExperimentConfig c1;
  c1.command = "check-dconvex";
  c1.params = {{"field", {{"kind", "frobenius"}, {"dim", 3}}},
               {"cone", {{"kind", "symmetric_dyad"}, {"n", 2}, {"seed", 7}}},
               {"region", {{"lo", {-2, -2, -2}}, {"hi", {2, 2, 2}}}},
               {"n_segments", figures ? 400 : 40},
               {"n_points", 17}};
  c1.seed = 5;
  c1.output_dir = out("check-dconvex");
  cfgs.push_back(c1);

  ExperimentConfig c2;
  c2.command = "subgradient";
  c2.params = {{"field", {{"kind", "frobenius"}, {"dim", 3}}},
               {"cone", {{"kind", "symmetric_dyad"}, {"n", 2}, {"seed", 7}}},
               {"x0", {1.0, 0.0, 0.0}},
               {"samples", figures ? 100000 : 5000}};
  c2.seed = 5;
  c2.output_dir = out("subgradient");
  cfgs.push_back(c2);

  ExperimentConfig c3;
  c3.command = "laminate-gen";
  {
    Dyad d{0.5, Eigen::VectorXd::Ones(1),
           (Eigen::VectorXd(2) << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0)).finished(), 2};
    SymTensor xi = dyad_to_tensor(d);
    SymTensor eta = -1.0 * dyad_to_tensor(d);
    c3.params = {{"xi", tensor_to_json(xi)},
                 {"eta", tensor_to_json(eta)},
                 {"lambda", 0.5},
                 {"eps", figures ? 0.1 : 0.2},
                 {"grid", figures ? 1024 : 256},
                 {"verify_grid", figures ? 512 : 128},
                 {"sample_grid", 64}};
  }
  c3.seed = 5;
  c3.output_dir = out("laminate-gen");
  cfgs.push_back(c3);

  ExperimentConfig c4;
  c4.command = "envelope";
  c4.params = {{"field", {{"kind", "fc_classical"}, {"c", 0.4}}},
               {"cone", {{"kind", "symmetric_dyad"}, {"n", 2}, {"seed", 11}}},
               {"radius", 2.0},
               {"spacing", figures ? 0.1 : 0.25},
               {"sweeps", 1},
               {"dirs", figures ? 64 : 24},
               {"reach", figures ? 20 : 8},
               {"queries", {{0.0, 0.0, 0.0}}}};
  c4.seed = 5;
  c4.output_dir = out("envelope");
  cfgs.push_back(c4);

  ExperimentConfig c5;
  c5.command = "ornstein-check";
  c5.params = {{"a1",
                {{"k", 2}, {"n", 2}, {"W", 2},
                 {"terms",
                  {{{"alpha", {2, 0}}, {"matrix", {{1.0}, {0.0}}}},
                   {{"alpha", {0, 2}}, {"matrix", {{0.0}, {1.0}}}}}}}},
               {"a2",
                {{"k", 2}, {"n", 2}, {"W", 1},
                 {"terms", {{{"alpha", {1, 1}}, {"matrix", {{1.0}}}}}}}},
               {"c", 0.4}};
  c5.seed = 5;
  c5.output_dir = out("ornstein-check");
  cfgs.push_back(c5);

  ExperimentConfig c6;
  c6.command = "ornstein-blowup";
  c6.params = {{"c", 0.4}, {"depth", 2}, {"grid", figures ? 2048 : 256},
               {"eps", figures ? 0.05 : 0.2}};
  c6.seed = 5;
  c6.output_dir = out("ornstein-blowup");
  cfgs.push_back(c6);

  ExperimentConfig c7;
  c7.command = "hessian-demo";
  c7.params = {{"M", {-10.0, -1000.0}}};
  c7.seed = 5;
  c7.output_dir = out("hessian-demo");
  cfgs.push_back(c7);

  ExperimentConfig c8;
  c8.command = "recession";
  c8.params = {{"field", {{"kind", "sqrt1p"}, {"dim", 3}}},
               {"x", {1.0, 0.0, 0.0}},
               {"t_max", 1e8},
               {"levels", 8}};
  c8.seed = 5;
  c8.output_dir = out("recession");
  cfgs.push_back(c8);

  return cfgs;
}

// "smoke": every command once at tiny sizes.  "paper-figures": regenerates
// the acceptance artifacts at reporting sizes.  Any sub-run failure fails
// the batch (negative mathematical verdicts are expected and pass).
inline int builtin_suite(const std::string& name, const std::string& out_root) {
  auto cfgs = suite_configs(name, out_root);
  for (const auto& cfg : cfgs) {
    const int code = run(cfg);
    if (code == 1) return 1;
  }
  return 0;
}

}  // namespace cli
}  // namespace semicone

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "semicone/cli.hpp"
#include "semicone/parallel.hpp"

namespace {

semicone::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return semicone::json::parse(in);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semicone: directional-convexity analysis on tensor spaces"};
  app.require_subcommand(1);

  int threads = 0;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  app.add_option("--threads", threads, "worker cap (env SEMICONE_THREADS as fallback)");
  app.add_option("--seed", seed, "experiment seed");
  app.add_option("--out", out_dir, "output directory");

  std::string config_path;
  std::string f_spec, cone_spec, x0_json, a1_path, a2_path;
  double c_value = -1.0;
  int depth = 3;
  std::string suite_name;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file")->required();
  };
  add_config(app.add_subcommand("check-dconvex", "directional convexity audit"));
  add_config(app.add_subcommand("laminate-gen", "oscillating test-map construction"));
  add_config(app.add_subcommand("envelope", "lamination envelope on a grid"));
  add_config(app.add_subcommand("hessian-demo", "unbounded-relaxation witness"));
  add_config(app.add_subcommand("recession", "radial recession function"));

  auto* sub = app.add_subcommand("subgradient", "supporting functional certificate");
  sub->add_option("--f", f_spec, "field spec (JSON string or @file)")->required();
  sub->add_option("--cone", cone_spec, "cone spec (JSON string or @file)")->required();
  sub->add_option("--x0", x0_json, "base point as a JSON array")->required();

  auto* och = app.add_subcommand("ornstein-check", "L1 domination factorization check");
  och->add_option("--a1", a1_path, "dominating operator JSON file")->required();
  och->add_option("--a2", a2_path, "dominated operator JSON file")->required();
  och->add_option("--c", c_value, "constant to test");

  auto* obl = app.add_subcommand("ornstein-blowup", "blow-up sequence synthesis");
  obl->add_option("--c", c_value, "constant to defeat")->required();
  obl->add_option("--depth", depth, "laminate search depth");
  obl->add_option("--a1", a1_path, "dominating operator JSON (default: classical pair)");
  obl->add_option("--a2", a2_path, "dominated operator JSON");

  auto* ste = app.add_subcommand("suite", "canned batches: smoke | paper-figures");
  ste->add_option("name", suite_name, "suite name")->required();

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) semicone::set_thread_cap(threads);

  auto parse_inline = [&](const std::string& s) {
    if (!s.empty() && s[0] == '@') return load_json(s.substr(1));
    return semicone::json::parse(s);
  };

  try {
    semicone::cli::ExperimentConfig cfg;
    cfg.seed = seed;
    cfg.output_dir = out_dir;
    for (auto* cmd : app.get_subcommands()) {
      cfg.command = cmd->get_name();
      if (cfg.command == "suite") return semicone::cli::builtin_suite(suite_name, out_dir);
      if (!config_path.empty() && cfg.command != "subgradient" &&
          cfg.command != "ornstein-check" && cfg.command != "ornstein-blowup") {
        cfg.params = load_json(config_path);
      } else if (cfg.command == "subgradient") {
        cfg.params["field"] = parse_inline(f_spec);
        cfg.params["cone"] = parse_inline(cone_spec);
        cfg.params["x0"] = semicone::json::parse(x0_json);
      } else if (cfg.command == "ornstein-check") {
        cfg.params["a1"] = load_json(a1_path);
        cfg.params["a2"] = load_json(a2_path);
        if (och->count("--c")) cfg.params["c"] = c_value;
      } else if (cfg.command == "ornstein-blowup") {
        cfg.params["c"] = c_value;
        cfg.params["depth"] = depth;
        if (!a1_path.empty()) cfg.params["a1"] = load_json(a1_path);
        if (!a2_path.empty()) cfg.params["a2"] = load_json(a2_path);
      }
      return semicone::cli::run(cfg);
    }
    std::cerr << "{\"error\":\"no subcommand\"}" << std::endl;
    return 1;
  } catch (const std::exception& e) {
    semicone::json err;
    err["error"] = e.what();
    std::cerr << err.dump() << std::endl;
    return 1;
  }
}

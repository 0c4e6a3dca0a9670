#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "jetquant/suites.hpp"

#ifndef JQ_CONFIG_DIR
#define JQ_CONFIG_DIR "configs"
#endif

using namespace jq;

namespace {

const std::map<std::string, std::vector<std::string>>& groups() {
  static const std::map<std::string, std::vector<std::string>> g = {
      {"star", {"moyal", "poisson"}}, {"weil", {"gaussian", "weil"}},    {"maslov", {"maslov"}},
      {"geometry", {"geometry", "stack"}}, {"module", {"module"}}, {"compare", {"compare"}},
      {"all", suite_names()}};
  return g;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

bool needs_inputs(const std::vector<std::string>& suites) {
  for (const auto& s : suites)
    if (s == "geometry" || s == "module" || s == "compare") return true;
  return false;
}

std::string line(const CheckRecord& c) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", c.residual);
  return std::string("[") + status_name(c.status) + "] " + c.suite + "/" + c.id + " residual " + buf +
         (c.location.empty() ? "" : " at " + c.location);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Truncated formal jet quantization: verification suites"};
  app.require_subcommand(1);
  app.fallthrough();

  int cap = 0, jet_order = 6, workers = 4;
  double tol = 1e-8;
  std::uint64_t seed = 1;
  std::string report, suite_list, config_path;
  std::vector<std::string> inputs;
  app.add_option("--cap", cap, "formal cap N (default per suite)")->check(CLI::Range(2, 64));
  app.add_option("--jet-order", jet_order, "base-jet order M")->check(CLI::Range(2, 64));
  app.add_option("--tol", tol, "tolerance")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "random seed");
  app.add_option("--report", report, "write the JSON report here instead of stdout");
  app.add_option("--suite", suite_list, "comma-separated suites to run");
  app.add_option("--config", config_path, "run config JSON");
  app.add_option("--workers", workers, "parallel suites")->check(CLI::Range(1, 64));
  for (const auto& [name, suites] : groups()) {
    std::string desc;
    for (const auto& s : suites) desc += (desc.empty() ? "" : ", ") + s;
    app.add_subcommand(name, "run " + desc)->add_option("inputs", inputs, "Lagrangian or atlas configs");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  RunConfig cfg;
  SuiteInputs in;
  try {
    if (!config_path.empty()) {
      try {
        cfg = RunConfig::from_json(read_json_file(config_path));
      } catch (const ConfigError& e) {
        if (e.pointer.empty() || e.pointer.rfind(config_path, 0) == 0) throw;
        throw ConfigError(config_path + "#" + e.pointer, e.detail);
      }
    }
    if (app.count("--cap")) cfg.cap = cap;
    if (app.count("--jet-order") || config_path.empty()) cfg.jet_order = jet_order;
    if (app.count("--tol") || config_path.empty()) cfg.tol = tol;
    if (app.count("--seed") || config_path.empty()) cfg.seed = seed;
    if (app.count("--workers") || config_path.empty()) cfg.workers = workers;
    if (app.count("--report")) cfg.report = report;
    if (!inputs.empty()) cfg.inputs = inputs;

    const auto& group = groups().at(cmd);
    std::vector<std::string> chosen = group;
    if (app.count("--suite")) {
      chosen.clear();
      for (const auto& s : split(suite_list)) {
        if (!is_suite(s)) throw ConfigError("--suite", "unknown suite " + s);
        if (std::find(group.begin(), group.end(), s) == group.end())
          throw ConfigError("--suite", s + " is not part of " + cmd);
        chosen.push_back(s);
      }
    } else if (!config_path.empty() && cmd == "all" && !cfg.suites.empty()) {
      chosen = cfg.suites;
    }
    cfg.suites = chosen;
    if (cfg.inputs.empty() && needs_inputs(cfg.suites)) cfg.inputs = bundled_configs(JQ_CONFIG_DIR);
    cfg.validate();
    in = load_inputs(cfg.inputs, cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  Report rep = run_verification(cfg, in);
  const std::string text = rep.to_json().dump(2) + "\n";
  if (cfg.report.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(cfg.report);
    if (!(out << text)) {
      std::cerr << "cannot write " << cfg.report << "\n";
      return 2;
    }
  }
  auto& log = cfg.report.empty() ? std::cerr : std::cout;
  for (const auto& c : rep.checks) log << line(c) << "\n";
  return rep.passed() ? 0 : 1;
}

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "jetquant/suites.hpp"

#ifndef JQ_CONFIG_DIR
#define JQ_CONFIG_DIR "configs"
#endif

using namespace jq;

namespace {

struct Criterion {
  int number;
  std::string title;
  std::vector<std::string> suites;
  std::vector<std::string> inputs;
  double budget_s;  // 0: none
  std::function<void(const Report&)> extra;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string cplx_str(const json& j) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g%+.15gi", j[0].get<double>(), j[1].get<double>());
  return buf;
}

void gaussian_lines(const Report& rep) {
  for (const auto& c : rep.checks) {
    if (c.id.rfind("branch", 0) != 0) continue;
    std::cout << "    " << c.location << ": 1/sqrt(ik) as displayed " << cplx_str(c.detail["displayed_formula"])
              << ", engine " << cplx_str(c.detail["engine"]) << "\n";
  }
}

}  // namespace

int main() {
  const std::string dir = JQ_CONFIG_DIR;
  auto cfgs = [&](std::vector<std::string> names) {
    for (auto& n : names) n = dir + "/" + n + ".json";
    return names;
  };
  const auto lagrangians = cfgs({"zero_section", "line_k1", "line_km1", "line_k2", "mixed_n2"});

  const std::vector<Criterion> criteria = {
      {1, "Moyal associativity", {"moyal"}, {}, 10, nullptr},
      {2, "Poisson leading term", {"poisson"}, {}, 0, nullptr},
      {3, "Gaussian rule", {"gaussian"}, {}, 0, gaussian_lines},
      {4, "Weil composition", {"weil"}, {}, 0, nullptr},
      {5, "Maslov cocycles", {"maslov"}, {}, 0, nullptr},
      {6, "cotangent-Weyl bundle", {"geometry"}, cfgs({"mobius_atlas"}), 30, nullptr},
      {7, "module suite", {"module"}, lagrangians, 0, nullptr},
      {8, "comparison with the zero section", {"compare"}, cfgs({"line_k1", "line_km1", "line_k2", "mixed_n2"}), 60,
       nullptr},
      {9, "stack identities", {"stack"}, {}, 0, nullptr},
  };

  bool all = true;
  for (const auto& c : criteria) {
    RunConfig cfg;
    cfg.suites = c.suites;
    cfg.inputs = c.inputs;
    cfg.workers = 1;
    Report rep;
    bool ok = true;
    std::string why;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      rep = run_verification(cfg, load_inputs(cfg.inputs, cfg));
    } catch (const Error& e) {
      ok = false;
      why = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    double worst = 0;
    int failed = 0;
    for (const auto& r : rep.checks) {
      worst = std::max(worst, r.residual);
      if (r.status != Status::Pass) {
        ++failed;
        if (why.empty()) why = r.suite + "/" + r.id + " at " + r.location;
      }
    }
    if (rep.checks.empty() && why.empty()) why = "no checks ran";
    ok = ok && failed == 0 && !rep.checks.empty();
    if (c.budget_s > 0 && secs >= c.budget_s) {
      ok = false;
      why = "runtime " + fmt(secs) + " s over " + fmt(c.budget_s) + " s";
    }
    all = all && ok;

    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << c.number << " (" << c.title << "): " << rep.checks.size()
              << " checks, max residual " << fmt(worst) << ", " << fmt(secs) << " s"
              << (c.budget_s > 0 ? " (limit " + fmt(c.budget_s) + " s)" : "") << (why.empty() ? "" : "; " + why)
              << "\n";
    if (c.extra) c.extra(rep);
  }
  return all ? 0 : 1;
}

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jetquant/geometry.hpp"
#include "jetquant/lagrangian_module.hpp"

namespace jq {

enum class Status { Pass, Fail, Undefined };
const char* status_name(Status s);

struct CheckRecord {
  std::string suite;
  std::string id;
  Status status = Status::Pass;
  double residual = 0;
  std::string location;
  std::string anchor;
  json detail = json::object();
  json to_json() const;
};

struct Report {
  json config = json::object();
  std::vector<CheckRecord> checks;
  bool passed() const;
  void append(const Report& o);
  json to_json() const;
};

// pointer is a JSON pointer, prefixed by "file#" once the file is known.
struct ConfigError : Error {
  std::string pointer, detail;
  ConfigError(const std::string& pointer, const std::string& detail)
      : Error(pointer.empty() ? detail : pointer + ": " + detail), pointer(pointer), detail(detail) {}
};

// cap 0 means the suite's own default (8 for the product suites, 7 for stack identities, 6 otherwise).
struct RunConfig {
  int cap = 0;
  int jet_order = 6;
  double tol = 1e-8;
  std::uint64_t seed = 1;
  std::vector<std::string> suites;
  std::vector<std::string> inputs;
  std::string report;
  int workers = 4;

  int cap_for(const std::string& suite) const;
  void validate() const;
  static RunConfig from_json(const json& j);
  json to_json() const;
};

struct SuiteInputs {
  std::vector<LagrangianConfig> lagrangians;
  std::vector<std::pair<std::string, Atlas>> atlases;
};

json read_json_file(const std::string& path);
// Each file is a Lagrangian config (has "charts" and "points") or an atlas (has "transitions").
SuiteInputs load_inputs(const std::vector<std::string>& paths, const RunConfig& cfg);
// Every *.json under dir, in name order.
std::vector<std::string> bundled_configs(const std::string& dir);

const std::vector<std::string>& suite_names();
bool is_suite(const std::string& name);

Report run_suite(const std::string& name, const RunConfig& cfg, const SuiteInputs& in);
// Suites in cfg.suites order, evaluated on up to cfg.workers threads.
Report run_verification(const RunConfig& cfg, const SuiteInputs& in);

}  // namespace jq

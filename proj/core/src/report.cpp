#include "fockfk/report.hpp"

#include <json.hpp>

namespace fockfk {

using ordered_json = nlohmann::ordered_json;

SuiteRecord SuiteRecord::pass(const std::string& name, const std::string& anchor) {
  SuiteRecord r;
  r.name = name;
  r.paper_anchor = anchor;
  r.status = "PASS";
  return r;
}

SuiteRecord SuiteRecord::fail(const std::string& name, const std::string& anchor) {
  SuiteRecord r;
  r.name = name;
  r.paper_anchor = anchor;
  r.status = "FAIL";
  return r;
}

bool Report::all_pass() const {
  for (const auto& s : suites)
    if (s.status == "FAIL") return false;
  return true;
}

namespace {

ordered_json to_json_impl(const Report& report, bool keep_runtime) {
  ordered_json j;
  j["run_id"] = report.run_id;
  j["seed"] = report.seed;
  ordered_json echo = ordered_json::object();
  for (const auto& [k, v] : report.config_echo) echo[k] = v;
  j["config_echo"] = echo;
  j["suites"] = ordered_json::array();
  for (const auto& s : report.suites) {
    ordered_json e;
    e["name"] = s.name;
    e["paper_anchor"] = s.paper_anchor;
    e["status"] = s.status;
    e["lhs"] = s.lhs;
    e["rhs"] = s.rhs;
    e["se"] = s.se;
    e["tolerance"] = s.tolerance;
    e["runtime_s"] = keep_runtime ? s.runtime_s : 0.0;
    j["suites"].push_back(e);
  }
  return j;
}

}  // namespace

std::string report_to_json(const Report& report) {
  return to_json_impl(report, true).dump(2) + "\n";
}

std::string normalized_report_json(const Report& report) {
  return to_json_impl(report, false).dump(2) + "\n";
}

std::string report_schema() {
  ordered_json j;
  j["run_id"] = "string, hash of the canonical config text and the seed";
  j["seed"] = "uint64";
  j["config_echo"] = "object, section.key -> value as parsed";
  ordered_json suite;
  suite["name"] = "string";
  suite["paper_anchor"] = "string";
  suite["status"] = "PASS | FAIL | SKIP";
  suite["lhs"] = "number";
  suite["rhs"] = "number";
  suite["se"] = "number";
  suite["tolerance"] = "number";
  suite["runtime_s"] = "number, wall clock, zeroed in the normalized form";
  j["suites"] = ordered_json::array({suite});
  return j.dump(2) + "\n";
}

Report report_from_json(const std::string& text) {
  const ordered_json j = ordered_json::parse(text);
  Report r;
  r.run_id = j.at("run_id").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& [k, v] : j.at("config_echo").items())
    r.config_echo.emplace_back(k, v.get<std::string>());
  for (const auto& e : j.at("suites")) {
    SuiteRecord s;
    s.name = e.at("name").get<std::string>();
    s.paper_anchor = e.at("paper_anchor").get<std::string>();
    s.status = e.at("status").get<std::string>();
    s.lhs = e.at("lhs").get<double>();
    s.rhs = e.at("rhs").get<double>();
    s.se = e.at("se").get<double>();
    s.tolerance = e.at("tolerance").get<double>();
    s.runtime_s = e.at("runtime_s").get<double>();
    r.suites.push_back(s);
  }
  return r;
}

}  // namespace fockfk

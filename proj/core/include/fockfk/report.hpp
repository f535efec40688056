#ifndef FOCKFK_REPORT_HPP
#define FOCKFK_REPORT_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace fockfk {

struct SuiteRecord {
  std::string name;
  std::string paper_anchor;
  std::string status = "PASS";  // PASS | FAIL | SKIP
  double lhs = 0.0;
  double rhs = 0.0;
  double se = 0.0;
  double tolerance = 0.0;
  double runtime_s = 0.0;

  static SuiteRecord pass(const std::string& name, const std::string& anchor);
  static SuiteRecord fail(const std::string& name, const std::string& anchor);
};

struct Report {
  std::string run_id;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config_echo;
  std::vector<SuiteRecord> suites;

  bool all_pass() const;
};

// Serialized report; timings are wall-clock and therefore excluded from the
// reproducibility comparison, which uses the normalized form.
std::string report_to_json(const Report& report);
std::string normalized_report_json(const Report& report);  // runtime_s zeroed

Report report_from_json(const std::string& text);

// machine-readable description of the report fields
std::string report_schema();

}  // namespace fockfk

#endif

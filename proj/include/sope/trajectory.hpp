#pragma once

// Line-delimited JSON trajectories: a header record, one record per control
// step, and an outcome record. Replay recomputes every reward from the
// logged features.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "sope/env.hpp"

namespace sope::traj {

nlohmann::json header_record(const env::Episode& ep, std::uint64_t seed);
nlohmann::json step_record(const env::StepRecord& rec);
nlohmann::json outcome_record(const env::TrialOutcome& out);

class Writer {
 public:
  explicit Writer(const std::string& path);
  ~Writer();
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;
  void write(const nlohmann::json& record);

 private:
  std::unique_ptr<std::ofstream> out_;
};

struct Mismatch {
  int step = 0;
  double logged = 0.0;
  double recomputed = 0.0;
};

struct ReplayReport {
  int steps = 0;
  std::vector<Mismatch> mismatches;
  std::vector<int> phase_starts;  // step index where each phase begins
  std::vector<double> d_s;
  std::vector<double> target_height;
  bool has_outcome = false;
  bool success = false;
  std::string failure;
};

// Throws IoError / ConfigError on unreadable or malformed files.
ReplayReport replay(const std::string& path, double tolerance = 1e-9);
void print_report(const ReplayReport& r, std::ostream& os);

}  // namespace sope::traj

#include "sope/trajectory.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

#include "sope/config.hpp"

namespace sope::traj {

using nlohmann::json;

json header_record(const env::Episode& ep, std::uint64_t seed) {
  return {{"type", "header"},
          {"seed", seed},
          {"target_idx", ep.target()},
          {"obs_dim", ep.config().obs_dim()},
          {"ref", {ep.ref().origin.x, ep.ref().origin.y, ep.ref().origin.z}},
          {"env", config::to_json(ep.config())}};
}

json step_record(const env::StepRecord& rec) {
  const auto& f = rec.features;
  const auto& r = rec.reward;
  json blocks = json::array();
  for (const auto& b : rec.blocks) blocks.push_back({b.center.x, b.center.z, b.angle});
  return {{"type", "step"},
          {"step", rec.step},
          {"phase", rec.phase},
          {"observation", rec.observation},
          {"raw_action", rec.raw_action},
          {"applied_action", rec.applied_action},
          {"features",
           {{"h_target", f.h_target},
            {"sum_d", f.sum_d},
            {"sum_c", f.sum_c},
            {"d_s", f.d_s},
            {"heights", f.other_heights},
            {"target_idx", f.target_idx},
            {"action", f.action}}},
          {"reward",
           {{"r_h", r.r_h},
            {"r_p", r.r_p},
            {"r_g", r.r_g},
            {"p_s", r.p_s},
            {"p_o", r.p_o},
            {"p_a", r.p_a},
            {"total", r.total}}},
          {"blocks", blocks},
          {"joints", rec.hand.joints},
          {"base", {rec.hand.base.x, rec.hand.base.z, rec.hand.wrist}},
          {"contacts", rec.contact_count}};
}

json outcome_record(const env::TrialOutcome& out) {
  return {{"type", "outcome"},
          {"success", out.success},
          {"failure", env::to_string(out.failure)},
          {"steps", out.steps},
          {"reward_sum", out.reward_sum},
          {"target_idx", out.target_idx}};
}

Writer::Writer(const std::string& path) : out_(std::make_unique<std::ofstream>(path)) {
  if (!*out_) throw IoError("cannot write trajectory " + path);
}

Writer::~Writer() = default;

void Writer::write(const json& record) { *out_ << record.dump() << "\n"; }

ReplayReport replay(const std::string& path, double tolerance) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory " + path);
  ReplayReport rep;
  env::EnvConfig cfg;
  bool have_header = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw ConfigError("trajectory line " + std::to_string(line_no) + " is not JSON");
    }
    const std::string type = j.value("type", "");
    try {
      if (type == "header") {
        cfg = config::env_from_json(j.at("env"));
        have_header = true;
      } else if (type == "step") {
        if (!have_header) throw ConfigError("step record before header");
        const json& fj = j.at("features");
        reward::RewardFeatures f;
        f.h_target = fj.at("h_target").get<double>();
        f.sum_d = fj.at("sum_d").get<double>();
        f.sum_c = fj.at("sum_c").get<int>();
        f.d_s = fj.at("d_s").get<double>();
        f.other_heights = fj.at("heights").get<std::vector<double>>();
        f.target_idx = fj.at("target_idx").get<int>();
        f.action = fj.at("action").get<physics::JointVector>();
        const int phase = j.at("phase").get<int>();
        const int step = j.at("step").get<int>();
        const double logged = j.at("reward").at("total").get<double>();
        const reward::RewardBreakdown b = reward::total_reward(f, phase, cfg.reward, cfg.weights);
        if (!(std::abs(b.total - logged) <= tolerance)) {
          rep.mismatches.push_back({step, logged, b.total});
        }
        if (rep.phase_starts.size() < static_cast<std::size_t>(phase)) {
          while (rep.phase_starts.size() < static_cast<std::size_t>(phase)) {
            rep.phase_starts.push_back(step);
          }
        }
        rep.d_s.push_back(f.d_s);
        rep.target_height.push_back(f.h_target);
        ++rep.steps;
      } else if (type == "outcome") {
        rep.has_outcome = true;
        rep.success = j.at("success").get<bool>();
        rep.failure = j.at("failure").get<std::string>();
      } else {
        throw ConfigError("unknown record type on line " + std::to_string(line_no));
      }
    } catch (const json::exception& e) {
      throw ConfigError("malformed record on line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rep;
}

void print_report(const ReplayReport& r, std::ostream& os) {
  if (r.steps == 0) {
    os << "no steps\n";
    return;
  }
  os << "steps: " << r.steps << "\n";
  for (std::size_t p = 0; p < r.phase_starts.size(); ++p) {
    os << "phase " << (p + 1) << " starts at step " << r.phase_starts[p] << "\n";
  }
  os << "step,d_s,target_height\n";
  for (std::size_t i = 0; i < r.d_s.size(); ++i) {
    os << i << "," << r.d_s[i] << "," << r.target_height[i] << "\n";
  }
  if (r.has_outcome) {
    os << "outcome: " << (r.success ? "success" : "failure") << " (" << r.failure << ")\n";
  }
  os << "reward mismatches: " << r.mismatches.size() << "\n";
  for (const auto& m : r.mismatches) {
    os << "  step " << m.step << ": logged " << m.logged << ", recomputed " << m.recomputed
       << "\n";
  }
}

}  // namespace sope::traj

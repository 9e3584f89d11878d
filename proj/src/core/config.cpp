#include "sope/config.hpp"

#include <fstream>
#include <set>

namespace sope::config {

using nlohmann::json;

namespace {

// Strict object reader: every key must be consumed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where() + "." + key + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  std::string sub(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key " + path_ + "." + it.key());
    }
  }

 private:
  std::string where() const { return path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json weights_json(const reward::Weights& w) {
  return {{"w_h", w.w_h}, {"w_p", w.w_p}, {"w_g", w.w_g},
          {"w_s", w.w_s}, {"w_o", w.w_o}, {"w_a", w.w_a}};
}

void read_weights(const json& j, const std::string& path, reward::Weights& w) {
  Reader r(j, path);
  r.get("w_h", w.w_h);
  r.get("w_p", w.w_p);
  r.get("w_g", w.w_g);
  r.get("w_s", w.w_s);
  r.get("w_o", w.w_o);
  r.get("w_a", w.w_a);
  r.finish();
}

json physics_json(const physics::PhysicsParams& p) {
  return {{"gravity", p.gravity},
          {"substeps", p.substeps},
          {"dt", p.dt},
          {"contact_iterations", p.contact_iterations},
          {"contact_stiffness", p.contact_stiffness},
          {"contact_damping", p.contact_damping},
          {"friction", p.friction},
          {"tip_radius", p.tip_radius},
          {"link_lengths", p.link_lengths},
          {"mount_x", p.mount_x},
          {"joint_kp", p.joint_kp},
          {"joint_kd", p.joint_kd},
          {"joint_inertia", p.joint_inertia},
          {"joint_min", p.joint_min},
          {"joint_max", p.joint_max},
          {"base_max_speed", p.base_max_speed},
          {"base_max_accel", p.base_max_accel},
          {"wrist_max_speed", p.wrist_max_speed},
          {"blowup_position", p.blowup_position},
          {"blowup_velocity", p.blowup_velocity}};
}

void read_physics(const json& j, const std::string& path, physics::PhysicsParams& p) {
  Reader r(j, path);
  r.get("gravity", p.gravity);
  r.get("substeps", p.substeps);
  r.get("dt", p.dt);
  r.get("contact_iterations", p.contact_iterations);
  r.get("contact_stiffness", p.contact_stiffness);
  r.get("contact_damping", p.contact_damping);
  r.get("friction", p.friction);
  r.get("tip_radius", p.tip_radius);
  r.get("link_lengths", p.link_lengths);
  r.get("mount_x", p.mount_x);
  r.get("joint_kp", p.joint_kp);
  r.get("joint_kd", p.joint_kd);
  r.get("joint_inertia", p.joint_inertia);
  r.get("joint_min", p.joint_min);
  r.get("joint_max", p.joint_max);
  r.get("base_max_speed", p.base_max_speed);
  r.get("base_max_accel", p.base_max_accel);
  r.get("wrist_max_speed", p.wrist_max_speed);
  r.get("blowup_position", p.blowup_position);
  r.get("blowup_velocity", p.blowup_velocity);
  r.finish();
}

std::string target_policy_name(env::TargetPolicy p) {
  return p == env::TargetPolicy::kUniform ? "uniform" : "fixed";
}

env::TargetPolicy target_policy_from(const std::string& s) {
  if (s == "uniform") return env::TargetPolicy::kUniform;
  if (s == "fixed") return env::TargetPolicy::kFixed;
  throw ConfigError("unknown target policy: " + s);
}

}  // namespace

json to_json(const env::EnvConfig& c) {
  const auto& rp = c.reward;
  return {
      {"n_blocks", c.n_blocks},
      {"target_policy", target_policy_name(c.target_policy)},
      {"fixed_target", c.fixed_target},
      {"variant", env::to_string(c.variant)},
      {"obs_variant", obs::to_string(c.obs_variant)},
      {"init_pose", env::to_string(c.init_pose)},
      {"container_length", c.container_length},
      {"container_length_max", c.container_length_max},
      {"row_shift_max", c.row_shift_max},
      {"wall_height", c.wall_height},
      {"grow_container", c.grow_container},
      {"gap_min", c.gap_min},
      {"gap_max", c.gap_max},
      {"constrained_gap_min", c.constrained_gap_min},
      {"constrained_gap_max", c.constrained_gap_max},
      {"insert_depth", c.insert_depth},
      {"insert_stiffness", c.insert_stiffness},
      {"hand_offset_x", c.hand_offset_x},
      {"hand_offset_z", c.hand_offset_z},
      {"settle_substeps", c.settle_substeps},
      {"schedule",
       {{"phase1_steps", c.schedule.phase1_steps},
        {"phase2_steps", c.schedule.phase2_steps},
        {"total_steps", c.schedule.total_steps}}},
      {"waypoints",
       {{"hover", c.waypoints.hover},
        {"descend", c.waypoints.descend},
        {"lift_end", c.waypoints.lift_end},
        {"descend_steps", c.waypoints.descend_steps},
        {"lift_steps", c.waypoints.lift_steps}}},
      {"success_height", c.success_height},
      {"success_hold", c.success_hold},
      {"other_cap", c.other_cap},
      {"ema_beta", c.ema_beta},
      {"ema", c.ema},
      {"action_clamp", c.action_clamp},
      {"max_target_lead", c.max_target_lead},
      {"mask_phase3", c.mask_phase3},
      {"early_termination", c.early_termination},
      {"physics", physics_json(c.physics)},
      {"reward",
       {{"alpha_h", rp.alpha_h},
        {"lambda_h", rp.lambda_h},
        {"lambda_p", rp.lambda_p},
        {"alpha_p", rp.alpha_p},
        {"alpha_c", rp.alpha_c},
        {"alpha_s", rp.alpha_s},
        {"alpha_o", rp.alpha_o}}},
      {"weights",
       {{"phase1", weights_json(c.weights.rows[0])},
        {"phase2", weights_json(c.weights.rows[1])},
        {"phase3", weights_json(c.weights.rows[2])}}},
  };
}

env::EnvConfig env_from_json(const json& j, env::EnvConfig c) {
  Reader r(j, "env");
  r.get("n_blocks", c.n_blocks);
  std::string s;
  s = target_policy_name(c.target_policy);
  r.get("target_policy", s);
  c.target_policy = target_policy_from(s);
  r.get("fixed_target", c.fixed_target);
  s = env::to_string(c.variant);
  r.get("variant", s);
  c.variant = env::env_variant_from_string(s);
  s = obs::to_string(c.obs_variant);
  r.get("obs_variant", s);
  c.obs_variant = obs::variant_from_string(s);
  s = env::to_string(c.init_pose);
  r.get("init_pose", s);
  c.init_pose = env::init_pose_from_string(s);
  r.get("container_length", c.container_length);
  r.get("container_length_max", c.container_length_max);
  r.get("row_shift_max", c.row_shift_max);
  r.get("wall_height", c.wall_height);
  r.get("grow_container", c.grow_container);
  r.get("gap_min", c.gap_min);
  r.get("gap_max", c.gap_max);
  r.get("constrained_gap_min", c.constrained_gap_min);
  r.get("constrained_gap_max", c.constrained_gap_max);
  r.get("insert_depth", c.insert_depth);
  r.get("insert_stiffness", c.insert_stiffness);
  r.get("hand_offset_x", c.hand_offset_x);
  r.get("hand_offset_z", c.hand_offset_z);
  r.get("settle_substeps", c.settle_substeps);
  if (const json* sj = r.child("schedule")) {
    Reader sr(*sj, r.sub("schedule"));
    sr.get("phase1_steps", c.schedule.phase1_steps);
    sr.get("phase2_steps", c.schedule.phase2_steps);
    sr.get("total_steps", c.schedule.total_steps);
    sr.finish();
  }
  if (const json* wj = r.child("waypoints")) {
    Reader wr(*wj, r.sub("waypoints"));
    wr.get("hover", c.waypoints.hover);
    wr.get("descend", c.waypoints.descend);
    wr.get("lift_end", c.waypoints.lift_end);
    wr.get("descend_steps", c.waypoints.descend_steps);
    wr.get("lift_steps", c.waypoints.lift_steps);
    wr.finish();
  }
  r.get("success_height", c.success_height);
  r.get("success_hold", c.success_hold);
  r.get("other_cap", c.other_cap);
  r.get("ema_beta", c.ema_beta);
  r.get("ema", c.ema);
  r.get("action_clamp", c.action_clamp);
  r.get("max_target_lead", c.max_target_lead);
  r.get("mask_phase3", c.mask_phase3);
  r.get("early_termination", c.early_termination);
  if (const json* pj = r.child("physics")) read_physics(*pj, r.sub("physics"), c.physics);
  if (const json* rj = r.child("reward")) {
    Reader rr(*rj, r.sub("reward"));
    rr.get("alpha_h", c.reward.alpha_h);
    rr.get("lambda_h", c.reward.lambda_h);
    rr.get("lambda_p", c.reward.lambda_p);
    rr.get("alpha_p", c.reward.alpha_p);
    rr.get("alpha_c", c.reward.alpha_c);
    rr.get("alpha_s", c.reward.alpha_s);
    rr.get("alpha_o", c.reward.alpha_o);
    rr.finish();
  }
  if (const json* wj = r.child("weights")) {
    Reader wr(*wj, r.sub("weights"));
    const char* names[3] = {"phase1", "phase2", "phase3"};
    for (int p = 0; p < 3; ++p) {
      if (const json* row = wr.child(names[p])) read_weights(*row, wr.sub(names[p]), c.weights.rows[p]);
    }
    wr.finish();
  }
  r.finish();
  return c;
}

json to_json(const RunConfig& c) {
  const auto& p = c.ppo;
  const auto& s = c.s2ssp;
  return {
      {"schema_version", c.schema_version},
      {"mode", c.mode},
      {"seeds", c.seeds},
      {"ablation", c.ablation},
      {"out_dir", c.out_dir},
      {"checkpoint", c.checkpoint},
      {"log_trajectories", c.log_trajectories},
      {"sweep_blocks", c.sweep_blocks},
      {"env", to_json(c.env)},
      {"ppo",
       {{"gamma", p.gamma},
        {"lambda", p.lambda},
        {"clip", p.clip},
        {"lr", p.lr},
        {"epochs", p.epochs},
        {"minibatches", p.minibatches},
        {"vf_coef", p.vf_coef},
        {"ent_coef", p.ent_coef},
        {"max_grad_norm", p.max_grad_norm},
        {"n_envs", p.n_envs},
        {"horizon", p.horizon},
        {"iterations", p.iterations},
        {"hidden", p.hidden},
        {"log_std_init", p.log_std_init},
        {"log_std_min", p.log_std_min},
        {"log_std_max", p.log_std_max},
        {"obs_norm", p.obs_norm},
        {"checkpoint_every", p.checkpoint_every},
        {"success_window", p.success_window},
        {"adam_beta1", p.adam_beta1},
        {"adam_beta2", p.adam_beta2},
        {"adam_eps", p.adam_eps}}},
      {"eval",
       {{"episodes", c.eval.episodes},
        {"deterministic", c.eval.deterministic},
        {"ema", c.eval.ema}}},
      {"s2ssp",
       {{"push_fingers", s.push_fingers},
        {"pinch_fingers", s.pinch_fingers},
        {"push_depth", s.push_depth},
        {"push_stroke", s.push_stroke},
        {"pinch_depth", s.pinch_depth},
        {"pinch_squeeze", s.pinch_squeeze},
        {"hover", s.hover},
        {"grasp_height", s.grasp_height},
        {"lift_end", s.lift_end},
        {"budgets", s.budgets},
        {"tolerance", s.tolerance}}},
  };
}

RunConfig from_json(const json& j, RunConfig c) {
  Reader r(j, "config");
  r.get("schema_version", c.schema_version);
  if (c.schema_version != kSchemaVersion) {
    throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version));
  }
  r.get("mode", c.mode);
  r.get("seeds", c.seeds);
  r.get("ablation", c.ablation);
  r.get("out_dir", c.out_dir);
  r.get("checkpoint", c.checkpoint);
  r.get("log_trajectories", c.log_trajectories);
  r.get("sweep_blocks", c.sweep_blocks);
  if (const json* ej = r.child("env")) c.env = env_from_json(*ej, c.env);
  if (const json* pj = r.child("ppo")) {
    Reader pr(*pj, "config.ppo");
    auto& p = c.ppo;
    pr.get("gamma", p.gamma);
    pr.get("lambda", p.lambda);
    pr.get("clip", p.clip);
    pr.get("lr", p.lr);
    pr.get("epochs", p.epochs);
    pr.get("minibatches", p.minibatches);
    pr.get("vf_coef", p.vf_coef);
    pr.get("ent_coef", p.ent_coef);
    pr.get("max_grad_norm", p.max_grad_norm);
    pr.get("n_envs", p.n_envs);
    pr.get("horizon", p.horizon);
    pr.get("iterations", p.iterations);
    pr.get("hidden", p.hidden);
    pr.get("log_std_init", p.log_std_init);
    pr.get("log_std_min", p.log_std_min);
    pr.get("log_std_max", p.log_std_max);
    pr.get("obs_norm", p.obs_norm);
    pr.get("checkpoint_every", p.checkpoint_every);
    pr.get("success_window", p.success_window);
    pr.get("adam_beta1", p.adam_beta1);
    pr.get("adam_beta2", p.adam_beta2);
    pr.get("adam_eps", p.adam_eps);
    pr.finish();
  }
  if (const json* vj = r.child("eval")) {
    Reader er(*vj, "config.eval");
    er.get("episodes", c.eval.episodes);
    er.get("deterministic", c.eval.deterministic);
    er.get("ema", c.eval.ema);
    er.finish();
  }
  if (const json* sj = r.child("s2ssp")) {
    Reader sr(*sj, "config.s2ssp");
    auto& s = c.s2ssp;
    sr.get("push_fingers", s.push_fingers);
    sr.get("pinch_fingers", s.pinch_fingers);
    sr.get("push_depth", s.push_depth);
    sr.get("push_stroke", s.push_stroke);
    sr.get("pinch_depth", s.pinch_depth);
    sr.get("pinch_squeeze", s.pinch_squeeze);
    sr.get("hover", s.hover);
    sr.get("grasp_height", s.grasp_height);
    sr.get("lift_end", s.lift_end);
    sr.get("budgets", s.budgets);
    sr.get("tolerance", s.tolerance);
    sr.finish();
  }
  r.finish();
  return c;
}

RunConfig load(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j, std::move(base));
}

void save(const RunConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << to_json(c).dump(2) << "\n";
}

void RunConfig::validate() const {
  static const std::set<std::string> modes{"train", "eval", "sweep", "baseline", "replay"};
  if (!modes.count(mode)) throw ConfigError("unknown mode " + mode);
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  baselines::ablation_from_string(ablation);
  env.validate();
  ppo.validate();
  s2ssp.validate();
  if (eval.episodes < 0) throw ConfigError("eval.episodes must be >= 0");
  for (int n : sweep_blocks) {
    if (n < 1) throw ConfigError("sweep block counts must be positive");
  }
}

void finalize(RunConfig& c) {
  baselines::apply_ablation(baselines::ablation_from_string(c.ablation), c.env);
  c.validate();
}

RunConfig ablation_run_config(baselines::Ablation a, RunConfig base) {
  base.ablation = baselines::to_string(a);
  finalize(base);
  return base;
}

}  // namespace sope::config

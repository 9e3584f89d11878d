// Command-line front end over the C interface.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sope/sope.h"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Flags {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::optional<int> n_blocks;
  std::optional<std::string> variant;
  std::optional<std::string> ablation;
  std::vector<std::string> checkpoints;
  std::optional<std::string> out;
  std::optional<int> episodes;
  std::optional<bool> deterministic;
  std::optional<bool> ema;
  std::optional<int> iterations;
  std::string resume;
  bool log_trajectories = false;
  bool quiet = false;
  std::string trajectory;
};

// Owns a string returned by the library.
struct LibString {
  char* p = nullptr;
  ~LibString() { sope_free_string(p); }
  std::string str() const { return p ? p : ""; }
};

int report(sope_status s) {
  std::cerr << "error: " << sope_last_error() << "\n";
  return s == SOPE_ERR_CONFIG || s == SOPE_ERR_INVALID_ARGUMENT ? kExitUsage : kExitRuntime;
}

json overrides(const Flags& f, const std::string& mode) {
  json j;
  j["mode"] = mode;
  if (!f.seeds.empty()) j["seeds"] = f.seeds;
  if (f.n_blocks) j["env"]["n_blocks"] = *f.n_blocks;
  if (f.variant) j["env"]["variant"] = *f.variant;
  if (f.ablation) j["ablation"] = *f.ablation;
  if (f.out) j["out_dir"] = *f.out;
  if (f.episodes) j["eval"]["episodes"] = *f.episodes;
  if (f.deterministic) j["eval"]["deterministic"] = *f.deterministic;
  if (f.ema) j["eval"]["ema"] = *f.ema;
  if (f.iterations) j["ppo"]["iterations"] = *f.iterations;
  if (f.log_trajectories) j["log_trajectories"] = true;
  if (f.checkpoints.size() == 1) j["checkpoint"] = f.checkpoints.front();
  return j;
}

std::optional<json> resolve(const Flags& f, const std::string& mode, int& code) {
  LibString r;
  const std::string ov = overrides(f, mode).dump();
  const sope_status s = sope_resolve_config(f.config.empty() ? nullptr : f.config.c_str(), ov.c_str(), &r.p);
  if (s != SOPE_OK) {
    code = report(s);
    return std::nullopt;
  }
  return json::parse(r.str());
}

int run_train(const Flags& f) {
  int code = kExitOk;
  const auto cfg = resolve(f, "train", code);
  if (!cfg) return code;
  const std::string text = cfg->dump();
  const auto seeds = cfg->at("seeds").get<std::vector<std::uint64_t>>();
  const std::string out = cfg->at("out_dir").get<std::string>();
  for (std::uint64_t seed : seeds) {
    const std::string dir = seeds.size() > 1 ? out + "/seed_" + std::to_string(seed) : out;
    LibString summary;
    const sope_status s = sope_train(text.c_str(), seed, dir.c_str(),
                                     f.resume.empty() ? nullptr : f.resume.c_str(), f.quiet ? 0 : 1,
                                     &summary.p);
    if (s != SOPE_OK) return report(s);
    std::cout << summary.str() << "\n";
  }
  return kExitOk;
}

int run_eval(const Flags& f) {
  if (f.checkpoints.size() != 1) {
    std::cerr << "error: eval needs exactly one --checkpoint\n";
    return kExitUsage;
  }
  int code = kExitOk;
  const auto cfg = resolve(f, "eval", code);
  if (!cfg) return code;
  LibString m;
  const sope_status s = sope_eval(cfg->dump().c_str(), f.checkpoints.front().c_str(),
                                  cfg->at("out_dir").get<std::string>().c_str(), &m.p);
  if (m.p) std::cout << json::parse(m.str()).dump(2) << "\n";
  return s == SOPE_OK ? kExitOk : report(s);
}

int run_sweep(Flags f) {
  if (f.checkpoints.empty()) {
    std::cerr << "error: sweep needs --checkpoint\n";
    return kExitUsage;
  }
  if (f.seeds.empty()) f.seeds = {0, 1, 2, 3, 4};
  int code = kExitOk;
  const auto cfg = resolve(f, "sweep", code);
  if (!cfg) return code;
  std::vector<const char*> paths;
  for (const auto& c : f.checkpoints) paths.push_back(c.c_str());
  const std::string out = cfg->at("out_dir").get<std::string>();
  LibString r;
  const sope_status s = sope_sweep(cfg->dump().c_str(), paths.data(), paths.size(), out.c_str(), &r.p);
  if (s != SOPE_OK) return report(s);
  std::cout << "wrote " << out << "/sweep_table.csv\n";
  return kExitOk;
}

int run_baseline(const Flags& f) {
  int code = kExitOk;
  const auto cfg = resolve(f, "baseline", code);
  if (!cfg) return code;
  LibString m;
  const sope_status s =
      sope_baseline(cfg->dump().c_str(), cfg->at("out_dir").get<std::string>().c_str(), &m.p);
  if (m.p) std::cout << json::parse(m.str()).dump(2) << "\n";
  return s == SOPE_OK ? kExitOk : report(s);
}

int run_replay(const Flags& f) {
  LibString text;
  int mismatches = 0;
  const sope_status s = sope_replay(f.trajectory.c_str(), &text.p, &mismatches);
  if (s != SOPE_OK) return report(s);
  std::cout << text.str();
  return mismatches == 0 ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Singulation training, evaluation and baselines"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(sope_version()));
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "run config JSON")->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seeds, "seed (repeatable)");
    sub->add_option("--n-blocks", f.n_blocks, "blocks in the container")->check(CLI::Range(1, 64));
    sub->add_option("--variant", f.variant, "normal or constrained")
        ->check(CLI::IsMember({"normal", "constrained"}));
    sub->add_option("--ablation", f.ablation, "none, tactile, naive_block or two_phase");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--episodes", f.episodes, "evaluation episodes per seed")->check(CLI::PositiveNumber);
    sub->add_option("--deterministic-eval", f.deterministic, "act with the policy mean");
    sub->add_option("--ema", f.ema, "smooth evaluation actions");
    sub->add_flag("--log-trajectories", f.log_trajectories, "write per-episode trajectories");
  };

  CLI::App* train = app.add_subcommand("train", "train a policy");
  common(train);
  train->add_option("--checkpoint,--resume", f.resume, "resume from this checkpoint");
  train->add_option("--iterations", f.iterations, "training iterations")->check(CLI::NonNegativeNumber);
  train->add_flag("--quiet", f.quiet, "no per-iteration progress");

  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  common(ev);
  ev->add_option("--checkpoint", f.checkpoints, "checkpoint path")->required();

  CLI::App* sw = app.add_subcommand("sweep", "zero-shot block-count sweep");
  common(sw);
  sw->add_option("--checkpoint", f.checkpoints, "checkpoint path (repeatable, one row each)")->required();

  CLI::App* bl = app.add_subcommand("baseline", "scripted swipe-and-pinch baseline");
  common(bl);

  CLI::App* rp = app.add_subcommand("replay", "verify a logged trajectory");
  rp->add_option("trajectory", f.trajectory, "trajectory file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitUsage;
  }

  if (*train) return run_train(f);
  if (*ev) return run_eval(f);
  if (*sw) return run_sweep(f);
  if (*bl) return run_baseline(f);
  return run_replay(f);
}

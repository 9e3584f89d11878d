#include "sope/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace sope::ckpt {

using nlohmann::json;

namespace {

constexpr const char* kMagic = "SOPECKPT 1";

void write_floats(std::ofstream& out, const std::vector<float>& v) {
  for (float f : v) {
    std::uint32_t u = std::bit_cast<std::uint32_t>(f);
    unsigned char b[4] = {static_cast<unsigned char>(u), static_cast<unsigned char>(u >> 8),
                          static_cast<unsigned char>(u >> 16),
                          static_cast<unsigned char>(u >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  }
}

void read_floats(std::ifstream& in, std::vector<float>& v, std::size_t n) {
  v.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
      throw CheckpointMismatch("checkpoint parameter block is truncated");
    }
    const std::uint32_t u = b[0] | (b[1] << 8) | (b[2] << 16) |
                            (static_cast<std::uint32_t>(b[3]) << 24);
    v[i] = std::bit_cast<float>(u);
  }
}

}  // namespace

void save(const Checkpoint& c, const std::string& path) {
  if (c.adam_m.size() != c.params.size() || c.adam_v.size() != c.params.size()) {
    throw CheckpointMismatch("optimiser state does not match parameter count");
  }
  json h = {
      {"format_version", kFormatVersion},
      {"obs_dim", c.obs_dim},
      {"obs_variant", obs::to_string(c.variant)},
      {"hidden", c.hidden},
      {"act_dim", 16},
      {"num_params", c.params.size()},
      {"sections", {"params", "adam_m", "adam_v"}},
      {"dtype", "float32-le"},
      {"adam_step", c.adam_step},
      {"iteration", c.iteration},
      {"seed", c.seed},
      {"obs_norm",
       {{"enabled", c.obs_norm}, {"count", c.norm.count}, {"mean", c.norm.mean},
        {"var", c.norm.var}, {"clip", c.norm.clip}}},
      {"success_window", c.success_window},
      {"episodes", c.episodes},
      {"env_steps", c.env_steps},
      {"rng", "streams derived from (seed, iteration, instance, purpose)"},
  };
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path);
    out << kMagic << "\n" << h.dump() << "\n";
    write_floats(out, c.params);
    write_floats(out, c.adam_m);
    write_floats(out, c.adam_v);
    if (!out) throw IoError("short write on checkpoint " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot move checkpoint into place");
}

Checkpoint load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::string magic, header;
  std::getline(in, magic);
  if (magic != kMagic) throw CheckpointMismatch(path + " is not a checkpoint");
  std::getline(in, header);
  Checkpoint c;
  std::size_t n = 0;
  try {
    const json h = json::parse(header);
    if (h.at("format_version").get<int>() != kFormatVersion) {
      throw CheckpointMismatch("unsupported checkpoint version");
    }
    c.obs_dim = h.at("obs_dim").get<int>();
    c.variant = obs::variant_from_string(h.at("obs_variant").get<std::string>());
    c.hidden = h.at("hidden").get<std::vector<int>>();
    n = h.at("num_params").get<std::size_t>();
    c.adam_step = h.at("adam_step").get<std::int64_t>();
    c.iteration = h.at("iteration").get<int>();
    c.seed = h.at("seed").get<std::uint64_t>();
    const json& on = h.at("obs_norm");
    c.obs_norm = on.at("enabled").get<bool>();
    c.norm.count = on.at("count").get<double>();
    c.norm.mean = on.at("mean").get<std::vector<double>>();
    c.norm.var = on.at("var").get<std::vector<double>>();
    c.norm.clip = on.at("clip").get<double>();
    c.success_window = h.at("success_window").get<std::vector<int>>();
    c.episodes = h.at("episodes").get<std::int64_t>();
    c.env_steps = h.at("env_steps").get<std::int64_t>();
  } catch (const json::exception& e) {
    throw CheckpointMismatch(std::string("bad checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointMismatch(e.what());
  }
  if (c.obs_dim <= 0 || static_cast<int>(c.norm.mean.size()) != c.obs_dim ||
      c.norm.var.size() != c.norm.mean.size()) {
    throw CheckpointMismatch("checkpoint normaliser does not match obs_dim");
  }
  read_floats(in, c.params, n);
  read_floats(in, c.adam_m, n);
  read_floats(in, c.adam_v, n);
  char extra;
  if (in.read(&extra, 1)) throw CheckpointMismatch("trailing bytes after parameter block");
  return c;
}

}  // namespace sope::ckpt

#include "urlb/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace urlb::config {

namespace {

const std::map<std::string, std::string>& default_table() {
  static const std::map<std::string, std::string> table = {
      {"run.algorithm", "icm"},
      {"run.domain", "pointmass"},
      {"run.seed", "1"},
      {"run.dir", "runs"},
      {"run.pretrain_steps", "100000"},
      {"run.snapshot_steps", "5000,25000,50000,100000"},
      {"run.finetune_steps", "10000"},
      {"run.eval_episodes", "10"},
      {"run.skill_budget", "16"},
      {"run.metrics_every", "1000"},

      {"env.episode_length", "250"},
      {"env.dt", "0.02"},

      {"replay.capacity", "1000000"},

      {"backbone.gamma", "0.99"},
      {"backbone.lr", "1e-4"},
      {"backbone.tau_q", "0.01"},
      {"backbone.batch", "1024"},
      {"backbone.nstep", "3"},
      {"backbone.update_every", "2"},
      {"backbone.seed_frames", "4000"},
      {"backbone.hidden_dim", "1024"},
      {"backbone.feature_dim", "1024"},
      {"backbone.stddev", "0.2"},
      {"backbone.stddev_clip", "0.3"},
      {"backbone.target_noise", "true"},

      {"intrinsic.rep_dim", "512"},
      {"intrinsic.hidden", "1024"},
      {"intrinsic.lr", "1e-4"},
      {"intrinsic.knn_k", "12"},
      {"intrinsic.particle_sum_logs", "false"},
      {"intrinsic.ensemble", "5"},
      {"intrinsic.proto_count", "512"},
      {"intrinsic.proto_pred_dim", "128"},
      {"intrinsic.proto_candidates", "4"},
      {"intrinsic.proto_knn_k", "3"},
      {"intrinsic.proto_queue", "2048"},
      {"intrinsic.proto_temp", "0.1"},
      {"intrinsic.proto_ema", "0.05"},
      {"intrinsic.sinkhorn_iters", "3"},
      {"intrinsic.diayn_skills", "16"},
      {"intrinsic.skill_every", "50"},
      {"intrinsic.smm_skills", "4"},
      {"intrinsic.smm_latent", "16"},
      {"intrinsic.smm_vae_lr", "1e-2"},
      {"intrinsic.smm_disc_lr", "1e-3"},
      {"intrinsic.aps_sf_dim", "10"},
      {"intrinsic.aps_lsq_lambda", "1e-6"},

      {"calibrate.budget_steps", "200000"},
      {"calibrate.seeds", "1,2"},

      {"grid.algorithms", "icm,disagreement,rnd,apt,proto,smm,diayn,aps"},
      {"grid.domains", "pointmass,planar_arm,slider"},
      {"grid.seeds", "1,2,3"},
  };
  return table;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

uint64_t fnv1a(uint64_t h, const std::string& s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

constexpr uint64_t kFnvOffset = 14695981039346656037ull;

}  // namespace

Config::Config() : values_(default_table()) {}

void Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  load_text(ss.str());
}

void Config::load_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(lineno) + " has no '='");
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("config: unknown key " + key);
  it->second = value;
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

const std::string& Config::get_str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("config: unknown key " + key);
  return it->second;
}

int64_t Config::get_int(const std::string& key) const {
  const std::string& v = get_str(key);
  char* end = nullptr;
  long long r = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw std::invalid_argument("config: " + key + " is not an integer: " + v);
  return r;
}

double Config::get_double(const std::string& key) const {
  const std::string& v = get_str(key);
  char* end = nullptr;
  double r = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw std::invalid_argument("config: " + key + " is not a number: " + v);
  return r;
}

bool Config::get_bool(const std::string& key) const {
  const std::string& v = get_str(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: " + key + " is not a boolean: " + v);
}

std::vector<int64_t> Config::get_int_list(const std::string& key) const {
  std::vector<int64_t> out;
  for (const auto& tok : get_str_list(key)) {
    char* end = nullptr;
    long long r = std::strtoll(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0')
      throw std::invalid_argument("config: " + key + " has a non-integer entry: " + tok);
    out.push_back(r);
  }
  return out;
}

std::vector<std::string> Config::get_str_list(const std::string& key) const {
  const std::string& v = get_str(key);
  std::vector<std::string> out;
  std::string tok;
  std::istringstream ss(v);
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

std::string Config::echo() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

void Config::save_echo(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << echo();
}

uint64_t Config::digest() const {
  uint64_t h = kFnvOffset;
  for (const auto& [k, v] : values_) {
    h = fnv1a(h, k);
    h = fnv1a(h, "=");
    h = fnv1a(h, v);
    h = fnv1a(h, "\n");
  }
  return h;
}

uint64_t Config::env_digest() const {
  uint64_t h = kFnvOffset;
  for (const auto& [k, v] : values_) {
    if (k.rfind("env.", 0) != 0 && k.rfind("backbone.", 0) != 0 && k.rfind("replay.", 0) != 0)
      continue;
    h = fnv1a(h, k);
    h = fnv1a(h, "=");
    h = fnv1a(h, v);
    h = fnv1a(h, "\n");
  }
  return h;
}

backbone::BackboneConfig backbone_config(const Config& cfg) {
  backbone::BackboneConfig b;
  b.gamma = cfg.get_double("backbone.gamma");
  b.lr = cfg.get_double("backbone.lr");
  b.tau_q = cfg.get_double("backbone.tau_q");
  b.batch = int(cfg.get_int("backbone.batch"));
  b.nstep = int(cfg.get_int("backbone.nstep"));
  b.update_every = int(cfg.get_int("backbone.update_every"));
  b.seed_frames = int(cfg.get_int("backbone.seed_frames"));
  b.hidden_dim = int(cfg.get_int("backbone.hidden_dim"));
  b.feature_dim = int(cfg.get_int("backbone.feature_dim"));
  b.stddev = cfg.get_double("backbone.stddev");
  b.stddev_clip = cfg.get_double("backbone.stddev_clip");
  b.target_noise = cfg.get_bool("backbone.target_noise");
  return b;
}

intrinsic::IntrinsicConfig intrinsic_config(const Config& cfg) {
  intrinsic::IntrinsicConfig c;
  c.rep_dim = int(cfg.get_int("intrinsic.rep_dim"));
  c.hidden = int(cfg.get_int("intrinsic.hidden"));
  c.lr = cfg.get_double("intrinsic.lr");
  c.knn_k = int(cfg.get_int("intrinsic.knn_k"));
  c.particle_sum_logs = cfg.get_bool("intrinsic.particle_sum_logs");
  c.ensemble = int(cfg.get_int("intrinsic.ensemble"));
  c.proto_count = int(cfg.get_int("intrinsic.proto_count"));
  c.proto_pred_dim = int(cfg.get_int("intrinsic.proto_pred_dim"));
  c.proto_candidates = int(cfg.get_int("intrinsic.proto_candidates"));
  c.proto_knn_k = int(cfg.get_int("intrinsic.proto_knn_k"));
  c.proto_queue = int(cfg.get_int("intrinsic.proto_queue"));
  c.proto_temp = cfg.get_double("intrinsic.proto_temp");
  c.proto_ema = cfg.get_double("intrinsic.proto_ema");
  c.sinkhorn_iters = int(cfg.get_int("intrinsic.sinkhorn_iters"));
  c.diayn_skills = int(cfg.get_int("intrinsic.diayn_skills"));
  c.skill_every = int(cfg.get_int("intrinsic.skill_every"));
  c.smm_skills = int(cfg.get_int("intrinsic.smm_skills"));
  c.smm_latent = int(cfg.get_int("intrinsic.smm_latent"));
  c.smm_vae_lr = cfg.get_double("intrinsic.smm_vae_lr");
  c.smm_disc_lr = cfg.get_double("intrinsic.smm_disc_lr");
  c.aps_sf_dim = int(cfg.get_int("intrinsic.aps_sf_dim"));
  c.aps_lsq_lambda = cfg.get_double("intrinsic.aps_lsq_lambda");
  c.gamma = cfg.get_double("backbone.gamma");
  return c;
}

}  // namespace urlb::config

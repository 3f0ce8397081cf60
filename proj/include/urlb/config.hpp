#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "urlb/backbone.hpp"
#include "urlb/intrinsic.hpp"

namespace urlb::config {

// Flat key=value configuration with section dots (backbone.lr=1e-4).
// Every key has a built-in default; unknown keys are rejected so typos
// fail loudly. Precedence: flag override > config file > default.
class Config {
 public:
  Config();

  // Parses "key = value" lines; '#' starts a comment; blank lines skipped.
  void load_file(const std::string& path);
  void load_text(const std::string& text);
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  const std::string& get_str(const std::string& key) const;
  int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<int64_t> get_int_list(const std::string& key) const;
  std::vector<std::string> get_str_list(const std::string& key) const;

  // Sorted "key=value" lines; writing this echo into the run directory
  // makes the run reproducible from its artifacts alone.
  std::string echo() const;
  void save_echo(const std::string& path) const;

  // FNV-1a over the sorted resolved pairs.
  uint64_t digest() const;
  // Digest restricted to env.*, backbone.*, and replay.* keys; guards
  // expert-calibration reuse (run bookkeeping must not invalidate it).
  uint64_t env_digest() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

backbone::BackboneConfig backbone_config(const Config& cfg);
intrinsic::IntrinsicConfig intrinsic_config(const Config& cfg);

}  // namespace urlb::config

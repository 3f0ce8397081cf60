#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "urlb/serialize.hpp"

namespace urlb::snapshot {

// Frozen agent at a pretraining milestone: backbone and intrinsic-module
// parameters plus the metadata needed to resume or fine-tune it.
struct Snapshot {
  std::string algorithm;
  std::string domain;
  uint64_t seed = 0;
  int64_t step = 0;
  uint64_t config_digest = 0;
  std::vector<ser::Section> agent;
  std::vector<ser::Section> intrinsic;
};

// File layout: 8-byte magic "URLBSN01", metadata fields in declaration
// order, then the agent and intrinsic section containers back to back.
void write(std::ostream& os, const Snapshot& s);
Snapshot read(std::istream& is);

void save(const std::string& path, const Snapshot& s);
Snapshot load(const std::string& path);

}  // namespace urlb::snapshot

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace urlb::results {

// One (algorithm, domain, task, snapshot step, seed) evaluation outcome.
// normalized = raw_return / expert_score when the expert score is
// positive, else 0; scores are recorded unclipped.
struct EvalRecord {
  std::string algorithm;
  std::string category;
  std::string domain;
  std::string task;
  int64_t snapshot_step = 0;
  uint64_t seed = 0;
  double raw_return = 0.0;
  double expert_score = 0.0;
  double normalized = 0.0;
};

struct ExpertRecord {
  std::string task_id;
  uint64_t config_digest = 0;
  double expert_score = 0.0;
  int64_t budget_steps = 0;
};

// Append-only CSV stores. Each append writes one fully formed line with a
// single O_APPEND write, so concurrent runs never interleave partial rows.
// Reals are printed round-trip exact (max_digits10).
void append_record(const std::string& path, const EvalRecord& r);
std::vector<EvalRecord> load_records(const std::string& path);

void append_expert(const std::string& path, const ExpertRecord& r);
std::vector<ExpertRecord> load_expert(const std::string& path);

bool has_record(const std::vector<EvalRecord>& records, const std::string& algorithm,
                const std::string& task_id, int64_t snapshot_step, uint64_t seed);
std::optional<double> lookup_expert(const std::vector<ExpertRecord>& records,
                                    const std::string& task_id, uint64_t config_digest);

std::string record_header();
std::string expert_header();

}  // namespace urlb::results

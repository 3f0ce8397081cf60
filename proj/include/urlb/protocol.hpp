#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "urlb/backbone.hpp"
#include "urlb/config.hpp"
#include "urlb/envs.hpp"
#include "urlb/intrinsic.hpp"
#include "urlb/results.hpp"
#include "urlb/rng.hpp"
#include "urlb/snapshot.hpp"

namespace urlb::protocol {

struct PretrainMetrics {
  int64_t steps = 0;
  int64_t agent_updates = 0;
  int64_t nonfinite_updates = 0;
  uint64_t reward_reads = 0;  // must stay 0: pretraining is reward-free
  double last_reward_mean = 0.0;
};

struct PretrainResult {
  std::vector<std::string> snapshot_paths;
  PretrainMetrics metrics;
};

// Builds the run's intrinsic module with the uniform reference volume
// taken from the domain's observation bounds.
std::unique_ptr<intrinsic::Module> make_run_module(const std::string& algorithm,
                                                   const envs::Domain& domain,
                                                   const config::Config& cfg, RngStream rng);

// Phase one: interact under the intrinsic reward only, never touching task
// rewards, and write one snapshot per milestone step plus metrics.csv and
// the resolved config echo into out_dir.
PretrainResult pretrain(const config::Config& cfg, const std::string& out_dir);

// Freshly initialized agent packaged as a step-0 snapshot; the random-init
// baseline runs through the ordinary finetune path with it.
snapshot::Snapshot random_init_snapshot(const config::Config& cfg);

// Skill chosen before fine-tuning: discrete-skill modules roll one greedy
// episode per candidate (capped at budget_episodes, ties to the lowest
// index); aps regresses its task vector from reward-labelled episodes;
// skill-free modules return empty.
std::vector<double> select_finetune_skill(intrinsic::Module& module, backbone::Agent& agent,
                                          const envs::Domain& domain, const std::string& task,
                                          int budget_episodes, RngStream rng);

// Phase two: restore the snapshot, fix the skill, train on the task reward
// from an empty buffer, evaluate, and emit the record. When expert_csv is
// non-empty the task must already be calibrated for this config.
results::EvalRecord finetune(const snapshot::Snapshot& snap, const std::string& task_id,
                             const config::Config& cfg, const std::string& expert_csv);

// Mean return over eval-mode episodes (no exploration noise).
double evaluate(backbone::Agent& agent, const envs::Domain& domain, const std::string& task,
                const std::vector<double>& skill, int episodes, RngStream rng);

// Supervised from-scratch training per seed; the expert score is the best
// final evaluation across seeds. Appended to expert_csv when non-empty.
double calibrate_expert(const std::string& task_id, int64_t budget_steps,
                        const std::vector<int64_t>& seeds, const config::Config& cfg,
                        const std::string& expert_csv);

enum class GroupBy { algorithm, category };

struct AggregateRow {
  std::string group;
  int64_t snapshot_step = 0;
  double mean = 0.0;
  double std_error = 0.0;
  int n = 0;
};

// Mean and standard error of the normalized scores per (group, snapshot
// step); single-record groups report std_error 0.
std::vector<AggregateRow> aggregate(const std::vector<results::EvalRecord>& records, GroupBy g);

// Replaces each record's expert score and normalized value using the
// calibration table (latest row per task wins); throws listing every task
// that has no positive calibration.
std::vector<results::EvalRecord> renormalize(std::vector<results::EvalRecord> records,
                                             const std::vector<results::ExpertRecord>& expert);

std::string report_markdown(const std::vector<AggregateRow>& rows, const std::string& title);

}  // namespace urlb::protocol

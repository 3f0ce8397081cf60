#include "urlb/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "urlb/replay.hpp"

namespace urlb::protocol {

namespace {

std::unique_ptr<envs::Domain> run_domain(const config::Config& cfg, const std::string& name) {
  return envs::make_domain(name, int(cfg.get_int("env.episode_length")),
                           cfg.get_double("env.dt"));
}

// One environment step driven by the current policy; returns the reached
// observation and pushes the transition (reward as supplied).
struct Rollout {
  envs::EnvSession session;
  std::vector<double> obs;

  Rollout(const envs::Domain& domain, RngStream rng) : session(domain, std::move(rng)) {
    obs = session.reset();
  }
};

bool losses_finite(const std::map<std::string, double>& losses) {
  for (const auto& [k, v] : losses)
    if (!std::isfinite(v)) return false;
  return true;
}

// Extrinsic-reward training shared by finetune and expert calibration:
// fresh buffer, task reward stored per transition, n-step sums fed back
// as the critic's reward source.
void supervised_steps(backbone::Agent& agent, const envs::Domain& domain,
                      const std::string& task, const std::vector<double>& skill, int64_t steps,
                      const config::Config& cfg, RngStream env_rng) {
  replay::ReplayBuffer buffer(size_t(cfg.get_int("replay.capacity")),
                              domain.spec().episode_length, domain.spec().obs_width,
                              domain.spec().action_width);
  if (buffer.size() != 0) throw std::logic_error("supervised_steps: buffer not empty at start");
  Rollout roll(domain, std::move(env_rng));

  backbone::Agent::RewardSource stored = [](const replay::NStepBatch& b) {
    return b.reward_sum;
  };

  for (int64_t step = 1; step <= steps; ++step) {
    int pos = roll.session.step_in_episode();
    auto action = agent.act(roll.obs, skill, backbone::ActMode::explore, int(step - 1));
    replay::Transition tr;
    tr.obs = roll.obs;
    tr.action = action;
    tr.step_in_episode = pos;
    tr.skill = skill;
    tr.next_obs = roll.session.step(action);
    tr.reward = roll.session.read_reward(task);
    roll.obs = tr.next_obs;
    buffer.push(std::move(tr));

    try {
      agent.agent_update_tick(buffer, int(step), stored);
    } catch (const std::runtime_error&) {
      // Non-finite loss: the update was aborted before applying; continue.
    }
    if (roll.session.episode_done()) roll.obs = roll.session.reset();
  }
}

std::string group_key(const results::EvalRecord& r, GroupBy g) {
  return g == GroupBy::algorithm ? r.algorithm : r.category;
}

}  // namespace

std::unique_ptr<intrinsic::Module> make_run_module(const std::string& algorithm,
                                                   const envs::Domain& domain,
                                                   const config::Config& cfg, RngStream rng) {
  intrinsic::Kind kind = intrinsic::kind_from_name(algorithm);
  intrinsic::IntrinsicConfig icfg = config::intrinsic_config(cfg);
  std::vector<double> lo, hi;
  domain.obs_bounds(lo, hi);
  double volume = 1.0;
  for (size_t i = 0; i < lo.size(); ++i) volume *= hi[i] - lo[i];
  icfg.smm_box_volume = volume;
  return intrinsic::make_module(kind, domain.spec().obs_width, domain.spec().action_width,
                                icfg, std::move(rng));
}

PretrainResult pretrain(const config::Config& cfg, const std::string& out_dir) {
  const std::string algorithm = cfg.get_str("run.algorithm");
  const std::string domain_name = cfg.get_str("run.domain");
  const uint64_t seed = uint64_t(cfg.get_int("run.seed"));
  const int64_t n_pt = cfg.get_int("run.pretrain_steps");
  std::vector<int64_t> milestones = cfg.get_int_list("run.snapshot_steps");

  if (milestones.empty()) throw std::invalid_argument("pretrain: no snapshot steps");
  for (size_t i = 0; i < milestones.size(); ++i) {
    if (milestones[i] < 1 || milestones[i] > n_pt)
      throw std::invalid_argument("pretrain: snapshot step out of [1, pretrain_steps]");
    if (i > 0 && milestones[i] <= milestones[i - 1])
      throw std::invalid_argument("pretrain: snapshot steps must be strictly ascending");
  }

  std::filesystem::create_directories(out_dir);
  cfg.save_echo(out_dir + "/config.txt");

  auto domain = run_domain(cfg, domain_name);
  backbone::BackboneConfig bb = config::backbone_config(cfg);

  RngStream root(seed);
  auto module = make_run_module(algorithm, *domain, cfg, root.fork("module"));
  backbone::Agent agent(bb, domain->spec().obs_width, domain->spec().action_width,
                        module->skill_width(), root.fork("agent"));
  replay::ReplayBuffer buffer(size_t(cfg.get_int("replay.capacity")),
                              domain->spec().episode_length, domain->spec().obs_width,
                              domain->spec().action_width);
  Rollout roll(*domain, root.fork("env"));
  RngStream skill_rng = root.fork("skill");
  RngStream batch_rng = root.fork("module_batch");

  const int skill_every = int(cfg.get_int("intrinsic.skill_every"));
  const int64_t metrics_every = cfg.get_int("run.metrics_every");

  std::ofstream metrics(out_dir + "/metrics.csv", std::ios::trunc);
  if (!metrics) throw std::runtime_error("pretrain: cannot write metrics.csv in " + out_dir);
  metrics << "step,critic_loss,actor_loss,intrinsic_reward_mean,nonfinite_updates\n";

  backbone::Agent::RewardSource intrinsic_rewards = [&](const replay::NStepBatch& b) {
    return module->compute_rewards(b);
  };

  std::vector<double> skill =
      module->skill_width() > 0 ? module->sample_skill(skill_rng) : std::vector<double>{};

  PretrainResult result;
  std::set<int64_t> pending(milestones.begin(), milestones.end());
  backbone::UpdateStats last;

  for (int64_t step = 1; step <= n_pt; ++step) {
    int pos = roll.session.step_in_episode();
    auto action = agent.act(roll.obs, skill, backbone::ActMode::explore, int(step - 1));
    replay::Transition tr;
    tr.obs = roll.obs;
    tr.action = action;
    tr.step_in_episode = pos;
    tr.skill = skill;
    tr.next_obs = roll.session.step(action);
    tr.reward = 0.0;  // the task reward is never read in this phase
    roll.obs = tr.next_obs;
    buffer.push(std::move(tr));

    if (step >= bb.seed_frames && step % bb.update_every == 0 && buffer.size() > 0) {
      auto mb = buffer.sample_nstep(bb.batch, bb.nstep, bb.gamma, batch_rng);
      auto losses = module->update(mb);
      if (!losses_finite(losses)) result.metrics.nonfinite_updates += 1;
    }
    try {
      backbone::UpdateStats stats = agent.agent_update_tick(buffer, int(step), intrinsic_rewards);
      if (stats.updated) {
        last = stats;
        result.metrics.agent_updates += 1;
        result.metrics.last_reward_mean = stats.reward_mean;
      }
    } catch (const std::runtime_error&) {
      result.metrics.nonfinite_updates += 1;
    }

    if (step % metrics_every == 0 || pending.count(step))
      metrics << step << "," << last.critic_loss << "," << last.actor_loss << ","
              << last.reward_mean << "," << result.metrics.nonfinite_updates << "\n";

    if (pending.count(step)) {
      snapshot::Snapshot snap;
      snap.algorithm = algorithm;
      snap.domain = domain_name;
      snap.seed = seed;
      snap.step = step;
      snap.config_digest = cfg.digest();
      snap.agent = agent.sections();
      snap.intrinsic = module->sections();
      std::string path = out_dir + "/snapshot_" + std::to_string(step) + ".bin";
      snapshot::save(path, snap);
      result.snapshot_paths.push_back(path);
    }

    if (roll.session.episode_done()) {
      roll.obs = roll.session.reset();
      if (module->skill_width() > 0) skill = module->sample_skill(skill_rng);
    } else if (module->skill_width() > 0 && skill_every > 0 && step % skill_every == 0) {
      skill = module->sample_skill(skill_rng);
    }
  }

  result.metrics.steps = n_pt;
  result.metrics.reward_reads = roll.session.reward_reads();
  return result;
}

snapshot::Snapshot random_init_snapshot(const config::Config& cfg) {
  const std::string algorithm = cfg.get_str("run.algorithm");
  const std::string domain_name = cfg.get_str("run.domain");
  auto domain = run_domain(cfg, domain_name);
  RngStream root(uint64_t(cfg.get_int("run.seed")));
  auto module = make_run_module(algorithm, *domain, cfg, root.fork("module"));
  backbone::Agent agent(config::backbone_config(cfg), domain->spec().obs_width,
                        domain->spec().action_width, module->skill_width(), root.fork("agent"));
  snapshot::Snapshot snap;
  snap.algorithm = algorithm;
  snap.domain = domain_name;
  snap.seed = uint64_t(cfg.get_int("run.seed"));
  snap.step = 0;
  snap.config_digest = cfg.digest();
  snap.agent = agent.sections();
  snap.intrinsic = module->sections();
  return snap;
}

std::vector<double> select_finetune_skill(intrinsic::Module& module, backbone::Agent& agent,
                                          const envs::Domain& domain, const std::string& task,
                                          int budget_episodes, RngStream rng) {
  if (module.skill_width() == 0) return {};
  if (budget_episodes < 1) throw std::invalid_argument("select_finetune_skill: budget < 1");

  auto candidates = module.candidate_skills();
  if (!candidates.empty()) {
    size_t tried = std::min(candidates.size(), size_t(budget_episodes));
    size_t best = 0;
    double best_return = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < tried; ++i) {
      double ret = evaluate(agent, domain, task, candidates[i], 1,
                            rng.fork("candidate" + std::to_string(i)));
      if (ret > best_return) {
        best_return = ret;
        best = i;
      }
    }
    return candidates[best];
  }

  // Continuous skill space: regress the task vector from labelled rollouts.
  const int L = domain.spec().episode_length;
  Mat states(budget_episodes * L, domain.spec().obs_width);
  std::vector<double> rewards(size_t(budget_episodes) * size_t(L), 0.0);
  envs::EnvSession session(domain, rng.fork("label_env"));
  RngStream skill_rng = rng.fork("label_skill");
  int row = 0;
  for (int e = 0; e < budget_episodes; ++e) {
    std::vector<double> skill = module.sample_skill(skill_rng);
    std::vector<double> obs = session.reset();
    while (!session.episode_done()) {
      auto action = agent.act(obs, skill, backbone::ActMode::eval, 0);
      obs = session.step(action);
      for (int c = 0; c < states.cols; ++c) states(row, c) = obs[size_t(c)];
      rewards[size_t(row)] = session.read_reward(task);
      ++row;
    }
  }
  return module.infer_task(states, rewards);
}

results::EvalRecord finetune(const snapshot::Snapshot& snap, const std::string& task_id,
                             const config::Config& cfg, const std::string& expert_csv) {
  auto [domain_name, task] = envs::split_task_id(task_id);
  if (domain_name != snap.domain)
    throw std::invalid_argument("finetune: snapshot domain '" + snap.domain +
                                "' does not match task '" + task_id + "'");

  auto domain = run_domain(cfg, domain_name);
  const uint64_t seed = uint64_t(cfg.get_int("run.seed"));
  intrinsic::Kind kind = intrinsic::kind_from_name(snap.algorithm);

  RngStream root(seed);
  auto module = make_run_module(snap.algorithm, *domain, cfg, root.fork("finetune_module"));
  module->restore(snap.intrinsic);
  backbone::Agent agent(config::backbone_config(cfg), domain->spec().obs_width,
                        domain->spec().action_width, module->skill_width(),
                        root.fork("finetune_agent"));
  agent.restore(snap.agent);

  std::vector<double> skill =
      select_finetune_skill(*module, agent, *domain, task,
                            int(cfg.get_int("run.skill_budget")), root.fork("finetune_skill"));

  supervised_steps(agent, *domain, task, skill, cfg.get_int("run.finetune_steps"), cfg,
                   root.fork("finetune_env"));

  double raw = evaluate(agent, *domain, task, skill, int(cfg.get_int("run.eval_episodes")),
                        root.fork("finetune_eval"));

  results::EvalRecord rec;
  rec.algorithm = snap.algorithm;
  rec.category = intrinsic::category_name(intrinsic::category_of(kind));
  rec.domain = domain_name;
  rec.task = task;
  rec.snapshot_step = snap.step;
  rec.seed = seed;
  rec.raw_return = raw;
  if (!expert_csv.empty()) {
    auto table = results::load_expert(expert_csv);
    auto expert = results::lookup_expert(table, task_id, cfg.env_digest());
    if (!expert)
      throw std::runtime_error("finetune: no expert calibration for " + task_id +
                               " under this config; run calibrate first");
    rec.expert_score = *expert;
    rec.normalized = *expert > 0.0 ? raw / *expert : 0.0;
  }
  return rec;
}

double evaluate(backbone::Agent& agent, const envs::Domain& domain, const std::string& task,
                const std::vector<double>& skill, int episodes, RngStream rng) {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes < 1");
  envs::EnvSession session(domain, std::move(rng));
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    std::vector<double> obs = session.reset();
    double ep = 0.0;
    while (!session.episode_done()) {
      auto action = agent.act(obs, skill, backbone::ActMode::eval, 0);
      obs = session.step(action);
      ep += session.read_reward(task);
    }
    total += ep;
  }
  return total / double(episodes);
}

double calibrate_expert(const std::string& task_id, int64_t budget_steps,
                        const std::vector<int64_t>& seeds, const config::Config& cfg,
                        const std::string& expert_csv) {
  if (seeds.empty()) throw std::invalid_argument("calibrate_expert: seed list empty");
  auto [domain_name, task] = envs::split_task_id(task_id);
  auto domain = run_domain(cfg, domain_name);
  backbone::BackboneConfig bb = config::backbone_config(cfg);

  double best = -std::numeric_limits<double>::infinity();
  for (int64_t seed : seeds) {
    RngStream root(static_cast<uint64_t>(seed));
    backbone::Agent agent(bb, domain->spec().obs_width, domain->spec().action_width, 0,
                          root.fork("calibrate_agent"));
    supervised_steps(agent, *domain, task, {}, budget_steps, cfg, root.fork("calibrate_env"));
    double score = evaluate(agent, *domain, task, {}, int(cfg.get_int("run.eval_episodes")),
                            root.fork("calibrate_eval"));
    best = std::max(best, score);
  }

  if (!expert_csv.empty()) {
    results::ExpertRecord rec;
    rec.task_id = task_id;
    rec.config_digest = cfg.env_digest();
    rec.expert_score = best;
    rec.budget_steps = budget_steps;
    results::append_expert(expert_csv, rec);
  }
  return best;
}

std::vector<AggregateRow> aggregate(const std::vector<results::EvalRecord>& records, GroupBy g) {
  std::map<std::pair<std::string, int64_t>, std::vector<double>> groups;
  for (const auto& r : records)
    groups[{group_key(r, g), r.snapshot_step}].push_back(r.normalized);

  std::vector<AggregateRow> rows;
  for (const auto& [key, values] : groups) {
    AggregateRow row;
    row.group = key.first;
    row.snapshot_step = key.second;
    row.n = int(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= double(values.size());
    row.mean = mean;
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      row.std_error = std::sqrt(ss / double(values.size() - 1)) / std::sqrt(double(values.size()));
    }
    rows.push_back(std::move(row));
  }
  return rows;  // std::map iteration keeps (group, step) order
}

std::vector<results::EvalRecord> renormalize(std::vector<results::EvalRecord> records,
                                             const std::vector<results::ExpertRecord>& expert) {
  // Latest calibration row per task wins.
  std::map<std::string, double> latest;
  for (const auto& e : expert) latest[e.task_id] = e.expert_score;

  std::set<std::string> missing;
  for (auto& r : records) {
    std::string task_id = r.domain + "/" + r.task;
    auto it = latest.find(task_id);
    if (it == latest.end() || !(it->second > 0.0)) {
      missing.insert(task_id);
      continue;
    }
    r.expert_score = it->second;
    r.normalized = r.raw_return / it->second;
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& t : missing) list += (list.empty() ? "" : ", ") + t;
    throw std::runtime_error("report: missing expert calibration for: " + list);
  }
  return records;
}

std::string report_markdown(const std::vector<AggregateRow>& rows, const std::string& title) {
  std::ostringstream os;
  os << "# " << title << "\n\n";
  os << "| group | snapshot_step | normalized score |\n";
  os << "|---|---|---|\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "mean %.3f ± %.3f (n=%d)", r.mean, r.std_error, r.n);
    os << "| " << r.group << " | " << r.snapshot_step << " | " << buf << " |\n";
  }
  return os.str();
}

}  // namespace urlb::protocol

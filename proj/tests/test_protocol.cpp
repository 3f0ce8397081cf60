#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "urlb/config.hpp"
#include "urlb/protocol.hpp"

using namespace urlb;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  std::string path;
  TempDir() {
    char tmpl[] = "/tmp/urlb_proto_XXXXXX";
    REQUIRE(mkdtemp(tmpl) != nullptr);
    path = tmpl;
  }
  ~TempDir() { fs::remove_all(path); }
};

// Desk-scale run that finishes in well under a second.
config::Config tiny_config() {
  config::Config cfg;
  cfg.set("run.domain", "pointmass");
  cfg.set("run.algorithm", "rnd");
  cfg.set("run.pretrain_steps", "600");
  cfg.set("run.snapshot_steps", "600");
  cfg.set("run.finetune_steps", "300");
  cfg.set("run.eval_episodes", "2");
  cfg.set("run.skill_budget", "4");
  cfg.set("run.metrics_every", "200");
  cfg.set("env.episode_length", "100");
  cfg.set("backbone.seed_frames", "100");
  cfg.set("backbone.batch", "32");
  cfg.set("backbone.hidden_dim", "16");
  cfg.set("backbone.feature_dim", "16");
  cfg.set("replay.capacity", "4096");
  cfg.set("intrinsic.rep_dim", "8");
  cfg.set("intrinsic.hidden", "16");
  cfg.set("intrinsic.knn_k", "3");
  cfg.set("intrinsic.ensemble", "3");
  cfg.set("intrinsic.proto_count", "16");
  cfg.set("intrinsic.proto_pred_dim", "8");
  cfg.set("intrinsic.proto_queue", "128");
  cfg.set("intrinsic.diayn_skills", "4");
  cfg.set("intrinsic.smm_latent", "4");
  cfg.set("intrinsic.aps_sf_dim", "4");
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("pretrain writes one snapshot per milestone with metadata") {
  TempDir dir;
  config::Config cfg = tiny_config();
  cfg.set("run.pretrain_steps", "500");
  cfg.set("run.snapshot_steps", "250,500");
  auto result = protocol::pretrain(cfg, dir.path);

  REQUIRE(result.snapshot_paths.size() == 2);
  CHECK(result.metrics.steps == 500);
  CHECK(result.metrics.agent_updates > 0);
  CHECK(result.metrics.nonfinite_updates == 0);

  auto snap = snapshot::load(result.snapshot_paths[1]);
  CHECK(snap.algorithm == "rnd");
  CHECK(snap.domain == "pointmass");
  CHECK(snap.seed == 1);
  CHECK(snap.step == 500);
  CHECK(snap.config_digest == cfg.digest());
  CHECK(!snap.agent.empty());
  CHECK(!snap.intrinsic.empty());

  CHECK(fs::exists(dir.path + "/config.txt"));
  CHECK(fs::exists(dir.path + "/metrics.csv"));
  // The echoed config reproduces the run's digest.
  config::Config echoed;
  echoed.load_file(dir.path + "/config.txt");
  CHECK(echoed.digest() == cfg.digest());
}

TEST_CASE("pretraining never reads the task reward") {
  TempDir dir;
  for (const char* algo : {"icm", "apt", "diayn"}) {
    config::Config cfg = tiny_config();
    cfg.set("run.algorithm", algo);
    cfg.set("run.pretrain_steps", "300");
    cfg.set("run.snapshot_steps", "300");
    auto result = protocol::pretrain(cfg, dir.path + "/" + algo);
    CHECK(result.metrics.reward_reads == 0);
  }
}

TEST_CASE("pretrain validates snapshot milestones") {
  TempDir dir;
  config::Config cfg = tiny_config();
  cfg.set("run.snapshot_steps", "0");
  CHECK_THROWS_AS(protocol::pretrain(cfg, dir.path), std::invalid_argument);
  cfg.set("run.snapshot_steps", "700");  // beyond pretrain_steps = 600
  CHECK_THROWS_AS(protocol::pretrain(cfg, dir.path), std::invalid_argument);
  cfg.set("run.snapshot_steps", "300,200");
  CHECK_THROWS_AS(protocol::pretrain(cfg, dir.path), std::invalid_argument);
  cfg.set("run.snapshot_steps", "");
  CHECK_THROWS_AS(protocol::pretrain(cfg, dir.path), std::invalid_argument);
}

TEST_CASE("same config and seed give byte-identical snapshots") {
  TempDir a, b;
  config::Config cfg = tiny_config();
  auto ra = protocol::pretrain(cfg, a.path);
  auto rb = protocol::pretrain(cfg, b.path);
  REQUIRE(ra.snapshot_paths.size() == 1);
  CHECK(read_file(ra.snapshot_paths[0]) == read_file(rb.snapshot_paths[0]));

  // A different seed diverges.
  TempDir c;
  config::Config other = tiny_config();
  other.set("run.seed", "2");
  auto rc = protocol::pretrain(other, c.path);
  CHECK(read_file(ra.snapshot_paths[0]) != read_file(rc.snapshot_paths[0]));
}

TEST_CASE("snapshot round trip is byte-identical") {
  TempDir dir;
  config::Config cfg = tiny_config();
  auto result = protocol::pretrain(cfg, dir.path);
  auto snap = snapshot::load(result.snapshot_paths[0]);
  std::string copy = dir.path + "/copy.bin";
  snapshot::save(copy, snap);
  CHECK(read_file(result.snapshot_paths[0]) == read_file(copy));
}

TEST_CASE("finetune rejects a domain mismatch") {
  TempDir dir;
  config::Config cfg = tiny_config();
  auto result = protocol::pretrain(cfg, dir.path);
  auto snap = snapshot::load(result.snapshot_paths[0]);
  CHECK_THROWS_AS(protocol::finetune(snap, "slider/stand", cfg, ""), std::invalid_argument);
  CHECK_THROWS_AS(protocol::finetune(snap, "pointmass/juggle", cfg, ""), std::invalid_argument);
}

TEST_CASE("zero-step finetune evaluates the snapshot policy as-is") {
  TempDir dir;
  config::Config cfg = tiny_config();
  auto result = protocol::pretrain(cfg, dir.path);
  auto snap = snapshot::load(result.snapshot_paths[0]);

  config::Config zero = cfg;
  zero.set("run.finetune_steps", "0");
  auto rec = protocol::finetune(snap, "pointmass/reach_top_left", zero, "");
  CHECK(rec.algorithm == "rnd");
  CHECK(rec.category == "knowledge");
  CHECK(rec.snapshot_step == 600);
  CHECK(rec.expert_score == 0.0);

  // Independent replay of the evaluation phase: restore the snapshot and
  // run the eval rollouts with the same derived stream.
  auto domain = envs::make_domain("pointmass", 100, 0.02);
  RngStream root(1);
  auto module = protocol::make_run_module("rnd", *domain, zero, root.fork("finetune_module"));
  backbone::Agent agent(config::backbone_config(zero), 4, 2, 0, root.fork("finetune_agent"));
  agent.restore(snap.agent);
  double expect = protocol::evaluate(agent, *domain, "reach_top_left", {}, 2,
                                     root.fork("finetune_eval"));
  CHECK(rec.raw_return == expect);
}

TEST_CASE("finetune is deterministic and improves with steps available") {
  TempDir dir;
  config::Config cfg = tiny_config();
  auto result = protocol::pretrain(cfg, dir.path);
  auto snap = snapshot::load(result.snapshot_paths[0]);

  auto r1 = protocol::finetune(snap, "pointmass/reach_top_left", cfg, "");
  auto r2 = protocol::finetune(snap, "pointmass/reach_top_left", cfg, "");
  CHECK(r1.raw_return == r2.raw_return);
  CHECK(r1.seed == 1);
  CHECK(std::isfinite(r1.raw_return));
}

TEST_CASE("random-init baseline shares the finetune path at step zero") {
  config::Config cfg = tiny_config();
  auto snap = protocol::random_init_snapshot(cfg);
  CHECK(snap.step == 0);
  auto rec = protocol::finetune(snap, "pointmass/reach_top_left", cfg, "");
  CHECK(rec.snapshot_step == 0);
  CHECK(std::isfinite(rec.raw_return));
}

TEST_CASE("finetune consults the expert table when given one") {
  TempDir dir;
  config::Config cfg = tiny_config();
  auto result = protocol::pretrain(cfg, dir.path);
  auto snap = snapshot::load(result.snapshot_paths[0]);
  std::string expert_csv = dir.path + "/expert.csv";

  SUBCASE("missing calibration fails loudly") {
    results::append_expert(expert_csv, {"pointmass/reach_top_right", cfg.env_digest(), 50.0, 1000});
    CHECK_THROWS_WITH_AS(protocol::finetune(snap, "pointmass/reach_top_left", cfg, expert_csv),
                         doctest::Contains("calibration"), std::runtime_error);
  }

  SUBCASE("digest mismatches do not count as calibrated") {
    results::append_expert(expert_csv, {"pointmass/reach_top_left", cfg.env_digest() + 1, 50.0, 1000});
    CHECK_THROWS_AS(protocol::finetune(snap, "pointmass/reach_top_left", cfg, expert_csv),
                    std::runtime_error);
  }

  SUBCASE("matching calibration normalizes the return") {
    results::append_expert(expert_csv, {"pointmass/reach_top_left", cfg.env_digest(), 50.0, 1000});
    auto rec = protocol::finetune(snap, "pointmass/reach_top_left", cfg, expert_csv);
    CHECK(rec.expert_score == 50.0);
    CHECK(rec.normalized == rec.raw_return / 50.0);
  }
}

TEST_CASE("evaluation of a deterministic domain repeats exactly") {
  config::Config cfg = tiny_config();
  cfg.set("run.domain", "slider");
  auto domain = envs::make_domain("slider", 100, 0.02);
  RngStream root(3);
  backbone::Agent agent(config::backbone_config(cfg), domain->spec().obs_width,
                        domain->spec().action_width, 0, root.fork("agent"));
  // The slider resets identically every episode, so in eval mode each
  // episode's return is the same and the mean equals a single episode.
  double one = protocol::evaluate(agent, *domain, "stand", {}, 1, root.fork("eval"));
  double three = protocol::evaluate(agent, *domain, "stand", {}, 3, root.fork("eval2"));
  CHECK(one == three);
}

TEST_CASE("evaluate matches a hand-rolled episode loop") {
  config::Config cfg = tiny_config();
  auto domain = envs::make_domain("pointmass", 100, 0.02);
  RngStream root(4);
  backbone::Agent agent(config::backbone_config(cfg), 4, 2, 0, root.fork("agent"));

  double got = protocol::evaluate(agent, *domain, "reach_top_left", {}, 2, root.fork("eval"));

  envs::EnvSession session(*domain, root.fork("eval"));
  double total = 0.0;
  for (int e = 0; e < 2; ++e) {
    auto obs = session.reset();
    double ep = 0.0;
    while (!session.episode_done()) {
      auto a = agent.act(obs, {}, backbone::ActMode::eval, 0);
      obs = session.step(a);
      ep += session.read_reward("reach_top_left");
    }
    total += ep;
  }
  CHECK(got == total / 2.0);
}

TEST_CASE("expert calibration takes the best seed and records the digest") {
  TempDir dir;
  config::Config cfg = tiny_config();
  cfg.set("calibrate.budget_steps", "300");
  std::string expert_csv = dir.path + "/expert.csv";

  double s1 = protocol::calibrate_expert("pointmass/reach_top_left", 300, {1}, cfg, "");
  double s2 = protocol::calibrate_expert("pointmass/reach_top_left", 300, {2}, cfg, "");
  double best = protocol::calibrate_expert("pointmass/reach_top_left", 300, {1, 2}, cfg, expert_csv);
  CHECK(best == std::max(s1, s2));

  auto table = results::load_expert(expert_csv);
  REQUIRE(table.size() == 1);
  CHECK(table[0].task_id == "pointmass/reach_top_left");
  CHECK(table[0].config_digest == cfg.env_digest());
  CHECK(table[0].expert_score == best);
  CHECK(table[0].budget_steps == 300);
  CHECK(results::lookup_expert(table, "pointmass/reach_top_left", cfg.env_digest()).has_value());
  CHECK(!results::lookup_expert(table, "pointmass/reach_top_left", cfg.env_digest() + 1).has_value());

  CHECK_THROWS_AS(protocol::calibrate_expert("pointmass/reach_top_left", 300, {}, cfg, ""),
                  std::invalid_argument);
}

TEST_CASE("skill selection respects the module family") {
  config::Config cfg = tiny_config();
  auto domain = envs::make_domain("pointmass", 100, 0.02);
  RngStream root(5);

  SUBCASE("skill-free modules return empty") {
    auto mod = protocol::make_run_module("apt", *domain, cfg, root.fork("m"));
    backbone::Agent agent(config::backbone_config(cfg), 4, 2, 0, root.fork("a"));
    CHECK(protocol::select_finetune_skill(*mod, agent, *domain, "reach_top_left", 4,
                                          root.fork("s"))
              .empty());
  }

  SUBCASE("discrete modules pick one of their candidates") {
    auto mod = protocol::make_run_module("diayn", *domain, cfg, root.fork("m"));
    backbone::Agent agent(config::backbone_config(cfg), 4, 2, mod->skill_width(), root.fork("a"));
    auto skill = protocol::select_finetune_skill(*mod, agent, *domain, "reach_top_left", 4,
                                                 root.fork("s"));
    auto candidates = mod->candidate_skills();
    CHECK(std::count(candidates.begin(), candidates.end(), skill) == 1);

    // A budget of one tries only the first candidate.
    auto first_only = protocol::select_finetune_skill(*mod, agent, *domain, "reach_top_left", 1,
                                                      root.fork("s2"));
    CHECK(first_only == candidates[0]);
  }

  SUBCASE("aps infers a unit task vector") {
    auto mod = protocol::make_run_module("aps", *domain, cfg, root.fork("m"));
    backbone::Agent agent(config::backbone_config(cfg), 4, 2, mod->skill_width(), root.fork("a"));
    auto w = protocol::select_finetune_skill(*mod, agent, *domain, "reach_top_left", 2,
                                             root.fork("s"));
    REQUIRE(int(w.size()) == mod->skill_width());
    double n2 = 0.0;
    for (double v : w) n2 += v * v;
    CHECK(std::abs(std::sqrt(n2) - 1.0) <= 1e-9);
  }
}

TEST_CASE("aggregation statistics") {
  auto rec = [](const std::string& algo, const std::string& cat, int64_t step, double norm) {
    results::EvalRecord r;
    r.algorithm = algo;
    r.category = cat;
    r.domain = "pointmass";
    r.task = "reach_top_left";
    r.snapshot_step = step;
    r.normalized = norm;
    return r;
  };

  SUBCASE("two values give 0.5 and 0.1") {
    std::vector<results::EvalRecord> recs = {rec("apt", "data", 5000, 0.4),
                                             rec("apt", "data", 5000, 0.6)};
    auto rows = protocol::aggregate(recs, protocol::GroupBy::algorithm);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].group == "apt");
    CHECK(rows[0].snapshot_step == 5000);
    CHECK(std::abs(rows[0].mean - 0.5) <= 1e-12);
    CHECK(std::abs(rows[0].std_error - 0.1) <= 1e-12);
    CHECK(rows[0].n == 2);
  }

  SUBCASE("a single record has stderr zero by convention") {
    auto rows = protocol::aggregate({rec("rnd", "knowledge", 100, 0.7)},
                                    protocol::GroupBy::category);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].mean == 0.7);
    CHECK(rows[0].std_error == 0.0);
    CHECK(rows[0].n == 1);
  }

  SUBCASE("category grouping pools member algorithms") {
    std::vector<results::EvalRecord> recs = {
        rec("apt", "data", 100, 0.2), rec("proto", "data", 100, 0.4),
        rec("rnd", "knowledge", 100, 0.9), rec("apt", "data", 200, 1.0)};
    auto rows = protocol::aggregate(recs, protocol::GroupBy::category);
    REQUIRE(rows.size() == 3);  // (data,100), (data,200), (knowledge,100)
    CHECK(rows[0].group == "data");
    CHECK(rows[0].snapshot_step == 100);
    CHECK(rows[0].n == 2);
    CHECK(std::abs(rows[0].mean - 0.3) <= 1e-12);
    CHECK(rows[1].group == "data");
    CHECK(rows[1].snapshot_step == 200);
    CHECK(rows[2].group == "knowledge");

    auto by_algo = protocol::aggregate(recs, protocol::GroupBy::algorithm);
    int total = 0;
    for (const auto& r : by_algo) total += r.n;
    CHECK(total == 4);  // grouping never drops records
  }
}

TEST_CASE("renormalization is scale-free and fails loudly when uncalibrated") {
  results::EvalRecord r;
  r.algorithm = "apt";
  r.category = "data";
  r.domain = "pointmass";
  r.task = "reach_top_left";
  r.raw_return = 80.0;

  std::vector<results::ExpertRecord> expert = {{"pointmass/reach_top_left", 1, 160.0, 1000}};
  auto out = protocol::renormalize({r}, expert);
  CHECK(out[0].normalized == 0.5);

  // Doubling every raw return and expert score changes nothing.
  results::EvalRecord doubled = r;
  doubled.raw_return = 160.0;
  std::vector<results::ExpertRecord> expert2 = {{"pointmass/reach_top_left", 1, 320.0, 1000}};
  CHECK(protocol::renormalize({doubled}, expert2)[0].normalized == 0.5);

  // The latest calibration row supersedes earlier ones.
  expert.push_back({"pointmass/reach_top_left", 2, 80.0, 2000});
  CHECK(protocol::renormalize({r}, expert)[0].normalized == 1.0);

  CHECK_THROWS_WITH_AS(protocol::renormalize({r}, {}),
                       doctest::Contains("pointmass/reach_top_left"), std::runtime_error);
  std::vector<results::ExpertRecord> zero = {{"pointmass/reach_top_left", 1, 0.0, 1000}};
  CHECK_THROWS_AS(protocol::renormalize({r}, zero), std::runtime_error);
}

TEST_CASE("markdown report formats the aggregate rows") {
  protocol::AggregateRow row;
  row.group = "data";
  row.snapshot_step = 5000;
  row.mean = 0.5;
  row.std_error = 0.1;
  row.n = 2;
  std::string md = protocol::report_markdown({row}, "Scores");
  CHECK(md.find("# Scores") != std::string::npos);
  CHECK(md.find("| data | 5000 | mean 0.500 ± 0.100 (n=2) |") != std::string::npos);
}

TEST_CASE("results csv round trip and cell lookup") {
  TempDir dir;
  std::string path = dir.path + "/results.csv";
  results::EvalRecord r;
  r.algorithm = "apt";
  r.category = "data";
  r.domain = "pointmass";
  r.task = "reach_top_left";
  r.snapshot_step = 600;
  r.seed = 3;
  r.raw_return = 12.345678901234567;
  r.expert_score = 50.0;
  r.normalized = r.raw_return / 50.0;
  results::append_record(path, r);
  results::append_record(path, r);

  auto back = results::load_records(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].algorithm == "apt");
  CHECK(back[0].raw_return == r.raw_return);  // round-trip exact
  CHECK(back[0].normalized == r.normalized);
  CHECK(results::has_record(back, "apt", "pointmass/reach_top_left", 600, 3));
  CHECK(!results::has_record(back, "apt", "pointmass/reach_top_left", 600, 4));
  CHECK(!results::has_record(back, "rnd", "pointmass/reach_top_left", 600, 3));
}

TEST_CASE("every algorithm pretrains and finetunes end to end") {
  TempDir dir;
  for (intrinsic::Kind kind : intrinsic::all_kinds()) {
    const char* algo = intrinsic::kind_name(kind);
    CAPTURE(algo);
    config::Config cfg = tiny_config();
    cfg.set("run.algorithm", algo);
    cfg.set("run.pretrain_steps", "400");
    cfg.set("run.snapshot_steps", "400");
    cfg.set("run.finetune_steps", "200");
    cfg.set("run.skill_budget", "2");
    auto result = protocol::pretrain(cfg, dir.path + "/" + algo);
    CHECK(result.metrics.reward_reads == 0);
    auto snap = snapshot::load(result.snapshot_paths[0]);
    auto rec = protocol::finetune(snap, "pointmass/reach_top_left", cfg, "");
    CHECK(rec.algorithm == algo);
    CHECK(std::isfinite(rec.raw_return));
  }
}

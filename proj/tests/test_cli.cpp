#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "urlb/config.hpp"
#include "urlb/results.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
  std::string path;
  TempDir() {
    char tmpl[] = "/tmp/urlb_cli_XXXXXX";
    REQUIRE(mkdtemp(tmpl) != nullptr);
    path = tmpl;
  }
  ~TempDir() { fs::remove_all(path); }
};

struct CmdResult {
  int status;
  std::string output;
};

CmdResult run_cli(const std::string& args, const std::string& log) {
  std::string cmd = std::string(URLB_BIN) + " " + args + " > " + log + " 2>&1";
  int rc = std::system(cmd.c_str());
  CmdResult r;
  r.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Shrinks every knob so one CLI invocation finishes in milliseconds.
std::string tiny_flags(const std::string& dir) {
  return "--set run.dir=" + dir +
         " --set run.pretrain_steps=400 --set run.snapshot_steps=400"
         " --set run.finetune_steps=200 --set run.eval_episodes=2"
         " --set run.skill_budget=2 --set env.episode_length=100"
         " --set backbone.seed_frames=100 --set backbone.batch=32"
         " --set backbone.hidden_dim=16 --set backbone.feature_dim=16"
         " --set replay.capacity=4096 --set intrinsic.rep_dim=8"
         " --set intrinsic.hidden=16 --set intrinsic.knn_k=3"
         " --set intrinsic.ensemble=3 --set intrinsic.proto_count=16"
         " --set intrinsic.proto_pred_dim=8 --set intrinsic.proto_queue=128"
         " --set intrinsic.diayn_skills=4 --set intrinsic.smm_latent=4"
         " --set intrinsic.aps_sf_dim=4 --set calibrate.budget_steps=300"
         " --set calibrate.seeds=1";
}

}  // namespace

TEST_CASE("selftest exits zero on a clean build") {
  TempDir dir;
  auto r = run_cli("selftest", dir.path + "/log");
  CHECK(r.status == 0);
  CHECK(r.output.find("all checks passed") != std::string::npos);
}

TEST_CASE("usage errors exit with code 1, runtime failures with 2") {
  TempDir dir;
  CHECK(run_cli("pretrain --no-such-flag", dir.path + "/log").status == 1);
  CHECK(run_cli("frobnicate", dir.path + "/log").status == 1);
  CHECK(run_cli("", dir.path + "/log").status == 1);  // a subcommand is required
  CHECK(run_cli("finetune", dir.path + "/log").status == 1);  // --task is required
  CHECK(run_cli("finetune --task no_such_domain/reach " + tiny_flags(dir.path) +
                    " --random-init --no-normalize",
                dir.path + "/log")
            .status == 2);
}

TEST_CASE("pretrain writes snapshots, metrics, and the config echo") {
  TempDir dir;
  auto r = run_cli("pretrain --algo rnd --domain pointmass --seed 1 " + tiny_flags(dir.path),
                   dir.path + "/log");
  REQUIRE(r.status == 0);
  CHECK(r.output.find("extrinsic reward reads 0") != std::string::npos);

  std::string run = dir.path + "/rnd/pointmass/1";
  CHECK(fs::exists(run + "/snapshot_400.bin"));
  CHECK(fs::exists(run + "/metrics.csv"));
  CHECK(fs::exists(run + "/config.txt"));

  // The echo is a loadable config that reflects the flag overrides.
  urlb::config::Config echoed;
  echoed.load_file(run + "/config.txt");
  CHECK(echoed.get_str("run.algorithm") == "rnd");
  CHECK(echoed.get_int("backbone.batch") == 32);
}

TEST_CASE("finetune requires calibration unless told otherwise") {
  TempDir dir;
  REQUIRE(run_cli("pretrain --algo rnd --domain pointmass --seed 1 " + tiny_flags(dir.path),
                  dir.path + "/log")
              .status == 0);
  std::string snap = dir.path + "/rnd/pointmass/1/snapshot_400.bin";

  auto fail = run_cli("finetune --snapshot " + snap + " --task pointmass/reach_top_left " +
                          tiny_flags(dir.path),
                      dir.path + "/log");
  CHECK(fail.status == 2);
  CHECK(fail.output.find("calibrat") != std::string::npos);

  auto skip = run_cli("finetune --snapshot " + snap +
                          " --task pointmass/reach_top_left --no-normalize " +
                          tiny_flags(dir.path),
                      dir.path + "/log");
  CHECK(skip.status == 0);

  REQUIRE(run_cli("calibrate --task pointmass/reach_top_left " + tiny_flags(dir.path),
                  dir.path + "/log")
              .status == 0);
  auto ok = run_cli("finetune --snapshot " + snap + " --task pointmass/reach_top_left " +
                        tiny_flags(dir.path),
                    dir.path + "/log");
  CHECK(ok.status == 0);

  auto records = urlb::results::load_records(dir.path + "/results.csv");
  REQUIRE(records.size() == 2);
  CHECK(records[1].expert_score > 0.0);
}

TEST_CASE("random-init baseline runs without a snapshot file") {
  TempDir dir;
  auto r = run_cli("finetune --random-init --task pointmass/reach_top_left --no-normalize " +
                       tiny_flags(dir.path),
                   dir.path + "/log");
  REQUIRE(r.status == 0);
  auto records = urlb::results::load_records(dir.path + "/results.csv");
  REQUIRE(records.size() == 1);
  CHECK(records[0].snapshot_step == 0);
}

TEST_CASE("grid sweeps, reports, and resumes idempotently") {
  TempDir dir;
  std::string grid_flags = tiny_flags(dir.path) +
                           " --set grid.algorithms=rnd --set grid.domains=slider"
                           " --set grid.seeds=1";

  // An uncalibrated grid refuses to start and lists the tasks.
  auto missing = run_cli("grid " + grid_flags, dir.path + "/log");
  CHECK(missing.status == 2);
  CHECK(missing.output.find("uncalibrated") != std::string::npos);
  CHECK(missing.output.find("slider/stand") != std::string::npos);

  for (const char* task : {"slider/stand", "slider/walk", "slider/run", "slider/flip"})
    REQUIRE(run_cli("calibrate --task " + std::string(task) + " " + tiny_flags(dir.path),
                    dir.path + "/log")
                .status == 0);

  REQUIRE(run_cli("grid " + grid_flags, dir.path + "/log").status == 0);
  std::string results_csv = dir.path + "/results.csv";
  auto records = urlb::results::load_records(results_csv);
  CHECK(records.size() == 4);  // 1 algo x 1 domain x 1 milestone x 4 tasks x 1 seed

  // Resume: a finished grid leaves the results store untouched.
  std::string before = read_file(results_csv);
  REQUIRE(run_cli("grid " + grid_flags, dir.path + "/log").status == 0);
  CHECK(read_file(results_csv) == before);

  // Parallel sweep: worker processes handle the added algorithm while the
  // finished rnd cell is skipped; appends interleave without corruption.
  std::string par_flags = tiny_flags(dir.path) +
                          " --set grid.algorithms=rnd,icm --set grid.domains=slider"
                          " --set grid.seeds=1";
  REQUIRE(run_cli("grid --jobs 2 " + par_flags, dir.path + "/log").status == 0);
  records = urlb::results::load_records(results_csv);
  CHECK(records.size() == 8);
  for (const char* t : {"stand", "walk", "run", "flip"})
    CHECK(urlb::results::has_record(records, "icm", std::string("slider/") + t, 400, 1));

  auto rep = run_cli("report --results " + dir.path, dir.path + "/log");
  REQUIRE(rep.status == 0);
  CHECK(rep.output.find("| knowledge | 400 |") != std::string::npos);
  CHECK(fs::exists(dir.path + "/report.md"));
  CHECK(fs::exists(dir.path + "/knowledge.csv"));

  auto by_algo = run_cli("report --results " + dir.path + " --group-by algorithm",
                         dir.path + "/log");
  REQUIRE(by_algo.status == 0);
  CHECK(by_algo.output.find("| rnd | 400 |") != std::string::npos);
}

TEST_CASE("config file plus flag precedence") {
  TempDir dir;
  std::ofstream(dir.path + "/run.cfg") << "run.pretrain_steps = 300\n"
                                       << "run.snapshot_steps = 300\n"
                                       << "backbone.seed_frames = 100\n"
                                       << "backbone.batch = 32\n"
                                       << "backbone.hidden_dim = 16\n"
                                       << "backbone.feature_dim = 16\n"
                                       << "env.episode_length = 100\n"
                                       << "intrinsic.rep_dim = 8\n"
                                       << "intrinsic.hidden = 16\n"
                                       << "replay.capacity = 4096\n"
                                       << "run.metrics_every = 100\n";
  auto r = run_cli("pretrain --algo icm --domain pointmass --seed 2 --config " + dir.path +
                       "/run.cfg --set run.dir=" + dir.path + " --set backbone.batch=16",
                   dir.path + "/log");
  REQUIRE(r.status == 0);

  urlb::config::Config echoed;
  echoed.load_file(dir.path + "/icm/pointmass/2/config.txt");
  CHECK(echoed.get_int("run.pretrain_steps") == 300);  // from the file
  CHECK(echoed.get_int("backbone.batch") == 16);       // flag beats file
  CHECK(fs::exists(dir.path + "/icm/pointmass/2/snapshot_300.bin"));
}

TEST_CASE("report fails loudly without records or calibration") {
  TempDir dir;
  CHECK(run_cli("report --results " + dir.path, dir.path + "/log").status == 2);

  urlb::results::EvalRecord r;
  r.algorithm = "apt";
  r.category = "data";
  r.domain = "pointmass";
  r.task = "reach_top_left";
  r.raw_return = 10.0;
  urlb::results::append_record(dir.path + "/results.csv", r);
  auto res = run_cli("report --results " + dir.path, dir.path + "/log");
  CHECK(res.status == 2);
  CHECK(res.output.find("pointmass/reach_top_left") != std::string::npos);
}

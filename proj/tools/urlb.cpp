// Command-line front end for the unsupervised-RL benchmark workflow:
// pretrain, finetune, calibrate, grid, report, selftest.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 selftest
// failures.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "urlb/config.hpp"
#include "urlb/envs.hpp"
#include "urlb/kernels.hpp"
#include "urlb/protocol.hpp"
#include "urlb/results.hpp"
#include "urlb/selftest.hpp"
#include "urlb/snapshot.hpp"

namespace {

namespace fs = std::filesystem;
using urlb::config::Config;

// Precedence: explicit flag > config file > built-in default.
struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value pairs from --set

  Config resolve() const {
    Config cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const auto& kv : overrides) {
      size_t eq = kv.find('=');
      if (eq == std::string::npos)
        throw CLI::ValidationError("--set expects key=value, got: " + kv);
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
  }
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "flat key=value config file");
  cmd->add_option("--set", opts.overrides, "override a config key (key=value), repeatable");
}

std::string run_dir(const Config& cfg) {
  return cfg.get_str("run.dir") + "/" + cfg.get_str("run.algorithm") + "/" +
         cfg.get_str("run.domain") + "/" + cfg.get_str("run.seed");
}

std::string expert_csv_path(const Config& cfg) {
  return cfg.get_str("run.dir") + "/expert.csv";
}

std::string results_csv_path(const Config& cfg) {
  return cfg.get_str("run.dir") + "/results.csv";
}

int cmd_pretrain(const Config& cfg) {
  std::string dir = run_dir(cfg);
  auto result = urlb::protocol::pretrain(cfg, dir);
  for (const auto& p : result.snapshot_paths) std::cout << "snapshot " << p << "\n";
  std::cout << "steps " << result.metrics.steps << ", agent updates "
            << result.metrics.agent_updates << ", non-finite updates "
            << result.metrics.nonfinite_updates << ", extrinsic reward reads "
            << result.metrics.reward_reads << "\n";
  return 0;
}

int cmd_finetune(const Config& cfg, const std::string& snapshot_path, const std::string& task_id,
                 bool random_init, bool skip_expert) {
  urlb::snapshot::Snapshot snap;
  if (random_init) {
    Config patched = cfg;
    patched.set("run.domain", urlb::envs::split_task_id(task_id).first);
    snap = urlb::protocol::random_init_snapshot(patched);
  } else {
    snap = urlb::snapshot::load(snapshot_path);
  }
  std::string expert = skip_expert ? "" : expert_csv_path(cfg);
  auto rec = urlb::protocol::finetune(snap, task_id, cfg, expert);
  fs::create_directories(cfg.get_str("run.dir"));
  urlb::results::append_record(results_csv_path(cfg), rec);
  std::cout << rec.algorithm << " " << task_id << " step " << rec.snapshot_step << " seed "
            << rec.seed << ": raw " << rec.raw_return << ", normalized " << rec.normalized
            << "\n";
  return 0;
}

int cmd_calibrate(const Config& cfg, const std::string& task_id) {
  fs::create_directories(cfg.get_str("run.dir"));
  double score = urlb::protocol::calibrate_expert(
      task_id, cfg.get_int("calibrate.budget_steps"), cfg.get_int_list("calibrate.seeds"), cfg,
      expert_csv_path(cfg));
  std::cout << "expert " << task_id << ": " << score << "\n";
  return 0;
}

struct GridCell {
  std::string algo, domain;
  int64_t seed;

  std::string spec() const { return algo + ":" + domain + ":" + std::to_string(seed); }
};

// Every task in the sweep must be calibrated before any cell runs.
void require_calibrated(const Config& cfg, const std::vector<std::string>& domains) {
  auto expert_table = urlb::results::load_expert(expert_csv_path(cfg));
  std::vector<std::string> missing;
  for (const auto& dn : domains) {
    auto domain = urlb::envs::make_domain(dn, int(cfg.get_int("env.episode_length")),
                                          cfg.get_double("env.dt"));
    for (const auto& t : domain->task_names()) {
      std::string task_id = dn + "/" + t;
      if (!urlb::results::lookup_expert(expert_table, task_id, cfg.env_digest()))
        missing.push_back(task_id);
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& t : missing) list += (list.empty() ? "" : ", ") + t;
    throw std::runtime_error("grid: uncalibrated tasks: " + list);
  }
}

// One (algorithm, domain, seed) cell: pretrain once, then finetune every
// milestone on every task. Finished work is skipped, so a killed sweep
// resumes where it stopped.
void run_grid_cell(const Config& cfg, const GridCell& c) {
  auto milestones = cfg.get_int_list("run.snapshot_steps");
  Config cell = cfg;
  cell.set("run.algorithm", c.algo);
  cell.set("run.domain", c.domain);
  cell.set("run.seed", std::to_string(c.seed));
  std::string dir = run_dir(cell);

  bool have_all = true;
  for (int64_t s : milestones)
    if (!fs::exists(dir + "/snapshot_" + std::to_string(s) + ".bin")) have_all = false;
  if (!have_all) urlb::protocol::pretrain(cell, dir);

  auto domain = urlb::envs::make_domain(c.domain, int(cfg.get_int("env.episode_length")),
                                        cfg.get_double("env.dt"));
  for (int64_t s : milestones) {
    auto snap = urlb::snapshot::load(dir + "/snapshot_" + std::to_string(s) + ".bin");
    for (const auto& t : domain->task_names()) {
      std::string task_id = c.domain + "/" + t;
      auto done = urlb::results::load_records(results_csv_path(cell));
      if (urlb::results::has_record(done, c.algo, task_id, s, uint64_t(c.seed))) continue;
      auto rec = urlb::protocol::finetune(snap, task_id, cell, expert_csv_path(cell));
      urlb::results::append_record(results_csv_path(cell), rec);
      std::cout << "cell " << c.algo << " " << task_id << " " << s << " " << c.seed
                << ": normalized " << rec.normalized << "\n";
    }
  }
}

std::string self_exe(const char* argv0) {
  std::error_code ec;
  auto p = fs::read_symlink("/proc/self/exe", ec);
  return ec ? std::string(argv0) : p.string();
}

pid_t spawn_cell(const std::string& exe, const CommonOpts& opts, const GridCell& c) {
  std::vector<std::string> args = {exe, "grid"};
  if (!opts.config_path.empty()) {
    args.push_back("--config");
    args.push_back(opts.config_path);
  }
  for (const auto& kv : opts.overrides) {
    args.push_back("--set");
    args.push_back(kv);
  }
  args.push_back("--cell");
  args.push_back(c.spec());

  std::vector<char*> argv;
  argv.reserve(args.size() + 1);
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  pid_t pid = ::fork();
  if (pid < 0) throw std::runtime_error("grid: fork failed");
  if (pid == 0) {
    ::execv(exe.c_str(), argv.data());
    ::_exit(127);
  }
  return pid;
}

int cmd_grid(const Config& cfg, const CommonOpts& opts, const char* argv0, int jobs,
             const std::string& cell_spec) {
  if (!cell_spec.empty()) {
    // Worker invocation: run exactly one cell.
    size_t a = cell_spec.find(':'), b = cell_spec.rfind(':');
    if (a == std::string::npos || b == a)
      throw std::runtime_error("grid: bad --cell, expected algo:domain:seed");
    GridCell c{cell_spec.substr(0, a), cell_spec.substr(a + 1, b - a - 1),
               std::stoll(cell_spec.substr(b + 1))};
    require_calibrated(cfg, {c.domain});
    run_grid_cell(cfg, c);
    return 0;
  }

  auto algorithms = cfg.get_str_list("grid.algorithms");
  auto domains = cfg.get_str_list("grid.domains");
  auto seeds = cfg.get_int_list("grid.seeds");
  if (seeds.empty()) throw std::runtime_error("grid: seed list empty");
  require_calibrated(cfg, domains);

  std::vector<GridCell> cells;
  for (const auto& algo : algorithms)
    for (const auto& dn : domains)
      for (int64_t seed : seeds) cells.push_back({algo, dn, seed});

  if (jobs <= 1) {
    for (const auto& c : cells) run_grid_cell(cfg, c);
    return 0;
  }

  // Worker pool: cells are independent (disjoint run dirs, disjoint result
  // rows) and the results store appends atomically, so processes may overlap.
  std::string exe = self_exe(argv0);
  std::map<pid_t, std::string> running;
  size_t next = 0;
  int failures = 0;
  while (next < cells.size() || !running.empty()) {
    while (next < cells.size() && int(running.size()) < jobs) {
      pid_t pid = spawn_cell(exe, opts, cells[next]);
      running.emplace(pid, cells[next].spec());
      ++next;
    }
    int status = 0;
    pid_t done = ::waitpid(-1, &status, 0);
    if (done < 0) throw std::runtime_error("grid: waitpid failed");
    auto it = running.find(done);
    if (it == running.end()) continue;
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      std::cerr << "grid: cell " << it->second << " failed\n";
      ++failures;
    }
    running.erase(it);
  }
  if (failures > 0)
    throw std::runtime_error("grid: " + std::to_string(failures) + " cell(s) failed");
  return 0;
}

int cmd_report(const std::string& results_dir, const std::string& group_by,
               const std::string& out_dir) {
  auto records = urlb::results::load_records(results_dir + "/results.csv");
  if (records.empty()) throw std::runtime_error("report: no records in " + results_dir);
  auto expert = urlb::results::load_expert(results_dir + "/expert.csv");
  records = urlb::protocol::renormalize(std::move(records), expert);

  auto mode = group_by == "algorithm" ? urlb::protocol::GroupBy::algorithm
                                      : urlb::protocol::GroupBy::category;
  auto rows = urlb::protocol::aggregate(records, mode);

  std::string dir = out_dir.empty() ? results_dir : out_dir;
  fs::create_directories(dir);
  std::string md = urlb::protocol::report_markdown(
      rows, "Normalized scores by " + group_by + " and snapshot step");
  std::ofstream(dir + "/report.md", std::ios::trunc) << md;

  // One plot-ready CSV per group: normalized score vs snapshot step.
  std::map<std::string, std::ofstream> files;
  for (const auto& r : rows) {
    auto it = files.find(r.group);
    if (it == files.end()) {
      it = files.emplace(r.group, std::ofstream(dir + "/" + r.group + ".csv", std::ios::trunc))
               .first;
      it->second << "snapshot_step,mean,stderr,n\n";
    }
    it->second << r.snapshot_step << "," << r.mean << "," << r.std_error << "," << r.n << "\n";
  }
  std::cout << md;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  urlb::kernels::init_backend_from_env();

  CLI::App app{"Unsupervised-RL benchmark: reward-free pretraining, fine-tuning, reporting"};
  app.require_subcommand(1);

  CommonOpts pre_opts;
  auto* pre = app.add_subcommand("pretrain", "phase one: intrinsic-reward training + snapshots");
  add_common(pre, pre_opts);
  std::string algo, domain, seed, steps, snapshots;
  pre->add_option("--algo", algo, "intrinsic algorithm id");
  pre->add_option("--domain", domain, "domain id");
  pre->add_option("--seed", seed, "run seed");
  pre->add_option("--steps", steps, "total pretraining steps");
  pre->add_option("--snapshots", snapshots, "comma-separated snapshot steps");

  CommonOpts ft_opts;
  auto* ft = app.add_subcommand("finetune", "phase two: task reward from a snapshot");
  add_common(ft, ft_opts);
  std::string snapshot_path, task_id, ft_steps, ft_seed;
  bool random_init = false, skip_expert = false;
  ft->add_option("--snapshot", snapshot_path, "snapshot file");
  ft->add_option("--task", task_id, "task id, e.g. pointmass/reach_top_left")->required();
  ft->add_option("--steps", ft_steps, "finetune steps");
  ft->add_option("--seed", ft_seed, "run seed");
  ft->add_flag("--random-init", random_init, "baseline: fresh parameters instead of a snapshot");
  ft->add_flag("--no-normalize", skip_expert, "record the raw return without an expert lookup");

  CommonOpts cal_opts;
  auto* cal = app.add_subcommand("calibrate", "train the expert reference for a task");
  add_common(cal, cal_opts);
  std::string cal_task, budget, cal_seeds;
  cal->add_option("--task", cal_task, "task id")->required();
  cal->add_option("--budget", budget, "training steps per calibration seed");
  cal->add_option("--seeds", cal_seeds, "comma-separated calibration seeds");

  CommonOpts grid_opts;
  auto* grid = app.add_subcommand("grid", "full sweep with resume");
  add_common(grid, grid_opts);
  int jobs = 1;
  std::string cell_spec;
  grid->add_option("--jobs", jobs, "concurrent worker processes")->check(CLI::PositiveNumber);
  grid->add_option("--cell", cell_spec, "run a single algo:domain:seed cell")->group("");

  auto* rep = app.add_subcommand("report", "aggregate results into tables");
  std::string results_dir, group_by = "category", report_out;
  rep->add_option("--results", results_dir, "directory holding results.csv + expert.csv")
      ->required();
  rep->add_option("--group-by", group_by, "category or algorithm")
      ->check(CLI::IsMember({"category", "algorithm"}));
  rep->add_option("--out", report_out, "report output directory (default: results dir)");

  auto* self = app.add_subcommand("selftest", "run the invariant suite");
  (void)self;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (pre->parsed()) {
      Config cfg = pre_opts.resolve();
      if (!algo.empty()) cfg.set("run.algorithm", algo);
      if (!domain.empty()) cfg.set("run.domain", domain);
      if (!seed.empty()) cfg.set("run.seed", seed);
      if (!steps.empty()) cfg.set("run.pretrain_steps", steps);
      if (!snapshots.empty()) cfg.set("run.snapshot_steps", snapshots);
      return cmd_pretrain(cfg);
    }
    if (ft->parsed()) {
      Config cfg = ft_opts.resolve();
      if (!ft_steps.empty()) cfg.set("run.finetune_steps", ft_steps);
      if (!ft_seed.empty()) cfg.set("run.seed", ft_seed);
      if (!random_init && snapshot_path.empty())
        throw std::runtime_error("finetune: provide --snapshot or --random-init");
      return cmd_finetune(cfg, snapshot_path, task_id, random_init, skip_expert);
    }
    if (cal->parsed()) {
      Config cfg = cal_opts.resolve();
      if (!budget.empty()) cfg.set("calibrate.budget_steps", budget);
      if (!cal_seeds.empty()) cfg.set("calibrate.seeds", cal_seeds);
      return cmd_calibrate(cfg, cal_task);
    }
    if (grid->parsed()) return cmd_grid(grid_opts.resolve(), grid_opts, argv[0], jobs, cell_spec);
    if (rep->parsed()) return cmd_report(results_dir, group_by, report_out);
    if (self->parsed()) return urlb::selftest::run(std::cout) == 0 ? 0 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

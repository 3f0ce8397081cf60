#include "urlb/results.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace urlb::results {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << v;
  return os.str();
}

// One write(2) with O_APPEND per line; the header goes in only when this
// call creates the file.
void append_line(const std::string& path, const std::string& header, const std::string& line) {
  int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_EXCL, 0644);
  bool created = fd >= 0;
  if (!created) {
    if (errno != EEXIST) throw std::runtime_error("results: cannot open " + path);
    fd = ::open(path.c_str(), O_WRONLY | O_APPEND);
    if (fd < 0) throw std::runtime_error("results: cannot open " + path);
  }
  std::string payload = created ? header + "\n" + line + "\n" : line + "\n";
  ssize_t n = ::write(fd, payload.data(), payload.size());
  int saved = errno;
  ::close(fd);
  if (n != ssize_t(payload.size()))
    throw std::runtime_error("results: short write to " + path + ": " + std::strerror(saved));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream ss(line);
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  return out;
}

}  // namespace

std::string record_header() {
  return "algorithm,category,domain,task,snapshot_step,seed,raw_return,expert_score,normalized";
}

std::string expert_header() { return "task_id,config_digest,expert_score,budget_steps"; }

void append_record(const std::string& path, const EvalRecord& r) {
  std::string line = r.algorithm + "," + r.category + "," + r.domain + "," + r.task + "," +
                     std::to_string(r.snapshot_step) + "," + std::to_string(r.seed) + "," +
                     fmt(r.raw_return) + "," + fmt(r.expert_score) + "," + fmt(r.normalized);
  append_line(path, record_header(), line);
}

std::vector<EvalRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) return {};
  std::vector<EvalRecord> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      if (line != record_header()) throw std::runtime_error("results: bad header in " + path);
      continue;
    }
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != 9) throw std::runtime_error("results: malformed row in " + path);
    EvalRecord r;
    r.algorithm = f[0];
    r.category = f[1];
    r.domain = f[2];
    r.task = f[3];
    r.snapshot_step = std::stoll(f[4]);
    r.seed = std::stoull(f[5]);
    r.raw_return = std::stod(f[6]);
    r.expert_score = std::stod(f[7]);
    r.normalized = std::stod(f[8]);
    out.push_back(std::move(r));
  }
  return out;
}

void append_expert(const std::string& path, const ExpertRecord& r) {
  std::string line = r.task_id + "," + std::to_string(r.config_digest) + "," +
                     fmt(r.expert_score) + "," + std::to_string(r.budget_steps);
  append_line(path, expert_header(), line);
}

std::vector<ExpertRecord> load_expert(const std::string& path) {
  std::ifstream in(path);
  if (!in) return {};
  std::vector<ExpertRecord> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      if (line != expert_header()) throw std::runtime_error("results: bad header in " + path);
      continue;
    }
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != 4) throw std::runtime_error("results: malformed row in " + path);
    ExpertRecord r;
    r.task_id = f[0];
    r.config_digest = std::stoull(f[1]);
    r.expert_score = std::stod(f[2]);
    r.budget_steps = std::stoll(f[3]);
    out.push_back(std::move(r));
  }
  return out;
}

bool has_record(const std::vector<EvalRecord>& records, const std::string& algorithm,
                const std::string& task_id, int64_t snapshot_step, uint64_t seed) {
  for (const auto& r : records)
    if (r.algorithm == algorithm && r.domain + "/" + r.task == task_id &&
        r.snapshot_step == snapshot_step && r.seed == seed)
      return true;
  return false;
}

std::optional<double> lookup_expert(const std::vector<ExpertRecord>& records,
                                    const std::string& task_id, uint64_t config_digest) {
  // Later rows win so a recalibration supersedes earlier entries.
  std::optional<double> best;
  for (const auto& r : records)
    if (r.task_id == task_id && r.config_digest == config_digest) best = r.expert_score;
  return best;
}

}  // namespace urlb::results

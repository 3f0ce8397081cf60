#include "urlb/snapshot.hpp"

#include <unistd.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace urlb::snapshot {

namespace {

constexpr char kMagic[8] = {'U', 'R', 'L', 'B', 'S', 'N', '0', '1'};

}  // namespace

void write(std::ostream& os, const Snapshot& s) {
  os.write(kMagic, 8);
  ser::put_str(os, s.algorithm);
  ser::put_str(os, s.domain);
  ser::put_u64(os, s.seed);
  ser::put_i64(os, s.step);
  ser::put_u64(os, s.config_digest);
  ser::write_container(os, s.agent);
  ser::write_container(os, s.intrinsic);
  if (!os) throw std::runtime_error("snapshot: write failed");
}

Snapshot read(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("snapshot: bad magic");
  Snapshot s;
  s.algorithm = ser::get_str(is);
  s.domain = ser::get_str(is);
  s.seed = ser::get_u64(is);
  s.step = ser::get_i64(is);
  s.config_digest = ser::get_u64(is);
  s.agent = ser::read_container(is);
  s.intrinsic = ser::read_container(is);
  return s;
}

void save(const std::string& path, const Snapshot& s) {
  // Write-then-rename so an interrupted run never leaves a partial file
  // that a resumed sweep would mistake for a finished snapshot.
  std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("snapshot: cannot open " + tmp);
    write(out, s);
    out.flush();
    if (!out) throw std::runtime_error("snapshot: write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("snapshot: rename failed for " + path + ": " + ec.message());
}

Snapshot load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("snapshot: cannot open " + path);
  return read(in);
}

}  // namespace urlb::snapshot

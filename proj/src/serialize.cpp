#include "urlb/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace urlb::ser {

namespace {

constexpr char kMagic[8] = {'U', 'R', 'L', 'B', 'P', 'S', '0', '1'};

void fail_truncated() { throw std::runtime_error("paramset container: truncated stream"); }

}  // namespace

void put_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = char((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

void put_u64(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

void put_i64(std::ostream& os, int64_t v) { put_u64(os, uint64_t(v)); }

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<uint64_t>(v)); }

void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, uint32_t(s.size()));
  os.write(s.data(), std::streamsize(s.size()));
}

uint32_t get_u32(std::istream& is) {
  char b[4];
  if (!is.read(b, 4)) fail_truncated();
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(b[i])) << (8 * i);
  return v;
}

uint64_t get_u64(std::istream& is) {
  char b[8];
  if (!is.read(b, 8)) fail_truncated();
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(b[i])) << (8 * i);
  return v;
}

int64_t get_i64(std::istream& is) { return int64_t(get_u64(is)); }

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

std::string get_str(std::istream& is) {
  uint32_t n = get_u32(is);
  if (n > (1u << 20)) throw std::runtime_error("paramset container: unreasonable string length");
  std::string s(n, '\0');
  if (n && !is.read(s.data(), std::streamsize(n))) fail_truncated();
  return s;
}

void write_paramset(std::ostream& os, const net::ParamSet& p) {
  put_u32(os, uint32_t(p.entries.size()));
  for (const auto& [name, m] : p.entries) {
    put_str(os, name);
    put_u32(os, uint32_t(m.rows));
    put_u32(os, uint32_t(m.cols));
    for (double x : m.v) put_f64(os, x);
  }
}

net::ParamSet read_paramset(std::istream& is) {
  net::ParamSet p;
  uint32_t count = get_u32(is);
  for (uint32_t e = 0; e < count; ++e) {
    std::string name = get_str(is);
    int rows = int(get_u32(is));
    int cols = int(get_u32(is));
    if (rows < 0 || cols < 0 || uint64_t(rows) * uint64_t(cols) > (1ull << 32))
      throw std::runtime_error("paramset container: unreasonable matrix shape");
    Mat m(rows, cols);
    for (auto& x : m.v) x = get_f64(is);
    p.add(name, std::move(m));
  }
  return p;
}

void write_container(std::ostream& os, const std::vector<Section>& sections) {
  os.write(kMagic, 8);
  put_u32(os, uint32_t(sections.size()));
  for (const auto& s : sections) {
    put_str(os, s.name);
    write_paramset(os, s.params);
  }
  if (!os) throw std::runtime_error("paramset container: write failed");
}

std::vector<Section> read_container(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8)) fail_truncated();
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("paramset container: bad magic (not a parameter file?)");
  uint32_t count = get_u32(is);
  std::vector<Section> sections;
  sections.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    Section s;
    s.name = get_str(is);
    s.params = read_paramset(is);
    sections.push_back(std::move(s));
  }
  return sections;
}

void save_container(const std::string& path, const std::vector<Section>& sections) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_container(os, sections);
  os.close();
  if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

std::vector<Section> load_container(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  return read_container(is);
}

}  // namespace urlb::ser

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "urlb/mlp.hpp"

namespace urlb::ser {

// Little-endian primitives shared by the parameter container and snapshots.
void put_u32(std::ostream& os, uint32_t v);
void put_u64(std::ostream& os, uint64_t v);
void put_i64(std::ostream& os, int64_t v);
void put_f64(std::ostream& os, double v);
void put_str(std::ostream& os, const std::string& s);
uint32_t get_u32(std::istream& is);
uint64_t get_u64(std::istream& is);
int64_t get_i64(std::istream& is);
double get_f64(std::istream& is);
std::string get_str(std::istream& is);

// One named ParamSet inside a container file.
struct Section {
  std::string name;
  net::ParamSet params;
};

// Container layout: 8-byte magic "URLBPS01", u32 section count, then per
// section: name, u32 entry count, and per entry (name, i32 rows, i32 cols,
// row-major f64 values). All integers and reals little-endian.
void write_container(std::ostream& os, const std::vector<Section>& sections);
std::vector<Section> read_container(std::istream& is);

void save_container(const std::string& path, const std::vector<Section>& sections);
std::vector<Section> load_container(const std::string& path);

void write_paramset(std::ostream& os, const net::ParamSet& p);
net::ParamSet read_paramset(std::istream& is);

}  // namespace urlb::ser

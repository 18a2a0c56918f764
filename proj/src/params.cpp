#include "siamman/params.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace siamman {

namespace {
void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("checkpoint: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
}  // namespace

Param& ParamStore::add(const std::string& name, Tensor init, ParamGroup group) {
  if (index_.count(name)) throw std::logic_error("duplicate parameter name: " + name);
  index_[name] = params_.size();
  Param p;
  p.name = name;
  p.velocity = Tensor(init.shape);
  p.value = std::move(init);
  p.group = group;
  params_.push_back(std::move(p));
  return params_.back();
}

Param& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return params_[it->second];
}

const Param& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return params_[it->second];
}

bool ParamStore::has(const std::string& name) const { return index_.count(name) > 0; }

void ParamStore::zero_velocities() {
  for (auto& p : params_) p.velocity = Tensor(p.value.shape);
}

void ParamStore::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for write: " + path);
  os.write("SMC1", 4);
  write_u64(os, params_.size());
  for (const auto& p : params_) {
    write_u64(os, p.name.size());
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_tensor(os, p.value);
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

void ParamStore::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint for read: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SMC1", 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const std::uint64_t count = read_u64(is);
  if (count != params_.size())
    throw std::runtime_error("checkpoint: entry count mismatch in " + path);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t len = read_u64(is);
    std::string name(len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(len));
    Tensor t = read_tensor(is);
    Param& p = get(name);
    if (t.shape != p.value.shape)
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    p.value = std::move(t);
  }
  zero_velocities();
}

NodeRef ParamLeaves::operator()(Param& p) {
  auto it = leaves_.find(&p);
  if (it != leaves_.end()) return it->second;
  NodeRef n = tape_.leaf(p.value, true);
  leaves_[&p] = n;
  return n;
}

}  // namespace siamman

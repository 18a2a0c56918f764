#include "siamman/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace siamman {

namespace {
std::atomic<bool> g_checked{true};

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("tensor container: truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  write_u64(os, v);
}

double read_f64(std::istream& is) {
  std::uint64_t v = read_u64(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}
}  // namespace

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
  data.assign(shape_product(shape), fill);
}

Tensor Tensor::from(std::vector<int> s, std::vector<double> values) {
  if (shape_product(s) != values.size())
    throw std::invalid_argument("Tensor::from: data length " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(s));
  Tensor t;
  t.shape = std::move(s);
  t.data = std::move(values);
  return t;
}

Tensor Tensor::scalar(double v) { return Tensor::from({1}, {v}); }

double Tensor::scalar_value() const {
  if (data.size() != 1) throw std::invalid_argument("scalar_value on non-scalar tensor " + shape_str(shape));
  return data[0];
}

std::size_t shape_product(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("non-positive dimension in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

bool checked_mode() { return g_checked.load(std::memory_order_relaxed); }
void set_checked_mode(bool on) { g_checked.store(on, std::memory_order_relaxed); }

void require_finite(const Tensor& t, const char* where) {
  if (!checked_mode()) return;
  for (double v : t.data) {
    if (!std::isfinite(v))
      throw std::invalid_argument(std::string(where) + ": non-finite value in tensor " + shape_str(t.shape));
  }
}

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write("SMT1", 4);
  write_u64(os, static_cast<std::uint64_t>(t.shape.size()));
  for (int d : t.shape) write_u64(os, static_cast<std::uint64_t>(d));
  for (double v : t.data) write_f64(os, v);
}

Tensor read_tensor(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SMT1", 4) != 0)
    throw std::runtime_error("tensor container: bad magic");
  std::uint64_t rank = read_u64(is);
  if (rank > 8) throw std::runtime_error("tensor container: implausible rank");
  std::vector<int> shape(rank);
  for (auto& d : shape) {
    std::uint64_t v = read_u64(is);
    if (v == 0 || v > (1u << 30)) throw std::runtime_error("tensor container: bad dimension");
    d = static_cast<int>(v);
  }
  Tensor t(shape);
  for (auto& v : t.data) v = read_f64(is);
  if (!is) throw std::runtime_error("tensor container: truncated payload");
  return t;
}

void save_tensor_file(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  write_tensor(os, t);
}

Tensor load_tensor_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for read: " + path);
  return read_tensor(is);
}

}  // namespace siamman

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace siamman {

// Row-major dense tensor of doubles. Shapes stay small at desk scale, so all
// bookkeeping is plain vectors; no strides, no views, no broadcasting.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, double fill = 0.0);
  static Tensor from(std::vector<int> s, std::vector<double> values);
  static Tensor scalar(double v);

  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  double scalar_value() const;

  std::size_t idx2(int i, int j) const {
    return static_cast<std::size_t>(i) * shape[1] + j;
  }
  std::size_t idx3(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x;
  }
  std::size_t idx4(int o, int c, int y, int x) const {
    return ((static_cast<std::size_t>(o) * shape[1] + c) * shape[2] + y) * shape[3] + x;
  }

  double& at2(int i, int j) { return data[idx2(i, j)]; }
  double at2(int i, int j) const { return data[idx2(i, j)]; }
  double& at3(int c, int y, int x) { return data[idx3(c, y, x)]; }
  double at3(int c, int y, int x) const { return data[idx3(c, y, x)]; }
  double& at4(int o, int c, int y, int x) { return data[idx4(o, c, y, x)]; }
  double at4(int o, int c, int y, int x) const { return data[idx4(o, c, y, x)]; }
};

std::size_t shape_product(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Checked mode validates finiteness at op boundaries; fast mode skips it.
bool checked_mode();
void set_checked_mode(bool on);
void require_finite(const Tensor& t, const char* where);

// Flat binary container: magic "SMT1", rank and dims as little-endian u64,
// payload as little-endian IEEE f64. Used for checkpoints and golden files.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);
void save_tensor_file(const std::string& path, const Tensor& t);
Tensor load_tensor_file(const std::string& path);

}  // namespace siamman

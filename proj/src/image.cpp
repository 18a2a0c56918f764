#include "siamman/image.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace siamman {

Tensor read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open frame: " + path);
  std::string magic;
  is >> magic;
  if (magic != "P6") throw std::runtime_error("not a binary PPM: " + path);
  auto next_int = [&]() {
    int v;
    // skip whitespace and comment lines
    while (true) {
      is >> std::ws;
      if (is.peek() == '#') {
        std::string line;
        std::getline(is, line);
        continue;
      }
      break;
    }
    if (!(is >> v)) throw std::runtime_error("bad PPM header: " + path);
    return v;
  };
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  if (w < 1 || h < 1 || maxval != 255) throw std::runtime_error("unsupported PPM: " + path);
  is.get();  // single whitespace after maxval
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!is) throw std::runtime_error("truncated PPM payload: " + path);
  Tensor img({3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at3(c, y, x) = raw[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0;
  return img;
}

void write_ppm(const std::string& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3)
    throw std::invalid_argument("write_ppm: image must be [3,H,W]");
  const int h = image.dim(1), w = image.dim(2);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open frame for write: " + path);
  os << "P6\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(image.at3(c, y, x), 0.0, 1.0);
        raw[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
  os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!os) throw std::runtime_error("frame write failed: " + path);
}

std::vector<std::string> list_sequence_frames(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error("not a sequence directory: " + dir);
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ppm") out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

std::array<double, 3> channel_means(const Tensor& image) {
  std::array<double, 3> m{0, 0, 0};
  const std::size_t hw = image.data.size() / 3;
  for (int c = 0; c < 3; ++c) {
    double acc = 0;
    for (std::size_t i = 0; i < hw; ++i) acc += image.data[static_cast<std::size_t>(c) * hw + i];
    m[static_cast<std::size_t>(c)] = acc / static_cast<double>(hw);
  }
  return m;
}

Tensor crop_resize(const Tensor& image, double cx, double cy, double side, int out_size,
                   const std::array<double, 3>& pad) {
  if (side <= 0 || out_size < 1) throw std::invalid_argument("crop_resize: bad crop geometry");
  const int h = image.dim(1), w = image.dim(2);
  Tensor out({3, out_size, out_size});
  const double x0 = cx - side / 2.0;
  const double y0 = cy - side / 2.0;
  const double step = out_size > 1 ? side / (out_size - 1) : 0.0;
  auto sample = [&](int c, double sy, double sx) -> double {
    if (sy < 0 || sy > h - 1 || sx < 0 || sx > w - 1) return pad[static_cast<std::size_t>(c)];
    const int iy = static_cast<int>(sy), ix = static_cast<int>(sx);
    const int iy1 = std::min(iy + 1, h - 1), ix1 = std::min(ix + 1, w - 1);
    const double fy = sy - iy, fx = sx - ix;
    const double a = image.at3(c, iy, ix), b = image.at3(c, iy, ix1);
    const double d = image.at3(c, iy1, ix), e = image.at3(c, iy1, ix1);
    const double top = a + fx * (b - a);
    const double bot = d + fx * (e - d);
    return top + fy * (bot - top);
  };
  for (int c = 0; c < 3; ++c)
    for (int oy = 0; oy < out_size; ++oy)
      for (int ox = 0; ox < out_size; ++ox)
        out.at3(c, oy, ox) = sample(c, y0 + oy * step, x0 + ox * step);
  return out;
}

double context_side(const Box& b) {
  const double p = (b.w + b.h) / 2.0;
  return std::sqrt((b.w + p) * (b.h + p));
}

}  // namespace siamman

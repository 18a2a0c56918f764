#include "siamman/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace siamman::ops {

namespace k = siamman::kernels;

namespace {

void want_rank(const NodeRef& n, int r, const char* op) {
  if (n->value.rank() != r)
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(r) +
                                ", got " + shape_str(n->value.shape));
}

struct AxisSplit {
  std::size_t outer, n, inner;
};

AxisSplit split_axis(const std::vector<int>& shape, int axis) {
  AxisSplit s{1, 0, 1};
  for (int i = 0; i < static_cast<int>(shape.size()); ++i) {
    if (i < axis) s.outer *= static_cast<std::size_t>(shape[i]);
    else if (i == axis) s.n = static_cast<std::size_t>(shape[i]);
    else s.inner *= static_cast<std::size_t>(shape[i]);
  }
  return s;
}

}  // namespace

NodeRef conv2d(Tape& t, NodeRef input, NodeRef kernel, int stride, int dilation, int padding) {
  k::ConvSpec spec{stride, dilation, padding};
  Tensor out = k::conv2d_forward(input->value, kernel->value, spec);
  const int in_h = input->value.dim(1), in_w = input->value.dim(2);
  const int kh = kernel->value.dim(2), kw = kernel->value.dim(3);
  return t.record(std::move(out), [input, kernel, spec, in_h, in_w, kh, kw](const Tensor& g) {
    accumulate_grad(*input, k::conv2d_backward_input(g, kernel->value, spec, in_h, in_w));
    accumulate_grad(*kernel, k::conv2d_backward_kernel(g, input->value, spec, kh, kw));
  });
}

NodeRef xcorr_depthwise(Tape& t, NodeRef detection, NodeRef templ) {
  Tensor out = k::xcorr_forward(detection->value, templ->value);
  const int dh = detection->value.dim(1), dw = detection->value.dim(2);
  const int th = templ->value.dim(1), tw = templ->value.dim(2);
  return t.record(std::move(out), [detection, templ, dh, dw, th, tw](const Tensor& g) {
    accumulate_grad(*detection, k::xcorr_backward_detection(g, templ->value, dh, dw));
    accumulate_grad(*templ, k::xcorr_backward_template(g, detection->value, th, tw));
  });
}

Tensor softmax_tensor(const Tensor& x, int axis) {
  if (axis < 0 || axis >= x.rank())
    throw std::invalid_argument("softmax: invalid axis " + std::to_string(axis) + " for shape " +
                                shape_str(x.shape));
  require_finite(x, "softmax input");
  const AxisSplit s = split_axis(x.shape, axis);
  Tensor out(x.shape);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.n * s.inner + in;
      double mx = x.data[base];
      for (std::size_t j = 1; j < s.n; ++j) mx = std::max(mx, x.data[base + j * s.inner]);
      double sum = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) {
        const double e = std::exp(x.data[base + j * s.inner] - mx);
        out.data[base + j * s.inner] = e;
        sum += e;
      }
      for (std::size_t j = 0; j < s.n; ++j) out.data[base + j * s.inner] /= sum;
    }
  }
  return out;
}

NodeRef softmax(Tape& t, NodeRef x, int axis) {
  Tensor out = softmax_tensor(x->value, axis);
  const AxisSplit s = split_axis(x->value.shape, axis);
  // capture the softmax output by value for the jacobian product
  Tensor sm = out;
  return t.record(std::move(out), [x, s, sm](const Tensor& g) {
    Tensor gx(x->value.shape);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.n * s.inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < s.n; ++j)
          dot += g.data[base + j * s.inner] * sm.data[base + j * s.inner];
        for (std::size_t j = 0; j < s.n; ++j) {
          const std::size_t idx = base + j * s.inner;
          gx.data[idx] = sm.data[idx] * (g.data[idx] - dot);
        }
      }
    }
    accumulate_grad(*x, gx);
  });
}

namespace {
struct BilinearTap {
  int y0, y1, x0, x1;
  double fy, fx;
};

BilinearTap tap_at(int oy, int ox, int in_h, int in_w, double sy, double sx) {
  BilinearTap t;
  const double src_y = oy * sy;
  const double src_x = ox * sx;
  t.y0 = std::min(static_cast<int>(src_y), in_h - 1);
  t.x0 = std::min(static_cast<int>(src_x), in_w - 1);
  t.y1 = std::min(t.y0 + 1, in_h - 1);
  t.x1 = std::min(t.x0 + 1, in_w - 1);
  t.fy = src_y - t.y0;
  t.fx = src_x - t.x0;
  return t;
}
}  // namespace

NodeRef resize_bilinear(Tape& t, NodeRef x, int new_h, int new_w) {
  want_rank(x, 3, "resize_bilinear");
  if (new_h < 1 || new_w < 1) throw std::invalid_argument("resize_bilinear: zero target size");
  require_finite(x->value, "resize_bilinear input");
  const int c_n = x->value.dim(0), in_h = x->value.dim(1), in_w = x->value.dim(2);
  if (new_h == in_h && new_w == in_w) {
    // identity resize is exact by contract
    Tensor out = x->value;
    return t.record(std::move(out), [x](const Tensor& g) { accumulate_grad(*x, g); });
  }
  // corner-aligned sampling; nested lerps keep constants exact and clamp
  // interpolated values inside the input range
  const double sy = new_h > 1 ? static_cast<double>(in_h - 1) / (new_h - 1) : 0.0;
  const double sx = new_w > 1 ? static_cast<double>(in_w - 1) / (new_w - 1) : 0.0;
  Tensor out({c_n, new_h, new_w});
  for (int c = 0; c < c_n; ++c)
    for (int oy = 0; oy < new_h; ++oy)
      for (int ox = 0; ox < new_w; ++ox) {
        const BilinearTap tp = tap_at(oy, ox, in_h, in_w, sy, sx);
        const double a = x->value.at3(c, tp.y0, tp.x0);
        const double b = x->value.at3(c, tp.y0, tp.x1);
        const double d = x->value.at3(c, tp.y1, tp.x0);
        const double e = x->value.at3(c, tp.y1, tp.x1);
        const double top = a + tp.fx * (b - a);
        const double bot = d + tp.fx * (e - d);
        out.at3(c, oy, ox) = top + tp.fy * (bot - top);
      }
  return t.record(std::move(out), [x, c_n, in_h, in_w, new_h, new_w, sy, sx](const Tensor& g) {
    Tensor gx(x->value.shape);
    for (int c = 0; c < c_n; ++c)
      for (int oy = 0; oy < new_h; ++oy)
        for (int ox = 0; ox < new_w; ++ox) {
          const BilinearTap tp = tap_at(oy, ox, in_h, in_w, sy, sx);
          const double gv = g.at3(c, oy, ox);
          gx.at3(c, tp.y0, tp.x0) += gv * (1 - tp.fy) * (1 - tp.fx);
          gx.at3(c, tp.y0, tp.x1) += gv * (1 - tp.fy) * tp.fx;
          gx.at3(c, tp.y1, tp.x0) += gv * tp.fy * (1 - tp.fx);
          gx.at3(c, tp.y1, tp.x1) += gv * tp.fy * tp.fx;
        }
    accumulate_grad(*x, gx);
  });
}

NodeRef global_avg_pool(Tape& t, NodeRef x) {
  want_rank(x, 3, "global_avg_pool");
  require_finite(x->value, "global_avg_pool input");
  const int c_n = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  const double inv = 1.0 / (static_cast<double>(h) * w);
  Tensor out({c_n});
  for (int c = 0; c < c_n; ++c) {
    double acc = 0.0;
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) acc += x->value.at3(c, y, xx);
    out.data[static_cast<std::size_t>(c)] = acc * inv;
  }
  return t.record(std::move(out), [x, c_n, h, w, inv](const Tensor& g) {
    Tensor gx(x->value.shape);
    for (int c = 0; c < c_n; ++c) {
      const double gv = g.data[static_cast<std::size_t>(c)] * inv;
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) gx.at3(c, y, xx) = gv;
    }
    accumulate_grad(*x, gx);
  });
}

NodeRef linear(Tape& t, NodeRef v, NodeRef weight, NodeRef bias) {
  want_rank(v, 1, "linear");
  want_rank(weight, 2, "linear weight");
  want_rank(bias, 1, "linear bias");
  const int m = weight->value.dim(0), n = weight->value.dim(1);
  if (v->value.dim(0) != n || bias->value.dim(0) != m)
    throw std::invalid_argument("linear: dimension mismatch v" + shape_str(v->value.shape) +
                                " w" + shape_str(weight->value.shape) + " b" +
                                shape_str(bias->value.shape));
  require_finite(v->value, "linear input");
  Tensor out({m});
  for (int i = 0; i < m; ++i) {
    double acc = bias->value.data[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j) acc += weight->value.at2(i, j) * v->value.data[static_cast<std::size_t>(j)];
    out.data[static_cast<std::size_t>(i)] = acc;
  }
  return t.record(std::move(out), [v, weight, bias, m, n](const Tensor& g) {
    Tensor gv({n});
    Tensor gw({m, n});
    for (int i = 0; i < m; ++i) {
      const double gi = g.data[static_cast<std::size_t>(i)];
      for (int j = 0; j < n; ++j) {
        gv.data[static_cast<std::size_t>(j)] += gi * weight->value.at2(i, j);
        gw.at2(i, j) = gi * v->value.data[static_cast<std::size_t>(j)];
      }
    }
    accumulate_grad(*v, gv);
    accumulate_grad(*weight, gw);
    accumulate_grad(*bias, g);
  });
}

NodeRef relu(Tape& t, NodeRef x) {
  Tensor out = x->value;
  for (auto& v : out.data) v = v > 0 ? v : 0.0;
  return t.record(std::move(out), [x](const Tensor& g) {
    Tensor gx(x->value.shape);
    for (std::size_t i = 0; i < g.data.size(); ++i)
      gx.data[i] = x->value.data[i] > 0 ? g.data[i] : 0.0;
    accumulate_grad(*x, gx);
  });
}

NodeRef sigmoid(Tape& t, NodeRef x) {
  Tensor out = x->value;
  for (auto& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  Tensor saved = out;
  return t.record(std::move(out), [x, saved](const Tensor& g) {
    Tensor gx(x->value.shape);
    for (std::size_t i = 0; i < g.data.size(); ++i)
      gx.data[i] = g.data[i] * saved.data[i] * (1.0 - saved.data[i]);
    accumulate_grad(*x, gx);
  });
}

NodeRef add(Tape& t, NodeRef a, NodeRef b) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument("add: shape mismatch " + shape_str(a->value.shape) + " vs " +
                                shape_str(b->value.shape));
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->value.data[i];
  return t.record(std::move(out), [a, b](const Tensor& g) {
    accumulate_grad(*a, g);
    accumulate_grad(*b, g);
  });
}

NodeRef mul(Tape& t, NodeRef a, NodeRef b) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument("mul: shape mismatch " + shape_str(a->value.shape) + " vs " +
                                shape_str(b->value.shape));
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->value.data[i];
  return t.record(std::move(out), [a, b](const Tensor& g) {
    Tensor ga(a->value.shape), gb(b->value.shape);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      ga.data[i] = g.data[i] * b->value.data[i];
      gb.data[i] = g.data[i] * a->value.data[i];
    }
    accumulate_grad(*a, ga);
    accumulate_grad(*b, gb);
  });
}

NodeRef scale(Tape& t, NodeRef x, double c) {
  Tensor out = x->value;
  for (auto& v : out.data) v *= c;
  return t.record(std::move(out), [x, c](const Tensor& g) {
    Tensor gx = g;
    for (auto& v : gx.data) v *= c;
    accumulate_grad(*x, gx);
  });
}

NodeRef add_channel_vec(Tape& t, NodeRef x, NodeRef v) {
  want_rank(x, 3, "add_channel_vec");
  want_rank(v, 1, "add_channel_vec vector");
  const int c_n = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  if (v->value.dim(0) != c_n)
    throw std::invalid_argument("add_channel_vec: channel mismatch");
  Tensor out = x->value;
  for (int c = 0; c < c_n; ++c) {
    const double b = v->value.data[static_cast<std::size_t>(c)];
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) out.at3(c, y, xx) += b;
  }
  return t.record(std::move(out), [x, v, c_n, h, w](const Tensor& g) {
    Tensor gv({c_n});
    for (int c = 0; c < c_n; ++c) {
      double acc = 0.0;
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) acc += g.at3(c, y, xx);
      gv.data[static_cast<std::size_t>(c)] = acc;
    }
    accumulate_grad(*x, g);
    accumulate_grad(*v, gv);
  });
}

NodeRef concat_channels(Tape& t, const std::vector<NodeRef>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_channels: empty input list");
  const int h = xs[0]->value.dim(1), w = xs[0]->value.dim(2);
  int c_total = 0;
  for (const auto& x : xs) {
    want_rank(x, 3, "concat_channels");
    if (x->value.dim(1) != h || x->value.dim(2) != w)
      throw std::invalid_argument("concat_channels: spatial mismatch");
    c_total += x->value.dim(0);
  }
  Tensor out({c_total, h, w});
  std::size_t off = 0;
  for (const auto& x : xs) {
    std::copy(x->value.data.begin(), x->value.data.end(), out.data.begin() + off);
    off += x->value.data.size();
  }
  return t.record(std::move(out), [xs](const Tensor& g) {
    std::size_t off = 0;
    for (const auto& x : xs) {
      Tensor gx(x->value.shape);
      std::copy(g.data.begin() + off, g.data.begin() + off + gx.data.size(), gx.data.begin());
      off += gx.data.size();
      accumulate_grad(*x, gx);
    }
  });
}

NodeRef crop_center(Tape& t, NodeRef x, int out_h, int out_w) {
  want_rank(x, 3, "crop_center");
  const int c_n = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  if (out_h > h || out_w > w || out_h < 1 || out_w < 1)
    throw std::invalid_argument("crop_center: crop larger than input");
  const int oy = (h - out_h) / 2, ox = (w - out_w) / 2;
  Tensor out({c_n, out_h, out_w});
  for (int c = 0; c < c_n; ++c)
    for (int y = 0; y < out_h; ++y)
      for (int xx = 0; xx < out_w; ++xx) out.at3(c, y, xx) = x->value.at3(c, y + oy, xx + ox);
  return t.record(std::move(out), [x, c_n, out_h, out_w, oy, ox](const Tensor& g) {
    Tensor gx(x->value.shape);
    for (int c = 0; c < c_n; ++c)
      for (int y = 0; y < out_h; ++y)
        for (int xx = 0; xx < out_w; ++xx) gx.at3(c, y + oy, xx + ox) = g.at3(c, y, xx);
    accumulate_grad(*x, gx);
  });
}

NodeRef gc_spatial_pool(Tape& t, NodeRef x, NodeRef logits) {
  want_rank(x, 3, "gc_spatial_pool");
  want_rank(logits, 3, "gc_spatial_pool logits");
  const int c_n = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  if (logits->value.dim(0) != 1 || logits->value.dim(1) != h || logits->value.dim(2) != w)
    throw std::invalid_argument("gc_spatial_pool: logits must be [1,H,W] matching x");
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  // softmax over the flattened spatial grid
  std::vector<double> attn(hw);
  {
    double mx = logits->value.data[0];
    for (std::size_t p = 1; p < hw; ++p) mx = std::max(mx, logits->value.data[p]);
    double sum = 0.0;
    for (std::size_t p = 0; p < hw; ++p) {
      attn[p] = std::exp(logits->value.data[p] - mx);
      sum += attn[p];
    }
    for (std::size_t p = 0; p < hw; ++p) attn[p] /= sum;
  }
  Tensor out({c_n});
  for (int c = 0; c < c_n; ++c) {
    double acc = 0.0;
    for (std::size_t p = 0; p < hw; ++p) acc += x->value.data[c * hw + p] * attn[p];
    out.data[static_cast<std::size_t>(c)] = acc;
  }
  return t.record(std::move(out), [x, logits, attn, c_n, hw](const Tensor& g) {
    Tensor gx(x->value.shape);
    Tensor gl(logits->value.shape);
    // s[p] = sum_c x[c,p] g[c]; dlogits = attn * (s - <attn,s>)
    std::vector<double> s(hw, 0.0);
    for (int c = 0; c < c_n; ++c) {
      const double gc = g.data[static_cast<std::size_t>(c)];
      for (std::size_t p = 0; p < hw; ++p) {
        gx.data[c * hw + p] = attn[p] * gc;
        s[p] += x->value.data[c * hw + p] * gc;
      }
    }
    double dot = 0.0;
    for (std::size_t p = 0; p < hw; ++p) dot += attn[p] * s[p];
    for (std::size_t p = 0; p < hw; ++p) gl.data[p] = attn[p] * (s[p] - dot);
    accumulate_grad(*x, gx);
    accumulate_grad(*logits, gl);
  });
}

NodeRef layer_norm(Tape& t, NodeRef v, double eps) {
  want_rank(v, 1, "layer_norm");
  const int n = v->value.dim(0);
  const double inv_n = 1.0 / n;
  double mean = 0.0;
  for (double d : v->value.data) mean += d;
  mean *= inv_n;
  double var = 0.0;
  for (double d : v->value.data) var += (d - mean) * (d - mean);
  var *= inv_n;
  const double inv_std = 1.0 / std::sqrt(var + eps);
  Tensor out({n});
  for (int i = 0; i < n; ++i)
    out.data[static_cast<std::size_t>(i)] = (v->value.data[static_cast<std::size_t>(i)] - mean) * inv_std;
  Tensor y = out;
  return t.record(std::move(out), [v, y, n, inv_n, inv_std](const Tensor& g) {
    double gsum = 0.0, gysum = 0.0;
    for (int i = 0; i < n; ++i) {
      gsum += g.data[static_cast<std::size_t>(i)];
      gysum += g.data[static_cast<std::size_t>(i)] * y.data[static_cast<std::size_t>(i)];
    }
    Tensor gv({n});
    for (int i = 0; i < n; ++i) {
      const std::size_t ii = static_cast<std::size_t>(i);
      gv.data[ii] = inv_std * (g.data[ii] - inv_n * gsum - y.data[ii] * inv_n * gysum);
    }
    accumulate_grad(*v, gv);
  });
}

NodeRef scale_by_entry(Tape& t, NodeRef x, NodeRef gamma, int index) {
  want_rank(gamma, 1, "scale_by_entry gamma");
  if (index < 0 || index >= gamma->value.dim(0))
    throw std::invalid_argument("scale_by_entry: index out of range");
  const double gval = gamma->value.data[static_cast<std::size_t>(index)];
  Tensor out = x->value;
  for (auto& v : out.data) v *= gval;
  return t.record(std::move(out), [x, gamma, index, gval](const Tensor& g) {
    Tensor gx = g;
    for (auto& v : gx.data) v *= gval;
    double acc = 0.0;
    for (std::size_t i = 0; i < g.data.size(); ++i) acc += g.data[i] * x->value.data[i];
    Tensor gg(gamma->value.shape);
    gg.data[static_cast<std::size_t>(index)] = acc;
    accumulate_grad(*x, gx);
    accumulate_grad(*gamma, gg);
  });
}

NodeRef sum_all(Tape& t, NodeRef x) {
  double acc = 0.0;
  for (double v : x->value.data) acc += v;
  return t.record(Tensor::scalar(acc), [x](const Tensor& g) {
    Tensor gx(x->value.shape, g.data[0]);
    accumulate_grad(*x, gx);
  });
}

}  // namespace siamman::ops

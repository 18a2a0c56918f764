// Per-slice kernel bodies shared by the serial and OpenMP flavors. Each
// function computes one independent output slice, so parallelizing the slice
// loop cannot change accumulation order and both backends stay bitwise equal.
#pragma once

#include "siamman/kernels.hpp"

namespace siamman::kernels::detail {

// output channel co of a standard (cross-correlation style) convolution
inline void conv2d_fwd_slice(int co, const Tensor& in, const Tensor& k, const ConvSpec& s,
                             int out_h, int out_w, Tensor& out) {
  const int ci_n = in.dim(0), in_h = in.dim(1), in_w = in.dim(2);
  const int kh = k.dim(2), kw = k.dim(3);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      double acc = 0.0;
      for (int ci = 0; ci < ci_n; ++ci) {
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy * s.stride - s.padding + ky * s.dilation;
          if (iy < 0 || iy >= in_h) continue;
          for (int kx = 0; kx < kw; ++kx) {
            const int ix = ox * s.stride - s.padding + kx * s.dilation;
            if (ix < 0 || ix >= in_w) continue;
            acc += in.at3(ci, iy, ix) * k.at4(co, ci, ky, kx);
          }
        }
      }
      out.at3(co, oy, ox) = acc;
    }
  }
}

// input-gradient channel ci
inline void conv2d_bwd_input_slice(int ci, const Tensor& g, const Tensor& k, const ConvSpec& s,
                                   Tensor& gin) {
  const int co_n = g.dim(0), out_h = g.dim(1), out_w = g.dim(2);
  const int kh = k.dim(2), kw = k.dim(3);
  const int in_h = gin.dim(1), in_w = gin.dim(2);
  for (int co = 0; co < co_n; ++co) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        const double gv = g.at3(co, oy, ox);
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy * s.stride - s.padding + ky * s.dilation;
          if (iy < 0 || iy >= in_h) continue;
          for (int kx = 0; kx < kw; ++kx) {
            const int ix = ox * s.stride - s.padding + kx * s.dilation;
            if (ix < 0 || ix >= in_w) continue;
            gin.at3(ci, iy, ix) += gv * k.at4(co, ci, ky, kx);
          }
        }
      }
    }
  }
}

// kernel-gradient slice co
inline void conv2d_bwd_kernel_slice(int co, const Tensor& g, const Tensor& in, const ConvSpec& s,
                                    Tensor& gk) {
  const int out_h = g.dim(1), out_w = g.dim(2);
  const int ci_n = in.dim(0), in_h = in.dim(1), in_w = in.dim(2);
  const int kh = gk.dim(2), kw = gk.dim(3);
  for (int ci = 0; ci < ci_n; ++ci) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        double acc = 0.0;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * s.stride - s.padding + ky * s.dilation;
          if (iy < 0 || iy >= in_h) continue;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * s.stride - s.padding + kx * s.dilation;
            if (ix < 0 || ix >= in_w) continue;
            acc += g.at3(co, oy, ox) * in.at3(ci, iy, ix);
          }
        }
        gk.at4(co, ci, ky, kx) = acc;
      }
    }
  }
}

// channel c of the depth-wise valid correlation
inline void xcorr_fwd_slice(int c, const Tensor& det, const Tensor& tm, Tensor& out) {
  const int th = tm.dim(1), tw = tm.dim(2);
  const int out_h = out.dim(1), out_w = out.dim(2);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      double acc = 0.0;
      for (int ky = 0; ky < th; ++ky)
        for (int kx = 0; kx < tw; ++kx) acc += det.at3(c, oy + ky, ox + kx) * tm.at3(c, ky, kx);
      out.at3(c, oy, ox) = acc;
    }
  }
}

inline void xcorr_bwd_det_slice(int c, const Tensor& g, const Tensor& tm, Tensor& gdet) {
  const int th = tm.dim(1), tw = tm.dim(2);
  const int out_h = g.dim(1), out_w = g.dim(2);
  for (int oy = 0; oy < out_h; ++oy)
    for (int ox = 0; ox < out_w; ++ox) {
      const double gv = g.at3(c, oy, ox);
      for (int ky = 0; ky < th; ++ky)
        for (int kx = 0; kx < tw; ++kx) gdet.at3(c, oy + ky, ox + kx) += gv * tm.at3(c, ky, kx);
    }
}

inline void xcorr_bwd_tmpl_slice(int c, const Tensor& g, const Tensor& det, Tensor& gtm) {
  const int th = gtm.dim(1), tw = gtm.dim(2);
  const int out_h = g.dim(1), out_w = g.dim(2);
  for (int ky = 0; ky < th; ++ky)
    for (int kx = 0; kx < tw; ++kx) {
      double acc = 0.0;
      for (int oy = 0; oy < out_h; ++oy)
        for (int ox = 0; ox < out_w; ++ox) acc += g.at3(c, oy, ox) * det.at3(c, oy + ky, ox + kx);
      gtm.at3(c, ky, kx) = acc;
    }
}

}  // namespace siamman::kernels::detail

#include "siamman/kernels.hpp"

#include <atomic>
#include <stdexcept>
#include <string>

namespace siamman::kernels {

namespace {
std::atomic<Backend> g_backend{
#ifdef SIAMMAN_HAS_OPENMP
    Backend::parallel
#else
    Backend::serial
#endif
};

void check_conv_args(const Tensor& input, const Tensor& kernel, const ConvSpec& s) {
  if (input.rank() != 3 || kernel.rank() != 4)
    throw std::invalid_argument("conv2d: input must be [C,H,W], kernel [Co,Ci,kh,kw]");
  if (input.dim(0) != kernel.dim(1))
    throw std::invalid_argument("conv2d: channel mismatch, input C=" + std::to_string(input.dim(0)) +
                                " kernel Ci=" + std::to_string(kernel.dim(1)));
  if (s.stride < 1 || s.dilation < 1 || s.padding < 0)
    throw std::invalid_argument("conv2d: stride/dilation must be >=1, padding >=0");
  if (conv_out_dim(input.dim(1), kernel.dim(2), s.stride, s.dilation, s.padding) < 1 ||
      conv_out_dim(input.dim(2), kernel.dim(3), s.stride, s.dilation, s.padding) < 1)
    throw std::invalid_argument("conv2d: no valid kernel placement for input " +
                                shape_str(input.shape) + " kernel " + shape_str(kernel.shape));
  require_finite(input, "conv2d input");
  require_finite(kernel, "conv2d kernel");
}

void check_xcorr_args(const Tensor& detection, const Tensor& templ) {
  if (detection.rank() != 3 || templ.rank() != 3)
    throw std::invalid_argument("xcorr_depthwise: operands must be [C,H,W]");
  if (detection.dim(0) != templ.dim(0))
    throw std::invalid_argument("xcorr_depthwise: channel mismatch");
  if (templ.dim(1) > detection.dim(1) || templ.dim(2) > detection.dim(2))
    throw std::invalid_argument("xcorr_depthwise: template larger than detection");
  require_finite(detection, "xcorr detection");
  require_finite(templ, "xcorr template");
}
}  // namespace

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (b == Backend::parallel && !parallel_available()) b = Backend::serial;
  g_backend.store(b, std::memory_order_relaxed);
}

bool parallel_available() {
#ifdef SIAMMAN_HAS_OPENMP
  return true;
#else
  return false;
#endif
}

int conv_out_dim(int in, int k, int stride, int dilation, int padding) {
  return (in + 2 * padding - dilation * (k - 1) - 1) / stride + 1;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const ConvSpec& s) {
  check_conv_args(input, kernel, s);
  return active_backend() == Backend::parallel ? par::conv2d_forward(input, kernel, s)
                                               : serial::conv2d_forward(input, kernel, s);
}

Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& kernel, const ConvSpec& s,
                             int in_h, int in_w) {
  return active_backend() == Backend::parallel
             ? par::conv2d_backward_input(grad_out, kernel, s, in_h, in_w)
             : serial::conv2d_backward_input(grad_out, kernel, s, in_h, in_w);
}

Tensor conv2d_backward_kernel(const Tensor& grad_out, const Tensor& input, const ConvSpec& s,
                              int kh, int kw) {
  return active_backend() == Backend::parallel
             ? par::conv2d_backward_kernel(grad_out, input, s, kh, kw)
             : serial::conv2d_backward_kernel(grad_out, input, s, kh, kw);
}

Tensor xcorr_forward(const Tensor& detection, const Tensor& templ) {
  check_xcorr_args(detection, templ);
  return active_backend() == Backend::parallel ? par::xcorr_forward(detection, templ)
                                               : serial::xcorr_forward(detection, templ);
}

Tensor xcorr_backward_detection(const Tensor& grad_out, const Tensor& templ, int det_h, int det_w) {
  return active_backend() == Backend::parallel
             ? par::xcorr_backward_detection(grad_out, templ, det_h, det_w)
             : serial::xcorr_backward_detection(grad_out, templ, det_h, det_w);
}

Tensor xcorr_backward_template(const Tensor& grad_out, const Tensor& detection, int t_h, int t_w) {
  return active_backend() == Backend::parallel
             ? par::xcorr_backward_template(grad_out, detection, t_h, t_w)
             : serial::xcorr_backward_template(grad_out, detection, t_h, t_w);
}

}  // namespace siamman::kernels

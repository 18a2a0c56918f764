#pragma once

#include "siamman/tensor.hpp"

namespace siamman::kernels {

struct ConvSpec {
  int stride = 1;
  int dilation = 1;
  int padding = 0;
};

// The convolution and correlation kernels dominate training time. Each has a
// serial reference flavor and an OpenMP flavor whose per-element arithmetic
// and accumulation order are identical, so the two backends produce bitwise
// equal results; the serial flavor is the oracle in tests and the benchmark
// baseline. Dispatchers pick the active backend.
enum class Backend { serial, parallel };
Backend active_backend();
void set_backend(Backend b);
bool parallel_available();

int conv_out_dim(int in, int k, int stride, int dilation, int padding);

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const ConvSpec& s);
Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& kernel, const ConvSpec& s,
                             int in_h, int in_w);
Tensor conv2d_backward_kernel(const Tensor& grad_out, const Tensor& input, const ConvSpec& s,
                              int kh, int kw);

Tensor xcorr_forward(const Tensor& detection, const Tensor& templ);
Tensor xcorr_backward_detection(const Tensor& grad_out, const Tensor& templ, int det_h, int det_w);
Tensor xcorr_backward_template(const Tensor& grad_out, const Tensor& detection, int t_h, int t_w);

namespace serial {
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const ConvSpec& s);
Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& kernel, const ConvSpec& s,
                             int in_h, int in_w);
Tensor conv2d_backward_kernel(const Tensor& grad_out, const Tensor& input, const ConvSpec& s,
                              int kh, int kw);
Tensor xcorr_forward(const Tensor& detection, const Tensor& templ);
Tensor xcorr_backward_detection(const Tensor& grad_out, const Tensor& templ, int det_h, int det_w);
Tensor xcorr_backward_template(const Tensor& grad_out, const Tensor& detection, int t_h, int t_w);
}  // namespace serial

namespace par {
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const ConvSpec& s);
Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& kernel, const ConvSpec& s,
                             int in_h, int in_w);
Tensor conv2d_backward_kernel(const Tensor& grad_out, const Tensor& input, const ConvSpec& s,
                              int kh, int kw);
Tensor xcorr_forward(const Tensor& detection, const Tensor& templ);
Tensor xcorr_backward_detection(const Tensor& grad_out, const Tensor& templ, int det_h, int det_w);
Tensor xcorr_backward_template(const Tensor& grad_out, const Tensor& detection, int t_h, int t_w);
}  // namespace par

}  // namespace siamman::kernels

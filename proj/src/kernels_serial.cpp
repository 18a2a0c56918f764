#include "kernels_impl.hpp"

namespace siamman::kernels::serial {

using namespace siamman::kernels::detail;

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const ConvSpec& s) {
  const int co_n = kernel.dim(0);
  const int out_h = conv_out_dim(input.dim(1), kernel.dim(2), s.stride, s.dilation, s.padding);
  const int out_w = conv_out_dim(input.dim(2), kernel.dim(3), s.stride, s.dilation, s.padding);
  Tensor out({co_n, out_h, out_w});
  for (int co = 0; co < co_n; ++co) conv2d_fwd_slice(co, input, kernel, s, out_h, out_w, out);
  return out;
}

Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& kernel, const ConvSpec& s,
                             int in_h, int in_w) {
  Tensor gin({kernel.dim(1), in_h, in_w});
  for (int ci = 0; ci < kernel.dim(1); ++ci) conv2d_bwd_input_slice(ci, grad_out, kernel, s, gin);
  return gin;
}

Tensor conv2d_backward_kernel(const Tensor& grad_out, const Tensor& input, const ConvSpec& s,
                              int kh, int kw) {
  Tensor gk({grad_out.dim(0), input.dim(0), kh, kw});
  for (int co = 0; co < grad_out.dim(0); ++co) conv2d_bwd_kernel_slice(co, grad_out, input, s, gk);
  return gk;
}

Tensor xcorr_forward(const Tensor& detection, const Tensor& templ) {
  const int c_n = detection.dim(0);
  Tensor out({c_n, detection.dim(1) - templ.dim(1) + 1, detection.dim(2) - templ.dim(2) + 1});
  for (int c = 0; c < c_n; ++c) xcorr_fwd_slice(c, detection, templ, out);
  return out;
}

Tensor xcorr_backward_detection(const Tensor& grad_out, const Tensor& templ, int det_h, int det_w) {
  Tensor gdet({grad_out.dim(0), det_h, det_w});
  for (int c = 0; c < grad_out.dim(0); ++c) xcorr_bwd_det_slice(c, grad_out, templ, gdet);
  return gdet;
}

Tensor xcorr_backward_template(const Tensor& grad_out, const Tensor& detection, int t_h, int t_w) {
  Tensor gtm({grad_out.dim(0), t_h, t_w});
  for (int c = 0; c < grad_out.dim(0); ++c) xcorr_bwd_tmpl_slice(c, grad_out, detection, gtm);
  return gtm;
}

}  // namespace siamman::kernels::serial

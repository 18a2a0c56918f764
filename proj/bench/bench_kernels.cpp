// Times the serial reference kernels against the OpenMP flavor on the
// shapes the tracker actually runs. Build and run:
//   cmake --build build --target bench_kernels && ./build/bench_kernels
#include <chrono>
#include <cstdio>
#include <functional>

#include "siamman/kernels.hpp"
#include "siamman/rng.hpp"

using namespace siamman;
namespace k = siamman::kernels;

namespace {

Tensor rand_t(std::vector<int> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.normal();
  return t;
}

double time_of(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps * 1e3;
}

void row(const char* name, double serial_ms, double par_ms) {
  std::printf("%-28s %10.3f %10.3f %8.2fx\n", name, serial_ms, par_ms, serial_ms / par_ms);
}

}  // namespace

int main() {
  Rng rng(1);
  std::printf("%-28s %10s %10s %8s\n", "kernel", "serial ms", "openmp ms", "speedup");
  if (!k::parallel_available())
    std::printf("(OpenMP not available; both columns run the serial flavor)\n");

  // backbone trunk conv on the search patch
  {
    Tensor in = rand_t({16, 95, 95}, rng);
    Tensor ker = rand_t({16, 16, 3, 3}, rng);
    k::ConvSpec spec{2, 1, 0};
    Tensor g = rand_t({16, 47, 47}, rng);
    row("conv 16x95x95 k3 s2 fwd",
        time_of([&] { k::serial::conv2d_forward(in, ker, spec); }, 5),
        time_of([&] { k::par::conv2d_forward(in, ker, spec); }, 5));
    row("conv 16x95x95 k3 s2 bwd_in",
        time_of([&] { k::serial::conv2d_backward_input(g, ker, spec, 95, 95); }, 5),
        time_of([&] { k::par::conv2d_backward_input(g, ker, spec, 95, 95); }, 5));
    row("conv 16x95x95 k3 s2 bwd_k",
        time_of([&] { k::serial::conv2d_backward_kernel(g, in, spec, 3, 3); }, 5),
        time_of([&] { k::par::conv2d_backward_kernel(g, in, spec, 3, 3); }, 5));
  }

  // dilated conv in the localization branch
  {
    Tensor in = rand_t({16, 23, 23}, rng);
    Tensor ker = rand_t({16, 16, 3, 3}, rng);
    k::ConvSpec spec{1, 2, 2};
    row("conv 16x23x23 k3 d2 fwd",
        time_of([&] { k::serial::conv2d_forward(in, ker, spec); }, 20),
        time_of([&] { k::par::conv2d_forward(in, ker, spec); }, 20));
  }

  // depth-wise correlation of the heads
  {
    Tensor det = rand_t({16, 23, 23}, rng);
    Tensor tm = rand_t({16, 7, 7}, rng);
    Tensor g = rand_t({16, 17, 17}, rng);
    row("xcorr 16ch 23x23*7x7 fwd",
        time_of([&] { k::serial::xcorr_forward(det, tm); }, 50),
        time_of([&] { k::par::xcorr_forward(det, tm); }, 50));
    row("xcorr bwd detection",
        time_of([&] { k::serial::xcorr_backward_detection(g, tm, 23, 23); }, 50),
        time_of([&] { k::par::xcorr_backward_detection(g, tm, 23, 23); }, 50));
    row("xcorr bwd template",
        time_of([&] { k::serial::xcorr_backward_template(g, det, 7, 7); }, 50),
        time_of([&] { k::par::xcorr_backward_template(g, det, 7, 7); }, 50));
  }

  // paper-scale channel width at the stride-8 grid
  {
    Tensor in = rand_t({32, 31, 31}, rng);
    Tensor ker = rand_t({32, 32, 3, 3}, rng);
    k::ConvSpec spec{1, 1, 1};
    row("conv 32x31x31 k3 s1 fwd",
        time_of([&] { k::serial::conv2d_forward(in, ker, spec); }, 10),
        time_of([&] { k::par::conv2d_forward(in, ker, spec); }, 10));
  }
  return 0;
}

// Times the serial reference kernels against the OpenMP variants on the
// shapes this project actually runs (backbone convs, generator convs,
// mining distance tables) and prints a speedup table.
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "reid/kernels.hpp"
#include "reid/rng.hpp"

using reid::kernels::Conv2dDims;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

std::vector<double> random_vec(size_t n, reid::Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void report(const char* name, double serial_ms, double omp_ms) {
  std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, serial_ms, omp_ms,
              serial_ms / omp_ms);
}

}  // namespace

int main() {
  reid::Rng rng(42);
  std::printf("threads available: %d\n", reid::kernels::thread_count());
  std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

  {  // backbone-sized convolution: 16 -> 32 channels at 32x16
    Conv2dDims d{16, 32, 16, 32, 32, 16, 3, 3, 1, 1, 1};
    auto in = random_vec(static_cast<size_t>(d.in_c) * d.in_h * d.in_w, rng);
    auto w = random_vec(static_cast<size_t>(d.out_c) * d.in_c * 9, rng);
    auto bias = random_vec(static_cast<size_t>(d.out_c), rng);
    std::vector<double> out(static_cast<size_t>(d.out_c) * d.out_h * d.out_w);
    report("conv2d fwd 16->32 @32x16",
           time_ms([&] { reid::kernels::conv2d_forward_serial(in.data(), w.data(), bias.data(), out.data(), d); }, 50),
           time_ms([&] { reid::kernels::conv2d_forward_omp(in.data(), w.data(), bias.data(), out.data(), d); }, 50));

    auto gout = random_vec(out.size(), rng);
    std::vector<double> gin(in.size(), 0.0);
    report("conv2d bwd-input",
           time_ms([&] { reid::kernels::conv2d_backward_input_serial(gout.data(), w.data(), gin.data(), d); }, 50),
           time_ms([&] { reid::kernels::conv2d_backward_input_omp(gout.data(), w.data(), gin.data(), d); }, 50));

    std::vector<double> gw(w.size(), 0.0), gb(bias.size(), 0.0);
    report("conv2d bwd-weight",
           time_ms([&] { reid::kernels::conv2d_backward_weight_serial(gout.data(), in.data(), gw.data(), gb.data(), d); }, 50),
           time_ms([&] { reid::kernels::conv2d_backward_weight_omp(gout.data(), in.data(), gw.data(), gb.data(), d); }, 50));
  }

  {  // classifier-head sized matmul
    const int m = 256, k = 64, n = 64;
    auto a = random_vec(static_cast<size_t>(m) * k, rng);
    auto b = random_vec(static_cast<size_t>(k) * n, rng);
    std::vector<double> c(static_cast<size_t>(m) * n);
    report("matmul 256x64x64",
           time_ms([&] { reid::kernels::matmul_serial(a.data(), b.data(), c.data(), m, k, n); }, 50),
           time_ms([&] { reid::kernels::matmul_omp(a.data(), b.data(), c.data(), m, k, n); }, 50));
  }

  {  // batch-hard mining distance table at the batch-size cap
    const int n = 88, dim = 64;
    auto x = random_vec(static_cast<size_t>(n) * dim, rng);
    std::vector<double> d(static_cast<size_t>(n) * n);
    report("pairwise_sqdist 88x88x64",
           time_ms([&] { reid::kernels::pairwise_sqdist_serial(x.data(), n, x.data(), n, dim, d.data()); }, 200),
           time_ms([&] { reid::kernels::pairwise_sqdist_omp(x.data(), n, x.data(), n, dim, d.data()); }, 200));
  }
  return 0;
}

#include "reid/kernels.hpp"

#include <atomic>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace reid::kernels {

namespace {
std::atomic<bool> g_parallel{true};
}

void set_parallel(bool enabled) { g_parallel.store(enabled); }
bool parallel_enabled() { return g_parallel.load(); }

int thread_count() {
#ifdef _OPENMP
  return g_parallel.load() ? omp_get_max_threads() : 1;
#else
  return 1;
#endif
}

// ---------------------------------------------------------------- matmul --

namespace {

inline void matmul_row(const double* a_row, const double* b, double* c_row,
                       int k, int n) {
  for (int j = 0; j < n; ++j) c_row[j] = 0.0;
  for (int p = 0; p < k; ++p) {
    const double av = a_row[p];
    const double* b_row = b + static_cast<size_t>(p) * n;
    for (int j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

inline void matmul_nt_row(const double* a_row, const double* b, double* c_row,
                          int k, int n) {
  for (int j = 0; j < n; ++j) {
    const double* b_row = b + static_cast<size_t>(j) * k;
    double acc = 0.0;
    for (int p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
    c_row[j] = acc;
  }
}

inline void matmul_tn_row(const double* a, const double* b, double* c_row,
                          int i, int m, int k, int n) {
  for (int j = 0; j < n; ++j) c_row[j] = 0.0;
  for (int p = 0; p < k; ++p) {
    const double av = a[static_cast<size_t>(p) * m + i];
    const double* b_row = b + static_cast<size_t>(p) * n;
    for (int j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

}  // namespace

void matmul_serial(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i)
    matmul_row(a + static_cast<size_t>(i) * k, b, c + static_cast<size_t>(i) * n, k, n);
}

void matmul_omp(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i)
    matmul_row(a + static_cast<size_t>(i) * k, b, c + static_cast<size_t>(i) * n, k, n);
}

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
  if (g_parallel.load()) matmul_omp(a, b, c, m, k, n);
  else matmul_serial(a, b, c, m, k, n);
}

void matmul_nt_serial(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i)
    matmul_nt_row(a + static_cast<size_t>(i) * k, b, c + static_cast<size_t>(i) * n, k, n);
}

void matmul_nt_omp(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i)
    matmul_nt_row(a + static_cast<size_t>(i) * k, b, c + static_cast<size_t>(i) * n, k, n);
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  if (g_parallel.load()) matmul_nt_omp(a, b, c, m, k, n);
  else matmul_nt_serial(a, b, c, m, k, n);
}

void matmul_tn_serial(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i)
    matmul_tn_row(a, b, c + static_cast<size_t>(i) * n, i, m, k, n);
}

void matmul_tn_omp(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i)
    matmul_tn_row(a, b, c + static_cast<size_t>(i) * n, i, m, k, n);
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  if (g_parallel.load()) matmul_tn_omp(a, b, c, m, k, n);
  else matmul_tn_serial(a, b, c, m, k, n);
}

// ------------------------------------------------------------------ conv --

namespace {

// one output channel; accumulation order fixed: ic, ky, kx, oy, ox
inline void conv2d_forward_oc(const double* in, const double* w, double bias,
                              double* out_oc, int oc, const Conv2dDims& d) {
  const size_t plane = static_cast<size_t>(d.out_h) * d.out_w;
  for (size_t t = 0; t < plane; ++t) out_oc[t] = bias;
  for (int ic = 0; ic < d.in_c; ++ic) {
    const double* in_ic = in + static_cast<size_t>(ic) * d.in_h * d.in_w;
    const double* w_ic = w + ((static_cast<size_t>(oc) * d.in_c + ic) * d.kh) * d.kw;
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        const double wv = w_ic[ky * d.kw + kx];
        if (wv == 0.0) continue;
        for (int oy = 0; oy < d.out_h; ++oy) {
          const int iy = oy * d.stride + ky - d.pad_top;
          if (iy < 0 || iy >= d.in_h) continue;
          const double* in_row = in_ic + static_cast<size_t>(iy) * d.in_w;
          double* out_row = out_oc + static_cast<size_t>(oy) * d.out_w;
          for (int ox = 0; ox < d.out_w; ++ox) {
            const int ix = ox * d.stride + kx - d.pad_left;
            if (ix < 0 || ix >= d.in_w) continue;
            out_row[ox] += wv * in_row[ix];
          }
        }
      }
    }
  }
}

inline void conv2d_backward_input_ic(const double* grad_out, const double* w,
                                     double* gin_ic, int ic, const Conv2dDims& d) {
  for (int oc = 0; oc < d.out_c; ++oc) {
    const double* go_oc = grad_out + static_cast<size_t>(oc) * d.out_h * d.out_w;
    const double* w_ic = w + ((static_cast<size_t>(oc) * d.in_c + ic) * d.kh) * d.kw;
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        const double wv = w_ic[ky * d.kw + kx];
        if (wv == 0.0) continue;
        for (int oy = 0; oy < d.out_h; ++oy) {
          const int iy = oy * d.stride + ky - d.pad_top;
          if (iy < 0 || iy >= d.in_h) continue;
          const double* go_row = go_oc + static_cast<size_t>(oy) * d.out_w;
          double* gin_row = gin_ic + static_cast<size_t>(iy) * d.in_w;
          for (int ox = 0; ox < d.out_w; ++ox) {
            const int ix = ox * d.stride + kx - d.pad_left;
            if (ix < 0 || ix >= d.in_w) continue;
            gin_row[ix] += wv * go_row[ox];
          }
        }
      }
    }
  }
}

inline void conv2d_backward_weight_oc(const double* grad_out, const double* in,
                                      double* gw, double* gbias, int oc,
                                      const Conv2dDims& d) {
  const double* go_oc = grad_out + static_cast<size_t>(oc) * d.out_h * d.out_w;
  double bacc = 0.0;
  for (int t = 0; t < d.out_h * d.out_w; ++t) bacc += go_oc[t];
  gbias[oc] += bacc;
  for (int ic = 0; ic < d.in_c; ++ic) {
    const double* in_ic = in + static_cast<size_t>(ic) * d.in_h * d.in_w;
    double* gw_ic = gw + ((static_cast<size_t>(oc) * d.in_c + ic) * d.kh) * d.kw;
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        double acc = 0.0;
        for (int oy = 0; oy < d.out_h; ++oy) {
          const int iy = oy * d.stride + ky - d.pad_top;
          if (iy < 0 || iy >= d.in_h) continue;
          const double* in_row = in_ic + static_cast<size_t>(iy) * d.in_w;
          const double* go_row = go_oc + static_cast<size_t>(oy) * d.out_w;
          for (int ox = 0; ox < d.out_w; ++ox) {
            const int ix = ox * d.stride + kx - d.pad_left;
            if (ix < 0 || ix >= d.in_w) continue;
            acc += in_row[ix] * go_row[ox];
          }
        }
        gw_ic[ky * d.kw + kx] += acc;
      }
    }
  }
}

}  // namespace

void conv2d_forward_serial(const double* in, const double* w, const double* bias,
                           double* out, const Conv2dDims& d) {
  for (int oc = 0; oc < d.out_c; ++oc)
    conv2d_forward_oc(in, w, bias[oc],
                      out + static_cast<size_t>(oc) * d.out_h * d.out_w, oc, d);
}

void conv2d_forward_omp(const double* in, const double* w, const double* bias,
                        double* out, const Conv2dDims& d) {
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < d.out_c; ++oc)
    conv2d_forward_oc(in, w, bias[oc],
                      out + static_cast<size_t>(oc) * d.out_h * d.out_w, oc, d);
}

void conv2d_forward(const double* in, const double* w, const double* bias,
                    double* out, const Conv2dDims& d) {
  if (g_parallel.load()) conv2d_forward_omp(in, w, bias, out, d);
  else conv2d_forward_serial(in, w, bias, out, d);
}

void conv2d_backward_input_serial(const double* grad_out, const double* w,
                                  double* grad_in, const Conv2dDims& d) {
  for (int ic = 0; ic < d.in_c; ++ic)
    conv2d_backward_input_ic(grad_out, w,
                             grad_in + static_cast<size_t>(ic) * d.in_h * d.in_w, ic, d);
}

void conv2d_backward_input_omp(const double* grad_out, const double* w,
                               double* grad_in, const Conv2dDims& d) {
#pragma omp parallel for schedule(static)
  for (int ic = 0; ic < d.in_c; ++ic)
    conv2d_backward_input_ic(grad_out, w,
                             grad_in + static_cast<size_t>(ic) * d.in_h * d.in_w, ic, d);
}

void conv2d_backward_input(const double* grad_out, const double* w,
                           double* grad_in, const Conv2dDims& d) {
  if (g_parallel.load()) conv2d_backward_input_omp(grad_out, w, grad_in, d);
  else conv2d_backward_input_serial(grad_out, w, grad_in, d);
}

void conv2d_backward_weight_serial(const double* grad_out, const double* in,
                                   double* grad_w, double* grad_bias,
                                   const Conv2dDims& d) {
  for (int oc = 0; oc < d.out_c; ++oc)
    conv2d_backward_weight_oc(grad_out, in, grad_w, grad_bias, oc, d);
}

void conv2d_backward_weight_omp(const double* grad_out, const double* in,
                                double* grad_w, double* grad_bias,
                                const Conv2dDims& d) {
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < d.out_c; ++oc)
    conv2d_backward_weight_oc(grad_out, in, grad_w, grad_bias, oc, d);
}

void conv2d_backward_weight(const double* grad_out, const double* in,
                            double* grad_w, double* grad_bias,
                            const Conv2dDims& d) {
  if (g_parallel.load()) conv2d_backward_weight_omp(grad_out, in, grad_w, grad_bias, d);
  else conv2d_backward_weight_serial(grad_out, in, grad_w, grad_bias, d);
}

// -------------------------------------------------------------- pairwise --

namespace {

inline void pairwise_row(const double* xi, const double* y, int m, int dim,
                         double* out_row) {
  for (int j = 0; j < m; ++j) {
    const double* yj = y + static_cast<size_t>(j) * dim;
    double acc = 0.0;
    for (int t = 0; t < dim; ++t) {
      const double diff = xi[t] - yj[t];
      acc += diff * diff;
    }
    out_row[j] = acc;
  }
}

}  // namespace

void pairwise_sqdist_serial(const double* x, int n, const double* y, int m,
                            int dim, double* out) {
  for (int i = 0; i < n; ++i)
    pairwise_row(x + static_cast<size_t>(i) * dim, y, m, dim,
                 out + static_cast<size_t>(i) * m);
}

void pairwise_sqdist_omp(const double* x, int n, const double* y, int m,
                         int dim, double* out) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i)
    pairwise_row(x + static_cast<size_t>(i) * dim, y, m, dim,
                 out + static_cast<size_t>(i) * m);
}

void pairwise_sqdist(const double* x, int n, const double* y, int m,
                     int dim, double* out) {
  if (g_parallel.load()) pairwise_sqdist_omp(x, n, y, m, dim, out);
  else pairwise_sqdist_serial(x, n, y, m, dim, out);
}

}  // namespace reid::kernels

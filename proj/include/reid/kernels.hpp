#ifndef REID_KERNELS_HPP_
#define REID_KERNELS_HPP_

#include <cstddef>

// Dense numeric kernels behind the tensor ops. Every kernel comes in two
// variants: a serial reference (ground truth for tests) and an OpenMP one
// partitioned over independent output slices only, so the parallel result is
// bit-identical to the serial one and training stays reproducible across
// thread counts. The unsuffixed entry points dispatch on the global toggle.
namespace reid::kernels {

void set_parallel(bool enabled);
bool parallel_enabled();
int thread_count();

// C[m,n] = A[m,k] * B[k,n]
void matmul_serial(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_omp(const double* a, const double* b, double* c, int m, int k, int n);
void matmul(const double* a, const double* b, double* c, int m, int k, int n);

// C[m,n] = A[m,k] * B[n,k]^T
void matmul_nt_serial(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_nt_omp(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n);

// C[m,n] = A[k,m]^T * B[k,n]
void matmul_tn_serial(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_tn_omp(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n);

struct Conv2dDims {
  int in_c, in_h, in_w;
  int out_c, out_h, out_w;
  int kh, kw;
  int stride;
  int pad_top, pad_left;
};

// in[in_c,in_h,in_w], w[out_c,in_c,kh,kw], bias[out_c] -> out[out_c,out_h,out_w]
void conv2d_forward_serial(const double* in, const double* w, const double* bias,
                           double* out, const Conv2dDims& d);
void conv2d_forward_omp(const double* in, const double* w, const double* bias,
                        double* out, const Conv2dDims& d);
void conv2d_forward(const double* in, const double* w, const double* bias,
                    double* out, const Conv2dDims& d);

// accumulates into grad_in (caller zeroes)
void conv2d_backward_input_serial(const double* grad_out, const double* w,
                                  double* grad_in, const Conv2dDims& d);
void conv2d_backward_input_omp(const double* grad_out, const double* w,
                               double* grad_in, const Conv2dDims& d);
void conv2d_backward_input(const double* grad_out, const double* w,
                           double* grad_in, const Conv2dDims& d);

// accumulates into grad_w / grad_bias (caller zeroes)
void conv2d_backward_weight_serial(const double* grad_out, const double* in,
                                   double* grad_w, double* grad_bias,
                                   const Conv2dDims& d);
void conv2d_backward_weight_omp(const double* grad_out, const double* in,
                                double* grad_w, double* grad_bias,
                                const Conv2dDims& d);
void conv2d_backward_weight(const double* grad_out, const double* in,
                            double* grad_w, double* grad_bias,
                            const Conv2dDims& d);

// D[i,j] = squared Euclidean distance between rows X[i,:] and Y[j,:]
void pairwise_sqdist_serial(const double* x, int n, const double* y, int m,
                            int dim, double* out);
void pairwise_sqdist_omp(const double* x, int n, const double* y, int m,
                         int dim, double* out);
void pairwise_sqdist(const double* x, int n, const double* y, int m,
                     int dim, double* out);

}  // namespace reid::kernels

#endif  // REID_KERNELS_HPP_

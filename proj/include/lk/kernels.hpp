#pragma once

#include <cstdint>
#include <vector>

// Low-level array kernels. lk::kern holds the production implementations:
// im2col + blocked GEMM with OpenMP parallel loops. Parallel splits are only
// ever over disjoint output elements and every element keeps a fixed serial
// accumulation order, so results are bit-identical for any thread count.
// lk::ref holds plain serial loops kept as the reference for tests and the
// kernel benchmark.

namespace lk::kern {

// C[m,n] += A[m,k] * B[k,n], row-major
void gemm_nn(const double* A, const double* B, double* C, int m, int k, int n);

// C[m,d] += A[m,n] * B[d,n]^T  (dot products over the shared contiguous axis)
void gemm_nt(const double* A, const double* B, double* C, int m, int n, int d);

// C[m,n] += A[k,m]^T * B[k,n]
void gemm_tn(const double* A, const double* B, double* C, int k, int m, int n);

// cols[C*kh*kw, Ho*Wo] from one image [C,H,W]
void im2col(const double* img, int C, int H, int W, int kh, int kw, int stride, int pad,
            double* cols, int Ho, int Wo);

// scatter-add cols back into one image [C,H,W]
void col2im(const double* cols, int C, int H, int W, int kh, int kw, int stride, int pad,
            double* img, int Ho, int Wo);

void conv2d_forward(const double* x, int N, int C, int H, int W, const double* w, int K, int kh,
                    int kw, const double* bias, int stride, int pad, double* y, int Ho, int Wo);

// any of dx, dw, dbias may be null; dw/dbias are accumulated into
void conv2d_backward(const double* x, int N, int C, int H, int W, const double* w, int K, int kh,
                     int kw, int stride, int pad, const double* dy, int Ho, int Wo, double* dx,
                     double* dw, double* dbias);

// out and argmax have N*C*(H/win)*(W/win) elements; argmax stores flat input offsets
void maxpool_forward(const double* x, int N, int C, int H, int W, int win, double* y,
                     int64_t* argmax);
void maxpool_backward(const double* dy, int64_t n_out, const int64_t* argmax, double* dx);

void upsample_forward(const double* x, int N, int C, int H, int W, int f, double* y);
void upsample_backward(const double* dy, int N, int C, int H, int W, int f, double* dx);

// y[N,M] = x[N,D] * w[D,M] + b[M]
void dense_forward(const double* x, int N, int D, const double* w, const double* b, int M,
                   double* y);
void dense_backward(const double* x, int N, int D, const double* w, int M, const double* dy,
                    double* dx, double* dw, double* db);

}  // namespace lk::kern

namespace lk::ref {

void gemm_nn(const double* A, const double* B, double* C, int m, int k, int n);

void conv2d_forward(const double* x, int N, int C, int H, int W, const double* w, int K, int kh,
                    int kw, const double* bias, int stride, int pad, double* y, int Ho, int Wo);
void conv2d_backward(const double* x, int N, int C, int H, int W, const double* w, int K, int kh,
                     int kw, int stride, int pad, const double* dy, int Ho, int Wo, double* dx,
                     double* dw, double* dbias);

void dense_forward(const double* x, int N, int D, const double* w, const double* b, int M,
                   double* y);
void dense_backward(const double* x, int N, int D, const double* w, int M, const double* dy,
                    double* dx, double* dw, double* db);

}  // namespace lk::ref

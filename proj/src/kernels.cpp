#include "lk/kernels.hpp"

#include <algorithm>
#include <cstring>

namespace lk::kern {

namespace {

// serial gemm body shared by the parallel wrappers; inner accumulation is
// always k-ascending per output element
inline void gemm_nn_serial(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        double* c = C + int64_t(i) * n;
        const double* a = A + int64_t(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            double av = a[kk];
            const double* b = B + int64_t(kk) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// dot product with a fixed 4-lane accumulator layout; the lane structure is
// part of the result definition, so it vectorizes without -ffast-math and
// stays deterministic
inline double dot4(const double* a, const double* b, int n) {
    double acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
    int j = 0;
    for (; j + 4 <= n; j += 4) {
        acc0 += a[j] * b[j];
        acc1 += a[j + 1] * b[j + 1];
        acc2 += a[j + 2] * b[j + 2];
        acc3 += a[j + 3] * b[j + 3];
    }
    double tail = 0;
    for (; j < n; ++j) tail += a[j] * b[j];
    return ((acc0 + acc1) + (acc2 + acc3)) + tail;
}

}  // namespace

void gemm_nn(const double* A, const double* B, double* C, int m, int k, int n) {
#pragma omp parallel for schedule(static) if (m >= 4 && int64_t(m) * k * n > 65536)
    for (int i = 0; i < m; ++i) {
        double* c = C + int64_t(i) * n;
        const double* a = A + int64_t(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            double av = a[kk];
            const double* b = B + int64_t(kk) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

void gemm_nt(const double* A, const double* B, double* C, int m, int n, int d) {
#pragma omp parallel for schedule(static) if (int64_t(m) * n * d > 65536)
    for (int dd = 0; dd < d; ++dd) {
        const double* b = B + int64_t(dd) * n;
        for (int i = 0; i < m; ++i) C[int64_t(i) * d + dd] += dot4(A + int64_t(i) * n, b, n);
    }
}

void gemm_tn(const double* A, const double* B, double* C, int k, int m, int n) {
#pragma omp parallel for schedule(static) if (int64_t(m) * n * k > 65536)
    for (int mm = 0; mm < m; ++mm) {
        double* c = C + int64_t(mm) * n;
        for (int kk = 0; kk < k; ++kk) {
            double av = A[int64_t(kk) * m + mm];
            const double* b = B + int64_t(kk) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

void im2col(const double* img, int C, int H, int W, int kh, int kw, int stride, int pad,
            double* cols, int Ho, int Wo) {
    const int HoWo = Ho * Wo;
    for (int c = 0; c < C; ++c) {
        const double* plane = img + int64_t(c) * H * W;
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
                double* row = cols + (int64_t(c) * kh * kw + i * kw + j) * HoWo;
                for (int oy = 0; oy < Ho; ++oy) {
                    int y = oy * stride - pad + i;
                    if (y < 0 || y >= H) {
                        std::fill(row + oy * Wo, row + (oy + 1) * Wo, 0.0);
                        continue;
                    }
                    const double* src = plane + int64_t(y) * W;
                    for (int ox = 0; ox < Wo; ++ox) {
                        int x = ox * stride - pad + j;
                        row[oy * Wo + ox] = (x >= 0 && x < W) ? src[x] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im(const double* cols, int C, int H, int W, int kh, int kw, int stride, int pad,
            double* img, int Ho, int Wo) {
    const int HoWo = Ho * Wo;
    for (int c = 0; c < C; ++c) {
        double* plane = img + int64_t(c) * H * W;
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
                const double* row = cols + (int64_t(c) * kh * kw + i * kw + j) * HoWo;
                for (int oy = 0; oy < Ho; ++oy) {
                    int y = oy * stride - pad + i;
                    if (y < 0 || y >= H) continue;
                    double* dst = plane + int64_t(y) * W;
                    for (int ox = 0; ox < Wo; ++ox) {
                        int x = ox * stride - pad + j;
                        if (x >= 0 && x < W) dst[x] += row[oy * Wo + ox];
                    }
                }
            }
        }
    }
}

void conv2d_forward(const double* x, int N, int C, int H, int W, const double* w, int K, int kh,
                    int kw, const double* bias, int stride, int pad, double* y, int Ho, int Wo) {
    const int D = C * kh * kw;
    const int HoWo = Ho * Wo;
#pragma omp parallel
    {
        std::vector<double> cols(size_t(D) * HoWo);
#pragma omp for schedule(static)
        for (int n = 0; n < N; ++n) {
            im2col(x + int64_t(n) * C * H * W, C, H, W, kh, kw, stride, pad, cols.data(), Ho, Wo);
            double* out = y + int64_t(n) * K * HoWo;
            std::fill(out, out + int64_t(K) * HoWo, 0.0);
            gemm_nn_serial(w, cols.data(), out, K, D, HoWo);
            for (int k = 0; k < K; ++k) {
                double bv = bias ? bias[k] : 0.0;
                double* o = out + int64_t(k) * HoWo;
                for (int j = 0; j < HoWo; ++j) o[j] += bv;
            }
        }
    }
}

void conv2d_backward(const double* x, int N, int C, int H, int W, const double* w, int K, int kh,
                     int kw, int stride, int pad, const double* dy, int Ho, int Wo, double* dx,
                     double* dw, double* dbias) {
    const int D = C * kh * kw;
    const int HoWo = Ho * Wo;

    if (dx) {
#pragma omp parallel
        {
            std::vector<double> dcols(size_t(D) * HoWo);
#pragma omp for schedule(static)
            for (int n = 0; n < N; ++n) {
                std::fill(dcols.begin(), dcols.end(), 0.0);
                gemm_tn(w, dy + int64_t(n) * K * HoWo, dcols.data(), K, D, HoWo);
                col2im(dcols.data(), C, H, W, kh, kw, stride, pad, dx + int64_t(n) * C * H * W, Ho,
                       Wo);
            }
        }
    }

    if (dw) {
        // per-item contributions computed in parallel, reduced in batch order
        // so the sum is identical for any thread count
        std::vector<double> dw_items(size_t(N) * K * D, 0.0);
#pragma omp parallel
        {
            std::vector<double> cols(size_t(D) * HoWo);
#pragma omp for schedule(static)
            for (int n = 0; n < N; ++n) {
                im2col(x + int64_t(n) * C * H * W, C, H, W, kh, kw, stride, pad, cols.data(), Ho,
                       Wo);
                gemm_nt(dy + int64_t(n) * K * HoWo, cols.data(), dw_items.data() + int64_t(n) * K * D,
                        K, HoWo, D);
            }
        }
        for (int n = 0; n < N; ++n) {
            const double* src = dw_items.data() + int64_t(n) * K * D;
            for (int64_t i = 0; i < int64_t(K) * D; ++i) dw[i] += src[i];
        }
    }

    if (dbias) {
        for (int n = 0; n < N; ++n) {
            for (int k = 0; k < K; ++k) {
                const double* o = dy + (int64_t(n) * K + k) * HoWo;
                double s = 0;
                for (int j = 0; j < HoWo; ++j) s += o[j];
                dbias[k] += s;
            }
        }
    }
}

void maxpool_forward(const double* x, int N, int C, int H, int W, int win, double* y,
                     int64_t* argmax) {
    const int Ho = H / win, Wo = W / win;
    const int64_t planes = int64_t(N) * C;
#pragma omp parallel for schedule(static) if (planes * H * W > 16384)
    for (int64_t p = 0; p < planes; ++p) {
        const double* in = x + p * H * W;
        double* out = y + p * Ho * Wo;
        int64_t* am = argmax + p * Ho * Wo;
        for (int oy = 0; oy < Ho; ++oy) {
            for (int ox = 0; ox < Wo; ++ox) {
                int64_t best = int64_t(oy * win) * W + ox * win;
                double bv = in[best];
                for (int i = 0; i < win; ++i) {
                    for (int j = 0; j < win; ++j) {
                        int64_t idx = int64_t(oy * win + i) * W + ox * win + j;
                        if (in[idx] > bv) {  // strict: first occurrence wins ties
                            bv = in[idx];
                            best = idx;
                        }
                    }
                }
                out[oy * Wo + ox] = bv;
                am[oy * Wo + ox] = p * H * W + best;
            }
        }
    }
}

void maxpool_backward(const double* dy, int64_t n_out, const int64_t* argmax, double* dx) {
#pragma omp parallel for schedule(static) if (n_out > 16384)
    for (int64_t i = 0; i < n_out; ++i) {
        // distinct outputs map to distinct windows, so writes never collide
        dx[argmax[i]] += dy[i];
    }
}

void upsample_forward(const double* x, int N, int C, int H, int W, int f, double* y) {
    const int64_t planes = int64_t(N) * C;
    const int Ho = H * f, Wo = W * f;
#pragma omp parallel for schedule(static) if (planes * Ho * Wo > 16384)
    for (int64_t p = 0; p < planes; ++p) {
        const double* in = x + p * H * W;
        double* out = y + p * Ho * Wo;
        for (int oy = 0; oy < Ho; ++oy) {
            const double* src = in + int64_t(oy / f) * W;
            double* dst = out + int64_t(oy) * Wo;
            for (int ox = 0; ox < Wo; ++ox) dst[ox] = src[ox / f];
        }
    }
}

void upsample_backward(const double* dy, int N, int C, int H, int W, int f, double* dx) {
    const int64_t planes = int64_t(N) * C;
    const int Wo = W * f;
#pragma omp parallel for schedule(static) if (planes * H * W * f * f > 16384)
    for (int64_t p = 0; p < planes; ++p) {
        const double* in = dy + p * int64_t(H) * f * Wo;
        double* out = dx + p * H * W;
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                double s = 0;
                for (int i = 0; i < f; ++i) {
                    const double* row = in + int64_t(y * f + i) * Wo + x * f;
                    for (int j = 0; j < f; ++j) s += row[j];
                }
                out[int64_t(y) * W + x] += s;
            }
        }
    }
}

void dense_forward(const double* x, int N, int D, const double* w, const double* b, int M,
                   double* y) {
    std::fill(y, y + int64_t(N) * M, 0.0);
    gemm_nn(x, w, y, N, D, M);
    for (int n = 0; n < N; ++n) {
        double* row = y + int64_t(n) * M;
        for (int m = 0; m < M; ++m) row[m] += b[m];
    }
}

void dense_backward(const double* x, int N, int D, const double* w, int M, const double* dy,
                    double* dx, double* dw, double* db) {
    if (dx) gemm_nt(dy, w, dx, N, M, D);
    if (dw) gemm_tn(x, dy, dw, N, D, M);
    if (db) {
        for (int n = 0; n < N; ++n) {
            const double* row = dy + int64_t(n) * M;
            for (int m = 0; m < M; ++m) db[m] += row[m];
        }
    }
}

}  // namespace lk::kern

namespace lk::ref {

void gemm_nn(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i)
        for (int kk = 0; kk < k; ++kk) {
            double a = A[int64_t(i) * k + kk];
            for (int j = 0; j < n; ++j) C[int64_t(i) * n + j] += a * B[int64_t(kk) * n + j];
        }
}

void conv2d_forward(const double* x, int N, int C, int H, int W, const double* w, int K, int kh,
                    int kw, const double* bias, int stride, int pad, double* y, int Ho, int Wo) {
    for (int n = 0; n < N; ++n)
        for (int k = 0; k < K; ++k)
            for (int oy = 0; oy < Ho; ++oy)
                for (int ox = 0; ox < Wo; ++ox) {
                    double acc = 0;
                    for (int c = 0; c < C; ++c)
                        for (int i = 0; i < kh; ++i)
                            for (int j = 0; j < kw; ++j) {
                                int yy = oy * stride - pad + i;
                                int xx = ox * stride - pad + j;
                                if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                                acc += w[((int64_t(k) * C + c) * kh + i) * kw + j] *
                                       x[((int64_t(n) * C + c) * H + yy) * W + xx];
                            }
                    y[((int64_t(n) * K + k) * Ho + oy) * Wo + ox] = acc + (bias ? bias[k] : 0.0);
                }
}

void conv2d_backward(const double* x, int N, int C, int H, int W, const double* w, int K, int kh,
                     int kw, int stride, int pad, const double* dy, int Ho, int Wo, double* dx,
                     double* dw, double* dbias) {
    for (int n = 0; n < N; ++n)
        for (int k = 0; k < K; ++k)
            for (int oy = 0; oy < Ho; ++oy)
                for (int ox = 0; ox < Wo; ++ox) {
                    double g = dy[((int64_t(n) * K + k) * Ho + oy) * Wo + ox];
                    if (dbias) dbias[k] += g;
                    for (int c = 0; c < C; ++c)
                        for (int i = 0; i < kh; ++i)
                            for (int j = 0; j < kw; ++j) {
                                int yy = oy * stride - pad + i;
                                int xx = ox * stride - pad + j;
                                if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                                int64_t xi = ((int64_t(n) * C + c) * H + yy) * W + xx;
                                int64_t wi = ((int64_t(k) * C + c) * kh + i) * kw + j;
                                if (dx) dx[xi] += g * w[wi];
                                if (dw) dw[wi] += g * x[xi];
                            }
                }
}

void dense_forward(const double* x, int N, int D, const double* w, const double* b, int M,
                   double* y) {
    for (int n = 0; n < N; ++n)
        for (int m = 0; m < M; ++m) {
            double acc = 0;
            for (int d = 0; d < D; ++d) acc += x[int64_t(n) * D + d] * w[int64_t(d) * M + m];
            y[int64_t(n) * M + m] = acc + b[m];
        }
}

void dense_backward(const double* x, int N, int D, const double* w, int M, const double* dy,
                    double* dx, double* dw, double* db) {
    for (int n = 0; n < N; ++n)
        for (int m = 0; m < M; ++m) {
            double g = dy[int64_t(n) * M + m];
            if (db) db[m] += g;
            for (int d = 0; d < D; ++d) {
                if (dx) dx[int64_t(n) * D + d] += g * w[int64_t(d) * M + m];
                if (dw) dw[int64_t(d) * M + m] += g * x[int64_t(n) * D + d];
            }
        }
}

}  // namespace lk::ref

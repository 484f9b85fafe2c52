#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lk/kernels.hpp"
#include "lk/rng.hpp"

using namespace lk;

namespace {

std::vector<double> random_buf(size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

// median of reps timed runs, milliseconds; fn must leave its output buffers
// in a reusable state (they are zeroed by the caller between runs)
double time_ms(int reps, const std::function<void()>& fn) {
    std::vector<double> samples;
    for (int r = 0; r < reps; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        fn();
        auto t1 = std::chrono::steady_clock::now();
        samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(samples.begin(), samples.end());
    return samples[samples.size() / 2];
}

void report(const std::string& name, double ref_ms, double kern_ms, double diff) {
    std::printf("%-26s  ref %9.2f ms   parallel %9.2f ms   speedup %5.2fx   max|diff| %.3g\n",
                name.c_str(), ref_ms, kern_ms, ref_ms / kern_ms, diff);
}

}  // namespace

int main() {
    int threads = 1;
#ifdef _OPENMP
    threads = omp_get_max_threads();
#endif
    std::printf("kernel benchmark, %d thread(s), median of 3 runs\n\n", threads);

    Rng rng(42);

    {
        // square GEMM, the workhorse behind every convolution
        const int m = 512, k = 512, n = 512;
        auto A = random_buf(size_t(m) * k, rng);
        auto B = random_buf(size_t(k) * n, rng);
        std::vector<double> Cr(size_t(m) * n), Ck(size_t(m) * n);

        double ref_ms = time_ms(3, [&] {
            std::fill(Cr.begin(), Cr.end(), 0.0);
            ref::gemm_nn(A.data(), B.data(), Cr.data(), m, k, n);
        });
        double kern_ms = time_ms(3, [&] {
            std::fill(Ck.begin(), Ck.end(), 0.0);
            kern::gemm_nn(A.data(), B.data(), Ck.data(), m, k, n);
        });
        report("gemm_nn 512x512x512", ref_ms, kern_ms, max_abs_diff(Cr, Ck));
    }

    {
        // mid-depth convolution stage at training shape
        const int N = 16, C = 32, H = 32, W = 32, K = 32, kh = 3, kw = 3, stride = 1, pad = 1;
        const int Ho = H, Wo = W;
        auto x = random_buf(size_t(N) * C * H * W, rng);
        auto w = random_buf(size_t(K) * C * kh * kw, rng);
        auto bias = random_buf(size_t(K), rng);
        std::vector<double> yr(size_t(N) * K * Ho * Wo), yk(yr.size());

        double ref_ms = time_ms(3, [&] {
            ref::conv2d_forward(x.data(), N, C, H, W, w.data(), K, kh, kw, bias.data(), stride,
                                pad, yr.data(), Ho, Wo);
        });
        double kern_ms = time_ms(3, [&] {
            kern::conv2d_forward(x.data(), N, C, H, W, w.data(), K, kh, kw, bias.data(), stride,
                                 pad, yk.data(), Ho, Wo);
        });
        report("conv2d fwd 16x32x32x32", ref_ms, kern_ms, max_abs_diff(yr, yk));

        auto dy = random_buf(yr.size(), rng);
        std::vector<double> dxr(x.size()), dwr(w.size()), dbr(bias.size());
        std::vector<double> dxk(x.size()), dwk(w.size()), dbk(bias.size());

        double bref_ms = time_ms(3, [&] {
            std::fill(dxr.begin(), dxr.end(), 0.0);
            std::fill(dwr.begin(), dwr.end(), 0.0);
            std::fill(dbr.begin(), dbr.end(), 0.0);
            ref::conv2d_backward(x.data(), N, C, H, W, w.data(), K, kh, kw, stride, pad, dy.data(),
                                 Ho, Wo, dxr.data(), dwr.data(), dbr.data());
        });
        double bkern_ms = time_ms(3, [&] {
            std::fill(dxk.begin(), dxk.end(), 0.0);
            std::fill(dwk.begin(), dwk.end(), 0.0);
            std::fill(dbk.begin(), dbk.end(), 0.0);
            kern::conv2d_backward(x.data(), N, C, H, W, w.data(), K, kh, kw, stride, pad,
                                  dy.data(), Ho, Wo, dxk.data(), dwk.data(), dbk.data());
        });
        double diff = std::max({max_abs_diff(dxr, dxk), max_abs_diff(dwr, dwk),
                                max_abs_diff(dbr, dbk)});
        report("conv2d bwd 16x32x32x32", bref_ms, bkern_ms, diff);
    }

    {
        // classifier head shape
        const int N = 20, D = 4096, M = 1024;
        auto x = random_buf(size_t(N) * D, rng);
        auto w = random_buf(size_t(D) * M, rng);
        auto b = random_buf(size_t(M), rng);
        std::vector<double> yr(size_t(N) * M), yk(yr.size());

        double ref_ms = time_ms(3, [&] {
            ref::dense_forward(x.data(), N, D, w.data(), b.data(), M, yr.data());
        });
        double kern_ms = time_ms(3, [&] {
            kern::dense_forward(x.data(), N, D, w.data(), b.data(), M, yk.data());
        });
        report("dense fwd 20x4096x1024", ref_ms, kern_ms, max_abs_diff(yr, yk));

        auto dy = random_buf(yr.size(), rng);
        std::vector<double> dxr(x.size()), dwr(w.size()), dbr(b.size());
        std::vector<double> dxk(x.size()), dwk(w.size()), dbk(b.size());

        double bref_ms = time_ms(3, [&] {
            std::fill(dxr.begin(), dxr.end(), 0.0);
            std::fill(dwr.begin(), dwr.end(), 0.0);
            std::fill(dbr.begin(), dbr.end(), 0.0);
            ref::dense_backward(x.data(), N, D, w.data(), M, dy.data(), dxr.data(), dwr.data(),
                                dbr.data());
        });
        double bkern_ms = time_ms(3, [&] {
            std::fill(dxk.begin(), dxk.end(), 0.0);
            std::fill(dwk.begin(), dwk.end(), 0.0);
            std::fill(dbk.begin(), dbk.end(), 0.0);
            kern::dense_backward(x.data(), N, D, w.data(), M, dy.data(), dxk.data(), dwk.data(),
                                 dbk.data());
        });
        double diff = std::max({max_abs_diff(dxr, dxk), max_abs_diff(dwr, dwk),
                                max_abs_diff(dbr, dbk)});
        report("dense bwd 20x4096x1024", bref_ms, bkern_ms, diff);
    }

    return 0;
}

#include "lk/ops.hpp"

#include <cmath>

#include "lk/kernels.hpp"

namespace lk::ops {

namespace {

bool any_requires_grad(const std::vector<Tensor>& ts) {
    for (const auto& t : ts)
        if (t.requires_grad()) return true;
    return false;
}

// allocate the result node; graph edges are attached only when a gradient
// will actually flow, so eval-mode forwards build no graph
Tensor make_node(std::vector<int> shape, const char* tag, std::vector<Tensor> parents,
                 std::function<void(TensorData&)> backprop) {
    bool rg = any_requires_grad(parents);
    Tensor out = Tensor::zeros(std::move(shape), rg);
    if (rg) {
        out.node()->op_tag = tag;
        out.node()->parents = std::move(parents);
        out.node()->backprop = std::move(backprop);
    }
    return out;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    Tensor::shape_str(a.shape()) + " vs " +
                                    Tensor::shape_str(b.shape()));
}

double stable_sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor ac = a, bc = b;
    Tensor out = make_node(a.shape(), "add", {a, b}, [ac, bc](TensorData& self) mutable {
        ac.accumulate_grad(self.grad.data());
        bc.accumulate_grad(self.grad.data());
    });
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] + pb[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor ac = a, bc = b;
    Tensor out = make_node(a.shape(), "mul", {a, b}, [ac, bc](TensorData& self) mutable {
        std::vector<double> tmp(self.grad.size());
        if (ac.requires_grad()) {
            for (size_t i = 0; i < tmp.size(); ++i) tmp[i] = self.grad[i] * bc.data()[i];
            ac.accumulate_grad(tmp.data());
        }
        if (bc.requires_grad()) {
            for (size_t i = 0; i < tmp.size(); ++i) tmp[i] = self.grad[i] * ac.data()[i];
            bc.accumulate_grad(tmp.data());
        }
    });
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] * pb[i];
    return out;
}

Tensor sum(const Tensor& a) {
    Tensor ac = a;
    Tensor out = make_node({1}, "sum", {a}, [ac](TensorData& self) mutable {
        if (!ac.requires_grad()) return;
        std::vector<double> g(size_t(ac.numel()), self.grad[0]);
        ac.accumulate_grad(g.data());
    });
    double s = 0;
    const double* pa = a.data();
    for (int64_t i = 0; i < a.numel(); ++i) s += pa[i];
    out.values()[0] = s;
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor xc = x;
    Tensor out = make_node(x.shape(), "relu", {x}, [xc](TensorData& self) mutable {
        if (!xc.requires_grad()) return;
        std::vector<double> g(self.grad.size());
        for (size_t i = 0; i < g.size(); ++i) g[i] = xc.data()[i] > 0 ? self.grad[i] : 0.0;
        xc.accumulate_grad(g.data());
    });
    const double* px = x.data();
    double* po = out.data();
    const int64_t n = out.numel();
#pragma omp parallel for schedule(static) if (n > 16384)
    for (int64_t i = 0; i < n; ++i) po[i] = px[i] > 0 ? px[i] : 0.0;
    return out;
}

Tensor sigmoid(const Tensor& x) {
    Tensor out = make_node(x.shape(), "sigmoid", {x}, nullptr);
    const double* px = x.data();
    double* po = out.data();
    const int64_t n = out.numel();
#pragma omp parallel for schedule(static) if (n > 16384)
    for (int64_t i = 0; i < n; ++i) po[i] = stable_sigmoid(px[i]);
    if (out.requires_grad()) {
        // output values come from self: capturing the output handle here
        // would make the node own itself and pin the whole graph
        Tensor xc = x;
        out.node()->backprop = [xc](TensorData& self) mutable {
            std::vector<double> g(self.grad.size());
            for (size_t i = 0; i < g.size(); ++i) {
                double y = self.values[i];
                g[i] = self.grad[i] * y * (1.0 - y);
            }
            xc.accumulate_grad(g.data());
        };
    }
    return out;
}

Tensor softmax(const Tensor& x) {
    if (x.ndim() != 2)
        throw std::invalid_argument("softmax: expected [N,K], got " +
                                    Tensor::shape_str(x.shape()));
    const int N = x.dim(0), K = x.dim(1);
    Tensor out = make_node(x.shape(), "softmax", {x}, nullptr);
    for (int n = 0; n < N; ++n) {
        const double* row = x.data() + int64_t(n) * K;
        double* o = out.data() + int64_t(n) * K;
        double mx = row[0];
        for (int k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        double s = 0;
        for (int k = 0; k < K; ++k) {
            o[k] = std::exp(row[k] - mx);
            s += o[k];
        }
        for (int k = 0; k < K; ++k) o[k] /= s;
    }
    if (out.requires_grad()) {
        // read the output rows from self, never a captured handle (self-cycle)
        Tensor xc = x;
        out.node()->backprop = [xc, N, K](TensorData& self) mutable {
            std::vector<double> g(self.grad.size());
            for (int n = 0; n < N; ++n) {
                const double* y = self.values.data() + int64_t(n) * K;
                const double* dy = self.grad.data() + int64_t(n) * K;
                double dot = 0;
                for (int k = 0; k < K; ++k) dot += y[k] * dy[k];
                for (int k = 0; k < K; ++k) g[int64_t(n) * K + k] = y[k] * (dy[k] - dot);
            }
            xc.accumulate_grad(g.data());
        };
    }
    return out;
}

Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0)
        throw std::invalid_argument("dropout: rate must be in [0,1), got " + std::to_string(rate));
    if (!training || rate == 0.0) {
        Tensor xc = x;
        Tensor out = make_node(x.shape(), "dropout", {x}, [xc](TensorData& self) mutable {
            xc.accumulate_grad(self.grad.data());
        });
        out.values() = x.values();
        return out;
    }
    // mask drawn serially in row-major order so the stream is reproducible
    auto mask = std::make_shared<std::vector<double>>(size_t(x.numel()));
    const double scale = 1.0 / (1.0 - rate);
    for (double& m : *mask) m = rng.uniform() < rate ? 0.0 : scale;
    Tensor xc = x;
    Tensor out = make_node(x.shape(), "dropout", {x}, [xc, mask](TensorData& self) mutable {
        if (!xc.requires_grad()) return;
        std::vector<double> g(self.grad.size());
        for (size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * (*mask)[i];
        xc.accumulate_grad(g.data());
    });
    const double* px = x.data();
    double* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] = px[i] * (*mask)[i];
    return out;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding) {
    if (x.ndim() != 4 || w.ndim() != 4 || b.ndim() != 1)
        throw std::invalid_argument("conv2d: expected x[N,C,H,W], w[K,C,kh,kw], b[K]; got x" +
                                    Tensor::shape_str(x.shape()) + " w" +
                                    Tensor::shape_str(w.shape()) + " b" +
                                    Tensor::shape_str(b.shape()));
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int K = w.dim(0), Cw = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    if (Cw != C)
        throw std::invalid_argument("conv2d: kernel expects " + std::to_string(Cw) +
                                    " input channels but input has " + std::to_string(C) +
                                    " (kernel " + Tensor::shape_str(w.shape()) + ", input " +
                                    Tensor::shape_str(x.shape()) + ")");
    if (b.dim(0) != K)
        throw std::invalid_argument("conv2d: bias size " + std::to_string(b.dim(0)) +
                                    " does not match kernel count " + std::to_string(K));
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
    if (padding < 0) throw std::invalid_argument("conv2d: padding must be >= 0");
    if (kh > H + 2 * padding || kw > W + 2 * padding)
        throw std::invalid_argument("conv2d: kernel " + std::to_string(kh) + "x" +
                                    std::to_string(kw) + " larger than padded input");
    const int Ho = (H + 2 * padding - kh) / stride + 1;
    const int Wo = (W + 2 * padding - kw) / stride + 1;

    Tensor xc = x, wc = w, bc = b;
    auto bp = [xc, wc, bc, N, C, H, W, K, kh, kw, stride, padding, Ho,
               Wo](TensorData& self) mutable {
        double* dx = xc.requires_grad() ? xc.grad().data() : nullptr;
        double* dw = wc.requires_grad() ? wc.grad().data() : nullptr;
        double* db = bc.requires_grad() ? bc.grad().data() : nullptr;
        kern::conv2d_backward(xc.data(), N, C, H, W, wc.data(), K, kh, kw, stride, padding,
                              self.grad.data(), Ho, Wo, dx, dw, db);
    };
    Tensor out = make_node({N, K, Ho, Wo}, "conv2d", {x, w, b}, bp);
    kern::conv2d_forward(x.data(), N, C, H, W, w.data(), K, kh, kw, b.data(), stride, padding,
                         out.data(), Ho, Wo);
    return out;
}

Tensor maxpool2d(const Tensor& x, int window) {
    if (x.ndim() != 4)
        throw std::invalid_argument("maxpool2d: expected [N,C,H,W], got " +
                                    Tensor::shape_str(x.shape()));
    if (window < 1) throw std::invalid_argument("maxpool2d: window must be >= 1");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (H % window != 0 || W % window != 0)
        throw std::invalid_argument("maxpool2d: spatial dims " + std::to_string(H) + "x" +
                                    std::to_string(W) + " not divisible by window " +
                                    std::to_string(window));
    const int Ho = H / window, Wo = W / window;
    auto argmax = std::make_shared<std::vector<int64_t>>(size_t(N) * C * Ho * Wo);
    Tensor xc = x;
    Tensor out = make_node({N, C, Ho, Wo}, "maxpool2d", {x}, [xc, argmax](TensorData& self) mutable {
        if (!xc.requires_grad()) return;
        std::vector<double> g(size_t(xc.numel()), 0.0);
        kern::maxpool_backward(self.grad.data(), int64_t(argmax->size()), argmax->data(), g.data());
        xc.accumulate_grad(g.data());
    });
    kern::maxpool_forward(x.data(), N, C, H, W, window, out.data(), argmax->data());
    return out;
}

Tensor upsample_nn(const Tensor& x, int factor) {
    if (x.ndim() != 4)
        throw std::invalid_argument("upsample_nn: expected [N,C,H,W], got " +
                                    Tensor::shape_str(x.shape()));
    if (factor < 1) throw std::invalid_argument("upsample_nn: factor must be >= 1");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor xc = x;
    Tensor out =
        make_node({N, C, H * factor, W * factor}, "upsample_nn", {x},
                  [xc, N, C, H, W, factor](TensorData& self) mutable {
                      if (!xc.requires_grad()) return;
                      std::vector<double> g(size_t(xc.numel()), 0.0);
                      kern::upsample_backward(self.grad.data(), N, C, H, W, factor, g.data());
                      xc.accumulate_grad(g.data());
                  });
    kern::upsample_forward(x.data(), N, C, H, W, factor, out.data());
    return out;
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.ndim() != 2 || w.ndim() != 2 || b.ndim() != 1)
        throw std::invalid_argument("dense: expected x[N,D], w[D,M], b[M]; got x" +
                                    Tensor::shape_str(x.shape()) + " w" +
                                    Tensor::shape_str(w.shape()) + " b" +
                                    Tensor::shape_str(b.shape()));
    const int N = x.dim(0), D = x.dim(1), M = w.dim(1);
    if (w.dim(0) != D)
        throw std::invalid_argument("dense: inner dimensions disagree, x" +
                                    Tensor::shape_str(x.shape()) + " vs w" +
                                    Tensor::shape_str(w.shape()));
    if (b.dim(0) != M)
        throw std::invalid_argument("dense: bias size " + std::to_string(b.dim(0)) +
                                    " does not match output width " + std::to_string(M));
    Tensor xc = x, wc = w, bc = b;
    Tensor out = make_node({N, M}, "dense", {x, w, b}, [xc, wc, bc, N, D, M](TensorData& self) mutable {
        double* dx = xc.requires_grad() ? xc.grad().data() : nullptr;
        double* dw = wc.requires_grad() ? wc.grad().data() : nullptr;
        double* db = bc.requires_grad() ? bc.grad().data() : nullptr;
        kern::dense_backward(xc.data(), N, D, wc.data(), M, self.grad.data(), dx, dw, db);
    });
    kern::dense_forward(x.data(), N, D, w.data(), b.data(), M, out.data());
    return out;
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
    if (Tensor::count(shape) != x.numel())
        throw std::invalid_argument("reshape: new shape " + Tensor::shape_str(shape) +
                                    " does not preserve element count of " +
                                    Tensor::shape_str(x.shape()));
    Tensor xc = x;
    Tensor out = make_node(std::move(shape), "reshape", {x}, [xc](TensorData& self) mutable {
        xc.accumulate_grad(self.grad.data());
    });
    out.values() = x.values();
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 4 || b.ndim() != 4 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) ||
        a.dim(3) != b.dim(3))
        throw std::invalid_argument("concat_channels: incompatible shapes " +
                                    Tensor::shape_str(a.shape()) + " vs " +
                                    Tensor::shape_str(b.shape()));
    const int N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2), W = a.dim(3);
    const int64_t plane = int64_t(H) * W;
    Tensor ac = a, bc = b;
    Tensor out = make_node({N, Ca + Cb, H, W}, "concat_channels", {a, b},
                           [ac, bc, N, Ca, Cb, plane](TensorData& self) mutable {
                               const int64_t astride = Ca * plane, bstride = Cb * plane;
                               if (ac.requires_grad()) {
                                   std::vector<double> g(size_t(ac.numel()));
                                   for (int n = 0; n < N; ++n)
                                       std::copy_n(self.grad.data() + n * (astride + bstride),
                                                   astride, g.data() + n * astride);
                                   ac.accumulate_grad(g.data());
                               }
                               if (bc.requires_grad()) {
                                   std::vector<double> g(size_t(bc.numel()));
                                   for (int n = 0; n < N; ++n)
                                       std::copy_n(self.grad.data() + n * (astride + bstride) +
                                                       astride,
                                                   bstride, g.data() + n * bstride);
                                   bc.accumulate_grad(g.data());
                               }
                           });
    const int64_t astride = Ca * plane, bstride = Cb * plane;
    for (int n = 0; n < N; ++n) {
        std::copy_n(a.data() + n * astride, astride, out.data() + n * (astride + bstride));
        std::copy_n(b.data() + n * bstride, bstride,
                    out.data() + n * (astride + bstride) + astride);
    }
    return out;
}

Tensor weighted_pixel_bce(const Tensor& prob, const Tensor& target, const Tensor& weight) {
    check_same_shape(prob, target, "weighted_pixel_bce");
    check_same_shape(prob, weight, "weighted_pixel_bce");
    const int64_t n = prob.numel();
    double sumw = 0;
    for (int64_t i = 0; i < n; ++i) {
        if (weight.data()[i] < 0)
            throw std::invalid_argument("weighted_pixel_bce: negative weight at index " +
                                        std::to_string(i));
        sumw += weight.data()[i];
    }
    if (sumw == 0.0)
        throw std::invalid_argument("weighted_pixel_bce: all-zero weight map (normalization undefined)");

    const double lo = kProbClamp, hi = 1.0 - kProbClamp;
    Tensor pc = prob, tc = target, wc = weight;
    Tensor out = make_node({1}, "weighted_pixel_bce", {prob, target, weight},
                           [pc, tc, wc, sumw, lo, hi, n](TensorData& self) mutable {
                               if (!pc.requires_grad()) return;
                               const double gs = self.grad[0] / sumw;
                               std::vector<double> g(size_t(n), 0.0);
                               for (int64_t i = 0; i < n; ++i) {
                                   double p = pc.data()[i];
                                   if (p <= lo || p >= hi) {
                                       g[i] = 0.0;  // clamp region: flat
                                       continue;
                                   }
                                   double t = tc.data()[i];
                                   g[i] = -gs * wc.data()[i] * (t / p - (1.0 - t) / (1.0 - p));
                               }
                               pc.accumulate_grad(g.data());
                           });
    double acc = 0;
    for (int64_t i = 0; i < n; ++i) {
        double p = std::min(std::max(prob.data()[i], lo), hi);
        double t = target.data()[i];
        acc += weight.data()[i] * (t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
    }
    out.values()[0] = -acc / sumw;
    return out;
}

Tensor class_cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
    if (probs.ndim() != 2)
        throw std::invalid_argument("class_cross_entropy: expected [N,K], got " +
                                    Tensor::shape_str(probs.shape()));
    const int N = probs.dim(0), K = probs.dim(1);
    if (int(labels.size()) != N)
        throw std::invalid_argument("class_cross_entropy: " + std::to_string(labels.size()) +
                                    " labels for " + std::to_string(N) + " rows");
    for (int n = 0; n < N; ++n)
        if (labels[size_t(n)] < 0 || labels[size_t(n)] >= K)
            throw std::invalid_argument("class_cross_entropy: label " +
                                        std::to_string(labels[size_t(n)]) + " out of range [0," +
                                        std::to_string(K) + ")");
    const double lo = kProbClamp, hi = 1.0 - kProbClamp;
    Tensor pc = probs;
    std::vector<int> lab = labels;
    Tensor out = make_node({1}, "class_cross_entropy", {probs},
                           [pc, lab, N, K, lo, hi](TensorData& self) mutable {
                               if (!pc.requires_grad()) return;
                               const double gs = self.grad[0] / N;
                               std::vector<double> g(size_t(pc.numel()), 0.0);
                               for (int n = 0; n < N; ++n) {
                                   double p = pc.data()[int64_t(n) * K + lab[size_t(n)]];
                                   if (p <= lo || p >= hi) continue;
                                   g[int64_t(n) * K + lab[size_t(n)]] = -gs / p;
                               }
                               pc.accumulate_grad(g.data());
                           });
    double acc = 0;
    for (int n = 0; n < N; ++n) {
        double p = probs.data()[int64_t(n) * K + labels[size_t(n)]];
        acc += -std::log(std::min(std::max(p, lo), hi));
    }
    out.values()[0] = acc / N;
    return out;
}

}  // namespace lk::ops

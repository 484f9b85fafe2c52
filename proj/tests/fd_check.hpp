#pragma once

// Central-difference gradient oracle shared by the op tests. The scalar
// probe loss is sum(out * R) for a fixed random R, so every output element
// contributes with a distinct weight.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "lk/ops.hpp"
#include "lk/rng.hpp"
#include "lk/tensor.hpp"

namespace fd {

struct Report {
    double max_rel_err = 0.0;
    long checked = 0;
};

// fwd must rebuild the graph from the same input tensors on every call
// (values are perturbed in place between calls).
inline Report check(const std::function<lk::Tensor()>& fwd, std::vector<lk::Tensor> inputs,
                    uint64_t seed = 42, double h = 1e-5) {
    lk::Tensor out0 = fwd();
    lk::Rng rng(seed);
    std::vector<double> r(size_t(out0.numel()));
    for (double& v : r) v = rng.uniform(-1.0, 1.0);

    lk::Tensor rt = lk::Tensor::from_data(out0.shape(), r);
    lk::Tensor loss = lk::ops::sum(lk::ops::mul(out0, rt));
    lk::backward(loss);

    auto loss_at = [&]() {
        lk::Tensor out = fwd();
        double s = 0;
        for (int64_t i = 0; i < out.numel(); ++i) s += out.data()[i] * r[size_t(i)];
        return s;
    };

    Report rep;
    for (auto& in : inputs) {
        const std::vector<double> g = in.grad();
        for (int64_t i = 0; i < in.numel(); ++i) {
            double keep = in.data()[i];
            in.values()[size_t(i)] = keep + h;
            double lp = loss_at();
            in.values()[size_t(i)] = keep - h;
            double lm = loss_at();
            in.values()[size_t(i)] = keep;
            double fdg = (lp - lm) / (2.0 * h);
            double a = g[size_t(i)];
            double rel = std::fabs(a - fdg) / std::max({std::fabs(a), std::fabs(fdg), 1e-3});
            rep.max_rel_err = std::max(rep.max_rel_err, rel);
            ++rep.checked;
        }
    }
    return rep;
}

inline lk::Tensor random_tensor(std::vector<int> shape, lk::Rng& rng, bool requires_grad = true,
                                double lo = -1.0, double hi = 1.0) {
    lk::Tensor t = lk::Tensor::zeros(std::move(shape), requires_grad);
    for (double& v : t.values()) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace fd

#pragma once

#include "lk/rng.hpp"
#include "lk/tensor.hpp"

// Graph-building operations over Tensor. Each op computes its forward value
// eagerly and attaches a backprop closure; backward(loss) runs the sweep.

namespace lk::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor sum(const Tensor& a);                   // full reduction to a scalar

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softmax(const Tensor& x);  // rows of [N,K], max-subtracted

// training mode: zero with probability rate, survivors scaled by 1/(1-rate);
// eval mode: identity
Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training);

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding);
Tensor maxpool2d(const Tensor& x, int window);
Tensor upsample_nn(const Tensor& x, int factor);
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor concat_channels(const Tensor& a, const Tensor& b);  // along dim 1 of [N,C,H,W]

// -sum(w * (t*ln p + (1-t)*ln(1-p))) / sum(w), p clamped to [1e-7, 1-1e-7]
Tensor weighted_pixel_bce(const Tensor& prob, const Tensor& target, const Tensor& weight);

// mean over rows of -ln p[label], same clamping
Tensor class_cross_entropy(const Tensor& probs, const std::vector<int>& labels);

constexpr double kProbClamp = 1e-7;

}  // namespace lk::ops

#pragma once

#include <cstdint>
#include <vector>

#include "lk/models.hpp"

namespace lk {

struct AdamState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t t = 0;
    std::vector<std::vector<double>> m, v;  // aligned with model parameter order
};

AdamState make_adam(const Model& model, double lr);

// standard Adam with bias correction; clears every gradient afterward so a
// forgotten zero_grad cannot double-count
void adam_step(Model& model, AdamState& st);

double constant_lr_schedule(const AdamState& st);

}  // namespace lk

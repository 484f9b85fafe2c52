#include "lk/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace lk {

AdamState make_adam(const Model& model, double lr) {
    AdamState st;
    st.lr = lr;
    st.m.reserve(model.params.size());
    st.v.reserve(model.params.size());
    for (const auto& p : model.params) {
        st.m.emplace_back(size_t(p.tensor.numel()), 0.0);
        st.v.emplace_back(size_t(p.tensor.numel()), 0.0);
    }
    return st;
}

void adam_step(Model& model, AdamState& st) {
    if (st.m.size() != model.params.size() || st.v.size() != model.params.size())
        throw std::invalid_argument("adam_step: state holds " + std::to_string(st.m.size()) +
                                    " moment arrays for " + std::to_string(model.params.size()) +
                                    " parameters");
    for (const auto& p : model.params)
        if (!p.tensor.has_grad())
            throw std::invalid_argument("adam_step: missing gradient on parameter '" + p.name +
                                        "'");

    st.t += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, double(st.t));
    const double bc2 = 1.0 - std::pow(st.beta2, double(st.t));
    for (size_t pi = 0; pi < model.params.size(); ++pi) {
        Tensor& th = model.params[pi].tensor;
        const std::vector<double>& g = th.grad();
        std::vector<double>& m = st.m[pi];
        std::vector<double>& v = st.v[pi];
        double* w = th.data();
        const int64_t n = th.numel();
        for (int64_t i = 0; i < n; ++i) {
            m[size_t(i)] = st.beta1 * m[size_t(i)] + (1.0 - st.beta1) * g[size_t(i)];
            v[size_t(i)] = st.beta2 * v[size_t(i)] + (1.0 - st.beta2) * g[size_t(i)] * g[size_t(i)];
            double mhat = m[size_t(i)] / bc1;
            double vhat = v[size_t(i)] / bc2;
            w[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
        }
        th.zero_grad();
    }
}

double constant_lr_schedule(const AdamState& st) { return st.lr; }

}  // namespace lk

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace lk {

class Tensor;

// Node payload: values plus optional gradient and graph linkage. Ops create
// these; Tensor is a cheap shared handle whose pointer identity is the node
// identity during backward traversal.
struct TensorData {
    std::vector<int> shape;
    std::vector<double> values;
    std::vector<double> grad;  // sized lazily, only where gradient flows
    bool requires_grad = false;

    // graph linkage, present on op outputs until backward() releases it
    const char* op_tag = nullptr;
    std::vector<Tensor> parents;
    std::function<void(TensorData&)> backprop;  // reads own grad, accumulates into parents
};

class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
        Tensor t;
        t.p_ = std::make_shared<TensorData>();
        t.p_->shape = std::move(shape);
        t.p_->values.assign(count(t.p_->shape), 0.0);
        t.p_->requires_grad = requires_grad;
        return t;
    }

    static Tensor full(std::vector<int> shape, double v, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (double& x : t.values()) x = v;
        return t;
    }

    static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                            bool requires_grad = false) {
        if (count(shape) != int64_t(data.size()))
            throw std::invalid_argument("tensor: data length " + std::to_string(data.size()) +
                                        " does not match shape product " +
                                        std::to_string(count(shape)));
        Tensor t;
        t.p_ = std::make_shared<TensorData>();
        t.p_->shape = std::move(shape);
        t.p_->values = std::move(data);
        t.p_->requires_grad = requires_grad;
        return t;
    }

    bool defined() const { return p_ != nullptr; }
    const std::vector<int>& shape() const { return p_->shape; }
    int dim(int i) const { return p_->shape[size_t(i)]; }
    int ndim() const { return int(p_->shape.size()); }
    int64_t numel() const { return int64_t(p_->values.size()); }

    std::vector<double>& values() { return p_->values; }
    const std::vector<double>& values() const { return p_->values; }
    double* data() { return p_->values.data(); }
    const double* data() const { return p_->values.data(); }

    bool requires_grad() const { return p_->requires_grad; }
    void set_requires_grad(bool b) { p_->requires_grad = b; }

    bool has_grad() const { return !p_->grad.empty(); }
    std::vector<double>& grad() {
        if (p_->grad.empty()) p_->grad.assign(p_->values.size(), 0.0);
        return p_->grad;
    }
    const std::vector<double>& grad() const { return p_->grad; }
    void zero_grad() { p_->grad.clear(); }

    // accumulate g into this tensor's gradient (no-op unless requires_grad)
    void accumulate_grad(const double* g) {
        if (!p_->requires_grad) return;
        std::vector<double>& dst = grad();
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
    }

    TensorData* node() const { return p_.get(); }

    // graph-lifetime diagnostic: leaves return to their baseline count once
    // every op output referencing them is dropped
    long use_count() const { return p_.use_count(); }

    bool same_shape(const Tensor& o) const { return p_->shape == o.p_->shape; }

    static int64_t count(const std::vector<int>& shape) {
        int64_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension");
            n *= d;
        }
        return n;
    }

    static std::string shape_str(const std::vector<int>& s) {
        std::string r = "[";
        for (size_t i = 0; i < s.size(); ++i) {
            if (i) r += ",";
            r += std::to_string(s[i]);
        }
        return r + "]";
    }

  private:
    std::shared_ptr<TensorData> p_;
};

// Reverse-mode sweep from a scalar loss. Every requires_grad tensor reachable
// from `loss` gets its grad populated; gradients from multiple uses of a
// tensor accumulate additively. Visits each node exactly once in reverse
// topological order, then releases the graph edges so intermediate
// activations can be freed while leaf gradients stay in place.
void backward(Tensor loss);

}  // namespace lk

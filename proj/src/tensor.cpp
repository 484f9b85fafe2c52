#include "lk/tensor.hpp"

#include <unordered_set>

namespace lk {

void backward(Tensor loss) {
    if (!loss.defined()) throw std::invalid_argument("backward: undefined tensor");
    if (loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                    Tensor::shape_str(loss.shape()));

    // iterative DFS post-order; post-order reversed = topological order.
    // order holds owning handles: clearing parents below must not free a
    // node that is still waiting for its own backprop call.
    std::vector<Tensor> order;
    std::unordered_set<TensorData*> visited;
    std::vector<std::pair<Tensor, size_t>> stack;  // (node, next parent index)
    stack.emplace_back(loss, 0);
    visited.insert(loss.node());
    while (!stack.empty()) {
        auto& [t, idx] = stack.back();
        TensorData* n = t.node();
        if (idx < n->parents.size()) {
            Tensor p = n->parents[idx++];
            if (!visited.count(p.node())) {
                visited.insert(p.node());
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(t);
            stack.pop_back();
        }
    }

    loss.grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorData* n = it->node();
        if (n->backprop && !n->grad.empty()) n->backprop(*n);
        // release graph edges; leaves keep their gradients
        n->backprop = nullptr;
        n->parents.clear();
    }
}

}  // namespace lk

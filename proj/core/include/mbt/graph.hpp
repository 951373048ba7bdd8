#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mbt/tensor.hpp"

namespace mbt {

// A learnable tensor. `grad` always has the same shape as `value`; it is
// accumulated across backward passes until the optimizer consumes it.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Parameter() = default;
    Parameter(std::string n, Tensor<T> v)
        : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

    void zero_grad() { grad.fill(T(0)); }
};

// Reverse-mode autodiff tape. Nodes are appended in creation order, which
// is by construction a topological order, so backward() is a single reverse
// sweep. Gradients on fan-out accumulate additively.
template <typename T>
class Graph {
public:
    using NodeId = int;

    // backward callback: given the tape and the node's own id, read
    // grad(self) and accumulate into the gradients of the node's inputs.
    using BackwardFn = std::function<void(Graph&, NodeId)>;

    NodeId constant(Tensor<T> v) { return push(std::move(v), nullptr, {}); }

    NodeId param(Parameter<T>& p) {
        // the value is copied so later optimizer updates cannot alias a
        // graph that is still alive
        return push(p.value, &p, {});
    }

    NodeId emit(Tensor<T> value, std::vector<NodeId> inputs, BackwardFn fn) {
        for (NodeId i : inputs) check_id(i, "emit input");
        NodeId id = push(std::move(value), nullptr, std::move(inputs));
        nodes_[static_cast<std::size_t>(id)].backward = std::move(fn);
        return id;
    }

    // Reference remains valid for the lifetime of the graph: node storage
    // never relocates elements when the tape grows.
    const Tensor<T>& val(NodeId id) const {
        check_id(id, "val");
        return nodes_[static_cast<std::size_t>(id)].value;
    }

    // gradient slot, zero-initialized on first touch
    Tensor<T>& grad(NodeId id) {
        check_id(id, "grad");
        auto& g = grads_[static_cast<std::size_t>(id)];
        if (g.numel() == 0 && nodes_[static_cast<std::size_t>(id)].value.numel() != 0) {
            g = Tensor<T>(nodes_[static_cast<std::size_t>(id)].value.shape());
        }
        return g;
    }

    bool grad_touched(NodeId id) const {
        return grads_[static_cast<std::size_t>(id)].numel() != 0;
    }

    const std::vector<NodeId>& inputs(NodeId id) const {
        check_id(id, "inputs");
        return nodes_[static_cast<std::size_t>(id)].inputs;
    }

    int size() const { return static_cast<int>(nodes_.size()); }

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse creation
    // order. Parameter leaves accumulate into Parameter::grad.
    void backward(NodeId loss) {
        check_id(loss, "backward");
        const Tensor<T>& lv = nodes_[static_cast<std::size_t>(loss)].value;
        if (lv.numel() != 1) {
            throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                        shape_str(lv.shape()));
        }
        grad(loss)[0] = T(1);
        for (NodeId id = loss; id >= 0; --id) {
            auto& node = nodes_[static_cast<std::size_t>(id)];
            if (!grad_touched(id)) continue;  // not reachable from the loss
            if (node.backward) node.backward(*this, id);
            if (node.param != nullptr) {
                const Tensor<T>& g = grads_[static_cast<std::size_t>(id)];
                Tensor<T>& pg = node.param->grad;
                for (std::int64_t i = 0; i < g.numel(); ++i) pg[i] += g[i];
            }
        }
    }

private:
    struct Node {
        Tensor<T> value;
        Parameter<T>* param = nullptr;
        std::vector<NodeId> inputs;
        BackwardFn backward;
    };

    NodeId push(Tensor<T> value, Parameter<T>* p, std::vector<NodeId> inputs) {
        Node n;
        n.value = std::move(value);
        n.param = p;
        n.inputs = std::move(inputs);
        nodes_.push_back(std::move(n));
        grads_.emplace_back();
        return static_cast<NodeId>(nodes_.size()) - 1;
    }

    void check_id(NodeId id, const char* where) const {
        if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) {
            throw std::out_of_range(std::string("graph: bad node id in ") + where + ": " +
                                    std::to_string(id));
        }
    }

    // deques so val()/grad() references stay valid while the tape grows
    std::deque<Node> nodes_;
    std::deque<Tensor<T>> grads_;
};

}  // namespace mbt

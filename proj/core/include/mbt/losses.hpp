#pragma once

#include <stdexcept>
#include <string>

#include "mbt/graph.hpp"
#include "mbt/model.hpp"
#include "mbt/ops.hpp"

namespace mbt {

// Ground-truth triplet for one sample, each (1,1,H,W): the expert final
// mask plus the edge and body masks derived from it.
template <typename T>
struct MaskTriplet {
    Tensor<T> final_mask, edge_mask, body_mask;
};

struct LossWeights {
    double body = 0.5, edge = 0.5, final_weight = 1.2;

    void validate() const {
        if (body < 0 || edge < 0 || final_weight < 0) {
            throw std::invalid_argument("loss weights: negative weight");
        }
        if (body == 0 && edge == 0 && final_weight == 0) {
            throw std::invalid_argument("loss weights: at least one weight must be positive");
        }
    }
};

// Weighted per-branch components; `total` is the graph node of the joint
// loss. Components are reported already multiplied by their weight, so a
// disabled branch contributes exactly 0.
template <typename T>
struct JointLossResult {
    typename Graph<T>::NodeId total = -1;
    double body = 0.0, edge = 0.0, final_comp = 0.0;
};

// joint = w_body * BCE(body) + w_edge * BCE(edge) + w_final * BCE(final).
// Branches with zero weight are skipped entirely (no graph nodes, no
// gradient flow).
template <typename T>
JointLossResult<T> joint_loss(Graph<T>& g, const BranchOutputs<T>& out,
                              const MaskTriplet<T>& target, const LossWeights& w) {
    w.validate();
    if (!out.has_branches && (w.body > 0 || w.edge > 0)) {
        throw std::invalid_argument(
            "joint_loss: body/edge weights require a model built with the decoupling branches");
    }
    JointLossResult<T> res;
    typename Graph<T>::NodeId total = -1;
    auto accumulate = [&](typename Graph<T>::NodeId logits, const Tensor<T>& tgt, double weight,
                          double& component) {
        if (weight == 0) return;
        auto term = ops::scale(g, ops::bce_with_logits(g, logits, tgt), static_cast<T>(weight));
        component = static_cast<double>(g.val(term).value());
        total = total < 0 ? term : ops::add(g, total, term);
    };
    accumulate(out.body_logits, target.body_mask, w.body, res.body);
    accumulate(out.edge_logits, target.edge_mask, w.edge, res.edge);
    accumulate(out.final_logits, target.final_mask, w.final_weight, res.final_comp);
    res.total = total;
    return res;
}

}  // namespace mbt

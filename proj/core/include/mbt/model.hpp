#pragma once

#include <array>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "mbt/blocks.hpp"
#include "mbt/graph.hpp"
#include "mbt/ops.hpp"

namespace mbt {

// ------------------------------------------------------------------ config

struct ModelConfig {
    int tr_depth = 2;                        // how many of the deepest stages are transformer
    std::array<int, 4> widths{32, 64, 128, 256};
    int heads = 8;
    int span = 48;                           // axial attention span m
    int input_h = 192, input_w = 192;
    bool body_edge = true;                   // build the body/edge decoupling branches
    int bottleneck_div = 2;

    // stages are numbered 1..4; the deepest tr_depth of them are transformer
    bool stage_is_transformer(int stage) const { return stage > 4 - tr_depth; }

    void validate() const {
        if (tr_depth < 0 || tr_depth > 4) {
            throw std::invalid_argument("model config: tr_depth must be in [0,4], got " +
                                        std::to_string(tr_depth));
        }
        for (int i = 0; i < 4; ++i) {
            if (widths[static_cast<std::size_t>(i)] < 1) {
                throw std::invalid_argument("model config: widths[" + std::to_string(i) +
                                            "] must be positive");
            }
        }
        if (heads < 1) throw std::invalid_argument("model config: heads must be >= 1");
        if (span < 1) throw std::invalid_argument("model config: span must be >= 1");
        if (input_h < 8 || input_w < 8 || input_h % 8 != 0 || input_w % 8 != 0) {
            throw std::invalid_argument("model config: input size " + std::to_string(input_h) +
                                        "x" + std::to_string(input_w) +
                                        " must be divisible by 8 (three 2x downsamplings)");
        }
        if (bottleneck_div < 1) {
            throw std::invalid_argument("model config: bottleneck_div must be >= 1");
        }
        for (int s = 1; s <= 4; ++s) {
            if (!stage_is_transformer(s)) continue;
            int w = widths[static_cast<std::size_t>(s - 1)];
            if (w % bottleneck_div != 0 || (w / bottleneck_div) % heads != 0) {
                throw std::invalid_argument(
                    "model config: stage " + std::to_string(s) + " width " + std::to_string(w) +
                    " is incompatible with bottleneck_div " + std::to_string(bottleneck_div) +
                    " and heads " + std::to_string(heads));
            }
        }
    }
};

// ------------------------------------------------------------------ outputs

// Node ids of the three supervised logit maps plus, when retention is
// requested, the branch intermediates needed to audit the decoupling wiring.
template <typename T>
struct BranchOutputs {
    using Id = typename Graph<T>::NodeId;
    Id final_logits = -1;
    Id edge_logits = -1;
    Id body_logits = -1;
    bool has_branches = false;

    // retained intermediates (-1 unless retain_intermediates was set)
    Id fused = -1;           // F, the decoder output
    Id body_features = -1;   // F_body = phi(F)
    Id edge_residual = -1;   // D = F - F_body
    Id psi_skip = -1;        // psi(e1)
    Id edge_features = -1;   // F_edge = D + psi(e1)
    Id final_features = -1;  // max(F, F_edge, F_body)
};

// ------------------------------------------------------------------ network

// Four-stage encoder/decoder with symmetric stage kinds and skip
// refinement, plus the body/edge decoupling head. Stage kind is conv or
// transformer per ModelConfig::tr_depth.
template <typename T>
class MBTNet {
public:
    using Id = typename Graph<T>::NodeId;

    MBTNet(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        std::mt19937_64 rng(seed);
        build(rng);
        register_params();
    }

    // parameters() hands out pointers into this object
    MBTNet(const MBTNet&) = delete;
    MBTNet& operator=(const MBTNet&) = delete;

    const ModelConfig& config() const { return cfg_; }

    std::vector<Parameter<T>*>& parameters() { return params_; }
    const std::vector<Parameter<T>*>& parameters() const { return params_; }

    std::int64_t parameter_count() const {
        std::int64_t n = 0;
        for (const auto* p : params_) n += p->value.numel();
        return n;
    }

    void zero_grads() {
        for (auto* p : params_) p->zero_grad();
    }

    // image: (B,1,H,W) with H,W equal to the configured input size
    BranchOutputs<T> forward(Graph<T>& g, Id image, bool retain_intermediates = false) {
        const Tensor<T>& x = g.val(image);
        ops::detail::require_rank(x, 4, "mbt_net", "image");
        if (x.extent(1) != 1) {
            throw std::invalid_argument("mbt_net: expected a single input channel, got " +
                                        std::to_string(x.extent(1)));
        }
        if (x.extent(2) != cfg_.input_h || x.extent(3) != cfg_.input_w) {
            throw std::invalid_argument("mbt_net: input " + std::to_string(x.extent(2)) + "x" +
                                        std::to_string(x.extent(3)) + " does not match configured " +
                                        std::to_string(cfg_.input_h) + "x" +
                                        std::to_string(cfg_.input_w));
        }

        std::array<Id, 4> enc{};
        Id h = image;
        for (int s = 0; s < 4; ++s) {
            h = encoder_[static_cast<std::size_t>(s)].forward(g, h);
            enc[static_cast<std::size_t>(s)] = h;
        }

        Id d = decoder_[0].forward(g, enc[3], -1);           // d4: bottleneck, no skip
        d = decoder_[1].forward(g, d, enc[2]);               // d3
        d = decoder_[2].forward(g, d, enc[1]);               // d2
        d = decoder_[3].forward(g, d, enc[0]);               // d1 -> F

        BranchOutputs<T> out;
        out.has_branches = cfg_.body_edge;
        Id F = d;
        if (!cfg_.body_edge) {
            out.final_logits = final_head_->forward(g, F);
            Tensor<T> z(Shape{x.extent(0), 1, cfg_.input_h, cfg_.input_w});
            out.edge_logits = g.constant(z);
            out.body_logits = g.constant(std::move(z));
            if (retain_intermediates) out.fused = F;
            return out;
        }

        Id body = phi2_->forward(g, ops::relu(g, phi_norm1_->forward(g, phi1_->forward(g, F))));
        body = ops::relu(g, phi_norm2_->forward(g, body));
        Id diff = ops::sub(g, F, body);
        Id psi = psi_->forward(g, enc[0]);
        Id edge = ops::add(g, diff, psi);
        Id fin = ops::max3(g, F, edge, body);

        out.final_logits = final_head_->forward(g, fin);
        out.edge_logits = edge_head_->forward(g, edge);
        out.body_logits = body_head_->forward(g, body);
        if (retain_intermediates) {
            out.fused = F;
            out.body_features = body;
            out.edge_residual = diff;
            out.psi_skip = psi;
            out.edge_features = edge;
            out.final_features = fin;
        }
        return out;
    }

    void visit(const ParamVisitor<T>& v) {
        static const char* enc_names[4] = {"e1", "e2", "e3", "e4"};
        static const char* dec_names[4] = {"d4", "d3", "d2", "d1"};
        for (int s = 0; s < 4; ++s) encoder_[static_cast<std::size_t>(s)].visit(enc_names[s], v);
        for (int s = 0; s < 4; ++s) decoder_[static_cast<std::size_t>(s)].visit(dec_names[s], v);
        if (phi1_) {
            phi1_->visit("phi.conv1", v);
            phi_norm1_->visit("phi.norm1", v);
            phi2_->visit("phi.conv2", v);
            phi_norm2_->visit("phi.norm2", v);
            psi_->visit("psi", v);
        }
        final_head_->visit("head.final", v);
        if (edge_head_) {
            edge_head_->visit("head.edge", v);
            body_head_->visit("head.body", v);
        }
    }

private:
    struct EncoderStage {
        bool transformer = false;
        std::optional<Conv2dLayer<T>> trans_conv;  // transition into a transformer stage
        std::optional<InstanceNorm2d<T>> trans_norm;
        std::optional<ConvResidualBlock<T>> c1, c2;
        std::optional<ResidualTransformerBlock<T>> t1, t2;

        Id forward(Graph<T>& g, Id x) {
            if (!transformer) return c2->forward(g, c1->forward(g, x));
            Id h = ops::relu(g, trans_norm->forward(g, trans_conv->forward(g, x)));
            return t2->forward(g, t1->forward(g, h));
        }

        void visit(const std::string& prefix, const ParamVisitor<T>& v) {
            if (!transformer) {
                c1->visit(prefix + ".b1", v);
                c2->visit(prefix + ".b2", v);
            } else {
                trans_conv->visit(prefix + ".trans.conv", v);
                trans_norm->visit(prefix + ".trans.norm", v);
                t1->visit(prefix + ".b1", v);
                t2->visit(prefix + ".b2", v);
            }
        }
    };

    struct DecoderStage {
        bool transformer = false;
        std::optional<Conv2dLayer<T>> up_proj;  // 1x1 after bilinear 2x
        std::optional<Conv2dLayer<T>> refine;   // 1x1 on concat(t, skip)
        std::optional<ConvResidualBlock<T>> c1, c2;
        std::optional<ResidualTransformerBlock<T>> t1, t2;

        // skip < 0 marks the bottleneck stage (d4): x is consumed directly
        Id forward(Graph<T>& g, Id x, Id skip) {
            Id h = x;
            if (skip >= 0) {
                h = up_proj->forward(g, ops::upsample_bilinear2x(g, x));
                Id cat = ops::concat_channels(g, std::vector<Id>{h, skip});
                h = ops::add(g, h, refine->forward(g, cat));
            }
            if (!transformer) return c2->forward(g, c1->forward(g, h));
            return t2->forward(g, t1->forward(g, h));
        }

        void visit(const std::string& prefix, const ParamVisitor<T>& v) {
            if (up_proj) up_proj->visit(prefix + ".up", v);
            if (refine) refine->visit(prefix + ".refine", v);
            if (!transformer) {
                c1->visit(prefix + ".b1", v);
                c2->visit(prefix + ".b2", v);
            } else {
                t1->visit(prefix + ".b1", v);
                t2->visit(prefix + ".b2", v);
            }
        }
    };

    void build(std::mt19937_64& rng) {
        // encoder: stage s takes widths[s-2] -> widths[s-1] (stage 1: 1 -> w1)
        for (int s = 1; s <= 4; ++s) {
            EncoderStage st;
            int cin = s == 1 ? 1 : cfg_.widths[static_cast<std::size_t>(s - 2)];
            int cout = cfg_.widths[static_cast<std::size_t>(s - 1)];
            int stride = s == 1 ? 1 : 2;
            st.transformer = cfg_.stage_is_transformer(s);
            if (!st.transformer) {
                st.c1.emplace(cin, cout, stride, rng);
                st.c2.emplace(cout, cout, 1, rng);
            } else {
                // transformer blocks preserve shape, so the stage transition
                // (stride / width change) happens in a dedicated conv
                int k = stride == 2 ? 3 : 1;
                st.trans_conv.emplace(cin, cout, k, stride, k == 3 ? 1 : 0, rng);
                st.trans_norm.emplace(cout);
                st.t1.emplace(cout, cfg_.heads, cfg_.span, rng, cfg_.bottleneck_div);
                st.t2.emplace(cout, cfg_.heads, cfg_.span, rng, cfg_.bottleneck_div);
            }
            encoder_.push_back(std::move(st));
        }
        // decoder: d4 (bottleneck) then d3, d2, d1
        for (int s = 4; s >= 1; --s) {
            DecoderStage st;
            int w = cfg_.widths[static_cast<std::size_t>(s - 1)];
            st.transformer = cfg_.stage_is_transformer(s);
            if (s != 4) {
                int win = cfg_.widths[static_cast<std::size_t>(s)];
                st.up_proj.emplace(win, w, 1, 1, 0, rng);
                st.refine.emplace(2 * w, w, 1, 1, 0, rng);
            }
            if (!st.transformer) {
                st.c1.emplace(w, w, 1, rng);
                st.c2.emplace(w, w, 1, rng);
            } else {
                st.t1.emplace(w, cfg_.heads, cfg_.span, rng, cfg_.bottleneck_div);
                st.t2.emplace(w, cfg_.heads, cfg_.span, rng, cfg_.bottleneck_div);
            }
            decoder_.push_back(std::move(st));
        }

        int w1 = cfg_.widths[0];
        if (cfg_.body_edge) {
            phi1_.emplace(w1, w1, 3, 1, 1, rng);
            phi_norm1_.emplace(w1);
            phi2_.emplace(w1, w1, 3, 1, 1, rng);
            phi_norm2_.emplace(w1);
            psi_.emplace(w1, w1, 1, 1, 0, rng);
        }
        final_head_.emplace(w1, 1, 1, 1, 0, rng);
        if (cfg_.body_edge) {
            edge_head_.emplace(w1, 1, 1, 1, 0, rng);
            body_head_.emplace(w1, 1, 1, 1, 0, rng);
        }
    }

    void register_params() {
        params_.clear();
        std::unordered_set<std::string> seen;
        visit([&](const std::string& path, Parameter<T>& p) {
            p.name = path;
            if (!seen.insert(path).second) {
                throw std::logic_error("mbt_net: duplicate parameter name " + path);
            }
            params_.push_back(&p);
        });
    }

    ModelConfig cfg_;
    std::vector<EncoderStage> encoder_;
    std::vector<DecoderStage> decoder_;
    std::optional<Conv2dLayer<T>> phi1_, phi2_;
    std::optional<InstanceNorm2d<T>> phi_norm1_, phi_norm2_;
    std::optional<Conv2dLayer<T>> psi_;
    std::optional<Conv2dLayer<T>> final_head_, edge_head_, body_head_;
    std::vector<Parameter<T>*> params_;
};

}  // namespace mbt

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "aforge/errors.hpp"
#include "aforge/ops.hpp"
#include "aforge/tensor.hpp"

// Text-Guided Enhancer: gate weights from the interaction between the global
// image feature and the per-category template embeddings, then a gated sum of
// expert transforms. With a single-token input the attention blocks reduce to
// their value path in residual form, Attn(x) = x + value(x); that closed form
// is implemented directly.

namespace aforge {

/// One expert: a single-token attention block (value path plus residual)
/// followed by a two-layer feed-forward map c1 -> 2*c1 -> c_emb.
struct ExpertParams {
    Tensor value_w;  // c1 x c1
    Tensor value_b;  // c1
    Tensor ff1_w;    // c1 x 2*c1
    Tensor ff1_b;    // 2*c1
    Tensor ff2_w;    // 2*c1 x c_emb
    Tensor ff2_b;    // c_emb
};

struct TgeParams {
    Tensor gate_value_w;  // c1 x c1, the gate's attention value path
    Tensor gate_value_b;  // c1
    Tensor align_w;       // c2 x c1, aligns category embeddings to image space
    Tensor align_b;       // c1
    std::vector<ExpertParams> experts;  // one per template category, >= 2
};

/// Simplex vector of length L2 (the template category count).
struct GateWeights {
    Tensor w;  // length L2
};

namespace detail {
inline Tensor single_token_attn(const Tensor& x, const Tensor& value_w, const Tensor& value_b) {
    Tensor out = linear(x, value_w, value_b);
    axpy(out, 1.0, x);
    return out;
}
}  // namespace detail

/// W_e = softmax( attn(F_img) . linear(F_win_cat)^T ).
inline GateWeights gate(const Tensor& f_img, const Tensor& f_win_cat, const TgeParams& p) {
    require_rank(f_img, 2, "gate");
    require_rank(f_win_cat, 2, "gate");
    if (f_win_cat.extent(0) != p.experts.size()) {
        throw ShapeError("gate: " + std::to_string(f_win_cat.extent(0)) + " categories vs " +
                         std::to_string(p.experts.size()) + " experts");
    }
    const Tensor attn_out = detail::single_token_attn(f_img, p.gate_value_w, p.gate_value_b);
    const Tensor aligned = linear(f_win_cat, p.align_w, p.align_b);
    const Tensor logits = matmul(attn_out, transpose(aligned));
    const Tensor probs = softmax_rows(logits);
    GateWeights gw{Tensor({probs.extent(1)})};
    for (std::size_t i = 0; i < gw.w.size(); ++i) gw.w[i] = probs.at(0, i);
    return gw;
}

inline Tensor expert_forward(const Tensor& f_img, const ExpertParams& e) {
    const Tensor attn = detail::single_token_attn(f_img, e.value_w, e.value_b);
    const Tensor hidden = relu(linear(attn, e.ff1_w, e.ff1_b));
    return linear(hidden, e.ff2_w, e.ff2_b);
}

/// E_img = sum_i w_i * Expert_i(F_img); exactly L2 experts participate.
inline Tensor enhance(const Tensor& f_img, const GateWeights& gw, const TgeParams& p) {
    if (gw.w.size() != p.experts.size()) {
        throw ShapeError("enhance: " + std::to_string(gw.w.size()) + " weights vs " +
                         std::to_string(p.experts.size()) + " experts");
    }
    std::vector<Tensor> outs;
    outs.reserve(p.experts.size());
    for (const ExpertParams& e : p.experts) outs.push_back(expert_forward(f_img, e));
    return convex_combine(gw.w, outs);
}

// ---------------------------------------------------------------------------
// forward trace and backward pass for training

struct TgeForward {
    Tensor f_img;     // 1 x c1 input
    Tensor attn_out;  // gate attention output
    Tensor aligned;   // L2 x c1
    Tensor weights;   // 1 x L2 softmax output
    struct ExpertTrace {
        Tensor attn;        // 1 x c1
        Tensor hidden_pre;  // 1 x 2*c1, before relu
        Tensor hidden;      // 1 x 2*c1
        Tensor out;         // 1 x c_emb
    };
    std::vector<ExpertTrace> experts;
    Tensor e_img;  // 1 x c_emb
};

inline TgeForward tge_forward(const Tensor& f_img, const Tensor& f_win_cat, const TgeParams& p) {
    TgeForward fwd;
    fwd.f_img = f_img;
    fwd.attn_out = detail::single_token_attn(f_img, p.gate_value_w, p.gate_value_b);
    fwd.aligned = linear(f_win_cat, p.align_w, p.align_b);
    fwd.weights = softmax_rows(matmul(fwd.attn_out, transpose(fwd.aligned)));

    fwd.experts.resize(p.experts.size());
    fwd.e_img = Tensor({std::size_t{1}, p.experts[0].ff2_w.extent(1)});
    for (std::size_t i = 0; i < p.experts.size(); ++i) {
        auto& tr = fwd.experts[i];
        tr.attn = detail::single_token_attn(f_img, p.experts[i].value_w, p.experts[i].value_b);
        tr.hidden_pre = linear(tr.attn, p.experts[i].ff1_w, p.experts[i].ff1_b);
        tr.hidden = relu(tr.hidden_pre);
        tr.out = linear(tr.hidden, p.experts[i].ff2_w, p.experts[i].ff2_b);
        axpy(fwd.e_img, fwd.weights.at(0, i), tr.out);
    }
    return fwd;
}

/// Gradients share the TgeParams layout so the same visitors drive updates.
using TgeGrads = TgeParams;

inline TgeGrads zero_tge_grads(const TgeParams& p) {
    TgeGrads g;
    g.gate_value_w = zeros_like(p.gate_value_w);
    g.gate_value_b = zeros_like(p.gate_value_b);
    g.align_w = zeros_like(p.align_w);
    g.align_b = zeros_like(p.align_b);
    g.experts.resize(p.experts.size());
    for (std::size_t i = 0; i < p.experts.size(); ++i) {
        g.experts[i].value_w = zeros_like(p.experts[i].value_w);
        g.experts[i].value_b = zeros_like(p.experts[i].value_b);
        g.experts[i].ff1_w = zeros_like(p.experts[i].ff1_w);
        g.experts[i].ff1_b = zeros_like(p.experts[i].ff1_b);
        g.experts[i].ff2_w = zeros_like(p.experts[i].ff2_w);
        g.experts[i].ff2_b = zeros_like(p.experts[i].ff2_b);
    }
    return g;
}

/// Accumulates parameter cotangents for d(loss)/d(e_img) into `grads`.
/// f_img is a leaf; its cotangent is not propagated further.
inline void tge_backward(const TgeForward& fwd, const Tensor& f_win_cat, const TgeParams& p,
                         const Tensor& d_e_img, TgeGrads& grads) {
    Tensor d_weights({std::size_t{1}, p.experts.size()});
    for (std::size_t i = 0; i < p.experts.size(); ++i) {
        const auto& tr = fwd.experts[i];
        // weight cotangent and the expert's own path
        d_weights.at(0, i) = dot(d_e_img, tr.out);
        Tensor d_out = d_e_img;
        for (std::size_t j = 0; j < d_out.size(); ++j) d_out[j] *= fwd.weights.at(0, i);

        LinearGrads g2 = linear_vjp(tr.hidden, p.experts[i].ff2_w, d_out);
        axpy(grads.experts[i].ff2_w, 1.0, g2.dw);
        axpy(grads.experts[i].ff2_b, 1.0, g2.db);
        const Tensor d_hidden_pre = relu_vjp(tr.hidden_pre, g2.dx);
        LinearGrads g1 = linear_vjp(tr.attn, p.experts[i].ff1_w, d_hidden_pre);
        axpy(grads.experts[i].ff1_w, 1.0, g1.dw);
        axpy(grads.experts[i].ff1_b, 1.0, g1.db);
        // attn = f_img + value(f_img); only the value path carries parameters
        LinearGrads gv = linear_vjp(fwd.f_img, p.experts[i].value_w, g1.dx);
        axpy(grads.experts[i].value_w, 1.0, gv.dw);
        axpy(grads.experts[i].value_b, 1.0, gv.db);
    }

    // gate: weights = softmax(attn_out . aligned^T)
    const Tensor d_logits = softmax_rows_vjp(fwd.weights, d_weights);
    // logits_j = attn_out . aligned_j
    Tensor d_attn = matmul(d_logits, fwd.aligned);
    Tensor d_aligned = matmul(transpose(d_logits), fwd.attn_out);
    LinearGrads ga = linear_vjp(f_win_cat, p.align_w, d_aligned);
    axpy(grads.align_w, 1.0, ga.dw);
    axpy(grads.align_b, 1.0, ga.db);
    LinearGrads gg = linear_vjp(fwd.f_img, p.gate_value_w, d_attn);
    axpy(grads.gate_value_w, 1.0, gg.dw);
    axpy(grads.gate_value_b, 1.0, gg.db);
}

}  // namespace aforge

#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "aforge/errors.hpp"
#include "aforge/ops.hpp"
#include "aforge/tensor.hpp"

// Multi-Mask Fusion: each per-level localization map runs through a Mask
// Convolution Block (two stride-2 general convs, one depthwise-separable
// stage, adaptive average pooling to a g x g token grid), the four token
// blocks concatenate along channels, and trainable base embeddings append
// along the length dimension.

namespace aforge {

/// One Mask Convolution Block. The stack is linear (convolutions, biases and
/// pooling only), so an all-zero map with zero biases embeds to zero.
struct McbParams {
    Tensor conv1_k;  // 3 x 3 x 1 x cmid, stride 2
    Tensor conv1_b;  // cmid
    Tensor conv2_k;  // 3 x 3 x cmid x cmid, stride 2
    Tensor conv2_b;  // cmid
    Tensor dw_k;     // 3 x 3 x cmid
    Tensor dw_b;     // cmid
    Tensor pw_k;     // 1 x 1 x cmid x c3
    Tensor pw_b;     // c3
    std::size_t pool_grid = 2;  // tokens per side; L1 = pool_grid^2
};

struct MmfParams {
    std::array<McbParams, 4> mcbs;  // one per level
    Tensor e_base;                  // L3 x c_emb, trainable
};

/// Forward trace of one MCB, retained for backpropagation.
struct McbForward {
    Tensor input;   // h x w x 1
    Tensor a1;      // post conv1 + bias
    Tensor a2;      // post conv2 + bias
    Tensor d3;      // post depthwise + bias
    Tensor p4;      // post pointwise + bias
    Tensor pooled;  // g x g x c3
    Tensor tokens;  // L1 x c3
};

inline McbForward mcb_forward(const Tensor& map, const McbParams& p) {
    require_rank(map, 2, "mcb_embed");
    McbForward fwd;
    fwd.input = Tensor({map.extent(0), map.extent(1), std::size_t{1}});
    for (std::size_t i = 0; i < map.size(); ++i) fwd.input[i] = map[i];
    fwd.a1 = add_channel_bias(conv2d(fwd.input, p.conv1_k, 2, 1), p.conv1_b);
    fwd.a2 = add_channel_bias(conv2d(fwd.a1, p.conv2_k, 2, 1), p.conv2_b);
    fwd.d3 = add_channel_bias(depthwise_conv2d(fwd.a2, p.dw_k, 1, 1), p.dw_b);
    fwd.p4 = add_channel_bias(conv2d(fwd.d3, p.pw_k, 1, 0), p.pw_b);
    fwd.pooled = adaptive_avg_pool(fwd.p4, p.pool_grid);
    const std::size_t l1 = p.pool_grid * p.pool_grid;
    fwd.tokens = Tensor({l1, fwd.pooled.extent(2)});
    for (std::size_t i = 0; i < fwd.tokens.size(); ++i) fwd.tokens[i] = fwd.pooled[i];
    return fwd;
}

/// Converts one localization map into L1 tokens of c3 channels.
inline Tensor mcb_embed(const Tensor& map, const McbParams& p) { return mcb_forward(map, p).tokens; }

struct McbGrads {
    McbParams params;    // same layout as the parameters
    Tensor d_input_map;  // h x w cotangent for the level map
};

inline McbGrads mcb_backward(const McbForward& fwd, const McbParams& p, const Tensor& d_tokens) {
    McbGrads g;
    g.params.pool_grid = p.pool_grid;
    Tensor d_pooled = zeros_like(fwd.pooled);
    for (std::size_t i = 0; i < d_pooled.size(); ++i) d_pooled[i] = d_tokens[i];
    Tensor d_p4 = adaptive_avg_pool_vjp(fwd.p4.extent(0), fwd.p4.extent(1), fwd.p4.extent(2),
                                        p.pool_grid, d_pooled);
    g.params.pw_b = channel_bias_vjp(d_p4);
    Conv2dGrads pw = conv2d_vjp(fwd.d3, p.pw_k, 1, 0, d_p4);
    g.params.pw_k = std::move(pw.dkernel);
    g.params.dw_b = channel_bias_vjp(pw.dinput);
    DepthwiseGrads dw = depthwise_conv2d_vjp(fwd.a2, p.dw_k, 1, 1, pw.dinput);
    g.params.dw_k = std::move(dw.dkernel);
    g.params.conv2_b = channel_bias_vjp(dw.dinput);
    Conv2dGrads c2 = conv2d_vjp(fwd.a1, p.conv2_k, 2, 1, dw.dinput);
    g.params.conv2_k = std::move(c2.dkernel);
    g.params.conv1_b = channel_bias_vjp(c2.dinput);
    Conv2dGrads c1 = conv2d_vjp(fwd.input, p.conv1_k, 2, 1, c2.dinput);
    g.params.conv1_k = std::move(c1.dkernel);
    g.d_input_map = Tensor({fwd.input.extent(0), fwd.input.extent(1)});
    for (std::size_t i = 0; i < g.d_input_map.size(); ++i) g.d_input_map[i] = c1.dinput[i];
    return g;
}

/// Channel concatenation of the four level embeddings, level order 1..4.
inline Tensor fuse(const std::array<Tensor, 4>& e_decs) {
    return concat_cols(std::span<const Tensor>(e_decs.data(), e_decs.size()));
}

/// Length-dimension concatenation: E_fusion rows first, then E_base rows.
inline Tensor assemble(const Tensor& e_fusion, const Tensor& e_base) {
    return concat_rows(e_fusion, e_base);
}

}  // namespace aforge

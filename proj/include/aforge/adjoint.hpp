#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "aforge/ops.hpp"
#include "aforge/rng.hpp"
#include "aforge/tensor.hpp"

namespace aforge {

/// A differentiable op instance bundled with its hand-derived adjoint, so the
/// adjoint can be replayed against central finite differences.
struct AdjointRecord {
    std::string op_name;
    std::vector<Tensor> inputs;
    Tensor output;
    /// Maps an output cotangent to one cotangent per input.
    std::function<std::vector<Tensor>(const Tensor&)> vjp;
    /// Re-runs the forward pass on (possibly perturbed) inputs.
    std::function<Tensor(const std::vector<Tensor>&)> apply;
};

/// Maximum discrepancy between the recorded vjp and central finite
/// differences over a random cotangent, relative to max(1, |analytic|, |fd|).
/// Step per element: 1e-6 * max(1, |value|).
inline double vjp_check(const AdjointRecord& rec, std::uint64_t probe_seed) {
    Rng rng(probe_seed);
    Tensor cot = zeros_like(rec.output);
    for (std::size_t i = 0; i < cot.size(); ++i) cot[i] = rng.normal();

    const std::vector<Tensor> analytic = rec.vjp(cot);
    if (analytic.size() != rec.inputs.size()) {
        throw ValueError("vjp_check(" + rec.op_name + "): vjp returned " +
                         std::to_string(analytic.size()) + " cotangents for " +
                         std::to_string(rec.inputs.size()) + " inputs");
    }

    double max_err = 0.0;
    std::vector<Tensor> work = rec.inputs;
    for (std::size_t t = 0; t < work.size(); ++t) {
        for (std::size_t i = 0; i < work[t].size(); ++i) {
            const double x = work[t][i];
            const double h = 1e-6 * std::max(1.0, std::abs(x));
            work[t][i] = x + h;
            const double fp = dot(cot, rec.apply(work));
            work[t][i] = x - h;
            const double fm = dot(cot, rec.apply(work));
            work[t][i] = x;
            const double fd = (fp - fm) / (2.0 * h);
            const double an = analytic[t][i];
            const double err = std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

// Record builders for the core ops. Each captures the op configuration so the
// finite-difference replay sees exactly the checked instance.

inline AdjointRecord record_matmul(const Tensor& a, const Tensor& b) {
    AdjointRecord rec;
    rec.op_name = "matmul";
    rec.inputs = {a, b};
    rec.output = matmul(a, b);
    rec.apply = [](const std::vector<Tensor>& in) { return matmul(in[0], in[1]); };
    rec.vjp = [a, b](const Tensor& g) {
        MatmulGrads gr = matmul_vjp(a, b, g);
        return std::vector<Tensor>{std::move(gr.da), std::move(gr.db)};
    };
    return rec;
}

inline AdjointRecord record_softmax_rows(const Tensor& logits) {
    AdjointRecord rec;
    rec.op_name = "softmax_rows";
    rec.inputs = {logits};
    rec.output = softmax_rows(logits);
    rec.apply = [](const std::vector<Tensor>& in) { return softmax_rows(in[0]); };
    Tensor probs = rec.output;
    rec.vjp = [probs](const Tensor& g) {
        return std::vector<Tensor>{softmax_rows_vjp(probs, g)};
    };
    return rec;
}

inline AdjointRecord record_conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride,
                                   std::size_t padding) {
    AdjointRecord rec;
    rec.op_name = "conv2d";
    rec.inputs = {input, kernel};
    rec.output = conv2d(input, kernel, stride, padding);
    rec.apply = [stride, padding](const std::vector<Tensor>& in) {
        return conv2d(in[0], in[1], stride, padding);
    };
    rec.vjp = [input, kernel, stride, padding](const Tensor& g) {
        Conv2dGrads gr = conv2d_vjp(input, kernel, stride, padding, g);
        return std::vector<Tensor>{std::move(gr.dinput), std::move(gr.dkernel)};
    };
    return rec;
}

inline AdjointRecord record_depthwise_conv2d(const Tensor& input, const Tensor& kernel,
                                             std::size_t stride, std::size_t padding) {
    AdjointRecord rec;
    rec.op_name = "depthwise_conv2d";
    rec.inputs = {input, kernel};
    rec.output = depthwise_conv2d(input, kernel, stride, padding);
    rec.apply = [stride, padding](const std::vector<Tensor>& in) {
        return depthwise_conv2d(in[0], in[1], stride, padding);
    };
    rec.vjp = [input, kernel, stride, padding](const Tensor& g) {
        DepthwiseGrads gr = depthwise_conv2d_vjp(input, kernel, stride, padding, g);
        return std::vector<Tensor>{std::move(gr.dinput), std::move(gr.dkernel)};
    };
    return rec;
}

inline AdjointRecord record_bilinear_upsample(const Tensor& input, std::size_t out_h,
                                              std::size_t out_w) {
    AdjointRecord rec;
    rec.op_name = "bilinear_upsample";
    rec.inputs = {input};
    rec.output = bilinear_upsample(input, out_h, out_w);
    rec.apply = [out_h, out_w](const std::vector<Tensor>& in) {
        return bilinear_upsample(in[0], out_h, out_w);
    };
    const std::size_t h = input.extent(0), w = input.extent(1);
    rec.vjp = [h, w](const Tensor& g) {
        return std::vector<Tensor>{bilinear_upsample_vjp(h, w, g)};
    };
    return rec;
}

inline AdjointRecord record_linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    AdjointRecord rec;
    rec.op_name = "linear";
    rec.inputs = {x, w, b};
    rec.output = linear(x, w, b);
    rec.apply = [](const std::vector<Tensor>& in) { return linear(in[0], in[1], in[2]); };
    rec.vjp = [x, w](const Tensor& g) {
        LinearGrads gr = linear_vjp(x, w, g);
        return std::vector<Tensor>{std::move(gr.dx), std::move(gr.dw), std::move(gr.db)};
    };
    return rec;
}

inline AdjointRecord record_relu(const Tensor& x) {
    AdjointRecord rec;
    rec.op_name = "relu";
    rec.inputs = {x};
    rec.output = relu(x);
    rec.apply = [](const std::vector<Tensor>& in) { return relu(in[0]); };
    rec.vjp = [x](const Tensor& g) { return std::vector<Tensor>{relu_vjp(x, g)}; };
    return rec;
}

inline AdjointRecord record_adaptive_avg_pool(const Tensor& x, std::size_t g) {
    AdjointRecord rec;
    rec.op_name = "adaptive_avg_pool";
    rec.inputs = {x};
    rec.output = adaptive_avg_pool(x, g);
    rec.apply = [g](const std::vector<Tensor>& in) { return adaptive_avg_pool(in[0], g); };
    const std::size_t h = x.extent(0), w = x.extent(1), c = x.extent(2);
    rec.vjp = [h, w, c, g](const Tensor& gout) {
        return std::vector<Tensor>{adaptive_avg_pool_vjp(h, w, c, g, gout)};
    };
    return rec;
}

inline AdjointRecord record_mean_rows(const Tensor& x) {
    AdjointRecord rec;
    rec.op_name = "mean_rows";
    rec.inputs = {x};
    rec.output = mean_rows(x);
    rec.apply = [](const std::vector<Tensor>& in) { return mean_rows(in[0]); };
    const std::size_t n = x.extent(0);
    rec.vjp = [n](const Tensor& g) { return std::vector<Tensor>{mean_rows_vjp(n, g)}; };
    return rec;
}

inline AdjointRecord record_masked_colsum(const Tensor& probs, std::vector<bool> mask) {
    AdjointRecord rec;
    rec.op_name = "masked_colsum";
    rec.inputs = {probs};
    rec.output = masked_colsum(probs, mask);
    rec.apply = [mask](const std::vector<Tensor>& in) { return masked_colsum(in[0], mask); };
    const std::size_t cols = probs.extent(1);
    rec.vjp = [cols, mask](const Tensor& g) {
        return std::vector<Tensor>{masked_colsum_vjp(cols, mask, g)};
    };
    return rec;
}

}  // namespace aforge

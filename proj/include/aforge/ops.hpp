#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "aforge/tensor.hpp"

// Dense tensor kernels. Every differentiable op here comes with a
// vector-Jacobian product (the *_vjp function); adjoint.hpp wires the pairs
// into finite-difference checks. Reductions run in a fixed sequential order
// so results are reproducible bit for bit.

namespace aforge {

// ---------------------------------------------------------------------------
// matmul

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    if (a.extent(1) != b.extent(0)) {
        throw ShapeError("matmul: inner extents disagree: " + a.shape_str() + " vs " + b.shape_str());
    }
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a.at(i, p) * b.at(p, j);
            out.at(i, j) = acc;
        }
    }
    return out;
}

inline Tensor transpose(const Tensor& a) {
    require_rank(a, 2, "transpose");
    Tensor out({a.extent(1), a.extent(0)});
    for (std::size_t i = 0; i < a.extent(0); ++i)
        for (std::size_t j = 0; j < a.extent(1); ++j) out.at(j, i) = a.at(i, j);
    return out;
}

struct MatmulGrads {
    Tensor da;
    Tensor db;
};

inline MatmulGrads matmul_vjp(const Tensor& a, const Tensor& b, const Tensor& gout) {
    return {matmul(gout, transpose(b)), matmul(transpose(a), gout)};
}

// ---------------------------------------------------------------------------
// softmax over rows

/// Row-wise softmax with row-max subtraction. c >= 1 enforced by Tensor's
/// positive-extent invariant; rank must be 2.
inline Tensor softmax_rows(const Tensor& logits) {
    require_rank(logits, 2, "softmax_rows");
    const std::size_t r = logits.extent(0), c = logits.extent(1);
    Tensor out({r, c});
    for (std::size_t i = 0; i < r; ++i) {
        double mx = logits.at(i, 0);
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
        double denom = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double e = std::exp(logits.at(i, j) - mx);
            out.at(i, j) = e;
            denom += e;
        }
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) /= denom;
    }
    return out;
}

/// Cotangent w.r.t. the logits, expressed through the forward output:
/// g_logits = p .* (g - <g, p>) per row.
inline Tensor softmax_rows_vjp(const Tensor& probs, const Tensor& gout) {
    if (!probs.same_shape(gout)) {
        throw ShapeError("softmax_rows_vjp: shape mismatch " + probs.shape_str() + " vs " + gout.shape_str());
    }
    const std::size_t r = probs.extent(0), c = probs.extent(1);
    Tensor g({r, c});
    for (std::size_t i = 0; i < r; ++i) {
        double inner = 0.0;
        for (std::size_t j = 0; j < c; ++j) inner += gout.at(i, j) * probs.at(i, j);
        for (std::size_t j = 0; j < c; ++j) {
            g.at(i, j) = probs.at(i, j) * (gout.at(i, j) - inner);
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// conv2d (cross-correlation, no kernel flip)

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride,
                                   std::size_t padding, const char* op) {
    const std::size_t padded = in + 2 * padding;
    if (k > padded) {
        throw ShapeError(std::string(op) + ": kernel extent " + std::to_string(k) +
                         " exceeds padded input extent " + std::to_string(padded));
    }
    return (padded - k) / stride + 1;
}

/// input: h x w x cin, kernel: kh x kw x cin x cout. Zero padding.
/// Accumulation order is ky, kx, ci — the same order the naive oracle uses.
inline Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride,
                     std::size_t padding) {
    require_rank(input, 3, "conv2d");
    require_rank(kernel, 4, "conv2d");
    if (stride == 0) throw ValueError("conv2d: stride must be positive");
    const std::size_t h = input.extent(0), w = input.extent(1), cin = input.extent(2);
    const std::size_t kh = kernel.extent(0), kw = kernel.extent(1), cout = kernel.extent(3);
    if (kernel.extent(2) != cin) {
        throw ShapeError("conv2d: channel mismatch: input " + input.shape_str() +
                         " vs kernel " + kernel.shape_str());
    }
    const std::size_t oh = conv_out_extent(h, kh, stride, padding, "conv2d");
    const std::size_t ow = conv_out_extent(w, kw, stride, padding, "conv2d");
    Tensor out({oh, ow, cout});
    for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
            for (std::size_t co = 0; co < cout; ++co) {
                double acc = 0.0;
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    const std::ptrdiff_t iy =
                        static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(padding);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                        const std::ptrdiff_t ix =
                            static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(padding);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                            acc += input.at(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), ci) *
                                   kernel.at(ky, kx, ci, co);
                        }
                    }
                }
                out.at(oy, ox, co) = acc;
            }
        }
    }
    return out;
}

struct Conv2dGrads {
    Tensor dinput;
    Tensor dkernel;
};

inline Conv2dGrads conv2d_vjp(const Tensor& input, const Tensor& kernel, std::size_t stride,
                              std::size_t padding, const Tensor& gout) {
    const std::size_t h = input.extent(0), w = input.extent(1), cin = input.extent(2);
    const std::size_t kh = kernel.extent(0), kw = kernel.extent(1), cout = kernel.extent(3);
    Conv2dGrads g{zeros_like(input), zeros_like(kernel)};
    const std::size_t oh = gout.extent(0), ow = gout.extent(1);
    for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
            for (std::size_t co = 0; co < cout; ++co) {
                const double go = gout.at(oy, ox, co);
                if (go == 0.0) continue;
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    const std::ptrdiff_t iy =
                        static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(padding);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                        const std::ptrdiff_t ix =
                            static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(padding);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                            g.dinput.at(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), ci) +=
                                go * kernel.at(ky, kx, ci, co);
                            g.dkernel.at(ky, kx, ci, co) +=
                                go * input.at(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), ci);
                        }
                    }
                }
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// depthwise and depthwise-separable convolution

/// Per-channel spatial convolution. input: h x w x c, kernel: kh x kw x c.
inline Tensor depthwise_conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride,
                               std::size_t padding) {
    require_rank(input, 3, "depthwise_conv2d");
    require_rank(kernel, 3, "depthwise_conv2d");
    if (stride == 0) throw ValueError("depthwise_conv2d: stride must be positive");
    const std::size_t h = input.extent(0), w = input.extent(1), c = input.extent(2);
    const std::size_t kh = kernel.extent(0), kw = kernel.extent(1);
    if (kernel.extent(2) != c) {
        throw ShapeError("depthwise_conv2d: channel mismatch: input " + input.shape_str() +
                         " vs kernel " + kernel.shape_str());
    }
    const std::size_t oh = conv_out_extent(h, kh, stride, padding, "depthwise_conv2d");
    const std::size_t ow = conv_out_extent(w, kw, stride, padding, "depthwise_conv2d");
    Tensor out({oh, ow, c});
    for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    const std::ptrdiff_t iy =
                        static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(padding);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                        const std::ptrdiff_t ix =
                            static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(padding);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                        acc += input.at(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), ch) *
                               kernel.at(ky, kx, ch);
                    }
                }
                out.at(oy, ox, ch) = acc;
            }
        }
    }
    return out;
}

struct DepthwiseGrads {
    Tensor dinput;
    Tensor dkernel;
};

inline DepthwiseGrads depthwise_conv2d_vjp(const Tensor& input, const Tensor& kernel,
                                           std::size_t stride, std::size_t padding,
                                           const Tensor& gout) {
    const std::size_t h = input.extent(0), w = input.extent(1), c = input.extent(2);
    const std::size_t kh = kernel.extent(0), kw = kernel.extent(1);
    DepthwiseGrads g{zeros_like(input), zeros_like(kernel)};
    for (std::size_t oy = 0; oy < gout.extent(0); ++oy) {
        for (std::size_t ox = 0; ox < gout.extent(1); ++ox) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double go = gout.at(oy, ox, ch);
                if (go == 0.0) continue;
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    const std::ptrdiff_t iy =
                        static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(padding);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                        const std::ptrdiff_t ix =
                            static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(padding);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                        g.dinput.at(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), ch) +=
                            go * kernel.at(ky, kx, ch);
                        g.dkernel.at(ky, kx, ch) +=
                            go * input.at(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), ch);
                    }
                }
            }
        }
    }
    return g;
}

/// Depthwise spatial pass followed by 1x1 channel mixing. Equals the
/// composition depthwise_conv2d then conv2d with the pointwise kernel.
inline Tensor depthwise_separable_conv2d(const Tensor& input, const Tensor& depth_kernel,
                                         const Tensor& point_kernel, std::size_t stride = 1,
                                         std::size_t padding = 0) {
    require_rank(point_kernel, 4, "depthwise_separable_conv2d");
    if (point_kernel.extent(0) != 1 || point_kernel.extent(1) != 1) {
        throw ShapeError("depthwise_separable_conv2d: point kernel must be 1x1, got " +
                         point_kernel.shape_str());
    }
    if (point_kernel.extent(2) != input.extent(2)) {
        throw ShapeError("depthwise_separable_conv2d: channel mismatch: input " +
                         input.shape_str() + " vs point kernel " + point_kernel.shape_str());
    }
    const Tensor mid = depthwise_conv2d(input, depth_kernel, stride, padding);
    return conv2d(mid, point_kernel, 1, 0);
}

// ---------------------------------------------------------------------------
// bilinear upsampling

/// Half-pixel-center sampling with clamped coordinates. Interpolation is
/// written as a + f*(b - a) so constant inputs reproduce bitwise.
inline Tensor bilinear_upsample(const Tensor& input, std::size_t out_h, std::size_t out_w) {
    require_rank(input, 2, "bilinear_upsample");
    const std::size_t h = input.extent(0), w = input.extent(1);
    if (out_h < h || out_w < w) {
        throw ValueError("bilinear_upsample: downscale unsupported: " + input.shape_str() +
                         " -> [" + std::to_string(out_h) + "x" + std::to_string(out_w) + "]");
    }
    Tensor out({out_h, out_w});
    for (std::size_t i = 0; i < out_h; ++i) {
        double sy = (static_cast<double>(i) + 0.5) * static_cast<double>(h) / static_cast<double>(out_h) - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
        const std::size_t y0 = static_cast<std::size_t>(sy);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t j = 0; j < out_w; ++j) {
            double sx = (static_cast<double>(j) + 0.5) * static_cast<double>(w) / static_cast<double>(out_w) - 0.5;
            sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
            const std::size_t x0 = static_cast<std::size_t>(sx);
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const double fx = sx - static_cast<double>(x0);
            const double top = input.at(y0, x0) + fx * (input.at(y0, x1) - input.at(y0, x0));
            const double bot = input.at(y1, x0) + fx * (input.at(y1, x1) - input.at(y1, x0));
            out.at(i, j) = top + fy * (bot - top);
        }
    }
    return out;
}

/// Adjoint of bilinear_upsample: scatter each output cotangent onto its four
/// source corners with the interpolation weights.
inline Tensor bilinear_upsample_vjp(std::size_t in_h, std::size_t in_w, const Tensor& gout) {
    require_rank(gout, 2, "bilinear_upsample_vjp");
    const std::size_t out_h = gout.extent(0), out_w = gout.extent(1);
    Tensor g({in_h, in_w});
    for (std::size_t i = 0; i < out_h; ++i) {
        double sy = (static_cast<double>(i) + 0.5) * static_cast<double>(in_h) / static_cast<double>(out_h) - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(in_h - 1));
        const std::size_t y0 = static_cast<std::size_t>(sy);
        const std::size_t y1 = std::min(y0 + 1, in_h - 1);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t j = 0; j < out_w; ++j) {
            double sx = (static_cast<double>(j) + 0.5) * static_cast<double>(in_w) / static_cast<double>(out_w) - 0.5;
            sx = std::clamp(sx, 0.0, static_cast<double>(in_w - 1));
            const std::size_t x0 = static_cast<std::size_t>(sx);
            const std::size_t x1 = std::min(x0 + 1, in_w - 1);
            const double fx = sx - static_cast<double>(x0);
            const double go = gout.at(i, j);
            g.at(y0, x0) += go * (1.0 - fy) * (1.0 - fx);
            g.at(y0, x1) += go * (1.0 - fy) * fx;
            g.at(y1, x0) += go * fy * (1.0 - fx);
            g.at(y1, x1) += go * fy * fx;
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// small building blocks used by the model graph

inline Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i]);
    return out;
}

inline Tensor relu_vjp(const Tensor& x, const Tensor& gout) {
    if (!x.same_shape(gout)) {
        throw ShapeError("relu_vjp: shape mismatch " + x.shape_str() + " vs " + gout.shape_str());
    }
    Tensor g = gout;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (x[i] <= 0.0) g[i] = 0.0;
    }
    return g;
}

/// x: n x i, w: i x o, b: o  ->  n x o
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_rank(b, 1, "linear");
    if (b.extent(0) != w.extent(1)) {
        throw ShapeError("linear: bias " + b.shape_str() + " does not match weight " + w.shape_str());
    }
    Tensor out = matmul(x, w);
    for (std::size_t i = 0; i < out.extent(0); ++i)
        for (std::size_t j = 0; j < out.extent(1); ++j) out.at(i, j) += b[j];
    return out;
}

struct LinearGrads {
    Tensor dx;
    Tensor dw;
    Tensor db;
};

inline LinearGrads linear_vjp(const Tensor& x, const Tensor& w, const Tensor& gout) {
    LinearGrads g{matmul(gout, transpose(w)), matmul(transpose(x), gout),
                  Tensor({w.extent(1)})};
    for (std::size_t i = 0; i < gout.extent(0); ++i)
        for (std::size_t j = 0; j < gout.extent(1); ++j) g.db[j] += gout.at(i, j);
    return g;
}

/// Adds a per-channel bias to an h x w x c tensor.
inline Tensor add_channel_bias(const Tensor& x, const Tensor& b) {
    require_rank(x, 3, "add_channel_bias");
    require_rank(b, 1, "add_channel_bias");
    if (b.extent(0) != x.extent(2)) {
        throw ShapeError("add_channel_bias: bias " + b.shape_str() + " vs input " + x.shape_str());
    }
    Tensor out = x;
    for (std::size_t y = 0; y < x.extent(0); ++y)
        for (std::size_t xx = 0; xx < x.extent(1); ++xx)
            for (std::size_t c = 0; c < x.extent(2); ++c) out.at(y, xx, c) += b[c];
    return out;
}

inline Tensor channel_bias_vjp(const Tensor& gout) {
    require_rank(gout, 3, "channel_bias_vjp");
    Tensor db({gout.extent(2)});
    for (std::size_t y = 0; y < gout.extent(0); ++y)
        for (std::size_t x = 0; x < gout.extent(1); ++x)
            for (std::size_t c = 0; c < gout.extent(2); ++c) db[c] += gout.at(y, x, c);
    return db;
}

/// Adaptive average pooling of an h x w x c map to g x g x c.
/// Region r along an axis of extent n spans [floor(r*n/g), ceil((r+1)*n/g)).
inline Tensor adaptive_avg_pool(const Tensor& x, std::size_t g) {
    require_rank(x, 3, "adaptive_avg_pool");
    if (g == 0) throw ValueError("adaptive_avg_pool: target grid must be positive");
    const std::size_t h = x.extent(0), w = x.extent(1), c = x.extent(2);
    Tensor out({g, g, c});
    auto lo = [](std::size_t r, std::size_t n, std::size_t g) { return (r * n) / g; };
    auto hi = [](std::size_t r, std::size_t n, std::size_t g) { return ((r + 1) * n + g - 1) / g; };
    for (std::size_t ry = 0; ry < g; ++ry) {
        const std::size_t y0 = lo(ry, h, g), y1 = hi(ry, h, g);
        for (std::size_t rx = 0; rx < g; ++rx) {
            const std::size_t x0 = lo(rx, w, g), x1 = hi(rx, w, g);
            const double count = static_cast<double>((y1 - y0) * (x1 - x0));
            for (std::size_t ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (std::size_t y = y0; y < y1; ++y)
                    for (std::size_t xx = x0; xx < x1; ++xx) acc += x.at(y, xx, ch);
                out.at(ry, rx, ch) = acc / count;
            }
        }
    }
    return out;
}

inline Tensor adaptive_avg_pool_vjp(std::size_t in_h, std::size_t in_w, std::size_t channels,
                                    std::size_t g, const Tensor& gout) {
    Tensor gin({in_h, in_w, channels});
    auto lo = [](std::size_t r, std::size_t n, std::size_t g) { return (r * n) / g; };
    auto hi = [](std::size_t r, std::size_t n, std::size_t g) { return ((r + 1) * n + g - 1) / g; };
    for (std::size_t ry = 0; ry < g; ++ry) {
        const std::size_t y0 = lo(ry, in_h, g), y1 = hi(ry, in_h, g);
        for (std::size_t rx = 0; rx < g; ++rx) {
            const std::size_t x0 = lo(rx, in_w, g), x1 = hi(rx, in_w, g);
            const double count = static_cast<double>((y1 - y0) * (x1 - x0));
            for (std::size_t ch = 0; ch < channels; ++ch) {
                const double share = gout.at(ry, rx, ch) / count;
                for (std::size_t y = y0; y < y1; ++y)
                    for (std::size_t xx = x0; xx < x1; ++xx) gin.at(y, xx, ch) += share;
            }
        }
    }
    return gin;
}

/// Concatenates equally-shaped n x c blocks along the channel axis.
inline Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw ValueError("concat_cols: no inputs");
    const std::size_t n = parts[0].extent(0);
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        require_rank(p, 2, "concat_cols");
        if (p.extent(0) != n) {
            throw ShapeError("concat_cols: row mismatch " + parts[0].shape_str() + " vs " + p.shape_str());
        }
        total += p.extent(1);
    }
    Tensor out({n, total});
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t off = 0;
        for (const Tensor& p : parts) {
            for (std::size_t j = 0; j < p.extent(1); ++j) out.at(i, off + j) = p.at(i, j);
            off += p.extent(1);
        }
    }
    return out;
}

inline std::vector<Tensor> split_cols(const Tensor& x, const std::vector<std::size_t>& widths) {
    std::vector<Tensor> parts;
    std::size_t off = 0;
    for (std::size_t wdt : widths) {
        Tensor p({x.extent(0), wdt});
        for (std::size_t i = 0; i < x.extent(0); ++i)
            for (std::size_t j = 0; j < wdt; ++j) p.at(i, j) = x.at(i, off + j);
        parts.push_back(std::move(p));
        off += wdt;
    }
    if (off != x.extent(1)) {
        throw ShapeError("split_cols: widths do not cover " + x.shape_str());
    }
    return parts;
}

/// Concatenates n1 x c and n2 x c blocks along the row axis.
inline Tensor concat_rows(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "concat_rows");
    require_rank(b, 2, "concat_rows");
    if (a.extent(1) != b.extent(1)) {
        throw ShapeError("concat_rows: width mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
    Tensor out({a.extent(0) + b.extent(0), a.extent(1)});
    for (std::size_t i = 0; i < a.extent(0); ++i)
        for (std::size_t j = 0; j < a.extent(1); ++j) out.at(i, j) = a.at(i, j);
    for (std::size_t i = 0; i < b.extent(0); ++i)
        for (std::size_t j = 0; j < b.extent(1); ++j) out.at(a.extent(0) + i, j) = b.at(i, j);
    return out;
}

/// Mean over rows of an n x c matrix -> 1 x c.
inline Tensor mean_rows(const Tensor& x) {
    require_rank(x, 2, "mean_rows");
    const std::size_t n = x.extent(0), c = x.extent(1);
    Tensor out({std::size_t{1}, c});
    for (std::size_t j = 0; j < c; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += x.at(i, j);
        out.at(0, j) = acc / static_cast<double>(n);
    }
    return out;
}

inline Tensor mean_rows_vjp(std::size_t n, const Tensor& gout) {
    require_rank(gout, 2, "mean_rows_vjp");
    Tensor g({n, gout.extent(1)});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < gout.extent(1); ++j)
            g.at(i, j) = gout.at(0, j) / static_cast<double>(n);
    return g;
}

/// Per-row sum of the columns selected by mask: n x k -> length-n vector.
inline Tensor masked_colsum(const Tensor& probs, const std::vector<bool>& mask) {
    require_rank(probs, 2, "masked_colsum");
    if (mask.size() != probs.extent(1)) {
        throw ShapeError("masked_colsum: mask length " + std::to_string(mask.size()) +
                         " vs columns " + std::to_string(probs.extent(1)));
    }
    Tensor out({probs.extent(0)});
    for (std::size_t i = 0; i < probs.extent(0); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < probs.extent(1); ++j) {
            if (mask[j]) acc += probs.at(i, j);
        }
        out[i] = acc;
    }
    return out;
}

inline Tensor masked_colsum_vjp(std::size_t cols, const std::vector<bool>& mask, const Tensor& gout) {
    require_rank(gout, 1, "masked_colsum_vjp");
    Tensor g({gout.extent(0), cols});
    for (std::size_t i = 0; i < gout.extent(0); ++i)
        for (std::size_t j = 0; j < cols; ++j) g.at(i, j) = mask[j] ? gout[i] : 0.0;
    return g;
}

/// out = sum_i w[i] * parts[i], all parts equally shaped.
inline Tensor convex_combine(const Tensor& w, std::span<const Tensor> parts) {
    require_rank(w, 1, "convex_combine");
    if (w.extent(0) != parts.size()) {
        throw ShapeError("convex_combine: " + std::to_string(w.extent(0)) + " weights vs " +
                         std::to_string(parts.size()) + " inputs");
    }
    Tensor out = zeros_like(parts[0]);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (!parts[i].same_shape(out)) {
            throw ShapeError("convex_combine: shape mismatch " + parts[i].shape_str() + " vs " + out.shape_str());
        }
        axpy(out, w[i], parts[i]);
    }
    return out;
}

}  // namespace aforge

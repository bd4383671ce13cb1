#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include "aforge/errors.hpp"
#include "aforge/rng.hpp"
#include "aforge/tensor.hpp"

namespace aforge {

/// Configuration for the deterministic stand-in backbones. Exactly four
/// patch-feature levels; every level grid must divide the image size.
struct EncoderConfig {
    std::uint64_t seed = 0;
    std::size_t image_h = 64;
    std::size_t image_w = 64;
    std::array<std::array<std::size_t, 2>, 4> level_grids{{{16, 16}, {8, 8}, {8, 8}, {4, 4}}};
    std::size_t c1 = 32;  // global image feature width
    std::size_t c2 = 32;  // text embedding width
    std::size_t c3 = 16;  // patch feature width

    void validate() const {
        for (const auto& g : level_grids) {
            if (g[0] == 0 || g[1] == 0 || image_h % g[0] != 0 || image_w % g[1] != 0) {
                throw ValueError("encoder config: level grid " + std::to_string(g[0]) + "x" +
                                 std::to_string(g[1]) + " does not divide image " +
                                 std::to_string(image_h) + "x" + std::to_string(image_w));
            }
        }
        if (c1 == 0 || c2 == 0 || c3 == 0) throw ValueError("encoder config: zero feature width");
    }
};

/// Four per-level patch feature maps, level l shaped h_l x w_l x c3,
/// every patch vector unit-normalized.
struct PatchFeatureStack {
    std::array<Tensor, 4> levels;
};

class ImageEncoder {
public:
    virtual ~ImageEncoder() = default;
    /// Returns the global feature (1 x c1) and the patch stack. Both are pure
    /// functions of (image, config); all vectors unit-norm.
    virtual std::pair<Tensor, PatchFeatureStack> encode(const Tensor& img) const = 0;
};

class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    /// Returns a unit-norm 1 x c2 embedding; deterministic per string.
    virtual Tensor encode(const std::string& prompt) const = 0;
};

namespace detail {

constexpr std::size_t kStatCount = 11;

/// Local contrast statistics of a rectangular window [y0,y1) x [x0,x1).
/// Differences never cross the window boundary, so a cell's feature depends
/// on that cell's pixels only. The set deliberately excludes phase-sensitive
/// moments (mean, min, max): every entry scales with local contrast, so a
/// contrast change moves the whole block coherently against the unit anchor.
inline std::array<double, kStatCount> window_stats(const Tensor& lum, std::size_t y0,
                                                   std::size_t y1, std::size_t x0,
                                                   std::size_t x1) {
    const double n = static_cast<double>((y1 - y0) * (x1 - x0));
    double sum = 0.0;
    for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x) sum += lum.at(y, x);
    const double mean = sum / n;

    double var = 0.0;
    for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x) {
            const double d = lum.at(y, x) - mean;
            var += d * d;
        }
    const double sd = std::sqrt(var / n);

    auto diff_stats = [&](bool horizontal, double& mean_abs, double& mean_sq, double& sd_out,
                          double& mean_abs2, double& max_abs, double& max_abs2) {
        double s = 0.0, sabs = 0.0, ssq = 0.0, sabs2 = 0.0;
        std::size_t cnt = 0, cnt2 = 0;
        for (std::size_t y = y0; y < y1; ++y)
            for (std::size_t x = x0; x < x1; ++x) {
                const bool has1 = horizontal ? (x + 1 < x1) : (y + 1 < y1);
                const bool has2 = horizontal ? (x + 2 < x1) : (y + 2 < y1);
                if (has1) {
                    const double d = horizontal ? lum.at(y, x + 1) - lum.at(y, x)
                                                : lum.at(y + 1, x) - lum.at(y, x);
                    s += d;
                    sabs += std::abs(d);
                    ssq += d * d;
                    max_abs = std::max(max_abs, std::abs(d));
                    ++cnt;
                }
                if (has2) {
                    const double d2 = horizontal
                                          ? lum.at(y, x + 2) - 2.0 * lum.at(y, x + 1) + lum.at(y, x)
                                          : lum.at(y + 2, x) - 2.0 * lum.at(y + 1, x) + lum.at(y, x);
                    sabs2 += std::abs(d2);
                    max_abs2 = std::max(max_abs2, std::abs(d2));
                    ++cnt2;
                }
            }
        mean_abs = cnt ? sabs / static_cast<double>(cnt) : 0.0;
        mean_sq = cnt ? ssq / static_cast<double>(cnt) : 0.0;
        mean_abs2 = cnt2 ? sabs2 / static_cast<double>(cnt2) : 0.0;
        if (!cnt) {
            sd_out = 0.0;
            return;
        }
        const double dmean = s / static_cast<double>(cnt);
        sd_out = std::sqrt(std::max(0.0, mean_sq - dmean * dmean));
    };

    double mabs_dx = 0.0, msq_dx = 0.0, sd_dx = 0.0, mabs_d2x = 0.0, mx_dx = 0.0, mx_d2x = 0.0;
    double mabs_dy = 0.0, msq_dy = 0.0, sd_dy = 0.0, mabs_d2y = 0.0, mx_dy = 0.0, mx_d2y = 0.0;
    diff_stats(true, mabs_dx, msq_dx, sd_dx, mabs_d2x, mx_dx, mx_d2x);
    diff_stats(false, mabs_dy, msq_dy, sd_dy, mabs_d2y, mx_dy, mx_d2y);

    return {1.0,
            4.0 * sd,
            8.0 * mabs_dx,
            8.0 * mabs_dy,
            8.0 * sd_dx,
            8.0 * sd_dy,
            8.0 * 0.5 * (mabs_d2x + mabs_d2y),
            16.0 * 0.5 * (msq_dx + msq_dy),
            4.0 * mx_dx,
            4.0 * mx_dy,
            4.0 * 0.5 * (mx_d2x + mx_d2y)};
}

/// Channel-mean view of an image (rank-2 input is returned as-is).
inline Tensor luminance(const Tensor& img) {
    if (img.rank() == 2) return img;
    require_rank(img, 3, "luminance");
    Tensor out({img.extent(0), img.extent(1)});
    const double c = static_cast<double>(img.extent(2));
    for (std::size_t y = 0; y < img.extent(0); ++y)
        for (std::size_t x = 0; x < img.extent(1); ++x) {
            double acc = 0.0;
            for (std::size_t ch = 0; ch < img.extent(2); ++ch) acc += img.at(y, x, ch);
            out.at(y, x) = acc / c;
        }
    return out;
}

/// In-place unit normalization; near-zero vectors become the e1 basis vector
/// so constant images still produce finite features.
inline void normalize_or_e1(double* v, std::size_t n) {
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += v[i] * v[i];
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
        v[0] = 1.0;
        for (std::size_t i = 1; i < n; ++i) v[i] = 0.0;
        return;
    }
    for (std::size_t i = 0; i < n; ++i) v[i] /= norm;
}

inline Tensor seeded_projection(std::uint64_t seed, std::size_t rows, std::size_t cols) {
    Rng rng(seed);
    Tensor p({rows, cols});
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = rng.normal();
    return p;
}

inline std::uint64_t fnv1a64(const unsigned char* bytes, std::size_t n) {
    std::uint64_t h = 14695981039346656037ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace detail

/// Fixed seeded random projections over local window statistics. No learned
/// state; stands in for the frozen backbone's image tower.
class ToyImageEncoder : public ImageEncoder {
public:
    explicit ToyImageEncoder(const EncoderConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        for (std::size_t l = 0; l < 4; ++l) {
            level_proj_[l] =
                detail::seeded_projection(mix_seed(cfg_.seed, 100 + l), detail::kStatCount, cfg_.c3);
        }
        global_proj_ = detail::seeded_projection(mix_seed(cfg_.seed, 99), detail::kStatCount, cfg_.c1);
    }

    std::pair<Tensor, PatchFeatureStack> encode(const Tensor& img) const override {
        if (img.rank() != 2 && img.rank() != 3) {
            throw ShapeError("encode_image: expected rank 2 or 3, got " + img.shape_str());
        }
        if (img.extent(0) != cfg_.image_h || img.extent(1) != cfg_.image_w) {
            throw ShapeError("encode_image: image " + img.shape_str() + " does not match config " +
                             std::to_string(cfg_.image_h) + "x" + std::to_string(cfg_.image_w));
        }
        const Tensor lum = detail::luminance(img);

        PatchFeatureStack stack;
        for (std::size_t l = 0; l < 4; ++l) {
            const std::size_t gh = cfg_.level_grids[l][0], gw = cfg_.level_grids[l][1];
            const std::size_t cell_h = cfg_.image_h / gh, cell_w = cfg_.image_w / gw;
            Tensor level({gh, gw, cfg_.c3});
            for (std::size_t cy = 0; cy < gh; ++cy) {
                for (std::size_t cx = 0; cx < gw; ++cx) {
                    const auto stats = detail::window_stats(lum, cy * cell_h, (cy + 1) * cell_h,
                                                            cx * cell_w, (cx + 1) * cell_w);
                    project(stats, level_proj_[l], &level.at(cy, cx, 0), cfg_.c3);
                }
            }
            stack.levels[l] = std::move(level);
        }

        const auto stats = detail::window_stats(lum, 0, cfg_.image_h, 0, cfg_.image_w);
        Tensor f_img({std::size_t{1}, cfg_.c1});
        project(stats, global_proj_, f_img.data(), cfg_.c1);
        return {std::move(f_img), std::move(stack)};
    }

    const EncoderConfig& config() const { return cfg_; }

private:
    static void project(const std::array<double, detail::kStatCount>& stats, const Tensor& proj,
                        double* out, std::size_t width) {
        for (std::size_t j = 0; j < width; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < detail::kStatCount; ++i) acc += stats[i] * proj.at(i, j);
            out[j] = acc;
        }
        detail::normalize_or_e1(out, width);
    }

    EncoderConfig cfg_;
    std::array<Tensor, 4> level_proj_;
    Tensor global_proj_;
};

/// Hashed character trigrams through a fixed seeded projection, then unit
/// normalization. Stands in for the frozen text tower.
class ToyTextEncoder : public TextEncoder {
public:
    explicit ToyTextEncoder(const EncoderConfig& cfg) : cfg_(cfg) {
        projection_ = detail::seeded_projection(mix_seed(cfg_.seed, 0x7e7), kBuckets, cfg_.c2);
    }

    Tensor encode(const std::string& prompt) const override {
        if (prompt.empty()) throw ValueError("encode_text: empty prompt");
        std::array<double, kBuckets> counts{};
        const auto* bytes = reinterpret_cast<const unsigned char*>(prompt.data());
        if (prompt.size() < 3) {
            bump(counts, detail::fnv1a64(bytes, prompt.size()));
        } else {
            for (std::size_t i = 0; i + 3 <= prompt.size(); ++i) {
                bump(counts, detail::fnv1a64(bytes + i, 3));
            }
        }
        Tensor out({std::size_t{1}, cfg_.c2});
        for (std::size_t j = 0; j < cfg_.c2; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < kBuckets; ++i) {
                if (counts[i] != 0.0) acc += counts[i] * projection_.at(i, j);
            }
            out[j] = acc;
        }
        detail::normalize_or_e1(out.data(), cfg_.c2);
        return out;
    }

private:
    static constexpr std::size_t kBuckets = 256;

    static void bump(std::array<double, kBuckets>& counts, std::uint64_t h) {
        const double sign = (h >> 32) & 1 ? 1.0 : -1.0;
        counts[h % kBuckets] += sign;
    }

    EncoderConfig cfg_;
    Tensor projection_;
};

}  // namespace aforge

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "aforge/cg.hpp"
#include "aforge/errors.hpp"
#include "aforge/eval.hpp"
#include "aforge/rng.hpp"
#include "aforge/tensor.hpp"

// Synthetic-anomaly forging: patch transplantation with either a hard paste
// or Poisson normal-clone blending, ground-truth masks with their 1-pixel
// border zeroed, and 3x3 position labels from the eval quantizer.

namespace aforge {

enum class BlendMode { CutPaste, PoissonNormalClone };

struct PatchSpec {
    std::size_t src_top = 0;
    std::size_t src_left = 0;
    std::size_t src_h = 0;
    std::size_t src_w = 0;
    std::size_t dst_center_row = 0;
    std::size_t dst_center_col = 0;
    BlendMode blend = BlendMode::PoissonNormalClone;
};

namespace detail {

inline std::size_t image_channels(const Tensor& img) {
    if (img.rank() == 2) return 1;
    if (img.rank() == 3) return img.extent(2);
    throw ShapeError("synth: expected rank 2 or 3 image, got " + img.shape_str());
}

inline double pixel(const Tensor& img, std::size_t y, std::size_t x, std::size_t c) {
    return img.rank() == 2 ? img.at(y, x) : img.at(y, x, c);
}

inline double& pixel_ref(Tensor& img, std::size_t y, std::size_t x, std::size_t c) {
    return img.rank() == 2 ? img.at(y, x) : img.at(y, x, c);
}

/// Top-left corner so the patch center lands on the requested midpoint.
inline std::size_t anchor(std::size_t center, std::size_t extent, std::size_t bound,
                          const char* axis) {
    const std::size_t half = extent / 2;
    if (center < half || center - half + extent > bound) {
        throw ValueError(std::string("synth: pasted rect leaves destination bounds on ") + axis);
    }
    return center - half;
}

}  // namespace detail

struct CutPasteResult {
    Tensor image;
    Tensor gt_mask;  // pasted rect eroded by its 1-pixel border
};

/// Hard patch transplantation. Pixels outside the pasted rect equal dst
/// bitwise; the mask is the rect with its 1-pixel border zeroed, which is
/// empty for rects thinner than 3 pixels.
inline CutPasteResult cut_paste(const Tensor& src, const Tensor& dst, const PatchSpec& spec) {
    const std::size_t channels = detail::image_channels(src);
    if (detail::image_channels(dst) != channels) {
        throw ShapeError("cut_paste: channel mismatch " + src.shape_str() + " vs " + dst.shape_str());
    }
    if (spec.src_h == 0 || spec.src_w == 0) throw ValueError("cut_paste: empty source rect");
    if (spec.src_top + spec.src_h > src.extent(0) || spec.src_left + spec.src_w > src.extent(1)) {
        throw ValueError("cut_paste: source rect leaves source bounds");
    }
    const std::size_t dst_h = dst.extent(0), dst_w = dst.extent(1);
    const std::size_t top = detail::anchor(spec.dst_center_row, spec.src_h, dst_h, "rows");
    const std::size_t left = detail::anchor(spec.dst_center_col, spec.src_w, dst_w, "cols");

    CutPasteResult out{dst, Tensor({dst_h, dst_w})};
    for (std::size_t y = 0; y < spec.src_h; ++y)
        for (std::size_t x = 0; x < spec.src_w; ++x)
            for (std::size_t c = 0; c < channels; ++c)
                detail::pixel_ref(out.image, top + y, left + x, c) =
                    detail::pixel(src, spec.src_top + y, spec.src_left + x, c);

    if (spec.src_h > 2 && spec.src_w > 2) {
        for (std::size_t y = 1; y + 1 < spec.src_h; ++y)
            for (std::size_t x = 1; x + 1 < spec.src_w; ++x) out.gt_mask.at(top + y, left + x) = 1.0;
    }
    return out;
}

struct PoissonCloneResult {
    Tensor image;     // solution clamped to [0,1] inside the region
    Tensor solution;  // raw Poisson solution embedded in dst (unclamped)
    int cg_iterations = 0;
};

/// Gradient-domain clone: inside region_mask the output solves the discrete
/// Poisson equation lap(f) = div(grad(src_patch)) with Dirichlet data f = dst
/// on the region border; outside it equals dst bitwise. region_mask must not
/// touch the patch frame so every unknown has four in-patch neighbours.
inline PoissonCloneResult poisson_normal_clone(const Tensor& src_patch, const Tensor& dst,
                                               const Tensor& region_mask, std::size_t center_row,
                                               std::size_t center_col) {
    require_rank(region_mask, 2, "poisson_normal_clone");
    const std::size_t channels = detail::image_channels(src_patch);
    if (detail::image_channels(dst) != channels) {
        throw ShapeError("poisson_normal_clone: channel mismatch " + src_patch.shape_str() + " vs " +
                         dst.shape_str());
    }
    const std::size_t ph = src_patch.extent(0), pw = src_patch.extent(1);
    if (region_mask.extent(0) != ph || region_mask.extent(1) != pw) {
        throw ShapeError("poisson_normal_clone: mask " + region_mask.shape_str() +
                         " does not match patch " + src_patch.shape_str());
    }

    std::vector<std::pair<std::size_t, std::size_t>> interior;
    for (std::size_t y = 0; y < ph; ++y)
        for (std::size_t x = 0; x < pw; ++x) {
            if (region_mask.at(y, x) <= 0.5) continue;
            if (y == 0 || x == 0 || y + 1 == ph || x + 1 == pw) {
                throw ValueError("poisson_normal_clone: region mask touches the patch frame");
            }
            interior.emplace_back(y, x);
        }
    if (interior.empty()) throw ValueError("poisson_normal_clone: empty region interior");

    const std::size_t top = detail::anchor(center_row, ph, dst.extent(0), "rows");
    const std::size_t left = detail::anchor(center_col, pw, dst.extent(1), "cols");

    // Index map patch pixel -> unknown id (or -1).
    std::vector<std::ptrdiff_t> id(ph * pw, -1);
    for (std::size_t k = 0; k < interior.size(); ++k)
        id[interior[k].first * pw + interior[k].second] = static_cast<std::ptrdiff_t>(k);

    const std::size_t n = interior.size();
    const std::array<std::pair<int, int>, 4> nbr = {{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};

    PoissonCloneResult out{dst, dst, 0};
    for (std::size_t c = 0; c < channels; ++c) {
        // b = 4g - sum(g_q) + sum of Dirichlet dst values over out-of-region
        // neighbours; warm start from dst, so we solve A*delta = b - A*x0.
        std::vector<double> rhs(n), x0(n);
        for (std::size_t k = 0; k < n; ++k) {
            const auto [y, x] = interior[k];
            double b = 4.0 * detail::pixel(src_patch, y, x, c);
            for (const auto& [dy, dx] : nbr) {
                const std::size_t qy = y + static_cast<std::size_t>(dy);
                const std::size_t qx = x + static_cast<std::size_t>(dx);
                b -= detail::pixel(src_patch, qy, qx, c);
                if (id[qy * pw + qx] < 0) b += detail::pixel(dst, top + qy, left + qx, c);
            }
            rhs[k] = b;
            x0[k] = detail::pixel(dst, top + y, left + x, c);
        }
        auto apply_a = [&](const std::vector<double>& u, std::vector<double>& v) {
            v.assign(n, 0.0);
            for (std::size_t k = 0; k < n; ++k) {
                const auto [y, x] = interior[k];
                double acc = 4.0 * u[k];
                for (const auto& [dy, dx] : nbr) {
                    const std::ptrdiff_t q =
                        id[(y + static_cast<std::size_t>(dy)) * pw + (x + static_cast<std::size_t>(dx))];
                    if (q >= 0) acc -= u[static_cast<std::size_t>(q)];
                }
                v[k] = acc;
            }
        };
        std::vector<double> ax0;
        apply_a(x0, ax0);
        std::vector<double> resid(n);
        for (std::size_t k = 0; k < n; ++k) resid[k] = rhs[k] - ax0[k];

        const CgResult cg = cg_solve(apply_a, resid, 1e-10, static_cast<int>(10 * n + 50));
        out.cg_iterations += cg.iterations;
        for (std::size_t k = 0; k < n; ++k) {
            const auto [y, x] = interior[k];
            const double f = x0[k] + cg.x[k];
            detail::pixel_ref(out.solution, top + y, left + x, c) = f;
            detail::pixel_ref(out.image, top + y, left + x, c) = std::clamp(f, 0.0, 1.0);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// NSA-style sample generation

struct SynthConfig {
    double patch_min_frac = 1.0 / 8.0;  // rect extent bounds, fraction of image extent
    double patch_max_frac = 1.0 / 3.0;
    double area_min_frac = 0.01;  // accepted gt-mask area, fraction of image area
    double area_max_frac = 0.25;
    double src_gain_min = 1.6;  // contrast augmentation of the source patch
    double src_gain_max = 2.4;
    BlendMode blend = BlendMode::PoissonNormalClone;
    double coverage_threshold = 0.10;  // position-grid quantizer
    int max_attempts = 1000;
};

struct SynthSample {
    Tensor image;
    Tensor gt_mask;
    SampleLabel label = SampleLabel::Normal;
    std::set<int> position_cells;
};

/// Draws source/destination/rect from the seeded generator, applies the
/// configured blend, and emits mask plus position cells. Degenerate draws
/// (mask empty after border zeroing, or area outside the configured bounds)
/// re-roll on the next seed substream.
inline SynthSample nsa_generate(std::uint64_t seed, const std::vector<Tensor>& normals,
                                const SynthConfig& cfg) {
    if (normals.empty()) throw ValueError("nsa_generate: needs at least one normal image");
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(attempt)));
        const std::size_t src_idx = rng.uniform_int(normals.size());
        std::size_t dst_idx = src_idx;
        if (normals.size() >= 2) {
            dst_idx = (src_idx + 1 + rng.uniform_int(normals.size() - 1)) % normals.size();
        }
        const Tensor& src = normals[src_idx];
        const Tensor& dst = normals[dst_idx];
        const std::size_t h = dst.extent(0), w = dst.extent(1);

        auto draw_extent = [&rng](std::size_t n, double lo_frac, double hi_frac) {
            const std::size_t lo = static_cast<std::size_t>(std::floor(lo_frac * static_cast<double>(n)));
            const std::size_t hi = static_cast<std::size_t>(std::floor(hi_frac * static_cast<double>(n)));
            return lo + rng.uniform_int(hi - lo + 1);
        };
        const std::size_t ph = draw_extent(h, cfg.patch_min_frac, cfg.patch_max_frac);
        const std::size_t pw = draw_extent(w, cfg.patch_min_frac, cfg.patch_max_frac);
        if (ph < 3 || pw < 3) continue;  // border zeroing would empty the mask
        if (ph > src.extent(0) || pw > src.extent(1) || ph > h || pw > w) continue;

        const double area = static_cast<double>((ph - 2) * (pw - 2));
        const double frac = area / static_cast<double>(h * w);
        if (frac < cfg.area_min_frac || frac > cfg.area_max_frac) continue;

        PatchSpec spec;
        spec.src_top = rng.uniform_int(src.extent(0) - ph + 1);
        spec.src_left = rng.uniform_int(src.extent(1) - pw + 1);
        spec.src_h = ph;
        spec.src_w = pw;
        spec.dst_center_row = ph / 2 + rng.uniform_int(h - ph + 1);
        spec.dst_center_col = pw / 2 + rng.uniform_int(w - pw + 1);
        spec.blend = cfg.blend;

        // Contrast augmentation of the source patch about mid-gray.
        const double gain = rng.uniform(cfg.src_gain_min, cfg.src_gain_max);
        const std::size_t channels = detail::image_channels(src);
        Tensor patch(channels == 1 ? std::vector<std::size_t>{ph, pw}
                                   : std::vector<std::size_t>{ph, pw, channels});
        for (std::size_t y = 0; y < ph; ++y)
            for (std::size_t x = 0; x < pw; ++x)
                for (std::size_t c = 0; c < channels; ++c)
                    detail::pixel_ref(patch, y, x, c) = std::clamp(
                        0.5 + gain * (detail::pixel(src, spec.src_top + y, spec.src_left + x, c) - 0.5),
                        0.0, 1.0);

        SynthSample sample;
        sample.label = SampleLabel::Abnormal;
        if (cfg.blend == BlendMode::CutPaste) {
            PatchSpec local = spec;
            local.src_top = 0;
            local.src_left = 0;
            CutPasteResult res = cut_paste(patch, dst, local);
            sample.image = std::move(res.image);
            sample.gt_mask = std::move(res.gt_mask);
        } else {
            Tensor region({ph, pw});
            for (std::size_t y = 1; y + 1 < ph; ++y)
                for (std::size_t x = 1; x + 1 < pw; ++x) region.at(y, x) = 1.0;
            PoissonCloneResult res =
                poisson_normal_clone(patch, dst, region, spec.dst_center_row, spec.dst_center_col);
            sample.image = std::move(res.image);
            sample.gt_mask = Tensor({h, w});
            const std::size_t top = spec.dst_center_row - ph / 2;
            const std::size_t left = spec.dst_center_col - pw / 2;
            for (std::size_t y = 1; y + 1 < ph; ++y)
                for (std::size_t x = 1; x + 1 < pw; ++x) sample.gt_mask.at(top + y, left + x) = 1.0;
        }
        sample.position_cells = position_cells(sample.gt_mask, cfg.coverage_threshold);
        return sample;
    }
    throw ValueError("nsa_generate: no admissible sample in " + std::to_string(cfg.max_attempts) +
                     " attempts");
}

}  // namespace aforge

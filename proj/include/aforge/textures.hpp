#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "aforge/errors.hpp"
#include "aforge/rng.hpp"
#include "aforge/tensor.hpp"

namespace aforge {

/// Procedural grayscale texture families used as zero-data normal samples.
/// Per-image parameters are drawn from narrow bands so the normal
/// distribution is tight and synthesized anomalies stand out.
struct TextureConfig {
    std::string family = "stripes";  // "stripes" or "blobs"

    // stripes
    double freq_min = 3.0;
    double freq_max = 6.0;
    double angle_min_deg = 60.0;
    double angle_max_deg = 120.0;

    // blobs
    std::size_t blob_count = 10;
    double blob_sigma_frac = 0.08;

    // shared intensity band
    double amp_min = 0.16;
    double amp_max = 0.26;
    double mean_min = 0.45;
    double mean_max = 0.55;
    double pixel_noise = 0.015;
};

inline Tensor generate_texture(const TextureConfig& cfg, std::size_t h, std::size_t w, Rng& rng) {
    Tensor img({h, w});
    const double mean = rng.uniform(cfg.mean_min, cfg.mean_max);
    const double amp = rng.uniform(cfg.amp_min, cfg.amp_max);

    if (cfg.family == "stripes") {
        const double freq = rng.uniform(cfg.freq_min, cfg.freq_max);
        const double angle = rng.uniform(cfg.angle_min_deg, cfg.angle_max_deg) * M_PI / 180.0;
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        const double cx = std::cos(angle), sy = std::sin(angle);
        const double scale = 2.0 * M_PI * freq / static_cast<double>(std::max(h, w));
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const double u = scale * (static_cast<double>(x) * cx + static_cast<double>(y) * sy);
                img.at(y, x) = mean + amp * std::sin(u + phase);
            }
    } else if (cfg.family == "blobs") {
        for (std::size_t i = 0; i < img.size(); ++i) img[i] = mean;
        const double sigma = cfg.blob_sigma_frac * static_cast<double>(std::max(h, w));
        for (std::size_t b = 0; b < cfg.blob_count; ++b) {
            const double by = rng.uniform(0.0, static_cast<double>(h));
            const double bx = rng.uniform(0.0, static_cast<double>(w));
            const double sign = b % 2 == 0 ? 1.0 : -1.0;
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    const double dy = static_cast<double>(y) - by;
                    const double dx = static_cast<double>(x) - bx;
                    img.at(y, x) += sign * amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                }
        }
    } else {
        throw ValueError("generate_texture: unknown family '" + cfg.family + "'");
    }

    for (std::size_t i = 0; i < img.size(); ++i) {
        img[i] = std::clamp(img[i] + rng.uniform(-cfg.pixel_noise, cfg.pixel_noise), 0.0, 1.0);
    }
    return img;
}

}  // namespace aforge

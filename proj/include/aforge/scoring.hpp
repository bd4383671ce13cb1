#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "aforge/encoders.hpp"
#include "aforge/errors.hpp"
#include "aforge/io.hpp"
#include "aforge/ops.hpp"
#include "aforge/prompt_bank.hpp"
#include "aforge/rng.hpp"
#include "aforge/tensor.hpp"

// The two localization paths: the trained decoder aligning patch features to
// prompt embeddings, and the training-free few-shot memory bank.

namespace aforge {

/// Per-level linear maps c3 -> c2 with bias.
struct DecoderParams {
    std::array<Tensor, 4> weight;  // c3 x c2
    std::array<Tensor, 4> bias;    // c2
};

/// Per-level and fused score maps. fused is the arithmetic mean of the four
/// bilinearly upsampled level maps; levels stay at native grid resolution.
struct AnomalyMapSet {
    Tensor fused;                      // out_h x out_w
    std::array<Tensor, 4> levels;      // h_l x w_l
    std::array<Tensor, 4> upsampled;   // out_h x out_w
};

namespace detail {

/// h x w x c3 -> (h*w) x c3, rows in row-major pixel order.
inline Tensor flatten_patches(const Tensor& level) {
    require_rank(level, 3, "flatten_patches");
    const std::size_t n = level.extent(0) * level.extent(1), c = level.extent(2);
    Tensor out({n, c});
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = level[i];
    return out;
}

inline Tensor to_map(const Tensor& scores, std::size_t h, std::size_t w) {
    Tensor map({h, w});
    for (std::size_t i = 0; i < map.size(); ++i) map[i] = scores[i];
    return map;
}

}  // namespace detail

inline AnomalyMapSet fuse_level_maps(std::array<Tensor, 4> levels, std::size_t out_h,
                                     std::size_t out_w) {
    AnomalyMapSet set;
    set.levels = std::move(levels);
    set.fused = Tensor({out_h, out_w});
    for (std::size_t l = 0; l < 4; ++l) {
        set.upsampled[l] = bilinear_upsample(set.levels[l], out_h, out_w);
        axpy(set.fused, 1.0, set.upsampled[l]);
    }
    for (std::size_t i = 0; i < set.fused.size(); ++i) set.fused[i] /= 4.0;
    return set;
}

/// Forward trace of the decoder path, retained for backpropagation.
struct DecodeForward {
    std::array<Tensor, 4> patches;    // n_l x c3
    std::array<Tensor, 4> projected;  // n_l x c2
    std::array<Tensor, 4> probs;      // n_l x L2_total
    std::array<Tensor, 4> level_maps; // h_l x w_l
    std::array<std::array<std::size_t, 2>, 4> grids;
};

inline void require_usable_prompts(const PromptMatrix& pm) {
    bool any_normal = false, any_abnormal = false;
    for (bool m : pm.abnormal_mask) (m ? any_abnormal : any_normal) = true;
    if (!any_normal || !any_abnormal) {
        throw ValueError("decode: prompt matrix needs at least one normal and one abnormal column");
    }
}

/// Per level: project patches, dot with prompt embeddings, softmax over the
/// prompt dimension, per-pixel score = probability mass at abnormal columns.
inline DecodeForward decode_forward(const PatchFeatureStack& stack, const PromptMatrix& pm,
                                    const DecoderParams& params) {
    require_usable_prompts(pm);
    DecodeForward fwd;
    for (std::size_t l = 0; l < 4; ++l) {
        const Tensor& level = stack.levels[l];
        fwd.grids[l] = {level.extent(0), level.extent(1)};
        fwd.patches[l] = detail::flatten_patches(level);
        fwd.projected[l] = linear(fwd.patches[l], params.weight[l], params.bias[l]);
        const Tensor logits = matmul(fwd.projected[l], transpose(pm.embeddings));
        fwd.probs[l] = softmax_rows(logits);
        const Tensor scores = masked_colsum(fwd.probs[l], pm.abnormal_mask);
        fwd.level_maps[l] = detail::to_map(scores, level.extent(0), level.extent(1));
    }
    return fwd;
}

struct DecoderGrads {
    std::array<Tensor, 4> dweight;
    std::array<Tensor, 4> dbias;
};

/// Backpropagates per-level map cotangents into the decoder linears.
inline DecoderGrads decode_backward(const DecodeForward& fwd, const PromptMatrix& pm,
                                    const std::array<Tensor, 4>& d_level_maps) {
    DecoderGrads grads;
    for (std::size_t l = 0; l < 4; ++l) {
        Tensor d_scores({fwd.patches[l].extent(0)});
        for (std::size_t i = 0; i < d_scores.size(); ++i) d_scores[i] = d_level_maps[l][i];
        const Tensor d_probs = masked_colsum_vjp(pm.rows(), pm.abnormal_mask, d_scores);
        const Tensor d_logits = softmax_rows_vjp(fwd.probs[l], d_probs);
        const Tensor d_projected = matmul(d_logits, pm.embeddings);
        grads.dweight[l] = matmul(transpose(fwd.patches[l]), d_projected);
        grads.dbias[l] = Tensor({d_projected.extent(1)});
        for (std::size_t i = 0; i < d_projected.extent(0); ++i)
            for (std::size_t j = 0; j < d_projected.extent(1); ++j)
                grads.dbias[l][j] += d_projected.at(i, j);
    }
    return grads;
}

inline AnomalyMapSet decode_map(const PatchFeatureStack& stack, const PromptMatrix& pm,
                                const DecoderParams& params, std::size_t out_h, std::size_t out_w) {
    DecodeForward fwd = decode_forward(stack, pm, params);
    return fuse_level_maps(fwd.level_maps, out_h, out_w);
}

// ---------------------------------------------------------------------------
// few-shot memory bank

/// Per-level stores of unit-normalized normal patch features.
struct MemoryBank {
    std::array<Tensor, 4> levels;  // N_l x c3
    std::size_t shot_count = 0;
    std::uint64_t seed = 0;
};

/// Encodes k seeded-sampled normal images and concatenates their per-level
/// patch vectors. Selection order is a seeded permutation of the pool, so a
/// k-shot bank is a row prefix of the (k+1)-shot bank under the same seed.
inline MemoryBank build_memory_bank(const std::vector<Tensor>& normals, const ImageEncoder& encoder,
                                    std::size_t k, std::uint64_t seed) {
    if (k < 1) throw ValueError("build_memory_bank: k must be at least 1");
    if (k > normals.size()) {
        throw ValueError("build_memory_bank: k=" + std::to_string(k) + " exceeds pool of " +
                         std::to_string(normals.size()));
    }
    std::vector<std::size_t> order(normals.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(seed, 0xb4));
    rng.shuffle(order);

    MemoryBank bank;
    bank.shot_count = k;
    bank.seed = seed;
    std::array<std::vector<double>, 4> rows;
    std::array<std::size_t, 4> c3{};
    for (std::size_t shot = 0; shot < k; ++shot) {
        auto [f_img, stack] = encoder.encode(normals[order[shot]]);
        (void)f_img;
        for (std::size_t l = 0; l < 4; ++l) {
            const Tensor flat = detail::flatten_patches(stack.levels[l]);
            c3[l] = flat.extent(1);
            rows[l].insert(rows[l].end(), flat.values().begin(), flat.values().end());
        }
    }
    for (std::size_t l = 0; l < 4; ++l) {
        const std::size_t n_rows = rows[l].size() / c3[l];
        bank.levels[l] = Tensor({n_rows, c3[l]}, std::move(rows[l]));
    }
    return bank;
}

/// Per patch: score = 1 - max over bank rows of the dot product, clamped to
/// [0,1]; fusion matches the decoder path.
inline AnomalyMapSet fewshot_map(const PatchFeatureStack& stack, const MemoryBank& bank,
                                 std::size_t out_h, std::size_t out_w) {
    std::array<Tensor, 4> level_maps;
    for (std::size_t l = 0; l < 4; ++l) {
        const Tensor& level = stack.levels[l];
        if (level.extent(2) != bank.levels[l].extent(1)) {
            throw ShapeError("fewshot_map: level " + std::to_string(l + 1) + " width " +
                             level.shape_str() + " vs bank " + bank.levels[l].shape_str());
        }
        const std::size_t h = level.extent(0), w = level.extent(1);
        Tensor map({h, w});
        const Tensor& rows = bank.levels[l];
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                double best = -1.0;
                for (std::size_t r = 0; r < rows.extent(0); ++r) {
                    double d = 0.0;
                    for (std::size_t c = 0; c < rows.extent(1); ++c)
                        d += level.at(y, x, c) * rows.at(r, c);
                    best = std::max(best, d);
                }
                map.at(y, x) = std::clamp(1.0 - best, 0.0, 1.0);
            }
        level_maps[l] = std::move(map);
    }
    return fuse_level_maps(std::move(level_maps), out_h, out_w);
}

/// Image-level score: maximum of the fused map.
inline double image_score(const AnomalyMapSet& maps) {
    double best = 0.0;
    for (std::size_t i = 0; i < maps.fused.size(); ++i) best = std::max(best, maps.fused[i]);
    return best;
}

// ---------------------------------------------------------------------------
// bank serialization: JSON manifest plus one raw f64le blob per level

inline void save_memory_bank(const MemoryBank& bank, const std::filesystem::path& prefix) {
    nlohmann::ordered_json manifest;
    manifest["version"] = 1;
    manifest["k"] = bank.shot_count;
    manifest["seed"] = bank.seed;
    manifest["levels"] = nlohmann::ordered_json::array();
    for (std::size_t l = 0; l < 4; ++l) {
        manifest["levels"].push_back(
            {{"rows", bank.levels[l].extent(0)}, {"c3", bank.levels[l].extent(1)}});
        write_f64_blob({&bank.levels[l]},
                       prefix.string() + ".l" + std::to_string(l + 1) + ".bin");
    }
    write_text_file(prefix.string() + ".json", manifest.dump(2) + "\n");
}

inline MemoryBank load_memory_bank(const std::filesystem::path& prefix) {
    const std::filesystem::path manifest_path = prefix.string() + ".json";
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_text_file(manifest_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("memory bank: " + manifest_path.string() + " is not valid JSON: " + e.what());
    }
    if (manifest.value("version", 0) != 1) {
        throw SchemaError("memory bank: unsupported version in " + manifest_path.string());
    }
    MemoryBank bank;
    bank.shot_count = manifest.at("k").get<std::size_t>();
    bank.seed = manifest.at("seed").get<std::uint64_t>();
    const auto& levels = manifest.at("levels");
    if (!levels.is_array() || levels.size() != 4) {
        throw SchemaError("memory bank: manifest must describe exactly 4 levels");
    }
    for (std::size_t l = 0; l < 4; ++l) {
        const std::size_t rows = levels[l].at("rows").get<std::size_t>();
        const std::size_t c3 = levels[l].at("c3").get<std::size_t>();
        bank.levels[l] = Tensor({rows, c3});
        read_f64_blob(prefix.string() + ".l" + std::to_string(l + 1) + ".bin", {&bank.levels[l]});
    }
    return bank;
}

}  // namespace aforge

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "aforge/encoders.hpp"
#include "aforge/errors.hpp"
#include "aforge/eval.hpp"
#include "aforge/io.hpp"
#include "aforge/model.hpp"
#include "aforge/rng.hpp"
#include "aforge/synth.hpp"
#include "aforge/textures.hpp"
#include "aforge/threads.hpp"

// Dataset plumbing: forged-sample manifests, the procedural forge driver,
// a directory-layout loader for user-supplied data, and encoding into the
// model's input representation.

namespace aforge {

struct ManifestEntry {
    std::string image;  // path relative to the manifest
    std::string mask;
    std::string label;  // "normal" | "abnormal"
    std::vector<int> cells;
};

struct DatasetManifest {
    std::vector<ManifestEntry> samples;
};

inline void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    nlohmann::ordered_json root;
    root["samples"] = nlohmann::ordered_json::array();
    for (const ManifestEntry& e : m.samples) {
        root["samples"].push_back(
            {{"image", e.image}, {"mask", e.mask}, {"label", e.label}, {"cells", e.cells}});
    }
    write_text_file(path, root.dump(2) + "\n");
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("manifest: " + path.string() + " is not valid JSON: " + e.what());
    }
    if (!root.contains("samples") || !root["samples"].is_array()) {
        throw SchemaError("manifest: " + path.string() + " is missing the samples array");
    }
    DatasetManifest m;
    for (const auto& js : root["samples"]) {
        ManifestEntry e;
        e.image = js.at("image").get<std::string>();
        e.mask = js.at("mask").get<std::string>();
        e.label = js.at("label").get<std::string>();
        if (e.label != "normal" && e.label != "abnormal") {
            throw SchemaError("manifest: unknown label '" + e.label + "'");
        }
        e.cells = js.at("cells").get<std::vector<int>>();
        m.samples.push_back(std::move(e));
    }
    return m;
}

// ---------------------------------------------------------------------------
// forging

struct ForgeConfig {
    std::size_t count = 500;           // total samples
    double abnormal_fraction = 0.5;    // deterministic interleave
    std::size_t holdout = 100;         // trailing samples listed in a second manifest
    std::size_t image_h = 64;
    std::size_t image_w = 64;
    TextureConfig texture;
    SynthConfig synth;
};

struct ForgeOutcome {
    std::size_t n_total = 0;
    std::size_t n_abnormal = 0;
    std::filesystem::path manifest;
    std::optional<std::filesystem::path> test_manifest;
};

/// Writes images (P5 PGM), masks (P5 PGM, 0/255) and manifest JSON into
/// out_dir. Samples interleave normal/abnormal by error diffusion so any
/// prefix or suffix split keeps the configured class balance. Byte-identical
/// for identical (config, seed).
inline ForgeOutcome forge_dataset(const ForgeConfig& cfg, std::uint64_t seed,
                                  const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::size_t holdout = std::min(cfg.holdout, cfg.count);

    // Decide labels up front (error diffusion on the abnormal fraction).
    std::vector<bool> abnormal(cfg.count);
    double acc = 0.0;
    for (std::size_t i = 0; i < cfg.count; ++i) {
        acc += cfg.abnormal_fraction;
        if (acc >= 1.0 - 1e-12) {
            abnormal[i] = true;
            acc -= 1.0;
        }
    }

    struct Slot {
        Tensor image;
        Tensor mask;
        std::set<int> cells;
    };
    std::vector<Slot> slots(cfg.count);
    parallel_for(cfg.count, [&](std::size_t i) {
        const std::uint64_t sample_seed = mix_seed(seed, 0xda7a0000ULL + i);
        if (abnormal[i]) {
            Rng rng(mix_seed(sample_seed, 1));
            std::vector<Tensor> pool;
            pool.push_back(generate_texture(cfg.texture, cfg.image_h, cfg.image_w, rng));
            pool.push_back(generate_texture(cfg.texture, cfg.image_h, cfg.image_w, rng));
            SynthSample s = nsa_generate(sample_seed, pool, cfg.synth);
            slots[i] = {std::move(s.image), std::move(s.gt_mask), std::move(s.position_cells)};
        } else {
            Rng rng(mix_seed(sample_seed, 2));
            slots[i].image = generate_texture(cfg.texture, cfg.image_h, cfg.image_w, rng);
            slots[i].mask = Tensor({cfg.image_h, cfg.image_w});
        }
    });

    DatasetManifest all;
    ForgeOutcome outcome;
    for (std::size_t i = 0; i < cfg.count; ++i) {
        char stem[32];
        std::snprintf(stem, sizeof(stem), "sample_%05zu", i);
        ManifestEntry e;
        e.image = std::string(stem) + ".pgm";
        e.mask = std::string(stem) + "_mask.pgm";
        e.label = abnormal[i] ? "abnormal" : "normal";
        e.cells.assign(slots[i].cells.begin(), slots[i].cells.end());
        write_pnm(slots[i].image, out_dir / e.image);
        write_pnm(slots[i].mask, out_dir / e.mask);
        all.samples.push_back(std::move(e));
        outcome.n_abnormal += abnormal[i];
    }
    outcome.n_total = cfg.count;

    if (holdout > 0) {
        DatasetManifest train, test;
        const std::size_t split = cfg.count - holdout;
        for (std::size_t i = 0; i < cfg.count; ++i) {
            (i < split ? train : test).samples.push_back(all.samples[i]);
        }
        outcome.manifest = out_dir / "manifest.json";
        outcome.test_manifest = out_dir / "manifest_test.json";
        write_manifest(train, outcome.manifest);
        write_manifest(test, *outcome.test_manifest);
    } else {
        outcome.manifest = out_dir / "manifest.json";
        write_manifest(all, outcome.manifest);
    }
    return outcome;
}

// ---------------------------------------------------------------------------
// loading and encoding

struct LoadedSample {
    Tensor image;
    Tensor mask;
    SampleLabel label = SampleLabel::Normal;
    std::set<int> cells;
    std::string stem;  // image filename without extension, for heatmap names
};

inline std::vector<LoadedSample> load_samples(const std::filesystem::path& manifest_path) {
    const DatasetManifest m = load_manifest(manifest_path);
    const std::filesystem::path base = manifest_path.parent_path();
    std::vector<LoadedSample> out(m.samples.size());
    parallel_for(m.samples.size(), [&](std::size_t i) {
        const ManifestEntry& e = m.samples[i];
        LoadedSample s;
        s.image = read_pnm(base / e.image);
        s.mask = read_pnm(base / e.mask);
        s.label = e.label == "abnormal" ? SampleLabel::Abnormal : SampleLabel::Normal;
        s.cells.insert(e.cells.begin(), e.cells.end());
        s.stem = std::filesystem::path(e.image).stem().string();
        out[i] = std::move(s);
    });
    return out;
}

inline EncodedSample encode_sample(const LoadedSample& s, const ImageEncoder& encoder) {
    EncodedSample enc;
    auto [f_img, stack] = encoder.encode(s.image);
    enc.f_img = std::move(f_img);
    enc.stack = std::move(stack);
    enc.gt_mask = s.mask;
    enc.label = s.label;
    enc.target_cell = s.label == SampleLabel::Abnormal ? centroid_cell(s.mask) : -1;
    return enc;
}

inline std::vector<EncodedSample> encode_samples(const std::vector<LoadedSample>& samples,
                                                 const ImageEncoder& encoder) {
    std::vector<EncodedSample> out(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) { out[i] = encode_sample(samples[i], encoder); });
    return out;
}

// ---------------------------------------------------------------------------
// directory-layout loader for user-supplied data
//
//   root/train/good/*.pgm            normal training images
//   root/test/good/*.pgm             normal test images
//   root/test/<defect>/*.pgm         anomalous test images
//   root/ground_truth/<defect>/<stem>_mask.pgm
//
// Files are visited in sorted order; PGM and PPM both accepted.

namespace detail {
inline std::vector<std::filesystem::path> sorted_images(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    if (!std::filesystem::is_directory(dir)) return files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".pgm" || ext == ".ppm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}
}  // namespace detail

inline std::vector<LoadedSample> load_image_folder(const std::filesystem::path& root,
                                                   const std::string& split) {
    if (split != "train" && split != "test") {
        throw ValueError("load_image_folder: split must be 'train' or 'test'");
    }
    const std::filesystem::path split_dir = root / split;
    if (!std::filesystem::is_directory(split_dir)) {
        throw IoError("load_image_folder: no such directory: " + split_dir.string());
    }
    std::vector<std::filesystem::path> categories;
    for (const auto& entry : std::filesystem::directory_iterator(split_dir)) {
        if (entry.is_directory()) categories.push_back(entry.path());
    }
    std::sort(categories.begin(), categories.end());

    std::vector<LoadedSample> out;
    for (const auto& cat : categories) {
        const bool good = cat.filename() == "good";
        for (const auto& file : detail::sorted_images(cat)) {
            LoadedSample s;
            s.image = read_pnm(file);
            s.stem = file.stem().string();
            if (good) {
                s.label = SampleLabel::Normal;
                s.mask = Tensor({s.image.extent(0), s.image.extent(1)});
            } else {
                s.label = SampleLabel::Abnormal;
                const std::filesystem::path mask_path =
                    root / "ground_truth" / cat.filename() / (file.stem().string() + "_mask.pgm");
                if (!std::filesystem::exists(mask_path)) {
                    throw IoError("load_image_folder: missing mask " + mask_path.string());
                }
                Tensor mask = read_pnm(mask_path);
                for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = mask[i] > 0.5 ? 1.0 : 0.0;
                s.mask = std::move(mask);
                s.cells = position_cells(s.mask);
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

}  // namespace aforge

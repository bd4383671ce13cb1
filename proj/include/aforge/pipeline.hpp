#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "aforge/dataset.hpp"
#include "aforge/encoders.hpp"
#include "aforge/errors.hpp"
#include "aforge/eval.hpp"
#include "aforge/io.hpp"
#include "aforge/model.hpp"
#include "aforge/prompt_bank.hpp"
#include "aforge/scoring.hpp"
#include "aforge/synth.hpp"
#include "aforge/textures.hpp"
#include "aforge/threads.hpp"

// High-level runs wiring all modules together. The CLI is a thin argument
// parser over these functions; the acceptance suite drives them directly.

namespace aforge {

struct RunConfig {
    std::optional<std::uint64_t> seed;  // mandatory where randomness is drawn
    std::size_t image_h = 64;
    std::size_t image_w = 64;

    // frozen toy backbone
    std::uint64_t encoder_seed = 0;
    std::size_t c1 = 32;
    std::size_t c2 = 32;
    std::size_t c3 = 16;
    std::array<std::array<std::size_t, 2>, 4> level_grids{{{16, 16}, {8, 8}, {8, 8}, {4, 4}}};

    TextureConfig texture;
    SynthConfig synth;

    // forging
    std::size_t forge_count = 500;
    double abnormal_fraction = 0.5;
    std::size_t holdout = 100;

    // prompts
    std::string prompts_path = "data/prompts/toy_textures.json";
    std::string prompt_class = "stripes";

    // model
    std::size_t mcb_mid = 16;
    std::size_t pool_grid = 2;
    std::size_t l3 = 4;
    std::size_t answer_hidden = 64;

    // training
    int epochs_per_stage = 20;
    std::size_t batch_size = 16;
    double base_lr = 5e-4;
    double warmup_frac = 0.1;
    FocalConfig focal;

    // evaluation
    double coverage_threshold = 0.10;

    std::uint64_t require_seed() const {
        if (!seed) throw ValueError("config: seed is mandatory for this command (set --seed or \"seed\")");
        return *seed;
    }

    EncoderConfig encoder_config() const {
        EncoderConfig cfg;
        cfg.seed = encoder_seed;
        cfg.image_h = image_h;
        cfg.image_w = image_w;
        cfg.level_grids = level_grids;
        cfg.c1 = c1;
        cfg.c2 = c2;
        cfg.c3 = c3;
        cfg.validate();
        return cfg;
    }

    ModelDims model_dims() const {
        ModelDims dims;
        dims.c1 = c1;
        dims.c2 = c2;
        dims.c3 = c3;
        dims.categories = 2;
        dims.mcb_mid = mcb_mid;
        dims.pool_grid = pool_grid;
        dims.l3 = l3;
        dims.answer_hidden = answer_hidden;
        return dims;
    }

    ForgeConfig forge_config() const {
        ForgeConfig fc;
        fc.count = forge_count;
        fc.abnormal_fraction = abnormal_fraction;
        fc.holdout = holdout;
        fc.image_h = image_h;
        fc.image_w = image_w;
        fc.texture = texture;
        fc.synth = synth;
        fc.synth.coverage_threshold = coverage_threshold;
        return fc;
    }
};

// ---------------------------------------------------------------------------
// config file parsing (strict: unknown keys rejected) and merging

namespace detail {

inline void check_keys(const nlohmann::json& obj, const std::set<std::string>& known,
                       const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (known.find(it.key()) == known.end()) {
            throw SchemaError("config: unknown field '" + it.key() + "' in " + where);
        }
    }
}

template <typename T>
void maybe(const nlohmann::json& obj, const char* key, T& target) {
    if (obj.contains(key)) target = obj.at(key).get<T>();
}

}  // namespace detail

inline void apply_config_json(const nlohmann::json& root, RunConfig& cfg) {
    detail::check_keys(root,
                       {"seed", "image", "encoder", "texture", "synth", "forge", "prompts", "model",
                        "train", "eval"},
                       "top level");
    if (root.contains("seed")) cfg.seed = root.at("seed").get<std::uint64_t>();
    if (root.contains("image")) {
        const auto& j = root["image"];
        detail::check_keys(j, {"height", "width"}, "image");
        detail::maybe(j, "height", cfg.image_h);
        detail::maybe(j, "width", cfg.image_w);
    }
    if (root.contains("encoder")) {
        const auto& j = root["encoder"];
        detail::check_keys(j, {"seed", "c1", "c2", "c3", "level_grids"}, "encoder");
        detail::maybe(j, "seed", cfg.encoder_seed);
        detail::maybe(j, "c1", cfg.c1);
        detail::maybe(j, "c2", cfg.c2);
        detail::maybe(j, "c3", cfg.c3);
        if (j.contains("level_grids")) {
            const auto grids = j["level_grids"].get<std::vector<std::vector<std::size_t>>>();
            if (grids.size() != 4) throw SchemaError("config: level_grids must list 4 grids");
            for (std::size_t l = 0; l < 4; ++l) {
                if (grids[l].size() != 2) throw SchemaError("config: each level grid is [h, w]");
                cfg.level_grids[l] = {grids[l][0], grids[l][1]};
            }
        }
    }
    if (root.contains("texture")) {
        const auto& j = root["texture"];
        detail::check_keys(j,
                           {"family", "freq_min", "freq_max", "angle_min_deg", "angle_max_deg",
                            "blob_count", "blob_sigma_frac", "amp_min", "amp_max", "mean_min",
                            "mean_max", "pixel_noise"},
                           "texture");
        detail::maybe(j, "family", cfg.texture.family);
        detail::maybe(j, "freq_min", cfg.texture.freq_min);
        detail::maybe(j, "freq_max", cfg.texture.freq_max);
        detail::maybe(j, "angle_min_deg", cfg.texture.angle_min_deg);
        detail::maybe(j, "angle_max_deg", cfg.texture.angle_max_deg);
        detail::maybe(j, "blob_count", cfg.texture.blob_count);
        detail::maybe(j, "blob_sigma_frac", cfg.texture.blob_sigma_frac);
        detail::maybe(j, "amp_min", cfg.texture.amp_min);
        detail::maybe(j, "amp_max", cfg.texture.amp_max);
        detail::maybe(j, "mean_min", cfg.texture.mean_min);
        detail::maybe(j, "mean_max", cfg.texture.mean_max);
        detail::maybe(j, "pixel_noise", cfg.texture.pixel_noise);
    }
    if (root.contains("synth")) {
        const auto& j = root["synth"];
        detail::check_keys(j,
                           {"blend", "patch_min_frac", "patch_max_frac", "area_min_frac",
                            "area_max_frac", "src_gain_min", "src_gain_max", "max_attempts"},
                           "synth");
        if (j.contains("blend")) {
            const std::string b = j["blend"].get<std::string>();
            if (b == "cutpaste") {
                cfg.synth.blend = BlendMode::CutPaste;
            } else if (b == "poisson_normal_clone") {
                cfg.synth.blend = BlendMode::PoissonNormalClone;
            } else {
                throw SchemaError("config: unknown blend '" + b + "'");
            }
        }
        detail::maybe(j, "patch_min_frac", cfg.synth.patch_min_frac);
        detail::maybe(j, "patch_max_frac", cfg.synth.patch_max_frac);
        detail::maybe(j, "area_min_frac", cfg.synth.area_min_frac);
        detail::maybe(j, "area_max_frac", cfg.synth.area_max_frac);
        detail::maybe(j, "src_gain_min", cfg.synth.src_gain_min);
        detail::maybe(j, "src_gain_max", cfg.synth.src_gain_max);
        detail::maybe(j, "max_attempts", cfg.synth.max_attempts);
    }
    if (root.contains("forge")) {
        const auto& j = root["forge"];
        detail::check_keys(j, {"count", "abnormal_fraction", "holdout"}, "forge");
        detail::maybe(j, "count", cfg.forge_count);
        detail::maybe(j, "abnormal_fraction", cfg.abnormal_fraction);
        detail::maybe(j, "holdout", cfg.holdout);
    }
    if (root.contains("prompts")) {
        const auto& j = root["prompts"];
        detail::check_keys(j, {"path", "class"}, "prompts");
        detail::maybe(j, "path", cfg.prompts_path);
        detail::maybe(j, "class", cfg.prompt_class);
    }
    if (root.contains("model")) {
        const auto& j = root["model"];
        detail::check_keys(j, {"mcb_mid", "pool_grid", "l3", "answer_hidden"}, "model");
        detail::maybe(j, "mcb_mid", cfg.mcb_mid);
        detail::maybe(j, "pool_grid", cfg.pool_grid);
        detail::maybe(j, "l3", cfg.l3);
        detail::maybe(j, "answer_hidden", cfg.answer_hidden);
    }
    if (root.contains("train")) {
        const auto& j = root["train"];
        detail::check_keys(
            j, {"epochs_per_stage", "batch_size", "base_lr", "warmup_frac", "focal_alpha", "focal_gamma"},
            "train");
        detail::maybe(j, "epochs_per_stage", cfg.epochs_per_stage);
        detail::maybe(j, "batch_size", cfg.batch_size);
        detail::maybe(j, "base_lr", cfg.base_lr);
        detail::maybe(j, "warmup_frac", cfg.warmup_frac);
        detail::maybe(j, "focal_alpha", cfg.focal.alpha);
        detail::maybe(j, "focal_gamma", cfg.focal.gamma);
    }
    if (root.contains("eval")) {
        const auto& j = root["eval"];
        detail::check_keys(j, {"coverage_threshold"}, "eval");
        detail::maybe(j, "coverage_threshold", cfg.coverage_threshold);
    }
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    RunConfig cfg;
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("config: " + path.string() + " is not valid JSON: " + e.what());
    }
    apply_config_json(root, cfg);
    return cfg;
}

inline std::string dump_run_config(const RunConfig& cfg) {
    nlohmann::ordered_json root;
    if (cfg.seed) root["seed"] = *cfg.seed;
    root["image"] = {{"height", cfg.image_h}, {"width", cfg.image_w}};
    root["encoder"] = {{"seed", cfg.encoder_seed},
                       {"c1", cfg.c1},
                       {"c2", cfg.c2},
                       {"c3", cfg.c3},
                       {"level_grids", cfg.level_grids}};
    root["texture"] = {{"family", cfg.texture.family},
                       {"freq_min", cfg.texture.freq_min},
                       {"freq_max", cfg.texture.freq_max},
                       {"angle_min_deg", cfg.texture.angle_min_deg},
                       {"angle_max_deg", cfg.texture.angle_max_deg},
                       {"blob_count", cfg.texture.blob_count},
                       {"blob_sigma_frac", cfg.texture.blob_sigma_frac},
                       {"amp_min", cfg.texture.amp_min},
                       {"amp_max", cfg.texture.amp_max},
                       {"mean_min", cfg.texture.mean_min},
                       {"mean_max", cfg.texture.mean_max},
                       {"pixel_noise", cfg.texture.pixel_noise}};
    root["synth"] = {{"blend", cfg.synth.blend == BlendMode::CutPaste ? "cutpaste" : "poisson_normal_clone"},
                     {"patch_min_frac", cfg.synth.patch_min_frac},
                     {"patch_max_frac", cfg.synth.patch_max_frac},
                     {"area_min_frac", cfg.synth.area_min_frac},
                     {"area_max_frac", cfg.synth.area_max_frac},
                     {"src_gain_min", cfg.synth.src_gain_min},
                     {"src_gain_max", cfg.synth.src_gain_max},
                     {"max_attempts", cfg.synth.max_attempts}};
    root["forge"] = {{"count", cfg.forge_count},
                     {"abnormal_fraction", cfg.abnormal_fraction},
                     {"holdout", cfg.holdout}};
    root["prompts"] = {{"path", cfg.prompts_path}, {"class", cfg.prompt_class}};
    root["model"] = {{"mcb_mid", cfg.mcb_mid},
                     {"pool_grid", cfg.pool_grid},
                     {"l3", cfg.l3},
                     {"answer_hidden", cfg.answer_hidden}};
    root["train"] = {{"epochs_per_stage", cfg.epochs_per_stage},
                     {"batch_size", cfg.batch_size},
                     {"base_lr", cfg.base_lr},
                     {"warmup_frac", cfg.warmup_frac},
                     {"focal_alpha", cfg.focal.alpha},
                     {"focal_gamma", cfg.focal.gamma}};
    root["eval"] = {{"coverage_threshold", cfg.coverage_threshold}};
    return root.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// shared assembly

inline ModelInputs build_model_inputs(const RunConfig& cfg, const TextEncoder& text_encoder) {
    const PromptBank bank = load_prompt_bank(cfg.prompts_path);
    ModelInputs in;
    in.pm = build_prompt_matrix(bank.require_class(cfg.prompt_class), text_encoder);
    in.f_win_cat = win_category_embeddings(in.pm);
    in.map_h = cfg.image_h;
    in.map_w = cfg.image_w;
    in.focal = cfg.focal;
    return in;
}

// ---------------------------------------------------------------------------
// forge

inline ForgeOutcome run_forge(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    return forge_dataset(cfg.forge_config(), cfg.require_seed(), out_dir);
}

// ---------------------------------------------------------------------------
// train

struct TrainOutcome {
    std::array<std::filesystem::path, 3> checkpoints;
    std::filesystem::path log_csv;
};

namespace detail {
inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace detail

/// Runs the three training stages in order and writes one checkpoint per
/// stage plus a training-log CSV. start_stage > 1 resumes from the previous
/// stage's checkpoint; out-of-order resumes are rejected.
inline TrainOutcome run_train(const RunConfig& cfg, const std::filesystem::path& manifest_path,
                              const std::filesystem::path& out_dir, int start_stage = 1,
                              const std::optional<std::filesystem::path>& resume_prefix = {}) {
    const std::uint64_t seed = cfg.require_seed();
    std::filesystem::create_directories(out_dir);
    if (start_stage < 1 || start_stage > 3) throw ValueError("train: start stage must be 1, 2 or 3");

    const EncoderConfig enc_cfg = cfg.encoder_config();
    const ToyImageEncoder image_encoder(enc_cfg);
    const ToyTextEncoder text_encoder(enc_cfg);
    const ModelInputs inputs = build_model_inputs(cfg, text_encoder);

    const std::vector<LoadedSample> raw = load_samples(manifest_path);
    const std::vector<EncodedSample> data = encode_samples(raw, image_encoder);

    ModelParams params = init_model(cfg.model_dims(), seed);
    if (start_stage > 1) {
        if (!resume_prefix) throw ValueError("train: resuming a later stage needs --resume");
        const CheckpointMeta meta = load_checkpoint(*resume_prefix, params);
        if (meta.stage != start_stage - 1) {
            throw ValueError("train: resume checkpoint is stage " + std::to_string(meta.stage) +
                             ", cannot start stage " + std::to_string(start_stage) +
                             " (stages run 1 -> 2 -> 3)");
        }
    }

    std::vector<StagePlan> plans;
    for (int stage = start_stage; stage <= 3; ++stage) {
        plans.push_back(make_stage_plan(stage, cfg.epochs_per_stage, cfg.base_lr, cfg.batch_size,
                                        cfg.warmup_frac));
    }

    TrainOutcome outcome;
    std::vector<TrainLogRow> log;
    train(std::move(params), inputs, data, plans, seed, &log,
          [&](int stage, const ModelParams& p) {
              CheckpointMeta meta;
              meta.seed = seed;
              meta.stage = stage;
              const std::filesystem::path prefix = out_dir / ("stage" + std::to_string(stage));
              save_checkpoint(p, meta, prefix);
              outcome.checkpoints[static_cast<std::size_t>(stage - 1)] = prefix;
          });

    std::string csv = "step,stage,lr,l_c,l_f,l_d\n";
    for (const TrainLogRow& row : log) {
        csv += std::to_string(row.step) + "," + std::to_string(row.stage) + "," +
               detail::format_g17(row.lr) + "," + detail::format_g17(row.lc) + "," +
               detail::format_g17(row.lf) + "," + detail::format_g17(row.ld) + "\n";
    }
    outcome.log_csv = out_dir / "train_log.csv";
    write_text_file(outcome.log_csv, csv);
    return outcome;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
    std::optional<std::filesystem::path> bank_prefix;  // few-shot map source
    bool heatmaps = false;
    bool oracle_maps = false;  // harness self-test: use gt masks as maps
    std::string split = "test";
};

/// Answer-head forward over externally supplied level maps (the few-shot
/// path feeds memory-bank maps through the same MMF and head).
inline Tensor answer_logits_from_maps(const ModelParams& p, const ModelInputs& in,
                                      const Tensor& f_img, const std::array<Tensor, 4>& level_maps) {
    const TgeForward tge = tge_forward(f_img, in.f_win_cat, p.tge);
    std::array<Tensor, 4> tokens;
    for (std::size_t l = 0; l < 4; ++l) tokens[l] = mcb_embed(level_maps[l], p.mmf.mcbs[l]);
    const Tensor e_fusion = fuse(tokens);
    const Tensor e_expert = assemble(e_fusion, p.mmf.e_base);
    const Tensor pooled = mean_rows(e_expert);
    const std::array<Tensor, 2> parts = {tge.e_img, pooled};
    const Tensor head_in = concat_cols(std::span<const Tensor>(parts.data(), parts.size()));
    return linear(relu(linear(head_in, p.answer.w1, p.answer.b1)), p.answer.w2, p.answer.b2);
}

inline MetricsReport run_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint_prefix,
                              const std::filesystem::path& manifest_path,
                              const std::filesystem::path& out_dir, const EvalOptions& opts = {}) {
    std::filesystem::create_directories(out_dir);
    const EncoderConfig enc_cfg = cfg.encoder_config();
    const ToyImageEncoder image_encoder(enc_cfg);
    const ToyTextEncoder text_encoder(enc_cfg);
    const ModelInputs inputs = build_model_inputs(cfg, text_encoder);

    ModelParams params = init_model(cfg.model_dims(), 0);
    load_checkpoint(checkpoint_prefix, params);

    std::optional<MemoryBank> bank;
    if (opts.bank_prefix) bank = load_memory_bank(*opts.bank_prefix);

    const std::vector<LoadedSample> raw = load_samples(manifest_path);
    const std::size_t n = raw.size();

    struct PerImage {
        double score = 0.0;
        SampleLabel pred = SampleLabel::Normal;
        int pred_cell = 0;
        Tensor fused;
    };
    std::vector<PerImage> results(n);
    parallel_for(n, [&](std::size_t i) {
        const EncodedSample enc = encode_sample(raw[i], image_encoder);
        PerImage r;
        if (opts.oracle_maps) {
            r.fused = raw[i].mask;
            r.score = image_score(AnomalyMapSet{raw[i].mask, {}, {}});
            r.pred = r.score > 0.0 ? SampleLabel::Abnormal : SampleLabel::Normal;
            r.pred_cell = r.score > 0.0 ? centroid_cell(raw[i].mask) : 0;
        } else {
            const AnomalyMapSet maps =
                bank ? fewshot_map(enc.stack, *bank, inputs.map_h, inputs.map_w)
                     : decode_map(enc.stack, inputs.pm, params.decoder, inputs.map_h, inputs.map_w);
            const Tensor logits = answer_logits_from_maps(params, inputs, enc.f_img, maps.levels);
            r.fused = maps.fused;
            r.score = image_score(maps);
            r.pred = logits.at(0, 0) > 0.0 ? SampleLabel::Abnormal : SampleLabel::Normal;
            int best = 0;
            for (int j = 1; j < 9; ++j) {
                if (logits.at(0, static_cast<std::size_t>(j) + 1) >
                    logits.at(0, static_cast<std::size_t>(best) + 1)) {
                    best = j;
                }
            }
            r.pred_cell = best;
        }
        results[i] = std::move(r);
    });

    std::vector<double> scores(n);
    std::vector<int> labels(n);
    std::vector<Tensor> maps(n), gts(n);
    std::vector<SampleLabel> preds(n), truth(n);
    std::size_t abnormal_total = 0, position_hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = results[i].score;
        labels[i] = raw[i].label == SampleLabel::Abnormal ? 1 : 0;
        maps[i] = results[i].fused;
        gts[i] = raw[i].mask;
        preds[i] = results[i].pred;
        truth[i] = raw[i].label;
        if (raw[i].label == SampleLabel::Abnormal && !raw[i].cells.empty()) {
            ++abnormal_total;
            position_hits += raw[i].cells.count(results[i].pred_cell) > 0;
        }
    }

    MetricsReport report;
    report.split = opts.split;
    report.n_images = n;
    report.n_pixels = n * cfg.image_h * cfg.image_w;
    report.i_auroc = auroc(scores, labels);
    report.p_auroc = pixel_auroc(maps, gts);
    report.accuracy = accuracy(preds, truth);
    report.position_accuracy =
        abnormal_total ? static_cast<double>(position_hits) / static_cast<double>(abnormal_total) : 0.0;

    write_metrics_report(report, out_dir / "report.csv", out_dir / "report.json");
    if (opts.heatmaps) {
        std::filesystem::create_directories(out_dir / "heatmaps");
        for (std::size_t i = 0; i < n; ++i) {
            export_heatmap(results[i].fused, out_dir / "heatmaps" / (raw[i].stem + ".pgm"));
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// bank / map / prompts

/// Builds a memory bank from the normal samples of a manifest (or all images
/// of a directory) and writes it next to `out_prefix`.
inline std::filesystem::path run_bank(const RunConfig& cfg, std::size_t k,
                                      const std::filesystem::path& source,
                                      const std::filesystem::path& out_prefix) {
    const std::uint64_t seed = cfg.require_seed();
    const ToyImageEncoder image_encoder(cfg.encoder_config());

    std::vector<Tensor> normals;
    if (std::filesystem::is_directory(source)) {
        for (const auto& file : detail::sorted_images(source)) normals.push_back(read_pnm(file));
    } else {
        for (const LoadedSample& s : load_samples(source)) {
            if (s.label == SampleLabel::Normal) normals.push_back(s.image);
        }
    }
    if (normals.empty()) throw ValueError("bank: no normal images found in " + source.string());
    const MemoryBank bank = build_memory_bank(normals, image_encoder, k, seed);
    std::filesystem::create_directories(out_prefix.parent_path().empty()
                                            ? std::filesystem::path(".")
                                            : out_prefix.parent_path());
    save_memory_bank(bank, out_prefix);
    return out_prefix;
}

/// Scores one image through either the decoder (checkpoint) or the few-shot
/// path (bank) and writes the fused map as a PGM of the input's size.
inline void run_map(const RunConfig& cfg, const std::filesystem::path& image_path,
                    const std::optional<std::filesystem::path>& checkpoint_prefix,
                    const std::optional<std::filesystem::path>& bank_prefix,
                    const std::filesystem::path& out_path) {
    if (checkpoint_prefix.has_value() == bank_prefix.has_value()) {
        throw ValueError("map: exactly one of --checkpoint and --bank is required");
    }
    const EncoderConfig enc_cfg = cfg.encoder_config();
    const ToyImageEncoder image_encoder(enc_cfg);
    const Tensor img = read_pnm(image_path);
    auto [f_img, stack] = image_encoder.encode(img);
    (void)f_img;

    AnomalyMapSet maps;
    if (bank_prefix) {
        const MemoryBank bank = load_memory_bank(*bank_prefix);
        maps = fewshot_map(stack, bank, img.extent(0), img.extent(1));
    } else {
        const ToyTextEncoder text_encoder(enc_cfg);
        const ModelInputs inputs = build_model_inputs(cfg, text_encoder);
        ModelParams params = init_model(cfg.model_dims(), 0);
        load_checkpoint(*checkpoint_prefix, params);
        maps = decode_map(stack, inputs.pm, params.decoder, img.extent(0), img.extent(1));
    }
    export_heatmap(maps.fused, out_path);
}

/// Validates a prompt-bank file and reports per-class statistics.
inline std::string run_prompts(const std::filesystem::path& path) {
    const PromptBank bank = load_prompt_bank(path);
    std::string out;
    for (const ClassPrompts& cp : bank.classes) {
        const auto expanded = expand_templates(cp);
        out += "class " + cp.class_name + ": " + std::to_string(cp.normal_templates.size()) +
               " normal, " + std::to_string(cp.abnormal_templates.size()) + " abnormal, " +
               std::to_string(cp.keywords.size()) + " keyword prompts (" +
               std::to_string(expanded.size()) + " total)\n";
    }
    out += "valid\n";
    return out;
}

}  // namespace aforge

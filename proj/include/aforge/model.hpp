#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "aforge/encoders.hpp"
#include "aforge/errors.hpp"
#include "aforge/eval.hpp"
#include "aforge/io.hpp"
#include "aforge/learn.hpp"
#include "aforge/mmf.hpp"
#include "aforge/ops.hpp"
#include "aforge/prompt_bank.hpp"
#include "aforge/rng.hpp"
#include "aforge/scoring.hpp"
#include "aforge/tge.hpp"
#include "aforge/threads.hpp"

// The trainable model: decoder linears, TGE, MMF and the answer head that
// stands in for the language model, plus the staged gradient-descent driver
// and versioned checkpoints.

namespace aforge {

struct ModelDims {
    std::size_t c1 = 32;
    std::size_t c2 = 32;
    std::size_t c3 = 16;
    std::size_t categories = 2;  // TGE expert count = template categories
    std::size_t mcb_mid = 16;    // MCB intermediate channels
    std::size_t pool_grid = 2;   // L1 = pool_grid^2 tokens per level map
    std::size_t l3 = 4;          // trainable base embedding rows
    std::size_t answer_hidden = 64;

    std::size_t c_emb() const { return 4 * c3; }  // forced by channel concatenation
    std::size_t l1() const { return pool_grid * pool_grid; }
};

/// Two-layer map from concat(E_img, mean-pooled E_expert) to one anomaly
/// logit plus nine position-cell logits.
struct AnswerHeadParams {
    Tensor w1;  // 2*c_emb x hidden
    Tensor b1;  // hidden
    Tensor w2;  // hidden x 10
    Tensor b2;  // 10
};

struct ModelParams {
    ModelDims dims;
    DecoderParams decoder;
    TgeParams tge;
    MmfParams mmf;
    AnswerHeadParams answer;
};

namespace detail {
inline Tensor seeded_normal(std::vector<std::size_t> shape, double stddev, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = stddev * rng.normal();
    return t;
}
}  // namespace detail

inline ModelParams init_model(const ModelDims& dims, std::uint64_t seed) {
    if (dims.categories < 2) throw ValueError("init_model: need at least 2 template categories");
    ModelParams p;
    p.dims = dims;
    std::uint64_t stream = 0;
    auto next = [&seed, &stream]() { return mix_seed(seed, stream++); };

    // Decoder linears start at zero: the initial maps are prompt-determined
    // constants with no random tilt, so every learned increment moves the
    // pixel ordering coherently.
    for (std::size_t l = 0; l < 4; ++l) {
        p.decoder.weight[l] = Tensor({dims.c3, dims.c2});
        p.decoder.bias[l] = Tensor({dims.c2});
        next();
        next();
    }

    const double inv_c1 = 1.0 / std::sqrt(static_cast<double>(dims.c1));
    p.tge.gate_value_w = detail::seeded_normal({dims.c1, dims.c1}, inv_c1, next());
    p.tge.gate_value_b = Tensor({dims.c1});
    p.tge.align_w = detail::seeded_normal({dims.c2, dims.c1},
                                          1.0 / std::sqrt(static_cast<double>(dims.c2)), next());
    p.tge.align_b = Tensor({dims.c1});
    for (std::size_t e = 0; e < dims.categories; ++e) {
        ExpertParams ep;
        ep.value_w = detail::seeded_normal({dims.c1, dims.c1}, inv_c1, next());
        ep.value_b = Tensor({dims.c1});
        ep.ff1_w = detail::seeded_normal({dims.c1, 2 * dims.c1},
                                         std::sqrt(2.0 / static_cast<double>(dims.c1)), next());
        ep.ff1_b = Tensor({2 * dims.c1});
        // Wide output scale: the head's convergence under the fixed
        // learning-rate budget grows with its input feature magnitudes.
        ep.ff2_w = detail::seeded_normal({2 * dims.c1, dims.c_emb()}, 2.0, next());
        ep.ff2_b = Tensor({dims.c_emb()});
        p.tge.experts.push_back(std::move(ep));
    }

    for (std::size_t l = 0; l < 4; ++l) {
        McbParams& m = p.mmf.mcbs[l];
        m.conv1_k = detail::seeded_normal({3, 3, 1, dims.mcb_mid}, std::sqrt(2.0 / 9.0), next());
        m.conv1_b = Tensor({dims.mcb_mid});
        m.conv2_k = detail::seeded_normal({3, 3, dims.mcb_mid, dims.mcb_mid},
                                          std::sqrt(2.0 / (9.0 * static_cast<double>(dims.mcb_mid))),
                                          next());
        m.conv2_b = Tensor({dims.mcb_mid});
        m.dw_k = detail::seeded_normal({3, 3, dims.mcb_mid}, std::sqrt(2.0 / 9.0), next());
        m.dw_b = Tensor({dims.mcb_mid});
        m.pw_k = detail::seeded_normal({1, 1, dims.mcb_mid, dims.c3},
                                       std::sqrt(2.0 / static_cast<double>(dims.mcb_mid)), next());
        m.pw_b = Tensor({dims.c3});
        m.pool_grid = dims.pool_grid;
    }
    p.mmf.e_base = detail::seeded_normal({dims.l3, dims.c_emb()}, 0.1, next());

    // Hidden layer random (breaks unit symmetry), output layer zero so the
    // anomaly logit starts exactly at the decision boundary.
    p.answer.w1 = detail::seeded_normal({2 * dims.c_emb(), dims.answer_hidden},
                                        std::sqrt(2.0 / static_cast<double>(2 * dims.c_emb())), next());
    p.answer.b1 = Tensor({dims.answer_hidden});
    p.answer.w2 = Tensor({dims.answer_hidden, std::size_t{10}});
    p.answer.b2 = Tensor({std::size_t{10}});
    next();
    return p;
}

/// Visits every parameter tensor in a fixed order with (name, group, tensor).
template <typename Params, typename Fn>
void visit_params(Params& p, Fn&& fn) {
    for (std::size_t l = 0; l < 4; ++l) {
        const std::string base = "decoder.l" + std::to_string(l + 1);
        fn(base + ".weight", Trainable::Decoder, p.decoder.weight[l]);
        fn(base + ".bias", Trainable::Decoder, p.decoder.bias[l]);
    }
    fn("tge.gate.value.weight", Trainable::Tge, p.tge.gate_value_w);
    fn("tge.gate.value.bias", Trainable::Tge, p.tge.gate_value_b);
    fn("tge.align.weight", Trainable::Tge, p.tge.align_w);
    fn("tge.align.bias", Trainable::Tge, p.tge.align_b);
    for (std::size_t e = 0; e < p.tge.experts.size(); ++e) {
        const std::string base = "tge.expert" + std::to_string(e);
        fn(base + ".value.weight", Trainable::Tge, p.tge.experts[e].value_w);
        fn(base + ".value.bias", Trainable::Tge, p.tge.experts[e].value_b);
        fn(base + ".ff1.weight", Trainable::Tge, p.tge.experts[e].ff1_w);
        fn(base + ".ff1.bias", Trainable::Tge, p.tge.experts[e].ff1_b);
        fn(base + ".ff2.weight", Trainable::Tge, p.tge.experts[e].ff2_w);
        fn(base + ".ff2.bias", Trainable::Tge, p.tge.experts[e].ff2_b);
    }
    for (std::size_t l = 0; l < 4; ++l) {
        const std::string base = "mmf.mcb" + std::to_string(l + 1);
        fn(base + ".conv1.kernel", Trainable::Mmf, p.mmf.mcbs[l].conv1_k);
        fn(base + ".conv1.bias", Trainable::Mmf, p.mmf.mcbs[l].conv1_b);
        fn(base + ".conv2.kernel", Trainable::Mmf, p.mmf.mcbs[l].conv2_k);
        fn(base + ".conv2.bias", Trainable::Mmf, p.mmf.mcbs[l].conv2_b);
        fn(base + ".dw.kernel", Trainable::Mmf, p.mmf.mcbs[l].dw_k);
        fn(base + ".dw.bias", Trainable::Mmf, p.mmf.mcbs[l].dw_b);
        fn(base + ".pw.kernel", Trainable::Mmf, p.mmf.mcbs[l].pw_k);
        fn(base + ".pw.bias", Trainable::Mmf, p.mmf.mcbs[l].pw_b);
    }
    fn("mmf.e_base", Trainable::Mmf, p.mmf.e_base);
    fn("answer.fc1.weight", Trainable::AnswerHead, p.answer.w1);
    fn("answer.fc1.bias", Trainable::AnswerHead, p.answer.b1);
    fn("answer.fc2.weight", Trainable::AnswerHead, p.answer.w2);
    fn("answer.fc2.bias", Trainable::AnswerHead, p.answer.b2);
}

inline ModelParams zero_like(const ModelParams& p) {
    ModelParams z = p;
    visit_params(z, [](const std::string&, Trainable, Tensor& t) { t = zeros_like(t); });
    return z;
}

// ---------------------------------------------------------------------------
// full pipeline forward / backward

/// One encoded training or evaluation sample.
struct EncodedSample {
    Tensor f_img;  // 1 x c1
    PatchFeatureStack stack;
    Tensor gt_mask;  // map_h x map_w, binary
    SampleLabel label = SampleLabel::Normal;
    int target_cell = -1;  // centroid grid cell for abnormal samples
};

/// Run-wide fixed inputs: the embedded prompt ensemble, the per-category
/// template means feeding the gate, and the fused-map geometry.
struct ModelInputs {
    PromptMatrix pm;
    Tensor f_win_cat;  // categories x c2
    std::size_t map_h = 64;
    std::size_t map_w = 64;
    FocalConfig focal;
};

struct PipelineForward {
    DecodeForward dec;
    AnomalyMapSet maps;
    TgeForward tge;
    std::array<McbForward, 4> mcb;
    Tensor e_fusion;   // l1 x c_emb
    Tensor e_expert;   // (l1 + l3) x c_emb
    Tensor pooled;     // 1 x c_emb
    Tensor head_in;    // 1 x 2*c_emb
    Tensor hidden_pre; // 1 x hidden
    Tensor hidden;     // 1 x hidden
    Tensor logits;     // 1 x 10: anomaly logit then 9 cell logits
    Tensor anom_probs; // 1 x 2: (normal, abnormal)
    Tensor cell_probs; // 1 x 9, abnormal samples only
    double lc = 0.0, lf = 0.0, ld = 0.0;
};

inline double anomaly_logit(const PipelineForward& fwd) { return fwd.logits.at(0, 0); }

inline int predicted_cell(const PipelineForward& fwd) {
    int best = 0;
    for (int j = 1; j < 9; ++j) {
        if (fwd.logits.at(0, static_cast<std::size_t>(j) + 1) >
            fwd.logits.at(0, static_cast<std::size_t>(best) + 1)) {
            best = j;
        }
    }
    return best;
}

inline PipelineForward pipeline_forward(const ModelParams& p, const ModelInputs& in,
                                        const EncodedSample& s) {
    PipelineForward fwd;
    fwd.dec = decode_forward(s.stack, in.pm, p.decoder);
    fwd.maps = fuse_level_maps(fwd.dec.level_maps, in.map_h, in.map_w);
    fwd.tge = tge_forward(s.f_img, in.f_win_cat, p.tge);

    std::array<Tensor, 4> tokens;
    for (std::size_t l = 0; l < 4; ++l) {
        fwd.mcb[l] = mcb_forward(fwd.dec.level_maps[l], p.mmf.mcbs[l]);
        tokens[l] = fwd.mcb[l].tokens;
    }
    fwd.e_fusion = fuse(tokens);
    fwd.e_expert = assemble(fwd.e_fusion, p.mmf.e_base);
    fwd.pooled = mean_rows(fwd.e_expert);

    const std::array<Tensor, 2> head_parts = {fwd.tge.e_img, fwd.pooled};
    fwd.head_in = concat_cols(std::span<const Tensor>(head_parts.data(), head_parts.size()));
    fwd.hidden_pre = linear(fwd.head_in, p.answer.w1, p.answer.b1);
    fwd.hidden = relu(fwd.hidden_pre);
    fwd.logits = linear(fwd.hidden, p.answer.w2, p.answer.b2);

    // answer loss: presence token plus (for abnormal samples) position token
    Tensor two({std::size_t{1}, std::size_t{2}});
    two.at(0, 1) = fwd.logits.at(0, 0);
    fwd.anom_probs = softmax_rows(two);
    Tensor anom_target({std::size_t{1}, std::size_t{2}});
    anom_target.at(0, s.label == SampleLabel::Abnormal ? 1 : 0) = 1.0;
    fwd.lc = cross_entropy(fwd.anom_probs, anom_target);

    if (s.label == SampleLabel::Abnormal) {
        if (s.target_cell < 0 || s.target_cell > 8) {
            throw ValueError("pipeline_forward: abnormal sample without a target cell");
        }
        Tensor cell_logits({std::size_t{1}, std::size_t{9}});
        for (std::size_t j = 0; j < 9; ++j) cell_logits.at(0, j) = fwd.logits.at(0, j + 1);
        fwd.cell_probs = softmax_rows(cell_logits);
        Tensor cell_target({std::size_t{1}, std::size_t{9}});
        cell_target.at(0, static_cast<std::size_t>(s.target_cell)) = 1.0;
        fwd.lc += cross_entropy(fwd.cell_probs, cell_target);
    }

    fwd.lf = focal_loss(fwd.maps.fused, s.gt_mask, in.focal);
    fwd.ld = dice_loss(fwd.maps.fused, s.gt_mask);
    return fwd;
}

/// Accumulates d(lambda_c*Lc + lambda_f*Lf + lambda_d*Ld)/d(params) into
/// `grads` for the parameter groups in `trainable`; all other groups stay
/// untouched (their bookkeeping gradient is exactly zero).
inline void pipeline_backward(const ModelParams& p, const ModelInputs& in, const EncodedSample& s,
                              const PipelineForward& fwd, double lambda_c, double lambda_f,
                              double lambda_d, const std::set<Trainable>& trainable,
                              ModelParams& grads) {
    const bool need_dec = trainable.count(Trainable::Decoder) > 0;
    const bool need_mmf = trainable.count(Trainable::Mmf) > 0;
    const bool need_tge = trainable.count(Trainable::Tge) > 0;
    const bool need_ans = trainable.count(Trainable::AnswerHead) > 0;

    std::array<Tensor, 4> d_level_maps;
    bool have_map_grads = false;
    auto ensure_map_grads = [&]() {
        if (!have_map_grads) {
            for (std::size_t l = 0; l < 4; ++l) d_level_maps[l] = zeros_like(fwd.dec.level_maps[l]);
            have_map_grads = true;
        }
    };

    if (lambda_c != 0.0 && (need_ans || need_tge || need_mmf || need_dec)) {
        Tensor d_logits({std::size_t{1}, std::size_t{10}});

        Tensor anom_target({std::size_t{1}, std::size_t{2}});
        anom_target.at(0, s.label == SampleLabel::Abnormal ? 1 : 0) = 1.0;
        const Tensor d_two =
            softmax_rows_vjp(fwd.anom_probs, cross_entropy_vjp(fwd.anom_probs, anom_target));
        d_logits.at(0, 0) = lambda_c * d_two.at(0, 1);  // slot 0 of `two` is the constant zero

        if (s.label == SampleLabel::Abnormal) {
            Tensor cell_target({std::size_t{1}, std::size_t{9}});
            cell_target.at(0, static_cast<std::size_t>(s.target_cell)) = 1.0;
            const Tensor d_cells =
                softmax_rows_vjp(fwd.cell_probs, cross_entropy_vjp(fwd.cell_probs, cell_target));
            for (std::size_t j = 0; j < 9; ++j) d_logits.at(0, j + 1) = lambda_c * d_cells.at(0, j);
        }

        LinearGrads g2 = linear_vjp(fwd.hidden, p.answer.w2, d_logits);
        if (need_ans) {
            axpy(grads.answer.w2, 1.0, g2.dw);
            axpy(grads.answer.b2, 1.0, g2.db);
        }
        const Tensor d_hidden_pre = relu_vjp(fwd.hidden_pre, g2.dx);
        LinearGrads g1 = linear_vjp(fwd.head_in, p.answer.w1, d_hidden_pre);
        if (need_ans) {
            axpy(grads.answer.w1, 1.0, g1.dw);
            axpy(grads.answer.b1, 1.0, g1.db);
        }

        const std::size_t c_emb = p.dims.c_emb();
        const std::vector<Tensor> head_split = split_cols(g1.dx, {c_emb, c_emb});
        if (need_tge) tge_backward(fwd.tge, in.f_win_cat, p.tge, head_split[0], grads.tge);

        if (need_mmf || need_dec) {
            const std::size_t rows = fwd.e_expert.extent(0);
            const Tensor d_e_expert = mean_rows_vjp(rows, head_split[1]);
            const std::size_t l1 = p.dims.l1();
            Tensor d_e_fusion({l1, c_emb});
            for (std::size_t i = 0; i < l1; ++i)
                for (std::size_t j = 0; j < c_emb; ++j) d_e_fusion.at(i, j) = d_e_expert.at(i, j);
            if (need_mmf) {
                for (std::size_t i = 0; i < p.dims.l3; ++i)
                    for (std::size_t j = 0; j < c_emb; ++j)
                        grads.mmf.e_base.at(i, j) += d_e_expert.at(l1 + i, j);
            }
            const std::vector<Tensor> token_grads =
                split_cols(d_e_fusion, {p.dims.c3, p.dims.c3, p.dims.c3, p.dims.c3});
            for (std::size_t l = 0; l < 4; ++l) {
                McbGrads mg = mcb_backward(fwd.mcb[l], p.mmf.mcbs[l], token_grads[l]);
                if (need_mmf) {
                    axpy(grads.mmf.mcbs[l].conv1_k, 1.0, mg.params.conv1_k);
                    axpy(grads.mmf.mcbs[l].conv1_b, 1.0, mg.params.conv1_b);
                    axpy(grads.mmf.mcbs[l].conv2_k, 1.0, mg.params.conv2_k);
                    axpy(grads.mmf.mcbs[l].conv2_b, 1.0, mg.params.conv2_b);
                    axpy(grads.mmf.mcbs[l].dw_k, 1.0, mg.params.dw_k);
                    axpy(grads.mmf.mcbs[l].dw_b, 1.0, mg.params.dw_b);
                    axpy(grads.mmf.mcbs[l].pw_k, 1.0, mg.params.pw_k);
                    axpy(grads.mmf.mcbs[l].pw_b, 1.0, mg.params.pw_b);
                }
                if (need_dec) {
                    // d_logits already carries lambda_c; the chain to the
                    // level maps is linear, so no further scaling here.
                    ensure_map_grads();
                    axpy(d_level_maps[l], 1.0, mg.d_input_map);
                }
            }
        }
    }

    if ((lambda_f != 0.0 || lambda_d != 0.0) && need_dec) {
        Tensor d_fused = zeros_like(fwd.maps.fused);
        if (lambda_f != 0.0) axpy(d_fused, lambda_f, focal_loss_vjp(fwd.maps.fused, s.gt_mask, in.focal));
        if (lambda_d != 0.0) axpy(d_fused, lambda_d, dice_loss_vjp(fwd.maps.fused, s.gt_mask));
        Tensor d_up = d_fused;
        for (std::size_t i = 0; i < d_up.size(); ++i) d_up[i] /= 4.0;
        ensure_map_grads();
        for (std::size_t l = 0; l < 4; ++l) {
            axpy(d_level_maps[l], 1.0,
                 bilinear_upsample_vjp(fwd.dec.level_maps[l].extent(0),
                                       fwd.dec.level_maps[l].extent(1), d_up));
        }
    }

    if (need_dec && have_map_grads) {
        DecoderGrads dg = decode_backward(fwd.dec, in.pm, d_level_maps);
        for (std::size_t l = 0; l < 4; ++l) {
            axpy(grads.decoder.weight[l], 1.0, dg.dweight[l]);
            axpy(grads.decoder.bias[l], 1.0, dg.dbias[l]);
        }
    }
}

// ---------------------------------------------------------------------------
// training driver

struct TrainLogRow {
    long step = 0;
    int stage = 0;
    double lr = 0.0;
    double lc = 0.0;
    double lf = 0.0;
    double ld = 0.0;
};

/// Plain gradient descent over the given stage plans (in order). Only each
/// stage's trainable set updates; everything else is bitwise invariant.
/// Deterministic for fixed (init, data, plans, seed) regardless of the
/// thread cap: per-sample gradients go to dedicated slots and reduce in
/// sample order.
inline ModelParams train(ModelParams params, const ModelInputs& in,
                         const std::vector<EncodedSample>& data,
                         const std::vector<StagePlan>& plans, std::uint64_t seed,
                         std::vector<TrainLogRow>* log = nullptr,
                         const std::function<void(int, const ModelParams&)>& on_stage_end = nullptr) {
    if (data.empty()) throw ValueError("train: empty dataset");
    long global_step = 0;
    for (const StagePlan& plan : plans) {
        plan.validate();
        const std::size_t n = data.size();
        const long steps_per_epoch =
            static_cast<long>((n + plan.batch_size - 1) / plan.batch_size);
        const long total_steps = steps_per_epoch * plan.epochs;
        const long warmup =
            std::min(total_steps > 0 ? total_steps - 1 : 0,
                     static_cast<long>(plan.warmup_frac * static_cast<double>(total_steps)));
        long stage_step = 0;

        for (int epoch = 0; epoch < plan.epochs; ++epoch) {
            std::vector<std::size_t> order(n);
            for (std::size_t i = 0; i < n; ++i) order[i] = i;
            Rng shuffle_rng(mix_seed(seed, 0x100000ULL * static_cast<std::uint64_t>(plan.stage) +
                                               static_cast<std::uint64_t>(epoch)));
            shuffle_rng.shuffle(order);

            for (std::size_t start = 0; start < n; start += plan.batch_size) {
                const std::size_t count = std::min(plan.batch_size, n - start);
                const double lr = lr_at(stage_step, total_steps, warmup, plan.base_lr);

                std::vector<ModelParams> slot_grads(count, zero_like(params));
                std::vector<std::array<double, 3>> slot_losses(count);
                parallel_for(count, [&](std::size_t k) {
                    const EncodedSample& sample = data[order[start + k]];
                    PipelineForward fwd = pipeline_forward(params, in, sample);
                    slot_losses[k] = {fwd.lc, fwd.lf, fwd.ld};
                    pipeline_backward(params, in, sample, fwd, plan.lambda_c, plan.lambda_f,
                                      plan.lambda_d, plan.trainable, slot_grads[k]);
                });

                // ordered reduction over sample slots
                ModelParams batch_grads = zero_like(params);
                std::vector<Tensor*> dst;
                visit_params(batch_grads,
                             [&dst](const std::string&, Trainable, Tensor& t) { dst.push_back(&t); });
                double lc = 0.0, lf = 0.0, ld = 0.0;
                for (std::size_t k = 0; k < count; ++k) {
                    std::vector<Tensor*> src;
                    visit_params(slot_grads[k],
                                 [&src](const std::string&, Trainable, Tensor& t) { src.push_back(&t); });
                    for (std::size_t t = 0; t < dst.size(); ++t) axpy(*dst[t], 1.0, *src[t]);
                    lc += slot_losses[k][0];
                    lf += slot_losses[k][1];
                    ld += slot_losses[k][2];
                }
                const double inv = 1.0 / static_cast<double>(count);
                for (Tensor* t : dst)
                    for (std::size_t i = 0; i < t->size(); ++i) (*t)[i] *= inv;
                lc *= inv;
                lf *= inv;
                ld *= inv;

                const double loss = total_loss(lc, lf, ld, plan);
                if (!std::isfinite(loss)) {
                    throw DivergenceError("train: non-finite loss at step " +
                                              std::to_string(global_step),
                                          global_step);
                }

                std::vector<Tensor*> params_list;
                std::vector<Trainable> groups;
                visit_params(params, [&](const std::string&, Trainable g, Tensor& t) {
                    params_list.push_back(&t);
                    groups.push_back(g);
                });
                for (std::size_t t = 0; t < params_list.size(); ++t) {
                    if (plan.trainable.count(groups[t])) axpy(*params_list[t], -lr, *dst[t]);
                }

                if (log) log->push_back({global_step, plan.stage, lr, lc, lf, ld});
                ++stage_step;
                ++global_step;
            }
        }
        if (on_stage_end) on_stage_end(plan.stage, params);
    }
    return params;
}

// ---------------------------------------------------------------------------
// checkpoints

struct CheckpointMeta {
    int version = 1;
    std::uint64_t seed = 0;
    int stage = 0;
};

/// Writes prefix.json (manifest) and prefix.bin (tensors concatenated in
/// manifest order, raw little-endian f64). Round-trips bit-identically.
inline void save_checkpoint(const ModelParams& params, const CheckpointMeta& meta,
                            const std::filesystem::path& prefix) {
    nlohmann::ordered_json manifest;
    manifest["version"] = meta.version;
    manifest["seed"] = meta.seed;
    manifest["stage"] = meta.stage;
    manifest["tensors"] = nlohmann::ordered_json::array();
    std::vector<const Tensor*> tensors;
    visit_params(const_cast<ModelParams&>(params),
                 [&](const std::string& name, Trainable, Tensor& t) {
                     manifest["tensors"].push_back({{"name", name}, {"shape", t.shape()}});
                     tensors.push_back(&t);
                 });
    write_text_file(prefix.string() + ".json", manifest.dump(2) + "\n");
    write_f64_blob(tensors, prefix.string() + ".bin");
}

/// Loads into a params struct of the expected architecture; name or shape
/// disagreement is an incompatibility error.
inline CheckpointMeta load_checkpoint(const std::filesystem::path& prefix, ModelParams& params) {
    nlohmann::json manifest;
    const std::string mpath = prefix.string() + ".json";
    try {
        manifest = nlohmann::json::parse(read_text_file(mpath));
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("checkpoint: " + mpath + " is not valid JSON: " + e.what());
    }
    CheckpointMeta meta;
    meta.version = manifest.value("version", 0);
    if (meta.version != 1) {
        throw SchemaError("checkpoint: unsupported version " + std::to_string(meta.version) +
                          " in " + mpath);
    }
    meta.seed = manifest.at("seed").get<std::uint64_t>();
    meta.stage = manifest.at("stage").get<int>();

    std::vector<std::pair<std::string, Tensor*>> expected;
    visit_params(params, [&](const std::string& name, Trainable, Tensor& t) {
        expected.emplace_back(name, &t);
    });
    const auto& jt = manifest.at("tensors");
    if (!jt.is_array() || jt.size() != expected.size()) {
        throw SchemaError("checkpoint: expects " + std::to_string(expected.size()) +
                          " tensors, manifest has " + std::to_string(jt.size()));
    }
    std::vector<Tensor*> order;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const std::string name = jt[i].at("name").get<std::string>();
        const std::vector<std::size_t> shape = jt[i].at("shape").get<std::vector<std::size_t>>();
        if (name != expected[i].first || shape != expected[i].second->shape()) {
            throw SchemaError("checkpoint: tensor " + std::to_string(i) + " is '" + name +
                              "', expected '" + expected[i].first + "' of shape " +
                              Tensor::shape_str(expected[i].second->shape()));
        }
        order.push_back(expected[i].second);
    }
    read_f64_blob(prefix.string() + ".bin", order);
    return meta;
}

}  // namespace aforge

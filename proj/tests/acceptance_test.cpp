// Acceptance suite: every criterion pinned in code, one pass/fail line per
// criterion on stdout. Criteria 5-7 share one pipeline run under seed 7.

#include <gtest/gtest.h>

#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "aforge/adjoint.hpp"
#include "aforge/dataset.hpp"
#include "aforge/pipeline.hpp"
#include "test_util.hpp"

using namespace aforge;
namespace fs = std::filesystem;

namespace {

const fs::path kDataDir = AFORGE_DATA_DIR;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("[CRITERION %d] %s  %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

RunConfig acceptance_cfg() {
    RunConfig cfg;
    cfg.seed = 7;
    cfg.prompts_path = (kDataDir / "prompts" / "toy_textures.json").string();
    // defaults already encode the desk-scale protocol:
    // 500 samples, 100 held out, 20 epochs/stage, batch 16, lr 5e-4
    return cfg;
}

struct PipelineArtifacts {
    fs::path root;
    ForgeOutcome forged;
    TrainOutcome trained;
    MetricsReport decoder_report;
    std::array<double, 3> fewshot_mean_i{};  // k = 1, 2, 4
    double fewshot_min_p = 1.0;
};

std::optional<PipelineArtifacts> g_run;  // built by criterion 5, reused by 6 and 7

PipelineArtifacts run_pipeline(const fs::path& root) {
    PipelineArtifacts art;
    art.root = root;
    RunConfig cfg = acceptance_cfg();
    art.forged = run_forge(cfg, root / "data");
    art.trained = run_train(cfg, art.forged.manifest, root / "run");
    EvalOptions opts;
    opts.heatmaps = true;
    art.decoder_report =
        run_eval(cfg, art.trained.checkpoints[2], *art.forged.test_manifest, root / "eval", opts);
    return art;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// O(n^2) pairwise AUROC oracle.
double auroc_oracle(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0.0, ties = 0.0;
    std::size_t p = 0, n = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (y[i]) {
            ++p;
            for (std::size_t j = 0; j < s.size(); ++j) {
                if (y[j]) continue;
                if (s[i] > s[j]) wins += 1.0;
                else if (s[i] == s[j]) ties += 1.0;
            }
        } else {
            ++n;
        }
    }
    return (wins + 0.5 * ties) / (static_cast<double>(p) * static_cast<double>(n));
}

bool same_bytes(const fs::path& a, const fs::path& b) {
    return read_file_bytes(a) == read_file_bytes(b);
}

}  // namespace

TEST(Acceptance, C1GradientSuite) {
    const auto t0 = std::chrono::steady_clock::now();
    double worst_op = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        Rng rng(31000 + s);
        {
            const std::size_t m = 1 + rng.uniform_int(4), k = 1 + rng.uniform_int(4),
                              n = 1 + rng.uniform_int(4);
            worst_op = std::max(worst_op, vjp_check(record_matmul(testutil::random_tensor({m, k}, 2 * s),
                                                                  testutil::random_tensor({k, n}, 2 * s + 1)),
                                                    s));
        }
        worst_op = std::max(
            worst_op,
            vjp_check(record_softmax_rows(testutil::random_tensor({2, 5}, 400 + s, -3.0, 3.0)), s));
        {
            const std::size_t cin = 1 + rng.uniform_int(2), cout = 1 + rng.uniform_int(2);
            worst_op = std::max(
                worst_op, vjp_check(record_conv2d(testutil::random_tensor({4, 4, cin}, 500 + s),
                                                  testutil::random_tensor({3, 3, cin, cout}, 600 + s),
                                                  1 + rng.uniform_int(2), 1),
                                    s));
        }
        worst_op = std::max(
            worst_op, vjp_check(record_depthwise_conv2d(testutil::random_tensor({4, 4, 2}, 700 + s),
                                                        testutil::random_tensor({3, 3, 2}, 800 + s), 1, 1),
                                s));
        worst_op = std::max(
            worst_op,
            vjp_check(record_bilinear_upsample(testutil::random_tensor({3, 4}, 900 + s), 7, 9), s));
        worst_op = std::max(
            worst_op, vjp_check(record_adaptive_avg_pool(testutil::random_tensor({5, 5, 2}, 1000 + s), 2), s));
        {
            Tensor x = testutil::random_tensor({2, 6}, 1100 + s);
            Tensor w = testutil::random_tensor({6, 3}, 1200 + s);
            Tensor b = testutil::random_tensor({3}, 1300 + s);
            worst_op = std::max(worst_op, vjp_check(record_linear(x, w, b), s));
        }
    }

    // losses end-to-end through decoder linears, TGE, MMF and the answer head
    ModelDims dims;
    dims.c1 = 6;
    dims.c2 = 5;
    dims.c3 = 4;
    dims.mcb_mid = 3;
    dims.l3 = 2;
    dims.answer_hidden = 8;
    ModelInputs in;
    in.map_h = 8;
    in.map_w = 8;
    {
        Rng rng(11);
        in.pm.embeddings = Tensor({4, 5});
        for (std::size_t i = 0; i < 4; ++i) {
            double norm = 0.0;
            for (std::size_t j = 0; j < 5; ++j) {
                in.pm.embeddings.at(i, j) = rng.normal();
                norm += in.pm.embeddings.at(i, j) * in.pm.embeddings.at(i, j);
            }
            norm = std::sqrt(norm);
            for (std::size_t j = 0; j < 5; ++j) in.pm.embeddings.at(i, j) /= norm;
            in.pm.prompts.push_back("p" + std::to_string(i));
        }
        in.pm.n_normal = 2;
        in.pm.n_abnormal = 2;
        in.pm.abnormal_mask = {false, false, true, true};
        in.f_win_cat = testutil::random_normal_tensor({2, 5}, 12);
    }
    const std::set<Trainable> all_groups = {Trainable::Tge, Trainable::Decoder, Trainable::Mmf,
                                            Trainable::AnswerHead};
    double worst_e2e = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        ModelParams params = init_model(dims, 40000 + s);
        // random nonzero decoder so gradients are probed off the zero init too
        for (std::size_t l = 0; l < 4; ++l) {
            params.decoder.weight[l] = testutil::random_normal_tensor({4, 5}, 41000 + 4 * s + l);
            params.decoder.bias[l] = testutil::random_normal_tensor({5}, 42000 + 4 * s + l);
        }
        EncodedSample sample;
        {
            Rng rng(43000 + s);
            sample.label = s % 2 ? SampleLabel::Normal : SampleLabel::Abnormal;
            sample.f_img = Tensor({1, 6});
            double norm = 0.0;
            for (std::size_t j = 0; j < 6; ++j) {
                sample.f_img[j] = rng.normal();
                norm += sample.f_img[j] * sample.f_img[j];
            }
            for (std::size_t j = 0; j < 6; ++j) sample.f_img[j] /= std::sqrt(norm);
            const std::array<std::array<std::size_t, 2>, 4> grids = {{{4, 4}, {2, 2}, {2, 2}, {1, 1}}};
            for (std::size_t l = 0; l < 4; ++l) {
                Tensor level({grids[l][0], grids[l][1], 4});
                for (std::size_t i = 0; i < level.size(); ++i) level[i] = rng.normal();
                sample.stack.levels[l] = std::move(level);
            }
            sample.gt_mask = Tensor({8, 8});
            if (sample.label == SampleLabel::Abnormal) {
                for (std::size_t y = 2; y < 5; ++y)
                    for (std::size_t x = 1; x < 4; ++x) sample.gt_mask.at(y, x) = 1.0;
                sample.target_cell = centroid_cell(sample.gt_mask);
            }
        }
        PipelineForward fwd = pipeline_forward(params, in, sample);
        ModelParams grads = zero_like(params);
        pipeline_backward(params, in, sample, fwd, 1.0, 1.0, 1.0, all_groups, grads);
        std::vector<Tensor*> pt, gt;
        visit_params(params, [&](const std::string&, Trainable, Tensor& t) { pt.push_back(&t); });
        visit_params(grads, [&](const std::string&, Trainable, Tensor& t) { gt.push_back(&t); });
        for (std::size_t t = 0; t < pt.size(); ++t) {
            Tensor& tt = *pt[t];
            for (std::size_t i = 0; i < tt.size(); ++i) {
                const double x = tt[i];
                const double h = 1e-6 * std::max(1.0, std::abs(x));
                tt[i] = x + h;
                PipelineForward fp = pipeline_forward(params, in, sample);
                tt[i] = x - h;
                PipelineForward fm = pipeline_forward(params, in, sample);
                tt[i] = x;
                const double fd =
                    ((fp.lc + fp.lf + fp.ld) - (fm.lc + fm.lf + fm.ld)) / (2.0 * h);
                const double an = (*gt[t])[i];
                worst_e2e =
                    std::max(worst_e2e, std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)}));
            }
        }
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = worst_op <= 1e-4 && worst_e2e <= 1e-4 && secs <= 120.0;
    report(1, pass,
           "op max rel err " + fmt(worst_op) + ", end-to-end max rel err " + fmt(worst_e2e) +
               ", " + fmt(secs) + " s");
    EXPECT_LE(worst_op, 1e-4);
    EXPECT_LE(worst_e2e, 1e-4);
    EXPECT_LE(secs, 120.0);
}

TEST(Acceptance, C2AurocOracleEquivalence) {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        Rng rng(5000 + s);
        const std::size_t n = 2 + rng.uniform_int(99);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        const std::size_t quant = 1 + rng.uniform_int(6);  // small alphabets force tie storms
        bool h0 = false, h1 = false;
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = static_cast<double>(rng.uniform_int(quant)) / static_cast<double>(quant);
            labels[i] = static_cast<int>(rng.uniform_int(2));
            (labels[i] ? h1 : h0) = true;
        }
        if (!h0) labels[0] = 0;
        if (!h1) labels[n - 1] = 1;
        worst = std::max(worst, std::abs(auroc(scores, labels) - auroc_oracle(scores, labels)));

        // monotone-transform invariance on strictly positive scores
        std::vector<double> affine(n), cubed(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = scores[i] + 0.25;
            affine[i] = 2.0 * v + 1.0;
            cubed[i] = v * v * v;
        }
        const double base = auroc(scores, labels);
        worst = std::max(worst, std::abs(auroc(affine, labels) - base));
        worst = std::max(worst, std::abs(auroc(cubed, labels) - base));
    }
    report(2, worst <= 1e-12, "max |fast - oracle| = " + fmt(worst));
    EXPECT_LE(worst, 1e-12);
}

TEST(Acceptance, C3PoissonCloning) {
    double worst_residual = 0.0, worst_identity = 0.0;
    bool exterior_ok = true;
    for (std::uint64_t s = 0; s < 50; ++s) {
        Tensor dst = testutil::random_tensor({64, 64}, 6000 + s, 0.0, 1.0);
        Tensor patch = testutil::random_tensor({16, 16}, 7000 + s, 0.0, 1.0);
        Tensor region({16, 16});
        for (std::size_t y = 1; y < 15; ++y)
            for (std::size_t x = 1; x < 15; ++x) region.at(y, x) = 1.0;
        Rng rng(8000 + s);
        const std::size_t cr = 8 + rng.uniform_int(48), cc = 8 + rng.uniform_int(48);
        PoissonCloneResult res = poisson_normal_clone(patch, dst, region, cr, cc);

        const std::size_t top = cr - 8, left = cc - 8;
        for (std::size_t y = 0; y < 16; ++y)
            for (std::size_t x = 0; x < 16; ++x) {
                if (region.at(y, x) > 0.5) {
                    const double lap_f = res.solution.at(top + y - 1, left + x) +
                                         res.solution.at(top + y + 1, left + x) +
                                         res.solution.at(top + y, left + x - 1) +
                                         res.solution.at(top + y, left + x + 1) -
                                         4.0 * res.solution.at(top + y, left + x);
                    const double lap_g = patch.at(y - 1, x) + patch.at(y + 1, x) + patch.at(y, x - 1) +
                                         patch.at(y, x + 1) - 4.0 * patch.at(y, x);
                    worst_residual = std::max(worst_residual, std::abs(lap_f - lap_g));
                }
            }
        for (std::size_t y = 0; y < 64; ++y)
            for (std::size_t x = 0; x < 64; ++x) {
                const bool inside = y >= top && y < top + 16 && x >= left && x < left + 16 &&
                                    region.at(y - top, x - left) > 0.5;
                if (!inside && res.image.at(y, x) != dst.at(y, x)) exterior_ok = false;
            }

        // identity clone: patch cut from the destination itself
        Tensor self_patch({16, 16});
        for (std::size_t y = 0; y < 16; ++y)
            for (std::size_t x = 0; x < 16; ++x) self_patch.at(y, x) = dst.at(top + y, left + x);
        PoissonCloneResult id = poisson_normal_clone(self_patch, dst, region, cr, cc);
        for (std::size_t i = 0; i < id.image.size(); ++i) {
            worst_identity = std::max(worst_identity, std::abs(id.image[i] - dst[i]));
        }
    }
    const bool pass = worst_residual <= 1e-6 && exterior_ok && worst_identity <= 1e-9;
    report(3, pass,
           "residual inf-norm " + fmt(worst_residual) + ", identity err " +
               fmt(worst_identity) + ", exterior bitwise " +
               (exterior_ok ? "yes" : "NO"));
    EXPECT_LE(worst_residual, 1e-6);
    EXPECT_TRUE(exterior_ok);
    EXPECT_LE(worst_identity, 1e-9);
}

TEST(Acceptance, C4StructuralInvariants) {
    bool pass = true;
    std::string note;
    RunConfig cfg = acceptance_cfg();
    const ToyTextEncoder text_enc(cfg.encoder_config());
    const ToyImageEncoder image_enc(cfg.encoder_config());
    ModelInputs in = build_model_inputs(cfg, text_enc);
    ModelParams params = init_model(cfg.model_dims(), 3);
    for (std::size_t l = 0; l < 4; ++l) {
        params.decoder.weight[l] = testutil::random_normal_tensor({cfg.c3, cfg.c2}, 900 + l);
    }

    // c_emb forced by channel concatenation
    if (cfg.model_dims().c_emb() != 4 * cfg.c3) {
        pass = false;
        note += "c_emb != 4*c3; ";
    }

    Rng rng(1);
    for (int rep = 0; rep < 10 && pass; ++rep) {
        Tensor img = generate_texture(cfg.texture, 64, 64, rng);
        auto [f_img, stack] = image_enc.encode(img);

        // gate simplex
        GateWeights w = gate(f_img, in.f_win_cat, params.tge);
        double sum = 0.0;
        for (std::size_t i = 0; i < w.w.size(); ++i) {
            if (w.w[i] < 0.0) pass = false;
            sum += w.w[i];
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            pass = false;
            note += "gate simplex; ";
        }

        // softmax row normalization on random logits
        Tensor logits = testutil::random_tensor({5, 9}, 2000 + rep, -20.0, 20.0);
        Tensor probs = softmax_rows(logits);
        for (std::size_t i = 0; i < 5; ++i) {
            double rs = 0.0;
            for (std::size_t j = 0; j < 9; ++j) rs += probs.at(i, j);
            if (std::abs(rs - 1.0) > 1e-12) {
                pass = false;
                note += "softmax rows; ";
            }
        }

        // decoder scores strictly inside (0,1); fused = mean of upsampled
        AnomalyMapSet maps = decode_map(stack, in.pm, params.decoder, 64, 64);
        for (const Tensor& level : maps.levels)
            for (std::size_t i = 0; i < level.size(); ++i) {
                if (!(level[i] > 0.0 && level[i] < 1.0)) {
                    pass = false;
                    note += "decode range; ";
                    break;
                }
            }
        for (std::size_t i = 0; i < maps.fused.size(); ++i) {
            double m = 0.0;
            for (std::size_t l = 0; l < 4; ++l) m += maps.upsampled[l][i];
            if (std::abs(maps.fused[i] - m / 4.0) > 1e-12) {
                pass = false;
                note += "fusion mean; ";
                break;
            }
        }

        // few-shot scores within [0,1]
        MemoryBank bank;
        for (std::size_t l = 0; l < 4; ++l) {
            bank.levels[l] = Tensor({3, cfg.c3});
            for (std::size_t i = 0; i < bank.levels[l].size(); ++i) bank.levels[l][i] = rng.normal();
        }
        AnomalyMapSet fs_maps = fewshot_map(stack, bank, 64, 64);
        for (const Tensor& level : fs_maps.levels)
            for (std::size_t i = 0; i < level.size(); ++i) {
                if (!(level[i] >= 0.0 && level[i] <= 1.0)) {
                    pass = false;
                    note += "fewshot range; ";
                    break;
                }
            }

        // permuting prompts within the abnormal block leaves output unchanged
        PromptMatrix permuted = in.pm;
        const std::size_t a = in.pm.n_normal, b = in.pm.rows() - 1;  // both abnormal columns
        for (std::size_t j = 0; j < permuted.embeddings.extent(1); ++j) {
            std::swap(permuted.embeddings.at(a, j), permuted.embeddings.at(b, j));
        }
        std::swap(permuted.prompts[a], permuted.prompts[b]);
        AnomalyMapSet swapped = decode_map(stack, permuted, params.decoder, 64, 64);
        for (std::size_t i = 0; i < maps.fused.size(); ++i) {
            if (std::abs(maps.fused[i] - swapped.fused[i]) > 1e-12) {
                pass = false;
                note += "prompt permutation; ";
                break;
            }
        }
    }
    report(4, pass, pass ? "all structural invariants hold" : note);
    EXPECT_TRUE(pass) << note;
}

TEST(Acceptance, C5DeskScaleEndToEnd) {
    const auto t0 = std::chrono::steady_clock::now();
    g_run = run_pipeline(testutil::scratch_dir("acceptance_run"));
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const MetricsReport& r = g_run->decoder_report;
    const bool pass = r.i_auroc >= 0.85 && r.p_auroc >= 0.80 && r.accuracy >= 0.80 && secs <= 600.0;
    report(5, pass,
           "I-AUROC " + fmt(r.i_auroc) + " (>= 0.85), P-AUROC " + fmt(r.p_auroc) +
               " (>= 0.80), accuracy " + fmt(r.accuracy) + " (>= 0.80), " + fmt(secs) + " s");
    EXPECT_GE(r.i_auroc, 0.85);
    EXPECT_GE(r.p_auroc, 0.80);
    EXPECT_GE(r.accuracy, 0.80);
    EXPECT_LE(secs, 600.0);
}

TEST(Acceptance, C6DeskScaleFewShot) {
    ASSERT_TRUE(g_run.has_value()) << "criterion 5 must run first";
    RunConfig cfg = acceptance_cfg();
    const std::array<std::size_t, 3> shot_counts = {1, 2, 4};
    std::array<double, 3> mean_i{};
    double min_p = 1.0;
    for (std::size_t ki = 0; ki < 3; ++ki) {
        std::vector<double> i_vals;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            RunConfig bank_cfg = cfg;
            bank_cfg.seed = seed;
            const fs::path prefix =
                g_run->root / ("bank_k" + std::to_string(shot_counts[ki]) + "_s" + std::to_string(seed));
            run_bank(bank_cfg, shot_counts[ki], g_run->forged.manifest, prefix);
            EvalOptions opts;
            opts.bank_prefix = prefix;
            const MetricsReport r =
                run_eval(cfg, g_run->trained.checkpoints[2], *g_run->forged.test_manifest,
                         g_run->root / ("fs_eval_k" + std::to_string(shot_counts[ki]) + "_s" +
                                        std::to_string(seed)),
                         opts);
            i_vals.push_back(r.i_auroc);
            min_p = std::min(min_p, r.p_auroc);
        }
        mean_i[ki] = mean(i_vals);
    }
    g_run->fewshot_mean_i = mean_i;
    g_run->fewshot_min_p = min_p;
    const bool pass = min_p >= 0.70 && mean_i[2] >= mean_i[0];
    report(6, pass,
           "min P-AUROC " + fmt(min_p) + " (>= 0.70), mean I-AUROC k=1 " + fmt(mean_i[0]) +
               " vs k=4 " + fmt(mean_i[2]) + " (k=4 >= k=1)");
    EXPECT_GE(min_p, 0.70);
    EXPECT_GE(mean_i[2], mean_i[0]);
}

TEST(Acceptance, C7Determinism) {
    ASSERT_TRUE(g_run.has_value()) << "criterion 5 must run first";
    PipelineArtifacts second = run_pipeline(testutil::scratch_dir("acceptance_rerun"));

    bool pass = true;
    std::string note;
    for (int stage = 1; stage <= 3; ++stage) {
        const std::string name = "stage" + std::to_string(stage);
        for (const char* ext : {".json", ".bin"}) {
            if (!same_bytes(g_run->root / "run" / (name + ext), second.root / "run" / (name + ext))) {
                pass = false;
                note += name + ext + " differs; ";
            }
        }
    }
    for (const char* f : {"report.csv", "report.json"}) {
        if (!same_bytes(g_run->root / "eval" / f, second.root / "eval" / f)) {
            pass = false;
            note += std::string(f) + " differs; ";
        }
    }
    std::size_t heatmaps = 0;
    for (const auto& entry : fs::directory_iterator(g_run->root / "eval" / "heatmaps")) {
        if (!same_bytes(entry.path(), second.root / "eval" / "heatmaps" / entry.path().filename())) {
            pass = false;
            note += "heatmap " + entry.path().filename().string() + " differs; ";
            break;
        }
        ++heatmaps;
    }
    // one representative few-shot bank rerun
    RunConfig bank_cfg = acceptance_cfg();
    bank_cfg.seed = 1;
    run_bank(bank_cfg, 2, second.forged.manifest, second.root / "bank_k2_s1");
    for (const char* ext : {".json", ".l1.bin", ".l2.bin", ".l3.bin", ".l4.bin"}) {
        if (!same_bytes(g_run->root / ("bank_k2_s1" + std::string(ext)),
                        second.root / ("bank_k2_s1" + std::string(ext)))) {
            pass = false;
            note += "bank" + std::string(ext) + " differs; ";
        }
    }
    report(7, pass,
           pass ? "checkpoints, reports, " + std::to_string(heatmaps) +
                      " heatmaps and bank files byte-identical"
                : note);
    EXPECT_TRUE(pass) << note;
}

TEST(Acceptance, C8PositionGridAndAnswers) {
    bool pass = true;
    std::string note;
    auto blob = [](std::size_t h, std::size_t w, std::size_t y0, std::size_t y1, std::size_t x0,
                   std::size_t x1) {
        Tensor m({h, w});
        for (std::size_t y = y0; y < y1; ++y)
            for (std::size_t x = x0; x < x1; ++x) m.at(y, x) = 1.0;
        return m;
    };
    struct Case {
        Tensor mask;
        std::set<int> expect;
    };
    std::vector<Case> cases;
    // corner blobs (within single cells of a 90x90 grid: bands at 30, 60)
    cases.push_back({blob(90, 90, 2, 12, 3, 13), {0}});
    cases.push_back({blob(90, 90, 4, 14, 70, 82), {2}});
    cases.push_back({blob(90, 90, 75, 85, 2, 12), {6}});
    cases.push_back({blob(90, 90, 78, 88, 77, 87), {8}});
    cases.push_back({blob(90, 90, 40, 50, 40, 50), {4}});
    cases.push_back({blob(90, 90, 2, 12, 40, 50), {1}});
    cases.push_back({blob(90, 90, 40, 50, 2, 12), {3}});
    cases.push_back({blob(90, 90, 40, 50, 80, 88), {5}});
    cases.push_back({blob(90, 90, 80, 88, 40, 50), {7}});
    // full image: all nine cells
    cases.push_back({Tensor({90, 90}, 1.0), {0, 1, 2, 3, 4, 5, 6, 7, 8}});
    // two-cell straddles (half the area on each side of a band)
    cases.push_back({blob(90, 90, 25, 35, 5, 15), {0, 3}});
    cases.push_back({blob(90, 90, 5, 15, 25, 35), {0, 1}});
    cases.push_back({blob(90, 90, 55, 65, 40, 50), {4, 7}});
    cases.push_back({blob(90, 90, 40, 50, 55, 65), {4, 5}});
    cases.push_back({blob(90, 90, 25, 35, 25, 35), {0, 1, 3, 4}});
    // 224x224 grid: band boundary at floor(224/3) = 74
    cases.push_back({blob(224, 224, 20, 40, 20, 40), {0}});
    cases.push_back({blob(224, 224, 100, 124, 100, 124), {4}});
    cases.push_back({blob(224, 224, 60, 90, 100, 124), {1, 4}});
    // tiny central blob and a one-pixel strip across the top band
    cases.push_back({blob(90, 90, 44, 46, 44, 46), {4}});
    cases.push_back({blob(90, 90, 0, 1, 0, 90), {0, 1, 2}});
    if (cases.size() != 20) {
        pass = false;
        note += "expected 20 crafted masks; ";
    }
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const std::set<int> got = position_cells(cases[i].mask);
        if (got != cases[i].expect) {
            pass = false;
            note += "mask " + std::to_string(i) + " cells mismatch; ";
        }
    }

    if (render_answer(SampleLabel::Normal, {}, 3) != "No, there are no abnormalities in the image.") {
        pass = false;
        note += "normal sentence; ";
    }
    if (render_answer(SampleLabel::Abnormal, {0}, 0) != "Yes, the anomaly is visible at top left.") {
        pass = false;
        note += "template zero; ";
    }
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        const std::string a = render_answer(SampleLabel::Abnormal, {1, 4}, seed);
        if (a.rfind("Yes, ", 0) != 0 || a.find("top, center") == std::string::npos) {
            pass = false;
            note += "template family seed " + std::to_string(seed) + "; ";
        }
        if (a != render_answer(SampleLabel::Abnormal, {1, 4}, seed)) {
            pass = false;
            note += "template determinism; ";
        }
    }
    report(8, pass, pass ? "20 masks and answer templates as expected" : note);
    EXPECT_TRUE(pass) << note;
}

#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "aforge/errors.hpp"
#include "aforge/tensor.hpp"

// Loss functions, the staged total loss, and the learning-rate schedule.

namespace aforge {

namespace detail {
constexpr double kLogEps = 1e-12;   // clamp on log arguments
constexpr double kDiceEps = 1e-7;   // dice smoothing
}  // namespace detail

inline void require_one_hot(const Tensor& targets) {
    require_rank(targets, 2, "cross_entropy");
    for (std::size_t i = 0; i < targets.extent(0); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < targets.extent(1); ++j) {
            const double y = targets.at(i, j);
            if (y != 0.0 && y != 1.0) {
                throw ValueError("cross_entropy: target row " + std::to_string(i) + " is not one-hot");
            }
            sum += y;
        }
        if (sum != 1.0) {
            throw ValueError("cross_entropy: target row " + std::to_string(i) + " is not one-hot");
        }
    }
}

/// Mean over rows of -sum_j y_j log p_j, with p clamped to [1e-12, 1].
inline double cross_entropy(const Tensor& probs, const Tensor& targets) {
    if (!probs.same_shape(targets)) {
        throw ShapeError("cross_entropy: probs " + probs.shape_str() + " vs targets " +
                         targets.shape_str());
    }
    require_one_hot(targets);
    const std::size_t n = probs.extent(0);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < probs.extent(1); ++j) {
            if (targets.at(i, j) == 1.0) {
                loss -= std::log(std::clamp(probs.at(i, j), detail::kLogEps, 1.0));
            }
        }
    return loss / static_cast<double>(n);
}

/// d(cross_entropy)/d(probs); zero where the clamp is active.
inline Tensor cross_entropy_vjp(const Tensor& probs, const Tensor& targets) {
    Tensor g = zeros_like(probs);
    const double n = static_cast<double>(probs.extent(0));
    for (std::size_t i = 0; i < probs.extent(0); ++i)
        for (std::size_t j = 0; j < probs.extent(1); ++j) {
            if (targets.at(i, j) == 1.0 && probs.at(i, j) > detail::kLogEps) {
                g.at(i, j) = -1.0 / (probs.at(i, j) * n);
            }
        }
    return g;
}

struct FocalConfig {
    double alpha = 0.25;  // in (0, 1]
    double gamma = 2.0;   // >= 0
};

namespace detail {
inline void check_focal_inputs(const Tensor& pred, const Tensor& gt, const FocalConfig& cfg) {
    if (!pred.same_shape(gt)) {
        throw ShapeError("focal_loss: prediction " + pred.shape_str() + " vs mask " + gt.shape_str());
    }
    if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0) || cfg.gamma < 0.0) {
        throw ValueError("focal_loss: alpha must be in (0,1], gamma >= 0");
    }
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!(pred[i] >= 0.0 && pred[i] <= 1.0)) {
            throw ValueError("focal_loss: prediction " + std::to_string(pred[i]) + " outside [0,1]");
        }
    }
}
}  // namespace detail

/// L_f = -(1/n) sum alpha * (1 - p_t)^gamma * log(p_t),
/// p_t = pred where gt = 1 else 1 - pred, clamped below at 1e-12.
inline double focal_loss(const Tensor& pred, const Tensor& gt, const FocalConfig& cfg = {}) {
    detail::check_focal_inputs(pred, gt, cfg);
    double loss = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double pt = std::clamp(gt[i] > 0.5 ? pred[i] : 1.0 - pred[i], detail::kLogEps, 1.0);
        loss -= cfg.alpha * std::pow(1.0 - pt, cfg.gamma) * std::log(pt);
    }
    return loss / static_cast<double>(pred.size());
}

inline Tensor focal_loss_vjp(const Tensor& pred, const Tensor& gt, const FocalConfig& cfg = {}) {
    detail::check_focal_inputs(pred, gt, cfg);
    Tensor g = zeros_like(pred);
    const double n = static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double raw = gt[i] > 0.5 ? pred[i] : 1.0 - pred[i];
        if (raw <= detail::kLogEps || raw > 1.0) continue;  // clamped region
        const double pt = raw;
        // d/dpt of -alpha (1-pt)^g log pt
        double d = 0.0;
        if (cfg.gamma == 0.0) {
            d = -cfg.alpha / pt;
        } else {
            d = cfg.alpha * (cfg.gamma * std::pow(1.0 - pt, cfg.gamma - 1.0) * std::log(pt) -
                             std::pow(1.0 - pt, cfg.gamma) / pt);
        }
        g[i] = (gt[i] > 0.5 ? d : -d) / n;
    }
    return g;
}

/// Soft Dice: L_d = 1 - (2 sum p*g + eps) / (sum p^2 + sum g^2 + eps).
inline double dice_loss(const Tensor& pred, const Tensor& gt) {
    if (!pred.same_shape(gt)) {
        throw ShapeError("dice_loss: prediction " + pred.shape_str() + " vs mask " + gt.shape_str());
    }
    double inter = 0.0, pp = 0.0, gg = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        inter += pred[i] * gt[i];
        pp += pred[i] * pred[i];
        gg += gt[i] * gt[i];
    }
    return 1.0 - (2.0 * inter + detail::kDiceEps) / (pp + gg + detail::kDiceEps);
}

inline Tensor dice_loss_vjp(const Tensor& pred, const Tensor& gt) {
    double inter = 0.0, pp = 0.0, gg = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        inter += pred[i] * gt[i];
        pp += pred[i] * pred[i];
        gg += gt[i] * gt[i];
    }
    const double num = 2.0 * inter + detail::kDiceEps;
    const double den = pp + gg + detail::kDiceEps;
    Tensor g = zeros_like(pred);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        g[i] = -(2.0 * gt[i] * den - num * 2.0 * pred[i]) / (den * den);
    }
    return g;
}

// ---------------------------------------------------------------------------
// staged training plan

enum class Trainable { Tge, Decoder, Mmf, AnswerHead };

struct StagePlan {
    int stage = 1;
    std::set<Trainable> trainable;
    double lambda_c = 1.0;
    double lambda_f = 0.0;
    double lambda_d = 0.0;
    int epochs = 20;
    double base_lr = 5e-4;
    std::size_t batch_size = 16;
    double warmup_frac = 0.1;

    void validate() const {
        if (epochs < 0 || batch_size == 0) throw ValueError("stage plan: bad epochs or batch size");
        switch (stage) {
            case 1:
                if (trainable != std::set<Trainable>{Trainable::Tge, Trainable::AnswerHead} ||
                    lambda_c != 1.0 || lambda_f != 0.0 || lambda_d != 0.0) {
                    throw ValueError("stage plan 1: trainable set must be {TGE, AnswerHead}, lambdas (1,0,0)");
                }
                break;
            case 2:
                if (trainable != std::set<Trainable>{Trainable::Decoder, Trainable::Mmf,
                                                     Trainable::AnswerHead} ||
                    lambda_c != 1.0 || lambda_f != 1.0 || lambda_d != 1.0) {
                    throw ValueError(
                        "stage plan 2: trainable set must be {Decoder, MMF, AnswerHead}, lambdas (1,1,1)");
                }
                break;
            case 3:
                if (trainable != std::set<Trainable>{Trainable::Tge, Trainable::Mmf,
                                                     Trainable::AnswerHead} ||
                    lambda_c != 1.0 || lambda_f != 0.0 || lambda_d != 0.0) {
                    throw ValueError("stage plan 3: trainable set must be {TGE, MMF, AnswerHead}, lambdas (1,0,0)");
                }
                break;
            default:
                throw ValueError("stage plan: stage must be 1, 2 or 3");
        }
    }
};

inline StagePlan make_stage_plan(int stage, int epochs = 20, double base_lr = 5e-4,
                                 std::size_t batch_size = 16, double warmup_frac = 0.1) {
    StagePlan plan;
    plan.stage = stage;
    plan.epochs = epochs;
    plan.base_lr = base_lr;
    plan.batch_size = batch_size;
    plan.warmup_frac = warmup_frac;
    switch (stage) {
        case 1:
            plan.trainable = {Trainable::Tge, Trainable::AnswerHead};
            plan.lambda_c = 1.0;
            plan.lambda_f = 0.0;
            plan.lambda_d = 0.0;
            break;
        case 2:
            plan.trainable = {Trainable::Decoder, Trainable::Mmf, Trainable::AnswerHead};
            plan.lambda_c = 1.0;
            plan.lambda_f = 1.0;
            plan.lambda_d = 1.0;
            break;
        case 3:
            plan.trainable = {Trainable::Tge, Trainable::Mmf, Trainable::AnswerHead};
            plan.lambda_c = 1.0;
            plan.lambda_f = 0.0;
            plan.lambda_d = 0.0;
            break;
        default:
            throw ValueError("make_stage_plan: stage must be 1, 2 or 3");
    }
    plan.validate();
    return plan;
}

inline double total_loss(double lc, double lf, double ld, const StagePlan& plan) {
    return plan.lambda_c * lc + plan.lambda_f * lf + plan.lambda_d * ld;
}

/// Linear warm-up to base_lr over warmup_steps, then one-cycle cosine decay
/// to zero over the remaining steps.
inline double lr_at(long step, long total_steps, long warmup_steps, double base_lr) {
    if (step < 0 || step > total_steps || warmup_steps < 0 || warmup_steps >= total_steps) {
        throw ValueError("lr_at: need 0 <= step <= total_steps and warmup_steps < total_steps");
    }
    if (step < warmup_steps) {
        return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
    }
    const double progress = static_cast<double>(step - warmup_steps) /
                            static_cast<double>(total_steps - warmup_steps);
    return base_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

}  // namespace aforge

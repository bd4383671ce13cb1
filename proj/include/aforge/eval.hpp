#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "aforge/errors.hpp"
#include "aforge/io.hpp"
#include "aforge/tensor.hpp"

namespace aforge {

enum class SampleLabel { Normal, Abnormal };

inline const char* label_name(SampleLabel l) {
    return l == SampleLabel::Normal ? "normal" : "abnormal";
}

// ---------------------------------------------------------------------------
// 3x3 position grid

/// Cell ids run row-major: id = 3*row + col.
inline std::string grid_cell_label(int id) {
    if (id < 0 || id > 8) throw ValueError("grid cell id out of range: " + std::to_string(id));
    static const std::array<const char*, 9> labels = {
        "top left", "top", "top right", "left", "center", "right",
        "bottom left", "bottom", "bottom right"};
    return labels[static_cast<std::size_t>(id)];
}

namespace detail {
/// Band index of a coordinate under the boundaries floor(r*n/3).
inline int grid_band(double coord, std::size_t n) {
    const double b1 = std::floor(static_cast<double>(n) / 3.0);
    const double b2 = std::floor(2.0 * static_cast<double>(n) / 3.0);
    if (coord < b1) return 0;
    if (coord < b2) return 1;
    return 2;
}
}  // namespace detail

/// Every grid cell holding at least coverage_threshold of the mask area; if
/// none qualifies, the single cell containing the mask centroid.
/// Cell (r,c) spans rows [floor(r*H/3), floor((r+1)*H/3)) and likewise cols.
inline std::set<int> position_cells(const Tensor& gt_mask, double coverage_threshold = 0.10) {
    require_rank(gt_mask, 2, "position_cells");
    const std::size_t h = gt_mask.extent(0), w = gt_mask.extent(1);
    std::array<double, 9> cell_area{};
    double total = 0.0;
    double ci = 0.0, cj = 0.0;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            if (gt_mask.at(y, x) <= 0.5) continue;
            const int r = detail::grid_band(static_cast<double>(y), h);
            const int c = detail::grid_band(static_cast<double>(x), w);
            cell_area[static_cast<std::size_t>(3 * r + c)] += 1.0;
            total += 1.0;
            ci += static_cast<double>(y);
            cj += static_cast<double>(x);
        }
    if (total == 0.0) throw ValueError("position_cells: empty mask carries no position");

    std::set<int> cells;
    for (int id = 0; id < 9; ++id) {
        if (cell_area[static_cast<std::size_t>(id)] >= coverage_threshold * total) cells.insert(id);
    }
    if (cells.empty()) {
        const int r = detail::grid_band(ci / total, h);
        const int c = detail::grid_band(cj / total, w);
        cells.insert(3 * r + c);
    }
    return cells;
}

/// The single cell containing the mask centroid.
inline int centroid_cell(const Tensor& gt_mask) {
    require_rank(gt_mask, 2, "centroid_cell");
    double total = 0.0, ci = 0.0, cj = 0.0;
    for (std::size_t y = 0; y < gt_mask.extent(0); ++y)
        for (std::size_t x = 0; x < gt_mask.extent(1); ++x) {
            if (gt_mask.at(y, x) <= 0.5) continue;
            total += 1.0;
            ci += static_cast<double>(y);
            cj += static_cast<double>(x);
        }
    if (total == 0.0) throw ValueError("centroid_cell: empty mask");
    return 3 * detail::grid_band(ci / total, gt_mask.extent(0)) +
           detail::grid_band(cj / total, gt_mask.extent(1));
}

// ---------------------------------------------------------------------------
// answer templating

inline const std::vector<std::string>& answer_templates() {
    static const std::vector<std::string> templates = {
        "Yes, the anomaly is visible at {position}.",
        "Yes, there is an anomaly in the image; it's at the {position}.",
        "Yes, an anomaly appears at the {position} of the image.",
        "Yes, the image contains an anomaly located at the {position}.",
    };
    return templates;
}

inline const char* normal_answer() { return "No, there are no abnormalities in the image."; }

/// Normal samples get the fixed sentence. Abnormal samples fill the template
/// selected by template_seed (mod the bundled list) with the cell labels in
/// ascending id order, joined by ", ".
inline std::string render_answer(SampleLabel label, const std::set<int>& cells,
                                 std::uint64_t template_seed) {
    if (label == SampleLabel::Normal) return normal_answer();
    if (cells.empty()) throw ValueError("render_answer: abnormal sample with no cells");
    std::string position;
    for (int id : cells) {
        if (!position.empty()) position += ", ";
        position += grid_cell_label(id);
    }
    const auto& templates = answer_templates();
    const std::string& tmpl = templates[template_seed % templates.size()];
    const std::size_t at = tmpl.find("{position}");
    std::string out = tmpl;
    out.replace(at, std::string("{position}").size(), position);
    return out;
}

// ---------------------------------------------------------------------------
// AUROC

/// Mann-Whitney AUROC via rank sums with average ranks on ties:
/// (wins + 0.5*ties) / (positives * negatives).
inline double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        throw ValueError("auroc: " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(labels.size()) + " labels");
    }
    const std::size_t n = scores.size();
    std::size_t pos = 0;
    for (int l : labels) pos += (l != 0);
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) {
        throw MetricError("auroc: needs both classes (positives=" + std::to_string(pos) +
                          ", negatives=" + std::to_string(neg) + ")");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based average
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] != 0) rank_sum_pos += avg_rank;
        }
        i = j;
    }
    const double u = rank_sum_pos - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1);
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

/// AUROC over all pixels of all images flattened together. Masks are binary;
/// values > 0.5 count as anomalous.
inline double pixel_auroc(const std::vector<Tensor>& maps, const std::vector<Tensor>& gts) {
    if (maps.size() != gts.size()) {
        throw ValueError("pixel_auroc: " + std::to_string(maps.size()) + " maps vs " +
                         std::to_string(gts.size()) + " masks");
    }
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        if (!maps[i].same_shape(gts[i])) {
            throw ShapeError("pixel_auroc: map " + maps[i].shape_str() + " vs mask " +
                             gts[i].shape_str());
        }
        for (std::size_t p = 0; p < maps[i].size(); ++p) {
            scores.push_back(maps[i][p]);
            labels.push_back(gts[i][p] > 0.5 ? 1 : 0);
        }
    }
    return auroc(scores, labels);
}

inline double accuracy(const std::vector<SampleLabel>& predicted,
                       const std::vector<SampleLabel>& truth) {
    if (predicted.size() != truth.size()) {
        throw ValueError("accuracy: " + std::to_string(predicted.size()) + " predictions vs " +
                         std::to_string(truth.size()) + " labels");
    }
    if (predicted.empty()) throw ValueError("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) hits += (predicted[i] == truth[i]);
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

// ---------------------------------------------------------------------------
// heatmaps and reports

/// 8-bit P5 PGM, value = round(255*score) half away from zero.
inline void export_heatmap(const Tensor& map, const std::filesystem::path& path) {
    require_rank(map, 2, "export_heatmap");
    for (std::size_t i = 0; i < map.size(); ++i) {
        if (!(map[i] >= 0.0 && map[i] <= 1.0)) {
            throw ValueError("export_heatmap: value " + std::to_string(map[i]) + " outside [0,1]");
        }
    }
    write_pnm(map, path);
}

struct MetricsReport {
    std::string split = "test";
    std::size_t n_images = 0;
    std::size_t n_pixels = 0;
    double i_auroc = 0.0;
    double p_auroc = 0.0;
    double accuracy = 0.0;
    double position_accuracy = 0.0;  // informational; JSON twin only
};

namespace detail {
inline std::string format_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}
}  // namespace detail

inline std::string metrics_csv(const MetricsReport& r) {
    std::string out = "split,n_images,i_auroc,p_auroc,accuracy\n";
    out += r.split + "," + std::to_string(r.n_images) + "," + detail::format_metric(r.i_auroc) +
           "," + detail::format_metric(r.p_auroc) + "," + detail::format_metric(r.accuracy) + "\n";
    return out;
}

inline std::string metrics_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["split"] = r.split;
    j["n_images"] = r.n_images;
    j["n_pixels"] = r.n_pixels;
    j["i_auroc"] = r.i_auroc;
    j["p_auroc"] = r.p_auroc;
    j["accuracy"] = r.accuracy;
    j["position_accuracy"] = r.position_accuracy;
    return j.dump(2) + "\n";
}

inline void write_metrics_report(const MetricsReport& r, const std::filesystem::path& csv_path,
                                 const std::filesystem::path& json_path) {
    write_text_file(csv_path, metrics_csv(r));
    write_text_file(json_path, metrics_json(r));
}

}  // namespace aforge

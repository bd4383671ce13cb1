// Command-line entry point: dataset forging, staged training, evaluation,
// memory banks, single-image maps and prompt-bank validation.
//
// Global flags: --config PATH, --seed INT, --out DIR, --print-config.
// ANOMALY_FORGE_THREADS caps worker threads; outputs never depend on it.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "aforge/pipeline.hpp"

namespace {

void print_json_error(const std::string& message) {
    nlohmann::ordered_json j;
    j["error"] = message;
    std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"anomaly-forge: synthetic-anomaly forging, prompt-ensemble scoring and staged training"};
    app.require_subcommand(0, 1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed_flag;
    std::string out_dir = "out";
    bool print_config = false;
    app.add_option("--config", config_path, "JSON config file; flags override file values");
    app.add_option("--seed", seed_flag, "master seed (mandatory for forge/train/bank)");
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    app.add_flag("--print-config", print_config, "dump the effective merged config to stdout");

    // forge
    auto* forge = app.add_subcommand("forge", "emit a procedural-texture dataset with NSA anomalies");
    std::optional<std::size_t> forge_count;
    std::optional<std::size_t> forge_holdout;
    forge->add_option("-n,--count", forge_count, "total sample count");
    forge->add_option("--holdout", forge_holdout, "trailing samples listed in manifest_test.json");

    // train
    auto* train_cmd = app.add_subcommand("train", "run the three training stages");
    std::string train_data;
    int start_stage = 1;
    std::string resume_prefix;
    train_cmd->add_option("--data", train_data, "dataset manifest JSON")->required();
    train_cmd->add_option("--stage", start_stage, "first stage to run (resume)");
    train_cmd->add_option("--resume", resume_prefix, "checkpoint prefix of the previous stage");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "compute AUROC/accuracy reports");
    std::string eval_data, eval_ckpt, eval_bank, eval_split = "test";
    bool heatmaps = false, oracle_maps = false;
    eval_cmd->add_option("--data", eval_data, "dataset manifest JSON")->required();
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint prefix")->required();
    eval_cmd->add_option("--bank", eval_bank, "memory-bank prefix (few-shot map source)");
    eval_cmd->add_option("--split", eval_split, "split name in the report");
    eval_cmd->add_flag("--heatmaps", heatmaps, "export per-image fused heatmaps");
    eval_cmd->add_flag("--oracle-maps", oracle_maps, "use ground-truth masks as maps (self-test)");

    // bank
    auto* bank_cmd = app.add_subcommand("bank", "build a k-shot memory bank of normal patches");
    std::string bank_data, bank_dir, bank_out = "bank";
    std::size_t shots = 1;
    bank_cmd->add_option("--data", bank_data, "manifest JSON; normal samples feed the bank");
    bank_cmd->add_option("--normals-dir", bank_dir, "directory of normal images (PGM/PPM)");
    bank_cmd->add_option("-k,--shots", shots, "number of reference images")->capture_default_str();
    bank_cmd->add_option("--bank-out", bank_out, "output prefix")->capture_default_str();

    // map
    auto* map_cmd = app.add_subcommand("map", "score one image into a heatmap");
    std::string map_image, map_ckpt, map_bank, map_out = "map.pgm";
    map_cmd->add_option("--image", map_image, "input image (PGM/PPM)")->required();
    map_cmd->add_option("--checkpoint", map_ckpt, "checkpoint prefix (decoder path)");
    map_cmd->add_option("--bank", map_bank, "memory-bank prefix (few-shot path)");
    map_cmd->add_option("--map-out", map_out, "output PGM path")->capture_default_str();

    // prompts
    auto* prompts_cmd = app.add_subcommand("prompts", "validate a prompt-bank file");
    std::string prompts_file;
    prompts_cmd->add_option("--bank-file", prompts_file, "prompt-bank JSON")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        aforge::RunConfig cfg;
        if (!config_path.empty()) cfg = aforge::load_run_config(config_path);
        if (seed_flag) cfg.seed = *seed_flag;
        if (forge_count) cfg.forge_count = *forge_count;
        if (forge_holdout) cfg.holdout = *forge_holdout;

        if (print_config) std::cout << aforge::dump_run_config(cfg);

        if (forge->parsed()) {
            const aforge::ForgeOutcome res = aforge::run_forge(cfg, out_dir);
            std::cout << "forged " << res.n_total << " samples (" << res.n_abnormal
                      << " abnormal) -> " << res.manifest.string() << "\n";
            if (res.test_manifest) {
                std::cout << "holdout manifest -> " << res.test_manifest->string() << "\n";
            }
        } else if (train_cmd->parsed()) {
            std::optional<std::filesystem::path> resume;
            if (!resume_prefix.empty()) resume = resume_prefix;
            const aforge::TrainOutcome res =
                aforge::run_train(cfg, train_data, out_dir, start_stage, resume);
            for (int s = start_stage; s <= 3; ++s) {
                std::cout << "stage " << s << " checkpoint -> "
                          << res.checkpoints[static_cast<std::size_t>(s - 1)].string() << "\n";
            }
            std::cout << "training log -> " << res.log_csv.string() << "\n";
        } else if (eval_cmd->parsed()) {
            aforge::EvalOptions opts;
            if (!eval_bank.empty()) opts.bank_prefix = eval_bank;
            opts.heatmaps = heatmaps;
            opts.oracle_maps = oracle_maps;
            opts.split = eval_split;
            const aforge::MetricsReport report =
                aforge::run_eval(cfg, eval_ckpt, eval_data, out_dir, opts);
            std::cout << aforge::metrics_csv(report);
        } else if (bank_cmd->parsed()) {
            if (bank_data.empty() == bank_dir.empty()) {
                throw aforge::ValueError("bank: exactly one of --data and --normals-dir is required");
            }
            const std::filesystem::path source = bank_data.empty() ? bank_dir : bank_data;
            const auto prefix = aforge::run_bank(cfg, shots, source,
                                                 std::filesystem::path(out_dir) / bank_out);
            std::cout << "memory bank -> " << prefix.string() << ".json\n";
        } else if (map_cmd->parsed()) {
            std::optional<std::filesystem::path> ckpt, bank;
            if (!map_ckpt.empty()) ckpt = map_ckpt;
            if (!map_bank.empty()) bank = map_bank;
            aforge::run_map(cfg, map_image, ckpt, bank, map_out);
            std::cout << "heatmap -> " << map_out << "\n";
        } else if (prompts_cmd->parsed()) {
            std::cout << aforge::run_prompts(prompts_file);
        } else if (!print_config) {
            std::cout << app.help();
        }
    } catch (const std::exception& e) {
        print_json_error(e.what());
        return 1;
    }
    return 0;
}

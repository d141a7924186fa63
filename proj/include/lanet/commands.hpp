#pragma once

#include "lanet/checkpoint.hpp"
#include "lanet/config.hpp"
#include "lanet/metrics.hpp"
#include "lanet/train.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lanet {

/// Flags shared by every subcommand.
struct CommonOptions {
    std::filesystem::path config;
    std::optional<std::uint64_t> seed;
    std::filesystem::path out;
    std::vector<std::string> overrides;
};

/// Defaults, then --config, then --set, then --seed.
RunConfig resolve(const CommonOptions& opts);
/// Same layering on top of the configuration stored in a checkpoint.
RunConfig resolve(const CommonOptions& opts, const Checkpoint& ckpt);

/// All *.scene.json files of `dir` in name order, validated and prepared.
std::vector<PreparedScene> load_dataset(const std::filesystem::path& dir, const ModelConfig& cfg);

/// Forecasts and metric cases of one prepared scene.
std::vector<CaseMetrics> evaluate_scene(LanetModel& model, const PreparedScene& scene, const ForwardOptions& fwd = {});
MetricReport evaluate(LanetModel& model, const std::vector<PreparedScene>& data, const ForwardOptions& fwd = {});

std::vector<std::filesystem::path> cmd_synth(const CommonOptions& opts, int count);

struct TrainResult {
    std::vector<LossRecord> curve;
    MetricReport train_metrics;
};
TrainResult cmd_train(const CommonOptions& opts, const std::filesystem::path& data_dir);

MetricReport cmd_eval(const CommonOptions& opts, const std::filesystem::path& checkpoint,
                      const std::filesystem::path& data_dir);

std::vector<SceneForecast> cmd_predict(const CommonOptions& opts, const std::filesystem::path& checkpoint,
                                       const std::filesystem::path& data_dir);

struct PruneRow {
    std::string kind;  // "sweep", "reference" (theta = 0) or "trained"
    double theta = 0.0;
    long kept = 0;
    long candidates = 0;
    MetricReport metrics;

    double kept_fraction() const { return candidates ? static_cast<double>(kept) / candidates : 1.0; }
};
std::vector<PruneRow> cmd_prune_stats(const CommonOptions& opts, const std::filesystem::path& checkpoint,
                                      const std::filesystem::path& data_dir);
std::string format_prune_table(const std::vector<PruneRow>& rows);

/// Without a checkpoint the scene is drawn without predictions.
std::string cmd_plot(const CommonOptions& opts, const std::optional<std::filesystem::path>& checkpoint,
                     const std::filesystem::path& scene_file, const std::filesystem::path& out_svg);

}  // namespace lanet

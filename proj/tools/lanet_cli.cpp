#include "lanet/commands.hpp"
#include "lanet/log.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <iostream>

using namespace lanet;

namespace {

void add_common(CLI::App* cmd, CommonOptions& o, bool out_required) {
    cmd->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Run seed");
    auto* out = cmd->add_option("--out", o.out, "Output directory");
    if (out_required) out->required();
    cmd->add_option("--set", o.overrides, "Override a config key, e.g. --set model.width=16")->take_all();
}

}  // namespace

int main(int argc, char** argv) {
    init_logging();
    CLI::App app{"lanet: graph-attention trajectory forecasting with interaction pruning"};
    app.require_subcommand(1);

    CommonOptions o;
    int count = 10;
    std::string data_dir, checkpoint, scene_file, svg_file;

    auto* synth = app.add_subcommand("synth", "Generate synthetic scenes");
    add_common(synth, o, true);
    synth->add_option("--count", count, "Number of scenes")->check(CLI::PositiveNumber);

    auto* train = app.add_subcommand("train", "Train a model on a scene directory");
    add_common(train, o, true);
    train->add_option("--data", data_dir, "Scene directory")->required();

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    add_common(eval, o, false);
    eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    eval->add_option("--data", data_dir, "Scene directory")->required();

    auto* predict = app.add_subcommand("predict", "Write forecasts for a scene directory");
    add_common(predict, o, true);
    predict->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    predict->add_option("--data", data_dir, "Scene directory")->required();

    auto* prune = app.add_subcommand("prune-stats", "Kept-edge fraction and metrics across CAIP thresholds");
    add_common(prune, o, false);
    prune->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    prune->add_option("--data", data_dir, "Scene directory")->required();

    auto* plot = app.add_subcommand("plot", "Draw a scene and its forecasts as SVG");
    add_common(plot, o, false);
    plot->add_option("--checkpoint", checkpoint, "Checkpoint file (omit to draw the scene only)");
    plot->add_option("--scene", scene_file, "Scene file")->required()->check(CLI::ExistingFile);
    plot->add_option("--svg", svg_file, "Output SVG file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            for (const auto& f : cmd_synth(o, count)) std::cout << f.string() << '\n';
        } else if (*train) {
            const TrainResult r = cmd_train(o, data_dir);
            std::cout << format_report_table(r.train_metrics);
        } else if (*eval) {
            std::cout << format_report_table(cmd_eval(o, checkpoint, data_dir));
        } else if (*predict) {
            const auto scenes = cmd_predict(o, checkpoint, data_dir);
            std::cout << "wrote forecasts for " << scenes.size() << " scenes to " << (o.out / "forecasts.json").string()
                      << '\n';
        } else if (*prune) {
            std::cout << format_prune_table(cmd_prune_stats(o, checkpoint, data_dir));
        } else if (*plot) {
            std::optional<std::filesystem::path> ck;
            if (!checkpoint.empty()) ck = checkpoint;
            cmd_plot(o, ck, scene_file, svg_file);
            std::cout << svg_file << '\n';
        }
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}

#include "lanet/commands.hpp"

#include "lanet/plot.hpp"
#include "lanet/synth.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace lanet {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

ordered_json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path.string());
    ordered_json doc = ordered_json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw std::invalid_argument("config: " + path.string() + " is not valid JSON");
    return doc;
}

RunConfig layer(ordered_json doc, const CommonOptions& opts) {
    if (!opts.config.empty()) doc.merge_patch(read_json_file(opts.config));
    for (const auto& o : opts.overrides) apply_override(doc, o);
    if (opts.seed) doc["seed"] = *opts.seed;
    RunConfig c = from_json(doc);
    c.validate();
    return c;
}

fs::path require_out(const CommonOptions& opts) {
    if (opts.out.empty()) throw std::invalid_argument("--out is required for this command");
    std::error_code ec;
    fs::create_directories(opts.out, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + opts.out.string() + ": " + ec.message());
    return opts.out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

void echo_config(const fs::path& dir, const RunConfig& c) { write_text(dir / "config.json", to_json(c).dump(2) + "\n"); }

LanetModel load_model(const Checkpoint& ck, const RunConfig& cfg) {
    LanetModel model(cfg.model, cfg.seed);
    restore(model, ck);
    return model;
}

}  // namespace

RunConfig resolve(const CommonOptions& opts) { return layer(to_json(RunConfig{}), opts); }

RunConfig resolve(const CommonOptions& opts, const Checkpoint& ckpt) { return layer(to_json(ckpt.config), opts); }

std::vector<PreparedScene> load_dataset(const fs::path& dir, const ModelConfig& cfg) {
    if (!fs::is_directory(dir)) throw std::invalid_argument("data directory " + dir.string() + " does not exist");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && name.size() > 11 && name.ends_with(".scene.json")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::invalid_argument("data directory " + dir.string() + " holds no *.scene.json files");
    std::vector<PreparedScene> out;
    for (const auto& f : files) out.push_back(prepare_scene(load_scene(f), cfg));
    return out;
}

std::vector<CaseMetrics> evaluate_scene(LanetModel& model, const PreparedScene& scene, const ForwardOptions& fwd) {
    const auto forecasts = model.predict(scene, fwd);
    std::vector<CaseMetrics> out;
    for (std::size_t i = 0; i < forecasts.size(); ++i) {
        CaseMetrics c = evaluate_case(forecasts[i], scene.futures[i]);
        c.scenario_id = scene.scene.scenario_id;
        out.push_back(std::move(c));
    }
    return out;
}

MetricReport evaluate(LanetModel& model, const std::vector<PreparedScene>& data, const ForwardOptions& fwd) {
    std::vector<CaseMetrics> cases;
    for (const auto& s : data) {
        auto c = evaluate_scene(model, s, fwd);
        cases.insert(cases.end(), c.begin(), c.end());
    }
    return aggregate(std::move(cases), model.config().problem.num_modes);
}

std::vector<fs::path> cmd_synth(const CommonOptions& opts, int count) {
    if (count < 1) throw std::invalid_argument("synth: --count must be >= 1");
    const RunConfig cfg = resolve(opts);
    const fs::path dir = require_out(opts);
    std::vector<fs::path> files;
    ordered_json manifest = {{"count", count}, {"seed", cfg.seed}, {"scenes", ordered_json::array()}};
    for (int i = 0; i < count; ++i) {
        const Scene scene = synthesize_scene(cfg.seed + static_cast<std::uint64_t>(i), cfg.synth);
        const fs::path file = dir / (scene.scenario_id + ".scene.json");
        save_scene(scene, file);
        manifest["scenes"].push_back({{"scenario_id", scene.scenario_id},
                                      {"file", file.filename().string()},
                                      {"agents", scene.agents.size()},
                                      {"polygons", scene.polygons.size()}});
        files.push_back(file);
    }
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    echo_config(dir, cfg);
    spdlog::info("synth: wrote {} scenes to {}", count, dir.string());
    return files;
}

TrainResult cmd_train(const CommonOptions& opts, const fs::path& data_dir) {
    const RunConfig cfg = resolve(opts);
    const auto data = load_dataset(data_dir, cfg.model);
    const fs::path dir = require_out(opts);
    echo_config(dir, cfg);

    LanetModel model(cfg.model, cfg.seed);
    spdlog::info("train: {} scenes, {} parameters, {} steps", data.size(), model.params().num_scalars(), cfg.train.steps);
    const auto start = std::chrono::steady_clock::now();
    TrainResult result;
    try {
        result.curve = train(model, data, cfg.train, cfg.seed, [&](const LossRecord& r) {
            if (r.step % cfg.train.log_every == 0 || r.step + 1 == cfg.train.steps) {
                const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                spdlog::info("step {:5d}  total {:9.4f}  propose {:9.4f}  refine {:9.4f}  cls {:7.4f}  ({:.1f}s)", r.step,
                             r.total, r.propose, r.refine, r.cls, secs);
            }
        });
    } catch (const DivergenceError& e) {
        save_checkpoint(dir / "diverged.ckpt.json", model, cfg);
        throw;
    }
    write_text(dir / "loss.csv", format_loss_curve(result.curve));
    save_checkpoint(dir / "checkpoint.json", model, cfg);
    result.train_metrics = evaluate(model, data);
    write_text(dir / "train_metrics.tsv", format_report_tsv(result.train_metrics));
    spdlog::info("train: final train-set metrics\n{}", format_report_table(result.train_metrics));
    return result;
}

MetricReport cmd_eval(const CommonOptions& opts, const fs::path& checkpoint, const fs::path& data_dir) {
    const Checkpoint ck = load_checkpoint(checkpoint);
    const RunConfig cfg = resolve(opts, ck);
    LanetModel model = load_model(ck, cfg);
    const auto data = load_dataset(data_dir, cfg.model);
    MetricReport report = evaluate(model, data);
    if (!opts.out.empty()) {
        const fs::path dir = require_out(opts);
        write_text(dir / "metrics.tsv", format_report_tsv(report));
        echo_config(dir, cfg);
    }
    return report;
}

std::vector<SceneForecast> cmd_predict(const CommonOptions& opts, const fs::path& checkpoint, const fs::path& data_dir) {
    const Checkpoint ck = load_checkpoint(checkpoint);
    const RunConfig cfg = resolve(opts, ck);
    LanetModel model = load_model(ck, cfg);
    const auto data = load_dataset(data_dir, cfg.model);
    std::vector<SceneForecast> out;
    for (const auto& s : data) out.push_back({s.scene.scenario_id, model.predict(s)});
    const fs::path dir = require_out(opts);
    save_forecasts(out, dir / "forecasts.json");
    echo_config(dir, cfg);
    return out;
}

std::vector<PruneRow> cmd_prune_stats(const CommonOptions& opts, const fs::path& checkpoint, const fs::path& data_dir) {
    const Checkpoint ck = load_checkpoint(checkpoint);
    const RunConfig cfg = resolve(opts, ck);
    LanetModel model = load_model(ck, cfg);
    const auto data = load_dataset(data_dir, cfg.model);

    auto run = [&](const std::string& kind, std::optional<double> theta) {
        PruneRow row;
        row.kind = kind;
        std::vector<CaseMetrics> cases;
        for (const auto& s : data) {
            nn::Tape tape(false);
            ForwardOptions fwd{theta, std::nullopt};
            ModelOutput out = model.forward(tape, s, fwd);
            row.theta = out.pruned.theta;
            row.kept += static_cast<long>(out.pruned.kept.size());
            row.candidates += static_cast<long>(out.pruned.valid_mask.size());
            const auto forecasts = to_forecasts(out.refined, s);
            for (std::size_t i = 0; i < forecasts.size(); ++i) {
                CaseMetrics c = evaluate_case(forecasts[i], s.futures[i]);
                c.scenario_id = s.scene.scenario_id;
                cases.push_back(std::move(c));
            }
        }
        row.metrics = aggregate(std::move(cases), cfg.model.problem.num_modes);
        return row;
    };

    std::vector<PruneRow> rows;
    rows.push_back(run("reference", 0.0));
    for (double t : cfg.theta_sweep) rows.push_back(run("sweep", t));
    rows.push_back(run("trained", std::nullopt));
    if (!opts.out.empty()) {
        const fs::path dir = require_out(opts);
        write_text(dir / "prune_stats.tsv", format_prune_table(rows));
        echo_config(dir, cfg);
    }
    return rows;
}

std::string format_prune_table(const std::vector<PruneRow>& rows) {
    std::string out = "kind\ttheta\tkept\tcandidates\tkept_fraction\tb_min_fde\tmin_ade\tmin_fde\tmiss_rate\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s\t%.4f\t%ld\t%ld\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\n", r.kind.c_str(), r.theta,
                      r.kept, r.candidates, r.kept_fraction(), r.metrics.b_min_fde, r.metrics.min_ade,
                      r.metrics.min_fde, r.metrics.miss_rate);
        out += buf;
    }
    return out;
}

std::string cmd_plot(const CommonOptions& opts, const std::optional<fs::path>& checkpoint, const fs::path& scene_file,
                     const fs::path& out_svg) {
    Scene scene = load_scene(scene_file);
    std::vector<Forecast> forecasts;
    if (checkpoint) {
        const Checkpoint ck = load_checkpoint(*checkpoint);
        const RunConfig cfg = resolve(opts, ck);
        LanetModel model = load_model(ck, cfg);
        if (!scene.target_indices().empty()) forecasts = model.predict(prepare_scene(scene, cfg.model));
    }
    const std::string svg = render_svg(scene, forecasts);
    write_svg(out_svg, svg);
    return svg;
}

}  // namespace lanet

#include "lanet/model.hpp"

#include <cmath>

namespace lanet {

PreparedScene prepare_scene(Scene scene, const ModelConfig& cfg) {
    if (scene.config.history_steps != cfg.problem.history_steps || scene.config.future_steps != cfg.problem.future_steps)
        throw std::invalid_argument("prepare_scene: scene " + scene.scenario_id + " has H/T " +
                                    std::to_string(scene.config.history_steps) + "/" +
                                    std::to_string(scene.config.future_steps) + ", model expects " +
                                    std::to_string(cfg.problem.history_steps) + "/" +
                                    std::to_string(cfg.problem.future_steps));
    PreparedScene p;
    p.scene = std::move(scene);
    p.map = build_map_edges(p.scene, cfg.knn_k);
    p.agents = build_agent_graph(p.scene, p.map, cfg);
    p.decoder = build_decoder_graph(p.scene, p.agents, p.map, cfg);
    p.truth = make_target_truth(p.scene, p.decoder);
    const int h = p.scene.config.history_steps;
    for (int a : p.decoder.targets) {
        const AgentTrack& track = p.scene.agents[a];
        FutureTruth f;
        for (int t = 0; t < p.scene.config.future_steps; ++t) {
            const Pose2& pose = track.states[h + t].pose;
            f.x.push_back(pose.x);
            f.y.push_back(pose.y);
            f.heading.push_back(pose.heading);
            f.valid.push_back(track.valid[h + t]);
        }
        p.futures.push_back(std::move(f));
    }
    return p;
}

LanetModel::LanetModel(const ModelConfig& cfg, std::uint64_t seed) : config_(cfg), params_(seed) {
    config_.validate();
    map_ = MapEncoder(params_, config_);
    agent_ = AgentEncoder(params_, config_);
    caip_ = Caip(params_, "caip", kRelFeatureWidth, config_.caip_hidden, 1, config_.theta_init, config_.tau_init,
                 config_.learn_tau, config_.eq8_as_printed);
    params_.at("caip.scorer.1.b").value.setConstant(config_.caip_score_bias);
    decoder_ = Decoder(params_, config_);
}

ModelOutput LanetModel::forward(nn::Tape& tape, const PreparedScene& s, const ForwardOptions& opts) {
    nn::Graph g{tape, params_};
    ModelOutput out;
    out.x_map = map_.forward(g, s.scene, s.map).x_pl;
    out.x_agent = agent_.forward(g, s.scene, s.agents, out.x_map, config_.caip_in_encoder ? &caip_ : nullptr);
    Decoder::Context ctx = decoder_.prepare(g, s.decoder, out.x_agent, out.x_map, caip_, opts.theta_override);
    out.proposal = decoder_.propose(g, ctx);
    out.refined = decoder_.refine(g, ctx, out.proposal, opts.refine_steps.value_or(config_.refine_steps));
    out.pruned = std::move(ctx.pruned);
    return out;
}

std::vector<Forecast> LanetModel::predict(const PreparedScene& s, const ForwardOptions& opts) {
    nn::Tape tape(false);
    ModelOutput out = forward(tape, s, opts);
    return to_forecasts(out.refined, s);
}

std::vector<Forecast> to_forecasts(const ForecastVars& f, const PreparedScene& s) {
    const DecoderGraph& graph = s.decoder;
    const int k = graph.num_modes;
    const nn::Matrix& lx = f.loc_x.value();
    const nn::Matrix& ly = f.loc_y.value();
    const nn::Matrix& lp = f.log_probs.value();
    std::vector<Forecast> out;
    for (int q = 0; q < graph.num_targets(); ++q) {
        const Pose2& o = graph.origins[q];
        const double c = std::cos(o.heading), sn = std::sin(o.heading);
        Forecast fc;
        fc.agent_id = s.scene.agents[graph.targets[q]].agent_id;
        fc.origin = o;
        const int t = static_cast<int>(lx.cols());
        fc.loc_x.resize(k, t);
        fc.loc_y.resize(k, t);
        fc.heading.resize(k, t);
        fc.scale_x = f.scale_x.value().middleRows(q * k, k);
        fc.scale_y = f.scale_y.value().middleRows(q * k, k);
        fc.heading_conf = f.heading_conf.value().middleRows(q * k, k);
        for (int m = 0; m < k; ++m) {
            const int r = q * k + m;
            for (int i = 0; i < t; ++i) {
                fc.loc_x(m, i) = o.x + c * lx(r, i) - sn * ly(r, i);
                fc.loc_y(m, i) = o.y + sn * lx(r, i) + c * ly(r, i);
                fc.heading(m, i) = wrap_angle(o.heading + f.heading.value()(r, i));
            }
        }
        double total = 0.0;
        for (int m = 0; m < k; ++m) total += std::exp(lp(q, m));
        for (int m = 0; m < k; ++m) fc.probs.push_back(std::exp(lp(q, m)) / total);
        out.push_back(std::move(fc));
    }
    return out;
}

}  // namespace lanet

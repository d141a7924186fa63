#include "lanet/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace lanet {

void TrainConfig::validate() const {
    auto fail = [](const std::string& key, const std::string& why) {
        throw std::invalid_argument("train." + key + ": " + why);
    };
    if (!(lambda >= 0.0)) fail("lambda", "must be >= 0");
    if (!(learning_rate >= 0.0)) fail("learning_rate", "must be >= 0");
    if (steps < 0) fail("steps", "must be >= 0");
    if (batch_size < 1) fail("batch_size", "must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1", "must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2", "must be in [0, 1)");
    if (!(epsilon > 0.0)) fail("epsilon", "must be > 0");
    if (!(grad_clip >= 0.0)) fail("grad_clip", "must be >= 0");
    if (warmup_steps < 0) fail("warmup_steps", "must be >= 0");
    if (log_every < 1) fail("log_every", "must be >= 1");
}

void Adam::step(nn::ParamStore& ps) {
    ++t_;
    double lr = cfg_.learning_rate;
    if (cfg_.warmup_steps > 0 && t_ <= cfg_.warmup_steps) lr *= static_cast<double>(t_) / cfg_.warmup_steps;
    if (lr == 0.0) return;

    double clip = 1.0;
    if (cfg_.grad_clip > 0.0) {
        double norm2 = 0.0;
        for (const auto& [name, p] : ps) norm2 += p.grad.squaredNorm();
        const double norm = std::sqrt(norm2);
        if (norm > cfg_.grad_clip) clip = cfg_.grad_clip / norm;
    }
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (auto& [name, p] : ps) {
        auto [it, fresh] = moments_.try_emplace(name);
        auto& [m, v] = it->second;
        if (fresh) {
            m = nn::Matrix::Zero(p.value.rows(), p.value.cols());
            v = m;
        }
        const nn::Matrix g = p.grad * clip;
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
        p.value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.epsilon);
    }
}

LossRecord accumulate_scene_loss(LanetModel& model, const PreparedScene& scene, double lambda, double weight) {
    nn::Tape tape;
    ModelOutput out = model.forward(tape, scene);
    LossBreakdown loss = total_loss(out.proposal, out.refined, scene.truth, lambda);
    tape.backward(nn::scale(loss.total, weight));
    return {0, loss.propose.scalar(), loss.refine.scalar(), loss.cls.scalar(), loss.total.scalar()};
}

std::vector<LossRecord> train(LanetModel& model, const std::vector<PreparedScene>& data, const TrainConfig& cfg,
                              std::uint64_t seed, const StepCallback& on_step) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("train: empty dataset");
    Adam adam(cfg);
    std::mt19937_64 rng(seed);
    std::vector<int> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();

    const int batch = std::min<int>(cfg.batch_size, static_cast<int>(data.size()));
    std::vector<LossRecord> curve;
    curve.reserve(cfg.steps);
    for (int step = 0; step < cfg.steps; ++step) {
        model.params().zero_grad();
        LossRecord rec;
        rec.step = step;
        for (int b = 0; b < batch; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            const PreparedScene& scene = data[order[cursor++]];
            const LossRecord r = accumulate_scene_loss(model, scene, cfg.lambda, 1.0 / batch);
            if (!std::isfinite(r.total))
                throw DivergenceError(step, "train: non-finite loss at step " + std::to_string(step) + " on scene " +
                                                scene.scene.scenario_id + " (propose=" + std::to_string(r.propose) +
                                                ", refine=" + std::to_string(r.refine) +
                                                ", cls=" + std::to_string(r.cls) + ")");
            rec.propose += r.propose / batch;
            rec.refine += r.refine / batch;
            rec.cls += r.cls / batch;
            rec.total += r.total / batch;
        }
        adam.step(model.params());
        curve.push_back(rec);
        if (on_step) on_step(rec);
    }
    return curve;
}

std::string format_loss_curve(const std::vector<LossRecord>& curve) {
    std::ostringstream os;
    os.precision(17);
    os << "step,L_propose,L_refine,L_cls,total\n";
    for (const auto& r : curve) os << r.step << ',' << r.propose << ',' << r.refine << ',' << r.cls << ',' << r.total << '\n';
    return os.str();
}

}  // namespace lanet

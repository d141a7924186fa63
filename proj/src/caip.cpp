#include "lanet/caip.hpp"

#include <cmath>
#include <stdexcept>

namespace lanet {

using nn::Var;

Caip::Caip(nn::ParamStore& ps, std::string name, int in_dim, int hidden, int hidden_layers, double theta_init,
           double tau_init, bool learn_tau, bool eq8_as_printed)
    : name_(std::move(name)), learn_tau_(learn_tau), tau_fixed_(tau_init), eq8_as_printed_(eq8_as_printed) {
    if (!(theta_init > 0.0 && theta_init < 1.0)) throw std::invalid_argument("Caip: theta_init must be in (0, 1)");
    if (!(tau_init > 0.0)) throw std::invalid_argument("Caip: tau_init must be > 0");
    if (hidden_layers < 1) throw std::invalid_argument("Caip: need at least one hidden layer");
    std::vector<int> widths{in_dim};
    for (int i = 0; i < hidden_layers; ++i) widths.push_back(hidden);
    widths.push_back(1);
    scorer_ = nn::Mlp(ps, name_ + ".scorer", widths);
    ps.create(name_ + ".theta_logit", 1, 1, nn::ParamStore::Init::Zeros).value(0, 0) =
        std::log(theta_init / (1.0 - theta_init));
    if (learn_tau_) ps.create(name_ + ".log_tau", 1, 1, nn::ParamStore::Init::Zeros).value(0, 0) = std::log(tau_init);
}

Var Caip::score_edges(nn::Graph& g, const Var& features) const {
    if (features.cols() != scorer_.in())
        throw std::invalid_argument(name_ + ": feature width " + std::to_string(features.cols()) + " does not match scorer input " +
                                    std::to_string(scorer_.in()));
    return nn::sigmoid(scorer_(g, features));
}

Var Caip::theta(nn::Graph& g) const { return nn::sigmoid(g.param(name_ + ".theta_logit")); }

Var Caip::tau(nn::Graph& g) const {
    if (learn_tau_) return nn::exp(g.param(name_ + ".log_tau"));
    return g.tape.constant_scalar(tau_fixed_);
}

double Caip::theta_value(const nn::ParamStore& ps) const {
    const double z = ps.at(name_ + ".theta_logit").value(0, 0);
    return 1.0 / (1.0 + std::exp(-z));
}

double Caip::tau_value(const nn::ParamStore& ps) const {
    return learn_tau_ ? std::exp(ps.at(name_ + ".log_tau").value(0, 0)) : tau_fixed_;
}

std::vector<std::uint8_t> hard_mask(std::span<const double> scores, double theta) {
    std::vector<std::uint8_t> mask(scores.size());
    for (std::size_t e = 0; e < scores.size(); ++e) mask[e] = scores[e] >= theta ? 1 : 0;
    return mask;
}

Var soft_weights(const Var& scores, std::span<const int> targets, int num_targets, const Var& theta, const Var& tau,
                 double sign) {
    if (scores.cols() != 1 || scores.rows() != static_cast<Eigen::Index>(targets.size()))
        throw std::invalid_argument("soft_weights: scores must be edges x 1 and aligned with targets");
    Var z = nn::div(nn::scale(nn::sub(scores, theta), sign), tau);
    // sigmoid(z) / sum sigmoid(z) computed as a softmax of log sigmoid(z), which
    // stays finite when every sigmoid underflows at small tau.
    Var log_w = nn::neg(nn::softplus(nn::neg(z)));
    return nn::segment_softmax(log_w, targets, num_targets);
}

Var soft_weight(const Var& values, const Var& scores, std::span<const int> targets, int num_targets, const Var& theta,
                const Var& tau, double sign) {
    return nn::mul(values, soft_weights(scores, targets, num_targets, theta, tau, sign));
}

PrunedEdges Caip::prune(nn::Graph& g, const EdgeList& candidates, const Var& features, int num_queries,
                        std::optional<double> theta_override) const {
    if (features.rows() != static_cast<Eigen::Index>(candidates.size()))
        throw std::invalid_argument(name_ + ": features not aligned with candidate edges");
    Var all_scores = score_edges(g, features);
    Var th = theta_override ? g.tape.constant_scalar(*theta_override) : theta(g);
    PrunedEdges out;
    out.theta = th.scalar();

    const nn::Matrix& s = all_scores.value();
    out.valid_mask = hard_mask(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())), out.theta);

    // A query that had candidates keeps at least its best-scoring one.
    std::vector<int> best(num_queries, -1);
    std::vector<std::uint8_t> has_kept(num_queries, 0);
    for (std::size_t e = 0; e < candidates.size(); ++e) {
        const int t = candidates.targets[e];
        if (out.valid_mask[e]) has_kept[t] = 1;
        if (best[t] < 0 || s(static_cast<Eigen::Index>(e), 0) > s(best[t], 0)) best[t] = static_cast<int>(e);
    }
    for (int q = 0; q < num_queries; ++q)
        if (!has_kept[q] && best[q] >= 0) out.valid_mask[best[q]] = 1;

    for (std::size_t e = 0; e < candidates.size(); ++e) {
        if (!out.valid_mask[e]) continue;
        out.kept.push(candidates.sources[e], candidates.targets[e], candidates.rel[e]);
        out.kept_index.push_back(static_cast<int>(e));
    }
    out.scores = nn::gather_rows(all_scores, out.kept_index);
    out.weights = soft_weights(out.scores, out.kept.targets, num_queries, th, tau(g), sign());
    return out;
}

}  // namespace lanet

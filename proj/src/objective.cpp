#include "lanet/objective.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lanet {

using nn::Matrix;
using nn::Var;

TargetTruth make_target_truth(const Scene& scene, const DecoderGraph& graph) {
    const int n = graph.num_targets();
    const int h = scene.config.history_steps, t = scene.config.future_steps;
    TargetTruth out{Matrix::Zero(n, t), Matrix::Zero(n, t), Matrix::Zero(n, t), Matrix::Zero(n, t)};
    for (int q = 0; q < n; ++q) {
        const AgentTrack& track = scene.agents[graph.targets[q]];
        const Pose2& o = graph.origins[q];
        const double c = std::cos(o.heading), s = std::sin(o.heading);
        for (int i = 0; i < t; ++i) {
            if (!track.valid[h + i]) continue;
            const Pose2& p = track.states[h + i].pose;
            const double dx = p.x - o.x, dy = p.y - o.y;
            out.x(q, i) = c * dx + s * dy;
            out.y(q, i) = -s * dx + c * dy;
            out.heading(q, i) = wrap_angle(p.heading - o.heading);
            out.valid(q, i) = 1.0;
        }
    }
    return out;
}

namespace {

Matrix repeat_rows(const Matrix& m, int times) {
    Matrix out(m.rows() * times, m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (int k = 0; k < times; ++k) out.row(r * times + k) = m.row(r);
    return out;
}

// Per-element Laplace NLL log(2b) + |r| / b, zeroed where `mask` is 0.
Var laplace_terms(nn::Tape& tape, const Var& residual, const Var& b, const Matrix& mask) {
    Var nll = nn::add(nn::log(nn::scale(b, 2.0)), nn::div(nn::abs(residual), b));
    return nn::mul(nll, tape.constant(mask));
}

void check_valid(const Matrix& valid) {
    for (Eigen::Index q = 0; q < valid.rows(); ++q)
        if (valid.row(q).sum() <= 0.0)
            throw std::invalid_argument("laplace loss: target " + std::to_string(q) + " has no valid future step");
}

}  // namespace

Var laplace_mixture_nll(std::span<const Var> locs, std::span<const Var> scales, const Var& log_alpha,
                        std::span<const Matrix> truth, const Matrix& valid, bool stop_grad_components) {
    if (locs.empty() || locs.size() != scales.size() || locs.size() != truth.size())
        throw std::invalid_argument("laplace_mixture_nll: dimension lists differ in length");
    const int n = static_cast<int>(log_alpha.rows());
    const int k = static_cast<int>(log_alpha.cols());
    if (valid.rows() != n) throw std::invalid_argument("laplace_mixture_nll: valid mask does not match targets");
    check_valid(valid);
    nn::Tape& tape = *log_alpha.tape();
    const Matrix mask = repeat_rows(valid, k);

    Var nll_per_mode;
    for (std::size_t d = 0; d < locs.size(); ++d) {
        Var loc = stop_grad_components ? nn::detach(locs[d]) : locs[d];
        Var b = stop_grad_components ? nn::detach(scales[d]) : scales[d];
        if (loc.rows() != n * k || truth[d].rows() != n || loc.cols() != truth[d].cols())
            throw std::invalid_argument("laplace_mixture_nll: shape mismatch in dimension " + std::to_string(d));
        Var r = nn::sub(tape.constant(repeat_rows(truth[d], k)), loc);
        Var term = nn::row_sum(laplace_terms(tape, r, b, mask));
        nll_per_mode = nll_per_mode.defined() ? nn::add(nll_per_mode, term) : term;
    }
    Var log_joint = nn::sub(log_alpha, nn::reshape(nll_per_mode, n, k));
    return nn::neg(nn::mean(nn::logsumexp_rows(log_joint)));
}

Var laplace_mixture_nll(const ForecastVars& f, const TargetTruth& truth, bool stop_grad_components) {
    const Var locs[] = {f.loc_x, f.loc_y};
    const Var scales[] = {f.scale_x, f.scale_y};
    const Matrix q[] = {truth.x, truth.y};
    return laplace_mixture_nll(locs, scales, f.log_probs, q, truth.valid, stop_grad_components);
}

std::vector<int> wta_winners(const ForecastVars& f, const TargetTruth& truth) {
    const int n = truth.num_targets();
    const int k = static_cast<int>(f.log_probs.cols());
    check_valid(truth.valid);
    const Matrix& lx = f.loc_x.value();
    const Matrix& ly = f.loc_y.value();
    std::vector<int> winners(n, 0);
    for (int q = 0; q < n; ++q) {
        int last = static_cast<int>(truth.valid.cols()) - 1;
        while (truth.valid(q, last) == 0.0) --last;
        double best = std::numeric_limits<double>::infinity();
        for (int m = 0; m < k; ++m) {
            const double d = std::hypot(lx(q * k + m, last) - truth.x(q, last), ly(q * k + m, last) - truth.y(q, last));
            if (d < best) {
                best = d;
                winners[q] = m;
            }
        }
    }
    return winners;
}

WtaLoss wta_regression_loss(const ForecastVars& f, const TargetTruth& truth) {
    WtaLoss out;
    out.winners = wta_winners(f, truth);
    const int k = static_cast<int>(f.log_probs.cols());
    std::vector<int> rows(out.winners.size());
    for (std::size_t q = 0; q < rows.size(); ++q) rows[q] = static_cast<int>(q) * k + out.winners[q];
    nn::Tape& tape = *f.loc_x.tape();

    auto pick = [&](const Var& v) { return nn::gather_rows(v, rows); };
    Var rx = nn::sub(tape.constant(truth.x), pick(f.loc_x));
    Var ry = nn::sub(tape.constant(truth.y), pick(f.loc_y));
    Var rh = nn::wrap_angle(nn::sub(tape.constant(truth.heading), pick(f.heading)));
    Var per_step = nn::add(nn::add(laplace_terms(tape, rx, pick(f.scale_x), truth.valid),
                                   laplace_terms(tape, ry, pick(f.scale_y), truth.valid)),
                           laplace_terms(tape, rh, pick(f.heading_scale), truth.valid));
    out.loss = nn::mean(nn::row_sum(per_step));
    return out;
}

LossBreakdown total_loss(const ForecastVars& proposal, const ForecastVars& refined, const TargetTruth& truth,
                         double lambda) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("total_loss: lambda must be >= 0");
    LossBreakdown out;
    out.lambda = lambda;
    out.propose = wta_regression_loss(proposal, truth).loss;
    WtaLoss refine = wta_regression_loss(refined, truth);
    out.refine = refine.loss;
    out.winners = std::move(refine.winners);
    out.cls = laplace_mixture_nll(refined, truth, true);
    out.total = nn::add(nn::add(out.propose, out.refine), nn::scale(out.cls, lambda));
    return out;
}

}  // namespace lanet

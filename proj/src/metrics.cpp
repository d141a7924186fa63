#include "lanet/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace lanet {

namespace {

void check_shapes(const Forecast& f, const FutureTruth& truth) {
    if (f.num_modes() < 1) throw std::invalid_argument("metrics: forecast has no modes");
    if (f.horizon() != truth.horizon() || static_cast<int>(truth.valid.size()) != truth.horizon())
        throw std::invalid_argument("metrics: forecast horizon " + std::to_string(f.horizon()) +
                                    " does not match truth horizon " + std::to_string(truth.horizon()));
}

double step_error(const Forecast& f, const FutureTruth& truth, int m, int t) {
    return std::hypot(f.loc_x(m, t) - truth.x[t], f.loc_y(m, t) - truth.y[t]);
}

}  // namespace

FdeResult min_fde(const Forecast& f, const FutureTruth& truth) {
    check_shapes(f, truth);
    const int last = truth.horizon() - 1;
    if (last < 0 || !truth.valid[last]) throw std::invalid_argument("min_fde: final truth step is not valid");
    FdeResult best{std::numeric_limits<double>::infinity(), 0};
    for (int m = 0; m < f.num_modes(); ++m) {
        const double e = step_error(f, truth, m, last);
        if (e < best.error) best = {e, m};
    }
    return best;
}

double min_ade(const Forecast& f, const FutureTruth& truth) {
    const int m = min_fde(f, truth).mode;
    double total = 0.0;
    int count = 0;
    for (int t = 0; t < truth.horizon(); ++t) {
        if (!truth.valid[t]) continue;
        total += step_error(f, truth, m, t);
        ++count;
    }
    return total / count;
}

double b_min_fde(const Forecast& f, const FutureTruth& truth) {
    const FdeResult r = min_fde(f, truth);
    if (static_cast<int>(f.probs.size()) != f.num_modes())
        throw std::invalid_argument("b_min_fde: mode probabilities do not match mode count");
    const double miss = 1.0 - f.probs[r.mode];
    return r.error + miss * miss;
}

bool is_miss(const Forecast& f, const FutureTruth& truth, double threshold) {
    return min_fde(f, truth).error > threshold;
}

CaseMetrics evaluate_case(const Forecast& f, const FutureTruth& truth) {
    CaseMetrics c;
    c.agent_id = f.agent_id;
    const FdeResult r = min_fde(f, truth);
    c.best_mode = r.mode;
    c.min_fde = r.error;
    c.min_ade = min_ade(f, truth);
    c.b_min_fde = b_min_fde(f, truth);
    c.miss = r.error > kMissThreshold;
    return c;
}

MetricReport aggregate(std::vector<CaseMetrics> cases, int num_modes) {
    if (cases.empty()) throw std::invalid_argument("metrics: empty dataset");
    MetricReport r;
    r.num_modes = num_modes;
    for (const auto& c : cases) {
        r.min_ade += c.min_ade;
        r.min_fde += c.min_fde;
        r.b_min_fde += c.b_min_fde;
        r.miss_rate += c.miss ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(cases.size());
    r.min_ade /= n;
    r.min_fde /= n;
    r.b_min_fde /= n;
    r.miss_rate /= n;
    r.cases = std::move(cases);
    return r;
}

double miss_rate(std::span<const Forecast> forecasts, std::span<const FutureTruth> truths, double threshold) {
    if (forecasts.empty() || forecasts.size() != truths.size())
        throw std::invalid_argument("miss_rate: need a nonempty, aligned set of forecasts and truths");
    int misses = 0;
    for (std::size_t i = 0; i < forecasts.size(); ++i) misses += is_miss(forecasts[i], truths[i], threshold) ? 1 : 0;
    return static_cast<double>(misses) / static_cast<double>(forecasts.size());
}

std::string format_report_table(const MetricReport& r) {
    const int k = r.num_modes;
    char buf[512];
    std::snprintf(buf, sizeof buf, "%-12s %-12s %-12s %-12s %s\n%-12.4f %-12.4f %-12.4f %-12.4f %zu\n",
                  ("b-minFDE_" + std::to_string(k)).c_str(), ("minADE_" + std::to_string(k)).c_str(),
                  ("minFDE_" + std::to_string(k)).c_str(), ("MR_" + std::to_string(k)).c_str(), "cases", r.b_min_fde,
                  r.min_ade, r.min_fde, r.miss_rate, r.cases.size());
    return buf;
}

std::string format_report_tsv(const MetricReport& r) {
    std::ostringstream os;
    os.precision(10);
    os << "scenario_id\tagent_id\tb_min_fde\tmin_ade\tmin_fde\tmiss\tbest_mode\n";
    for (const auto& c : r.cases)
        os << c.scenario_id << '\t' << c.agent_id << '\t' << c.b_min_fde << '\t' << c.min_ade << '\t' << c.min_fde
           << '\t' << (c.miss ? 1 : 0) << '\t' << c.best_mode << '\n';
    os << "all\t-\t" << r.b_min_fde << '\t' << r.min_ade << '\t' << r.min_fde << '\t' << r.miss_rate << "\t-\n";
    return os.str();
}

}  // namespace lanet

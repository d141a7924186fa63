#pragma once

#include "lanet/forecast.hpp"

#include <span>
#include <string>
#include <vector>

namespace lanet {

inline constexpr double kMissThreshold = 2.0;

struct FdeResult {
    double error = 0.0;
    int mode = 0;
};

/// Endpoint error of the best mode; ties go to the lower index. The final truth step must be valid.
FdeResult min_fde(const Forecast& f, const FutureTruth& truth);
/// Mean error over valid steps of the mode with the lowest endpoint error.
double min_ade(const Forecast& f, const FutureTruth& truth);
/// minFDE + (1 - p)^2 with p the probability of the best-endpoint mode.
double b_min_fde(const Forecast& f, const FutureTruth& truth);
/// True when every mode's endpoint is farther than `threshold` from the truth.
bool is_miss(const Forecast& f, const FutureTruth& truth, double threshold = kMissThreshold);

struct CaseMetrics {
    std::string scenario_id;
    std::string agent_id;
    double min_ade = 0.0, min_fde = 0.0, b_min_fde = 0.0;
    bool miss = false;
    int best_mode = 0;
};

struct MetricReport {
    double min_ade = 0.0, min_fde = 0.0, b_min_fde = 0.0, miss_rate = 0.0;
    int num_modes = 0;
    std::vector<CaseMetrics> cases;

    std::size_t size() const { return cases.size(); }
};

CaseMetrics evaluate_case(const Forecast& f, const FutureTruth& truth);
/// Case-weighted means; throws std::invalid_argument for an empty set.
MetricReport aggregate(std::vector<CaseMetrics> cases, int num_modes);
/// Fraction of misses over aligned forecast/truth lists.
double miss_rate(std::span<const Forecast> forecasts, std::span<const FutureTruth> truths,
                 double threshold = kMissThreshold);

/// Columns in the order b-minFDE, minADE, minFDE, MR.
std::string format_report_table(const MetricReport& r);
std::string format_report_tsv(const MetricReport& r);

}  // namespace lanet

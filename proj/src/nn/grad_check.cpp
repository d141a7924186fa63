#include "lanet/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lanet::nn {

namespace {

double evaluate(const ScalarFn& fn, ParamStore& params) {
    Tape tape(false);
    Graph g{tape, params};
    return fn(g).scalar();
}

bool selected(const std::string& name, const std::vector<std::string>& prefixes) {
    if (prefixes.empty()) return true;
    return std::any_of(prefixes.begin(), prefixes.end(), [&](const std::string& p) { return name.rfind(p, 0) == 0; });
}

}  // namespace

GradCheckReport grad_check(const ScalarFn& fn, ParamStore& params, const GradCheckOptions& opts) {
    params.zero_grad();
    {
        Tape tape;
        Graph g{tape, params};
        Var out = fn(g);
        tape.backward(out);
    }

    GradCheckReport report;
    for (auto& [name, p] : params) {
        if (!selected(name, opts.prefixes)) continue;
        GradCheckEntry entry;
        entry.name = name;
        const Eigen::Index n = p.value.size();
        const Eigen::Index stride =
            opts.max_entries_per_param > 0 ? std::max<Eigen::Index>(1, n / opts.max_entries_per_param) : 1;
        for (Eigen::Index i = 0; i < n; i += stride) {
            double& x = p.value.data()[i];
            const double orig = x;
            x = orig + opts.step;
            const double fp = evaluate(fn, params);
            x = orig - opts.step;
            const double fm = evaluate(fn, params);
            x = orig;
            const double numeric = (fp - fm) / (2.0 * opts.step);
            const double analytic = p.grad.data()[i];
            const double abs_err = std::abs(analytic - numeric);
            const double rel = abs_err / std::max({std::abs(analytic), std::abs(numeric), opts.floor});
            entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
            entry.max_abs_grad = std::max(entry.max_abs_grad, std::abs(analytic));
            if (rel > entry.max_rel_error) entry.max_rel_error = rel;
            if (rel >= opts.tolerance) {
                std::ostringstream os;
                os << name << "[" << i << "]: analytic " << analytic << " numeric " << numeric << " rel " << rel;
                report.failures.push_back(os.str());
            }
            ++entry.checked;
        }
        report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
        report.checked += entry.checked;
        report.params.push_back(std::move(entry));
    }
    return report;
}

}  // namespace lanet::nn

#include "xopgan/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "xopgan/numerics/errors.hpp"

namespace xopgan {

double relative_error(double analytic, double numeric, double floor) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

GradcheckReport gradcheck(std::vector<GradTarget>& targets, const std::function<double()>& loss,
                          const GradcheckOptions& options) {
    const double base = loss();
    if (!std::isfinite(base)) throw NumericalError("gradcheck: loss is not finite");

    GradcheckReport report;
    for (auto& t : targets) {
        if (!t.value) throw ConfigError("gradcheck: target '" + t.name + "' has no value");
        require_same_shape(*t.value, t.analytic, "gradcheck analytic gradient");
        std::vector<std::size_t> idx = t.indices;
        if (idx.empty()) {
            idx.resize(t.value->size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        }
        for (auto i : idx) {
            double& x = (*t.value)[i];
            const double saved = x;
            x = saved + options.step;
            const double up = loss();
            x = saved - options.step;
            const double down = loss();
            x = saved;
            if (!std::isfinite(up) || !std::isfinite(down))
                throw NumericalError("gradcheck: non-finite loss perturbing " + t.name + "[" + std::to_string(i) + "]");
            const double numeric = (up - down) / (2.0 * options.step);
            const double err = relative_error(t.analytic[i], numeric, options.floor);
            ++report.probes;
            if (err > report.max_rel_error || report.worst.empty()) {
                if (err >= report.max_rel_error) {
                    report.max_rel_error = err;
                    report.worst = t.name + "[" + std::to_string(i) + "]";
                }
            }
        }
    }
    return report;
}

}  // namespace xopgan

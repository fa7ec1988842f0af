#include "slr/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace slr {

double finite_diff_check(const std::function<double()>& forward,
                         const std::vector<ParamGrad*>& params,
                         double eps) {
    double max_err = 0.0;
    for (ParamGrad* p : params) {
        for (std::size_t k = 0; k < p->value.data.size(); ++k) {
            double saved = p->value.data[k];
            p->value.data[k] = saved + eps;
            double fp = forward();
            p->value.data[k] = saved - eps;
            double fm = forward();
            p->value.data[k] = saved;
            double numeric = (fp - fm) / (2.0 * eps);
            double analytic = p->grad.data[k];
            double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            max_err = std::max(max_err, std::abs(analytic - numeric) / denom);
        }
    }
    return max_err;
}

}  // namespace slr

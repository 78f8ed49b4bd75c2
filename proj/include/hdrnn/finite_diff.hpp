#pragma once

#include <cmath>
#include <functional>

#include "hdrnn/errors.hpp"
#include "hdrnn/params.hpp"

namespace hdrnn {

// Central differences (f(p+e) - f(p-e)) / 2e, one coordinate at a time.
inline ParamSet finite_diff_grad(const std::function<double(const ParamSet&)>& loss_fn, const ParamSet& params,
                                 double eps) {
    if (!(eps > 0.0)) throw ConfigError("finite_diff_grad: epsilon must be positive");
    ParamSet work = params;
    ParamSet grad = zeros_like(params);
    auto w = work.arrays();
    auto g = grad.arrays();
    for (std::size_t a = 0; a < w.size(); ++a) {
        for (std::size_t k = 0; k < w[a].size(); ++k) {
            const double orig = w[a][k];
            w[a][k] = orig + eps;
            const double fp = loss_fn(work);
            w[a][k] = orig - eps;
            const double fm = loss_fn(work);
            w[a][k] = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw NumericError("finite_diff_grad: loss is not finite");
            g[a][k] = (fp - fm) / (2.0 * eps);
        }
    }
    return grad;
}

} // namespace hdrnn

#include "slr/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace slr {

void zero_grads(const std::vector<ParamGrad*>& params) {
    for (ParamGrad* p : params) p->zero_grad();
}

void Optimizer::step(const std::vector<ParamGrad*>& params) {
    if (moment1_.empty()) {
        for (const ParamGrad* p : params) {
            moment1_.emplace_back(p->value.rows, p->value.cols);
            moment2_.emplace_back(p->value.rows, p->value.cols);
        }
    }
    if (moment1_.size() != params.size())
        throw std::invalid_argument("optimizer: parameter list size changed between steps");

    for (const ParamGrad* p : params) {
        if (!p->grad.all_finite())
            throw std::runtime_error("optimizer: non-finite gradient for parameter '" + p->name + "'");
        if (!p->grad.same_shape(p->value))
            throw std::invalid_argument("optimizer: grad shape mismatch for '" + p->name + "'");
    }
    ++step_count_;

    if (cfg_.kind == OptimizerKind::sgd_momentum) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            ParamGrad& p = *params[i];
            Tensor2& vel = moment1_[i];
            for (std::size_t k = 0; k < p.value.data.size(); ++k) {
                double g = p.grad.data[k] + cfg_.weight_decay * p.value.data[k];
                vel.data[k] = cfg_.momentum * vel.data[k] + g;
                p.value.data[k] -= cfg_.learning_rate * vel.data[k];
            }
        }
        return;
    }

    // RAdam: bias-corrected moments with variance rectification; falls back to
    // an un-adapted step while the rectification term is undefined.
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double t = static_cast<double>(step_count_);
    const double b1t = std::pow(b1, t), b2t = std::pow(b2, t);
    const double rho_inf = 2.0 / (1.0 - b2) - 1.0;
    const double rho_t = rho_inf - 2.0 * t * b2t / (1.0 - b2t);
    double rect = 0.0;
    const bool rectified = rho_t > 4.0;
    if (rectified)
        rect = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) /
                         ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));

    for (std::size_t i = 0; i < params.size(); ++i) {
        ParamGrad& p = *params[i];
        Tensor2& m = moment1_[i];
        Tensor2& v = moment2_[i];
        for (std::size_t k = 0; k < p.value.data.size(); ++k) {
            double g = p.grad.data[k] + cfg_.weight_decay * p.value.data[k];
            m.data[k] = b1 * m.data[k] + (1.0 - b1) * g;
            v.data[k] = b2 * v.data[k] + (1.0 - b2) * g * g;
            double mhat = m.data[k] / (1.0 - b1t);
            if (rectified) {
                double vhat = std::sqrt(v.data[k] / (1.0 - b2t));
                p.value.data[k] -= cfg_.learning_rate * rect * mhat / (vhat + cfg_.epsilon);
            } else {
                p.value.data[k] -= cfg_.learning_rate * mhat;
            }
        }
    }
}

}  // namespace slr

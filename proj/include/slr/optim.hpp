#pragma once

#include <string>
#include <vector>

#include "slr/tensor.hpp"

namespace slr {

// A trainable parameter together with its gradient accumulator.
struct ParamGrad {
    std::string name;
    Tensor2 value;
    Tensor2 grad;

    ParamGrad() = default;
    ParamGrad(std::string n, Tensor2 v)
        : name(std::move(n)), value(std::move(v)), grad(value.rows, value.cols) {}

    void zero_grad() { grad.fill(0.0); }
};

enum class OptimizerKind { sgd_momentum, radam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::radam;
    double learning_rate = 0.001;
    double momentum = 0.9;       // sgd_momentum only
    double weight_decay = 1e-5;  // added to the gradient as wd * value
    double beta1 = 0.9;          // adaptive kind only
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Owns per-parameter moment buffers; one instance drives one parameter list.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

    // Applies one update to every parameter from its accumulated gradient.
    // Throws if any gradient is non-finite, naming the parameter.
    void step(const std::vector<ParamGrad*>& params);

    long step_count() const { return step_count_; }
    const OptimizerConfig& config() const { return cfg_; }
    OptimizerConfig& config() { return cfg_; }

private:
    OptimizerConfig cfg_;
    long step_count_ = 0;
    std::vector<Tensor2> moment1_;  // velocity for sgd, first moment for radam
    std::vector<Tensor2> moment2_;  // second moment (radam)
};

void zero_grads(const std::vector<ParamGrad*>& params);

}  // namespace slr

#pragma once

#include <string>
#include <vector>

#include "lbaug/network.hpp"

namespace lbaug {

enum class OptimizerKind { sgd_momentum, adam };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from_string(const std::string& s);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::sgd_momentum;
    double lr = 0.05;
    double momentum = 0.9;  // SGD
    double beta1 = 0.9;     // Adam
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
};

// SGD with momentum: v <- mu*v - lr*(g + wd*theta); theta <- theta + v.
// Adam: bias-corrected moments of g + wd*theta.
class Optimizer {
public:
    Optimizer(const OptimizerConfig& cfg, const Network& net);
    void step(Network& net, const Gradients& grads);
    const OptimizerConfig& config() const { return cfg_; }
    long steps() const { return t_; }

private:
    OptimizerConfig cfg_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    long t_ = 0;
};

}  // namespace lbaug

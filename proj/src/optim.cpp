#include "lbaug/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace lbaug {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd_momentum"; }

OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "adam") return OptimizerKind::adam;
    if (s == "sgd_momentum" || s == "sgd") return OptimizerKind::sgd_momentum;
    throw std::invalid_argument("unknown optimizer '" + s + "'");
}

Optimizer::Optimizer(const OptimizerConfig& cfg, const Network& net) : cfg_(cfg) {
    for (const auto& l : net.layers) {
        m_.emplace_back(l.weight.size() + l.bias.size(), 0.0);
        v_.emplace_back(cfg.kind == OptimizerKind::adam ? l.weight.size() + l.bias.size() : 0, 0.0);
    }
}

void Optimizer::step(Network& net, const Gradients& grads) {
    if (grads.weight.size() != net.layers.size()) throw std::invalid_argument("optimizer: gradient layer count mismatch");
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        auto& l = net.layers[li];
        if (grads.weight[li].size() != l.weight.size() || grads.bias[li].size() != l.bias.size())
            throw std::invalid_argument("optimizer: gradient shape mismatch in layer " + std::to_string(li));
        for (double g : grads.weight[li])
            if (!std::isfinite(g)) throw std::runtime_error("optimizer: non-finite gradient in layer " + std::to_string(li));
        for (double g : grads.bias[li])
            if (!std::isfinite(g)) throw std::runtime_error("optimizer: non-finite gradient in layer " + std::to_string(li));
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        auto& l = net.layers[li];
        auto update = [&](std::vector<double>& theta, const std::vector<double>& g, std::size_t offset) {
            for (std::size_t i = 0; i < theta.size(); ++i) {
                const double gi = g[i] + cfg_.weight_decay * theta[i];
                double& m = m_[li][offset + i];
                if (cfg_.kind == OptimizerKind::sgd_momentum) {
                    m = cfg_.momentum * m - cfg_.lr * gi;
                    theta[i] += m;
                } else {
                    double& v = v_[li][offset + i];
                    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * gi;
                    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * gi * gi;
                    theta[i] -= cfg_.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
                }
            }
        };
        update(l.weight, grads.weight[li], 0);
        update(l.bias, grads.bias[li], l.weight.size());
    }
}

}  // namespace lbaug

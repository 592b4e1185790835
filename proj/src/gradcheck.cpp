#include "lbaug/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace lbaug {

namespace {

double eval_loss(const Network& net, const Tensor& input, const LossHead& head, std::uint64_t seed) {
    Rng rng(seed);
    Tensor out = forward(net, input, nullptr, &rng);
    Tensor grad(out.shape);
    return head(out, grad);
}

}  // namespace

GradCheckReport grad_check(Network& net, const Tensor& input, const LossHead& head, const GradCheckOptions& opt) {
    Rng rng(opt.dropout_seed);
    ForwardCache cache;
    Tensor out = forward(net, input, &cache, &rng);
    Tensor grad(out.shape);
    head(out, grad);
    Gradients analytic = backward(net, cache, grad);
    return grad_check_against(net, input, head, analytic, opt);
}

GradCheckReport grad_check_against(Network& net, const Tensor& input, const LossHead& head, const Gradients& analytic,
                                   const GradCheckOptions& opt) {
    GradCheckReport rep;
    auto compare = [&](double a, double n, const std::string& where) {
        const double denom = std::max({std::abs(a), std::abs(n), opt.floor});
        const double rel = std::abs(a - n) / denom;
        ++rep.checked;
        if (rep.worst.empty() || rel > rep.max_rel_error) {
            rep.max_rel_error = rel;
            rep.worst = where;
        }
    };
    auto probe = [&](double& slot) {
        const double saved = slot;
        slot = saved + opt.step;
        const double up = eval_loss(net, input, head, opt.dropout_seed);
        slot = saved - opt.step;
        const double down = eval_loss(net, input, head, opt.dropout_seed);
        slot = saved;
        return (up - down) / (2.0 * opt.step);
    };
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        auto& layer = net.layers[li];
        for (std::size_t i = 0; i < layer.weight.size(); ++i)
            compare(analytic.weight[li][i], probe(layer.weight[i]),
                    "layer " + std::to_string(li) + " weight[" + std::to_string(i) + "]");
        for (std::size_t i = 0; i < layer.bias.size(); ++i)
            compare(analytic.bias[li][i], probe(layer.bias[i]),
                    "layer " + std::to_string(li) + " bias[" + std::to_string(i) + "]");
    }
    if (opt.include_input && analytic.input.size() == input.size()) {
        Tensor x = input;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double saved = x[i];
            x[i] = saved + opt.step;
            const double up = eval_loss(net, x, head, opt.dropout_seed);
            x[i] = saved - opt.step;
            const double down = eval_loss(net, x, head, opt.dropout_seed);
            x[i] = saved;
            compare(analytic.input[i], (up - down) / (2.0 * opt.step), "input[" + std::to_string(i) + "]");
        }
    }
    rep.pass = rep.max_rel_error < opt.tolerance;
    return rep;
}

}  // namespace lbaug

#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "lbaug/network.hpp"

namespace lbaug {

// Maps the network output to a scalar loss and writes d loss / d output.
using LossHead = std::function<double(const Tensor& output, Tensor& grad)>;

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::string worst;  // e.g. "layer 2 weight[13]"
    bool pass = false;
};

// Relative error per coordinate is |a - n| / max(|a|, |n|, floor), with the
// floor keeping round-off on near-zero gradients from dominating. Dropout
// masks are replayed from dropout_seed on every evaluation.
struct GradCheckOptions {
    double tolerance = 1e-4;
    double step = 1e-5;
    double floor = 1e-6;
    std::uint64_t dropout_seed = 0;
    bool include_input = true;
};

GradCheckReport grad_check(Network& net, const Tensor& input, const LossHead& head, const GradCheckOptions& opt = {});

// Same check against externally supplied analytic gradients (fault-injection tests).
GradCheckReport grad_check_against(Network& net, const Tensor& input, const LossHead& head, const Gradients& analytic,
                                   const GradCheckOptions& opt = {});

}  // namespace lbaug

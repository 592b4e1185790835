#pragma once

#include <vector>

#include "lbaug/tensor.hpp"

namespace lbaug {

struct LossResult {
    double loss = 0.0;
    Tensor grad;  // d loss / d input, same shape as the input
};

// Mean binary cross entropy over batch and labels, evaluated on logits with
// max(z,0) - z*t + log1p(exp(-|z|)).
LossResult bce_with_logits(const Tensor& logits, const Tensor& targets);

// Same loss on probabilities (clamped away from 0 and 1 by 1e-12).
LossResult bce_with_probs(const Tensor& probs, const Tensor& targets);

// Per-row mean BCE over labels, from logits.
std::vector<double> bce_rows_from_logits(const Tensor& logits, const Tensor& targets);

double sigmoid(double z);

}  // namespace lbaug

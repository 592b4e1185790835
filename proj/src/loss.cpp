#include "lbaug/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lbaug {

namespace {

void check(const Tensor& a, const Tensor& t) {
    if (a.size() != t.size() || a.rows() != t.rows())
        throw std::invalid_argument("bce: prediction shape " + a.shape_string() + " vs target shape " +
                                    t.shape_string());
    if (a.size() == 0) throw std::invalid_argument("bce: empty batch");
}

double bce_logit_term(double z, double t) { return std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z))); }

}  // namespace

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

LossResult bce_with_logits(const Tensor& logits, const Tensor& targets) {
    check(logits, targets);
    LossResult r;
    r.grad = Tensor(logits.shape);
    const double inv = 1.0 / static_cast<double>(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        r.loss += bce_logit_term(logits[i], targets[i]);
        r.grad[i] = (sigmoid(logits[i]) - targets[i]) * inv;
    }
    r.loss *= inv;
    return r;
}

LossResult bce_with_probs(const Tensor& probs, const Tensor& targets) {
    check(probs, targets);
    LossResult r;
    r.grad = Tensor(probs.shape);
    const double inv = 1.0 / static_cast<double>(probs.size());
    constexpr double eps = 1e-12;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = std::clamp(probs[i], eps, 1.0 - eps), t = targets[i];
        r.loss += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
        r.grad[i] = (-(t / p) + (1.0 - t) / (1.0 - p)) * inv;
    }
    r.loss *= inv;
    return r;
}

std::vector<double> bce_rows_from_logits(const Tensor& logits, const Tensor& targets) {
    check(logits, targets);
    const int N = logits.rows();
    const std::size_t L = logits.row_size();
    std::vector<double> out(static_cast<std::size_t>(N), 0.0);
    for (int n = 0; n < N; ++n) {
        double s = 0.0;
        for (std::size_t j = 0; j < L; ++j) s += bce_logit_term(logits[n * L + j], targets[n * L + j]);
        out[n] = s / static_cast<double>(L);
    }
    return out;
}

}  // namespace lbaug

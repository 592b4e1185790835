#pragma once

#include <cstdint>
#include <random>

namespace lbaug {

// Mixes a run seed with a task id so that parallel tasks get independent,
// reproducible streams regardless of scheduling order.
std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t task_id);

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    double normal(double mean = 0.0, double stddev = 1.0);
    bool bernoulli(double p) { return uniform() < p; }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace lbaug

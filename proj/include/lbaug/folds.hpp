#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"
#include "lbaug/image.hpp"

namespace lbaug {

struct Fold {
    std::vector<std::size_t> M;  // critic-training indices, ascending
    std::vector<std::size_t> A;  // policy-evaluation indices, ascending
};

// K independent stratified M/A splits of one dataset. Fold k is drawn from
// derive_seed(seed, k), so a plan with K+1 folds extends the K-fold plan.
struct FoldPlan {
    int K = 0;
    double ratio = 0.8;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    std::vector<Fold> folds;
    // critics[i] = ascending fold ids k with i in A_k.
    std::vector<std::vector<int>> critics;
};

struct UnionEvalSet {
    std::vector<std::size_t> indices;            // ascending
    std::vector<std::vector<int>> critic_lists;  // parallel to indices
};

// Size of each A_k: ceil((1 - ratio) * n), guarded against round-off.
std::size_t eval_size(std::size_t n, double ratio);

// One stratified split. Labels are processed rarest first; each instance of
// the current label goes to the side whose remaining quota for that label is
// largest, ties broken by remaining capacity and then by a seeded coin.
Fold stratified_split(const Dataset& ds, double ratio, std::uint64_t seed);

FoldPlan make_fold_plan(const Dataset& ds, int K, double ratio, std::uint64_t seed);
UnionEvalSet union_eval_set(const FoldPlan& plan);

nlohmann::json plan_to_json(const FoldPlan& plan, const Dataset& ds);
FoldPlan plan_from_json(const nlohmann::json& j, const Dataset& ds);

}  // namespace lbaug

#include "lbaug/folds.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "lbaug/rng.hpp"

namespace lbaug {

std::size_t eval_size(std::size_t n, double ratio) {
    return static_cast<std::size_t>(std::ceil((1.0 - ratio) * static_cast<double>(n) - 1e-9));
}

Fold stratified_split(const Dataset& ds, double ratio, std::uint64_t seed) {
    const std::size_t n = ds.size(), L = ds.num_labels();
    Rng rng(seed);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());

    // Side 0 = A, side 1 = M.
    std::array<double, 2> capacity = {static_cast<double>(eval_size(n, ratio)), 0.0};
    capacity[1] = static_cast<double>(n) - capacity[0];
    const std::array<double, 2> share = {capacity[0] / n, capacity[1] / n};

    std::vector<double> positives(L, 0.0);
    for (const auto& inst : ds.instances)
        for (std::size_t l = 0; l < L; ++l) positives[l] += inst.labels[l];
    std::array<std::vector<double>, 2> quota;
    for (int s = 0; s < 2; ++s) {
        quota[s].resize(L);
        for (std::size_t l = 0; l < L; ++l) quota[s][l] = positives[l] * share[s];
    }

    std::vector<int> side(n, -1);
    std::vector<double> remaining = positives;
    std::size_t unassigned = n;

    auto assign = [&](std::size_t i, int s) {
        side[i] = s;
        capacity[s] -= 1.0;
        --unassigned;
        for (std::size_t l = 0; l < L; ++l)
            if (ds.instances[i].labels[l]) {
                quota[s][l] -= 1.0;
                remaining[l] -= 1.0;
            }
    };
    auto choose = [&](auto&& key) {
        if (capacity[0] <= 0.0) return 1;
        if (capacity[1] <= 0.0) return 0;
        const double k0 = key(0), k1 = key(1);
        if (k0 != k1) return k0 > k1 ? 0 : 1;
        if (capacity[0] != capacity[1]) return capacity[0] > capacity[1] ? 0 : 1;
        return rng.bernoulli(0.5) ? 0 : 1;
    };

    while (unassigned > 0) {
        // Rarest label among the unassigned instances.
        std::size_t best = L;
        for (std::size_t l = 0; l < L; ++l)
            if (remaining[l] > 0.0 && (best == L || remaining[l] < remaining[best])) best = l;
        if (best == L) {
            // Only label-free instances remain: fill by relative remaining capacity.
            for (std::size_t i : order)
                if (side[i] < 0) assign(i, choose([&](int s) { return capacity[s] / (share[s] * n); }));
            break;
        }
        for (std::size_t i : order)
            if (side[i] < 0 && ds.instances[i].labels[best])
                assign(i, choose([&](int s) { return quota[s][best]; }));
    }

    Fold f;
    for (std::size_t i = 0; i < n; ++i) (side[i] == 0 ? f.A : f.M).push_back(i);
    return f;
}

FoldPlan make_fold_plan(const Dataset& ds, int K, double ratio, std::uint64_t seed) {
    if (K < 1) throw std::invalid_argument("make_fold_plan: K must be >= 1, got " + std::to_string(K));
    if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("make_fold_plan: ratio must lie in (0,1)");
    if (ds.size() < 10) throw std::invalid_argument("make_fold_plan: need at least 10 instances");
    const auto rates = positive_rates(ds);
    for (std::size_t l = 0; l < ds.num_labels(); ++l) {
        const double pos = std::round(rates[l] * ds.size());
        if (pos < 2)
            throw std::invalid_argument("make_fold_plan: label '" + ds.label_names[l] + "' has fewer than 2 positives");
    }
    FoldPlan plan;
    plan.K = K;
    plan.ratio = ratio;
    plan.seed = seed;
    plan.n = ds.size();
    plan.critics.assign(ds.size(), {});
    for (int k = 0; k < K; ++k) {
        plan.folds.push_back(stratified_split(ds, ratio, derive_seed(seed, static_cast<std::uint64_t>(k))));
        for (std::size_t i : plan.folds.back().A) plan.critics[i].push_back(k);
    }
    return plan;
}

UnionEvalSet union_eval_set(const FoldPlan& plan) {
    UnionEvalSet u;
    for (std::size_t i = 0; i < plan.n; ++i)
        if (!plan.critics[i].empty()) {
            u.indices.push_back(i);
            u.critic_lists.push_back(plan.critics[i]);
        }
    return u;
}

nlohmann::json plan_to_json(const FoldPlan& plan, const Dataset& ds) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : plan.folds) {
        nlohmann::json m = nlohmann::json::array(), a = nlohmann::json::array();
        for (std::size_t i : f.M) m.push_back(ds.instances.at(i).id);
        for (std::size_t i : f.A) a.push_back(ds.instances.at(i).id);
        folds.push_back({{"M", m}, {"A", a}});
    }
    return {{"K", plan.K}, {"ratio", plan.ratio}, {"seed", plan.seed}, {"folds", folds}};
}

FoldPlan plan_from_json(const nlohmann::json& j, const Dataset& ds) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < ds.size(); ++i) index[ds.instances[i].id] = i;
    FoldPlan plan;
    plan.K = j.at("K").get<int>();
    plan.ratio = j.at("ratio").get<double>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.n = ds.size();
    plan.critics.assign(ds.size(), {});
    auto lookup = [&](const nlohmann::json& id) {
        auto it = index.find(id.get<std::string>());
        if (it == index.end()) throw std::invalid_argument("fold plan references unknown id " + id.get<std::string>());
        return it->second;
    };
    int k = 0;
    for (const auto& jf : j.at("folds")) {
        Fold f;
        for (const auto& id : jf.at("M")) f.M.push_back(lookup(id));
        for (const auto& id : jf.at("A")) f.A.push_back(lookup(id));
        std::sort(f.M.begin(), f.M.end());
        std::sort(f.A.begin(), f.A.end());
        if (f.M.size() + f.A.size() != ds.size())
            throw std::invalid_argument("fold " + std::to_string(k) + " does not partition the dataset");
        for (std::size_t i : f.A) plan.critics[i].push_back(k);
        plan.folds.push_back(std::move(f));
        ++k;
    }
    if (static_cast<int>(plan.folds.size()) != plan.K) throw std::invalid_argument("fold plan K does not match folds");
    return plan;
}

}  // namespace lbaug

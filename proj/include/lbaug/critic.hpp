#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "lbaug/folds.hpp"
#include "lbaug/network.hpp"
#include "lbaug/ops.hpp"
#include "lbaug/optim.hpp"

namespace lbaug {

struct TrainHyper {
    int epochs = 30;
    int batch = 32;
    OptimizerConfig optim;
};

nlohmann::json hyper_to_json(const TrainHyper& h);
TrainHyper hyper_from_json(const nlohmann::json& j);

// conv3x3(3->w1) relu pool conv3x3(w1->w2) relu pool dense(->hidden) relu dense(->L) sigmoid.
std::vector<LayerSpec> classifier_specs(int image_size, int num_labels, int w1 = 8, int w2 = 16, int hidden = 64);

// Stacks HWC images into an NCHW tensor.
Tensor images_to_tensor(const std::vector<const Image*>& images);
Tensor labels_to_tensor(const std::vector<const LabelVector*>& labels);

// Called once per instance per epoch to produce the image actually trained on.
using AugmentFn = std::function<Image(std::size_t index, Rng& rng)>;

struct TrainedClassifier {
    Network net;
    std::vector<double> loss_curve;  // mean training BCE per epoch
};

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Minibatch BCE training of a multi-label classifier on ds[indices]. The
// trailing sigmoid, if any, is folded into a logit-space loss.
TrainedClassifier train_classifier(const Dataset& ds, const std::vector<std::size_t>& indices,
                                   const std::vector<LayerSpec>& specs, const TrainHyper& hyper, std::uint64_t seed,
                                   const AugmentFn& augment = nullptr);

// Sigmoid scores, N x L, evaluated in chunks.
Tensor predict_scores(const Network& net, const std::vector<const Image*>& images);

// Per-instance mean BCE over labels.
std::vector<double> instance_losses(const Network& net, const std::vector<const Image*>& images,
                                    const std::vector<const LabelVector*>& labels);
double instance_loss(const Network& net, const Image& image, const LabelVector& y);

struct CriticSet {
    std::vector<Network> critics;
    std::vector<std::vector<double>> loss_curves;

    std::size_t size() const { return critics.size(); }
    std::vector<std::uint64_t> checksums() const;
};

// One critic per fold, trained on M_k with seed derive_seed(seed, 1000 + k).
// Folds run on up to `threads` worker threads; results do not depend on it.
CriticSet train_critics(const Dataset& ds, const FoldPlan& plan, const std::vector<LayerSpec>& specs,
                        const TrainHyper& hyper, std::uint64_t seed, int threads = 1);

void save_critics(const CriticSet& set, const std::filesystem::path& dir);
CriticSet load_critics(const std::filesystem::path& dir);

struct RewardOptions {
    // Stochastic reading: apply the sampled operator only with its calling
    // probability. Default is unconditional application.
    bool respects_p = false;
};

// Scores augmentations of D̄_A members against their corresponding critics.
// Losses of the unaugmented instances are computed once up front.
class RewardModel {
public:
    RewardModel(const Dataset& ds, const FoldPlan& plan, const CriticSet& critics, RewardOptions opt = {});

    const UnionEvalSet& eval_set() const { return eval_; }
    // Position of dataset index i inside eval_set(), or -1.
    long position(std::size_t i) const { return pos_[i]; }

    struct Query {
        std::size_t member;  // position in eval_set()
        PolicyTriple triple;
        std::uint64_t seed;  // drives sign / cutout / partner draws
    };

    // Δℓ = mean over the member's critics of loss(x) - loss(x̂).
    std::vector<double> rewards(const std::vector<Query>& queries) const;
    double reward(std::size_t dataset_index, const PolicyTriple& t, std::uint64_t seed) const;

    Image augment(std::size_t member, const PolicyTriple& t, std::uint64_t seed) const;
    const Dataset& dataset() const { return ds_; }
    bool respects_p() const { return opt_.respects_p; }

private:
    const Dataset& ds_;
    const CriticSet& critics_;
    RewardOptions opt_;
    UnionEvalSet eval_;
    std::vector<long> pos_;
    std::vector<std::vector<double>> base_loss_;  // [member][j] for critic_lists[member][j]
};

}  // namespace lbaug

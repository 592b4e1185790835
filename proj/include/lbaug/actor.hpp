#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "lbaug/critic.hpp"
#include "lbaug/network.hpp"
#include "lbaug/ops.hpp"
#include "lbaug/optim.hpp"

namespace lbaug {

inline constexpr int kActorOutputs = kNumOps + kNumOps * kNumPLevels + kNumOps * kNumMLevels;  // 352

enum class ActorMode { E, H };
// moving_average: one running mean of the batch reward. per_label: one running
// mean per distinct label vector. leave_one_out: the mean of the other samples
// drawn for the same instance in the same step.
enum class BaselineKind { none, moving_average, per_label, leave_one_out };

std::string to_string(ActorMode m);
ActorMode actor_mode_from_string(const std::string& s);
std::string to_string(BaselineKind b);
BaselineKind baseline_kind_from_string(const std::string& s);

struct ActorConfig {
    int depth = 3;
    int width = 128;
    double dropout = 0.5;
    ActorMode mode = ActorMode::H;
    int samples = 4;  // actions drawn per instance per step
    BaselineKind baseline = BaselineKind::moving_average;
    double baseline_decay = 0.9;
    // Weight of the policy entropy subtracted from the loss (0 = plain REINFORCE).
    double entropy_bonus = 0.0;
    int fixed_p_level = 5;  // mode E
    int fixed_m_level = 9;  // mode E
    OptimizerConfig optim{OptimizerKind::adam, 1e-3, 0.9, 0.9, 0.999, 1e-8, 0.0};
    int epochs = 60;
    int batch = 32;  // instances per step
    long max_steps = 0;  // 0 = no cap beyond epochs
    std::uint64_t seed = 0;

    void validate() const;
};

nlohmann::json actor_config_to_json(const ActorConfig& c);
ActorConfig actor_config_from_json(const nlohmann::json& j);

// dense(L->width) relu dropout ... dense(width->352); depth counts dense layers.
std::vector<LayerSpec> actor_specs(int num_labels, const ActorConfig& cfg);
Network build_actor(int num_labels, const ActorConfig& cfg);

struct PolicyDistribution {
    std::array<double, kNumOps> op{};
    std::array<std::array<double, kNumPLevels>, kNumOps> p{};
    std::array<std::array<double, kNumMLevels>, kNumOps> m{};
};

// Softmax over each block of one 352-wide logit row.
PolicyDistribution distribution_from_logits(const double* logits, const ActorConfig& cfg);
PolicyDistribution actor_forward(const Network& net, const LabelVector& y, const ActorConfig& cfg);

struct SampledAction {
    PolicyTriple triple;
    double log_prob = 0.0;
};

SampledAction sample_action(const PolicyDistribution& dist, Rng& rng);
double log_prob(const PolicyDistribution& dist, const PolicyTriple& t);

// loss = -(1/N) sum log_prob_i * (reward_i - baseline_i); d loss / d log_prob_i = -(reward_i - baseline_i) / N.
struct ReinforceResult {
    double loss = 0.0;
    std::vector<double> grad;
};
ReinforceResult reinforce_loss(const std::vector<double>& log_probs, const std::vector<double>& rewards,
                               const std::vector<double>& baselines);

// Loss head on the actor's logit output for fixed actions and advantages:
// row r of `logits` scores actions[r] with advantage advantages[r]. Normalised
// by the action count. In mode E the p and m blocks receive no gradient.
double actor_loss_head(const Tensor& logits, const std::vector<PolicyTriple>& actions,
                       const std::vector<double>& advantages, const ActorConfig& cfg, Tensor& grad);

// A reward oracle for a batch of (input row, action) pairs.
struct ActionQuery {
    std::size_t input;  // index into the training inputs
    PolicyTriple triple;
    std::uint64_t seed;
};
using RewardFn = std::function<std::vector<double>(const std::vector<ActionQuery>&)>;

struct ActorLog {
    std::vector<double> epoch_mean_reward;
    long steps = 0;
};

struct TrainedActor {
    Network net;
    ActorConfig cfg;
    ActorLog log;
};

// REINFORCE over the given label inputs (one per evaluation instance).
TrainedActor train_actor_on(const std::vector<LabelVector>& inputs, const RewardFn& reward, const ActorConfig& cfg);

// Trains against critic rewards over the union evaluation set. When
// label_agnostic is set every input is replaced by the all-ones vector.
TrainedActor train_actor(const RewardModel& model, const ActorConfig& cfg, bool label_agnostic = false);

// CSV: labels, <op>_prob x16, <op>_p x16, <op>_m x16 (argmax levels).
std::string export_policy_table(const Network& net, const ActorConfig& cfg, const std::vector<LabelVector>& queries);

void save_actor(const TrainedActor& actor, const std::filesystem::path& dir);
TrainedActor load_actor(const std::filesystem::path& dir);

}  // namespace lbaug

#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lbaug/actor.hpp"
#include "lbaug/config.hpp"
#include "lbaug/critic.hpp"
#include "lbaug/folds.hpp"
#include "lbaug/metrics.hpp"

namespace lbaug {

class StageError : public std::runtime_error {
public:
    StageError(const std::string& stage, const std::string& cause)
        : std::runtime_error("stage " + stage + ": " + cause), stage_(stage) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

// Reward tensor over (op, p_level, m_level).
using RewardTensor = std::array<std::array<std::array<double, kNumMLevels>, kNumPLevels>, kNumOps>;

struct OracleEntry {
    LabelVector query;
    std::size_t matches = 0;
    PolicyTriple best;
    double best_reward = 0.0;
    RewardTensor rewards{};
};

struct OraclePolicy {
    std::vector<OracleEntry> entries;
};

// Lowest (op, p, m) code among the maxima.
PolicyTriple argmax_triple(const RewardTensor& r);
double expected_reward(const PolicyDistribution& d, const RewardTensor& r);

// Mean reward per triple over the evaluation-set members whose label vector
// equals each query, with n_mc seeded draws per member. Without the
// stochastic-p reading the reward does not depend on p and is broadcast.
OraclePolicy brute_force_oracle(const std::vector<LabelVector>& queries, const RewardModel& model, int n_mc,
                                std::uint64_t seed, int threads = 1);

std::vector<LabelVector> single_label_queries(std::size_t L);

// Shared state of one run: data, folds and critics.
struct RunState {
    RunConfig cfg;
    Dataset train;
    Dataset valid;
    FoldPlan plan;
    CriticSet critics;
    std::vector<std::uint64_t> critic_checksums;
};

std::pair<Dataset, Dataset> prepare_data(const RunConfig& cfg);
RunState prepare_run(const RunConfig& cfg, bool with_critics = true);

// Actor for an actor-based policy source; label_agnostic uses mode H with
// all-ones inputs.
TrainedActor run_actor(const RunState& st, PolicySource source, const ActorConfig* override_cfg = nullptr);

// Per-instance, per-epoch augmentation for the final classifier.
AugmentFn make_augment(const PolicyChoice& policy, const Dataset& train, const TrainedActor* actor);

struct FinalResult {
    TrainedClassifier classifier;
    PredictionSet preds;
    MetricReport metrics;
};

FinalResult train_and_evaluate(const RunState& st, const AugmentFn& augment, const ClassifierArch& arch);
PredictionSet predict_set(const Network& net, const Dataset& ds);

struct PolicyRun {
    PolicyChoice policy;
    std::optional<TrainedActor> actor;
    FinalResult final;
    nlohmann::json report;
};

// Actor stage (if any) plus final classifier for one policy on a prepared run.
PolicyRun run_policy(const RunState& st, const PolicyChoice& policy);

// Full pipeline; writes report.json, metrics.json, policy_table.csv and
// checkpoints under cfg.out when it is non-empty.
nlohmann::json run_full(const RunConfig& cfg);

// Rebuilds the config embedded in a report and reruns it.
nlohmann::json rerun_report(const nlohmann::json& report, const std::string& out_dir, int threads);

// Canonical metric JSON text (the reproducibility contract compares these bytes).
std::string metrics_text(const nlohmann::json& report);

LabelStudyTable label_study_run(const RunState& st, double delta, int m_level);

struct CurvePoint {
    int x = 0;
    double mean_reward = 0.0;
    double mA = 0.0;
    std::size_t eval_size = 0;
    std::size_t params = 0;
};

std::vector<CurvePoint> sweep_folds(const RunConfig& cfg, const std::vector<int>& K_list, bool with_final = true);
// Same sweep on a prepared run whose plan has at least max(K_list) folds.
std::vector<CurvePoint> sweep_folds_on(const RunState& full, const std::vector<int>& K_list, bool with_final = true);
std::vector<CurvePoint> sweep_depth(const RunConfig& cfg, const std::vector<int>& depths);
std::string curves_to_csv(const std::string& x_name, const std::vector<CurvePoint>& pts);

struct TransferResult {
    double mA_transfer = 0.0;
    double mA_baseline = 0.0;
    double delta = 0.0;
    std::optional<double> retrained_delta;
};

TransferResult transfer_policy(const RunState& st, const TrainedActor& actor, const ClassifierArch& alt,
                               bool with_retrained);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace lbaug

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "lbaug/actor.hpp"
#include "lbaug/critic.hpp"
#include "lbaug/generator.hpp"

namespace lbaug {

enum class PolicySource { none, random, fixed, lbaug_E, lbaug_H, label_agnostic };

std::string to_string(PolicySource s);

struct PolicyChoice {
    PolicySource source = PolicySource::lbaug_H;
    PolicyTriple fixed;  // used when source == fixed

    // "none", "random", "fixed:<op>:<p>:<m>", "lbaug_E", "lbaug_H", "label_agnostic"
    static PolicyChoice parse(const std::string& text);
    std::string str() const;
};

struct ClassifierArch {
    int conv1 = 8;
    int conv2 = 16;
    int hidden = 64;
    bool operator==(const ClassifierArch&) const = default;
};

struct RunConfig {
    // Data: either generated from `spec` or loaded from the two directories.
    std::optional<SensitivitySpec> spec;
    int n_train = 2000;
    int n_valid = 500;
    int image_size = 16;
    std::string train_dir;
    std::string valid_dir;

    int K = 8;
    double ratio = 0.8;
    std::uint64_t seed = 0;

    ClassifierArch critic_arch;
    TrainHyper critic_hyper;
    ActorConfig actor;
    ClassifierArch final_arch;
    TrainHyper final_hyper;
    PolicyChoice policy;
    bool reward_respects_p = false;

    double study_delta = 0.005;
    int study_m_level = 5;
    int oracle_mc = 1;

    int threads = 1;
    std::string out;

    void validate() const;
};

// Desk-scale defaults on the planted spec.
RunConfig default_run_config();

// Everything except `out` and `threads`, which do not influence results.
nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& file);

std::vector<LayerSpec> specs_for(const ClassifierArch& arch, int image_size, int num_labels);

// Stage seeds, all derived from the run seed.
namespace stage {
inline constexpr std::uint64_t data = 11, folds = 12, critics = 13, actor = 14, final = 15, oracle = 16;
}

}  // namespace lbaug

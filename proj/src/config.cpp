#include "lbaug/config.hpp"

#include <fstream>

namespace lbaug {

std::string to_string(PolicySource s) {
    switch (s) {
        case PolicySource::none: return "none";
        case PolicySource::random: return "random";
        case PolicySource::fixed: return "fixed";
        case PolicySource::lbaug_E: return "lbaug_E";
        case PolicySource::lbaug_H: return "lbaug_H";
        case PolicySource::label_agnostic: return "label_agnostic";
    }
    return "none";
}

PolicyChoice PolicyChoice::parse(const std::string& text) {
    PolicyChoice c;
    if (text.rfind("fixed:", 0) == 0) {
        c.source = PolicySource::fixed;
        c.fixed = parse_triple(text.substr(6));
        return c;
    }
    for (auto s : {PolicySource::none, PolicySource::random, PolicySource::lbaug_E, PolicySource::lbaug_H,
                   PolicySource::label_agnostic})
        if (text == to_string(s)) {
            c.source = s;
            return c;
        }
    throw std::invalid_argument("unknown policy source '" + text + "'");
}

std::string PolicyChoice::str() const {
    return source == PolicySource::fixed ? "fixed:" + to_string(fixed) : to_string(source);
}

void RunConfig::validate() const {
    if (!spec && (train_dir.empty() || valid_dir.empty()))
        throw std::invalid_argument("config needs either a generator spec or train_dir and valid_dir");
    if (spec) spec->validate();
    if (K < 1) throw std::invalid_argument("config: K must be >= 1");
    if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("config: ratio must lie in (0,1)");
    if (image_size < kMinImageSize || image_size % 4 != 0)
        throw std::invalid_argument("config: image_size must be a multiple of 4 and >= 8");
    actor.validate();
    if (study_m_level < 0 || study_m_level >= kNumMLevels) throw std::invalid_argument("config: study_m_level out of range");
    if (oracle_mc < 1) throw std::invalid_argument("config: oracle_mc must be >= 1");
    if (!(study_delta >= 0.0)) throw std::invalid_argument("config: study_delta must be >= 0");
}

RunConfig default_run_config() {
    RunConfig cfg;
    cfg.spec = default_spec();
    return cfg;
}

namespace {

nlohmann::json arch_to_json(const ClassifierArch& a) {
    return {{"conv1", a.conv1}, {"conv2", a.conv2}, {"hidden", a.hidden}};
}

ClassifierArch arch_from_json(const nlohmann::json& j) {
    ClassifierArch a;
    a.conv1 = j.value("conv1", a.conv1);
    a.conv2 = j.value("conv2", a.conv2);
    a.hidden = j.value("hidden", a.hidden);
    return a;
}

}  // namespace

nlohmann::json config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    if (cfg.spec) {
        j["data"] = {{"spec", spec_to_json(*cfg.spec)},
                     {"n_train", cfg.n_train},
                     {"n_valid", cfg.n_valid},
                     {"image_size", cfg.image_size}};
    } else {
        j["data"] = {{"train_dir", cfg.train_dir}, {"valid_dir", cfg.valid_dir}, {"image_size", cfg.image_size}};
    }
    j["K"] = cfg.K;
    j["ratio"] = cfg.ratio;
    j["seed"] = cfg.seed;
    j["critic"] = {{"arch", arch_to_json(cfg.critic_arch)}, {"train", hyper_to_json(cfg.critic_hyper)}};
    j["actor"] = actor_config_to_json(cfg.actor);
    j["final"] = {{"arch", arch_to_json(cfg.final_arch)}, {"train", hyper_to_json(cfg.final_hyper)}};
    j["policy"] = cfg.policy.str();
    j["reward_respects_p"] = cfg.reward_respects_p;
    j["study"] = {{"delta", cfg.study_delta}, {"m_level", cfg.study_m_level}};
    j["oracle_mc"] = cfg.oracle_mc;
    return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    cfg.spec.reset();
    if (j.contains("data")) {
        const auto& d = j.at("data");
        if (d.contains("spec")) cfg.spec = spec_from_json(d.at("spec"));
        cfg.n_train = d.value("n_train", cfg.n_train);
        cfg.n_valid = d.value("n_valid", cfg.n_valid);
        cfg.image_size = d.value("image_size", cfg.image_size);
        cfg.train_dir = d.value("train_dir", std::string());
        cfg.valid_dir = d.value("valid_dir", std::string());
    } else {
        cfg.spec = default_spec();
    }
    cfg.K = j.value("K", cfg.K);
    cfg.ratio = j.value("ratio", cfg.ratio);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("critic")) {
        cfg.critic_arch = arch_from_json(j["critic"].value("arch", nlohmann::json::object()));
        cfg.critic_hyper = hyper_from_json(j["critic"].value("train", nlohmann::json::object()));
    }
    if (j.contains("actor")) cfg.actor = actor_config_from_json(j.at("actor"));
    if (j.contains("final")) {
        cfg.final_arch = arch_from_json(j["final"].value("arch", nlohmann::json::object()));
        cfg.final_hyper = hyper_from_json(j["final"].value("train", nlohmann::json::object()));
    }
    if (j.contains("policy")) cfg.policy = PolicyChoice::parse(j.at("policy").get<std::string>());
    cfg.reward_respects_p = j.value("reward_respects_p", cfg.reward_respects_p);
    if (j.contains("study")) {
        cfg.study_delta = j["study"].value("delta", cfg.study_delta);
        cfg.study_m_level = j["study"].value("m_level", cfg.study_m_level);
    }
    cfg.oracle_mc = j.value("oracle_mc", cfg.oracle_mc);
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open config " + file.string());
    return config_from_json(nlohmann::json::parse(in));
}

std::vector<LayerSpec> specs_for(const ClassifierArch& arch, int image_size, int num_labels) {
    return classifier_specs(image_size, num_labels, arch.conv1, arch.conv2, arch.hidden);
}

}  // namespace lbaug

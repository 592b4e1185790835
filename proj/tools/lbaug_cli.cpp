// Command-line front end. Every subcommand reads the same RunConfig and
// writes its artifacts under --out.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "lbaug/checkpoint.hpp"
#include "lbaug/dataset_io.hpp"
#include "lbaug/pipeline.hpp"

namespace fs = std::filesystem;
using namespace lbaug;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "lbaug_out";
    int threads = 1;
};

RunConfig resolve(const Globals& g) {
    RunConfig cfg = g.config.empty() ? default_run_config() : load_config(g.config);
    if (g.seed) cfg.seed = *g.seed;
    cfg.out = g.out;
    cfg.threads = g.threads;
    return cfg;
}

void write_file(const fs::path& file, const std::string& text) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << text;
}

nlohmann::json read_json(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    return nlohmann::json::parse(in);
}

// Data and folds are cheap and deterministic; critics are reused from <out>
// when a previous train-critics call left them there.
RunState state_for(const RunConfig& cfg, bool with_critics) {
    const fs::path dir = fs::path(cfg.out) / "critics";
    if (!with_critics || !fs::exists(dir / "critics.json")) return prepare_run(cfg, with_critics);
    RunState st = prepare_run(cfg, false);
    st.critics = load_critics(dir);
    if (static_cast<int>(st.critics.critics.size()) != cfg.K)
        throw StageError("train-critics", "stored critics do not match K=" + std::to_string(cfg.K));
    st.critic_checksums = st.critics.checksums();
    return st;
}

std::vector<int> parse_ints(const std::string& text) {
    std::vector<int> v;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) v.push_back(std::stoi(item));
    return v;
}

bool actor_based(PolicySource s) {
    return s == PolicySource::lbaug_E || s == PolicySource::lbaug_H || s == PolicySource::label_agnostic;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Label-based automatic augmentation for multi-label image classification"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed_value = 0;
    app.add_option("--config", g.config, "RunConfig JSON file")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed_value, "run seed (overrides the config)");
    app.add_option("--out", g.out, "output directory");
    app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);

    std::string policy_text;
    auto add_policy = [&](CLI::App* sub) {
        sub->add_option("--policy", policy_text, "none|random|fixed:<op>:<p>:<m>|lbaug_E|lbaug_H|label_agnostic");
    };

    auto* gen = app.add_subcommand("gen-data", "generate the planted dataset as PNG directories");
    auto* folds = app.add_subcommand("folds", "build the stratified fold plan");
    auto* critics = app.add_subcommand("train-critics", "train one critic per fold");
    auto* actor = app.add_subcommand("train-actor", "train the actor against the frozen critics");
    add_policy(actor);
    auto* final = app.add_subcommand("train-final", "train the final classifier under a policy");
    add_policy(final);
    auto* eval = app.add_subcommand("eval", "evaluate the stored final classifier");
    auto* oracle = app.add_subcommand("oracle", "exhaustive reward scan per single-label query");
    auto* study = app.add_subcommand("label-study", "per-operator, per-label gain/drop table");
    double delta = -1.0;
    int m_level = -1;
    study->add_option("--delta", delta, "verdict threshold in mA units");
    study->add_option("--m-level", m_level, "operator magnitude level");
    auto* sfolds = app.add_subcommand("sweep-folds", "actor reward and mA versus fold count");
    std::string k_list = "1,2,4,8";
    sfolds->add_option("--k", k_list, "ascending comma-separated fold counts");
    auto* sdepth = app.add_subcommand("sweep-depth", "final mA versus actor depth");
    std::string depth_list = "2,3,4,5";
    sdepth->add_option("--depths", depth_list, "comma-separated depths in [2,5]");
    auto* transfer = app.add_subcommand("transfer", "reuse a trained actor with another classifier");
    std::string actor_dir, arch_text = "16,32,128";
    bool retrained = false;
    transfer->add_option("--actor", actor_dir, "actor checkpoint directory")->required();
    transfer->add_option("--arch", arch_text, "conv1,conv2,hidden of the other classifier");
    transfer->add_flag("--retrained", retrained, "also retrain critics and actor with that architecture");
    auto* report = app.add_subcommand("report", "full run, or rerun of an existing report");
    std::string from;
    report->add_option("--from", from, "existing report.json to rerun and verify")->check(CLI::ExistingFile);
    add_policy(report);

    CLI11_PARSE(app, argc, argv);
    if (seed_opt->count()) g.seed = seed_value;

    try {
        RunConfig cfg = resolve(g);
        if (!policy_text.empty()) cfg.policy = PolicyChoice::parse(policy_text);
        const fs::path out(cfg.out);
        fs::create_directories(out);

        if (*gen) {
            auto [tr, va] = prepare_data(cfg);
            save_dataset(tr, out / "data" / "train");
            save_dataset(va, out / "data" / "valid");
            write_file(out / "config.json", config_to_json(cfg).dump(2) + "\n");
            std::cout << "wrote " << tr.size() << " train and " << va.size() << " valid images\n";
        } else if (*folds) {
            RunState st = prepare_run(cfg, false);
            write_file(out / "folds.json", plan_to_json(st.plan, st.train).dump() + "\n");
            std::cout << "K=" << st.plan.K << " union eval set " << union_eval_set(st.plan).indices.size() << "\n";
        } else if (*critics) {
            RunState st = prepare_run(cfg, true);
            save_critics(st.critics, out / "critics");
            for (std::size_t k = 0; k < st.critics.loss_curves.size(); ++k)
                std::cout << "critic " << k << " final loss " << st.critics.loss_curves[k].back() << "\n";
        } else if (*actor) {
            if (!actor_based(cfg.policy.source)) throw std::invalid_argument("train-actor needs an actor-based policy");
            RunState st = state_for(cfg, true);
            TrainedActor a = run_actor(st, cfg.policy.source);
            save_actor(a, out / "actor");
            write_file(out / "policy_table.csv",
                       export_policy_table(a.net, a.cfg, single_label_queries(st.train.num_labels())));
            std::cout << "final mean reward " << a.log.epoch_mean_reward.back() << "\n";
        } else if (*final) {
            const bool needs_actor = actor_based(cfg.policy.source);
            RunState st = state_for(cfg, needs_actor && !fs::exists(out / "actor" / "actor.json"));
            std::optional<TrainedActor> a;
            if (needs_actor)
                a = fs::exists(out / "actor" / "actor.json") ? load_actor(out / "actor") : run_actor(st, cfg.policy.source);
            FinalResult r = train_and_evaluate(st, make_augment(cfg.policy, st.train, a ? &*a : nullptr), cfg.final_arch);
            save_network(r.classifier.net, out / "final_classifier.json");
            nlohmann::json rep{{"config", config_to_json(cfg)}, {"metrics", report_to_json(r.metrics, st.train.label_names)}};
            write_file(out / "report.json", rep.dump(2) + "\n");
            write_file(out / "metrics.json", metrics_text(rep));
            std::cout << "mA " << r.metrics.mA << "\n";
        } else if (*eval) {
            Network net = load_network(out / "final_classifier.json");
            auto [tr, va] = prepare_data(cfg);
            const MetricReport m = evaluate(predict_set(net, va));
            const std::string text = report_to_json(m, va.label_names).dump(2) + "\n";
            write_file(out / "metrics.json", text);
            std::cout << text;
        } else if (*oracle) {
            RunState st = state_for(cfg, true);
            RewardModel model(st.train, st.plan, st.critics, {cfg.reward_respects_p});
            const auto o = brute_force_oracle(single_label_queries(st.train.num_labels()), model, cfg.oracle_mc,
                                              derive_seed(cfg.seed, stage::oracle), cfg.threads);
            nlohmann::json j = nlohmann::json::array();
            for (const auto& e : o.entries) {
                j.push_back({{"query", label_string(e.query)},
                             {"matches", e.matches},
                             {"best", to_string(e.best)},
                             {"best_reward", e.best_reward}});
                std::cout << label_string(e.query) << " " << to_string(e.best) << " " << e.best_reward << "\n";
            }
            write_file(out / "oracle.json", j.dump(2) + "\n");
        } else if (*study) {
            RunState st = prepare_run(cfg, false);
            const auto t = label_study_run(st, delta >= 0 ? delta : cfg.study_delta, m_level >= 0 ? m_level : cfg.study_m_level);
            const std::string csv = study_to_csv(t, st.train.label_names);
            write_file(out / "study.csv", csv);
            std::cout << csv;
        } else if (*sfolds) {
            const std::string csv = curves_to_csv("K", sweep_folds(cfg, parse_ints(k_list)));
            write_file(out / "curves.csv", csv);
            std::cout << csv;
        } else if (*sdepth) {
            const std::string csv = curves_to_csv("depth", sweep_depth(cfg, parse_ints(depth_list)));
            write_file(out / "curves.csv", csv);
            std::cout << csv;
        } else if (*transfer) {
            const auto dims = parse_ints(arch_text);
            if (dims.size() != 3) throw std::invalid_argument("--arch needs conv1,conv2,hidden");
            const TrainedActor a = load_actor(actor_dir);
            RunState st = prepare_run(cfg, false);
            const auto r = transfer_policy(st, a, {dims[0], dims[1], dims[2]}, retrained);
            nlohmann::json j{{"mA_transfer", r.mA_transfer}, {"mA_baseline", r.mA_baseline}, {"delta", r.delta}};
            if (r.retrained_delta) j["retrained_delta"] = *r.retrained_delta;
            write_file(out / "transfer.json", j.dump(2) + "\n");
            std::cout << j.dump(2) << "\n";
        } else if (*report) {
            if (from.empty()) {
                const auto rep = run_full(cfg);
                std::cout << metrics_text(rep);
            } else {
                const auto old = read_json(from);
                const auto rep = rerun_report(old, cfg.out, cfg.threads);
                if (metrics_text(rep) != metrics_text(old)) {
                    std::cerr << "report: rerun metrics differ from " << from << "\n";
                    return 3;
                }
                std::cout << "report: metrics reproduced byte-identically\n";
            }
        }
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#include "lbaug/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "lbaug/checkpoint.hpp"
#include "lbaug/dataset_io.hpp"
#include "lbaug/parallel.hpp"

namespace lbaug {

namespace {

template <class Fn>
auto run_stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

void write_text(const std::filesystem::path& file, const std::string& text) {
    std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << text;
}

ActorConfig actor_cfg_for(const RunState& st, PolicySource source, const ActorConfig* override_cfg) {
    ActorConfig a = override_cfg ? *override_cfg : st.cfg.actor;
    a.mode = source == PolicySource::lbaug_E ? ActorMode::E : ActorMode::H;
    // Independent but reproducible streams per policy source.
    a.seed = derive_seed(derive_seed(st.cfg.seed, stage::actor), a.seed * 16 + static_cast<std::uint64_t>(source));
    return a;
}

bool actor_based(PolicySource s) {
    return s == PolicySource::lbaug_E || s == PolicySource::lbaug_H || s == PolicySource::label_agnostic;
}

}  // namespace

PolicyTriple argmax_triple(const RewardTensor& r) {
    PolicyTriple best{OpId::ShearX, 0, 0};
    double best_v = r[0][0][0];
    for (int j = 0; j < kNumOps; ++j)
        for (int k = 0; k < kNumPLevels; ++k)
            for (int l = 0; l < kNumMLevels; ++l)
                if (r[j][k][l] > best_v) {
                    best_v = r[j][k][l];
                    best = {op_from_code(j), k, l};
                }
    return best;
}

double expected_reward(const PolicyDistribution& d, const RewardTensor& r) {
    double e = 0.0;
    for (int j = 0; j < kNumOps; ++j)
        for (int k = 0; k < kNumPLevels; ++k)
            for (int l = 0; l < kNumMLevels; ++l) e += d.op[j] * d.p[j][k] * d.m[j][l] * r[j][k][l];
    return e;
}

std::vector<LabelVector> single_label_queries(std::size_t L) {
    std::vector<LabelVector> q;
    for (std::size_t l = 0; l < L; ++l) {
        LabelVector y(L, 0);
        y[l] = 1;
        q.push_back(y);
    }
    return q;
}

OraclePolicy brute_force_oracle(const std::vector<LabelVector>& queries, const RewardModel& model, int n_mc,
                                std::uint64_t seed, int threads) {
    if (n_mc < 1) throw std::invalid_argument("oracle: n_mc must be >= 1");
    const auto& eval = model.eval_set();
    const auto& ds = model.dataset();
    OraclePolicy oracle;
    oracle.entries.resize(queries.size());
    std::vector<std::vector<std::size_t>> members(queries.size());
    for (std::size_t q = 0; q < queries.size(); ++q) {
        for (std::size_t m = 0; m < eval.indices.size(); ++m)
            if (ds.instances[eval.indices[m]].labels == queries[q]) members[q].push_back(m);
        if (members[q].empty())
            throw std::invalid_argument("oracle: query " + label_string(queries[q]) + " matches no evaluation instance");
    }
    const bool per_p = model.respects_p();
    const int p_count = per_p ? kNumPLevels : 1;
    // One task per (query, op); every task owns its output slice.
    parallel_for(queries.size() * kNumOps, threads, [&](std::size_t task) {
        const std::size_t q = task / kNumOps;
        const int j = static_cast<int>(task % kNumOps);
        auto& entry = oracle.entries[q];
        for (int k = 0; k < p_count; ++k)
            for (int l = 0; l < kNumMLevels; ++l) {
                const PolicyTriple t{op_from_code(j), per_p ? k : kNumPLevels - 1, l};
                std::vector<RewardModel::Query> qs;
                for (std::size_t m : members[q])
                    for (int s = 0; s < n_mc; ++s)
                        qs.push_back({m, t,
                                      derive_seed(seed, ((static_cast<std::uint64_t>(q) * kNumOps + j) * 1000 + l) *
                                                                1000003ULL +
                                                            m * 131 + s * 7919 + k * 104729)});
                const auto r = model.rewards(qs);
                const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
                if (per_p)
                    entry.rewards[j][k][l] = mean;
                else
                    for (int kk = 0; kk < kNumPLevels; ++kk) entry.rewards[j][kk][l] = mean;
            }
    });
    for (std::size_t q = 0; q < queries.size(); ++q) {
        auto& e = oracle.entries[q];
        e.query = queries[q];
        e.matches = members[q].size();
        e.best = argmax_triple(e.rewards);
        e.best_reward = e.rewards[op_code(e.best.op)][e.best.p_level][e.best.m_level];
    }
    return oracle;
}

std::pair<Dataset, Dataset> prepare_data(const RunConfig& cfg) {
    return run_stage("data", [&] {
        if (cfg.spec)
            return generate_synthetic(*cfg.spec, cfg.n_train, cfg.n_valid, cfg.image_size,
                                      derive_seed(cfg.seed, stage::data));
        Dataset tr = load_dataset(cfg.train_dir, Split::train);
        Dataset va = load_dataset(cfg.valid_dir, Split::valid);
        if (tr.label_names != va.label_names) throw std::invalid_argument("train and valid label names differ");
        if (tr.empty() || tr.instances[0].image.height != cfg.image_size)
            throw std::invalid_argument("loaded images do not match image_size");
        return std::make_pair(std::move(tr), std::move(va));
    });
}

RunState prepare_run(const RunConfig& cfg, bool with_critics) {
    cfg.validate();
    RunState st;
    st.cfg = cfg;
    std::tie(st.train, st.valid) = prepare_data(cfg);
    st.plan = run_stage("folds", [&] { return make_fold_plan(st.train, cfg.K, cfg.ratio, derive_seed(cfg.seed, stage::folds)); });
    if (with_critics) {
        st.critics = run_stage("train-critics", [&] {
            return train_critics(st.train, st.plan,
                                 specs_for(cfg.critic_arch, cfg.image_size, static_cast<int>(st.train.num_labels())),
                                 cfg.critic_hyper, derive_seed(cfg.seed, stage::critics), cfg.threads);
        });
        st.critic_checksums = st.critics.checksums();
    }
    return st;
}

TrainedActor run_actor(const RunState& st, PolicySource source, const ActorConfig* override_cfg) {
    if (!actor_based(source)) throw std::invalid_argument("run_actor: policy source has no actor");
    return run_stage("train-actor", [&] {
        RewardModel model(st.train, st.plan, st.critics, {st.cfg.reward_respects_p});
        auto actor = train_actor(model, actor_cfg_for(st, source, override_cfg), source == PolicySource::label_agnostic);
        if (st.critics.checksums() != st.critic_checksums)
            throw std::logic_error("critic parameters changed during actor training");
        return actor;
    });
}

AugmentFn make_augment(const PolicyChoice& policy, const Dataset& train, const TrainedActor* actor) {
    switch (policy.source) {
        case PolicySource::none: return nullptr;
        case PolicySource::random:
            return [&train](std::size_t i, Rng& rng) {
                PolicyTriple t{op_from_code(static_cast<int>(rng.below(kNumOps))), static_cast<int>(rng.below(kNumPLevels)),
                               static_cast<int>(rng.below(kNumMLevels))};
                return apply_policy(t, train.instances[i].image, &train, rng);
            };
        case PolicySource::fixed: {
            const PolicyTriple t = policy.fixed;
            return [&train, t](std::size_t i, Rng& rng) { return apply_policy(t, train.instances[i].image, &train, rng); };
        }
        default: break;
    }
    if (!actor) throw std::invalid_argument("make_augment: actor policy without a trained actor");
    // Distributions depend only on the label vector; cache them per signature.
    auto cache = std::make_shared<std::map<LabelVector, PolicyDistribution>>();
    const bool agnostic = policy.source == PolicySource::label_agnostic;
    const std::size_t L = train.num_labels();
    return [&train, actor, cache, agnostic, L](std::size_t i, Rng& rng) {
        const LabelVector y = agnostic ? LabelVector(L, 1) : train.instances[i].labels;
        auto it = cache->find(y);
        if (it == cache->end()) it = cache->emplace(y, actor_forward(actor->net, y, actor->cfg)).first;
        const auto a = sample_action(it->second, rng);
        return apply_policy(a.triple, train.instances[i].image, &train, rng);
    };
}

PredictionSet predict_set(const Network& net, const Dataset& ds) {
    std::vector<const Image*> imgs;
    for (const auto& inst : ds.instances) imgs.push_back(&inst.image);
    Tensor s = predict_scores(net, imgs);
    PredictionSet p;
    p.n = static_cast<int>(ds.size());
    p.num_labels = static_cast<int>(ds.num_labels());
    p.scores = s.data;
    for (const auto& inst : ds.instances) p.targets.insert(p.targets.end(), inst.labels.begin(), inst.labels.end());
    return p;
}

FinalResult train_and_evaluate(const RunState& st, const AugmentFn& augment, const ClassifierArch& arch) {
    FinalResult r;
    std::vector<std::size_t> all(st.train.size());
    std::iota(all.begin(), all.end(), 0);
    r.classifier = run_stage("train-final", [&] {
        return train_classifier(st.train, all, specs_for(arch, st.cfg.image_size, static_cast<int>(st.train.num_labels())),
                                st.cfg.final_hyper, derive_seed(st.cfg.seed, stage::final), augment);
    });
    run_stage("eval", [&] {
        r.preds = predict_set(r.classifier.net, st.valid);
        r.metrics = evaluate(r.preds);
        return 0;
    });
    return r;
}

PolicyRun run_policy(const RunState& st, const PolicyChoice& policy) {
    PolicyRun run;
    run.policy = policy;
    if (actor_based(policy.source)) run.actor = run_actor(st, policy.source);
    run.final = train_and_evaluate(st, make_augment(policy, st.train, run.actor ? &*run.actor : nullptr), st.cfg.final_arch);
    if (!st.critic_checksums.empty() && st.critics.checksums() != st.critic_checksums)
        throw StageError("train-final", "critic parameters changed");

    RunConfig echoed = st.cfg;
    echoed.policy = policy;
    nlohmann::json rep;
    rep["config"] = config_to_json(echoed);
    rep["metrics"] = report_to_json(run.final.metrics, st.train.label_names);
    rep["final_train_loss"] = run.final.classifier.loss_curve.back();
    nlohmann::json critic_losses = nlohmann::json::array();
    for (const auto& c : st.critics.loss_curves) critic_losses.push_back(c.empty() ? 0.0 : c.back());
    rep["critics"] = {{"final_train_loss", critic_losses}, {"eval_set_size", union_eval_set(st.plan).indices.size()}};
    if (run.actor) rep["actor"] = {{"epoch_mean_reward", run.actor->log.epoch_mean_reward}, {"steps", run.actor->log.steps}};
    run.report = rep;
    return run;
}

nlohmann::json run_full(const RunConfig& cfg) {
    const bool needs_critics = actor_based(cfg.policy.source);
    RunState st = prepare_run(cfg, needs_critics);
    PolicyRun run = run_policy(st, cfg.policy);
    if (!cfg.out.empty()) {
        const std::filesystem::path out(cfg.out);
        write_text(out / "report.json", run.report.dump(2) + "\n");
        write_text(out / "metrics.json", metrics_text(run.report));
        write_text(out / "folds.json", plan_to_json(st.plan, st.train).dump() + "\n");
        if (needs_critics) save_critics(st.critics, out / "critics");
        if (run.actor) {
            save_actor(*run.actor, out / "actor");
            write_text(out / "policy_table.csv",
                       export_policy_table(run.actor->net, run.actor->cfg, single_label_queries(st.train.num_labels())));
        }
        save_network(run.final.classifier.net, out / "final_classifier.json");
    }
    return run.report;
}

std::string metrics_text(const nlohmann::json& report) { return report.at("metrics").dump(2) + "\n"; }

nlohmann::json rerun_report(const nlohmann::json& report, const std::string& out_dir, int threads) {
    RunConfig cfg = config_from_json(report.at("config"));
    cfg.out = out_dir;
    cfg.threads = threads;
    return run_full(cfg);
}

LabelStudyTable label_study_run(const RunState& st, double delta, int m_level) {
    const auto base = train_and_evaluate(st, nullptr, st.cfg.final_arch);
    std::vector<PredictionSet> per(kNumOps);
    // Trainings are independent; each writes only its own slot.
    parallel_for(kNumOps, st.cfg.threads, [&](std::size_t j) {
        PolicyChoice c;
        c.source = PolicySource::fixed;
        c.fixed = {op_from_code(static_cast<int>(j)), kNumPLevels - 1, m_level};
        per[j] = train_and_evaluate(st, make_augment(c, st.train, nullptr), st.cfg.final_arch).preds;
    });
    std::map<OpId, PredictionSet> by_op;
    for (int j = 0; j < kNumOps; ++j) by_op.emplace(op_from_code(j), std::move(per[j]));
    return label_study(base.preds, by_op, delta);
}

std::vector<CurvePoint> sweep_folds(const RunConfig& cfg, const std::vector<int>& K_list, bool with_final) {
    if (K_list.empty()) throw std::invalid_argument("sweep_folds: empty K list");
    if (!std::is_sorted(K_list.begin(), K_list.end())) throw std::invalid_argument("sweep_folds: K list must ascend");
    // Fold k and its critic depend only on k, so the largest plan serves every prefix.
    RunConfig big = cfg;
    big.K = K_list.back();
    return sweep_folds_on(prepare_run(big, true), K_list, with_final);
}

std::vector<CurvePoint> sweep_folds_on(const RunState& full, const std::vector<int>& K_list, bool with_final) {
    if (K_list.empty()) throw std::invalid_argument("sweep_folds: empty K list");
    if (!std::is_sorted(K_list.begin(), K_list.end())) throw std::invalid_argument("sweep_folds: K list must ascend");
    if (K_list.front() < 1 || K_list.back() > full.plan.K)
        throw std::invalid_argument("sweep_folds: K outside the prepared plan");
    const RunConfig& cfg = full.cfg;
    std::vector<CurvePoint> pts;
    for (int K : K_list) {
        RunState st;
        st.cfg = cfg;
        st.cfg.K = K;
        st.train = full.train;
        st.valid = full.valid;
        st.plan = full.plan;
        st.plan.K = K;
        st.plan.folds.resize(K);
        for (auto& list : st.plan.critics) list.erase(std::remove_if(list.begin(), list.end(), [K](int k) { return k >= K; }), list.end());
        st.critics.critics.assign(full.critics.critics.begin(), full.critics.critics.begin() + K);
        st.critics.loss_curves.assign(full.critics.loss_curves.begin(), full.critics.loss_curves.begin() + K);
        st.critic_checksums = st.critics.checksums();
        const auto actor = run_actor(st, PolicySource::lbaug_H);
        CurvePoint p;
        p.x = K;
        p.mean_reward = actor.log.epoch_mean_reward.back();
        p.eval_size = union_eval_set(st.plan).indices.size();
        p.params = actor.net.param_count();
        if (with_final) {
            PolicyChoice c;
            c.source = PolicySource::lbaug_H;
            p.mA = train_and_evaluate(st, make_augment(c, st.train, &actor), cfg.final_arch).metrics.mA;
        }
        pts.push_back(p);
    }
    return pts;
}

std::vector<CurvePoint> sweep_depth(const RunConfig& cfg, const std::vector<int>& depths) {
    for (int d : depths)
        if (d < 2 || d > 5) throw std::invalid_argument("sweep_depth: depths must lie in [2,5]");
    RunState st = prepare_run(cfg, true);
    std::vector<CurvePoint> pts;
    for (int d : depths) {
        ActorConfig a = cfg.actor;
        a.depth = d;
        const auto actor = run_actor(st, PolicySource::lbaug_H, &a);
        PolicyChoice c;
        c.source = PolicySource::lbaug_H;
        CurvePoint p;
        p.x = d;
        p.mean_reward = actor.log.epoch_mean_reward.back();
        p.eval_size = union_eval_set(st.plan).indices.size();
        p.params = actor.net.param_count();
        p.mA = train_and_evaluate(st, make_augment(c, st.train, &actor), cfg.final_arch).metrics.mA;
        pts.push_back(p);
    }
    return pts;
}

std::string curves_to_csv(const std::string& x_name, const std::vector<CurvePoint>& pts) {
    std::ostringstream out;
    out.precision(10);
    out << x_name << ",mean_reward,mA,eval_set_size,actor_params\n";
    for (const auto& p : pts) out << p.x << ',' << p.mean_reward << ',' << p.mA << ',' << p.eval_size << ',' << p.params << '\n';
    return out.str();
}

TransferResult transfer_policy(const RunState& st, const TrainedActor& actor, const ClassifierArch& alt,
                               bool with_retrained) {
    if (actor.net.input_shape.at(0) != static_cast<int>(st.train.num_labels()))
        throw std::invalid_argument("transfer: actor label count does not match the dataset");
    PolicyChoice c;
    c.source = actor.cfg.mode == ActorMode::E ? PolicySource::lbaug_E : PolicySource::lbaug_H;
    TransferResult r;
    r.mA_transfer = train_and_evaluate(st, make_augment(c, st.train, &actor), alt).metrics.mA;
    r.mA_baseline = train_and_evaluate(st, nullptr, alt).metrics.mA;
    r.delta = r.mA_transfer - r.mA_baseline;
    if (with_retrained) {
        // Critics and actor retrained with the alternative architecture.
        RunConfig cfg = st.cfg;
        cfg.critic_arch = alt;
        cfg.final_arch = alt;
        RunState st2 = prepare_run(cfg, true);
        const auto actor2 = run_actor(st2, c.source);
        r.retrained_delta = train_and_evaluate(st2, make_augment(c, st2.train, &actor2), alt).metrics.mA - r.mA_baseline;
    }
    return r;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman: need two equal-length samples");
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
            for (std::size_t t = i; t <= j; ++t) r[idx[t]] = 0.5 * (i + j) + 1.0;
            i = j + 1;
        }
        return r;
    };
    const auto rx = ranks(x), ry = ranks(y);
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / rx.size();
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / ry.size();
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace lbaug

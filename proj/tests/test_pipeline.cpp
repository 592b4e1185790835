#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "lbaug/pipeline.hpp"

using namespace lbaug;
namespace fs = std::filesystem;

namespace {

RunConfig tiny(std::uint64_t seed = 1) {
    RunConfig c;
    c.spec = two_label_spec();
    c.n_train = 200;
    c.n_valid = 60;
    c.image_size = 8;
    c.K = 2;
    c.seed = seed;
    c.critic_hyper.epochs = 4;
    c.final_hyper.epochs = 4;
    c.actor.epochs = 2;
    c.actor.width = 16;
    c.threads = 2;
    return c;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("lbaug_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& file) {
    std::ifstream in(file);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Oracle, ArgmaxTiesGoToTheLowestCode) {
    RewardTensor r{};
    EXPECT_EQ(argmax_triple(r), (PolicyTriple{OpId::ShearX, 0, 0}));
    r[3][2][1] = 1.0;
    r[5][0][0] = 1.0;
    EXPECT_EQ(argmax_triple(r), (PolicyTriple{OpId::TranslateY, 2, 1}));
    // Adding a constant leaves the argmax unchanged.
    for (auto& a : r)
        for (auto& b : a)
            for (double& v : b) v += 3.5;
    EXPECT_EQ(argmax_triple(r), (PolicyTriple{OpId::TranslateY, 2, 1}));
}

TEST(Oracle, ExpectedRewardHandValue) {
    RewardTensor r{};
    r[op_code(OpId::Color)][4][2] = 2.0;
    PolicyDistribution d{};
    d.op[op_code(OpId::Color)] = 0.5;
    d.p[op_code(OpId::Color)][4] = 0.5;
    d.m[op_code(OpId::Color)][2] = 1.0;
    EXPECT_DOUBLE_EQ(expected_reward(d, r), 0.5);
}

TEST(Pipeline, SpearmanHandValues) {
    EXPECT_DOUBLE_EQ(spearman({1, 2, 4, 8}, {0.1, 0.2, 0.3, 0.4}), 1.0);
    EXPECT_DOUBLE_EQ(spearman({1, 2, 4, 8}, {0.4, 0.3, 0.2, 0.1}), -1.0);
    EXPECT_DOUBLE_EQ(spearman({1, 2, 3}, {1, 1, 2}), std::sqrt(0.75));
    EXPECT_EQ(spearman({1, 2, 3}, {5, 5, 5}), 0.0);
    EXPECT_THROW(spearman({1}, {1}), std::invalid_argument);
}

TEST(Config, PolicyChoiceParsing) {
    EXPECT_EQ(PolicyChoice::parse("fixed:Rotate:10:5").str(), "fixed:Rotate:10:5");
    EXPECT_EQ(PolicyChoice::parse("label_agnostic").source, PolicySource::label_agnostic);
    EXPECT_THROW(PolicyChoice::parse("greedy"), std::invalid_argument);
    EXPECT_THROW(PolicyChoice::parse("fixed:Rotate:12:5"), std::out_of_range);
}

TEST(Config, JsonRoundTripAndValidation) {
    RunConfig c = tiny();
    c.policy = PolicyChoice::parse("fixed:Cutout:7:3");
    c.reward_respects_p = true;
    const auto j = config_to_json(c);
    EXPECT_EQ(config_to_json(config_from_json(nlohmann::json::parse(j.dump()))), j);
    auto bad = j;
    bad["K"] = 0;
    EXPECT_THROW(config_from_json(bad), std::invalid_argument);
    RunConfig nodata = tiny();
    nodata.spec.reset();
    EXPECT_THROW(nodata.validate(), std::invalid_argument);
}

TEST(Pipeline, BaselineRunWritesReportAndReproduces) {
    RunConfig c = tiny();
    c.policy = PolicyChoice::parse("none");
    c.out = scratch("none").string();
    const auto rep = run_full(c);
    EXPECT_EQ(rep.at("config"), config_to_json(c));
    EXPECT_TRUE(fs::exists(fs::path(c.out) / "report.json"));
    EXPECT_TRUE(fs::exists(fs::path(c.out) / "metrics.json"));
    EXPECT_FALSE(fs::exists(fs::path(c.out) / "critics"));  // no actor stages for `none`
    const auto again = rerun_report(rep, scratch("none2").string(), 1);
    EXPECT_EQ(metrics_text(again), metrics_text(rep));
    EXPECT_EQ(slurp(fs::path(c.out) / "metrics.json"), metrics_text(rep));
}

TEST(Pipeline, ActorRunKeepsCriticsFrozenAndExportsPolicy) {
    RunConfig c = tiny();
    c.policy = PolicyChoice::parse("lbaug_H");
    RunState st = prepare_run(c, true);
    const auto before = st.critics.checksums();
    const auto run = run_policy(st, c.policy);
    EXPECT_EQ(st.critics.checksums(), before);
    ASSERT_TRUE(run.actor.has_value());
    EXPECT_EQ(run.actor->log.epoch_mean_reward.size(), 2u);
    EXPECT_TRUE(run.report.contains("actor"));
    const auto e = run_policy(st, PolicyChoice::parse("lbaug_E"));
    EXPECT_EQ(e.actor->cfg.mode, ActorMode::E);
}

TEST(Pipeline, PolicySourcesShareTheProtocol) {
    RunConfig c = tiny();
    RunState st = prepare_run(c, false);
    const auto none_a = run_policy(st, PolicyChoice::parse("none"));
    const auto none_b = run_policy(st, PolicyChoice::parse("none"));
    EXPECT_EQ(none_a.report.dump(), none_b.report.dump());
    const auto fixed = run_policy(st, PolicyChoice::parse("fixed:Invert:10:5"));
    const auto random = run_policy(st, PolicyChoice::parse("random"));
    EXPECT_NE(fixed.final.classifier.net.checksum(), none_a.final.classifier.net.checksum());
    EXPECT_NE(random.final.classifier.net.checksum(), none_a.final.classifier.net.checksum());
}

TEST(Pipeline, OracleIdentityColumnIsZero) {
    RunConfig c = tiny();
    RunState st = prepare_run(c, true);
    RewardModel model(st.train, st.plan, st.critics);
    const auto o = brute_force_oracle(single_label_queries(2), model, 1, 3, 2);
    ASSERT_EQ(o.entries.size(), 2u);
    for (const auto& e : o.entries) {
        EXPECT_GT(e.matches, 0u);
        for (OpId op : all_ops())
            if (has_magnitude(op))
                for (int k = 0; k < kNumPLevels; ++k) EXPECT_EQ(e.rewards[op_code(op)][k][0], 0.0);
        EXPECT_EQ(e.best, argmax_triple(e.rewards));
        EXPECT_GE(e.best_reward, 0.0);
    }
    // Same answer with a different thread count.
    const auto o1 = brute_force_oracle(single_label_queries(2), model, 1, 3, 1);
    EXPECT_EQ(o1.entries[1].rewards, o.entries[1].rewards);
    EXPECT_THROW(brute_force_oracle({{1, 1, 1}}, model, 1, 3), std::exception);
}

TEST(Pipeline, FoldSweepShapes) {
    RunConfig c = tiny();
    const auto pts = sweep_folds(c, {1, 2, 3}, false);
    ASSERT_EQ(pts.size(), 3u);
    for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_GE(pts[i].eval_size, pts[i - 1].eval_size);
    const auto csv = curves_to_csv("K", pts);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "K,mean_reward,mA,eval_set_size,actor_params");
    EXPECT_THROW(sweep_folds(c, {2, 1}), std::invalid_argument);
    EXPECT_THROW(sweep_depth(c, {1}), std::invalid_argument);
}

TEST(Pipeline, TransferReportsDelta) {
    RunConfig c = tiny();
    RunState st = prepare_run(c, true);
    const auto actor = run_actor(st, PolicySource::lbaug_H);
    const auto r = transfer_policy(st, actor, {4, 8, 32}, false);
    EXPECT_DOUBLE_EQ(r.delta, r.mA_transfer - r.mA_baseline);
    EXPECT_FALSE(r.retrained_delta.has_value());
    RunConfig three = tiny();
    auto spec = two_label_spec();
    spec.labels.push_back(spec.labels[1]);
    spec.labels.back().name = "blob2";
    spec.cells.push_back(spec.cells[1]);
    three.spec = spec;
    RunState st3 = prepare_run(three, false);
    EXPECT_THROW(transfer_policy(st3, actor, {4, 8, 32}, false), std::invalid_argument);
}

TEST(Pipeline, StageErrorsNameTheStage) {
    RunConfig c = tiny();
    c.spec.reset();
    c.train_dir = "/nonexistent/train";
    c.valid_dir = "/nonexistent/valid";
    try {
        prepare_run(c, false);
        FAIL() << "expected a stage error";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "data");
    }
}

TEST(Pipeline, LabelStudyShape) {
    RunConfig c = tiny();
    c.final_hyper.epochs = 2;
    RunState st = prepare_run(c, false);
    const auto t = label_study_run(st, 0.005, 5);
    EXPECT_EQ(t.cells.size(), static_cast<std::size_t>(kNumOps) * 2);
}

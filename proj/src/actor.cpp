#include "lbaug/actor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "lbaug/checkpoint.hpp"

namespace lbaug {

namespace {

constexpr int kPBlock = kNumOps;
constexpr int kMBlock = kNumOps + kNumOps * kNumPLevels;

template <std::size_t N>
void softmax_into(const double* z, std::array<double, N>& out) {
    double mx = z[0];
    for (std::size_t i = 1; i < N; ++i) mx = std::max(mx, z[i]);
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) s += out[i] = std::exp(z[i] - mx);
    for (double& v : out) v /= s;
}

template <std::size_t N>
int sample_index(const std::array<double, N>& probs, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    // Round-off left u above the last partial sum: take the last positive entry.
    for (std::size_t i = N; i-- > 0;)
        if (probs[i] > 0.0) return static_cast<int>(i);
    return static_cast<int>(N) - 1;
}

template <std::size_t N>
int argmax(const std::array<double, N>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Adds coef * d log pi(t) / d logits to grad_row.
void add_log_prob_grad(const PolicyDistribution& d, const PolicyTriple& t, double coef, const ActorConfig& cfg,
                       double* grad_row) {
    const int j = op_code(t.op);
    for (int i = 0; i < kNumOps; ++i) grad_row[i] += coef * ((i == j ? 1.0 : 0.0) - d.op[i]);
    if (cfg.mode == ActorMode::E) return;
    double* gp = grad_row + kPBlock + j * kNumPLevels;
    for (int k = 0; k < kNumPLevels; ++k) gp[k] += coef * ((k == t.p_level ? 1.0 : 0.0) - d.p[j][k]);
    double* gm = grad_row + kMBlock + j * kNumMLevels;
    for (int l = 0; l < kNumMLevels; ++l) gm[l] += coef * ((l == t.m_level ? 1.0 : 0.0) - d.m[j][l]);
}

// Adds coef * d H(probs) / d logits to grad, H the entropy of one softmax block.
template <std::size_t N>
void add_entropy_grad(const std::array<double, N>& probs, double coef, double* grad) {
    double h = 0.0;
    for (double q : probs)
        if (q > 0.0) h -= q * std::log(q);
    for (std::size_t i = 0; i < N; ++i)
        if (probs[i] > 0.0) grad[i] -= coef * probs[i] * (std::log(probs[i]) + h);
}

Tensor inputs_tensor(const std::vector<const LabelVector*>& ys) {
    const int L = static_cast<int>(ys.at(0)->size());
    Tensor t({static_cast<int>(ys.size()), L});
    for (std::size_t n = 0; n < ys.size(); ++n)
        for (int l = 0; l < L; ++l) t[n * L + l] = (*ys[n])[l];
    return t;
}

}  // namespace

std::string to_string(ActorMode m) { return m == ActorMode::E ? "E" : "H"; }

ActorMode actor_mode_from_string(const std::string& s) {
    if (s == "E") return ActorMode::E;
    if (s == "H") return ActorMode::H;
    throw std::invalid_argument("unknown actor mode '" + s + "' (expected E or H)");
}

std::string to_string(BaselineKind b) {
    switch (b) {
        case BaselineKind::none: return "none";
        case BaselineKind::moving_average: return "moving_average";
        case BaselineKind::per_label: return "per_label";
        case BaselineKind::leave_one_out: return "leave_one_out";
    }
    return "none";
}

BaselineKind baseline_kind_from_string(const std::string& s) {
    if (s == "none") return BaselineKind::none;
    if (s == "moving_average") return BaselineKind::moving_average;
    if (s == "per_label") return BaselineKind::per_label;
    if (s == "leave_one_out") return BaselineKind::leave_one_out;
    throw std::invalid_argument("unknown baseline '" + s + "'");
}

void ActorConfig::validate() const {
    if (depth < 2) throw std::invalid_argument("actor depth must be >= 2");
    if (width < 1) throw std::invalid_argument("actor width must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("actor dropout must lie in [0,1)");
    if (samples < 1) throw std::invalid_argument("actor samples per instance must be >= 1");
    if (epochs < 1 || batch < 1) throw std::invalid_argument("actor epochs and batch must be >= 1");
    if (fixed_p_level < 0 || fixed_p_level >= kNumPLevels) throw std::invalid_argument("fixed_p_level out of range");
    if (fixed_m_level < 0 || fixed_m_level >= kNumMLevels) throw std::invalid_argument("fixed_m_level out of range");
    if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) throw std::invalid_argument("baseline_decay must lie in [0,1)");
    if (!(entropy_bonus >= 0.0 && std::isfinite(entropy_bonus))) throw std::invalid_argument("entropy_bonus must be >= 0");
}

nlohmann::json actor_config_to_json(const ActorConfig& c) {
    return {{"depth", c.depth},
            {"width", c.width},
            {"dropout", c.dropout},
            {"mode", to_string(c.mode)},
            {"samples", c.samples},
            {"baseline", to_string(c.baseline)},
            {"baseline_decay", c.baseline_decay},
            {"entropy_bonus", c.entropy_bonus},
            {"fixed_p_level", c.fixed_p_level},
            {"fixed_m_level", c.fixed_m_level},
            {"optimizer", to_string(c.optim.kind)},
            {"lr", c.optim.lr},
            {"momentum", c.optim.momentum},
            {"beta1", c.optim.beta1},
            {"beta2", c.optim.beta2},
            {"eps", c.optim.eps},
            {"weight_decay", c.optim.weight_decay},
            {"epochs", c.epochs},
            {"batch", c.batch},
            {"max_steps", c.max_steps},
            {"seed", c.seed}};
}

ActorConfig actor_config_from_json(const nlohmann::json& j) {
    ActorConfig c;
    c.depth = j.value("depth", c.depth);
    c.width = j.value("width", c.width);
    c.dropout = j.value("dropout", c.dropout);
    if (j.contains("mode")) c.mode = actor_mode_from_string(j.at("mode").get<std::string>());
    c.samples = j.value("samples", c.samples);
    if (j.contains("baseline")) c.baseline = baseline_kind_from_string(j.at("baseline").get<std::string>());
    c.baseline_decay = j.value("baseline_decay", c.baseline_decay);
    c.entropy_bonus = j.value("entropy_bonus", c.entropy_bonus);
    c.fixed_p_level = j.value("fixed_p_level", c.fixed_p_level);
    c.fixed_m_level = j.value("fixed_m_level", c.fixed_m_level);
    if (j.contains("optimizer")) c.optim.kind = optimizer_kind_from_string(j.at("optimizer").get<std::string>());
    c.optim.lr = j.value("lr", c.optim.lr);
    c.optim.momentum = j.value("momentum", c.optim.momentum);
    c.optim.beta1 = j.value("beta1", c.optim.beta1);
    c.optim.beta2 = j.value("beta2", c.optim.beta2);
    c.optim.eps = j.value("eps", c.optim.eps);
    c.optim.weight_decay = j.value("weight_decay", c.optim.weight_decay);
    c.epochs = j.value("epochs", c.epochs);
    c.batch = j.value("batch", c.batch);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

std::vector<LayerSpec> actor_specs(int num_labels, const ActorConfig& cfg) {
    cfg.validate();
    std::vector<LayerSpec> specs;
    int in = num_labels;
    for (int d = 0; d + 1 < cfg.depth; ++d) {
        specs.push_back(LayerSpec::dense(in, cfg.width));
        specs.push_back(LayerSpec::relu());
        if (cfg.dropout > 0.0) specs.push_back(LayerSpec::dropout(cfg.dropout));
        in = cfg.width;
    }
    specs.push_back(LayerSpec::dense(in, kActorOutputs));
    return specs;
}

Network build_actor(int num_labels, const ActorConfig& cfg) {
    Rng rng(derive_seed(cfg.seed, 0));
    return Network::build({num_labels}, actor_specs(num_labels, cfg), rng);
}

PolicyDistribution distribution_from_logits(const double* z, const ActorConfig& cfg) {
    PolicyDistribution d;
    softmax_into(z, d.op);
    for (int j = 0; j < kNumOps; ++j) {
        if (cfg.mode == ActorMode::E) {
            d.p[j].fill(0.0);
            d.m[j].fill(0.0);
            d.p[j][cfg.fixed_p_level] = 1.0;
            d.m[j][cfg.fixed_m_level] = 1.0;
        } else {
            softmax_into(z + kPBlock + j * kNumPLevels, d.p[j]);
            softmax_into(z + kMBlock + j * kNumMLevels, d.m[j]);
        }
    }
    return d;
}

PolicyDistribution actor_forward(const Network& net, const LabelVector& y, const ActorConfig& cfg) {
    if (net.input_shape.size() != 1 || static_cast<std::size_t>(net.input_shape[0]) != y.size())
        throw std::invalid_argument("actor_forward: label vector length " + std::to_string(y.size()) +
                                    " does not match the actor input");
    if (net.output_shape() != std::vector<int>{kActorOutputs})
        throw std::invalid_argument("actor_forward: actor output width must be " + std::to_string(kActorOutputs));
    Network eval = net;
    eval.training = false;
    Tensor z = forward(eval, inputs_tensor({&y}), nullptr, nullptr);
    return distribution_from_logits(z.data.data(), cfg);
}

SampledAction sample_action(const PolicyDistribution& dist, Rng& rng) {
    SampledAction a;
    const int j = sample_index(dist.op, rng);
    a.triple.op = op_from_code(j);
    a.triple.p_level = sample_index(dist.p[j], rng);
    a.triple.m_level = sample_index(dist.m[j], rng);
    a.log_prob = log_prob(dist, a.triple);
    return a;
}

double log_prob(const PolicyDistribution& dist, const PolicyTriple& t) {
    const int j = op_code(t.op);
    return std::log(dist.op[j]) + std::log(dist.p[j][t.p_level]) + std::log(dist.m[j][t.m_level]);
}

ReinforceResult reinforce_loss(const std::vector<double>& log_probs, const std::vector<double>& rewards,
                               const std::vector<double>& baselines) {
    if (log_probs.empty()) throw std::invalid_argument("reinforce_loss: empty batch");
    if (rewards.size() != log_probs.size() || baselines.size() != log_probs.size())
        throw std::invalid_argument("reinforce_loss: batch length mismatch");
    ReinforceResult r;
    const double n = static_cast<double>(log_probs.size());
    r.grad.resize(log_probs.size());
    for (std::size_t i = 0; i < log_probs.size(); ++i) {
        if (!std::isfinite(rewards[i]) || !std::isfinite(baselines[i]))
            throw std::invalid_argument("reinforce_loss: non-finite reward");
        const double adv = rewards[i] - baselines[i];
        r.loss -= log_probs[i] * adv / n;
        r.grad[i] = -adv / n;
    }
    return r;
}

double actor_loss_head(const Tensor& logits, const std::vector<PolicyTriple>& actions,
                       const std::vector<double>& advantages, const ActorConfig& cfg, Tensor& grad) {
    if (logits.rows() != static_cast<int>(actions.size()) || advantages.size() != actions.size())
        throw std::invalid_argument("actor_loss_head: one action and advantage per logit row required");
    grad = Tensor(logits.shape);
    const std::size_t D = logits.row_size();
    const double n = static_cast<double>(actions.size());
    double loss = 0.0;
    for (std::size_t r = 0; r < actions.size(); ++r) {
        if (cfg.mode == ActorMode::E &&
            (actions[r].p_level != cfg.fixed_p_level || actions[r].m_level != cfg.fixed_m_level))
            throw std::invalid_argument("actor_loss_head: mode E action " + to_string(actions[r]) +
                                        " is off the fixed levels");
        const auto d = distribution_from_logits(logits.data.data() + r * D, cfg);
        loss -= log_prob(d, actions[r]) * advantages[r] / n;
        // d loss / d log pi = -adv / n.
        add_log_prob_grad(d, actions[r], -advantages[r] / n, cfg, grad.data.data() + r * D);
    }
    return loss;
}

TrainedActor train_actor_on(const std::vector<LabelVector>& inputs, const RewardFn& reward, const ActorConfig& cfg) {
    cfg.validate();
    if (inputs.empty()) throw std::invalid_argument("train_actor: empty evaluation set");
    TrainedActor out;
    out.cfg = cfg;
    out.net = build_actor(static_cast<int>(inputs[0].size()), cfg);
    out.net.training = true;
    Optimizer opt(cfg.optim, out.net);
    Rng order_rng(derive_seed(cfg.seed, 1));
    Rng dropout_rng(derive_seed(cfg.seed, 2));
    Rng sample_rng(derive_seed(cfg.seed, 3));
    std::uint64_t sample_counter = 0;
    // Running means keyed by label vector; moving_average uses a single shared key.
    std::map<LabelVector, double> running;
    const LabelVector shared_key;

    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.max_steps > 0 && out.log.steps >= cfg.max_steps) break;
        std::shuffle(order.begin(), order.end(), order_rng.engine());
        double reward_sum = 0.0;
        std::size_t reward_count = 0;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
            if (cfg.max_steps > 0 && out.log.steps >= cfg.max_steps) break;
            const std::size_t e = std::min(order.size(), b + cfg.batch);
            std::vector<const LabelVector*> ys;
            for (std::size_t p = b; p < e; ++p) ys.push_back(&inputs[order[p]]);
            ForwardCache cache;
            Tensor z = forward(out.net, inputs_tensor(ys), &cache, &dropout_rng);
            const std::size_t D = z.row_size();

            std::vector<PolicyDistribution> dists;
            std::vector<ActionQuery> queries;
            std::vector<std::size_t> row_of;
            for (std::size_t r = 0; r < ys.size(); ++r) {
                dists.push_back(distribution_from_logits(z.data.data() + r * D, cfg));
                for (int s = 0; s < cfg.samples; ++s) {
                    const auto a = sample_action(dists.back(), sample_rng);
                    queries.push_back({order[b + r], a.triple, derive_seed(cfg.seed, (1ULL << 40) + sample_counter++)});
                    row_of.push_back(r);
                }
            }
            const auto rewards = reward(queries);
            if (rewards.size() != queries.size()) throw std::logic_error("reward function returned the wrong count");
            double mean = 0.0;
            for (double v : rewards) {
                if (!std::isfinite(v)) throw std::runtime_error("train_actor: non-finite reward");
                mean += v;
            }
            mean /= static_cast<double>(rewards.size());
            const bool keyed = cfg.baseline == BaselineKind::moving_average || cfg.baseline == BaselineKind::per_label;
            auto key_of = [&](std::size_t r) -> const LabelVector& {
                return cfg.baseline == BaselineKind::per_label ? *ys[r] : shared_key;
            };
            std::vector<double> row_sum(ys.size(), 0.0);
            for (std::size_t q = 0; q < queries.size(); ++q) row_sum[row_of[q]] += rewards[q];
            std::vector<double> base(queries.size(), 0.0);
            for (std::size_t q = 0; q < queries.size(); ++q) {
                if (keyed) {
                    const auto it = running.find(key_of(row_of[q]));
                    if (it != running.end()) base[q] = it->second;
                } else if (cfg.baseline == BaselineKind::leave_one_out && cfg.samples > 1) {
                    base[q] = (row_sum[row_of[q]] - rewards[q]) / (cfg.samples - 1);
                }
            }

            Tensor grad(z.shape);
            const double n = static_cast<double>(queries.size());
            for (std::size_t q = 0; q < queries.size(); ++q)
                add_log_prob_grad(dists[row_of[q]], queries[q].triple, -(rewards[q] - base[q]) / n, cfg,
                                  grad.data.data() + row_of[q] * D);
            if (cfg.entropy_bonus > 0.0) {
                // loss -= bonus * mean row entropy, summed over the op head and every p and m head.
                const double coef = -cfg.entropy_bonus / static_cast<double>(ys.size());
                for (std::size_t r = 0; r < ys.size(); ++r) {
                    double* g = grad.data.data() + r * D;
                    add_entropy_grad(dists[r].op, coef, g);
                    if (cfg.mode == ActorMode::E) continue;
                    for (int j = 0; j < kNumOps; ++j) {
                        add_entropy_grad(dists[r].p[j], coef, g + kPBlock + j * kNumPLevels);
                        add_entropy_grad(dists[r].m[j], coef, g + kMBlock + j * kNumMLevels);
                    }
                }
            }
            opt.step(out.net, backward(out.net, cache, grad, false));
            ++out.log.steps;

            if (keyed) {
                // Batch mean per key, then one decay step per key seen in this batch.
                std::map<LabelVector, std::pair<double, int>> batch;
                for (std::size_t r = 0; r < ys.size(); ++r) {
                    auto& [sum, count] = batch[key_of(r)];
                    sum += row_sum[r];
                    count += cfg.samples;
                }
                for (const auto& [key, sc] : batch) {
                    const double m = sc.first / sc.second;
                    const auto it = running.find(key);
                    if (it == running.end())
                        running.emplace(key, m);
                    else
                        it->second = cfg.baseline_decay * it->second + (1.0 - cfg.baseline_decay) * m;
                }
            }
            reward_sum += mean * n;
            reward_count += queries.size();
        }
        if (reward_count > 0) out.log.epoch_mean_reward.push_back(reward_sum / static_cast<double>(reward_count));
    }
    out.net.training = false;
    return out;
}

TrainedActor train_actor(const RewardModel& model, const ActorConfig& cfg, bool label_agnostic) {
    const auto& eval = model.eval_set();
    const std::size_t L = model.dataset().num_labels();
    std::vector<LabelVector> inputs;
    inputs.reserve(eval.indices.size());
    for (std::size_t i : eval.indices)
        inputs.push_back(label_agnostic ? LabelVector(L, 1) : model.dataset().instances[i].labels);
    RewardFn fn = [&](const std::vector<ActionQuery>& qs) {
        std::vector<RewardModel::Query> rq;
        rq.reserve(qs.size());
        for (const auto& q : qs) rq.push_back({q.input, q.triple, q.seed});
        return model.rewards(rq);
    };
    return train_actor_on(inputs, fn, cfg);
}

std::string export_policy_table(const Network& net, const ActorConfig& cfg, const std::vector<LabelVector>& queries) {
    std::ostringstream out;
    out.precision(6);
    out << "labels";
    for (OpId op : all_ops()) out << ',' << op_name(op) << "_prob";
    for (OpId op : all_ops()) out << ',' << op_name(op) << "_p";
    for (OpId op : all_ops()) out << ',' << op_name(op) << "_m";
    out << '\n';
    for (const auto& y : queries) {
        const auto d = actor_forward(net, y, cfg);
        out << label_string(y);
        for (int j = 0; j < kNumOps; ++j) out << ',' << d.op[j];
        for (int j = 0; j < kNumOps; ++j) out << ',' << argmax(d.p[j]);
        for (int j = 0; j < kNumOps; ++j) out << ',' << argmax(d.m[j]);
        out << '\n';
    }
    return out.str();
}

void save_actor(const TrainedActor& actor, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_network(actor.net, dir / "actor.json");
    nlohmann::json side = {{"config", actor_config_to_json(actor.cfg)},
                           {"epoch_mean_reward", actor.log.epoch_mean_reward},
                           {"steps", actor.log.steps}};
    std::ofstream(dir / "actor_config.json") << side.dump(2) << '\n';
}

TrainedActor load_actor(const std::filesystem::path& dir) {
    TrainedActor a;
    a.net = load_network(dir / "actor.json");
    std::ifstream in(dir / "actor_config.json");
    if (!in) throw std::runtime_error("missing actor sidecar " + (dir / "actor_config.json").string());
    const auto side = nlohmann::json::parse(in);
    a.cfg = actor_config_from_json(side.at("config"));
    a.log.epoch_mean_reward = side.value("epoch_mean_reward", std::vector<double>{});
    a.log.steps = side.value("steps", 0L);
    return a;
}

}  // namespace lbaug

#include "lbaug/critic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "lbaug/checkpoint.hpp"
#include "lbaug/loss.hpp"
#include "lbaug/parallel.hpp"

namespace lbaug {

namespace {

constexpr int kEvalChunk = 256;

Tensor logits_of(const Network& net, const Tensor& x) { return forward(net, x, nullptr, nullptr, net.logit_layers()); }

}  // namespace

nlohmann::json hyper_to_json(const TrainHyper& h) {
    return {{"epochs", h.epochs},
            {"batch", h.batch},
            {"optimizer", to_string(h.optim.kind)},
            {"lr", h.optim.lr},
            {"momentum", h.optim.momentum},
            {"beta1", h.optim.beta1},
            {"beta2", h.optim.beta2},
            {"eps", h.optim.eps},
            {"weight_decay", h.optim.weight_decay}};
}

TrainHyper hyper_from_json(const nlohmann::json& j) {
    TrainHyper h;
    h.epochs = j.value("epochs", h.epochs);
    h.batch = j.value("batch", h.batch);
    if (j.contains("optimizer")) h.optim.kind = optimizer_kind_from_string(j.at("optimizer").get<std::string>());
    h.optim.lr = j.value("lr", h.optim.lr);
    h.optim.momentum = j.value("momentum", h.optim.momentum);
    h.optim.beta1 = j.value("beta1", h.optim.beta1);
    h.optim.beta2 = j.value("beta2", h.optim.beta2);
    h.optim.eps = j.value("eps", h.optim.eps);
    h.optim.weight_decay = j.value("weight_decay", h.optim.weight_decay);
    if (h.epochs < 1 || h.batch < 1) throw std::invalid_argument("training epochs and batch must be >= 1");
    return h;
}

std::vector<LayerSpec> classifier_specs(int image_size, int num_labels, int w1, int w2, int hidden) {
    if (image_size % 4 != 0) throw std::invalid_argument("classifier image size must be a multiple of 4");
    const int q = image_size / 4;
    return {LayerSpec::conv3x3(3, w1), LayerSpec::relu(),    LayerSpec::avgpool2x2(),
            LayerSpec::conv3x3(w1, w2), LayerSpec::relu(),   LayerSpec::avgpool2x2(),
            LayerSpec::dense(w2 * q * q, hidden), LayerSpec::relu(), LayerSpec::dense(hidden, num_labels),
            LayerSpec::sigmoid()};
}

Tensor images_to_tensor(const std::vector<const Image*>& images) {
    if (images.empty()) throw std::invalid_argument("images_to_tensor: empty batch");
    const int H = images[0]->height, W = images[0]->width;
    const std::size_t HW = static_cast<std::size_t>(H) * W;
    Tensor t({static_cast<int>(images.size()), 3, H, W});
    for (std::size_t n = 0; n < images.size(); ++n) {
        const Image& img = *images[n];
        if (img.height != H || img.width != W) throw std::invalid_argument("images_to_tensor: mixed image sizes");
        double* dst = t.data.data() + n * 3 * HW;
        for (std::size_t p = 0; p < HW; ++p)
            for (int c = 0; c < 3; ++c) dst[c * HW + p] = img.pixels[p * 3 + c];
    }
    return t;
}

Tensor labels_to_tensor(const std::vector<const LabelVector*>& labels) {
    const int L = static_cast<int>(labels.at(0)->size());
    Tensor t({static_cast<int>(labels.size()), L});
    for (std::size_t n = 0; n < labels.size(); ++n)
        for (int l = 0; l < L; ++l) t[n * L + l] = (*labels[n])[l];
    return t;
}

TrainedClassifier train_classifier(const Dataset& ds, const std::vector<std::size_t>& indices,
                                   const std::vector<LayerSpec>& specs, const TrainHyper& hyper, std::uint64_t seed,
                                   const AugmentFn& augment) {
    if (indices.empty()) throw std::invalid_argument("train_classifier: no training instances");
    Rng init_rng(derive_seed(seed, 0));
    const Image& first = ds.instances.at(indices[0]).image;
    TrainedClassifier out;
    out.net = Network::build({3, first.height, first.width}, specs, init_rng);
    out.net.training = true;
    Optimizer opt(hyper.optim, out.net);
    Rng order_rng(derive_seed(seed, 1));
    Rng aug_rng(derive_seed(seed, 2));
    Rng dropout_rng(derive_seed(seed, 3));
    const std::size_t logits = out.net.logit_layers();

    std::vector<std::size_t> order(indices);
    std::vector<Image> epoch_images;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), order_rng.engine());
        if (augment) {
            epoch_images.clear();
            epoch_images.reserve(order.size());
            for (std::size_t i : order) epoch_images.push_back(augment(i, aug_rng));
        }
        double total = 0.0;
        for (std::size_t b = 0; b < order.size(); b += hyper.batch) {
            const std::size_t e = std::min(order.size(), b + hyper.batch);
            std::vector<const Image*> imgs;
            std::vector<const LabelVector*> ys;
            for (std::size_t p = b; p < e; ++p) {
                imgs.push_back(augment ? &epoch_images[p] : &ds.instances[order[p]].image);
                ys.push_back(&ds.instances[order[p]].labels);
            }
            ForwardCache cache;
            Tensor z = forward(out.net, images_to_tensor(imgs), &cache, &dropout_rng, logits);
            LossResult r = bce_with_logits(z, labels_to_tensor(ys));
            if (!std::isfinite(r.loss)) throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch));
            total += r.loss * static_cast<double>(e - b);
            Gradients g = backward(out.net, cache, r.grad, false);
            for (const auto& w : g.weight)
                for (double v : w)
                    if (!std::isfinite(v))
                        throw DivergenceError("non-finite gradient at epoch " + std::to_string(epoch));
            opt.step(out.net, g);
        }
        out.loss_curve.push_back(total / static_cast<double>(order.size()));
    }
    out.net.training = false;
    return out;
}

Tensor predict_scores(const Network& net, const std::vector<const Image*>& images) {
    std::vector<double> data;
    int L = 0;
    for (std::size_t b = 0; b < images.size(); b += kEvalChunk) {
        std::vector<const Image*> chunk(images.begin() + b, images.begin() + std::min(images.size(), b + kEvalChunk));
        Tensor z = logits_of(net, images_to_tensor(chunk));
        L = static_cast<int>(z.row_size());
        for (double v : z.data) data.push_back(sigmoid(v));
    }
    return Tensor({static_cast<int>(images.size()), L}, std::move(data));
}

std::vector<double> instance_losses(const Network& net, const std::vector<const Image*>& images,
                                    const std::vector<const LabelVector*>& labels) {
    if (images.size() != labels.size()) throw std::invalid_argument("instance_losses: image/label count mismatch");
    std::vector<double> out;
    out.reserve(images.size());
    for (std::size_t b = 0; b < images.size(); b += kEvalChunk) {
        const std::size_t e = std::min(images.size(), b + kEvalChunk);
        std::vector<const Image*> ci(images.begin() + b, images.begin() + e);
        std::vector<const LabelVector*> cl(labels.begin() + b, labels.begin() + e);
        auto rows = bce_rows_from_logits(logits_of(net, images_to_tensor(ci)), labels_to_tensor(cl));
        out.insert(out.end(), rows.begin(), rows.end());
    }
    return out;
}

double instance_loss(const Network& net, const Image& image, const LabelVector& y) {
    return instance_losses(net, {&image}, {&y}).at(0);
}

std::vector<std::uint64_t> CriticSet::checksums() const {
    std::vector<std::uint64_t> out;
    for (const auto& c : critics) out.push_back(c.checksum());
    return out;
}

CriticSet train_critics(const Dataset& ds, const FoldPlan& plan, const std::vector<LayerSpec>& specs,
                        const TrainHyper& hyper, std::uint64_t seed, int threads) {
    if (plan.n != ds.size()) throw std::invalid_argument("train_critics: fold plan does not match the dataset");
    CriticSet set;
    set.critics.resize(plan.folds.size());
    set.loss_curves.resize(plan.folds.size());
    parallel_for(plan.folds.size(), threads, [&](std::size_t k) {
        try {
            auto trained = train_classifier(ds, plan.folds[k].M, specs, hyper, derive_seed(seed, 1000 + k));
            set.critics[k] = std::move(trained.net);
            set.loss_curves[k] = std::move(trained.loss_curve);
        } catch (const std::exception& e) {
            throw DivergenceError("critic for fold " + std::to_string(k) + ": " + e.what());
        }
    });
    return set;
}

void save_critics(const CriticSet& set, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json index = {{"version", kCheckpointVersion}, {"K", set.size()}, {"critics", nlohmann::json::array()}};
    for (std::size_t k = 0; k < set.size(); ++k) {
        const std::string file = "critic_" + std::to_string(k) + ".json";
        save_network(set.critics[k], dir / file);
        index["critics"].push_back({{"file", file}, {"loss_curve", set.loss_curves[k]}});
    }
    std::ofstream(dir / "critics.json") << index.dump(2) << '\n';
}

CriticSet load_critics(const std::filesystem::path& dir) {
    std::ifstream in(dir / "critics.json");
    if (!in) throw std::runtime_error("missing critic index " + (dir / "critics.json").string());
    const auto index = nlohmann::json::parse(in);
    CriticSet set;
    for (const auto& c : index.at("critics")) {
        set.critics.push_back(load_network(dir / c.at("file").get<std::string>()));
        set.loss_curves.push_back(c.value("loss_curve", std::vector<double>{}));
    }
    return set;
}

RewardModel::RewardModel(const Dataset& ds, const FoldPlan& plan, const CriticSet& critics, RewardOptions opt)
    : ds_(ds), critics_(critics), opt_(opt), eval_(union_eval_set(plan)), pos_(ds.size(), -1) {
    if (plan.n != ds.size()) throw std::invalid_argument("RewardModel: fold plan does not match the dataset");
    if (critics.size() != plan.folds.size()) throw std::invalid_argument("RewardModel: critic count differs from K");
    if (eval_.indices.empty()) throw std::invalid_argument("RewardModel: empty evaluation set");
    for (std::size_t m = 0; m < eval_.indices.size(); ++m) pos_[eval_.indices[m]] = static_cast<long>(m);

    base_loss_.resize(eval_.indices.size());
    for (std::size_t k = 0; k < critics.size(); ++k) {
        std::vector<std::size_t> members;
        std::vector<const Image*> imgs;
        std::vector<const LabelVector*> ys;
        for (std::size_t m = 0; m < eval_.indices.size(); ++m)
            for (int c : eval_.critic_lists[m])
                if (c == static_cast<int>(k)) {
                    members.push_back(m);
                    imgs.push_back(&ds.instances[eval_.indices[m]].image);
                    ys.push_back(&ds.instances[eval_.indices[m]].labels);
                }
        if (members.empty()) continue;
        const auto losses = instance_losses(critics.critics[k], imgs, ys);
        for (std::size_t r = 0; r < members.size(); ++r) base_loss_[members[r]].push_back(losses[r]);
    }
}

Image RewardModel::augment(std::size_t member, const PolicyTriple& t, std::uint64_t seed) const {
    Rng rng(seed);
    const Image& x = ds_.instances[eval_.indices.at(member)].image;
    if (opt_.respects_p) return apply_policy(t, x, &ds_, rng);
    const Image* partner = nullptr;
    if (t.op == OpId::SamplePairing) partner = &ds_.instances[rng.below(ds_.size())].image;
    return apply_operator(t.op, x, t.m_level, partner, rng);
}

std::vector<double> RewardModel::rewards(const std::vector<Query>& queries) const {
    std::vector<double> out(queries.size(), 0.0);
    std::vector<Image> augmented(queries.size());
    std::vector<bool> identity(queries.size(), false);
    for (std::size_t q = 0; q < queries.size(); ++q) {
        validate(queries[q].triple);
        if (queries[q].member >= eval_.indices.size()) throw std::out_of_range("reward query outside the evaluation set");
        // Magnitude-bearing operators at level 0 reproduce the input exactly.
        if (queries[q].triple.m_level == 0 && has_magnitude(queries[q].triple.op)) {
            identity[q] = true;
            continue;
        }
        augmented[q] = augment(queries[q].member, queries[q].triple, queries[q].seed);
    }
    // Group by critic so every critic sees one batched forward pass.
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> by_critic(critics_.size());
    for (std::size_t q = 0; q < queries.size(); ++q) {
        if (identity[q]) continue;
        const auto& list = eval_.critic_lists[queries[q].member];
        for (std::size_t j = 0; j < list.size(); ++j) by_critic[list[j]].push_back({q, j});
    }
    for (std::size_t k = 0; k < critics_.size(); ++k) {
        if (by_critic[k].empty()) continue;
        std::vector<const Image*> imgs;
        std::vector<const LabelVector*> ys;
        for (auto [q, j] : by_critic[k]) {
            imgs.push_back(&augmented[q]);
            ys.push_back(&ds_.instances[eval_.indices[queries[q].member]].labels);
        }
        const auto losses = instance_losses(critics_.critics[k], imgs, ys);
        for (std::size_t r = 0; r < by_critic[k].size(); ++r) {
            auto [q, j] = by_critic[k][r];
            out[q] += base_loss_[queries[q].member][j] - losses[r];
        }
    }
    for (std::size_t q = 0; q < queries.size(); ++q)
        if (!identity[q]) out[q] /= static_cast<double>(eval_.critic_lists[queries[q].member].size());
    return out;
}

double RewardModel::reward(std::size_t dataset_index, const PolicyTriple& t, std::uint64_t seed) const {
    if (dataset_index >= pos_.size() || pos_[dataset_index] < 0)
        throw std::invalid_argument("reward: instance " + std::to_string(dataset_index) + " is not in the evaluation set");
    return rewards({{static_cast<std::size_t>(pos_[dataset_index]), t, seed}}).at(0);
}

}  // namespace lbaug

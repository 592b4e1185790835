#include "lbaug/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace lbaug {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double json_number(double v) { return std::isfinite(v) ? v : 0.0; }

}  // namespace

void PredictionSet::validate() const {
    if (n < 0 || num_labels <= 0) throw MetricError("prediction set needs at least one label");
    const std::size_t cells = static_cast<std::size_t>(n) * num_labels;
    if (scores.size() != cells || targets.size() != cells)
        throw MetricError("prediction set: score/target sizes do not match " + std::to_string(n) + "x" +
                          std::to_string(num_labels));
    for (double s : scores)
        if (!std::isfinite(s)) throw MetricError("prediction set: non-finite score");
}

MeanAccuracy mean_accuracy(const PredictionSet& p) {
    p.validate();
    MeanAccuracy out;
    out.per_label.assign(static_cast<std::size_t>(p.num_labels), kNaN);
    double sum = 0.0;
    int used = 0;
    for (int l = 0; l < p.num_labels; ++l) {
        long tp = 0, fn = 0, tn = 0, fp = 0;
        for (int i = 0; i < p.n; ++i) {
            const bool t = p.target(i, l), y = p.predicted(i, l);
            if (t && y) ++tp;
            else if (t) ++fn;
            else if (y) ++fp;
            else ++tn;
        }
        if (tp + fn == 0 || tn + fp == 0) {
            out.excluded.push_back(l);
            continue;
        }
        const double acc = 0.5 * (static_cast<double>(tp) / (tp + fn) + static_cast<double>(tn) / (tn + fp));
        out.per_label[l] = acc;
        sum += acc;
        ++used;
    }
    if (used == 0) throw MetricError("mean accuracy: every label is degenerate (no positives or no negatives)");
    out.mA = sum / used;
    return out;
}

ExampleScores example_accu_f1(const PredictionSet& p) {
    p.validate();
    ExampleScores out;
    if (p.n == 0) return out;
    for (int i = 0; i < p.n; ++i) {
        int inter = 0, ny = 0, np = 0;
        for (int l = 0; l < p.num_labels; ++l) {
            const bool t = p.target(i, l), y = p.predicted(i, l);
            inter += t && y;
            ny += t;
            np += y;
        }
        const int uni = ny + np - inter;
        out.accu += uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
        out.f1 += ny + np == 0 ? 1.0 : 2.0 * inter / (ny + np);
    }
    out.accu /= p.n;
    out.f1 /= p.n;
    return out;
}

double average_precision(const std::vector<double>& scores, const std::vector<std::uint8_t>& targets) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    long positives = 0, hits = 0;
    double sum = 0.0;
    for (auto t : targets) positives += t != 0;
    if (positives == 0) return kNaN;
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (targets[order[r]]) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(r + 1);
        }
    }
    return sum / static_cast<double>(positives);
}

RankScores map_cf1_of1(const PredictionSet& p) {
    p.validate();
    RankScores out;
    out.ap.assign(static_cast<std::size_t>(p.num_labels), kNaN);
    out.label_f1.assign(static_cast<std::size_t>(p.num_labels), 1.0);
    double ap_sum = 0.0;
    int ap_used = 0;
    long TP = 0, FP = 0, FN = 0;
    for (int l = 0; l < p.num_labels; ++l) {
        std::vector<double> s(static_cast<std::size_t>(p.n));
        std::vector<std::uint8_t> t(static_cast<std::size_t>(p.n));
        long tp = 0, fp = 0, fn = 0;
        for (int i = 0; i < p.n; ++i) {
            s[i] = p.score(i, l);
            t[i] = p.target(i, l);
            const bool y = p.predicted(i, l);
            tp += t[i] && y;
            fp += !t[i] && y;
            fn += t[i] && !y;
        }
        out.ap[l] = average_precision(s, t);
        if (std::isfinite(out.ap[l])) {
            ap_sum += out.ap[l];
            ++ap_used;
        }
        if (tp + fp + fn > 0) out.label_f1[l] = 2.0 * tp / (2.0 * tp + fp + fn);
        TP += tp;
        FP += fp;
        FN += fn;
    }
    if (ap_used == 0) throw MetricError("mAP: no label has a positive example");
    out.mAP = ap_sum / ap_used;
    out.CF1 = std::accumulate(out.label_f1.begin(), out.label_f1.end(), 0.0) / p.num_labels;
    out.OF1 = TP + FP + FN == 0 ? 1.0 : 2.0 * TP / (2.0 * TP + FP + FN);
    return out;
}

MetricReport evaluate(const PredictionSet& p) {
    MetricReport r;
    r.mean_acc = mean_accuracy(p);
    r.mA = r.mean_acc.mA;
    const auto ex = example_accu_f1(p);
    r.accu = ex.accu;
    r.f1 = ex.f1;
    r.rank = map_cf1_of1(p);
    r.mAP = r.rank.mAP;
    r.CF1 = r.rank.CF1;
    r.OF1 = r.rank.OF1;
    return r;
}

nlohmann::json report_to_json(const MetricReport& r, const std::vector<std::string>& label_names) {
    nlohmann::json j;
    j["mA"] = r.mA;
    j["Accu"] = r.accu;
    j["F1"] = r.f1;
    j["mAP"] = r.mAP;
    j["CF1"] = r.CF1;
    j["OF1"] = r.OF1;
    nlohmann::json per = nlohmann::json::object();
    for (std::size_t l = 0; l < label_names.size(); ++l) {
        nlohmann::json e;
        const bool excluded = std::find(r.mean_acc.excluded.begin(), r.mean_acc.excluded.end(), static_cast<int>(l)) !=
                              r.mean_acc.excluded.end();
        e["excluded"] = excluded;
        e["mA"] = excluded ? nlohmann::json(nullptr) : nlohmann::json(json_number(r.mean_acc.per_label[l]));
        e["AP"] = std::isfinite(r.rank.ap[l]) ? nlohmann::json(r.rank.ap[l]) : nlohmann::json(nullptr);
        e["F1"] = r.rank.label_f1[l];
        per[label_names[l]] = e;
    }
    j["per_label"] = per;
    j["excluded_labels"] = r.mean_acc.excluded;
    return j;
}

char verdict_char(Verdict v) {
    switch (v) {
        case Verdict::positive: return 'P';
        case Verdict::negative: return 'N';
        case Verdict::neutral: return '-';
    }
    return '-';
}

Verdict classify_delta(double delta, double threshold) {
    if (delta > threshold) return Verdict::positive;
    if (delta < -threshold) return Verdict::negative;
    return Verdict::neutral;
}

const StudyCell& LabelStudyTable::at(OpId op, int label) const {
    for (const auto& c : cells)
        if (c.op == op && c.label == label) return c;
    throw std::out_of_range("study table has no cell for " + std::string(op_name(op)) + "/" + std::to_string(label));
}

LabelStudyTable label_study(const PredictionSet& base, const std::map<OpId, PredictionSet>& per_op, double threshold) {
    LabelStudyTable t;
    t.delta_threshold = threshold;
    const auto base_acc = mean_accuracy(base);
    for (const auto& [op, preds] : per_op) {
        if (preds.n != base.n || preds.num_labels != base.num_labels || preds.targets != base.targets)
            throw MetricError("label study: predictions for " + std::string(op_name(op)) +
                              " were not made on the baseline's test set");
        const auto acc = mean_accuracy(preds);
        for (int l = 0; l < base.num_labels; ++l) {
            double d = acc.per_label[l] - base_acc.per_label[l];
            if (!std::isfinite(d)) d = 0.0;
            t.cells.push_back({op, l, d, classify_delta(d, threshold)});
        }
    }
    return t;
}

std::string study_to_csv(const LabelStudyTable& t, const std::vector<std::string>& label_names) {
    std::ostringstream out;
    out << "operator,label,delta,verdict\n";
    out << std::setprecision(10);
    for (const auto& c : t.cells)
        out << op_name(c.op) << ',' << label_names.at(c.label) << ',' << c.delta << ',' << verdict_char(c.verdict)
            << '\n';
    return out.str();
}

}  // namespace lbaug

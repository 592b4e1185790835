#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "lbaug/ops.hpp"

namespace lbaug {

struct PredictionSet {
    int n = 0;
    int num_labels = 0;
    std::vector<double> scores;         // n x L, row-major, in [0, 1]
    std::vector<std::uint8_t> targets;  // n x L, 0/1
    double threshold = 0.5;

    double score(int i, int l) const { return scores[static_cast<std::size_t>(i) * num_labels + l]; }
    bool target(int i, int l) const { return targets[static_cast<std::size_t>(i) * num_labels + l] != 0; }
    bool predicted(int i, int l) const { return score(i, l) >= threshold; }
    void validate() const;
};

class MetricError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MeanAccuracy {
    double mA = 0.0;
    std::vector<double> per_label;  // NaN for excluded labels
    std::vector<int> excluded;      // labels lacking positives or negatives
};

// Per label 0.5 * (TPR + TNR) at the threshold, averaged over non-degenerate labels.
MeanAccuracy mean_accuracy(const PredictionSet& p);

struct ExampleScores {
    double accu = 0.0;
    double f1 = 0.0;
};

// Example-based accuracy |Y ∩ Ŷ| / |Y ∪ Ŷ| and F1 2|Y ∩ Ŷ| / (|Y| + |Ŷ|), both 1 when Y and Ŷ are empty.
ExampleScores example_accu_f1(const PredictionSet& p);

struct RankScores {
    double mAP = 0.0;
    double CF1 = 0.0;
    double OF1 = 0.0;
    std::vector<double> ap;        // NaN for labels without positives
    std::vector<double> label_f1;  // per-label F1 at the threshold, 1 when TP+FP+FN = 0
};

// AP averages precision at every positive rank; equal scores keep example order.
RankScores map_cf1_of1(const PredictionSet& p);
double average_precision(const std::vector<double>& scores, const std::vector<std::uint8_t>& targets);

struct MetricReport {
    double mA = 0, accu = 0, f1 = 0, mAP = 0, CF1 = 0, OF1 = 0;
    MeanAccuracy mean_acc;
    RankScores rank;
};

MetricReport evaluate(const PredictionSet& p);
nlohmann::json report_to_json(const MetricReport& r, const std::vector<std::string>& label_names);

enum class Verdict { positive, negative, neutral };
char verdict_char(Verdict v);

struct StudyCell {
    OpId op;
    int label;
    double delta;
    Verdict verdict;
};

struct LabelStudyTable {
    double delta_threshold = 0.005;
    std::vector<StudyCell> cells;  // op-major order

    const StudyCell& at(OpId op, int label) const;
};

Verdict classify_delta(double delta, double threshold);

LabelStudyTable label_study(const PredictionSet& base, const std::map<OpId, PredictionSet>& per_op, double threshold);

// CSV with header operator,label,delta,verdict.
std::string study_to_csv(const LabelStudyTable& t, const std::vector<std::string>& label_names);

}  // namespace lbaug

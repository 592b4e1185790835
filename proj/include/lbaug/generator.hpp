#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lbaug/image.hpp"
#include "lbaug/ops.hpp"

namespace lbaug {

enum class Sensitivity { neutral, beneficial, harmful };

std::string to_string(Sensitivity s);
Sensitivity sensitivity_from_string(const std::string& s);

// Visual cue kinds. Pattern kinds paint a localized structure; look kinds
// alter a global image attribute (contrast, saturation, sharpness).
enum class PatternKind { hstripes, vstripes, checker, brightdisc, darkdisc, redsq, greensq, dstripes, faded, muted, soft };

std::string to_string(PatternKind k);
PatternKind pattern_kind_from_string(const std::string& s);
bool is_look(PatternKind k);

// An operator applied to a fraction of a label's positives in one split.
struct NuisanceShift {
    OpId op = OpId::ShearX;
    int m_level = 0;
    double fraction = 1.0;

    bool operator==(const NuisanceShift&) const = default;
};

struct LabelPattern {
    std::string name;
    PatternKind kind = PatternKind::hstripes;
    // Pattern kinds: blend strength, jittered per instance by U(0.6, 1).
    // Look kinds: attribute factor (0.6 keeps 60% of the contrast, saturation, ...).
    double strength = 0.2;
    std::optional<NuisanceShift> train_shift;
    std::optional<NuisanceShift> valid_shift;

    bool operator==(const LabelPattern&) const = default;
};

struct SensitivitySpec {
    std::vector<LabelPattern> labels;
    // cells[label][op_code]
    std::vector<std::vector<Sensitivity>> cells;
    double positive_rate = 0.3;

    std::size_t num_labels() const { return labels.size(); }
    Sensitivity at(std::size_t label, OpId op) const { return cells.at(label).at(op_code(op)); }
    std::vector<OpId> ops_with(std::size_t label, Sensitivity s) const;
    std::vector<std::string> label_names() const;

    // Throws std::invalid_argument naming the offending label.
    void validate() const;
    bool operator==(const SensitivitySpec&) const = default;
};

nlohmann::json spec_to_json(const SensitivitySpec& spec);
SensitivitySpec spec_from_json(const nlohmann::json& j);

// The planted world used by the acceptance runs and the CLI default: four
// faint localized patterns that Contrast amplifies, and two global looks
// (muted, faded) whose cues AutoContrast and Equalize erase.
SensitivitySpec default_spec();

// Two-label toy spec (stripes / blob) used by small tests.
SensitivitySpec two_label_spec();

inline constexpr int kMinImageSize = 8;

// Returns (train, valid). Labels are drawn i.i.d. with spec.positive_rate.
// Deterministic in (spec, sizes, seed).
std::pair<Dataset, Dataset> generate_synthetic(const SensitivitySpec& spec, int n_train, int n_valid, int image_size,
                                               std::uint64_t seed);

// Renders one instance; exposed for tests.
Image render_instance(const SensitivitySpec& spec, const LabelVector& y, Split split, int size, Rng& rng);

}  // namespace lbaug

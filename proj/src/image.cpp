#include "lbaug/image.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace lbaug {

void Image::clamp() {
    for (double& v : pixels) v = std::clamp(v, 0.0, 1.0);
}

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::valid: return "valid";
        case Split::test: return "test";
    }
    return "train";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "valid") return Split::valid;
    if (s == "test") return Split::test;
    throw std::invalid_argument("unknown split tag '" + s + "'");
}

void Dataset::validate() const {
    std::unordered_set<std::string> ids;
    for (const auto& inst : instances) {
        if (!ids.insert(inst.id).second) throw std::invalid_argument("duplicate instance id '" + inst.id + "'");
        if (inst.labels.size() != label_names.size())
            throw std::invalid_argument("instance '" + inst.id + "' has " + std::to_string(inst.labels.size()) +
                                        " labels, dataset has " + std::to_string(label_names.size()));
        const auto& ref = instances.front().image;
        if (inst.image.height != ref.height || inst.image.width != ref.width)
            throw std::invalid_argument("instance '" + inst.id + "' has mismatched image dimensions");
        if (inst.image.pixels.size() != static_cast<std::size_t>(inst.image.height) * inst.image.width * 3)
            throw std::invalid_argument("instance '" + inst.id + "' has a malformed pixel buffer");
    }
}

std::vector<double> positive_rates(const Dataset& ds) {
    if (ds.empty()) throw std::invalid_argument("positive_rates: empty dataset");
    std::vector<double> rates(ds.num_labels(), 0.0);
    for (const auto& inst : ds.instances)
        for (std::size_t l = 0; l < rates.size(); ++l) rates[l] += inst.labels[l] ? 1.0 : 0.0;
    for (double& r : rates) r /= static_cast<double>(ds.size());
    return rates;
}

std::uint8_t quantize(double v) {
    const double q = std::floor(v * 255.0 + 0.5);
    return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

std::string label_string(const LabelVector& y) {
    std::string s;
    s.reserve(y.size());
    for (auto b : y) s.push_back(b ? '1' : '0');
    return s;
}

LabelVector parse_label_string(const std::string& s) {
    LabelVector y;
    y.reserve(s.size());
    for (char c : s) {
        if (c != '0' && c != '1') throw std::invalid_argument("label string must be 0/1 characters: '" + s + "'");
        y.push_back(c == '1');
    }
    return y;
}

}  // namespace lbaug

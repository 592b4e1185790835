#include "lbaug/generator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lbaug {

namespace {

constexpr std::array<std::pair<PatternKind, const char*>, 11> kKindNames = {{
    {PatternKind::hstripes, "hstripes"},
    {PatternKind::vstripes, "vstripes"},
    {PatternKind::checker, "checker"},
    {PatternKind::brightdisc, "brightdisc"},
    {PatternKind::darkdisc, "darkdisc"},
    {PatternKind::redsq, "redsq"},
    {PatternKind::greensq, "greensq"},
    {PatternKind::dstripes, "dstripes"},
    {PatternKind::faded, "faded"},
    {PatternKind::muted, "muted"},
    {PatternKind::soft, "soft"},
}};

// Box blur with edge replication.
Image box_blur(const Image& img, int r) {
    Image out(img.height, img.width);
    const double norm = 1.0 / ((2 * r + 1) * (2 * r + 1));
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx) {
                        const int sy = std::clamp(y + dy, 0, img.height - 1);
                        const int sx = std::clamp(x + dx, 0, img.width - 1);
                        acc += img.at(sy, sx, c);
                    }
                out.at(y, x, c) = acc * norm;
            }
    return out;
}

// Random colour plus a smooth low-frequency field plus pixel noise.
Image base_image(int size, Rng& rng) {
    std::array<double, 3> col{};
    for (double& c : col) c = rng.uniform(0.3, 0.7);
    Image field(size, size);
    const int cells = 4;
    std::array<double, cells * cells * 3> grid{};
    for (double& g : grid) g = rng.normal();
    const int block = std::max(1, size / cells);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < 3; ++c) {
                const int gy = std::min(cells - 1, y / block), gx = std::min(cells - 1, x / block);
                field.at(y, x, c) = grid[(gy * cells + gx) * 3 + c];
            }
    field = box_blur(field, std::max(1, size / 8));
    Image img(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = col[c] + 0.08 * field.at(y, x, c) + rng.normal(0.0, 0.04);
    img.clamp();
    return img;
}

bool in_region(int y, int x, int size, double y0, double y1, double x0, double x1) {
    return y >= static_cast<int>(y0 * size) && y < static_cast<int>(y1 * size) && x >= static_cast<int>(x0 * size) &&
           x < static_cast<int>(x1 * size);
}

double square_wave(int t) { return std::sin(2.0 * std::numbers::pi * t / 4.0 + 0.4) >= 0.0 ? 1.0 : -1.0; }

void draw_pattern(PatternKind kind, Image& img, double amp) {
    const int n = img.height;
    auto blend = [&](int y, int x, std::array<double, 3> target) {
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = img.at(y, x, c) * (1.0 - amp) + amp * target[c];
    };
    auto disc = [&](int y, int x, double cy, double cx) {
        const double dy = y - cy * n, dx = x - cx * n, r = 0.14 * n;
        return dy * dy + dx * dx <= r * r;
    };
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            switch (kind) {
                case PatternKind::hstripes:
                    if (in_region(y, x, n, 0.1, 0.45, 0.1, 0.9))
                        for (int c = 0; c < 3; ++c) img.at(y, x, c) += amp * square_wave(y);
                    break;
                case PatternKind::vstripes:
                    if (in_region(y, x, n, 0.55, 0.9, 0.1, 0.9))
                        for (int c = 0; c < 3; ++c) img.at(y, x, c) += amp * square_wave(x);
                    break;
                case PatternKind::checker:
                    if (in_region(y, x, n, 0.55, 0.9, 0.55, 0.9)) {
                        const double s = ((y / 2 + x / 2) % 2 == 0) ? 1.0 : -1.0;
                        for (int c = 0; c < 3; ++c) img.at(y, x, c) += amp * s;
                    }
                    break;
                case PatternKind::dstripes:
                    if (in_region(y, x, n, 0.55, 0.9, 0.1, 0.45))
                        for (int c = 0; c < 3; ++c) img.at(y, x, c) += amp * square_wave(x + y);
                    break;
                case PatternKind::brightdisc:
                    if (disc(y, x, 0.3, 0.7)) blend(y, x, {1.0, 1.0, 1.0});
                    break;
                case PatternKind::darkdisc:
                    if (disc(y, x, 0.7, 0.3)) blend(y, x, {0.0, 0.0, 0.0});
                    break;
                case PatternKind::redsq:
                    if (in_region(y, x, n, 0.15, 0.4, 0.15, 0.4)) blend(y, x, {0.9, 0.15, 0.15});
                    break;
                case PatternKind::greensq:
                    if (in_region(y, x, n, 0.6, 0.85, 0.6, 0.85)) blend(y, x, {0.15, 0.8, 0.15});
                    break;
                default: throw std::logic_error("draw_pattern: look kind");
            }
        }
    img.clamp();
}

void apply_look(PatternKind kind, Image& img, double factor) {
    const int n = img.height;
    switch (kind) {
        case PatternKind::faded: {
            double mu = 0.0;
            for (int y = 0; y < n; ++y)
                for (int x = 0; x < n; ++x) mu += detail::luminance(img, y, x);
            mu /= static_cast<double>(n) * n;
            for (double& v : img.pixels) v = mu + factor * (v - mu);
            break;
        }
        case PatternKind::muted:
            for (int y = 0; y < n; ++y)
                for (int x = 0; x < n; ++x) {
                    const double g = detail::luminance(img, y, x);
                    for (int c = 0; c < 3; ++c) img.at(y, x, c) = g + factor * (img.at(y, x, c) - g);
                }
            break;
        case PatternKind::soft: img = box_blur(img, 1); break;
        default: throw std::logic_error("apply_look: pattern kind");
    }
    img.clamp();
}

nlohmann::json shift_to_json(const NuisanceShift& s) {
    return {{"op", std::string(op_name(s.op))}, {"m_level", s.m_level}, {"fraction", s.fraction}};
}

NuisanceShift shift_from_json(const nlohmann::json& j) {
    NuisanceShift s;
    s.op = op_from_name(j.at("op").get<std::string>());
    s.m_level = j.at("m_level").get<int>();
    s.fraction = j.value("fraction", 1.0);
    return s;
}

void validate_shift(const NuisanceShift& s, const std::string& label) {
    if (s.m_level < 0 || s.m_level >= kNumMLevels)
        throw std::invalid_argument("label '" + label + "': nuisance m_level out of range");
    if (s.fraction < 0.0 || s.fraction > 1.0)
        throw std::invalid_argument("label '" + label + "': nuisance fraction outside [0,1]");
    if (s.op == OpId::SamplePairing)
        throw std::invalid_argument("label '" + label + "': SamplePairing cannot be a nuisance (needs a partner)");
}

}  // namespace

std::string to_string(Sensitivity s) {
    switch (s) {
        case Sensitivity::neutral: return "neutral";
        case Sensitivity::beneficial: return "beneficial";
        case Sensitivity::harmful: return "harmful";
    }
    return "neutral";
}

Sensitivity sensitivity_from_string(const std::string& s) {
    if (s == "neutral") return Sensitivity::neutral;
    if (s == "beneficial") return Sensitivity::beneficial;
    if (s == "harmful") return Sensitivity::harmful;
    throw std::invalid_argument("unknown sensitivity '" + s + "'");
}

std::string to_string(PatternKind k) {
    for (const auto& [kind, name] : kKindNames)
        if (kind == k) return name;
    return "?";
}

PatternKind pattern_kind_from_string(const std::string& s) {
    for (const auto& [kind, name] : kKindNames)
        if (s == name) return kind;
    throw std::invalid_argument("unknown pattern kind '" + s + "'");
}

bool is_look(PatternKind k) { return k == PatternKind::faded || k == PatternKind::muted || k == PatternKind::soft; }

std::vector<OpId> SensitivitySpec::ops_with(std::size_t label, Sensitivity s) const {
    std::vector<OpId> out;
    for (OpId op : all_ops())
        if (at(label, op) == s) out.push_back(op);
    return out;
}

std::vector<std::string> SensitivitySpec::label_names() const {
    std::vector<std::string> names;
    for (const auto& l : labels) names.push_back(l.name);
    return names;
}

void SensitivitySpec::validate() const {
    if (labels.size() < 2) throw std::invalid_argument("spec needs at least 2 labels, got " + std::to_string(labels.size()));
    if (cells.size() != labels.size()) throw std::invalid_argument("spec sensitivity table has wrong label count");
    if (!(positive_rate > 0.05 && positive_rate < 1.0))
        throw std::invalid_argument("spec positive_rate must lie in (0.05, 1)");
    for (std::size_t l = 0; l < labels.size(); ++l) {
        const auto& lab = labels[l];
        if (lab.name.empty()) throw std::invalid_argument("label " + std::to_string(l) + " has no name");
        for (std::size_t m = 0; m < l; ++m)
            if (labels[m].name == lab.name) throw std::invalid_argument("duplicate label name '" + lab.name + "'");
        if (cells[l].size() != static_cast<std::size_t>(kNumOps))
            throw std::invalid_argument("label '" + lab.name + "': sensitivity row must have 16 entries");
        if (!(lab.strength > 0.0 && lab.strength <= 1.0))
            throw std::invalid_argument("label '" + lab.name + "': strength must lie in (0,1]");
        if (lab.train_shift) validate_shift(*lab.train_shift, lab.name);
        if (lab.valid_shift) validate_shift(*lab.valid_shift, lab.name);
        if (ops_with(l, Sensitivity::beneficial).empty())
            throw std::invalid_argument("label '" + lab.name + "' has no beneficial operator");
        if (ops_with(l, Sensitivity::harmful).empty())
            throw std::invalid_argument("label '" + lab.name + "' has no harmful operator");
    }
}

nlohmann::json spec_to_json(const SensitivitySpec& spec) {
    nlohmann::json labels = nlohmann::json::array();
    for (std::size_t l = 0; l < spec.labels.size(); ++l) {
        const auto& lab = spec.labels[l];
        nlohmann::json j = {{"name", lab.name}, {"kind", to_string(lab.kind)}, {"strength", lab.strength}};
        if (lab.train_shift) j["train_shift"] = shift_to_json(*lab.train_shift);
        if (lab.valid_shift) j["valid_shift"] = shift_to_json(*lab.valid_shift);
        nlohmann::json ben = nlohmann::json::array(), harm = nlohmann::json::array();
        if (l < spec.cells.size()) {
            for (OpId op : spec.ops_with(l, Sensitivity::beneficial)) ben.push_back(std::string(op_name(op)));
            for (OpId op : spec.ops_with(l, Sensitivity::harmful)) harm.push_back(std::string(op_name(op)));
        }
        j["beneficial"] = ben;
        j["harmful"] = harm;
        labels.push_back(j);
    }
    return {{"positive_rate", spec.positive_rate}, {"labels", labels}};
}

SensitivitySpec spec_from_json(const nlohmann::json& j) {
    SensitivitySpec spec;
    spec.positive_rate = j.value("positive_rate", 0.3);
    for (const auto& jl : j.at("labels")) {
        LabelPattern lab;
        lab.name = jl.at("name").get<std::string>();
        lab.kind = pattern_kind_from_string(jl.at("kind").get<std::string>());
        lab.strength = jl.at("strength").get<double>();
        if (jl.contains("train_shift")) lab.train_shift = shift_from_json(jl.at("train_shift"));
        if (jl.contains("valid_shift")) lab.valid_shift = shift_from_json(jl.at("valid_shift"));
        std::vector<Sensitivity> row(kNumOps, Sensitivity::neutral);
        for (const auto& name : jl.value("beneficial", nlohmann::json::array()))
            row[op_code(op_from_name(name.get<std::string>()))] = Sensitivity::beneficial;
        for (const auto& name : jl.value("harmful", nlohmann::json::array())) {
            auto& cell = row[op_code(op_from_name(name.get<std::string>()))];
            if (cell == Sensitivity::beneficial)
                throw std::invalid_argument("label '" + lab.name + "': operator " + name.get<std::string>() +
                                            " listed as both beneficial and harmful");
            cell = Sensitivity::harmful;
        }
        spec.labels.push_back(lab);
        spec.cells.push_back(row);
    }
    spec.validate();
    return spec;
}

namespace {

void add_label(SensitivitySpec& spec, LabelPattern lab, std::initializer_list<OpId> beneficial,
               std::initializer_list<OpId> harmful) {
    std::vector<Sensitivity> row(kNumOps, Sensitivity::neutral);
    for (OpId op : beneficial) row[op_code(op)] = Sensitivity::beneficial;
    for (OpId op : harmful) row[op_code(op)] = Sensitivity::harmful;
    spec.labels.push_back(std::move(lab));
    spec.cells.push_back(row);
}

}  // namespace

SensitivitySpec default_spec() {
    SensitivitySpec spec;
    spec.positive_rate = 0.3;
    // Faint patterns gain from contrast amplification and lose their cue under
    // inversion or displacement (stripes also under rotation); looks are
    // global tone changes that histogram ops erase.
    add_label(spec, {"stripes", PatternKind::hstripes, 0.14, std::nullopt, std::nullopt}, {OpId::Contrast},
              {OpId::Invert, OpId::Solarize, OpId::Rotate});
    add_label(spec, {"red_square", PatternKind::redsq, 0.3, std::nullopt, std::nullopt}, {OpId::Contrast},
              {OpId::Invert, OpId::Solarize, OpId::TranslateY});
    add_label(spec, {"bright_disc", PatternKind::brightdisc, 0.25, std::nullopt, std::nullopt}, {OpId::Contrast},
              {OpId::Invert, OpId::Solarize, OpId::TranslateY});
    add_label(spec, {"checker", PatternKind::checker, 0.14, std::nullopt, std::nullopt}, {OpId::Contrast},
              {OpId::Equalize, OpId::TranslateX, OpId::TranslateY});
    add_label(spec, {"muted", PatternKind::muted, 0.5, std::nullopt, std::nullopt}, {OpId::Rotate},
              {OpId::AutoContrast, OpId::Equalize, OpId::Invert});
    add_label(spec, {"faded", PatternKind::faded, 0.6, std::nullopt, std::nullopt}, {OpId::Sharpness},
              {OpId::AutoContrast, OpId::Equalize, OpId::SamplePairing});
    return spec;
}

SensitivitySpec two_label_spec() {
    SensitivitySpec spec;
    spec.positive_rate = 0.4;
    add_label(spec, {"stripes", PatternKind::hstripes, 0.25, std::nullopt, NuisanceShift{OpId::Rotate, 5, 1.0}},
              {OpId::Rotate}, {OpId::Invert});
    add_label(spec, {"blob", PatternKind::brightdisc, 0.35, std::nullopt, std::nullopt}, {OpId::Contrast},
              {OpId::Solarize});
    return spec;
}

Image render_instance(const SensitivitySpec& spec, const LabelVector& y, Split split, int size, Rng& rng) {
    Image img = base_image(size, rng);
    for (std::size_t l = 0; l < spec.labels.size(); ++l)
        if (y[l] && !is_look(spec.labels[l].kind))
            draw_pattern(spec.labels[l].kind, img, spec.labels[l].strength * rng.uniform(0.6, 1.0));
    for (std::size_t l = 0; l < spec.labels.size(); ++l)
        if (y[l] && is_look(spec.labels[l].kind)) apply_look(spec.labels[l].kind, img, spec.labels[l].strength);
    for (std::size_t l = 0; l < spec.labels.size(); ++l) {
        if (!y[l]) continue;
        const auto& shift = split == Split::train ? spec.labels[l].train_shift : spec.labels[l].valid_shift;
        if (shift && rng.uniform() < shift->fraction) img = apply_operator(shift->op, img, shift->m_level, nullptr, rng);
    }
    for (double& v : img.pixels) v = quantize(v) / 255.0;
    return img;
}

namespace {

Dataset generate_split(const SensitivitySpec& spec, int n, int size, Split split, std::uint64_t seed) {
    Rng rng(seed);
    Dataset ds;
    ds.split = split;
    ds.label_names = spec.label_names();
    const std::size_t L = spec.num_labels();
    std::vector<LabelVector> ys(n, LabelVector(L, 0));
    for (auto& y : ys)
        for (auto& b : y) b = rng.bernoulli(spec.positive_rate) ? 1 : 0;
    const std::string prefix = split == Split::train ? "tr" : (split == Split::valid ? "va" : "te");
    ds.instances.reserve(n);
    for (int i = 0; i < n; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "%s%05d", prefix.c_str(), i);
        ds.instances.push_back({id, render_instance(spec, ys[i], split, size, rng), ys[i]});
    }
    return ds;
}

}  // namespace

std::pair<Dataset, Dataset> generate_synthetic(const SensitivitySpec& spec, int n_train, int n_valid, int image_size,
                                               std::uint64_t seed) {
    spec.validate();
    if (n_train < 10 || n_valid < 10) throw std::invalid_argument("generate_synthetic: n_train and n_valid must be >= 10");
    if (image_size < kMinImageSize)
        throw std::invalid_argument("generate_synthetic: image size " + std::to_string(image_size) +
                                    " is too small for the patterns (minimum " + std::to_string(kMinImageSize) + ")");
    return {generate_split(spec, n_train, image_size, Split::train, derive_seed(seed, 1)),
            generate_split(spec, n_valid, image_size, Split::valid, derive_seed(seed, 2))};
}

}  // namespace lbaug

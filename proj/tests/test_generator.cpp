#include <gtest/gtest.h>

#include <cmath>

#include "lbaug/generator.hpp"

using namespace lbaug;

namespace {

double pixel_std(const Image& img) {
    double s = 0, s2 = 0;
    for (double v : img.pixels) {
        s += v;
        s2 += v * v;
    }
    const double n = static_cast<double>(img.size());
    return std::sqrt(std::max(0.0, s2 / n - (s / n) * (s / n)));
}

// Mean absolute difference between vertically adjacent rows: high for horizontal stripes.
double row_alternation(const Image& img) {
    double s = 0;
    for (int y = 0; y + 1 < img.height; ++y)
        for (int x = 0; x < img.width; ++x) s += std::abs(img.at(y, x, 0) - img.at(y + 1, x, 0));
    return s / ((img.height - 1) * img.width);
}

}  // namespace

TEST(Generator, DefaultSpecIsValidWithOpposingCells) {
    const auto spec = default_spec();
    EXPECT_NO_THROW(spec.validate());
    EXPECT_EQ(spec.num_labels(), 6u);
    // Some operator is planted beneficial on one label and harmful on another.
    bool opposing = false;
    for (OpId op : all_ops()) {
        bool b = false, h = false;
        for (std::size_t l = 0; l < spec.num_labels(); ++l) {
            b |= spec.at(l, op) == Sensitivity::beneficial;
            h |= spec.at(l, op) == Sensitivity::harmful;
        }
        opposing |= b && h;
    }
    EXPECT_TRUE(opposing);
}

TEST(Generator, SpecJsonRoundTrip) {
    for (const auto& spec : {default_spec(), two_label_spec()})
        EXPECT_EQ(spec_from_json(nlohmann::json::parse(spec_to_json(spec).dump())), spec);
}

TEST(Generator, ValidationNamesTheLabel) {
    auto spec = two_label_spec();
    spec.cells[1].assign(kNumOps, Sensitivity::neutral);
    spec.cells[1][op_code(OpId::Invert)] = Sensitivity::harmful;
    try {
        spec.validate();
        FAIL() << "expected a validation error";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("blob"), std::string::npos);
    }
    auto one = two_label_spec();
    one.labels.pop_back();
    one.cells.pop_back();
    EXPECT_THROW(one.validate(), std::invalid_argument);
    auto bad = two_label_spec();
    bad.labels[0].train_shift = NuisanceShift{OpId::SamplePairing, 3, 0.5};
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Generator, ShapesRatesAndDeterminism) {
    const auto spec = default_spec();
    const auto [tr, va] = generate_synthetic(spec, 600, 100, 16, 5);
    EXPECT_EQ(tr.size(), 600u);
    EXPECT_EQ(va.size(), 100u);
    EXPECT_EQ(tr.instances[3].id, "tr00003");
    EXPECT_EQ(va.instances[0].id, "va00000");
    EXPECT_NO_THROW(tr.validate());
    for (double r : positive_rates(tr)) EXPECT_NEAR(r, 0.3, 0.06);
    for (const auto& inst : tr.instances)
        for (double v : inst.image.pixels) {
            ASSERT_GE(v, 0.0);
            ASSERT_LE(v, 1.0);
            ASSERT_DOUBLE_EQ(v * 255.0, std::round(v * 255.0));
        }
    const auto again = generate_synthetic(spec, 600, 100, 16, 5);
    EXPECT_EQ(again.first.instances[17].image, tr.instances[17].image);
    const auto other = generate_synthetic(spec, 600, 100, 16, 6);
    EXPECT_NE(other.first.instances[17].image, tr.instances[17].image);
}

TEST(Generator, PlantedCuesAreVisible) {
    const auto spec = default_spec();
    const auto [tr, va] = generate_synthetic(spec, 800, 10, 16, 2);
    // Label 0 paints horizontal stripes; label 5 fades contrast.
    double stripes_pos = 0, stripes_neg = 0, faded_pos = 0, faded_neg = 0;
    int np = 0, nn = 0, fp = 0, fn = 0;
    for (const auto& inst : tr.instances) {
        const bool others = inst.labels[1] || inst.labels[2] || inst.labels[3];
        if (!others && !inst.labels[4] && !inst.labels[5]) {
            (inst.labels[0] ? stripes_pos : stripes_neg) += row_alternation(inst.image);
            ++(inst.labels[0] ? np : nn);
        }
        if (!others && !inst.labels[0] && !inst.labels[4]) {
            (inst.labels[5] ? faded_pos : faded_neg) += pixel_std(inst.image);
            ++(inst.labels[5] ? fp : fn);
        }
    }
    EXPECT_GT(stripes_pos / np, 1.5 * stripes_neg / nn);
    EXPECT_LT(faded_pos / fp, 0.8 * faded_neg / fn);
}

TEST(Generator, ValidShiftOnlyTouchesValidation) {
    auto spec = two_label_spec();
    LabelVector y{1, 0};
    Rng a(3), b(3);
    const Image tr = render_instance(spec, y, Split::train, 16, a);
    const Image va = render_instance(spec, y, Split::valid, 16, b);
    EXPECT_NE(tr, va);  // stripes carry a validation-only rotation
    spec.labels[0].valid_shift.reset();
    Rng c(3), d(3);
    EXPECT_EQ(render_instance(spec, y, Split::train, 16, c), render_instance(spec, y, Split::valid, 16, d));
}

TEST(Generator, RejectsTinyRequests) {
    EXPECT_THROW(generate_synthetic(two_label_spec(), 5, 20, 16, 0), std::invalid_argument);
    EXPECT_THROW(generate_synthetic(two_label_spec(), 20, 20, 4, 0), std::invalid_argument);
}

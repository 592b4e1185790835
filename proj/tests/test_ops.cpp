#include <gtest/gtest.h>

#include <cmath>

#include "lbaug/ops.hpp"
#include "test_util.hpp"

using namespace lbaug;

namespace {

Image noisy_image(std::uint64_t seed, int size = 12) {
    Rng rng(seed);
    Image img(size, size);
    for (double& v : img.pixels) v = quantize(rng.uniform()) / 255.0;
    return img;
}

Image with_partner(OpId op, const Image& img, int m, std::uint64_t seed) {
    Rng rng(seed);
    const Image partner = noisy_image(seed + 99, img.height);
    return apply_operator(op, img, m, op == OpId::SamplePairing ? &partner : nullptr, rng);
}

}  // namespace

TEST(Ops, NamesRoundTrip) {
    for (OpId op : all_ops()) EXPECT_EQ(op_from_name(op_name(op)), op);
    EXPECT_THROW(op_from_name("Blur"), std::invalid_argument);
    EXPECT_THROW(op_from_code(16), std::out_of_range);
}

TEST(Ops, TripleTextForm) {
    const PolicyTriple t{OpId::Posterize, 7, 3};
    EXPECT_EQ(to_string(t), "Posterize:7:3");
    EXPECT_EQ(parse_triple("Posterize:7:3"), t);
    EXPECT_THROW(parse_triple("Posterize:11:3"), std::out_of_range);
    EXPECT_THROW(parse_triple("Posterize:1:10"), std::out_of_range);
    EXPECT_THROW(parse_triple("Posterize:1"), std::invalid_argument);
    EXPECT_THROW(parse_triple("Posterize:1:x"), std::invalid_argument);
    EXPECT_THROW(parse_triple("Posterize:1:2:3"), std::invalid_argument);
}

TEST(Ops, LevelToParamEndpoints) {
    Rng rng(1);
    EXPECT_DOUBLE_EQ(std::abs(level_to_param(OpId::ShearX, 9, rng)), 0.3);
    EXPECT_DOUBLE_EQ(std::abs(level_to_param(OpId::TranslateY, 9, rng)), 0.45);
    EXPECT_DOUBLE_EQ(std::abs(level_to_param(OpId::Rotate, 3, rng)), 10.0);
    EXPECT_DOUBLE_EQ(level_to_param(OpId::Solarize, 0, rng), 1.0);
    EXPECT_DOUBLE_EQ(level_to_param(OpId::Solarize, 9, rng), 0.0);
    EXPECT_DOUBLE_EQ(level_to_param(OpId::Posterize, 9, rng), 4.0);
    EXPECT_DOUBLE_EQ(level_to_param(OpId::Contrast, 9, rng), 1.9);
    EXPECT_DOUBLE_EQ(level_to_param(OpId::Cutout, 9, rng), 0.2);
    EXPECT_DOUBLE_EQ(level_to_param(OpId::SamplePairing, 9, rng), 0.4);
    EXPECT_THROW(level_to_param(OpId::Contrast, 10, rng), std::out_of_range);
}

TEST(Ops, SignedOpsDrawBothSigns) {
    Rng rng(5);
    int neg = 0;
    for (int i = 0; i < 1000; ++i) neg += level_to_param(OpId::ShearY, 9, rng) < 0;
    EXPECT_GT(neg, 400);
    EXPECT_LT(neg, 600);
}

TEST(Ops, IdentityEndpointForMagnitudeOps) {
    const Image img = noisy_image(3);
    for (OpId op : all_ops()) {
        if (!has_magnitude(op)) continue;
        for (std::uint64_t s = 0; s < 5; ++s) EXPECT_EQ(with_partner(op, img, 0, s), img) << op_name(op);
    }
}

TEST(Ops, RangeClosure) {
    for (std::uint64_t s = 0; s < 4; ++s) {
        const Image img = noisy_image(s);
        for (OpId op : all_ops())
            for (int m = 0; m < kNumMLevels; ++m) {
                const Image out = with_partner(op, img, m, s * 31 + m);
                ASSERT_EQ(out.height, img.height);
                ASSERT_EQ(out.width, img.width);
                for (double v : out.pixels) ASSERT_TRUE(v >= 0.0 && v <= 1.0) << op_name(op) << " m" << m;
            }
    }
}

TEST(Ops, DeterministicPerSeed) {
    const Image img = noisy_image(8);
    for (OpId op : all_ops())
        for (int m : {1, 5, 9}) EXPECT_EQ(with_partner(op, img, m, 42), with_partner(op, img, m, 42)) << op_name(op);
}

TEST(Ops, InvertIsAnInvolution) {
    const Image img = noisy_image(4);
    Rng rng(0);
    const Image once = apply_operator(OpId::Invert, img, 5, nullptr, rng);
    EXPECT_NEAR(once.pixels[0], 1.0 - img.pixels[0], 1e-15);
    const Image twice = apply_operator(OpId::Invert, once, 5, nullptr, rng);
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(twice.pixels[i], img.pixels[i], 1e-12);
}

TEST(Ops, HistogramOpsAreIdempotent) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        Image img = noisy_image(s);
        // Narrow range so both ops actually change the image.
        for (double& v : img.pixels) v = quantize(0.3 + 0.3 * v) / 255.0;
        Rng rng(0);
        for (OpId op : {OpId::Equalize, OpId::AutoContrast}) {
            const Image once = apply_operator(op, img, 0, nullptr, rng);
            EXPECT_NE(once, img) << op_name(op);
            EXPECT_EQ(apply_operator(op, once, 0, nullptr, rng), once) << op_name(op);
        }
    }
}

TEST(Ops, EqualizeKeepsDistinctLevelsDistinct) {
    Image img(1, 4);
    const int levels[4] = {10, 11, 12, 200};
    for (int x = 0; x < 4; ++x)
        for (int c = 0; c < 3; ++c) img.at(0, x, c) = levels[x] / 255.0;
    Rng rng(0);
    const Image out = apply_operator(OpId::Equalize, img, 0, nullptr, rng);
    for (int x = 0; x + 1 < 4; ++x) EXPECT_LT(out.at(0, x, 0), out.at(0, x + 1, 0));
    // Hand oracle: below-counts 0,1,2 over 3 non-top pixels, top level keeps
    // its distinctness at 255.
    EXPECT_EQ(quantize(out.at(0, 0, 0)), 0);
    EXPECT_EQ(quantize(out.at(0, 1, 0)), 85);
    EXPECT_EQ(quantize(out.at(0, 2, 0)), 170);
    EXPECT_EQ(quantize(out.at(0, 3, 0)), 255);
}

TEST(Ops, AutoContrastStretchesToFullRange) {
    Image img(1, 3);
    const int levels[3] = {50, 100, 150};
    for (int x = 0; x < 3; ++x)
        for (int c = 0; c < 3; ++c) img.at(0, x, c) = levels[x] / 255.0;
    Rng rng(0);
    const Image out = apply_operator(OpId::AutoContrast, img, 0, nullptr, rng);
    EXPECT_EQ(quantize(out.at(0, 0, 1)), 0);
    EXPECT_EQ(quantize(out.at(0, 1, 1)), 128);  // floor(50*2.55+0.5)
    EXPECT_EQ(quantize(out.at(0, 2, 1)), 255);
}

TEST(Ops, SolarizeAndPosterizeHandValues) {
    Image img(1, 2);
    for (int c = 0; c < 3; ++c) {
        img.at(0, 0, c) = 100 / 255.0;
        img.at(0, 1, c) = 200 / 255.0;
    }
    Rng rng(0);
    // m=9: threshold 0, everything inverted.
    const Image sol = apply_operator(OpId::Solarize, img, 9, nullptr, rng);
    EXPECT_EQ(quantize(sol.at(0, 0, 0)), 155);
    EXPECT_EQ(quantize(sol.at(0, 1, 0)), 55);
    // m=9 keeps 4 bits: 100 -> 96, 200 -> 192.
    const Image post = apply_operator(OpId::Posterize, img, 9, nullptr, rng);
    EXPECT_EQ(quantize(post.at(0, 0, 2)), 96);
    EXPECT_EQ(quantize(post.at(0, 1, 2)), 192);
}

TEST(Ops, BrightnessScalesPixels) {
    Image img(2, 2, 0.4);
    Rng rng(0);
    const Image out = apply_operator(OpId::Brightness, img, 9, nullptr, rng);
    for (double v : out.pixels) EXPECT_NEAR(v, 0.76, 1e-12);
}

TEST(Ops, TranslateMovesContent) {
    Image img(20, 20, 0.0);
    for (int c = 0; c < 3; ++c) img.at(10, 10, c) = 1.0;
    // m5 on width 20 shifts by 0.45 * 20 * 5/9 = 5 pixels, either way.
    for (std::uint64_t s = 0; s < 4; ++s) {
        Rng rng(s);
        const Image out = apply_operator(OpId::TranslateX, img, 5, nullptr, rng);
        EXPECT_NEAR(out.at(10, 10, 0), 0.0, 1e-9);
        EXPECT_NEAR(std::max(out.at(10, 5, 0), out.at(10, 15, 0)), 1.0, 1e-9);
    }
}

TEST(Ops, SamplePairingNeedsPartner) {
    const Image img = noisy_image(1);
    Rng rng(0);
    EXPECT_THROW(apply_operator(OpId::SamplePairing, img, 5, nullptr, rng), std::invalid_argument);
    const Image partner(img.height, img.width, 1.0);
    const Image out = apply_operator(OpId::SamplePairing, img, 9, &partner, rng);
    EXPECT_NEAR(out.pixels[7], 0.6 * img.pixels[7] + 0.4, 1e-12);
}

TEST(Ops, CutoutFillsASquare) {
    Image img(10, 10, 0.0);
    Rng rng(3);
    const Image out = apply_operator(OpId::Cutout, img, 9, nullptr, rng);
    int filled = 0;
    for (double v : out.pixels) filled += v == 0.5;
    EXPECT_GT(filled, 0);
    EXPECT_LE(filled, 2 * 2 * 3);
}

TEST(Ops, PolicyApplicationFrequency) {
    const Image img = noisy_image(2);
    for (int p : {0, 10}) {
        for (std::uint64_t s = 0; s < 200; ++s) {
            Rng rng(s);
            const Image out = apply_policy({OpId::Invert, p, 5}, img, nullptr, rng);
            EXPECT_EQ(out != img, p == 10);
        }
    }
    int applied = 0;
    for (std::uint64_t s = 0; s < 10000; ++s) {
        Rng rng(derive_seed(77, s));
        applied += apply_policy({OpId::Invert, 5, 5}, img, nullptr, rng) != img;
    }
    EXPECT_NEAR(applied / 10000.0, 0.5, 0.02);
}

TEST(Ops, EqualizeLeavesConstantImageUnchanged) {
    const Image img(4, 4, 77 / 255.0);
    Rng rng(0);
    EXPECT_EQ(apply_operator(OpId::Equalize, img, 0, nullptr, rng), img);
}

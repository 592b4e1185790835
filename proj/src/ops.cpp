#include "lbaug/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lbaug {

namespace {

constexpr std::array<std::string_view, kNumOps> kNames = {
    "ShearX",   "ShearY",    "TranslateX", "TranslateY", "Rotate",     "AutoContrast", "Invert", "Equalize",
    "Solarize", "Posterize", "Contrast",   "Color",      "Brightness", "Sharpness",    "Cutout", "SamplePairing"};

constexpr std::array<MagnitudeSpec, kNumOps> kMagnitudes = {{
    {ParamKind::shear, 0.3, true},
    {ParamKind::shear, 0.3, true},
    {ParamKind::translate, 0.45, true},
    {ParamKind::translate, 0.45, true},
    {ParamKind::angle, 30.0, true},
    {ParamKind::none, 0.0, false},
    {ParamKind::none, 0.0, false},
    {ParamKind::none, 0.0, false},
    {ParamKind::threshold, 1.0, false},
    {ParamKind::bits, 4.0, false},
    {ParamKind::enhance, 0.9, false},
    {ParamKind::enhance, 0.9, false},
    {ParamKind::enhance, 0.9, false},
    {ParamKind::enhance, 0.9, false},
    {ParamKind::cutout, 0.2, false},
    {ParamKind::mix, 0.4, false},
}};

constexpr double kFill = 0.5;

void check_level(int m_level) {
    if (m_level < 0 || m_level >= kNumMLevels)
        throw std::out_of_range("magnitude level " + std::to_string(m_level) + " outside [0, 9]");
}

Image quantized_map(const Image& img, const std::array<std::array<std::uint8_t, 256>, 3>& lut) {
    Image out(img.height, img.width);
    for (std::size_t i = 0; i < img.size(); ++i) out.pixels[i] = lut[i % 3][quantize(img.pixels[i])] / 255.0;
    return out;
}

std::array<std::array<int, 256>, 3> histograms(const Image& img) {
    std::array<std::array<int, 256>, 3> h{};
    for (std::size_t i = 0; i < img.size(); ++i) ++h[i % 3][quantize(img.pixels[i])];
    return h;
}

Image autocontrast(const Image& img) {
    const auto h = histograms(img);
    std::array<std::array<std::uint8_t, 256>, 3> lut{};
    for (int c = 0; c < 3; ++c) {
        int lo = 0, hi = 255;
        while (lo < 255 && h[c][lo] == 0) ++lo;
        while (hi > 0 && h[c][hi] == 0) --hi;
        for (int v = 0; v < 256; ++v) {
            if (hi <= lo) {
                lut[c][v] = static_cast<std::uint8_t>(v);
            } else {
                const double s = std::floor((v - lo) * 255.0 / (hi - lo) + 0.5);
                lut[c][v] = static_cast<std::uint8_t>(std::clamp(s, 0.0, 255.0));
            }
        }
    }
    return quantized_map(img, lut);
}

// Histogram equalization driven by the count of pixels strictly below each
// occupied level, normalised by the pixels outside the top level. Targets are
// made strictly increasing over occupied levels so distinct levels never merge;
// this makes the map depend only on the ordered bin counts, hence idempotent.
Image equalize(const Image& img) {
    const auto h = histograms(img);
    std::array<std::array<std::uint8_t, 256>, 3> lut{};
    for (int c = 0; c < 3; ++c) {
        for (int v = 0; v < 256; ++v) lut[c][v] = static_cast<std::uint8_t>(v);
        std::vector<int> levels;
        for (int v = 0; v < 256; ++v)
            if (h[c][v] > 0) levels.push_back(v);
        const int k = static_cast<int>(levels.size());
        if (k < 2) continue;
        long total = 0;
        for (int v : levels) total += h[c][v];
        const long denom = total - h[c][levels.back()];
        long below = 0;
        int prev = -1;
        for (int i = 0; i < k; ++i) {
            const int target = static_cast<int>(std::floor(255.0 * static_cast<double>(below) / denom + 0.5));
            const int mapped = std::min(std::max(target, prev + 1), 255 - (k - 1 - i));
            lut[c][levels[i]] = static_cast<std::uint8_t>(mapped);
            prev = mapped;
            below += h[c][levels[i]];
        }
    }
    return quantized_map(img, lut);
}

Image solarize(const Image& img, double threshold) {
    const int t = static_cast<int>(std::lround(256.0 * threshold));
    std::array<std::array<std::uint8_t, 256>, 3> lut{};
    for (int c = 0; c < 3; ++c)
        for (int v = 0; v < 256; ++v) lut[c][v] = static_cast<std::uint8_t>(v >= t ? 255 - v : v);
    return quantized_map(img, lut);
}

Image posterize(const Image& img, double bits) {
    const int b = std::clamp(static_cast<int>(std::lround(bits)), 1, 8);
    const int mask = (0xFF << (8 - b)) & 0xFF;
    std::array<std::array<std::uint8_t, 256>, 3> lut{};
    for (int c = 0; c < 3; ++c)
        for (int v = 0; v < 256; ++v) lut[c][v] = static_cast<std::uint8_t>(v & mask);
    return quantized_map(img, lut);
}

// Blend of the form degenerate + factor * (image - degenerate), the usual
// enhancement formulation.
Image blend(const Image& degenerate, const Image& img, double factor) {
    Image out(img.height, img.width);
    for (std::size_t i = 0; i < img.size(); ++i)
        out.pixels[i] = degenerate.pixels[i] + factor * (img.pixels[i] - degenerate.pixels[i]);
    return out;
}

Image contrast(const Image& img, double factor) {
    double mean = 0.0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) mean += detail::luminance(img, y, x);
    mean /= static_cast<double>(img.height) * img.width;
    return blend(Image(img.height, img.width, mean), img, factor);
}

Image color(const Image& img, double factor) {
    Image gray(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double g = detail::luminance(img, y, x);
            for (int c = 0; c < 3; ++c) gray.at(y, x, c) = g;
        }
    return blend(gray, img, factor);
}

Image brightness(const Image& img, double factor) { return blend(Image(img.height, img.width, 0.0), img, factor); }

// Smoothing kernel [[1,1,1],[1,5,1],[1,1,1]]/13 on interior pixels; the border
// row and column are left as-is.
Image sharpness(const Image& img, double factor) {
    Image smooth = img;
    for (int y = 1; y + 1 < img.height; ++y)
        for (int x = 1; x + 1 < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double s = 4.0 * img.at(y, x, c);
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) s += img.at(y + dy, x + dx, c);
                smooth.at(y, x, c) = s / 13.0;
            }
    return blend(smooth, img, factor);
}

Image cutout(const Image& img, double side_frac, Rng& rng) {
    Image out = img;
    const int side = static_cast<int>(std::lround(side_frac * img.width));
    const int cy = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.height)));
    const int cx = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.width)));
    const int y0 = std::max(0, cy - side / 2), x0 = std::max(0, cx - side / 2);
    const int y1 = std::min(img.height, y0 + side), x1 = std::min(img.width, x0 + side);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = kFill;
    return out;
}

}  // namespace

const std::array<OpId, kNumOps>& all_ops() {
    static const std::array<OpId, kNumOps> ops = [] {
        std::array<OpId, kNumOps> a{};
        for (int i = 0; i < kNumOps; ++i) a[i] = static_cast<OpId>(i);
        return a;
    }();
    return ops;
}

std::string_view op_name(OpId op) { return kNames.at(static_cast<std::size_t>(op)); }

OpId op_from_name(std::string_view name) {
    for (int i = 0; i < kNumOps; ++i)
        if (kNames[i] == name) return static_cast<OpId>(i);
    throw std::invalid_argument("unknown operator '" + std::string(name) + "'");
}

OpId op_from_code(int code) {
    if (code < 0 || code >= kNumOps) throw std::out_of_range("operator code " + std::to_string(code));
    return static_cast<OpId>(code);
}

const MagnitudeSpec& magnitude_spec(OpId op) { return kMagnitudes.at(static_cast<std::size_t>(op)); }

bool has_magnitude(OpId op) { return magnitude_spec(op).kind != ParamKind::none; }

double level_to_param(OpId op, int m_level, Rng& rng) {
    check_level(m_level);
    const auto& spec = magnitude_spec(op);
    const double frac = m_level / 9.0;
    double sign = 1.0;
    if (spec.is_signed) sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    switch (spec.kind) {
        case ParamKind::shear:
        case ParamKind::translate:
        case ParamKind::angle: return sign * frac * spec.max_extent;
        case ParamKind::threshold: return 1.0 - frac * spec.max_extent;
        case ParamKind::bits: return 8.0 - frac * spec.max_extent;
        case ParamKind::enhance: return 1.0 + frac * spec.max_extent;
        case ParamKind::cutout:
        case ParamKind::mix: return frac * spec.max_extent;
        case ParamKind::none: return 0.0;
    }
    return 0.0;
}

void validate(const PolicyTriple& t) {
    if (static_cast<int>(t.op) < 0 || static_cast<int>(t.op) >= kNumOps) throw std::out_of_range("operator code");
    if (t.p_level < 0 || t.p_level >= kNumPLevels)
        throw std::out_of_range("probability level " + std::to_string(t.p_level) + " outside [0, 10]");
    check_level(t.m_level);
}

std::string to_string(const PolicyTriple& t) {
    return std::string(op_name(t.op)) + ":" + std::to_string(t.p_level) + ":" + std::to_string(t.m_level);
}

PolicyTriple parse_triple(const std::string& text) {
    const auto a = text.find(':');
    const auto b = a == std::string::npos ? a : text.find(':', a + 1);
    if (a == std::string::npos || b == std::string::npos || text.find(':', b + 1) != std::string::npos)
        throw std::invalid_argument("policy triple must look like op_name:p_level:m_level, got '" + text + "'");
    PolicyTriple t;
    t.op = op_from_name(text.substr(0, a));
    try {
        std::size_t used = 0;
        const std::string ps = text.substr(a + 1, b - a - 1), ms = text.substr(b + 1);
        t.p_level = std::stoi(ps, &used);
        if (used != ps.size()) throw std::invalid_argument(ps);
        t.m_level = std::stoi(ms, &used);
        if (used != ms.size()) throw std::invalid_argument(ms);
    } catch (const std::logic_error&) {
        throw std::invalid_argument("malformed levels in policy triple '" + text + "'");
    }
    validate(t);
    return t;
}

namespace detail {

double luminance(const Image& img, int y, int x) {
    return 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
}

// Output pixel (x, y), in coordinates centred on the image, samples the source
// at [a b; c d] * (x, y) + (tx, ty).
Image affine_bilinear(const Image& img, double a, double b, double c, double d, double tx, double ty, double fill) {
    Image out(img.height, img.width);
    const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
    auto sample = [&](int yy, int xx, int ch) {
        if (yy < 0 || yy >= img.height || xx < 0 || xx >= img.width) return fill;
        return img.at(yy, xx, ch);
    };
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double X = x - cx, Y = y - cy;
            const double sx = a * X + b * Y + tx + cx;
            const double sy = c * X + d * Y + ty + cy;
            const double fx0 = std::floor(sx), fy0 = std::floor(sy);
            const double fx = sx - fx0, fy = sy - fy0;
            const int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
            for (int ch = 0; ch < 3; ++ch) {
                out.at(y, x, ch) = sample(y0, x0, ch) * (1 - fx) * (1 - fy) + sample(y0, x0 + 1, ch) * fx * (1 - fy) +
                                   sample(y0 + 1, x0, ch) * (1 - fx) * fy + sample(y0 + 1, x0 + 1, ch) * fx * fy;
            }
        }
    }
    return out;
}

}  // namespace detail

Image apply_operator(OpId op, const Image& image, int m_level, const Image* partner, Rng& rng) {
    check_level(m_level);
    if (op == OpId::SamplePairing) {
        if (!partner) throw std::invalid_argument("SamplePairing requires a partner image");
        if (partner->height != image.height || partner->width != image.width)
            throw std::invalid_argument("SamplePairing partner has mismatched dimensions");
    }
    const double param = level_to_param(op, m_level, rng);
    if (has_magnitude(op) && m_level == 0) return image;

    Image out;
    switch (op) {
        case OpId::ShearX: out = detail::affine_bilinear(image, 1, param, 0, 1, 0, 0, kFill); break;
        case OpId::ShearY: out = detail::affine_bilinear(image, 1, 0, param, 1, 0, 0, kFill); break;
        case OpId::TranslateX:
            out = detail::affine_bilinear(image, 1, 0, 0, 1, -param * image.width, 0, kFill);
            break;
        case OpId::TranslateY:
            out = detail::affine_bilinear(image, 1, 0, 0, 1, 0, -param * image.height, kFill);
            break;
        case OpId::Rotate: {
            const double th = param * std::numbers::pi / 180.0;
            const double cs = std::cos(th), sn = std::sin(th);
            out = detail::affine_bilinear(image, cs, sn, -sn, cs, 0, 0, kFill);
            break;
        }
        case OpId::AutoContrast: out = autocontrast(image); break;
        case OpId::Invert:
            out = Image(image.height, image.width);
            for (std::size_t i = 0; i < image.size(); ++i) out.pixels[i] = 1.0 - image.pixels[i];
            break;
        case OpId::Equalize: out = equalize(image); break;
        case OpId::Solarize: out = solarize(image, param); break;
        case OpId::Posterize: out = posterize(image, param); break;
        case OpId::Contrast: out = contrast(image, param); break;
        case OpId::Color: out = color(image, param); break;
        case OpId::Brightness: out = brightness(image, param); break;
        case OpId::Sharpness: out = sharpness(image, param); break;
        case OpId::Cutout: out = cutout(image, param, rng); break;
        case OpId::SamplePairing: {
            out = Image(image.height, image.width);
            for (std::size_t i = 0; i < image.size(); ++i)
                out.pixels[i] = (1.0 - param) * image.pixels[i] + param * partner->pixels[i];
            break;
        }
    }
    out.clamp();
    return out;
}

Image apply_policy(const PolicyTriple& t, const Image& image, const Dataset* partner_pool, Rng& rng) {
    validate(t);
    const double u = rng.uniform();
    if (!(u < t.probability())) return image;
    const Image* partner = nullptr;
    if (t.op == OpId::SamplePairing) {
        if (!partner_pool || partner_pool->empty()) throw std::invalid_argument("SamplePairing requires a partner pool");
        partner = &partner_pool->instances[rng.below(partner_pool->size())].image;
    }
    return apply_operator(t.op, image, t.m_level, partner, rng);
}

}  // namespace lbaug

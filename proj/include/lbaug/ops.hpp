#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "lbaug/image.hpp"
#include "lbaug/rng.hpp"

namespace lbaug {

enum class OpId : int {
    ShearX = 0,
    ShearY,
    TranslateX,
    TranslateY,
    Rotate,
    AutoContrast,
    Invert,
    Equalize,
    Solarize,
    Posterize,
    Contrast,
    Color,
    Brightness,
    Sharpness,
    Cutout,
    SamplePairing,
};

inline constexpr int kNumOps = 16;
inline constexpr int kNumPLevels = 11;
inline constexpr int kNumMLevels = 10;

enum class ParamKind { shear, translate, angle, threshold, bits, enhance, cutout, mix, none };

struct MagnitudeSpec {
    ParamKind kind;
    double max_extent;  // parameter reached at m_level 9 (for threshold/bits: the extent of the change)
    bool is_signed;
};

const std::array<OpId, kNumOps>& all_ops();
std::string_view op_name(OpId op);
OpId op_from_name(std::string_view name);
inline int op_code(OpId op) { return static_cast<int>(op); }
OpId op_from_code(int code);

const MagnitudeSpec& magnitude_spec(OpId op);
bool has_magnitude(OpId op);

// Maps a magnitude level to the operator's parameter:
//   shear      tangent factor in [0, 0.3], random sign
//   translate  fraction of the image dimension in [0, 0.45], random sign
//   angle      degrees in [0, 30], random sign
//   threshold  Solarize threshold as a fraction, 1.0 at level 0 down to 0.0
//   bits       Posterize bits kept, 8 at level 0 down to 4
//   enhance    factor 1 + 0.9 * m/9
//   cutout     square side as a fraction of the width in [0, 0.2]
//   mix        SamplePairing partner weight in [0, 0.4]
//   none       always 0
// Signed kinds always draw their sign from rng, including at level 0.
double level_to_param(OpId op, int m_level, Rng& rng);

struct PolicyTriple {
    OpId op = OpId::ShearX;
    int p_level = 0;
    int m_level = 0;

    double probability() const { return p_level / 10.0; }
    bool operator==(const PolicyTriple&) const = default;
};

void validate(const PolicyTriple& t);
std::string to_string(const PolicyTriple& t);
PolicyTriple parse_triple(const std::string& text);

// Applies one operator unconditionally. Output pixels are clamped to [0, 1].
// Magnitude-bearing operators at m_level 0 return a pixel-identical copy.
Image apply_operator(OpId op, const Image& image, int m_level, const Image* partner, Rng& rng);

// Stochastic application: draws u ~ U[0,1) and applies the
// operator iff u < p_level/10. SamplePairing draws its partner uniformly from
// partner_pool after the application decision.
Image apply_policy(const PolicyTriple& t, const Image& image, const Dataset* partner_pool, Rng& rng);

namespace detail {
// Exposed for tests.
double luminance(const Image& img, int y, int x);
Image affine_bilinear(const Image& img, double a, double b, double c, double d, double tx, double ty, double fill);
}  // namespace detail

}  // namespace lbaug

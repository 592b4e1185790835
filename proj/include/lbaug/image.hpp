#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lbaug {

// RGB raster with values in [0, 1], stored row-major as (y, x, channel).
struct Image {
    static constexpr int channels = 3;

    int height = 0;
    int width = 0;
    std::vector<double> pixels;

    Image() = default;
    Image(int h, int w, double fill = 0.0) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, fill) {}

    double& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    double at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    std::size_t size() const { return pixels.size(); }

    void clamp();
    bool operator==(const Image&) const = default;
};

using LabelVector = std::vector<std::uint8_t>;

struct Instance {
    std::string id;
    Image image;
    LabelVector labels;
};

enum class Split { train, valid, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct Dataset {
    std::vector<Instance> instances;
    std::vector<std::string> label_names;
    Split split = Split::train;

    std::size_t size() const { return instances.size(); }
    std::size_t num_labels() const { return label_names.size(); }
    bool empty() const { return instances.empty(); }

    // Throws std::invalid_argument if dimensions, label counts or ids are inconsistent.
    void validate() const;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<double> positive_rates(const Dataset& ds);

// 8-bit quantization used for storage and for the 8-bit operators:
// floor(v * 255 + 0.5) clamped to [0, 255].
std::uint8_t quantize(double v);

std::string label_string(const LabelVector& y);
LabelVector parse_label_string(const std::string& s);

}  // namespace lbaug

#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lbaug/rng.hpp"
#include "lbaug/tensor.hpp"

namespace lbaug {

enum class LayerType { dense, conv3x3, avgpool2x2, relu, dropout, sigmoid, softmax_rows };

std::string to_string(LayerType t);
LayerType layer_type_from_string(const std::string& s);

struct LayerSpec {
    LayerType type = LayerType::relu;
    int in = 0;          // dense inputs or conv input channels
    int out = 0;         // dense outputs or conv output channels
    double rate = 0.0;   // dropout rate

    static LayerSpec dense(int in, int out) { return {LayerType::dense, in, out, 0.0}; }
    static LayerSpec conv3x3(int in_ch, int out_ch) { return {LayerType::conv3x3, in_ch, out_ch, 0.0}; }
    static LayerSpec avgpool2x2() { return {LayerType::avgpool2x2, 0, 0, 0.0}; }
    static LayerSpec relu() { return {LayerType::relu, 0, 0, 0.0}; }
    static LayerSpec dropout(double rate) { return {LayerType::dropout, 0, 0, rate}; }
    static LayerSpec sigmoid() { return {LayerType::sigmoid, 0, 0, 0.0}; }
    static LayerSpec softmax_rows() { return {LayerType::softmax_rows, 0, 0, 0.0}; }

    bool operator==(const LayerSpec&) const = default;
};

struct Layer {
    LayerSpec spec;
    std::vector<int> in_shape;   // per sample
    std::vector<int> out_shape;  // per sample
    std::vector<double> weight;  // dense: out x in; conv: out x (in*9), row-major
    std::vector<double> bias;

    bool has_params() const { return spec.type == LayerType::dense || spec.type == LayerType::conv3x3; }
};

// Feedforward stack. Batched tensors carry the batch extent first; the
// per-sample input shape is either {features} or {channels, height, width}.
struct Network {
    std::vector<int> input_shape;
    std::vector<Layer> layers;
    bool training = false;

    // Validates shapes and initialises weights uniformly in
    // +-sqrt(6 / (fan_in + fan_out)) with zero biases.
    static Network build(const std::vector<int>& input_shape, const std::vector<LayerSpec>& specs, Rng& rng);

    std::vector<int> output_shape() const;
    std::size_t param_count() const;
    std::vector<LayerSpec> specs() const;
    // FNV-1a over the raw parameter bytes; used to verify that frozen networks stay untouched.
    std::uint64_t checksum() const;
    // Number of leading layers that produce logits, i.e. excluding a trailing sigmoid.
    std::size_t logit_layers() const;
};

struct ForwardCache {
    std::vector<Tensor> inputs;                 // input seen by each executed layer
    std::vector<std::vector<double>> aux;       // dropout masks / im2col buffers
    Tensor output;
    std::size_t executed = 0;
};

struct Gradients {
    std::vector<std::vector<double>> weight;
    std::vector<std::vector<double>> bias;
    Tensor input;

    static Gradients zeros_like(const Network& net);
    void add(const Gradients& other);
    void scale(double s);
};

inline constexpr std::size_t kAllLayers = std::numeric_limits<std::size_t>::max();

// Runs layers [0, upto). In training mode dropout draws masks from rng (required
// when the net contains dropout). Inverted dropout: masks are scaled by
// 1/(1-rate) so evaluation is a plain forward pass. cache may be null when no
// backward pass follows.
Tensor forward(const Network& net, const Tensor& input, ForwardCache* cache, Rng* rng, std::size_t upto = kAllLayers);

// Backpropagates `upstream` (gradient w.r.t. the output of the executed prefix)
// through the layers recorded in cache. With input_grad = false the gradient
// w.r.t. the network input is skipped (Gradients::input stays empty), which
// saves the most expensive col2im pass during training.
Gradients backward(const Network& net, const ForwardCache& cache, const Tensor& upstream, bool input_grad = true);

}  // namespace lbaug

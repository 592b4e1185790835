#include "lbaug/network.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace lbaug {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// Eigen chooses its vectorised peeling from the runtime alignment of mapped
// buffers, so sums over heap vectors could change with where malloc put them.
// Products and reductions therefore run on Eigen-owned (aligned) copies.
template <class A, class B>
RowMat product(const A& a, const B& b) {
    const RowMat ra = a, rb = b;
    RowMat r(ra.rows(), rb.cols());
    r.noalias() = ra * rb;
    return r;
}

template <class A>
Eigen::RowVectorXd col_sums(const A& a) {
    const RowMat ra = a;
    return ra.colwise().sum();
}

std::string shape_str(const std::vector<int>& s) { return Tensor(s).shape_string(); }

std::vector<int> infer_out_shape(const LayerSpec& spec, const std::vector<int>& in) {
    switch (spec.type) {
        case LayerType::dense: {
            if (static_cast<int>(shape_product(in)) != spec.in)
                throw std::invalid_argument("dense layer expects " + std::to_string(spec.in) + " inputs, got shape " +
                                            shape_str(in));
            if (spec.out <= 0) throw std::invalid_argument("dense layer needs a positive output width");
            return {spec.out};
        }
        case LayerType::conv3x3:
            if (in.size() != 3 || in[0] != spec.in)
                throw std::invalid_argument("conv3x3 expects " + std::to_string(spec.in) + " channels, got shape " +
                                            shape_str(in));
            if (spec.out <= 0) throw std::invalid_argument("conv3x3 needs a positive channel count");
            return {spec.out, in[1], in[2]};
        case LayerType::avgpool2x2:
            if (in.size() != 3 || in[1] % 2 || in[2] % 2)
                throw std::invalid_argument("avgpool2x2 needs an even spatial shape, got " + shape_str(in));
            return {in[0], in[1] / 2, in[2] / 2};
        case LayerType::dropout:
            if (!(spec.rate >= 0.0 && spec.rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
            return in;
        case LayerType::softmax_rows:
        case LayerType::relu:
        case LayerType::sigmoid: return in;
    }
    return in;
}

void im2col(const double* x, int N, int C, int H, int W, std::vector<double>& cols) {
    const std::size_t HW = static_cast<std::size_t>(H) * W;
    const std::size_t ncols = N * HW;
    cols.assign(static_cast<std::size_t>(C) * 9 * ncols, 0.0);
    for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
                double* row = cols.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * ncols;
                for (int n = 0; n < N; ++n) {
                    const double* src = x + (static_cast<std::size_t>(n) * C + c) * HW;
                    double* dst = row + n * HW;
                    for (int y = 0; y < H; ++y) {
                        const int sy = y + ky - 1;
                        if (sy < 0 || sy >= H) continue;
                        for (int xx = 0; xx < W; ++xx) {
                            const int sx = xx + kx - 1;
                            if (sx < 0 || sx >= W) continue;
                            dst[y * W + xx] = src[sy * W + sx];
                        }
                    }
                }
            }
}

void col2im(const double* cols, int N, int C, int H, int W, double* dx) {
    const std::size_t HW = static_cast<std::size_t>(H) * W;
    const std::size_t ncols = N * HW;
    for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
                const double* row = cols + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * ncols;
                for (int n = 0; n < N; ++n) {
                    double* dst = dx + (static_cast<std::size_t>(n) * C + c) * HW;
                    const double* src = row + n * HW;
                    for (int y = 0; y < H; ++y) {
                        const int sy = y + ky - 1;
                        if (sy < 0 || sy >= H) continue;
                        for (int xx = 0; xx < W; ++xx) {
                            const int sx = xx + kx - 1;
                            if (sx < 0 || sx >= W) continue;
                            dst[sy * W + sx] += src[y * W + xx];
                        }
                    }
                }
            }
}

void compute_param_grads_only(const Layer& layer, const Tensor& x, const Tensor& dy, int N,
                              const std::vector<double>& cols, std::vector<double>& gw, std::vector<double>& gb) {
    if (layer.spec.type == LayerType::dense) {
        const int in = layer.spec.in, out = layer.spec.out;
        ConstMapMat X(x.data.data(), N, in);
        ConstMapMat dY(dy.data.data(), N, out);
        MapMat(gw.data(), out, in) = product(dY.transpose(), X);
        Eigen::Map<Eigen::RowVectorXd>(gb.data(), out) = col_sums(dY);
        return;
    }
    const int C = layer.in_shape[0], H = layer.in_shape[1], W = layer.in_shape[2], O = layer.spec.out;
    const std::size_t HW = static_cast<std::size_t>(H) * W;
    RowMat dOut(O, static_cast<Eigen::Index>(N * HW));
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < O; ++o) {
            const double* src = dy.data.data() + (static_cast<std::size_t>(n) * O + o) * HW;
            std::copy(src, src + HW, dOut.data() + static_cast<std::size_t>(o) * N * HW + n * HW);
        }
    ConstMapMat Cm(cols.data(), C * 9, static_cast<Eigen::Index>(N * HW));
    MapMat(gw.data(), O, C * 9) = product(dOut, Cm.transpose());
    Eigen::Map<Eigen::VectorXd>(gb.data(), O) = col_sums(dOut.transpose()).transpose();
}

}  // namespace

std::string to_string(LayerType t) {
    switch (t) {
        case LayerType::dense: return "dense";
        case LayerType::conv3x3: return "conv3x3";
        case LayerType::avgpool2x2: return "avgpool2x2";
        case LayerType::relu: return "relu";
        case LayerType::dropout: return "dropout";
        case LayerType::sigmoid: return "sigmoid";
        case LayerType::softmax_rows: return "softmax_rows";
    }
    return "relu";
}

LayerType layer_type_from_string(const std::string& s) {
    for (auto t : {LayerType::dense, LayerType::conv3x3, LayerType::avgpool2x2, LayerType::relu, LayerType::dropout,
                   LayerType::sigmoid, LayerType::softmax_rows})
        if (to_string(t) == s) return t;
    throw std::invalid_argument("unknown layer type '" + s + "'");
}

Network Network::build(const std::vector<int>& input_shape, const std::vector<LayerSpec>& specs, Rng& rng) {
    if (input_shape.empty() || shape_product(input_shape) == 0) throw std::invalid_argument("empty input shape");
    Network net;
    net.input_shape = input_shape;
    std::vector<int> shape = input_shape;
    for (const auto& spec : specs) {
        Layer layer;
        layer.spec = spec;
        layer.in_shape = shape;
        layer.out_shape = infer_out_shape(spec, shape);
        if (spec.type == LayerType::dense || spec.type == LayerType::conv3x3) {
            const int fan_in = spec.type == LayerType::dense ? spec.in : spec.in * 9;
            const int fan_out = spec.type == LayerType::dense ? spec.out : spec.out * 9;
            const double limit = std::sqrt(6.0 / (fan_in + fan_out));
            layer.weight.resize(static_cast<std::size_t>(spec.out) * fan_in);
            for (double& w : layer.weight) w = rng.uniform(-limit, limit);
            layer.bias.assign(static_cast<std::size_t>(spec.out), 0.0);
        }
        shape = layer.out_shape;
        net.layers.push_back(std::move(layer));
    }
    return net;
}

std::vector<int> Network::output_shape() const { return layers.empty() ? input_shape : layers.back().out_shape; }

std::size_t Network::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
}

std::vector<LayerSpec> Network::specs() const {
    std::vector<LayerSpec> s;
    for (const auto& l : layers) s.push_back(l.spec);
    return s;
}

std::uint64_t Network::checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const std::vector<double>& v) {
        for (double d : v) {
            unsigned char bytes[sizeof(double)];
            std::memcpy(bytes, &d, sizeof(double));
            for (unsigned char b : bytes) {
                h ^= b;
                h *= 0x100000001b3ULL;
            }
        }
    };
    for (const auto& l : layers) {
        mix(l.weight);
        mix(l.bias);
    }
    return h;
}

std::size_t Network::logit_layers() const {
    if (!layers.empty() && layers.back().spec.type == LayerType::sigmoid) return layers.size() - 1;
    return layers.size();
}

Gradients Gradients::zeros_like(const Network& net) {
    Gradients g;
    for (const auto& l : net.layers) {
        g.weight.emplace_back(l.weight.size(), 0.0);
        g.bias.emplace_back(l.bias.size(), 0.0);
    }
    return g;
}

void Gradients::add(const Gradients& other) {
    for (std::size_t i = 0; i < weight.size(); ++i) {
        for (std::size_t j = 0; j < weight[i].size(); ++j) weight[i][j] += other.weight[i][j];
        for (std::size_t j = 0; j < bias[i].size(); ++j) bias[i][j] += other.bias[i][j];
    }
}

void Gradients::scale(double s) {
    for (auto& w : weight)
        for (double& v : w) v *= s;
    for (auto& b : bias)
        for (double& v : b) v *= s;
}

Tensor forward(const Network& net, const Tensor& input, ForwardCache* cache, Rng* rng, std::size_t upto) {
    const std::size_t n_layers = std::min(upto, net.layers.size());
    if (input.shape.empty()) throw std::invalid_argument("forward: input must carry a batch dimension");
    const int N = input.shape[0];
    std::vector<int> expected = {N};
    expected.insert(expected.end(), net.input_shape.begin(), net.input_shape.end());
    if (input.size() != shape_product(expected))
        throw std::invalid_argument("forward: input shape " + input.shape_string() + " does not match network input " +
                                    shape_str(net.input_shape));
    if (cache) {
        cache->inputs.assign(n_layers, Tensor());
        cache->aux.assign(n_layers, {});
        cache->executed = n_layers;
    }
    Tensor x = input;
    x.shape = expected;
    for (std::size_t li = 0; li < n_layers; ++li) {
        const Layer& layer = net.layers[li];
        std::vector<int> out_shape = {N};
        out_shape.insert(out_shape.end(), layer.out_shape.begin(), layer.out_shape.end());
        Tensor y(out_shape);
        switch (layer.spec.type) {
            case LayerType::dense: {
                const int in = layer.spec.in, out = layer.spec.out;
                ConstMapMat X(x.data.data(), N, in);
                ConstMapMat Wm(layer.weight.data(), out, in);
                MapMat Y(y.data.data(), N, out);
                Y = product(X, Wm.transpose());
                Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(layer.bias.data(), out);
                break;
            }
            case LayerType::conv3x3: {
                const int C = layer.in_shape[0], H = layer.in_shape[1], W = layer.in_shape[2], O = layer.spec.out;
                const std::size_t HW = static_cast<std::size_t>(H) * W;
                std::vector<double> local;
                std::vector<double>& cols = cache ? cache->aux[li] : local;
                im2col(x.data.data(), N, C, H, W, cols);
                ConstMapMat Cm(cols.data(), C * 9, static_cast<Eigen::Index>(N * HW));
                ConstMapMat Wm(layer.weight.data(), O, C * 9);
                RowMat out = product(Wm, Cm);
                for (int n = 0; n < N; ++n)
                    for (int o = 0; o < O; ++o) {
                        double* dst = y.data.data() + (static_cast<std::size_t>(n) * O + o) * HW;
                        const double* src = out.data() + static_cast<std::size_t>(o) * N * HW + n * HW;
                        const double b = layer.bias[o];
                        for (std::size_t p = 0; p < HW; ++p) dst[p] = src[p] + b;
                    }
                break;
            }
            case LayerType::avgpool2x2: {
                const int C = layer.in_shape[0], H = layer.in_shape[1], W = layer.in_shape[2];
                const int Ho = H / 2, Wo = W / 2;
                for (int n = 0; n < N; ++n)
                    for (int c = 0; c < C; ++c) {
                        const double* src = x.data.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
                        double* dst = y.data.data() + (static_cast<std::size_t>(n) * C + c) * Ho * Wo;
                        for (int yy = 0; yy < Ho; ++yy)
                            for (int xx = 0; xx < Wo; ++xx)
                                dst[yy * Wo + xx] = 0.25 * (src[2 * yy * W + 2 * xx] + src[2 * yy * W + 2 * xx + 1] +
                                                            src[(2 * yy + 1) * W + 2 * xx] +
                                                            src[(2 * yy + 1) * W + 2 * xx + 1]);
                    }
                break;
            }
            case LayerType::relu:
                for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
                break;
            case LayerType::sigmoid:
                for (std::size_t i = 0; i < x.size(); ++i) {
                    const double z = x.data[i];
                    y.data[i] = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
                }
                break;
            case LayerType::dropout: {
                if (!net.training || layer.spec.rate == 0.0) {
                    y.data = x.data;
                    if (cache) cache->aux[li].assign(x.size(), 1.0);
                    break;
                }
                if (!rng) throw std::invalid_argument("forward: dropout in training mode needs an rng");
                const double keep = 1.0 - layer.spec.rate;
                std::vector<double> local;
                std::vector<double>& mask = cache ? cache->aux[li] : local;
                mask.resize(x.size());
                for (std::size_t i = 0; i < x.size(); ++i) {
                    mask[i] = rng->uniform() < keep ? 1.0 / keep : 0.0;
                    y.data[i] = x.data[i] * mask[i];
                }
                break;
            }
            case LayerType::softmax_rows: {
                const std::size_t D = x.row_size();
                for (int n = 0; n < N; ++n) {
                    const double* src = x.data.data() + n * D;
                    double* dst = y.data.data() + n * D;
                    double mx = src[0];
                    for (std::size_t j = 1; j < D; ++j) mx = std::max(mx, src[j]);
                    double s = 0.0;
                    for (std::size_t j = 0; j < D; ++j) s += dst[j] = std::exp(src[j] - mx);
                    for (std::size_t j = 0; j < D; ++j) dst[j] /= s;
                }
                break;
            }
        }
        if (cache) cache->inputs[li] = std::move(x);
        x = std::move(y);
    }
    if (!x.all_finite()) throw std::runtime_error("forward: non-finite activations");
    if (cache) cache->output = x;
    return x;
}

Gradients backward(const Network& net, const ForwardCache& cache, const Tensor& upstream, bool input_grad) {
    if (cache.inputs.size() != cache.executed || cache.output.shape.empty())
        throw std::logic_error("backward called before forward");
    if (upstream.size() != cache.output.size())
        throw std::invalid_argument("backward: upstream gradient shape " + upstream.shape_string() +
                                    " does not match output " + cache.output.shape_string());
    Gradients g = Gradients::zeros_like(net);
    Tensor dy = upstream;
    dy.shape = cache.output.shape;
    const int N = cache.output.shape[0];
    for (std::size_t li = cache.executed; li-- > 0;) {
        const Layer& layer = net.layers[li];
        const Tensor& x = cache.inputs[li];
        // The first parameter layer's input gradient is only needed on request.
        if (li == 0 && !input_grad && layer.has_params()) {
            compute_param_grads_only(layer, x, dy, N, cache.aux[li], g.weight[li], g.bias[li]);
            dy = Tensor();
            break;
        }
        Tensor dx(x.shape);
        switch (layer.spec.type) {
            case LayerType::dense: {
                const int in = layer.spec.in, out = layer.spec.out;
                ConstMapMat X(x.data.data(), N, in);
                ConstMapMat dY(dy.data.data(), N, out);
                ConstMapMat Wm(layer.weight.data(), out, in);
                MapMat dW(g.weight[li].data(), out, in);
                dW = product(dY.transpose(), X);
                Eigen::Map<Eigen::RowVectorXd>(g.bias[li].data(), out) = col_sums(dY);
                MapMat dX(dx.data.data(), N, in);
                dX = product(dY, Wm);
                break;
            }
            case LayerType::conv3x3: {
                const int C = layer.in_shape[0], H = layer.in_shape[1], W = layer.in_shape[2], O = layer.spec.out;
                const std::size_t HW = static_cast<std::size_t>(H) * W;
                RowMat dOut(O, static_cast<Eigen::Index>(N * HW));
                for (int n = 0; n < N; ++n)
                    for (int o = 0; o < O; ++o) {
                        const double* src = dy.data.data() + (static_cast<std::size_t>(n) * O + o) * HW;
                        double* dst = dOut.data() + static_cast<std::size_t>(o) * N * HW + n * HW;
                        std::copy(src, src + HW, dst);
                    }
                const auto& cols = cache.aux[li];
                ConstMapMat Cm(cols.data(), C * 9, static_cast<Eigen::Index>(N * HW));
                MapMat dW(g.weight[li].data(), O, C * 9);
                dW = product(dOut, Cm.transpose());
                Eigen::Map<Eigen::VectorXd>(g.bias[li].data(), O) = col_sums(dOut.transpose()).transpose();
                ConstMapMat Wm(layer.weight.data(), O, C * 9);
                RowMat dcols = product(Wm.transpose(), dOut);
                col2im(dcols.data(), N, C, H, W, dx.data.data());
                break;
            }
            case LayerType::avgpool2x2: {
                const int C = layer.in_shape[0], H = layer.in_shape[1], W = layer.in_shape[2];
                const int Ho = H / 2, Wo = W / 2;
                for (int n = 0; n < N; ++n)
                    for (int c = 0; c < C; ++c) {
                        const double* src = dy.data.data() + (static_cast<std::size_t>(n) * C + c) * Ho * Wo;
                        double* dst = dx.data.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
                        for (int yy = 0; yy < H; ++yy)
                            for (int xx = 0; xx < W; ++xx) dst[yy * W + xx] = 0.25 * src[(yy / 2) * Wo + xx / 2];
                    }
                break;
            }
            case LayerType::relu:
                for (std::size_t i = 0; i < x.size(); ++i) dx.data[i] = x.data[i] > 0.0 ? dy.data[i] : 0.0;
                break;
            case LayerType::sigmoid:
                for (std::size_t i = 0; i < x.size(); ++i) {
                    const double z = x.data[i];
                    const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
                    dx.data[i] = dy.data[i] * s * (1.0 - s);
                }
                break;
            case LayerType::dropout: {
                const auto& mask = cache.aux[li];
                for (std::size_t i = 0; i < x.size(); ++i) dx.data[i] = dy.data[i] * mask[i];
                break;
            }
            case LayerType::softmax_rows: {
                const Tensor& yv = li + 1 < cache.executed ? cache.inputs[li + 1] : cache.output;
                const std::size_t D = x.row_size();
                for (int n = 0; n < N; ++n) {
                    const double* p = yv.data.data() + n * D;
                    const double* gy = dy.data.data() + n * D;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < D; ++j) dot += p[j] * gy[j];
                    for (std::size_t j = 0; j < D; ++j) dx.data[n * D + j] = p[j] * (gy[j] - dot);
                }
                break;
            }
        }
        dy = std::move(dx);
    }
    g.input = std::move(dy);
    return g;
}

}  // namespace lbaug

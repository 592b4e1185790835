#include "lbaug/checkpoint.hpp"

#include <sodium.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lbaug {

static_assert(std::endian::native == std::endian::little, "checkpoint encoding assumes a little-endian host");

std::string encode_doubles(const std::vector<double>& values) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(values.data());
    const std::size_t n = values.size() * sizeof(double);
    std::string out(sodium_base64_ENCODED_LEN(n, sodium_base64_VARIANT_ORIGINAL), '\0');
    sodium_bin2base64(out.data(), out.size(), bytes, n, sodium_base64_VARIANT_ORIGINAL);
    out.resize(std::strlen(out.c_str()));
    return out;
}

std::vector<double> decode_doubles(const std::string& text) {
    std::vector<unsigned char> buf(text.size() / 4 * 3 + 3);
    std::size_t len = 0;
    if (sodium_base642bin(buf.data(), buf.size(), text.data(), text.size(), nullptr, &len, nullptr,
                          sodium_base64_VARIANT_ORIGINAL) != 0)
        throw std::invalid_argument("checkpoint: malformed base64 parameter blob");
    if (len % sizeof(double) != 0) throw std::invalid_argument("checkpoint: parameter blob is not a float64 array");
    std::vector<double> out(len / sizeof(double));
    std::memcpy(out.data(), buf.data(), len);
    return out;
}

nlohmann::json specs_to_json(const std::vector<LayerSpec>& specs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : specs) {
        nlohmann::json j = {{"type", to_string(s.type)}};
        if (s.type == LayerType::dense || s.type == LayerType::conv3x3) {
            j["in"] = s.in;
            j["out"] = s.out;
        }
        if (s.type == LayerType::dropout) j["rate"] = s.rate;
        arr.push_back(j);
    }
    return arr;
}

std::vector<LayerSpec> specs_from_json(const nlohmann::json& j) {
    std::vector<LayerSpec> specs;
    for (const auto& e : j) {
        LayerSpec s;
        s.type = layer_type_from_string(e.at("type").get<std::string>());
        s.in = e.value("in", 0);
        s.out = e.value("out", 0);
        s.rate = e.value("rate", 0.0);
        specs.push_back(s);
    }
    return specs;
}

nlohmann::json network_to_json(const Network& net) {
    nlohmann::json j;
    j["version"] = kCheckpointVersion;
    j["input_shape"] = net.input_shape;
    nlohmann::json layers = specs_to_json(net.specs());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (!net.layers[i].has_params()) continue;
        layers[i]["weight"] = encode_doubles(net.layers[i].weight);
        layers[i]["bias"] = encode_doubles(net.layers[i].bias);
    }
    j["layers"] = layers;
    return j;
}

Network network_from_json(const nlohmann::json& j) {
    if (!j.contains("version")) throw std::invalid_argument("checkpoint: missing version field");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion)
        throw std::invalid_argument("checkpoint: unsupported version " + std::to_string(version));
    Rng rng(0);
    Network net = Network::build(j.at("input_shape").get<std::vector<int>>(), specs_from_json(j.at("layers")), rng);
    const auto& layers = j.at("layers");
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto& l = net.layers[i];
        if (!l.has_params()) continue;
        auto w = decode_doubles(layers[i].at("weight").get<std::string>());
        auto b = decode_doubles(layers[i].at("bias").get<std::string>());
        if (w.size() != l.weight.size() || b.size() != l.bias.size())
            throw std::invalid_argument("checkpoint: parameter count mismatch in layer " + std::to_string(i));
        l.weight = std::move(w);
        l.bias = std::move(b);
    }
    return net;
}

void save_network(const Network& net, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + file.string() + "'");
    out << network_to_json(net).dump(1) << '\n';
}

Network load_network(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot read checkpoint '" + file.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("checkpoint '" + file.string() + "': " + e.what());
    }
    return network_from_json(j);
}

}  // namespace lbaug

#include "lbaug/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace lbaug {

std::size_t shape_product(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw std::invalid_argument("negative tensor extent");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)), data(shape_product(shape), fill) {}

Tensor::Tensor(std::vector<int> s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != shape_product(shape))
        throw std::invalid_argument("tensor value count " + std::to_string(data.size()) + " does not match shape " +
                                    shape_string());
}

std::size_t Tensor::row_size() const {
    if (shape.empty()) return 0;
    return shape[0] == 0 ? 0 : data.size() / static_cast<std::size_t>(shape[0]);
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Tensor::shape_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

}  // namespace lbaug

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace lbaug {

struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0);
    Tensor(std::vector<int> s, std::vector<double> values);

    std::size_t size() const { return data.size(); }
    int dim(std::size_t i) const { return shape.at(i); }
    int rows() const { return shape.empty() ? 0 : shape[0]; }
    // Elements per leading index (per sample for batched tensors).
    std::size_t row_size() const;

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool all_finite() const;
    std::string shape_string() const;
    bool operator==(const Tensor&) const = default;
};

std::size_t shape_product(const std::vector<int>& shape);

}  // namespace lbaug

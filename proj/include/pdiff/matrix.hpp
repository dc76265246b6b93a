#pragma once

#include <cstddef>
#include <vector>

#include "pdiff/error.hpp"

namespace pdiff {

// Dense row-major matrix of doubles. Deliberately minimal: the arithmetic
// lives in pdiff::kernels, this is just owned storage with shape.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    void require_shape(std::size_t r, std::size_t c, const char* what) const {
        if (rows != r || cols != c)
            fail(ErrorCategory::shape, std::string(what) + ": expected " + std::to_string(r) + "x" +
                                           std::to_string(c) + ", got " + std::to_string(rows) +
                                           "x" + std::to_string(cols));
    }
};

}  // namespace pdiff

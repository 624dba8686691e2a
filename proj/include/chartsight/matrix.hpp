#pragma once

#include "chartsight/common.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace chartsight {

/// Dense row-major matrix of feature values.
class FeatureMatrix {
  public:
    FeatureMatrix() = default;
    explicit FeatureMatrix(std::size_t cols) : cols_(cols) {}
    FeatureMatrix(std::size_t rows, std::size_t cols) : data_(rows * cols, 0.0), cols_(cols) {}

    std::size_t rows() const { return cols_ == 0 ? 0 : data_.size() / cols_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double &operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

    void push_row(std::span<const double> values) {
        if (values.size() != cols_) {
            throw DimensionError(cols_, values.size());
        }
        data_.insert(data_.end(), values.begin(), values.end());
    }
    void reserve_rows(std::size_t n) { data_.reserve(n * cols_); }

    std::vector<double> column(std::size_t j) const {
        std::vector<double> out(rows());
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = (*this)(i, j);
        }
        return out;
    }

  private:
    std::vector<double> data_;
    std::size_t cols_ = 0;
};

/// Feature rows with binary labels (1 = charted).
struct LabeledMatrix {
    FeatureMatrix features;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
};

} // namespace chartsight

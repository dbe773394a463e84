#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace lgsrr {

/// Dense real vector. Entries are 64-bit floats.
class Vec {
public:
    Vec() = default;
    explicit Vec(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
    Vec(std::initializer_list<double> values) : data_(values) {}
    explicit Vec(std::vector<double> values) : data_(std::move(values)) {}

    std::size_t dim() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> span() noexcept { return data_; }
    std::span<const double> span() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }
    std::vector<double>& values() noexcept { return data_; }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    bool all_finite() const noexcept;

    friend bool operator==(const Vec&, const Vec&) = default;

private:
    std::vector<double> data_;
};

/// Dense row-major matrix.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Mat(std::size_t rows, std::size_t cols, std::vector<double> data);
    Mat(std::initializer_list<std::initializer_list<double>> rows);

    static Mat identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> span() noexcept { return data_; }
    std::span<const double> span() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    bool all_finite() const noexcept;

    friend bool operator==(const Mat&, const Mat&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

std::string describe_dim(std::size_t rows, std::size_t cols);

} // namespace lgsrr

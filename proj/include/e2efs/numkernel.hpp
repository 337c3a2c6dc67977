#pragma once

// Small dense numeric kernel: row-major double matrices, plain std::vector
// vectors, and the handful of products/reductions the rest of the library uses.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace e2efs {

using Vector = std::vector<double>;

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    Matrix transpose() const;
    std::string shape_string() const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// a * b. Throws std::invalid_argument naming both shapes when a.cols != b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);
/// transpose(a) * b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a * transpose(b).
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// Gauss error function, |error| < 1e-14 over the real line.
double erf(double x) noexcept;

double l1_norm(std::span<const double> v) noexcept;
double l2_norm_sq(std::span<const double> v) noexcept;
double l2_norm(std::span<const double> v) noexcept;

bool all_finite(std::span<const double> v) noexcept;
/// Throws std::domain_error mentioning `what` if any value is NaN or infinite.
void require_finite(std::span<const double> v, const char* what);

} // namespace e2efs

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gcad {

/// Base error for everything this library throws.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed on-disk data; carries file and line context where known.
struct ParseError : Error {
    using Error::Error;
};

/// Shape or numeric-domain violation inside a computation.
struct NumericError : Error {
    using Error::Error;
};

/// Raised when a graph cannot participate in a supervised loss because it
/// lacks one of the two label classes. Trainers catch this and skip.
struct OneClassGraph : Error {
    using Error::Error;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}

}  // namespace detail

/// Dense row-major matrix of 64-bit floats. The only numeric container in
/// the library; vectors are 1xC or Rx1 tensors.
class Tensor {
public:
    Tensor() = default;

    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        Tensor t(rows.size(), rows.size() ? rows.begin()->size() : 0);
        std::size_t r = 0;
        for (const auto& row : rows) {
            if (row.size() != t.cols_)
                throw NumericError("Tensor::from_rows: ragged initializer");
            std::size_t c = 0;
            for (double v : row) t(r, c++) = v;
            ++r;
        }
        return t;
    }

    static Tensor row_vector(const std::vector<double>& v) {
        Tensor t(1, v.size());
        t.data_ = v;
        return t;
    }

    static Tensor col_vector(const std::vector<double>& v) {
        Tensor t(v.size(), 1);
        t.data_ = v;
        return t;
    }

    static Tensor identity(std::size_t n) {
        Tensor t(n, n);
        for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
        return t;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    const std::vector<double>& storage() const { return data_; }

    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    Tensor transposed() const {
        Tensor t(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
        return t;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (double v : data_) s += v * v;
        return std::sqrt(s);
    }

    std::string shape_str() const {
        return detail::concat(rows_, "x", cols_);
    }

    bool operator==(const Tensor& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw NumericError(detail::concat(op, ": shape mismatch (", a.shape_str(), " vs ",
                                          b.shape_str(), ")"));
}

inline void require_finite(const char* op, const Tensor& t) {
    if (!t.all_finite())
        throw NumericError(detail::concat(op, ": produced a non-finite value"));
}

}  // namespace gcad

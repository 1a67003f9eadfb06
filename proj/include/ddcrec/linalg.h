#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddcrec {

// Input files or datasets that cannot be used as given.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf losses, degenerate geometry and similar failures of the numerics.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major matrix of doubles. Rows are embedding vectors.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  void set_zero();

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scale(double alpha, std::span<double> x);
double cosine(std::span<const double> a, std::span<const double> b);

// FNV-1a over the raw bytes; used to prove tables were left untouched.
std::uint64_t checksum(const Matrix& m);

// Unit-norm vector in embedding space.
class DirectionVector {
 public:
  // Normalizes `v`; empty result when its norm is below `min_norm`.
  static std::optional<DirectionVector> normalize(std::vector<double> v,
                                                  double min_norm = 1e-12);

  std::span<const double> values() const { return vec_; }
  std::size_t dim() const { return vec_.size(); }
  double operator[](std::size_t k) const { return vec_[k]; }

 private:
  explicit DirectionVector(std::vector<double> v) : vec_(std::move(v)) {}
  std::vector<double> vec_;
};

}  // namespace ddcrec

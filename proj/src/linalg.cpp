#include "ddcrec/linalg.h"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace ddcrec {

void Matrix::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t k = 0; k < x.size(); ++k) y[k] += alpha * x[k];
}

void scale(double alpha, std::span<double> x) {
  for (double& v : x) v *= alpha;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  const double c = dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

std::uint64_t checksum(const Matrix& m) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t k = 0; k < n; ++k) {
      h ^= bytes[k];
      h *= 1099511628211ULL;
    }
  };
  const std::uint64_t shape[2] = {m.rows(), m.cols()};
  mix(shape, sizeof(shape));
  mix(m.values().data(), m.values().size() * sizeof(double));
  return h;
}

std::optional<DirectionVector> DirectionVector::normalize(std::vector<double> v,
                                                          double min_norm) {
  const double n = norm(v);
  if (!(n >= min_norm) || !std::isfinite(n)) return std::nullopt;
  for (double& x : v) x /= n;
  return DirectionVector(std::move(v));
}

}  // namespace ddcrec

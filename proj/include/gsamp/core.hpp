#pragma once

// Shared value types (feature vectors/matrices, ground truth) and the small
// numeric and random utilities every other module builds on. All randomness
// flows through an explicitly passed generator; nothing reads ambient entropy.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsamp {

using SampleId = std::size_t;

enum class Errc {
  ZeroNorm,
  ShapeMismatch,
  NonFinite,
  NotNormalized,
  EmptyInput,
  TooFewClusters,
  NoClusters,
  NoTarget,
  NoValidQueries,
  BadMagic,
  ShapeOverflow,
  MissingId,
  DuplicateId,
  NonDense,
  ConfigError,
  IoError,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::ZeroNorm: return "ZeroNorm";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFinite: return "NonFinite";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::TooFewClusters: return "TooFewClusters";
    case Errc::NoClusters: return "NoClusters";
    case Errc::NoTarget: return "NoTarget";
    case Errc::NoValidQueries: return "NoValidQueries";
    case Errc::BadMagic: return "BadMagic";
    case Errc::ShapeOverflow: return "ShapeOverflow";
    case Errc::MissingId: return "MissingId";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::NonDense: return "NonDense";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& msg) { throw Error(code, msg); }

// Unit-norm check tolerance and the threshold below which a norm counts as zero.
inline constexpr double kUnitNormTol = 1e-6;
inline constexpr double kZeroNormFloor = 1e-12;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline void normalize_in_place(std::span<double> v) {
  if (v.empty()) raise(Errc::ShapeMismatch, "normalize: empty vector");
  const double n = l2_norm(v);
  if (n < kZeroNormFloor) raise(Errc::ZeroNorm, "normalize: norm below 1e-12");
  for (double& x : v) x /= n;
}

inline std::vector<double> normalize(std::vector<double> v) {
  normalize_in_place(v);
  return v;
}

// n x dim row-major feature store. Row i always belongs to SampleId i.
// The unit_rows flag records whether rows are maintained in unit-norm form;
// validate() enforces it when set.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t n, std::size_t dim, bool unit_rows = false)
      : n_(n), dim_(dim), unit_rows_(unit_rows), data_(n * dim, 0.0) {}

  std::size_t n() const { return n_; }
  std::size_t dim() const { return dim_; }
  bool unit_rows() const { return unit_rows_; }
  void set_unit_rows(bool f) { unit_rows_ = f; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<double> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }

  void set_row(std::size_t i, std::span<const double> v) {
    std::copy(v.begin(), v.end(), data_.begin() + static_cast<std::ptrdiff_t>(i * dim_));
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

 private:
  std::size_t n_ = 0;
  std::size_t dim_ = 0;
  bool unit_rows_ = false;
  std::vector<double> data_;
};

inline void validate_matrix(const FeatureMatrix& f) {
  if (f.n() < 1 || f.dim() < 1) raise(Errc::ShapeMismatch, "matrix must be at least 1x1");
  if (f.data().size() != f.n() * f.dim())
    raise(Errc::ShapeMismatch, "matrix storage does not match n*dim");
  for (double x : f.data())
    if (!std::isfinite(x)) raise(Errc::NonFinite, "matrix contains a non-finite value");
  if (f.unit_rows()) {
    for (std::size_t i = 0; i < f.n(); ++i) {
      const double nrm = l2_norm(f.row(i));
      if (std::abs(nrm - 1.0) > kUnitNormTol)
        raise(Errc::NotNormalized, "row " + std::to_string(i) + " has norm " + std::to_string(nrm));
    }
  }
}

// Rounds a value through the 32-bit representation used by feature files.
// The volatile store forces the narrowing: GCC 11's SLP vectorizer folds a
// plain (double)(float)x round trip into the identity at -O3.
inline double to_file_precision(double x) {
  volatile float narrowed = static_cast<float>(x);
  return static_cast<double>(narrowed);
}

// Rounds every entry through 32-bit float, the precision used by feature
// files. Clustering and its derived metrics run on this representation so a
// dumped matrix reproduces them bit-for-bit when read back.
inline FeatureMatrix quantize_file_precision(const FeatureMatrix& f) {
  FeatureMatrix out(f.n(), f.dim(), f.unit_rows());
  for (std::size_t i = 0; i < f.data().size(); ++i)
    out.data()[i] = to_file_precision(f.data()[i]);
  return out;
}

// Per-sample identity and camera labels.
struct GroundTruth {
  std::vector<int> identity;
  std::vector<int> camera;

  std::size_t size() const { return identity.size(); }
};

// ---------------------------------------------------------------------------
// Seeded randomness. Draws are built from raw mt19937_64 output so results do
// not depend on the standard library's distribution implementations.
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

// Uniform integer in [0, bound) by rejection sampling. bound must be > 0.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller; consumes two draws per value.
inline double gaussian(Rng& rng) {
  const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// In-place Fisher-Yates shuffle.
template <class T>
void fisher_yates(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

// Shuffles only the first `take` slots (enough to draw `take` distinct items).
template <class T>
void partial_fisher_yates(std::vector<T>& v, std::size_t take, Rng& rng) {
  for (std::size_t i = 0; i < take && i + 1 < v.size(); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, v.size() - i));
    std::swap(v[i], v[j]);
  }
}

}  // namespace gsamp

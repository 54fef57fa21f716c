#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "coldmri/errors.hpp"

namespace coldmri {

using Complex = std::complex<double>;

/// Dense row-major 2-D complex field.  The Tag parameter only distinguishes
/// image-domain from frequency-domain values at the type level; the layout is
/// identical.
template <class Tag>
class Field2D {
 public:
  Field2D() = default;

  Field2D(int height, int width) : height_(height), width_(width) {
    check_dims(height, width);
    data_.assign(static_cast<std::size_t>(height) * width, Complex{0.0, 0.0});
  }

  Field2D(int height, int width, std::vector<Complex> data)
      : height_(height), width_(width), data_(std::move(data)) {
    check_dims(height, width);
    if (data_.size() != static_cast<std::size_t>(height) * width) {
      throw ShapeError("field data length " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(height) + "x" +
                       std::to_string(width));
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  Complex& operator()(int row, int col) {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }
  const Complex& operator()(int row, int col) const {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }

  std::span<Complex> data() { return data_; }
  std::span<const Complex> data() const { return data_; }

  bool same_shape_as(const Field2D& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  bool all_finite() const {
    for (const Complex& z : data_) {
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    }
    return true;
  }

  /// L2 norm over all entries, treating the field as a flat complex vector.
  double norm() const {
    double s = 0.0;
    for (const Complex& z : data_) s += std::norm(z);
    return std::sqrt(s);
  }

 private:
  static void check_dims(int height, int width) {
    if (height <= 0 || width <= 0) {
      throw ShapeError("field dimensions must be positive, got " +
                       std::to_string(height) + "x" + std::to_string(width));
    }
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<Complex> data_;
};

struct ImageTag {};
struct SpectrumTag {};

/// Complex image-domain slice.
using ComplexImage = Field2D<ImageTag>;
/// Complex frequency-domain (k-space) data.
using KSpace = Field2D<SpectrumTag>;

template <class Tag>
void require_same_shape(const Field2D<Tag>& a, const Field2D<Tag>& b,
                        const char* what) {
  if (!a.same_shape_as(b)) {
    throw ShapeError(std::string(what) + ": shapes " +
                     std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                     " and " + std::to_string(b.height()) + "x" +
                     std::to_string(b.width()) + " differ");
  }
}

template <class Tag>
void require_finite(const Field2D<Tag>& a, const char* what) {
  if (!a.all_finite()) {
    throw InvalidInputError(std::string(what) + ": input contains non-finite values");
  }
}

template <class Tag>
Field2D<Tag> operator+(const Field2D<Tag>& a, const Field2D<Tag>& b) {
  require_same_shape(a, b, "operator+");
  Field2D<Tag> out(a.height(), a.width());
  auto oa = a.data();
  auto ob = b.data();
  auto oo = out.data();
  for (std::size_t i = 0; i < oo.size(); ++i) oo[i] = oa[i] + ob[i];
  return out;
}

template <class Tag>
Field2D<Tag> operator-(const Field2D<Tag>& a, const Field2D<Tag>& b) {
  require_same_shape(a, b, "operator-");
  Field2D<Tag> out(a.height(), a.width());
  auto oa = a.data();
  auto ob = b.data();
  auto oo = out.data();
  for (std::size_t i = 0; i < oo.size(); ++i) oo[i] = oa[i] - ob[i];
  return out;
}

template <class Tag>
Field2D<Tag> operator*(double s, const Field2D<Tag>& a) {
  Field2D<Tag> out(a.height(), a.width());
  auto oa = a.data();
  auto oo = out.data();
  for (std::size_t i = 0; i < oo.size(); ++i) oo[i] = s * oa[i];
  return out;
}

/// ||a - b|| / ||b||.  Throws InvalidInputError when ||b|| == 0 or either
/// operand has non-finite entries.
template <class Tag>
double rel_l2_error(const Field2D<Tag>& a, const Field2D<Tag>& b) {
  require_same_shape(a, b, "rel_l2_error");
  require_finite(a, "rel_l2_error");
  require_finite(b, "rel_l2_error");
  const double denom = b.norm();
  if (denom == 0.0) {
    throw InvalidInputError("rel_l2_error: reference has zero norm");
  }
  return (a - b).norm() / denom;
}

}  // namespace coldmri

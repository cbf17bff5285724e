#pragma once

#include <algorithm>
#include <cmath>

namespace magfe {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Vec2& operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }
  friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
constexpr Vec2 operator-(const Vec2& a) { return {-a.x, -a.y}; }
constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
/// z-component of the 2D cross product.
constexpr double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }
/// Rotated gradient: for g = grad a, returns Curl a = (d_y a, -d_x a).
constexpr Vec2 rotate_cw(const Vec2& g) { return {g.y, -g.x}; }

/// Row-major 2x2 matrix.
struct Mat2 {
  double xx = 0.0, xy = 0.0;
  double yx = 0.0, yy = 0.0;

  static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static constexpr Mat2 diagonal(double a, double b) { return {a, 0.0, 0.0, b}; }
  static constexpr Mat2 columns(const Vec2& c0, const Vec2& c1) { return {c0.x, c1.x, c0.y, c1.y}; }
  static constexpr Mat2 outer(const Vec2& a, const Vec2& b) {
    return {a.x * b.x, a.x * b.y, a.y * b.x, a.y * b.y};
  }

  constexpr Mat2& operator+=(const Mat2& o) {
    xx += o.xx;
    xy += o.xy;
    yx += o.yx;
    yy += o.yy;
    return *this;
  }
  constexpr Mat2& operator-=(const Mat2& o) {
    xx -= o.xx;
    xy -= o.xy;
    yx -= o.yx;
    yy -= o.yy;
    return *this;
  }
  constexpr Mat2& operator*=(double s) {
    xx *= s;
    xy *= s;
    yx *= s;
    yy *= s;
    return *this;
  }
  friend constexpr bool operator==(const Mat2&, const Mat2&) = default;
};

constexpr Mat2 operator+(Mat2 a, const Mat2& b) { return a += b; }
constexpr Mat2 operator-(Mat2 a, const Mat2& b) { return a -= b; }
constexpr Mat2 operator*(double s, Mat2 a) { return a *= s; }
constexpr Vec2 operator*(const Mat2& m, const Vec2& v) {
  return {m.xx * v.x + m.xy * v.y, m.yx * v.x + m.yy * v.y};
}
constexpr Mat2 operator*(const Mat2& a, const Mat2& b) {
  return {a.xx * b.xx + a.xy * b.yx, a.xx * b.xy + a.xy * b.yy,
          a.yx * b.xx + a.yy * b.yx, a.yx * b.xy + a.yy * b.yy};
}
constexpr Mat2 transpose(const Mat2& m) { return {m.xx, m.yx, m.xy, m.yy}; }
constexpr double det(const Mat2& m) { return m.xx * m.yy - m.xy * m.yx; }
constexpr Mat2 inverse(const Mat2& m) {
  const double d = det(m);
  return {m.yy / d, -m.xy / d, -m.yx / d, m.xx / d};
}
inline double max_abs(const Mat2& m) {
  return std::max({std::abs(m.xx), std::abs(m.xy), std::abs(m.yx), std::abs(m.yy)});
}

struct SymEigen2 {
  double min;
  double max;
};

/// Eigenvalues of the symmetric part of m.
inline SymEigen2 sym_eigenvalues(const Mat2& m) {
  const double a = m.xx;
  const double d = m.yy;
  const double b = 0.5 * (m.xy + m.yx);
  const double mean = 0.5 * (a + d);
  const double radius = std::hypot(0.5 * (a - d), b);
  return {mean - radius, mean + radius};
}

/// Spectral norm of a symmetric matrix.
inline double sym_norm(const Mat2& m) {
  const auto e = sym_eigenvalues(m);
  return std::max(std::abs(e.min), std::abs(e.max));
}

struct SingularValues2 {
  double min;
  double max;
};

inline SingularValues2 singular_values(const Mat2& m) {
  const auto e = sym_eigenvalues(transpose(m) * m);
  return {std::sqrt(std::max(e.min, 0.0)), std::sqrt(std::max(e.max, 0.0))};
}

}  // namespace magfe

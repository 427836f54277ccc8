#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace colorweak {

// Points and tensors live in 2D (chromaticity plane) or 3D (full CIELUV).
// Fixed max size keeps them on the stack.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 3, 3>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that cannot be parsed; `line` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Axis-aligned box; queries outside are clamped onto it.
struct Box {
  Vec lo;
  Vec hi;

  int dimension() const { return static_cast<int>(lo.size()); }
  bool contains(const Vec& x, double tol = 0.0) const {
    for (int i = 0; i < dimension(); ++i)
      if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
    return true;
  }
  Vec clamp(const Vec& x) const {
    Vec y = x;
    for (int i = 0; i < dimension(); ++i) y[i] = std::min(std::max(y[i], lo[i]), hi[i]);
    return y;
  }
};

inline Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

inline Vec vec3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

}  // namespace colorweak

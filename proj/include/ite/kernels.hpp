#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace ite {

// Positive-definite kernels shared by the MMD estimator and kernel ridge.
struct Kernel {
  enum class Kind { linear, rbf };

  Kind kind = Kind::linear;
  double bandwidth = 1.0;

  static Kernel linear() { return Kernel{Kind::linear, 1.0}; }
  static Kernel rbf(double bandwidth) {
    if (bandwidth <= 0.0) throw std::invalid_argument("rbf bandwidth must be positive");
    return Kernel{Kind::rbf, bandwidth};
  }

  double operator()(const std::vector<double>& a, const std::vector<double>& b) const {
    if (a.size() != b.size()) throw std::invalid_argument("kernel: dimension mismatch");
    if (kind == Kind::linear) {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
      return s;
    }
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      double diff = a[i] - b[i];
      d2 += diff * diff;
    }
    return std::exp(-d2 / (2.0 * bandwidth * bandwidth));
  }

  std::string name() const {
    return kind == Kind::linear ? "linear" : "rbf";
  }
};

}  // namespace ite

#pragma once

#include <functional>
#include <vector>

namespace ite {

// Anything that predicts an outcome for a covariate vector under a
// prescribed treatment arm.
struct Predictor {
  virtual ~Predictor() = default;
  virtual double predict(const std::vector<double>& x, int t) const = 0;
};

// f(x,1) - f(x,0)
inline double predicted_ite(const Predictor& f, const std::vector<double>& x) {
  return f.predict(x, 1) - f.predict(x, 0);
}

struct ConstantPredictor : Predictor {
  double value = 0.0;
  explicit ConstantPredictor(double v) : value(v) {}
  double predict(const std::vector<double>&, int) const override { return value; }
};

struct FunctionPredictor : Predictor {
  std::function<double(const std::vector<double>&, int)> fn;
  explicit FunctionPredictor(std::function<double(const std::vector<double>&, int)> f)
      : fn(std::move(f)) {}
  double predict(const std::vector<double>& x, int t) const override { return fn(x, t); }
};

}  // namespace ite

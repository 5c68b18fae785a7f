#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <string>

namespace nilm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ArrayX = Eigen::ArrayXd;

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerically stable logistic function, valid for |x| up to ~700.
inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double tanh_act(double x) { return std::tanh(x); }

inline ArrayX sigmoid(const ArrayX& x) {
  return x.unaryExpr([](double v) { return sigmoid(v); });
}

/// Checked matrix product; throws ShapeError naming both shapes.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Central-difference gradient of a scalar function of a parameter vector.
/// Independent of every analytic backward pass; used as the gradient oracle.
Vector finite_diff_gradient(const std::function<double(const Vector&)>& f,
                            const Vector& params, double eps = 1e-5);

/// Elementwise relative gradient error with the denominator floored.
double max_relative_error(const Vector& a, const Vector& b,
                          double floor = 1e-8);

}  // namespace nilm

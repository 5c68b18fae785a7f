#include "nilm/tensor.hpp"

namespace nilm {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree, [" +
                     std::to_string(a.rows()) + "," + std::to_string(a.cols()) +
                     "] x [" + std::to_string(b.rows()) + "," +
                     std::to_string(b.cols()) + "]");
  }
  return a * b;
}

Vector finite_diff_gradient(const std::function<double(const Vector&)>& f,
                            const Vector& params, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("finite_diff_gradient: eps must be > 0");
  Vector grad(params.size());
  Vector p = params;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + eps;
    const double fp = f(p);
    p[i] = orig - eps;
    const double fm = f(p);
    p[i] = orig;
    grad[i] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

double max_relative_error(const Vector& a, const Vector& b, double floor) {
  if (a.size() != b.size()) throw ShapeError("max_relative_error: size mismatch");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace nilm

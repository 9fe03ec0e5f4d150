#include "surfns/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace surfns {

namespace {

double jacobi_value(int n, double a, double b, double t) {
  if (n == 0) return 1.0;
  double p0 = 1.0;
  double p1 = 0.5 * ((a - b) + (a + b + 2.0) * t);
  for (int k = 2; k <= n; ++k) {
    const double s = 2.0 * k + a + b;
    const double c1 = 2.0 * k * (k + a + b) * (s - 2.0);
    const double c2 = (s - 1.0) * (s * (s - 2.0) * t + a * a - b * b);
    const double c3 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * s;
    const double p2 = (c2 * p1 - c3 * p0) / c1;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

double jacobi_derivative(int n, double a, double b, double t) {
  if (n == 0) return 0.0;
  return 0.5 * (n + a + b + 1.0) * jacobi_value(n - 1, a + 1.0, b + 1.0, t);
}

}  // namespace

void gauss_jacobi(int n, double a, double b, std::vector<double>& nodes,
                  std::vector<double>& weights) {
  require(n >= 1, ErrorKind::argument, "gauss_jacobi: need at least one point");
  Eigen::MatrixXd jm = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    const double s = 2.0 * k + a + b;
    if (k == 0) {
      jm(0, 0) = (b - a) / (a + b + 2.0);
    } else {
      jm(k, k) = (b * b - a * a) / (s * (s + 2.0));
      const double num = 4.0 * k * (k + a) * (k + b) * (k + a + b);
      const double den = s * s * (s + 1.0) * (s - 1.0);
      jm(k, k - 1) = jm(k - 1, k) = std::sqrt(num / den);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jm);
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const double log_const = std::lgamma(n + a + 1.0) + std::lgamma(n + b + 1.0) -
                           std::lgamma(n + a + b + 1.0) - std::lgamma(n + 1.0) +
                           (a + b + 1.0) * std::log(2.0);
  for (int i = 0; i < n; ++i) {
    double t = eig.eigenvalues()(i);
    for (int it = 0; it < 3; ++it) {
      const double dp = jacobi_derivative(n, a, b, t);
      if (dp == 0.0) break;
      t -= jacobi_value(n, a, b, t) / dp;
    }
    const double dp = jacobi_derivative(n, a, b, t);
    nodes[i] = t;
    weights[i] = std::exp(log_const) / ((1.0 - t * t) * dp * dp);
  }
}

namespace {

QuadratureRule make_rule(int degree) {
  const int n = (degree + 2) / 2;  // 2n - 1 >= degree
  std::vector<double> tu, wu, tv, wv;
  gauss_jacobi(n, 1.0, 0.0, tu, wu);
  gauss_jacobi(n, 0.0, 0.0, tv, wv);
  QuadratureRule rule;
  rule.exactness_degree = 2 * n - 1;
  rule.points.reserve(n * n);
  rule.weights.reserve(n * n);
  for (int i = 0; i < n; ++i) {
    const double u = 0.5 * (1.0 + tu[i]);
    for (int j = 0; j < n; ++j) {
      const double v = 0.5 * (1.0 + tv[j]);
      rule.points.emplace_back(u, (1.0 - u) * v);
      rule.weights.push_back(0.25 * wu[i] * 0.5 * wv[j]);
    }
  }
  return rule;
}

}  // namespace

const QuadratureRule& quadrature_rule(int degree) {
  require(degree >= 1 && degree <= kMaxQuadratureDegree, ErrorKind::argument,
          "quadrature_rule: unsupported degree " + std::to_string(degree) +
              " (supported 1.." + std::to_string(kMaxQuadratureDegree) + ")");
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[degree];
  if (!slot) slot = std::make_unique<QuadratureRule>(make_rule(degree));
  return *slot;
}

}  // namespace surfns

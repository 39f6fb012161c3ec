#include "finray/polyfit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace finray {

double Polynomial::operator()(double x) const {
  const double t = (x - shift) / scale;
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * t + *it;
  return acc;
}

double Polynomial::derivative(double x) const {
  const double t = (x - shift) / scale;
  double acc = 0.0;
  for (int i = degree(); i >= 1; --i) acc = acc * t + i * coeffs[i];
  return acc / scale;
}

PolyFitResult fit_polynomial(std::span<const double> x, std::span<const double> y, int degree, double shift,
                             double scale) {
  const int n = static_cast<int>(x.size());
  const int m = degree + 1;
  Eigen::MatrixXd a(n, m);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    const double t = (x[i] - shift) / scale;
    double p = 1.0;
    for (int j = 0; j < m; ++j) {
      a(i, j) = p;
      p *= t;
    }
    b(i) = y[i];
  }

  Eigen::VectorXd col_norm = a.colwise().norm().transpose();
  for (int j = 0; j < m; ++j) {
    if (col_norm(j) == 0.0) col_norm(j) = 1.0;
  }
  const Eigen::MatrixXd as = a * col_norm.cwiseInverse().asDiagonal();

  PolyFitResult out;
  const Eigen::MatrixXd normal = as.transpose() * as;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  out.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();

  const Eigen::VectorXd sol = as.colPivHouseholderQr().solve(b);
  out.poly.shift = shift;
  out.poly.scale = scale;
  out.poly.coeffs.resize(m);
  for (int j = 0; j < m; ++j) out.poly.coeffs[j] = sol(j) / col_norm(j);

  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = std::abs(out.poly(x[i]) - y[i]);
    sq += r * r;
    out.max_residual = std::max(out.max_residual, r);
  }
  out.rms_residual = n > 0 ? std::sqrt(sq / n) : 0.0;
  return out;
}

}  // namespace finray

#pragma once

#include <span>
#include <vector>

namespace finray {

/// Polynomial in the normalised variable t = (x - shift) / scale.
struct Polynomial {
  std::vector<double> coeffs;  // coeffs[i] multiplies t^i
  double shift = 0.0;
  double scale = 1.0;

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
  double operator()(double x) const;
  /// d/dx (not d/dt).
  double derivative(double x) const;
};

struct PolyFitResult {
  Polynomial poly;
  double condition = 0.0;  // 2-norm condition of the column-equilibrated normal matrix
  double rms_residual = 0.0;
  double max_residual = 0.0;
};

/// Least-squares polynomial fit of y against x. The design matrix columns
/// are equilibrated before the QR solve, and `condition` reports the
/// condition number of the equilibrated normal matrix.
PolyFitResult fit_polynomial(std::span<const double> x, std::span<const double> y, int degree,
                             double shift = 0.0, double scale = 1.0);

}  // namespace finray

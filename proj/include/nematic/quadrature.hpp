#pragma once

#include <array>
#include <vector>

namespace nematic {

/// Quadrature rule on the reference simplex, stored in barycentric
/// coordinates. Weights sum to one, so integrals are |K| * sum w_q f(x_q).
struct QuadRule {
  int dim = 0;
  int degree = 0;
  std::vector<std::array<double, 4>> bary;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
};

/// Rule exact for polynomials of total degree <= `degree` on a
/// `dim`-simplex (dim 2 or 3). Low degrees use the classic symmetric
/// rules (edge midpoints for dim=2, the 4-point rule for dim=3);
/// higher degrees a collapsed Gauss-Legendre product rule.
const QuadRule& simplex_quadrature(int dim, int degree);

/// exact value of \int_K lambda^a over a simplex of measure `volume`
double integrate_barycentric_monomial(int dim, const std::array<int, 4>& exponents, double volume);

}  // namespace nematic

#include "nematic/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace nematic {

namespace {

// Gauss-Legendre nodes/weights on [0,1], computed by Newton iteration on the
// Legendre polynomial. Deterministic to the last bit for fixed n.
void gauss_legendre_unit(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (t * p1 - p0) / (t * t - 1.0);
      double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-16) break;
    }
    double p0 = 1.0, p1 = t;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dp = n * (t * p1 - p0) / (t * t - 1.0);
    x[i] = 0.5 * (1.0 - t);  // descending t -> ascending x
    w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
  }
}

QuadRule make_collapsed_rule(int dim, int degree) {
  QuadRule rule;
  rule.dim = dim;
  rule.degree = degree;
  // The Duffy map introduces extra polynomial factors of degree dim-1 in the
  // first coordinates, so the 1-D rules need exactness degree + dim - 1.
  int n = (degree + dim) / 2 + 1;
  std::vector<double> gx, gw;
  gauss_legendre_unit(n, gx, gw);
  if (dim == 2) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double u = gx[i], v = gx[j];
        double x = u, y = v * (1.0 - u);
        double jac = (1.0 - u);
        rule.bary.push_back({1.0 - x - y, x, y, 0.0});
        rule.weights.push_back(gw[i] * gw[j] * jac * 2.0);  // ref area 1/2
      }
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          double u = gx[i], v = gx[j], w = gx[k];
          double x = u, y = v * (1.0 - u), z = w * (1.0 - u) * (1.0 - v);
          double jac = (1.0 - u) * (1.0 - u) * (1.0 - v);
          rule.bary.push_back({1.0 - x - y - z, x, y, z});
          rule.weights.push_back(gw[i] * gw[j] * gw[k] * jac * 6.0);  // ref vol 1/6
        }
  }
  return rule;
}

QuadRule make_rule(int dim, int degree) {
  QuadRule rule;
  rule.dim = dim;
  rule.degree = degree;
  if (dim == 2 && degree <= 1) {
    rule.bary = {{1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0}};
    rule.weights = {1.0};
    return rule;
  }
  if (dim == 2 && degree <= 2) {
    // edge midpoint rule
    rule.bary = {{0.5, 0.5, 0.0, 0.0}, {0.0, 0.5, 0.5, 0.0}, {0.5, 0.0, 0.5, 0.0}};
    rule.weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    return rule;
  }
  if (dim == 3 && degree <= 1) {
    rule.bary = {{0.25, 0.25, 0.25, 0.25}};
    rule.weights = {1.0};
    return rule;
  }
  if (dim == 3 && degree <= 2) {
    const double a = 0.5854101966249685;  // (5 + 3 sqrt 5)/20
    const double b = 0.1381966011250105;  // (5 - sqrt 5)/20
    rule.bary = {{a, b, b, b}, {b, a, b, b}, {b, b, a, b}, {b, b, b, a}};
    rule.weights = {0.25, 0.25, 0.25, 0.25};
    return rule;
  }
  return make_collapsed_rule(dim, degree);
}

}  // namespace

const QuadRule& simplex_quadrature(int dim, int degree) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("simplex_quadrature: dim must be 2 or 3");
  if (degree < 1) degree = 1;
  static std::map<std::pair<int, int>, QuadRule> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto key = std::make_pair(dim, degree);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, make_rule(dim, degree)).first;
  return it->second;
}

double integrate_barycentric_monomial(int dim, const std::array<int, 4>& e, double volume) {
  // int_K lambda^a = |K| d! prod(a_i!) / (|a| + d)!
  auto fact = [](int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
  };
  int total = 0;
  double num = 1.0;
  for (int i = 0; i <= dim; ++i) {
    total += e[i];
    num *= fact(e[i]);
  }
  return volume * fact(dim) * num / fact(total + dim);
}

}  // namespace nematic

#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace pathattr {

namespace detail {

// error-free transformations
inline void two_prod(double a, double b, double& p, double& e) {
  p = a * b;
  e = std::fma(a, b, -p);
}

inline void two_sum(double a, double b, double& s, double& e) {
  s = a + b;
  const double z = s - a;
  e = (a - (s - z)) + (b - z);
}

}  // namespace detail

// Univariate polynomial in the monomial basis: p(x) = sum_k coeffs[k] * x^k.
// Evaluation uses compensated Horner, so polynomials with large cancelling
// coefficients still come out with ~1 ulp accuracy.
class Polynomial {
 public:
  Polynomial() : coeffs_{0.0} {}
  explicit Polynomial(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) coeffs_.push_back(0.0);
  }

  double operator()(double x) const {
    const size_t n = coeffs_.size();
    double s = coeffs_[n - 1];
    double c = 0.0;
    for (size_t k = n - 1; k-- > 0;) {
      double prod, pe, se;
      detail::two_prod(s, x, prod, pe);
      detail::two_sum(prod, coeffs_[k], s, se);
      c = c * x + (pe + se);
    }
    return s + c;
  }

  double deriv(double x) const {
    const size_t n = coeffs_.size();
    if (n <= 1) return 0.0;
    double s = static_cast<double>(n - 1) * coeffs_[n - 1];
    double c = 0.0;
    for (size_t k = n - 1; k-- > 1;) {
      double prod, pe, se;
      detail::two_prod(s, x, prod, pe);
      detail::two_sum(prod, static_cast<double>(k) * coeffs_[k], s, se);
      c = c * x + (pe + se);
    }
    return s + c;
  }

  Polynomial derivative() const {
    if (coeffs_.size() <= 1) return Polynomial();
    std::vector<double> d(coeffs_.size() - 1);
    for (size_t k = 1; k < coeffs_.size(); ++k) {
      d[k - 1] = static_cast<double>(k) * coeffs_[k];
    }
    return Polynomial(std::move(d));
  }

  std::span<const double> coeffs() const { return coeffs_; }
  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }

 private:
  std::vector<double> coeffs_;
};

}  // namespace pathattr

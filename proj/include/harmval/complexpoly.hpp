#pragma once

#include <complex>
#include <vector>

namespace harmval {

using cplx = std::complex<double>;

// Dense univariate polynomial over C, coefficients in ascending degree.
// The zero polynomial is an empty coefficient vector; normalize() keeps
// that canonical by stripping trailing coefficients below a relative tip.
class CPoly {
 public:
  CPoly() = default;
  explicit CPoly(std::vector<cplx> coeffs) : c_(std::move(coeffs)) { normalize(); }
  static CPoly constant(cplx a) { return CPoly({a}); }

  int degree() const { return static_cast<int>(c_.size()) - 1; }
  bool is_zero() const { return c_.empty(); }
  const std::vector<cplx>& coeffs() const { return c_; }
  cplx coeff(int k) const { return k >= 0 && k < (int)c_.size() ? c_[k] : cplx{}; }
  cplx lead() const { return c_.empty() ? cplx{} : c_.back(); }
  double coeff_scale() const;

  cplx eval(cplx z) const;
  CPoly derivative() const;
  CPoly conjugate_coeffs() const;

  CPoly operator+(const CPoly& o) const;
  CPoly operator-(const CPoly& o) const;
  CPoly operator*(const CPoly& o) const;
  CPoly operator*(cplx s) const;

  // Euclidean division, remainder returned. Throws on zero divisor.
  CPoly divmod(const CPoly& divisor, CPoly* quotient = nullptr) const;

  void normalize(double rel_tol = 0.0);

 private:
  std::vector<cplx> c_;
};

// Monic gcd by the Euclidean algorithm; remainders whose coefficients all
// fall below pivot_tol * scale are treated as zero.
CPoly poly_gcd(const CPoly& a, const CPoly& b, double pivot_tol = 1e-12);

struct RootResult {
  std::vector<cplx> roots;     // deduplicated, sorted by (re, im)
  bool converged = true;       // false when the iteration cap was hit
  double max_residual = 0.0;   // max |P(r)| / sum_k |c_k||r|^k over roots
};

// Aberth-class simultaneous iteration with per-root Newton polish.
// Multiple roots are merged within cluster_radius * max(1, |z|).
RootResult poly_roots(const CPoly& p, double cluster_radius = 1e-6);

}  // namespace harmval

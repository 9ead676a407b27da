#include "harmval/complexpoly.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace harmval {

namespace {

bool lex_re_im(const cplx& a, const cplx& b) {
  if (a.real() != b.real()) return a.real() < b.real();
  return a.imag() < b.imag();
}

}  // namespace

double CPoly::coeff_scale() const {
  double m = 0.0;
  for (const auto& a : c_) m = std::max(m, std::abs(a));
  return m;
}

cplx CPoly::eval(cplx z) const {
  cplx acc = 0.0;
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * z + *it;
  return acc;
}

CPoly CPoly::derivative() const {
  if (c_.size() <= 1) return CPoly();
  std::vector<cplx> d(c_.size() - 1);
  for (size_t k = 1; k < c_.size(); ++k) d[k - 1] = c_[k] * double(k);
  return CPoly(std::move(d));
}

CPoly CPoly::conjugate_coeffs() const {
  std::vector<cplx> d(c_.size());
  for (size_t k = 0; k < c_.size(); ++k) d[k] = std::conj(c_[k]);
  return CPoly(std::move(d));
}

CPoly CPoly::operator+(const CPoly& o) const {
  std::vector<cplx> d(std::max(c_.size(), o.c_.size()));
  for (size_t k = 0; k < d.size(); ++k) d[k] = coeff((int)k) + o.coeff((int)k);
  return CPoly(std::move(d));
}

CPoly CPoly::operator-(const CPoly& o) const {
  std::vector<cplx> d(std::max(c_.size(), o.c_.size()));
  for (size_t k = 0; k < d.size(); ++k) d[k] = coeff((int)k) - o.coeff((int)k);
  return CPoly(std::move(d));
}

CPoly CPoly::operator*(const CPoly& o) const {
  if (is_zero() || o.is_zero()) return CPoly();
  std::vector<cplx> d(c_.size() + o.c_.size() - 1, cplx{});
  for (size_t i = 0; i < c_.size(); ++i)
    for (size_t j = 0; j < o.c_.size(); ++j) d[i + j] += c_[i] * o.c_[j];
  return CPoly(std::move(d));
}

CPoly CPoly::operator*(cplx s) const {
  std::vector<cplx> d(c_);
  for (auto& a : d) a *= s;
  return CPoly(std::move(d));
}

CPoly CPoly::divmod(const CPoly& divisor, CPoly* quotient) const {
  if (divisor.is_zero()) throw std::invalid_argument("division by zero polynomial");
  std::vector<cplx> rem(c_);
  int dd = divisor.degree();
  cplx lead = divisor.lead();
  std::vector<cplx> q;
  if ((int)rem.size() - 1 >= dd) q.assign(rem.size() - dd, cplx{});
  for (int k = (int)rem.size() - 1; k >= dd; --k) {
    cplx f = rem[k] / lead;
    q[k - dd] = f;
    if (f == cplx{}) continue;
    for (int j = 0; j <= dd; ++j) rem[k - dd + j] -= f * divisor.coeff(j);
    rem[k] = cplx{};
  }
  if (quotient) *quotient = CPoly(std::move(q));
  return CPoly(std::move(rem));
}

void CPoly::normalize(double rel_tol) {
  double scale = 0.0;
  for (const auto& a : c_) scale = std::max(scale, std::abs(a));
  double tip = rel_tol > 0.0 ? rel_tol * scale : 0.0;
  while (!c_.empty() && std::abs(c_.back()) <= tip) c_.pop_back();
}

CPoly poly_gcd(const CPoly& a, const CPoly& b, double pivot_tol) {
  CPoly r0 = a, r1 = b;
  if (r0.degree() < r1.degree()) std::swap(r0, r1);
  double scale = std::max({r0.coeff_scale(), r1.coeff_scale(), 1.0});
  while (!r1.is_zero()) {
    CPoly r2 = r0.divmod(r1);
    r2.normalize(pivot_tol * scale / std::max(r2.coeff_scale(), 1e-300));
    if (r2.coeff_scale() <= pivot_tol * scale) r2 = CPoly();
    r0 = r1;
    r1 = r2;
  }
  if (r0.is_zero()) return r0;
  return r0 * (1.0 / r0.lead());
}

namespace {

double residual_norm(const CPoly& p, cplx r) {
  double s = 0.0, pw = 1.0, ar = std::abs(r);
  for (const auto& a : p.coeffs()) {
    s += std::abs(a) * pw;
    pw *= ar;
  }
  return s > 0 ? std::abs(p.eval(r)) / s : 0.0;
}

}  // namespace

RootResult poly_roots(const CPoly& p_in, double cluster_radius) {
  RootResult out;
  CPoly p = p_in;
  p.normalize(1e-14);
  if (p.degree() <= 0) return out;

  // factor out exact zero roots up front
  int zero_mult = 0;
  {
    std::vector<cplx> c = p.coeffs();
    double scale = p.coeff_scale();
    size_t k = 0;
    while (k < c.size() - 1 && std::abs(c[k]) <= 1e-14 * scale) ++k;
    zero_mult = (int)k;
    if (k > 0) p = CPoly(std::vector<cplx>(c.begin() + k, c.end()));
  }

  std::vector<cplx> z;
  int n = p.degree();
  if (n == 1) {
    z.push_back(-p.coeff(0) / p.coeff(1));
  } else if (n >= 2) {
    cplx inv_lead = 1.0 / p.lead();
    CPoly q = p * inv_lead;
    const CPoly dq = q.derivative();
    double radius = 0.0;
    for (int k = 0; k < n; ++k) radius = std::max(radius, std::abs(q.coeff(k)));
    radius = 1.0 + radius;

    z.resize(n);
    for (int i = 0; i < n; ++i) {
      double ang = 2.0 * M_PI * (i + 0.3551) / n + 0.5 / n;
      z[i] = radius * cplx(std::cos(ang), std::sin(ang));
    }

    const int max_iter = 400;
    bool done = false;
    for (int iter = 0; iter < max_iter && !done; ++iter) {
      done = true;
      for (int i = 0; i < n; ++i) {
        cplx pv = q.eval(z[i]);
        cplx dv = dq.eval(z[i]);
        if (std::abs(pv) == 0.0) continue;
        cplx newton = (dv != cplx{}) ? pv / dv : cplx(1e-3, 1e-3);
        cplx sum = 0.0;
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          cplx d = z[i] - z[j];
          if (std::abs(d) < 1e-300) d = cplx(1e-12, 1e-12);
          sum += 1.0 / d;
        }
        cplx denom = 1.0 - newton * sum;
        cplx step = (std::abs(denom) > 1e-300) ? newton / denom : newton;
        z[i] -= step;
        if (std::abs(step) > 1e-14 * std::max(1.0, std::abs(z[i]))) done = false;
      }
    }
    out.converged = done;

    for (int i = 0; i < n; ++i) {
      for (int it = 0; it < 8; ++it) {
        cplx pv = q.eval(z[i]);
        cplx dv = dq.eval(z[i]);
        if (std::abs(dv) < 1e-300) break;
        cplx step = pv / dv;
        if (std::abs(step) > 0.5 * std::max(1.0, std::abs(z[i]))) break;
        z[i] -= step;
        if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(z[i]))) break;
      }
    }
  }

  for (int k = 0; k < zero_mult; ++k) z.push_back(cplx{});
  std::sort(z.begin(), z.end(), lex_re_im);

  std::vector<cplx> dedup;
  for (const auto& r : z) {
    bool merged = false;
    for (auto& d : dedup) {
      if (std::abs(r - d) <= cluster_radius * std::max(1.0, std::abs(r))) {
        merged = true;
        break;
      }
    }
    if (!merged) dedup.push_back(r);
  }
  out.roots = std::move(dedup);
  std::sort(out.roots.begin(), out.roots.end(), lex_re_im);
  for (const auto& r : out.roots)
    out.max_residual = std::max(out.max_residual, residual_norm(p_in, r));
  return out;
}

}  // namespace harmval

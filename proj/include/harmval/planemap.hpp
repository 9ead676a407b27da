#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "harmval/complexpoly.hpp"

namespace harmval {

struct Viewport {
  double x0 = -2, x1 = 2, y0 = -2, y1 = 2;
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  bool contains(cplx z) const {
    return z.real() >= x0 && z.real() <= x1 && z.imag() >= y0 && z.imag() <= y1;
  }
};

// f(z) = p(z) + conj(q(z))
struct HarmonicPolynomial {
  CPoly p, q;

  cplx eval(cplx z) const { return p.eval(z) + std::conj(q.eval(z)); }
  int analytic_degree() const { return std::max(p.degree(), 0); }
  int coanalytic_degree() const { return std::max(q.degree(), 0); }
  int max_degree() const { return std::max(analytic_degree(), coanalytic_degree()); }
  double jacobian(cplx z) const {
    double a = std::abs(p.derivative().eval(z));
    double b = std::abs(q.derivative().eval(z));
    return a * a - b * b;
  }
};

struct Jacobian2x2 {
  double ux = 0, uy = 0, vx = 0, vy = 0;
  double det() const { return ux * vy - uy * vx; }
};

// Generic C1 self-map of the plane. Harmonic members carry (h', g');
// everything else either has closed-form partials or falls back to
// central differences with relative step fd_step_rel.
struct PlaneMap {
  std::string name;
  std::function<cplx(cplx)> f;
  std::function<std::pair<cplx, cplx>(cplx)> harmonic_derivs;
  std::function<Jacobian2x2(cplx)> jac_analytic;
  std::optional<HarmonicPolynomial> poly;
  bool harmonic = false;
  bool light = true;
  double fd_step_rel = 1e-6;

  cplx operator()(cplx z) const { return f(z); }
  bool has_analytic_jacobian() const {
    return static_cast<bool>(harmonic_derivs) || static_cast<bool>(jac_analytic);
  }
  Jacobian2x2 jacobian_matrix(cplx z) const;
  double jacobian(cplx z) const;
};

PlaneMap make_plane_map(const HarmonicPolynomial& f, std::string name = "");

struct DegeneracyReport {
  enum class Kind { generic, constant_range, line_range };
  Kind kind = Kind::generic;
  cplx lambda;  // p' = lambda * q', |lambda| = 1 (line_range)
  cplx alpha;   // line base point, or the constant image value
  cplx beta;    // line direction, beta = 2*tau with tau^2 = lambda
};

DegeneracyReport detect_degeneracy(const HarmonicPolynomial& f, double tol = 1e-12);

struct PsiValue {
  enum class Kind { value, pole, indeterminate };
  Kind kind = Kind::value;
  cplx v;
};

// p'/q' reduced by the complex-coefficient gcd, so fold points evaluate
// cleanly even at shared roots of the raw derivatives.
struct SecondDilatation {
  CPoly num, den;
  PsiValue at(cplx z) const;
};

SecondDilatation second_dilatation(const HarmonicPolynomial& f);
PsiValue psi(const HarmonicPolynomial& f, cplx z);

struct ClusterSet {
  bool exact = false;
  std::vector<std::pair<cplx, cplx>> lines;  // (point, unit direction), clipped families
  std::vector<cplx> points;
  std::vector<cplx> cloud;  // sampled candidates (empty for exact sets)
  bool empty() const { return lines.empty() && points.empty() && cloud.empty(); }
  double distance(cplx w) const;
};

struct CatalogEntry {
  std::string name;
  std::string formula;
  PlaneMap map;
  // zero on the critical set, scaled to approximate euclidean distance
  std::function<double(cplx)> critset_residual;
  std::function<ClusterSet(const Viewport&)> exact_cluster;
  bool has_exact_cluster = false;
  std::string notes;
};

const std::vector<CatalogEntry>& catalog();
const CatalogEntry* find_catalog(const std::string& name);

// Function spec documents are JSON with either {"name": "<catalog key>"}
// or {"p": [[re,im],...], "q": [[re,im],...]} in ascending degree.
// Unknown or conflicting fields are rejected.
PlaneMap parse_function(const std::string& text);
std::string serialize_function(const PlaneMap& m);

}  // namespace harmval

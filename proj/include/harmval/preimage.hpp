#pragma once

#include "harmval/planemap.hpp"

namespace harmval {

// Complexified pair E1(z,s) = p(z) + qbar(s) - w, E2(z,s) = pbar(s) + q(z) - conj(w),
// where the bars conjugate coefficients. A point z0 solves f(z0) = w exactly
// when (z0, conj(z0)) is a common zero, so eliminating s certifies preimages.
struct ConjugateSystem {
  CPoly p, q, pbar, qbar;
  cplx w;
  int deg_s_e1() const { return std::max(qbar.degree(), 0); }  // n_q
  int deg_s_e2() const { return std::max(pbar.degree(), 0); }  // n_p
};

ConjugateSystem build_conjugate_system(const HarmonicPolynomial& f, cplx w);

struct Elimination {
  CPoly resultant;              // R(z), trailing near-zero coefficients stripped
  bool identically_zero = false;
  int nodes = 0;
  double node_radius = 0.0;
  double zero_ratio = 0.0;      // max |det| over nodes, relative to lead*r^deg scale
};

// Sylvester determinant in s sampled at scaled roots of unity, then
// interpolated. Throws when either s-degree is < 1 (those shapes are
// handled analytically before elimination).
Elimination eliminate(const ConjugateSystem& sys);

struct Region {
  enum class Kind { all, disc, box };
  Kind kind = Kind::all;
  cplx center;
  double radius = 0.0;
  Viewport box;

  static Region whole_plane() { return {}; }
  static Region disc(cplx c, double r) { return {Kind::disc, c, r, {}}; }
  static Region in_box(const Viewport& vp) { return {Kind::box, {}, 0.0, vp}; }
  bool contains(cplx z) const;
};

struct PreimageSet {
  enum class Verdict { finite, infinite, unknown };
  Verdict verdict = Verdict::finite;
  std::vector<cplx> solutions;    // sorted by (re, im); representatives when infinite
  std::vector<double> residuals;  // |Re f(z) - Re w| + |Im f(z) - Im w|
  bool certified = false;
  int seed_failures = 0;          // numeric path only
  int count() const { return static_cast<int>(solutions.size()); }
};

struct PreimageOptions {
  double residual_tol = 1e-10;
  double dedup_rel = 1e-6;
  int newton_cap = 50;
  double step_tol_rel = 1e-13;
};

double residual_metric(const PlaneMap& f, cplx z, cplx w);

// Newton on the real 2x2 system; returns the polished point (unchanged when
// the local Jacobian is unusable).
cplx newton_polish(const PlaneMap& f, cplx w, cplx z0, const PreimageOptions& opt = {});

PreimageSet preimages(const HarmonicPolynomial& f, cplx w, const Region& region = {},
                      const PreimageOptions& opt = {});

PreimageSet preimages_numeric(const PlaneMap& f, cplx w, const Viewport& box, int grid_n,
                              const PreimageOptions& opt = {});

struct ValenceResult {
  PreimageSet::Verdict verdict = PreimageSet::Verdict::finite;
  int count = 0;
  bool certified = false;
  PreimageSet set;
};

// Certified full-plane valence for harmonic polynomial members, numeric
// box-restricted valence otherwise.
ValenceResult valence(const PlaneMap& f, cplx w, const Viewport& numeric_box = {-8, 8, -8, 8},
                      int numeric_grid = 64, const PreimageOptions& opt = {});

}  // namespace harmval

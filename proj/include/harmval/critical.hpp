#pragma once

#include <string>

#include "harmval/planemap.hpp"

namespace harmval {

// Dense real bivariate polynomial, c[i + j*nx] holding the x^i y^j coefficient.
struct BiPoly {
  int nx = 0, ny = 0;
  std::vector<double> c;
  double eval(double x, double y) const;
  double coeff(int i, int j) const {
    return (i >= 0 && i < nx && j >= 0 && j < ny) ? c[i + j * nx] : 0.0;
  }
};

// |p'(z)|^2 - |q'(z)|^2 expanded in (x, y); degree is at most 2(N-1).
BiPoly jacobian_field(const HarmonicPolynomial& f);

struct CriticalPolyline {
  std::vector<cplx> pts;
  bool closed = false;
};

struct IsolatedCritPoint {
  cplx z;
  bool in_N = false;  // reduced psi has |psi| != 1 there (counting zero/pole)
  int order = 1;
};

struct TangencySuspect {
  cplx cell_center;
  double jmin = 0.0;
};

struct CriticalSet {
  std::vector<CriticalPolyline> curves;
  std::vector<IsolatedCritPoint> isolated;
  std::vector<TangencySuspect> suspects;  // sign-definite near-zero cells, unresolved
  Viewport viewport;
  double resolution = 0.0;
  double distance_to_curves(cplx z) const;
  double distance_to_set(cplx z) const;  // curves plus isolated points
  bool empty() const { return curves.empty() && isolated.empty(); }
};

// Marching squares on the Jacobian with bisection-refined crossings.
// resolution is the cell size; fewer than 8 cells per side is rejected.
CriticalSet trace(const PlaneMap& f, const Viewport& vp, double resolution);

// Common roots of p' and q' (the only candidates for critical points that
// are not on a fold arc).
std::vector<IsolatedCritPoint> isolated_points(const HarmonicPolynomial& f);

enum class CritKind { regular_fold, F1, F2, F3, N };

struct ClassifiedCriticalPoint {
  cplx z;
  CritKind kind = CritKind::regular_fold;
  int ell = 0;    // order of z as a zero of p'
  int curve = -1; // arc id in the traced set, -1 for isolated points
  double t = 0.0; // vertex index of the nearest arc vertex
};

std::vector<ClassifiedCriticalPoint> classify(const HarmonicPolynomial& f, const CriticalSet& cs,
                                              std::vector<std::string>* warnings = nullptr);

struct LocalModel {
  int j = 1, k = 1;
  bool ambiguous = false;  // side of the jump not determined by local data
};

// Valence pair on the two sides of the arc through the point; throws for
// kinds N and F3, which have no single-arc model.
LocalModel local_model(const ClassifiedCriticalPoint& pt);

struct Cusp {
  cplx w;
  cplx z;
  int curve = -1;
  double speed_ratio = 0.0;  // refined dip relative to the median speed
};

struct ImageCurveOptions {
  double speed_dip = 1e-3;    // dip threshold relative to median speed
  double tangent_dot = -0.5;  // adjacent unit tangent reversal threshold
};

struct ImageCurve {
  std::vector<CriticalPolyline> polylines;
  std::vector<cplx> isolated_images;
  std::vector<Cusp> cusps;
  ImageCurveOptions options;  // thresholds used, recorded with the output
};

ImageCurve image_curve(const PlaneMap& f, const CriticalSet& cs,
                       const ImageCurveOptions& opt = {});

}  // namespace harmval

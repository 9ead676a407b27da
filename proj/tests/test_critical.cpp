#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <random>

#include "harmval/critical.hpp"

using namespace harmval;

namespace {

const PlaneMap& entry(const char* name) {
  const CatalogEntry* e = find_catalog(name);
  REQUIRE(e != nullptr);
  return e->map;
}

HarmonicPolynomial identity_map() { return HarmonicPolynomial{CPoly({0, 1}), CPoly()}; }

// independent cusp oracle: sweep f along an exact parametrized critical
// curve and group discrete tangent reversals of the image
struct SweepCusp {
  cplx w;
  double t;
};

std::vector<SweepCusp> sweep_cusps(const std::function<cplx(double)>& path,
                                   const PlaneMap& f, int n) {
  std::vector<cplx> w(n);
  for (int k = 0; k < n; ++k) w[k] = f(path(2 * M_PI * k / n));
  std::vector<int> marks;
  for (int k = 0; k < n; ++k) {
    cplx t1 = w[(k + 1) % n] - w[k];
    cplx t2 = w[(k + 2) % n] - w[(k + 1) % n];
    double l1 = std::abs(t1), l2 = std::abs(t2);
    if (l1 == 0 || l2 == 0) continue;
    if ((std::conj(t1) * t2).real() / (l1 * l2) < -0.5) marks.push_back(k + 1);
  }
  std::vector<SweepCusp> out;
  size_t i = 0;
  while (i < marks.size()) {
    size_t j = i;
    while (j + 1 < marks.size() && marks[j + 1] - marks[j] <= 8) ++j;
    int mid = marks[(i + j) / 2] % n;
    out.push_back({w[mid], 2 * M_PI * mid / n});
    i = j + 1;
  }
  if (out.size() >= 2 && marks.front() + n - marks.back() <= 8) out.pop_back();
  return out;
}

bool near_any(cplx z, const std::vector<cplx>& targets, double tol) {
  for (cplx t : targets)
    if (std::abs(z - t) < tol) return true;
  return false;
}

int count_kind(const std::vector<ClassifiedCriticalPoint>& pts, CritKind kind) {
  int n = 0;
  for (const auto& p : pts) n += p.kind == kind;
  return n;
}

}  // namespace

TEST_CASE("jacobian field expands to the closed forms") {
  SUBCASE("degree-two entry: 4x^2 + 4x + 4y^2") {
    BiPoly J = jacobian_field(*entry("quadratic").poly);
    CHECK(J.coeff(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(J.coeff(1, 0) == doctest::Approx(4.0));
    CHECK(J.coeff(2, 0) == doctest::Approx(4.0));
    CHECK(J.coeff(0, 2) == doctest::Approx(4.0));
    CHECK(std::abs(J.coeff(0, 1)) < 1e-12);
    CHECK(std::abs(J.coeff(1, 1)) < 1e-12);
    CHECK(J.eval(0.25, -1.5) == doctest::Approx(4 * 0.0625 + 1.0 + 9.0));
  }
  SUBCASE("unit-circle entry: (x^2+y^2)^2 - (x^2+y^2)") {
    BiPoly J = jacobian_field(*entry("cubic-star").poly);
    CHECK(J.eval(0.3, 0.4) == doctest::Approx(-0.1875).epsilon(1e-12));
    CHECK(J.eval(1.0, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(J.eval(0.0, -1.0) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("hyperbola entry: 4 + 24xy") {
    BiPoly J = jacobian_field(*entry("polyunbdds").poly);
    CHECK(J.coeff(0, 0) == doctest::Approx(4.0));
    CHECK(J.coeff(1, 1) == doctest::Approx(24.0));
    CHECK(J.eval(2.0, -1.0 / 12.0) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("identity: constant one") {
    BiPoly J = jacobian_field(identity_map());
    CHECK(J.nx == 1);
    CHECK(J.ny == 1);
    CHECK(J.eval(17.0, -3.0) == doctest::Approx(1.0));
  }
}

TEST_CASE("jacobian field agrees with the map jacobian at random points") {
  std::mt19937 rng(411);
  std::uniform_real_distribution<double> u(-1, 1), span(-2, 2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<cplx> pc(1 + rng() % 5), qc(1 + rng() % 4);
    for (auto& c : pc) c = cplx(u(rng), u(rng));
    for (auto& c : qc) c = cplx(u(rng), u(rng));
    HarmonicPolynomial f{CPoly(pc), CPoly(qc)};
    PlaneMap m = make_plane_map(f);
    BiPoly J = jacobian_field(f);
    for (int k = 0; k < 10; ++k) {
      cplx z(span(rng), span(rng));
      double a = J.eval(z.real(), z.imag());
      double b = m.jacobian(z);
      double scale = 1.0 + std::norm(f.p.derivative().eval(z)) + std::norm(f.q.derivative().eval(z));
      CHECK(std::abs(a - b) <= 1e-9 * scale);
    }
  }
}

TEST_CASE("tracing the degree-two entry yields its critical circle") {
  const PlaneMap& f = entry("quadratic");
  Viewport vp{-2, 2, -2, 2};
  const double res = 4.0 / 256;
  CriticalSet cs = trace(f, vp, res);

  REQUIRE(cs.curves.size() == 1);
  CHECK(cs.curves[0].closed);
  CHECK(cs.isolated.empty());
  CHECK(cs.suspects.empty());

  double worst_radial = 0.0, worst_step = 0.0, worst_jac = 0.0;
  const auto& pts = cs.curves[0].pts;
  REQUIRE(pts.size() >= 16);
  CPoly dp = f.poly->p.derivative(), dq = f.poly->q.derivative();
  for (size_t k = 0; k < pts.size(); ++k) {
    worst_radial = std::max(worst_radial, std::abs(std::abs(pts[k] + 0.5) - 0.5));
    double scale = std::norm(dp.eval(pts[k])) + std::norm(dq.eval(pts[k])) + 1.0;
    worst_jac = std::max(worst_jac, std::abs(f.jacobian(pts[k])) / scale);
    if (k + 1 < pts.size()) worst_step = std::max(worst_step, std::abs(pts[k + 1] - pts[k]));
  }
  worst_step = std::max(worst_step, std::abs(pts.front() - pts.back()));
  CHECK(worst_radial < res);
  CHECK(worst_step <= 2 * res);
  CHECK(worst_jac < 1e-8);
}

TEST_CASE("tracing is deterministic") {
  const PlaneMap& f = entry("cubic-twos");
  Viewport vp{-2, 2, -2, 2};
  CriticalSet a = trace(f, vp, 4.0 / 128);
  CriticalSet b = trace(f, vp, 4.0 / 128);
  REQUIRE(a.curves.size() == b.curves.size());
  for (size_t c = 0; c < a.curves.size(); ++c) {
    REQUIRE(a.curves[c].pts.size() == b.curves[c].pts.size());
    for (size_t k = 0; k < a.curves[c].pts.size(); ++k)
      CHECK(a.curves[c].pts[k] == b.curves[c].pts[k]);
  }
}

TEST_CASE("tracing the hyperbola entry yields two open branches") {
  const PlaneMap& f = entry("polyunbdds");
  Viewport vp{-3, 3, -3, 3};
  const double res = 6.0 / 256;
  CriticalSet cs = trace(f, vp, res);

  REQUIRE(cs.curves.size() == 2);
  CHECK(!cs.curves[0].closed);
  CHECK(!cs.curves[1].closed);
  CHECK(cs.isolated.empty());
  for (const auto& curve : cs.curves)
    for (cplx z : curve.pts)
      CHECK(std::abs(z.real() * z.imag() + 1.0 / 6.0) < 1e-8);
}

TEST_CASE("tracing separates the two ovals of the two-curve entry") {
  const PlaneMap& f = entry("cubic-twos");
  CriticalSet cs = trace(f, Viewport{-2, 2, -2, 2}, 4.0 / 256);
  REQUIRE(cs.curves.size() == 2);
  CHECK(cs.curves[0].closed);
  CHECK(cs.curves[1].closed);
  CHECK(cs.isolated.empty());
  for (const auto& curve : cs.curves) {
    double side = curve.pts.front().real();
    for (cplx z : curve.pts) {
      CHECK(std::abs(std::abs(z * z - 1.0) - 2.0 / 3.0) < 1e-8);
      CHECK(z.real() * side > 0);  // each oval stays on its own half-plane
    }
  }
}

TEST_CASE("tracing the merged entry yields one closed curve") {
  const PlaneMap& f = entry("dumbbell");
  CriticalSet cs = trace(f, Viewport{-2, 2, -2, 2}, 4.0 / 256);
  REQUIRE(cs.curves.size() == 1);
  CHECK(cs.curves[0].closed);
  for (cplx z : cs.curves[0].pts)
    CHECK(std::abs(std::abs(z * z - 0.6) - 2.0 / 3.0) < 1e-8);
}

TEST_CASE("tracing the unit-circle entry keeps the isolated origin") {
  const PlaneMap& f = entry("cubic-star");
  const double res = 4.0 / 256;
  CriticalSet cs = trace(f, Viewport{-2, 2, -2, 2}, res);

  REQUIRE(cs.curves.size() == 1);
  CHECK(cs.curves[0].closed);
  CHECK(cs.suspects.empty());
  for (cplx z : cs.curves[0].pts) CHECK(std::abs(std::abs(z) - 1.0) < res);

  REQUIRE(cs.isolated.size() == 1);
  CHECK(std::abs(cs.isolated[0].z) < 1e-12);
  CHECK(cs.isolated[0].in_N);
  CHECK(cs.distance_to_set(cplx(0.001, 0)) < 0.002);
}

TEST_CASE("tracing a diffeomorphism finds nothing") {
  PlaneMap f = make_plane_map(identity_map());
  CriticalSet cs = trace(f, Viewport{-2, 2, -2, 2}, 4.0 / 64);
  CHECK(cs.curves.empty());
  CHECK(cs.isolated.empty());
  CHECK(cs.empty());
  ImageCurve img = image_curve(f, cs);
  CHECK(img.polylines.empty());
  CHECK(img.cusps.empty());
}

TEST_CASE("tracing rejects grids below eight cells per side") {
  PlaneMap f = make_plane_map(identity_map());
  CHECK_THROWS_AS(trace(f, Viewport{-2, 2, -2, 2}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(trace(f, Viewport{-2, 2, -2, 2}, -0.1), std::invalid_argument);
}

TEST_CASE("tracing a generic C1 map follows its saddle diagonals") {
  const CatalogEntry* e = find_catalog("c1poly");
  REQUIRE(e != nullptr);
  CriticalSet cs = trace(e->map, Viewport{-2, 2, -2, 2}, 4.0 / 256);
  CHECK(cs.curves.size() >= 2);
  CHECK(cs.curves.size() <= 4);
  size_t total = 0;
  for (const auto& curve : cs.curves) {
    total += curve.pts.size();
    for (cplx z : curve.pts) CHECK(e->critset_residual(z) < 1e-7);
  }
  CHECK(total > 200);
}

TEST_CASE("isolated point extraction uses the derivative gcd") {
  SUBCASE("shared simple zero at the origin") {
    auto pts = isolated_points(*entry("cubic-star").poly);
    REQUIRE(pts.size() == 1);
    CHECK(std::abs(pts[0].z) < 1e-12);
    CHECK(pts[0].in_N);
    CHECK(pts[0].order == 1);
  }
  SUBCASE("coprime derivatives give nothing") {
    CHECK(isolated_points(*entry("quadratic").poly).empty());
    CHECK(isolated_points(*entry("cubic-twos").poly).empty());
    CHECK(isolated_points(identity_map()).empty());
  }
}

TEST_CASE("traced vertices keep the second dilatation on the unit circle") {
  for (const char* name : {"quadratic", "cubic-star", "cubic-twos", "dumbbell"}) {
    const PlaneMap& f = entry(name);
    const double res = 4.0 / 256;
    CriticalSet cs = trace(f, Viewport{-2, 2, -2, 2}, res);
    SecondDilatation sd = second_dilatation(*f.poly);
    for (const auto& curve : cs.curves)
      for (cplx z : curve.pts) {
        PsiValue pv = sd.at(z);
        bool near_isolated = false;
        for (const auto& ip : cs.isolated) near_isolated |= std::abs(z - ip.z) < res;
        if (near_isolated) continue;
        REQUIRE(pv.kind == PsiValue::Kind::value);
        CHECK(std::abs(std::abs(pv.v) - 1.0) < 1e-4);
      }
  }
}

TEST_CASE("classification finds the three fold-reversal points of the degree-two entry") {
  const PlaneMap& f = entry("quadratic");
  const double res = 4.0 / 256;
  CriticalSet cs = trace(f, Viewport{-2, 2, -2, 2}, res);
  std::vector<std::string> warnings;
  auto pts = classify(*f.poly, cs, &warnings);

  CHECK(warnings.empty());
  CHECK(count_kind(pts, CritKind::F1) == 3);
  CHECK(count_kind(pts, CritKind::F2) == 0);
  CHECK(count_kind(pts, CritKind::F3) == 0);
  CHECK(count_kind(pts, CritKind::N) == 0);

  const double s3 = std::sqrt(3.0);
  std::vector<cplx> expected = {cplx(-1, 0), cplx(-0.25, s3 / 4), cplx(-0.25, -s3 / 4)};
  int matched = 0;
  for (const auto& p : pts) {
    CHECK(p.ell == 0);
    CHECK(p.curve == 0);
    matched += near_any(p.z, expected, 3 * res);
  }
  CHECK(matched == 3);
}

TEST_CASE("classification marks the origin of the unit-circle entry as non-folding") {
  const PlaneMap& f = entry("cubic-star");
  const double res = 4.0 / 256;
  CriticalSet cs = trace(f, Viewport{-2, 2, -2, 2}, res);
  auto pts = classify(*f.poly, cs);

  CHECK(count_kind(pts, CritKind::F1) == 5);
  CHECK(count_kind(pts, CritKind::N) == 1);
  CHECK(count_kind(pts, CritKind::F2) == 0);
  CHECK(count_kind(pts, CritKind::F3) == 0);

  std::vector<cplx> expected;
  for (int k = 0; k < 5; ++k) {
    double t = M_PI / 5 + 2 * M_PI * k / 5;
    expected.push_back(std::polar(1.0, t));
  }
  for (const auto& p : pts) {
    if (p.kind == CritKind::F1) {
      CHECK(near_any(p.z, expected, 3 * res));
      CHECK(p.ell == 0);
    } else {
      CHECK(std::abs(p.z) < 1e-10);
      CHECK(p.ell == 2);
      CHECK(p.curve == -1);
      CHECK_THROWS_AS(local_model(p), std::invalid_argument);
    }
  }
}

TEST_CASE("classified points for generic entries are folds or reversals only") {
  for (const char* name : {"cubic-twos", "dumbbell"}) {
    const PlaneMap& f = entry(name);
    CriticalSet cs = trace(f, Viewport{-2, 2, -2, 2}, 4.0 / 256);
    auto pts = classify(*f.poly, cs);
    CHECK(count_kind(pts, CritKind::F2) == 0);
    CHECK(count_kind(pts, CritKind::F3) == 0);
    CHECK(count_kind(pts, CritKind::N) == 0);
    for (const auto& p : pts) CHECK(p.curve >= 0);
  }
}

TEST_CASE("local valence models follow the parity table") {
  auto mk = [](int ell, CritKind kind) {
    ClassifiedCriticalPoint p;
    p.ell = ell;
    p.kind = kind;
    return p;
  };
  LocalModel m = local_model(mk(0, CritKind::regular_fold));
  CHECK(m.j == 1);
  CHECK(m.k == 1);
  CHECK(!m.ambiguous);
  m = local_model(mk(1, CritKind::F1));
  CHECK(m.j == 3);
  CHECK(m.k == 3);
  CHECK(!m.ambiguous);
  m = local_model(mk(2, CritKind::regular_fold));
  CHECK(m.j == 3);
  CHECK(m.k == 3);
  m = local_model(mk(1, CritKind::F2));
  CHECK(m.j == 3);
  CHECK(m.k == 1);
  CHECK(m.ambiguous);
  m = local_model(mk(0, CritKind::F1));
  CHECK(m.j == 1);
  CHECK(m.k == 3);
  CHECK(m.ambiguous);

  for (int ell = 0; ell <= 6; ++ell)
    for (CritKind kind : {CritKind::regular_fold, CritKind::F2, CritKind::F1}) {
      LocalModel lm = local_model(mk(ell, kind));
      CHECK(lm.j % 2 == 1);
      CHECK(lm.k % 2 == 1);
      CHECK(lm.j >= 1);
      CHECK(lm.k >= 1);
    }
  CHECK_THROWS_AS(local_model(mk(0, CritKind::N)), std::invalid_argument);
  CHECK_THROWS_AS(local_model(mk(0, CritKind::F3)), std::invalid_argument);
}

TEST_CASE("image curve of the degree-two entry is a three-cusped loop") {
  const PlaneMap& f = entry("quadratic");
  const double res = 4.0 / 512;
  CriticalSet cs = trace(f, Viewport{-2, 2, -2, 2}, res);
  ImageCurve img = image_curve(f, cs);

  REQUIRE(img.polylines.size() == 1);
  CHECK(img.polylines[0].closed);
  CHECK(img.isolated_images.empty());
  for (size_t k = 0; k < cs.curves[0].pts.size(); ++k)
    CHECK(img.polylines[0].pts[k] == f(cs.curves[0].pts[k]));

  auto oracle = sweep_cusps([](double t) { return cplx(-0.5, 0) + 0.5 * std::polar(1.0, t); },
                            f, 8192);
  REQUIRE(oracle.size() == 3);

  REQUIRE(img.cusps.size() == 3);
  const double s3 = std::sqrt(3.0);
  std::vector<cplx> expected_w = {cplx(1, 0), cplx(-0.125, 3 * s3 / 8), cplx(-0.125, -3 * s3 / 8)};
  int matched = 0, oracle_matched = 0;
  for (const auto& c : img.cusps) {
    CHECK(c.speed_ratio < img.options.speed_dip);
    matched += near_any(c.w, expected_w, 1e-3);
    for (const auto& o : oracle) oracle_matched += std::abs(c.w - o.w) < 2e-2;
  }
  CHECK(matched == 3);
  CHECK(oracle_matched == 3);
}

TEST_CASE("image curve of the unit-circle entry carries five cusps") {
  const PlaneMap& f = entry("cubic-star");
  const double res = 4.0 / 512;
  CriticalSet cs = trace(f, Viewport{-2, 2, -2, 2}, res);
  ImageCurve img = image_curve(f, cs);

  auto oracle = sweep_cusps([](double t) { return std::polar(1.0, t); }, f, 8192);
  REQUIRE(oracle.size() == 5);
  REQUIRE(img.cusps.size() == 5);

  REQUIRE(img.isolated_images.size() == 1);
  CHECK(std::abs(img.isolated_images[0]) < 1e-10);

  std::vector<cplx> expected_w;
  for (int k = 0; k < 5; ++k)
    expected_w.push_back((5.0 / 6.0) * std::polar(1.0, M_PI * (2 * k + 1) / 5));
  int matched = 0;
  for (const auto& c : img.cusps) matched += near_any(c.w, expected_w, 1e-3);
  CHECK(matched == 5);
}

TEST_CASE("cusp counts per oval match a parametric sweep of the two-curve entry") {
  const PlaneMap& f = entry("cubic-twos");
  CriticalSet cs = trace(f, Viewport{-2, 2, -2, 2}, 4.0 / 512);
  ImageCurve img = image_curve(f, cs);
  REQUIRE(cs.curves.size() == 2);

  auto oval = [](double t) { return std::sqrt(cplx(1, 0) + (2.0 / 3.0) * std::polar(1.0, t)); };
  auto oracle_plus = sweep_cusps(oval, f, 8192);
  auto oracle_minus = sweep_cusps([&](double t) { return -oval(t); }, f, 8192);

  int on_plus = 0, on_minus = 0;
  for (const auto& c : img.cusps) (c.z.real() > 0 ? on_plus : on_minus)++;
  CHECK(on_plus == (int)oracle_plus.size());
  CHECK(on_minus == (int)oracle_minus.size());
  CHECK(img.cusps.size() >= 2);
}

TEST_CASE("image arcs between cusps are convex") {
  const PlaneMap& f = entry("quadratic");
  CriticalSet cs = trace(f, Viewport{-2, 2, -2, 2}, 4.0 / 512);
  ImageCurve img = image_curve(f, cs);
  REQUIRE(img.polylines.size() == 1);
  REQUIRE(img.cusps.size() == 3);

  const auto& v = cs.curves[0].pts;
  const auto& w = img.polylines[0].pts;
  const int n = (int)v.size();
  std::vector<int> cusp_idx;
  for (const auto& c : img.cusps) {
    int best = 0;
    for (int k = 1; k < n; ++k)
      if (std::abs(v[k] - c.z) < std::abs(v[best] - c.z)) best = k;
    cusp_idx.push_back(best);
  }
  std::sort(cusp_idx.begin(), cusp_idx.end());

  const int guard = 6;
  for (size_t s = 0; s < cusp_idx.size(); ++s) {
    int from = cusp_idx[s] + guard;
    int to = cusp_idx[(s + 1) % cusp_idx.size()] + (s + 1 == cusp_idx.size() ? n : 0) - guard;
    double min_turn = 1e9, max_turn = -1e9;
    for (int k = from; k + 2 <= to; ++k) {
      cplx t1 = w[(k + 1) % n] - w[k % n];
      cplx t2 = w[(k + 2) % n] - w[(k + 1) % n];
      if (std::abs(t1) == 0 || std::abs(t2) == 0) continue;
      double turn = std::arg(t2 / t1);
      min_turn = std::min(min_turn, turn);
      max_turn = std::max(max_turn, turn);
    }
    CHECK((min_turn >= -1e-2 || max_turn <= 1e-2));
  }
}

TEST_CASE("a double derivative zero on the arc is an F2 slow point, not a cusp") {
  // p' = z^2 (z - 2)/2 and q' = z^2 share a double zero at 0, which lies on
  // the critical circle |z - 2| = 2 since the reduced dilatation (z - 2)/2
  // is unimodular there; the image slows to zero speed at f(0) but the
  // tangent never reverses
  HarmonicPolynomial f{CPoly({0, 0, 0, cplx(-1.0 / 3.0), 0.125}), CPoly({0, 0, 0, cplx(1.0 / 3.0)})};
  REQUIRE(detect_degeneracy(f).kind == DegeneracyReport::Kind::generic);
  PlaneMap m = make_plane_map(f, "tangent slow point");
  const double res = 5.0 / 256;
  CriticalSet cs = trace(m, Viewport{-0.5, 4.5, -2.5, 2.5}, res);

  REQUIRE(cs.curves.size() == 1);
  CHECK(cs.curves[0].closed);
  // the zero is quintuple-flat at the origin, so position slop there is
  // bounded by the cell size rather than the bisection tolerance
  for (cplx z : cs.curves[0].pts) CHECK(std::abs(std::abs(z - 2.0) - 2.0) < res);
  REQUIRE(cs.isolated.size() == 1);
  CHECK(std::abs(cs.isolated[0].z) < 1e-10);
  CHECK(!cs.isolated[0].in_N);  // unimodular reduced dilatation: on the arc

  auto pts = classify(f, cs);
  CHECK(count_kind(pts, CritKind::N) == 0);
  REQUIRE(count_kind(pts, CritKind::F2) == 1);
  for (const auto& p : pts)
    if (p.kind == CritKind::F2) {
      CHECK(std::abs(p.z) < 1e-6);
      CHECK(p.ell == 2);
      LocalModel lm = local_model(p);
      CHECK(lm.j == 3);
      CHECK(lm.k == 3);
      CHECK(!lm.ambiguous);
    }

  ImageCurve img = image_curve(m, cs);
  auto oracle = sweep_cusps([](double t) { return cplx(2, 0) + 2.0 * std::polar(1.0, t); }, m, 16384);
  CHECK(img.cusps.size() == oracle.size());
  cplx slow_image = m(cplx(0, 0));
  for (const auto& c : img.cusps) CHECK(std::abs(c.w - slow_image) > 0.05);
}

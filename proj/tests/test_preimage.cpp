#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "harmval/preimage.hpp"

using namespace harmval;

namespace {

// Independent grid-Newton oracle: finite-difference Jacobian and a damped
// 2x2 Newton step, written here from scratch. Shares only map evaluation
// with the solver under test.
std::vector<cplx> oracle_solve(const PlaneMap& f, cplx w, double span, int n) {
  std::vector<cplx> sols;
  auto metric = [&](cplx z) {
    cplx v = f(z) - w;
    return std::abs(v.real()) + std::abs(v.imag());
  };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      cplx z(-span + 2 * span * (i + 0.5) / n, -span + 2 * span * (j + 0.5) / n);
      for (int it = 0; it < 80; ++it) {
        cplx r = f(z) - w;
        if (std::abs(r.real()) + std::abs(r.imag()) < 1e-13) break;
        const double h = 1e-7 * std::max(1.0, std::abs(z));
        cplx fx = (f(z + h) - f(z - h)) / (2 * h);
        cplx fy = (f(z + cplx(0, h)) - f(z - cplx(0, h))) / (2 * h);
        double det = fx.real() * fy.imag() - fx.imag() * fy.real();
        if (std::abs(det) < 1e-14) break;
        double dx = (r.real() * fy.imag() - r.imag() * fy.real()) / det;
        double dy = (r.imag() * fx.real() - r.real() * fx.imag()) / det;
        double damp = 1.0;
        double cur = std::abs(r.real()) + std::abs(r.imag());
        cplx next = z;
        for (int half = 0; half < 12; ++half) {
          cplx cand = z - damp * cplx(dx, dy);
          if (metric(cand) < cur) {
            next = cand;
            break;
          }
          damp *= 0.5;
        }
        if (next == z) break;
        z = next;
      }
      if (metric(z) < 1e-10) {
        bool dup = false;
        for (const auto& s : sols)
          if (std::abs(s - z) < 1e-5 * std::max(1.0, std::abs(z))) dup = true;
        if (!dup) sols.push_back(z);
      }
    }
  }
  return sols;
}

bool matches_oracle(const PreimageSet& got, const std::vector<cplx>& oracle, double tol = 1e-6) {
  if ((int)oracle.size() != got.count()) return false;
  for (const auto& o : oracle) {
    double best = 1e18;
    for (const auto& g : got.solutions) best = std::min(best, std::abs(g - o));
    if (best > tol * std::max(1.0, std::abs(o))) return false;
  }
  return true;
}

const HarmonicPolynomial& catpoly(const char* name) { return *find_catalog(name)->map.poly; }

}  // namespace

TEST_CASE("conjugate system vanishes exactly on the preimage diagonal") {
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (const char* name : {"quadratic", "cubic-star", "cubic-twos", "polyunbdds", "flatpoly"}) {
    const auto& f = catpoly(name);
    for (int t = 0; t < 10; ++t) {
      cplx z(u(rng), u(rng));
      cplx w = f.eval(z);
      ConjugateSystem sys = build_conjugate_system(f, w);
      cplx s = std::conj(z);
      cplx e1 = sys.p.eval(z) + sys.qbar.eval(s) - sys.w;
      cplx e2 = sys.pbar.eval(s) + sys.q.eval(z) - std::conj(sys.w);
      CHECK(std::abs(e1) < 1e-10 * std::max(1.0, std::abs(w)));
      CHECK(std::abs(e2) < 1e-10 * std::max(1.0, std::abs(w)));
    }
  }
  ConjugateSystem qs = build_conjugate_system(catpoly("quadratic"), 0.0);
  CHECK(qs.deg_s_e1() == 1);
  CHECK(qs.deg_s_e2() == 2);
}

TEST_CASE("elimination matches the closed-form resultant for the quadratic") {
  // E1 is linear in s, so R(z) = E2 evaluated at the root of E1:
  // R = g^2 + g - z - conj(w) with g = z^2 + z - w (up to the det sign).
  for (cplx w : {cplx(0, 0), cplx(0.3, -0.2), cplx(5, 1)}) {
    Elimination e = eliminate(build_conjugate_system(catpoly("quadratic"), w));
    REQUIRE_FALSE(e.identically_zero);
    CPoly g({-w, 1, 1});
    CPoly closed = g * g + g - CPoly({std::conj(w), 1});
    REQUIRE(e.resultant.degree() == closed.degree());
    double scale = closed.coeff_scale();
    double dplus = 0, dminus = 0;
    for (int k = 0; k <= closed.degree(); ++k) {
      dplus = std::max(dplus, std::abs(e.resultant.coeff(k) - closed.coeff(k)));
      dminus = std::max(dminus, std::abs(e.resultant.coeff(k) + closed.coeff(k)));
    }
    CHECK(std::min(dplus, dminus) < 1e-8 * scale);
  }
}

TEST_CASE("elimination matches the closed-form resultant for cubic-twos") {
  // q = -z keeps E1 linear in s; the true degree here is 9, which exceeds
  // n_p*n_q + max(n_p, n_q) = 6, so this case pins the node-count choice.
  cplx w(0.1, 0.2);
  const auto& f = catpoly("cubic-twos");
  Elimination e = eliminate(build_conjugate_system(f, w));
  REQUIRE_FALSE(e.identically_zero);
  CPoly g = f.p - CPoly::constant(w);  // root of E1 in s
  // E2(s) = pbar(s) + q(z) - conj(w), and pbar = p here (real coefficients)
  CPoly closed = (g * g * g) * f.p.coeff(3) + g * f.p.coeff(1) - CPoly({std::conj(w), 1});
  REQUIRE(e.resultant.degree() == 9);
  REQUIRE(closed.degree() == 9);
  double scale = closed.coeff_scale();
  double dplus = 0, dminus = 0;
  for (int k = 0; k <= 9; ++k) {
    dplus = std::max(dplus, std::abs(e.resultant.coeff(k) - closed.coeff(k)));
    dminus = std::max(dminus, std::abs(e.resultant.coeff(k) + closed.coeff(k)));
  }
  CHECK(std::min(dplus, dminus) < 1e-7 * scale);
}

TEST_CASE("quadratic preimages at hand-computed targets") {
  const auto& f = catpoly("quadratic");

  PreimageSet at0 = preimages(f, 0.0);
  CHECK(at0.certified);
  REQUIRE(at0.verdict == PreimageSet::Verdict::finite);
  std::vector<cplx> want0 = {cplx(-1, -1), cplx(-1, 1), cplx(0, 0)};
  REQUIRE(at0.count() == 3);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(at0.solutions[k] - want0[k]) < 1e-8);

  PreimageSet at5 = preimages(f, 5.0);
  REQUIRE(at5.count() == 2);
  CHECK(std::abs(at5.solutions[0] + std::sqrt(5.0)) < 1e-9);
  CHECK(std::abs(at5.solutions[1] - std::sqrt(5.0)) < 1e-9);

  // inside the deltoid: two solutions on y = 0, two on x = -1
  PreimageSet inside = preimages(f, 0.05);
  REQUIRE(inside.count() == 4);
  // just left of the vertical crossing at w = 0: exterior, 2 solutions
  PreimageSet outside = preimages(f, -0.05);
  REQUIRE(outside.count() == 2);
  CHECK(std::abs(outside.solutions[0] - cplx(-1, -std::sqrt(1.05))) < 1e-8);
  CHECK(std::abs(outside.solutions[1] - cplx(-1, std::sqrt(1.05))) < 1e-8);

  for (const auto& r : inside.residuals) CHECK(r < 1e-10);
}

TEST_CASE("cubic-star preimages of the critical value 0") {
  const auto& f = catpoly("cubic-star");
  PreimageSet all = preimages(f, 0.0);
  REQUIRE(all.verdict == PreimageSet::Verdict::finite);
  CHECK(all.certified);
  REQUIRE(all.count() == 6);
  // z = 0, z = 3/2, and conjugate pairs at x = 3(-1 +- sqrt(5))/8
  bool has_zero = false, has_32 = false;
  for (const auto& z : all.solutions) {
    if (std::abs(z) < 1e-8) has_zero = true;
    if (std::abs(z - 1.5) < 1e-8) has_32 = true;
    CHECK(std::abs(f.eval(z)) < 1e-10);
  }
  CHECK(has_zero);
  CHECK(has_32);

  PreimageSet disc = preimages(f, 0.0, Region::disc(0.0, 1.0));
  CHECK(disc.count() == 1);
  CHECK(std::abs(disc.solutions[0]) < 1e-8);
}

TEST_CASE("flatpoly verdicts across targets") {
  const auto& f = catpoly("flatpoly");

  PreimageSet origin = preimages(f, 0.0);
  CHECK(origin.verdict == PreimageSet::Verdict::infinite);
  CHECK(origin.count() >= 2);
  for (const auto& z : origin.solutions)
    CHECK(std::abs(z.real() - z.imag()) < 1e-7 * std::max(1.0, std::abs(z)));

  PreimageSet one = preimages(f, 1.0);
  CHECK(one.verdict == PreimageSet::Verdict::finite);
  CHECK(one.count() == 0);

  PreimageSet ati = preimages(f, cplx(0, 1));
  REQUIRE(ati.count() == 1);
  CHECK(std::abs(ati.solutions[0] - cplx(0.25, -0.25)) < 1e-9);
}

TEST_CASE("degenerate shapes route around elimination") {
  HarmonicPolynomial line{CPoly({0, 1}), CPoly({0, 1})};  // 2 Re z
  CHECK(preimages(line, 0.5).verdict == PreimageSet::Verdict::infinite);
  CHECK(preimages(line, cplx(0.5, 0.3)).verdict == PreimageSet::Verdict::finite);
  CHECK(preimages(line, cplx(0.5, 0.3)).count() == 0);

  HarmonicPolynomial constant{CPoly::constant(cplx(1, 2)), CPoly::constant(0.0)};
  CHECK(preimages(constant, cplx(1, 2)).verdict == PreimageSet::Verdict::infinite);
  CHECK(preimages(constant, 0.0).verdict == PreimageSet::Verdict::finite);

  // analytic member: q constant, solved by direct root extraction
  HarmonicPolynomial analytic{CPoly({cplx(0, 0), 0, 0, 1}), CPoly::constant(cplx(0, -1))};
  PreimageSet cube = preimages(analytic, cplx(8, 1));  // z^3 + i = 8 + i
  REQUIRE(cube.count() == 3);
  CHECK(cube.certified);
  CHECK(std::abs(cube.solutions[2] - 2.0) < 1e-9);
}

TEST_CASE("certified path agrees with the descent oracle on random targets") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  int checked = 0;
  for (const char* name : {"quadratic", "cubic-star", "cubic-twos", "dumbbell"}) {
    const auto& entry = *find_catalog(name);
    for (int t = 0; t < 5; ++t) {
      cplx w(u(rng), u(rng));
      PreimageSet got = preimages(*entry.map.poly, w);
      REQUIRE(got.verdict == PreimageSet::Verdict::finite);
      std::vector<cplx> want = oracle_solve(entry.map, w, 4.0, 24);
      bool all_small = true;
      for (const auto& z : got.solutions)
        if (std::abs(z) > 3.2) all_small = false;  // oracle grid covers |z| <= 4
      if (!all_small) continue;
      ++checked;
      CHECK_MESSAGE(matches_oracle(got, want), name, " w=", w.real(), "+", w.imag(), "i");
    }
  }
  CHECK(checked >= 12);
}

TEST_CASE("wilmshurst bound on certified counts") {
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 25; ++trial) {
    int np = 1 + int(rng() % 4);
    int nq = 1 + int(rng() % 4);
    std::vector<cplx> pc(np + 1), qc(nq + 1);
    for (auto& a : pc) a = cplx(u(rng), u(rng));
    for (auto& a : qc) a = cplx(u(rng), u(rng));
    if (std::abs(pc.back()) < 0.3) pc.back() = 1.0;
    if (std::abs(qc.back()) < 0.3) qc.back() = 0.7;
    HarmonicPolynomial f{CPoly(pc), CPoly(qc)};
    if (detect_degeneracy(f).kind != DegeneracyReport::Kind::generic) continue;
    if (np == nq && std::abs(std::abs(pc.back()) - std::abs(qc.back())) < 0.05) continue;
    int N = f.max_degree();
    cplx w(u(rng), u(rng));
    PreimageSet s = preimages(f, w);
    if (s.verdict == PreimageSet::Verdict::finite) CHECK(s.count() <= N * N);
  }
}

TEST_CASE("numeric preimages inside a box") {
  const auto& th = find_catalog("transharm")->map;
  Viewport box{-12, 8, -8, 8};
  PreimageSet w0 = preimages_numeric(th, 0.0, box, 48);
  REQUIRE(w0.count() == 1);
  CHECK_FALSE(w0.certified);
  // x + e^x = 0 at x ~ -0.5671
  CHECK(std::abs(w0.solutions[0] - cplx(-0.56714329040978384, 0)) < 1e-8);

  PreimageSet two = preimages_numeric(th, cplx(-10, M_PI), box, 48);
  REQUIRE(two.count() == 2);
  for (const auto& z : two.solutions) CHECK(std::abs(z.imag() - M_PI) < 1e-8);

  const auto& c1p = find_catalog("c1poly")->map;
  PreimageSet four = preimages_numeric(c1p, cplx(2, 1), Viewport{-3, 3, -3, 3}, 32);
  CHECK(four.count() == 4);
}

TEST_CASE("valence routes by membership") {
  ValenceResult vq = valence(find_catalog("quadratic")->map, cplx(0.5, 0.0));
  CHECK(vq.certified);
  CHECK(vq.count == 4);
  ValenceResult vt = valence(find_catalog("transharm")->map, 0.0, Viewport{-12, 8, -8, 8}, 48);
  CHECK_FALSE(vt.certified);
  CHECK(vt.count == 1);
}

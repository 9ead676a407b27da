#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "harmval/cluster.hpp"
#include "harmval/planemap.hpp"

using namespace harmval;

namespace {

const CatalogEntry& entry(const std::string& name) {
  const CatalogEntry* e = find_catalog(name);
  REQUIRE(e != nullptr);
  return *e;
}

HarmonicPolynomial hp(std::vector<cplx> p, std::vector<cplx> q) {
  return HarmonicPolynomial{CPoly(std::move(p)), CPoly(std::move(q))};
}

// One-sided check: every cloud point sits within eps of the reference set.
double max_distance_to(const ClusterSet& ref, const std::vector<cplx>& cloud) {
  double worst = 0.0;
  for (cplx w : cloud) worst = std::max(worst, ref.distance(w));
  return worst;
}

bool covers(const std::vector<cplx>& cloud, cplx target, double eps) {
  return std::any_of(cloud.begin(), cloud.end(),
                     [&](cplx w) { return std::abs(w - target) <= eps; });
}

bool has_warning(const ClusterEstimate& est, const std::string& needle) {
  return std::any_of(est.warnings.begin(), est.warnings.end(), [&](const std::string& w) {
    return w.find(needle) != std::string::npos;
  });
}

}  // namespace

TEST_CASE("escape test certifies modulus growth from the leading terms") {
  // Degree mismatch in either direction.
  CHECK(escape_test(hp({0, 1, 1}, {0, -1})));        // z^2 + z - conj(z)
  CHECK(escape_test(hp({0, -1}, {0, 0, 0, 1})));     // -z + conj(z^3)
  CHECK(escape_test(hp({0, 2}, {0, 1})));            // 2z + conj(z), equal degree
  CHECK(escape_test(hp({}, {0, 0, 1})));             // pure co-analytic
  // Equal degree, equal leading modulus: inconclusive.
  CHECK_FALSE(escape_test(hp({0, 0, 0, cplx(0, 2), 1}, {0, 0, 0, 0, 1})));
  CHECK_FALSE(escape_test(hp({0, 1, 3}, {0, 0, cplx(0, 3)})));
  CHECK_FALSE(escape_test(hp({0, 1, 3}, {0, 0, cplx(3 + 1e-14, 0)})));
  // Constant maps never escape.
  CHECK_FALSE(escape_test(hp({5}, {2})));
  CHECK_FALSE(escape_test(hp({}, {})));
  // Catalog cross-check.
  CHECK(escape_test(*entry("quadratic").map.poly));
  CHECK(escape_test(*entry("cubic-star").map.poly));
  CHECK(escape_test(*entry("cubic-twos").map.poly));
  CHECK(escape_test(*entry("dumbbell").map.poly));
  CHECK_FALSE(escape_test(*entry("polyunbdds").map.poly));
}

TEST_CASE("sampler rejects malformed parameters") {
  const PlaneMap& f = entry("quadratic").map;
  CHECK_THROWS_AS(sample_cluster(f, {}, 128, 10.0), std::invalid_argument);
  CHECK_THROWS_AS(sample_cluster(f, {10.0, 10.0}, 128, 10.0), std::invalid_argument);
  CHECK_THROWS_AS(sample_cluster(f, {30.0, 10.0}, 128, 10.0), std::invalid_argument);
  CHECK_THROWS_AS(sample_cluster(f, {-5.0, 10.0}, 128, 10.0), std::invalid_argument);
  CHECK_THROWS_AS(sample_cluster(f, {10.0, 30.0}, 32, 10.0), std::invalid_argument);
  CHECK_THROWS_AS(sample_cluster(f, {10.0, 30.0}, 128, 0.0), std::invalid_argument);
}

TEST_CASE("escaping maps keep an empty cloud even with a generous bound") {
  // Bounded values do appear on small circles; the cross-radius match must
  // discard all of them because nothing accumulates.
  const std::vector<double> radii{10.0, 100.0, 1000.0};
  for (const char* name : {"quadratic", "cubic-star", "cubic-twos", "dumbbell"}) {
    const CatalogEntry& e = entry(name);
    REQUIRE(escape_test(*e.map.poly));
    ClusterEstimate est = sample_cluster(e.map, radii, 1024, 1e6);
    CHECK_MESSAGE(est.set.cloud.empty(), name);
  }
  PlaneMap g = make_plane_map(hp({0, cplx(0, 1), 0, 1}, {0, 2}));
  REQUIRE(escape_test(*g.poly));
  CHECK(sample_cluster(g, radii, 1024, 1e6).set.cloud.empty());
  CHECK(sample_cluster(g, radii, 64, 1e6).set.cloud.empty());
}

TEST_CASE("rapidly decaying transcendental perturbation leaves no cluster") {
  ClusterEstimate est = sample_cluster(entry("sarason").map, {10.0, 30.0, 100.0}, 2048, 50.0);
  CHECK(est.set.cloud.empty());
}

TEST_CASE("transcendental strip map clusters on the odd half-integer lines") {
  // Radii above the bound keep the transient near-circle image (f(z) ~ z on
  // the half-plane where exp(x) dies) outside the sampled disc.
  const CatalogEntry& e = entry("transharm");
  ClusterEstimate est = sample_cluster(e.map, {24.0, 34.0}, 4096, 20.0);
  REQUIRE(est.set.cloud.size() > 500);
  CHECK_FALSE(has_warning(est, "largest radius"));

  Viewport vp{-25, 25, -25, 25};
  ClusterSet exact = e.exact_cluster(vp);
  CHECK(max_distance_to(exact, est.set.cloud) < 0.05);

  // Both circles resolve the first three line pairs; the match keeps them.
  for (double y : {M_PI / 2, -M_PI / 2, 3 * M_PI / 2, -3 * M_PI / 2}) {
    CHECK_MESSAGE(covers(est.set.cloud, cplx(2.0, y), 0.3), y);
    CHECK_MESSAGE(covers(est.set.cloud, cplx(-6.0, y), 0.3), y);
  }
}

TEST_CASE("radii beyond double-precision reach fall back to the resolvable pair") {
  // exp(x) swamps the window around the lines once x exceeds ~40, so the
  // largest circle contributes nothing and the sampler says so.
  const CatalogEntry& e = entry("transharm");
  ClusterEstimate est = sample_cluster(e.map, {24.0, 34.0, 50.0}, 4096, 20.0);
  CHECK(has_warning(est, "largest radius"));
  REQUIRE(est.set.cloud.size() > 500);
  ClusterSet exact = e.exact_cluster({-25, 25, -25, 25});
  CHECK(max_distance_to(exact, est.set.cloud) < 0.05);
}

TEST_CASE("refining the angular grid moves no cloud point by more than 0.05") {
  const CatalogEntry& e = entry("transharm");
  ClusterEstimate coarse = sample_cluster(e.map, {24.0, 34.0}, 2048, 20.0);
  ClusterEstimate fine = sample_cluster(e.map, {24.0, 34.0}, 4096, 20.0);
  REQUIRE_FALSE(coarse.set.cloud.empty());
  REQUIRE_FALSE(fine.set.cloud.empty());
  CHECK(max_distance_to(fine.set, coarse.set.cloud) < 0.05);
}

TEST_CASE("cubic with unbounded jacobian set clusters on the real axis") {
  const CatalogEntry& e = entry("polyunbdds");
  ClusterEstimate est = sample_cluster(e.map, {10.0, 30.0, 100.0}, 4096, 50.0);
  REQUIRE(est.set.cloud.size() > 200);
  ClusterSet exact = e.exact_cluster({-60, 60, -60, 60});
  REQUIRE_FALSE(exact.lines.empty());
  CHECK(max_distance_to(exact, est.set.cloud) < 0.05);
  auto [lo, hi] = std::minmax_element(
      est.set.cloud.begin(), est.set.cloud.end(),
      [](cplx a, cplx b) { return a.real() < b.real(); });
  CHECK(lo->real() < -20.0);
  CHECK(hi->real() > 20.0);
}

TEST_CASE("jacobian-degenerate quadratic clusters on the real axis") {
  const CatalogEntry& e = entry("flatpoly");
  ClusterEstimate est = sample_cluster(e.map, {10.0, 30.0, 100.0}, 4096, 10.0);
  REQUIRE(est.set.cloud.size() > 200);
  ClusterSet exact = e.exact_cluster({-20, 20, -20, 20});
  CHECK(max_distance_to(exact, est.set.cloud) < 0.05);
  for (cplx w : est.set.cloud) CHECK(std::abs(w.real()) < 16.0);
  CHECK(covers(est.set.cloud, cplx(5.0, 0.0), 0.3));
  CHECK(covers(est.set.cloud, cplx(-5.0, 0.0), 0.3));
}

TEST_CASE("non-harmonic strip map clusters on the odd half-integer lines") {
  const CatalogEntry& e = entry("c1trans");
  REQUIRE(e.has_exact_cluster);
  ClusterEstimate est = sample_cluster(e.map, {10.0, 30.0, 100.0}, 4096, 20.0);
  REQUIRE(est.set.cloud.size() > 200);
  ClusterSet exact = e.exact_cluster({-25, 25, -25, 25});
  CHECK(max_distance_to(exact, est.set.cloud) < 0.05);
  for (double y : {M_PI / 2, -M_PI / 2, 3 * M_PI / 2, -3 * M_PI / 2})
    CHECK_MESSAGE(covers(est.set.cloud, cplx(1.0, y), 0.3), y);
}

TEST_CASE("closed-form sets come back clipped and verdict-tagged") {
  ClusterEstimate poly = exact_cluster(entry("polyunbdds"), {-8, 8, -8, 8});
  CHECK(poly.verdict == ClusterVerdict::exact_catalog);
  REQUIRE_FALSE(poly.set.lines.empty());
  CHECK(poly.set.distance(cplx(3.7, 0.0)) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(poly.set.distance(cplx(1.0, 1.0)) == doctest::Approx(1.0));

  ClusterEstimate quad = exact_cluster(entry("quadratic"), {-8, 8, -8, 8});
  CHECK(quad.verdict == ClusterVerdict::exact_catalog);
  CHECK(quad.set.empty());

  CatalogEntry bare;
  bare.name = "bare";
  bare.has_exact_cluster = false;
  CHECK_THROWS_AS(exact_cluster(bare, {-8, 8, -8, 8}), std::invalid_argument);
}

TEST_CASE("routing prefers catalog data, then the escape certificate") {
  ClusterEstimate viaCatalog = cluster_at_infinity(entry("transharm").map, {-8, 8, -8, 8});
  CHECK(viaCatalog.verdict == ClusterVerdict::exact_catalog);
  CHECK_FALSE(viaCatalog.set.lines.empty());

  PlaneMap escaping = make_plane_map(hp({0, 1, 1}, {0, -1}));
  escaping.name.clear();
  ClusterEstimate certified = cluster_at_infinity(escaping, {-8, 8, -8, 8});
  CHECK(certified.verdict == ClusterVerdict::empty_certified);
  CHECK(certified.set.empty());
  CHECK(certified.set.exact);

  // Equal leading moduli force the sampler and a caveat.
  PlaneMap inconclusive = make_plane_map(hp({0, 0, 1}, {0, 1, cplx(0, 1)}));
  inconclusive.name.clear();
  ClusterEstimate sampled = cluster_at_infinity(inconclusive, {-8, 8, -8, 8});
  CHECK(sampled.verdict == ClusterVerdict::sampled);
  CHECK(has_warning(sampled, "inconclusive"));
  CHECK(sampled.angular_n == 4096);
  CHECK(sampled.radii == std::vector<double>{10.0, 30.0, 100.0, 300.0});
}

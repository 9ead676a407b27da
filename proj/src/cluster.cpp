#include "harmval/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "harmval/parallel.hpp"

namespace harmval {

bool escape_test(const HarmonicPolynomial& f) {
  const int np = f.p.degree();
  const int nq = f.q.degree();
  if (np <= 0 && nq <= 0) return false;  // constant map, nothing escapes
  if (np != nq) return true;
  const double la = std::abs(f.p.lead());
  const double lb = std::abs(f.q.lead());
  // Near-equal leading moduli are treated as equal: a false return is always
  // safe, a wrong true would certify an empty set that may not be empty.
  return std::abs(la - lb) > 1e-12 * std::max(la, lb);
}

namespace {

struct CircleSample {
  double theta;
  cplx w;
};

bool finite(cplx a) { return std::isfinite(a.real()) && std::isfinite(a.imag()); }

double segment_to_origin(cplx a, cplx b) {
  if (!finite(a) || !finite(b)) {
    // Overflowed endpoint: direction information is gone, fall back to the
    // nearer endpoint so a still-bounded neighbour keeps the window alive.
    const double ma = finite(a) ? std::abs(a) : std::numeric_limits<double>::infinity();
    const double mb = finite(b) ? std::abs(b) : std::numeric_limits<double>::infinity();
    return std::min(ma, mb);
  }
  const cplx d = b - a;
  const double len2 = std::norm(d);
  if (len2 == 0.0) return std::abs(a);
  double t = -(a.real() * d.real() + a.imag() * d.imag()) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return std::abs(a + t * d);
}

// Golden-section minimum of |f| on the arc [lo, hi]; near-flat windows a few
// ulps wide still converge because the stop test is absolute in theta.
double arc_min(const PlaneMap& f, double r, double lo, double hi, double* theta_at) {
  constexpr double kGolden = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - kGolden * (b - a), x2 = a + kGolden * (b - a);
  double f1 = std::abs(f(std::polar(r, x1))), f2 = std::abs(f(std::polar(r, x2)));
  for (int it = 0; it < 90 && b - a > 1e-18; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kGolden * (b - a);
      f1 = std::abs(f(std::polar(r, x1)));
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kGolden * (b - a);
      f2 = std::abs(f(std::polar(r, x2)));
    }
  }
  *theta_at = f1 <= f2 ? x1 : x2;
  return std::min(f1, f2);
}

// Angle in [in_th, out_th] (in bounded, out not) where |f| crosses the bound.
double cross_bound(const PlaneMap& f, double r, double bound, double in_th, double out_th) {
  for (int it = 0; it < 120 && in_th != out_th; ++it) {
    const double mid = 0.5 * (in_th + out_th);
    if (mid == in_th || mid == out_th) break;
    (std::abs(f(std::polar(r, mid))) <= bound ? in_th : out_th) = mid;
  }
  return in_th;
}

// Samples the dip of |f| through the disc |w| <= bound inside the angular
// window [lo, hi]: locate the minimum, bisect both |f| = bound crossings,
// then ladder the passage uniformly in angle.
void walk_passage(const PlaneMap& f, double r, double bound, double lo, double hi,
                  std::vector<CircleSample>& out) {
  double th_min = 0.0;
  if (arc_min(f, r, lo, hi, &th_min) > bound) return;
  const double left = cross_bound(f, r, bound, th_min, lo);
  const double right = cross_bound(f, r, bound, th_min, hi);
  constexpr int kLadder = 512;
  for (int i = 0; i <= kLadder; ++i) {
    const double th = left + (right - left) * (double(i) / kLadder);
    const cplx w = f(std::polar(r, th));
    if (std::abs(w) <= bound) out.push_back({th, w});
  }
}

std::vector<CircleSample> sample_circle(const PlaneMap& f, double r, int n, double bound) {
  // Angles run over [-pi, pi) so both half-planes see full double resolution
  // near theta = 0.  A [0, 2pi) grid quantizes y < 0 windows at r * ulp(2pi),
  // which maps with steep growth on the positive axis amplify badly; the
  // coarse end of this grid sits at theta = +-pi instead.
  const auto angle = [n](double k) { return M_PI * (2.0 * k - n) / n; };
  std::vector<cplx> w(n);
  parallel_for(n, [&](std::int64_t k) {
    w[k] = f(std::polar(r, angle(double(k))));
  });
  std::vector<CircleSample> out;
  int windows = 0;
  for (int k = 0; k < n; ++k) {
    const double th = angle(double(k));
    const double th1 = angle(double(k + 1));
    if (std::abs(w[k]) <= bound) out.push_back({th, w[k]});
    const int k1 = (k + 1) % n;
    const bool in0 = std::abs(w[k]) <= bound, in1 = std::abs(w[k1]) <= bound;
    if (in0 && in1) {
      // Densify stretches the grid traverses in large image hops, so the
      // polyline fed to the cross-radius match follows the actual curve.
      const double hop = std::abs(w[k1] - w[k]);
      const double target = bound / 64.0;
      if (finite(w[k]) && finite(w[k1]) && hop > target) {
        const int subs = std::min(128, (int)std::ceil(hop / target));
        for (int i = 1; i < subs; ++i) {
          const double tm = th + (th1 - th) * (double(i) / subs);
          const cplx wm = f(std::polar(r, tm));
          if (std::abs(wm) <= bound) out.push_back({tm, wm});
        }
      }
      continue;
    }
    if (segment_to_origin(w[k], w[k1]) > bound) continue;
    if (++windows > 256) break;  // pathological map; keep the run bounded
    walk_passage(f, r, bound, th, th1, out);
  }
  std::sort(out.begin(), out.end(),
            [](const CircleSample& a, const CircleSample& b) { return a.theta < b.theta; });
  return out;
}

}  // namespace

ClusterEstimate sample_cluster(const PlaneMap& f, const std::vector<double>& radii,
                               int angular_n, double bound) {
  if (radii.empty()) throw std::invalid_argument("sample_cluster: empty radius list");
  for (size_t i = 0; i < radii.size(); ++i)
    if (radii[i] <= 0.0 || (i > 0 && radii[i] <= radii[i - 1]))
      throw std::invalid_argument("sample_cluster: radii must be positive and increasing");
  if (angular_n < 64) throw std::invalid_argument("sample_cluster: angular_n < 64");
  if (!(bound > 0.0)) throw std::invalid_argument("sample_cluster: bound must be positive");

  ClusterEstimate est;
  est.verdict = ClusterVerdict::sampled;
  est.radii = radii;
  est.angular_n = angular_n;
  est.bound = bound;

  std::vector<std::pair<double, std::vector<CircleSample>>> circles;
  for (double r : radii) {
    auto s = sample_circle(f, r, angular_n, bound);
    if (!s.empty()) circles.emplace_back(r, std::move(s));
  }
  if (circles.empty()) {
    est.warnings.push_back("no bounded samples at any radius");
    return est;
  }
  if (circles.size() < 2) {
    est.warnings.push_back("bounded samples at a single radius only; no corroboration");
    return est;
  }
  const auto& [r2, s2] = circles[circles.size() - 1];
  const auto& [r1, s1] = circles[circles.size() - 2];
  if (r2 != radii.back())
    est.warnings.push_back("no bounded samples at the largest radius; matched the largest two that produced any");

  // Keep a candidate only when the inner circle's image passes nearly through
  // the same value, and extrapolate the matched pair in 1/r.  The inner image
  // is treated as a polyline between consecutive bounded samples — but only
  // across short hops, so undersampled oscillations and passage boundaries do
  // not contribute phantom chords.  Matches are further gated to nearby circle
  // angles: two passages of one circle can brush the same value (opposite
  // branches of a single asymptote), and pairing across them bends the
  // extrapolation while the true partner sits just outside the bound.
  // Escaping maps fail the match: their bounded values at different radii sit
  // far apart.
  constexpr double kAngleGate = 0.5;
  std::vector<cplx> matched(s2.size(), cplx(std::numeric_limits<double>::quiet_NaN(), 0));
  parallel_for((std::int64_t)s2.size(), [&](std::int64_t i) {
    const cplx w2 = s2[i].w;
    const double th2 = s2[i].theta;
    double best = std::numeric_limits<double>::infinity();
    cplx proj{};
    for (size_t j = 0; j < s1.size(); ++j) {
      const double dth = std::abs(th2 - s1[j].theta);
      if (std::min(dth, 2.0 * M_PI - dth) > kAngleGate) continue;
      const cplx a = s1[j].w;
      double d = std::abs(w2 - a);
      cplx cand = a;
      if (j + 1 < s1.size()) {
        const cplx b = s1[j + 1].w;
        const double len = std::abs(b - a);
        if (len > 0.0 && len <= 0.3 * (1.0 + std::min(std::abs(a), std::abs(b)))) {
          double t = ((w2 - a) * std::conj(b - a)).real() / (len * len);
          t = std::clamp(t, 0.0, 1.0);
          const cplx p = a + t * (b - a);
          const double ds = std::abs(w2 - p);
          if (ds < d) {
            d = ds;
            cand = p;
          }
        }
      }
      if (d < best) {
        best = d;
        proj = cand;
      }
    }
    if (best <= 0.05 * (1.0 + std::abs(w2)))
      matched[i] = (r2 * w2 - r1 * proj) / (r2 - r1);
  });
  for (const cplx& m : matched)
    if (!std::isnan(m.real())) est.set.cloud.push_back(m);
  if (est.set.cloud.empty())
    est.warnings.push_back("bounded samples never matched across radii; treating them as transient");
  return est;
}

ClusterEstimate exact_cluster(const CatalogEntry& entry, const Viewport& vp) {
  if (!entry.has_exact_cluster || !entry.exact_cluster)
    throw std::invalid_argument("exact_cluster: no closed-form set for '" + entry.name + "'");
  ClusterEstimate est;
  est.verdict = ClusterVerdict::exact_catalog;
  est.set = entry.exact_cluster(vp);
  return est;
}

ClusterEstimate cluster_at_infinity(const PlaneMap& f, const Viewport& vp) {
  if (!f.name.empty()) {
    if (const CatalogEntry* e = find_catalog(f.name); e && e->has_exact_cluster)
      return exact_cluster(*e, vp);
  }
  if (f.poly && escape_test(*f.poly)) {
    ClusterEstimate est;
    est.verdict = ClusterVerdict::empty_certified;
    est.set.exact = true;
    return est;
  }
  ClusterEstimate est = sample_cluster(f, {10.0, 30.0, 100.0, 300.0}, 4096, 100.0);
  if (f.poly)
    est.warnings.push_back("leading moduli agree; escape test inconclusive, cloud is numeric only");
  return est;
}

}  // namespace harmval

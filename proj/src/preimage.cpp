#include "harmval/preimage.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "harmval/parallel.hpp"

namespace harmval {

namespace {

bool lex_re_im(const cplx& a, const cplx& b) {
  if (a.real() != b.real()) return a.real() < b.real();
  return a.imag() < b.imag();
}

// LU with partial pivoting; hadamard gets the product of row sup-norms,
// which scales the round-off floor of the determinant.
cplx lu_det(std::vector<cplx>& a, int n, double* hadamard) {
  double had = 1.0;
  for (int i = 0; i < n; ++i) {
    double rm = 0.0;
    for (int j = 0; j < n; ++j) rm = std::max(rm, std::abs(a[i * n + j]));
    had *= rm;
  }
  if (hadamard) *hadamard = had;
  cplx det = 1.0;
  for (int k = 0; k < n; ++k) {
    int piv = k;
    double best = std::abs(a[k * n + k]);
    for (int i = k + 1; i < n; ++i) {
      double m = std::abs(a[i * n + k]);
      if (m > best) {
        best = m;
        piv = i;
      }
    }
    if (best == 0.0) return 0.0;
    if (piv != k) {
      for (int j = k; j < n; ++j) std::swap(a[piv * n + j], a[k * n + j]);
      det = -det;
    }
    det *= a[k * n + k];
    for (int i = k + 1; i < n; ++i) {
      cplx f = a[i * n + k] / a[k * n + k];
      for (int j = k + 1; j < n; ++j) a[i * n + j] -= f * a[k * n + j];
    }
  }
  return det;
}

void dedup_sorted(std::vector<cplx>& pts, double rel) {
  std::sort(pts.begin(), pts.end(), lex_re_im);
  std::vector<cplx> out;
  for (const auto& z : pts) {
    bool merged = false;
    for (const auto& u : out)
      if (std::abs(z - u) <= rel * std::max(1.0, std::abs(z))) {
        merged = true;
        break;
      }
    if (!merged) out.push_back(z);
  }
  pts = std::move(out);
}

PreimageSet finish(const PlaneMap& map, cplx w, std::vector<cplx> candidates,
                   const Region& region, const PreimageOptions& opt, bool certified) {
  std::vector<cplx> kept;
  for (const auto& z : candidates) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) continue;
    if (residual_metric(map, z, w) >= opt.residual_tol) continue;
    if (!region.contains(z)) continue;
    kept.push_back(z);
  }
  dedup_sorted(kept, opt.dedup_rel);
  PreimageSet out;
  out.verdict = PreimageSet::Verdict::finite;
  out.certified = certified;
  out.solutions = std::move(kept);
  for (const auto& z : out.solutions) out.residuals.push_back(residual_metric(map, z, w));
  return out;
}

}  // namespace

ConjugateSystem build_conjugate_system(const HarmonicPolynomial& f, cplx w) {
  ConjugateSystem sys;
  sys.p = f.p;
  sys.q = f.q;
  sys.pbar = f.p.conjugate_coeffs();
  sys.qbar = f.q.conjugate_coeffs();
  sys.w = w;
  return sys;
}

namespace {

// Any root z of the eliminant satisfies |p(z)| <= |w| + sum |q_k| max(|z|,|s|)^k
// (or the p/q-swapped bound), so the dominant-coefficient floor
//   ||p_N| - |q_N|| r^N - sum_{k<N} (|p_k| + |q_k|) r^k
// exceeding |w| confines every root to |z| < r.  Interpolation nodes go just
// outside that radius: the wide 1+|w| circle drowns low-order determinant
// structure in LU rounding once |w| is large.
double eliminate_node_radius(const ConjugateSystem& sys) {
  double cmax = std::abs(sys.w);
  cmax = std::max(cmax, sys.p.coeff_scale());
  cmax = std::max(cmax, sys.q.coeff_scale());
  const double fallback = 1.0 + cmax;

  const int N = std::max(sys.p.degree(), sys.q.degree());
  const double lead = std::abs(std::abs(sys.p.coeff(N)) - std::abs(sys.q.coeff(N)));
  if (N < 1 || !(lead > 0.0)) return fallback;
  const auto floor_at = [&](double r) {
    double acc = lead * std::pow(r, N);
    double pw = 1.0;
    for (int k = 0; k < N; ++k, pw *= r)
      acc -= (std::abs(sys.p.coeff(k)) + std::abs(sys.q.coeff(k))) * pw;
    return acc;
  };
  double r = 1.0;
  while (floor_at(r) <= std::abs(sys.w) && r < fallback) r *= 1.25;
  return std::min(fallback, std::max(2.0, 1.25 * r));
}

}  // namespace

Elimination eliminate(const ConjugateSystem& sys) {
  const int nq = sys.deg_s_e1();
  const int np = sys.deg_s_e2();
  if (nq < 1 || np < 1)
    throw std::invalid_argument("eliminate needs s-degree >= 1 in both equations");

  Elimination out;
  const int deg_bound = np * np + nq * nq;
  const int M = deg_bound + 1;
  out.nodes = M;

  const double r = eliminate_node_radius(sys);
  out.node_radius = r;

  const int n = np + nq;
  std::vector<cplx> dets(M);
  double dmax = 0.0;
  std::vector<cplx> mat(n * n);
  for (int jn = 0; jn < M; ++jn) {
    const cplx z = r * std::polar(1.0, 2.0 * M_PI * jn / M);
    const cplx a0 = sys.qbar.coeff(0) + sys.p.eval(z) - sys.w;
    const cplx b0 = sys.pbar.coeff(0) + sys.q.eval(z) - std::conj(sys.w);
    std::fill(mat.begin(), mat.end(), cplx{});
    for (int row = 0; row < np; ++row)
      for (int k = 0; k <= nq; ++k)
        mat[row * n + row + k] = (nq - k == 0) ? a0 : sys.qbar.coeff(nq - k);
    for (int row = 0; row < nq; ++row)
      for (int k = 0; k <= np; ++k)
        mat[(np + row) * n + row + k] = (np - k == 0) ? b0 : sys.pbar.coeff(np - k);
    double had = 1.0;
    dets[jn] = lu_det(mat, n, &had);
    dmax = std::max(dmax, std::abs(dets[jn]));
  }
  // a genuinely nonzero eliminant of degree <= max(np,nq)^2 with these leading
  // coefficients must reach this scale somewhere on the node circle
  const double lead_scale = std::pow(std::abs(sys.pbar.coeff(np)), double(nq)) *
                            std::pow(std::abs(sys.qbar.coeff(nq)), double(np));
  const double zero_scale =
      std::max(lead_scale, 1e-12) * std::pow(r, double(std::max(np, nq) * std::max(np, nq)));
  out.zero_ratio = dmax / zero_scale;
  if (out.zero_ratio < 1e-9) {
    out.identically_zero = true;
    return out;
  }

  // inverse DFT on the scaled circle; the determinant expansion caps the
  // z-degree at max(np,nq)^2, so higher coefficients are interpolation noise
  const int nmax = std::max(np, nq);
  std::vector<cplx> coeffs(std::min(M, nmax * nmax + 1));
  for (int k = 0; k < int(coeffs.size()); ++k) {
    cplx acc = 0.0;
    for (int jn = 0; jn < M; ++jn)
      acc += dets[jn] * std::polar(1.0, -2.0 * M_PI * jn * k / M);
    coeffs[k] = acc / (double(M) * std::pow(r, k));
  }
  CPoly R(std::move(coeffs));
  R.normalize(1e-9);
  out.resultant = R;
  return out;
}

bool Region::contains(cplx z) const {
  switch (kind) {
    case Kind::all: return true;
    case Kind::disc: return std::abs(z - center) <= radius;
    case Kind::box: return box.contains(z);
  }
  return true;
}

double residual_metric(const PlaneMap& f, cplx z, cplx w) {
  cplx v = f(z);
  return std::abs(v.real() - w.real()) + std::abs(v.imag() - w.imag());
}

cplx newton_polish(const PlaneMap& f, cplx w, cplx z0, const PreimageOptions& opt) {
  cplx z = z0;
  for (int it = 0; it < opt.newton_cap; ++it) {
    cplx fv = f(z) - w;
    Jacobian2x2 m = f.jacobian_matrix(z);
    double det = m.det();
    if (!std::isfinite(det) || std::abs(det) < 1e-300) break;
    double rx = fv.real(), ry = fv.imag();
    double dx = (rx * m.vy - ry * m.uy) / det;
    double dy = (ry * m.ux - rx * m.vx) / det;
    cplx step(dx, dy);
    if (!std::isfinite(dx) || !std::isfinite(dy)) break;
    z -= step;
    if (std::abs(step) < opt.step_tol_rel * std::max(1.0, std::abs(z))) break;
  }
  return z;
}

namespace {

// Bezout-alternative probe: under an identically-zero resultant the solution
// set is empty or infinite, so two confirmed distinct solutions settle it.
PreimageSet infinite_probe(const PlaneMap& map, cplx w, const PreimageOptions& opt) {
  const int n = 64;
  std::vector<cplx> found(n * n, cplx(NAN, NAN));
  parallel_for(n * n, [&](std::int64_t idx) {
    int i = int(idx % n), j = int(idx / n);
    cplx seed(-2.0 + 4.0 * (i + 0.5) / n, -2.0 + 4.0 * (j + 0.5) / n);
    if (std::abs(seed) > 2.0) return;
    cplx z = newton_polish(map, w, seed, opt);
    if (residual_metric(map, z, w) < opt.residual_tol) found[idx] = z;
  });
  std::vector<cplx> sols;
  for (const auto& z : found)
    if (std::isfinite(z.real())) sols.push_back(z);
  dedup_sorted(sols, opt.dedup_rel);

  PreimageSet out;
  if (sols.size() >= 2) {
    out.verdict = PreimageSet::Verdict::infinite;
    out.certified = true;
    if (sols.size() > 16) sols.resize(16);
    out.solutions = std::move(sols);
    for (const auto& z : out.solutions) out.residuals.push_back(residual_metric(map, z, w));
  } else {
    out.verdict = PreimageSet::Verdict::unknown;
    out.certified = false;
    out.solutions = std::move(sols);
    for (const auto& z : out.solutions) out.residuals.push_back(residual_metric(map, z, w));
  }
  return out;
}

}  // namespace

PreimageSet preimages(const HarmonicPolynomial& f, cplx w, const Region& region,
                      const PreimageOptions& opt) {
  PlaneMap map = make_plane_map(f);
  DegeneracyReport deg = detect_degeneracy(f);
  if (deg.kind == DegeneracyReport::Kind::constant_range) {
    PreimageSet out;
    bool hit = std::abs(w - deg.alpha) <= 1e-9 * std::max(1.0, std::abs(deg.alpha));
    out.verdict = hit ? PreimageSet::Verdict::infinite : PreimageSet::Verdict::finite;
    out.certified = true;
    return out;
  }
  if (deg.kind == DegeneracyReport::Kind::line_range) {
    PreimageSet out;
    double d = std::abs(std::imag((w - deg.alpha) * std::conj(deg.beta))) / std::abs(deg.beta);
    bool hit = d <= 1e-9 * std::max(1.0, std::abs(w) + std::abs(deg.alpha));
    out.verdict = hit ? PreimageSet::Verdict::infinite : PreimageSet::Verdict::finite;
    out.certified = true;
    return out;
  }

  const int np = std::max(f.p.degree(), 0);
  const int nq = std::max(f.q.degree(), 0);
  if (nq < 1 || np < 1) {
    // analytic (or anti-analytic) plus a constant: direct root call
    CPoly target = (nq < 1) ? f.p - CPoly::constant(w - std::conj(f.q.eval(0.0)))
                            : f.q - CPoly::constant(std::conj(w - f.p.eval(0.0)));
    RootResult rr = poly_roots(target);
    std::vector<cplx> cand;
    for (const auto& z : rr.roots) cand.push_back(newton_polish(map, w, z, opt));
    return finish(map, w, std::move(cand), region, opt, true);
  }

  Elimination elim = eliminate(build_conjugate_system(f, w));
  if (elim.identically_zero) return infinite_probe(map, w, opt);

  RootResult rr = poly_roots(elim.resultant);
  std::vector<cplx> cand;
  cand.reserve(rr.roots.size() * 2);
  for (const auto& z : rr.roots) {
    cand.push_back(z);  // keep the raw algebraic root: Newton stalls on folds
    cand.push_back(newton_polish(map, w, z, opt));
  }
  return finish(map, w, std::move(cand), region, opt, true);
}

PreimageSet preimages_numeric(const PlaneMap& f, cplx w, const Viewport& box, int grid_n,
                              const PreimageOptions& opt) {
  if (grid_n < 2) throw std::invalid_argument("grid_n must be >= 2");
  const std::int64_t total = std::int64_t(grid_n) * grid_n;
  std::vector<cplx> slot(total, cplx(NAN, NAN));
  std::vector<unsigned char> failed(total, 0);
  parallel_for(total, [&](std::int64_t idx) {
    int i = int(idx % grid_n), j = int(idx / grid_n);
    cplx seed(box.x0 + box.width() * (i + 0.5) / grid_n,
              box.y0 + box.height() * (j + 0.5) / grid_n);
    cplx z = newton_polish(f, w, seed, opt);
    if (residual_metric(f, z, w) < opt.residual_tol)
      slot[idx] = z;
    else
      failed[idx] = 1;
  });
  std::vector<cplx> cand;
  int failures = 0;
  for (std::int64_t k = 0; k < total; ++k) {
    if (failed[k]) ++failures;
    if (std::isfinite(slot[k].real())) cand.push_back(slot[k]);
  }
  PreimageSet out = finish(f, w, std::move(cand), Region::in_box(box), opt, false);
  out.seed_failures = failures;
  return out;
}

ValenceResult valence(const PlaneMap& f, cplx w, const Viewport& numeric_box, int numeric_grid,
                      const PreimageOptions& opt) {
  ValenceResult out;
  if (f.poly) {
    out.set = preimages(*f.poly, w, Region::whole_plane(), opt);
  } else {
    out.set = preimages_numeric(f, w, numeric_box, numeric_grid, opt);
  }
  out.verdict = out.set.verdict;
  out.count = out.set.count();
  out.certified = out.set.certified;
  return out;
}

}  // namespace harmval

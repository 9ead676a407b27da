#include "harmval/critical.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "harmval/parallel.hpp"

namespace harmval {

double BiPoly::eval(double x, double y) const {
  double acc = 0.0;
  for (int j = ny - 1; j >= 0; --j) {
    double row = 0.0;
    for (int i = nx - 1; i >= 0; --i) row = row * x + c[i + j * nx];
    acc = acc * y + row;
  }
  return acc;
}

namespace {

// small complex bivariate helper for expanding |p'|^2 - |q'|^2
struct CBi {
  int nx = 1, ny = 1;
  std::vector<cplx> c{cplx{}};
  cplx& at(int i, int j) { return c[i + j * nx]; }
  cplx get(int i, int j) const { return c[i + j * nx]; }
};

CBi cbi_mul(const CBi& a, const CBi& b) {
  CBi r;
  r.nx = a.nx + b.nx - 1;
  r.ny = a.ny + b.ny - 1;
  r.c.assign(size_t(r.nx) * r.ny, cplx{});
  for (int j1 = 0; j1 < a.ny; ++j1)
    for (int i1 = 0; i1 < a.nx; ++i1) {
      cplx v = a.get(i1, j1);
      if (v == cplx{}) continue;
      for (int j2 = 0; j2 < b.ny; ++j2)
        for (int i2 = 0; i2 < b.nx; ++i2)
          r.c[(i1 + i2) + (j1 + j2) * r.nx] += v * b.get(i2, j2);
    }
  return r;
}

void cbi_add_scaled(CBi& acc, const CBi& a, cplx s) {
  if (a.nx > acc.nx || a.ny > acc.ny) {
    CBi grown;
    grown.nx = std::max(acc.nx, a.nx);
    grown.ny = std::max(acc.ny, a.ny);
    grown.c.assign(size_t(grown.nx) * grown.ny, cplx{});
    for (int j = 0; j < acc.ny; ++j)
      for (int i = 0; i < acc.nx; ++i) grown.c[i + j * grown.nx] = acc.get(i, j);
    acc = std::move(grown);
  }
  for (int j = 0; j < a.ny; ++j)
    for (int i = 0; i < a.nx; ++i) acc.c[i + j * acc.nx] += s * a.get(i, j);
}

// sum_k a_k * Z^k with Z = x + sigma*iy
CBi cbi_from_poly(const CPoly& p, double sigma) {
  CBi z;
  z.nx = 2;
  z.ny = 2;
  z.c = {cplx{}, cplx(1, 0), cplx(0, sigma), cplx{}};
  CBi acc;
  CBi pw;  // Z^0
  pw.c = {cplx(1, 0)};
  for (int k = 0; k <= p.degree(); ++k) {
    cbi_add_scaled(acc, pw, p.coeff(k));
    if (k < p.degree()) pw = cbi_mul(pw, z);
  }
  return acc;
}

CBi cbi_abs2(const CPoly& dp) {
  CBi a = cbi_from_poly(dp, +1.0);
  CBi b = cbi_from_poly(dp.conjugate_coeffs(), -1.0);
  return cbi_mul(a, b);
}

}  // namespace

BiPoly jacobian_field(const HarmonicPolynomial& f) {
  CBi jp = cbi_abs2(f.p.derivative());
  CBi jq = cbi_abs2(f.q.derivative());
  cbi_add_scaled(jp, jq, cplx(-1, 0));
  BiPoly out;
  out.nx = jp.nx;
  out.ny = jp.ny;
  out.c.resize(jp.c.size());
  for (size_t k = 0; k < jp.c.size(); ++k) out.c[k] = jp.c[k].real();
  return out;
}

double CriticalSet::distance_to_curves(cplx z) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& curve : curves) {
    const auto& v = curve.pts;
    for (size_t k = 0; k + 1 < v.size(); ++k) {
      cplx a = v[k], b = v[k + 1];
      cplx ab = b - a;
      double len2 = std::norm(ab);
      double t = len2 > 0 ? std::clamp((std::conj(ab) * (z - a)).real() / len2, 0.0, 1.0) : 0.0;
      best = std::min(best, std::abs(z - (a + t * ab)));
    }
    if (curve.closed && v.size() > 1) {
      cplx a = v.back(), b = v.front();
      cplx ab = b - a;
      double len2 = std::norm(ab);
      double t = len2 > 0 ? std::clamp((std::conj(ab) * (z - a)).real() / len2, 0.0, 1.0) : 0.0;
      best = std::min(best, std::abs(z - (a + t * ab)));
    }
  }
  return best;
}

double CriticalSet::distance_to_set(cplx z) const {
  double best = distance_to_curves(z);
  for (const auto& ip : isolated) best = std::min(best, std::abs(z - ip.z));
  return best;
}

namespace {

struct EdgeKey {
  std::int64_t id;
  bool operator<(const EdgeKey& o) const { return id < o.id; }
  bool operator==(const EdgeKey& o) const { return id == o.id; }
};

EdgeKey hedge(int i, int j, int nx1) { return {(std::int64_t(j) * nx1 + i) * 2}; }
EdgeKey vedge(int i, int j, int nx1) { return {(std::int64_t(j) * nx1 + i) * 2 + 1}; }

int zero_order(const CPoly& p, cplx z0, int cap = 16) {
  CPoly d = p;
  double scale = std::max(p.coeff_scale(), 1e-300);
  int order = 0;
  while (order < cap && !d.is_zero() &&
         std::abs(d.eval(z0)) < 1e-7 * scale * std::max(1.0, std::abs(z0))) {
    ++order;
    d = d.derivative();
  }
  return order;
}

}  // namespace

CriticalSet trace(const PlaneMap& f, const Viewport& vp, double resolution) {
  if (resolution <= 0) throw std::invalid_argument("resolution must be positive");
  const int nx = std::max(1, (int)std::lround(vp.width() / resolution));
  const int ny = std::max(1, (int)std::lround(vp.height() / resolution));
  if (nx < 8 || ny < 8)
    throw std::invalid_argument("resolution too coarse: need at least 8 cells per side");

  CriticalSet out;
  out.viewport = vp;
  out.resolution = resolution;

  const int nx1 = nx + 1, ny1 = ny + 1;
  const double hx = vp.width() / nx, hy = vp.height() / ny;
  auto node = [&](int i, int j) { return cplx(vp.x0 + i * hx, vp.y0 + j * hy); };

  std::vector<double> jval(size_t(nx1) * ny1);
  parallel_for(std::int64_t(nx1) * ny1, [&](std::int64_t idx) {
    int i = int(idx % nx1), j = int(idx / nx1);
    jval[idx] = f.jacobian(node(i, j));
  });
  auto J = [&](int i, int j) { return jval[size_t(j) * nx1 + i]; };

  // refined crossing on the edge between nodes a and b (signs differ)
  auto refine = [&](cplx a, cplx b, double ja, double jb) {
    double scale = std::max({std::abs(ja), std::abs(jb), 1e-300});
    cplx lo = a, hi = b;
    double jlo = ja;
    cplx mid = 0.5 * (lo + hi);
    for (int it = 0; it < 60; ++it) {
      mid = 0.5 * (lo + hi);
      double jm = f.jacobian(mid);
      if (std::abs(jm) < 1e-10 * scale) return mid;
      if ((jm > 0) == (jlo > 0)) {
        lo = mid;
        jlo = jm;
      } else {
        hi = mid;
      }
    }
    return mid;
  };

  std::map<EdgeKey, cplx> crossing;
  std::map<EdgeKey, std::vector<EdgeKey>> links;
  auto get_crossing = [&](EdgeKey key, cplx a, cplx b, double ja, double jb) {
    auto it = crossing.find(key);
    if (it == crossing.end()) it = crossing.emplace(key, refine(a, b, ja, jb)).first;
    return it->first;
  };
  auto add_segment = [&](EdgeKey a, EdgeKey b) {
    links[a].push_back(b);
    links[b].push_back(a);
  };

  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      double j00 = J(i, j), j10 = J(i + 1, j), j11 = J(i + 1, j + 1), j01 = J(i, j + 1);
      bool b00 = j00 > 0, b10 = j10 > 0, b11 = j11 > 0, b01 = j01 > 0;
      int pos = int(b00) + int(b10) + int(b11) + int(b01);
      if (pos == 0 || pos == 4) continue;

      EdgeKey bot = hedge(i, j, nx1), top = hedge(i, j + 1, nx1);
      EdgeKey lef = vedge(i, j, nx1), rig = vedge(i + 1, j, nx1);
      bool xbot = b00 != b10, xrig = b10 != b11, xtop = b11 != b01, xlef = b01 != b00;
      if (xbot) get_crossing(bot, node(i, j), node(i + 1, j), j00, j10);
      if (xrig) get_crossing(rig, node(i + 1, j), node(i + 1, j + 1), j10, j11);
      if (xtop) get_crossing(top, node(i + 1, j + 1), node(i, j + 1), j11, j01);
      if (xlef) get_crossing(lef, node(i, j), node(i, j + 1), j00, j01);

      int ncross = int(xbot) + int(xrig) + int(xtop) + int(xlef);
      if (ncross == 2) {
        EdgeKey e[2];
        int k = 0;
        if (xbot) e[k++] = bot;
        if (xrig) e[k++] = rig;
        if (xtop) e[k++] = top;
        if (xlef) e[k++] = lef;
        add_segment(e[0], e[1]);
      } else if (ncross == 4) {
        double jc = f.jacobian(node(i, j) + cplx(0.5 * hx, 0.5 * hy));
        if ((jc > 0) == b00) {
          add_segment(bot, rig);
          add_segment(top, lef);
        } else {
          add_segment(bot, lef);
          add_segment(top, rig);
        }
      }
    }
  }

  // chain segments into polylines: open chains first, then cycles
  std::map<EdgeKey, bool> used;
  auto walk = [&](EdgeKey start) {
    CriticalPolyline line;
    EdgeKey cur = start;
    EdgeKey prev{-1};
    used[cur] = true;
    line.pts.push_back(crossing[cur]);
    while (true) {
      EdgeKey next{-1};
      for (const auto& cand : links[cur]) {
        if (cand == prev) continue;
        if (used.count(cand) && !(cand == start)) continue;
        next = cand;
        break;
      }
      if (next.id < 0) break;
      if (next == start) {
        line.closed = true;
        break;
      }
      used[next] = true;
      line.pts.push_back(crossing[next]);
      prev = cur;
      cur = next;
    }
    return line;
  };

  for (const auto& [key, nbrs] : links)
    if (nbrs.size() == 1 && !used[key]) {
      auto line = walk(key);
      if (line.pts.size() >= 2) out.curves.push_back(std::move(line));
    }
  for (const auto& [key, nbrs] : links)
    if (!used[key]) {
      auto line = walk(key);
      if (line.pts.size() >= 3) out.curves.push_back(std::move(line));
    }

  if (f.poly) {
    for (const auto& ip : isolated_points(*f.poly))
      if (vp.contains(ip.z)) out.isolated.push_back(ip);
  }

  // sign-definite cells with a deep |J| dip, away from anything traced:
  // possible tangential zero curves, reported for manual resolution
  double jtypical = 0.0;
  for (double v : jval) jtypical = std::max(jtypical, std::abs(v));
  if (jtypical > 0) {
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        double m = std::min({std::abs(J(i, j)), std::abs(J(i + 1, j)), std::abs(J(i + 1, j + 1)),
                             std::abs(J(i, j + 1))});
        bool same = (J(i, j) > 0) == (J(i + 1, j) > 0) &&
                    (J(i + 1, j) > 0) == (J(i + 1, j + 1) > 0) &&
                    (J(i + 1, j + 1) > 0) == (J(i, j + 1) > 0);
        if (!same || m > 1e-7 * jtypical) continue;
        cplx center = node(i, j) + cplx(0.5 * hx, 0.5 * hy);
        if (out.distance_to_set(center) < 2.5 * resolution) continue;
        out.suspects.push_back({center, m});
      }
  }
  return out;
}

std::vector<IsolatedCritPoint> isolated_points(const HarmonicPolynomial& f) {
  std::vector<IsolatedCritPoint> out;
  CPoly dp = f.p.derivative(), dq = f.q.derivative();
  if (dp.is_zero() && dq.is_zero()) return out;
  if (dp.is_zero() || dq.is_zero()) {
    // analytic or anti-analytic member: psi is identically zero (or infinite),
    // so the critical set is the zero set of the surviving derivative and
    // every point counts as a zero/pole of psi
    const CPoly& d = dp.is_zero() ? dq : dp;
    if (d.degree() < 1) return out;
    std::vector<cplx> roots = poly_roots(d).roots;
    std::sort(roots.begin(), roots.end(), [](cplx a, cplx b) {
      return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    for (const auto& r : roots) {
      if (!out.empty() && std::abs(r - out.back().z) <= 1e-8 * std::max(1.0, std::abs(r)))
        continue;
      IsolatedCritPoint ip;
      ip.z = r;
      ip.in_N = true;
      ip.order = std::max(zero_order(d, r), 1);
      out.push_back(ip);
    }
    return out;
  }
  CPoly g = poly_gcd(dp, dq);
  if (g.degree() < 1) return out;
  SecondDilatation sd = second_dilatation(f);
  for (const auto& r : poly_roots(g).roots) {
    IsolatedCritPoint ip;
    ip.z = r;
    PsiValue pv = sd.at(r);
    ip.in_N = pv.kind != PsiValue::Kind::value || std::abs(std::abs(pv.v) - 1.0) > 1e-8;
    // multiplicity of the common root
    CPoly d = g;
    int order = 0;
    double scale = std::max(g.coeff_scale(), 1e-300);
    while (!d.is_zero() && std::abs(d.eval(r)) < 1e-7 * scale * std::max(1.0, std::abs(r))) {
      ++order;
      d = d.derivative();
    }
    ip.order = std::max(order, 1);
    out.push_back(ip);
  }
  return out;
}

std::vector<ClassifiedCriticalPoint> classify(const HarmonicPolynomial& f, const CriticalSet& cs,
                                              std::vector<std::string>* warnings) {
  std::vector<ClassifiedCriticalPoint> out;
  SecondDilatation sd = second_dilatation(f);
  CPoly dp = f.p.derivative();
  CPoly psi_deriv_num = sd.num.derivative() * sd.den - sd.num * sd.den.derivative();

  auto note = [&](const std::string& s) {
    if (warnings) warnings->push_back(s);
  };

  // phase increment of psi from za to zb, subdividing the segment until each
  // sub-step turns by at most pi/2; persistent failure reports a diagnostic
  auto phase_step = [&](cplx za, cplx zb, bool* fail) -> double {
    for (int pieces = 1; pieces <= 64; pieces *= 2) {
      PsiValue pv = sd.at(za);
      if (pv.kind != PsiValue::Kind::value) break;
      cplx prev = pv.v;
      double acc = 0.0;
      bool ok = true;
      for (int s = 1; s <= pieces; ++s) {
        cplx z = za + (double(s) / pieces) * (zb - za);
        PsiValue cur = sd.at(z);
        if (cur.kind != PsiValue::Kind::value) {
          ok = false;
          break;
        }
        double d = std::arg(cur.v / prev);
        if (std::abs(d) > M_PI / 2) {
          ok = false;
          break;
        }
        acc += d;
        prev = cur.v;
      }
      if (ok) return acc;
    }
    *fail = true;
    PsiValue a = sd.at(za), b = sd.at(zb);
    if (a.kind == PsiValue::Kind::value && b.kind == PsiValue::Kind::value)
      return std::arg(b.v / a.v);
    return 0.0;
  };

  for (int ci = 0; ci < (int)cs.curves.size(); ++ci) {
    const auto& v = cs.curves[ci].pts;
    const bool closed = cs.curves[ci].closed;
    const int n = (int)v.size();
    if (n < 3) continue;

    std::vector<double> phi(n);
    std::vector<cplx> omega(n);
    bool ok = true;
    bool branch_fail = false;
    for (int k = 0; k < n; ++k) {
      PsiValue pv = sd.at(v[k]);
      if (pv.kind != PsiValue::Kind::value) {
        note("psi not evaluable on a traced arc; arc skipped");
        ok = false;
        break;
      }
      if (std::abs(std::abs(pv.v) - 1.0) > 1e-4)
        note("psi drifts off the unit circle along a traced arc");
      phi[k] = k == 0 ? std::arg(pv.v) : phi[k - 1] + phase_step(v[k - 1], v[k], &branch_fail);
      cplx tangent;
      if (closed) {
        tangent = v[(k + 1) % n] - v[(k + n - 1) % n];
      } else if (k == 0) {
        tangent = v[1] - v[0];
      } else if (k == n - 1) {
        tangent = v[n - 1] - v[n - 2];
      } else {
        tangent = v[k + 1] - v[k - 1];
      }
      double tl = std::abs(tangent);
      if (tl > 0) tangent /= tl;
      omega[k] = dp.eval(v[k]) * tangent * std::exp(cplx(0, -phi[k] / 2.0));
    }
    if (!ok) continue;
    if (branch_fail) note("phi branch step exceeded pi/2 after subdivision; refine the trace");

    // A vertex whose |Re omega| collapses relative to both neighbors sits at
    // a zero of p' (or a trace hiccup) and carries no usable sign; read sign
    // changes across such dips instead of through them.
    std::vector<int> kept;
    for (int k = 0; k < n; ++k) {
      double cur = std::abs(omega[k].real());
      double nb = 0.0;
      if (closed || k + 1 < n) nb = std::max(nb, std::abs(omega[(k + 1) % n].real()));
      if (closed || k > 0) nb = std::max(nb, std::abs(omega[(k + n - 1) % n].real()));
      if (cur >= 1e-3 * nb) kept.push_back(k);
    }

    // Closing the loop continues phi past 2*pi*m (m = winding of psi), so the
    // wrap-around omega flips sign for odd m; compare against that value, not
    // against the level-zero branch at vertex 0.
    cplx wrap_factor(1, 0);
    if (closed) {
      double phi_wrap = phi[n - 1] + phase_step(v[n - 1], v[0], &branch_fail);
      wrap_factor = std::exp(cplx(0, (phi[0] - phi_wrap) / 2.0));
    }
    const int npairs = closed ? (int)kept.size() : (int)kept.size() - 1;
    for (int i = 0; i < npairs; ++i) {
      int ka = kept[i];
      int kb = kept[(i + 1) % kept.size()];
      double a = omega[ka].real();
      double b = kb > ka ? omega[kb].real() : (omega[kb] * wrap_factor).real();
      if (!(a * b < 0)) continue;
      int kb_lin = kb > ka ? kb : kb + n;
      int at = ((ka + kb_lin + 1) / 2) % n;
      ClassifiedCriticalPoint pt;
      pt.z = v[at];
      pt.kind = CritKind::F1;
      pt.ell = zero_order(dp, pt.z);
      pt.curve = ci;
      pt.t = double(at);
      out.push_back(pt);
    }

    auto mark_roots_on_arc = [&](const CPoly& poly, CritKind kind) {
      if (poly.is_zero() || poly.degree() < 1) return;
      for (const auto& r : poly_roots(poly).roots) {
        double best = std::numeric_limits<double>::infinity();
        int at = -1;
        for (int k = 0; k < n; ++k) {
          double d = std::abs(v[k] - r);
          if (d < best) {
            best = d;
            at = k;
          }
        }
        if (best > 1.5 * cs.resolution) continue;
        bool taken = false;
        for (const auto& p : out)
          if (p.curve == ci && std::abs(p.z - r) < 3 * cs.resolution) taken = true;
        if (taken) continue;
        ClassifiedCriticalPoint pt;
        pt.z = r;
        pt.kind = kind;
        pt.ell = zero_order(dp, r);
        pt.curve = ci;
        pt.t = double(at);
        out.push_back(pt);
      }
    };
    mark_roots_on_arc(dp, CritKind::F2);
    mark_roots_on_arc(psi_deriv_num, CritKind::F3);
  }

  for (const auto& ip : cs.isolated) {
    if (!ip.in_N) continue;  // |psi| = 1 there: the point sits on a fold arc
    ClassifiedCriticalPoint pt;
    pt.z = ip.z;
    pt.kind = CritKind::N;
    pt.ell = zero_order(dp.is_zero() ? f.q.derivative() : dp, ip.z);
    out.push_back(pt);
  }

  for (size_t a = 0; a < out.size(); ++a)
    for (size_t b = a + 1; b < out.size(); ++b)
      if (std::abs(out[a].z - out[b].z) <= 2 * cs.resolution) {
        note("classified special points closer than 2*resolution; refine the trace");
        a = out.size();
        break;
      }

  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.curve != b.curve) return a.curve < b.curve;
    if (a.t != b.t) return a.t < b.t;
    if (a.z.real() != b.z.real()) return a.z.real() < b.z.real();
    return a.z.imag() < b.z.imag();
  });
  return out;
}

LocalModel local_model(const ClassifiedCriticalPoint& pt) {
  if (pt.kind == CritKind::N || pt.kind == CritKind::F3)
    throw std::invalid_argument("no single-arc local model for N or F3 points");
  LocalModel m;
  const int l = pt.ell;
  if (pt.kind == CritKind::F1) {
    if (l % 2 == 0) {
      m.j = l + 1;
      m.k = l + 3;
      m.ambiguous = true;  // (l+3, l+1) equally consistent with local data
    } else {
      m.j = l + 2;
      m.k = l + 2;
      m.ambiguous = false;
    }
  } else {  // regular fold or F2
    if (l % 2 == 0) {
      m.j = l + 1;
      m.k = l + 1;
      m.ambiguous = false;
    } else {
      m.j = l + 2;
      m.k = l;
      m.ambiguous = true;
    }
  }
  return m;
}

namespace {

// project a point near the fold onto J = 0 along the given normal direction
cplx project_to_fold(const PlaneMap& f, cplx z, cplx normal, double reach) {
  double ja = f.jacobian(z - reach * normal);
  double jb = f.jacobian(z + reach * normal);
  if ((ja > 0) == (jb > 0)) return z;
  cplx lo = z - reach * normal, hi = z + reach * normal;
  for (int it = 0; it < 50; ++it) {
    cplx mid = 0.5 * (lo + hi);
    double jm = f.jacobian(mid);
    if ((jm > 0) == (ja > 0)) {
      lo = mid;
      ja = jm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

struct DipResult {
  bool confirmed = false;
  double ratio = 1e30;
  cplx z, w;
};

// zoom on the bracket [za, zb] along the fold until the discrete speed dip
// is decisive at the requested threshold
DipResult refine_dip(const PlaneMap& f, cplx za, cplx zb, double median_speed,
                     const ImageCurveOptions& opt, double resolution) {
  DipResult res;
  double prev_ratio = 1e30;
  for (int level = 0; level < 9; ++level) {
    const int m = 16;
    std::vector<cplx> zs(m + 1), ws(m + 1);
    cplx dir = (zb - za);
    cplx normal = cplx(0, 1) * dir / std::max(std::abs(dir), 1e-300);
    double reach = std::max(std::abs(dir), 1e-14);
    for (int k = 0; k <= m; ++k) {
      cplx z = za + (double(k) / m) * dir;
      if (k != 0 && k != m) z = project_to_fold(f, z, normal, reach);
      zs[k] = z;
      ws[k] = f(z);
    }
    int best = -1;
    double best_speed = 1e300;
    for (int k = 0; k < m; ++k) {
      double dz = std::abs(zs[k + 1] - zs[k]);
      if (dz < 1e-300) continue;
      double sp = std::abs(ws[k + 1] - ws[k]) / dz;
      if (sp < best_speed) {
        best_speed = sp;
        best = k;
      }
    }
    if (best < 0) break;
    bool reversal = false;
    for (int k = 0; k + 1 < m; ++k) {
      cplx t1 = ws[k + 1] - ws[k], t2 = ws[k + 2] - ws[k + 1];
      double l1 = std::abs(t1), l2 = std::abs(t2);
      if (l1 < 1e-300 || l2 < 1e-300) continue;
      if ((std::conj(t1) * t2).real() / (l1 * l2) < opt.tangent_dot) reversal = true;
    }
    res.ratio = best_speed / std::max(median_speed, 1e-300);
    int lo = std::max(best - 1, 0), hi = std::min(best + 2, m);
    res.z = zs[(lo + hi) / 2];
    res.w = f(res.z);
    if (res.ratio < opt.speed_dip && reversal) {
      res.confirmed = true;
      return res;
    }
    if (level > 2 && res.ratio > 0.6 * prev_ratio) return res;  // stagnating: no true dip
    prev_ratio = res.ratio;
    za = zs[lo];
    zb = zs[hi];
    if (std::abs(zb - za) < 1e-13 * std::max(1.0, std::abs(za))) return res;
  }
  (void)resolution;
  return res;
}

}  // namespace

ImageCurve image_curve(const PlaneMap& f, const CriticalSet& cs, const ImageCurveOptions& opt) {
  ImageCurve out;
  out.options = opt;
  for (const auto& ip : cs.isolated) out.isolated_images.push_back(f(ip.z));

  for (int ci = 0; ci < (int)cs.curves.size(); ++ci) {
    const auto& v = cs.curves[ci].pts;
    const int n = (int)v.size();
    CriticalPolyline img;
    img.closed = cs.curves[ci].closed;
    img.pts.resize(n);
    for (int k = 0; k < n; ++k) img.pts[k] = f(v[k]);

    if (n >= 3) {
      std::vector<double> speeds;
      speeds.reserve(n);
      const int pairs = img.closed ? n : n - 1;
      for (int k = 0; k < pairs; ++k) {
        double dz = std::abs(v[(k + 1) % n] - v[k]);
        if (dz > 1e-300) speeds.push_back(std::abs(img.pts[(k + 1) % n] - img.pts[k]) / dz);
      }
      if (!speeds.empty()) {
        std::vector<double> sorted = speeds;
        std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
        double median = sorted[sorted.size() / 2];

        const int tpairs = img.closed ? n : n - 1;
        for (int k = 0; k < tpairs; ++k) {
          int k2 = (k + 1) % n;
          int k3 = (k + 2) % n;
          if (!img.closed && k + 2 >= n) break;
          cplx t1 = img.pts[k2] - img.pts[k];
          cplx t2 = img.pts[k3] - img.pts[k2];
          double l1 = std::abs(t1), l2 = std::abs(t2);
          if (l1 < 1e-300 || l2 < 1e-300) continue;
          if ((std::conj(t1) * t2).real() / (l1 * l2) >= opt.tangent_dot) continue;
          bool near_existing = false;
          for (const auto& c : out.cusps)
            if (c.curve == ci && std::abs(c.z - v[k2]) < 3 * cs.resolution) near_existing = true;
          if (near_existing) continue;
          DipResult dip = refine_dip(f, v[k], v[k3], median, opt, cs.resolution);
          if (dip.confirmed) out.cusps.push_back({dip.w, dip.z, ci, dip.ratio});
        }
      }
    }
    out.polylines.push_back(std::move(img));
  }
  return out;
}

}  // namespace harmval

#include "harmval/partition.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "harmval/cluster.hpp"
#include "harmval/parallel.hpp"

namespace harmval {

int PartitionGrid::cell_index(cplx w) const {
  const int i = (int)std::floor((w.real() - viewport.x0) / cell_dx());
  const int j = (int)std::floor((w.imag() - viewport.y0) / cell_dy());
  if (i < 0 || i >= nx || j < 0 || j >= ny) return -1;
  return i + j * nx;
}

int PartitionGrid::label_at(cplx w) const {
  const int c = cell_index(w);
  return c < 0 ? -1 : label[c];
}

namespace {

bool finite(cplx w) { return std::isfinite(w.real()) && std::isfinite(w.imag()); }

// Liang-Barsky; false when the segment misses the box entirely.
bool clip_to_box(const Viewport& vp, cplx& a, cplx& b) {
  double t0 = 0.0, t1 = 1.0;
  const double dx = (b - a).real(), dy = (b - a).imag();
  const auto clip1 = [&](double p, double q) {
    if (std::abs(p) < 1e-300) return q >= 0.0;
    const double r = q / p;
    if (p < 0.0) {
      if (r > t1) return false;
      if (r > t0) t0 = r;
    } else {
      if (r < t0) return false;
      if (r < t1) t1 = r;
    }
    return true;
  };
  if (!clip1(-dx, a.real() - vp.x0) || !clip1(dx, vp.x1 - a.real()) ||
      !clip1(-dy, a.imag() - vp.y0) || !clip1(dy, vp.y1 - a.imag()))
    return false;
  const cplx d(dx, dy);
  const cplx na = a + d * t0, nb = a + d * t1;
  a = na;
  b = nb;
  return true;
}

void mark_cell(PartitionGrid& g, cplx w) {
  const int c = g.cell_index(w);
  if (c >= 0) g.barrier[c] = 1;
}

void mark_segment(PartitionGrid& g, cplx a, cplx b) {
  if (!finite(a) || !finite(b)) return;
  if (!clip_to_box(g.viewport, a, b)) return;
  const double step = 0.5 * std::min(g.cell_dx(), g.cell_dy());
  const int n = std::max(1, (int)std::ceil(std::abs(b - a) / step));
  for (int i = 0; i <= n; ++i) mark_cell(g, a + (b - a) * (double(i) / n));
}

void dilate(PartitionGrid& g, int d) {
  for (int it = 0; it < d; ++it) {
    std::vector<std::uint8_t> grown = g.barrier;
    parallel_for(g.ny, [&](std::int64_t j) {
      for (int i = 0; i < g.nx; ++i) {
        if (g.barrier[i + j * g.nx]) continue;
        for (int dj = -1; dj <= 1; ++dj)
          for (int di = -1; di <= 1; ++di) {
            const int ii = i + di, jj = (int)j + dj;
            if (ii >= 0 && ii < g.nx && jj >= 0 && jj < g.ny && g.barrier[ii + jj * g.nx]) {
              grown[i + j * g.nx] = 1;
              di = dj = 2;
            }
          }
      }
    });
    g.barrier.swap(grown);
  }
}

// Scan-order seeded 4-neighbor flood; labels are deterministic.
void flood(PartitionGrid& g) {
  const int total = g.nx * g.ny;
  g.label.assign(total, -1);
  g.components = 0;
  g.touches_edge.clear();
  std::vector<int> stack;
  for (int start = 0; start < total; ++start) {
    if (g.barrier[start] || g.label[start] >= 0) continue;
    const int id = g.components++;
    bool edge = false;
    stack.assign(1, start);
    g.label[start] = id;
    while (!stack.empty()) {
      const int c = stack.back();
      stack.pop_back();
      const int i = c % g.nx, j = c / g.nx;
      if (i == 0 || i == g.nx - 1 || j == 0 || j == g.ny - 1) edge = true;
      constexpr int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
      for (int t = 0; t < 4; ++t) {
        const int ii = i + di[t], jj = j + dj[t];
        if (ii < 0 || ii >= g.nx || jj < 0 || jj >= g.ny) continue;
        const int cc = ii + jj * g.nx;
        if (!g.barrier[cc] && g.label[cc] < 0) {
          g.label[cc] = id;
          stack.push_back(cc);
        }
      }
    }
    g.touches_edge.push_back(edge ? 1 : 0);
  }
}

void require_free_cells(const PartitionGrid& g, const char* who) {
  for (std::uint8_t b : g.barrier)
    if (!b) return;
  throw std::invalid_argument(std::string(who) +
                              ": every cell is a barrier; raise cell_n or reduce the thickening");
}

// Chebyshev-ish distance (in cells) to the nearest barrier cell, by
// multi-source 8-neighbor BFS. No barriers at all leaves INT_MAX everywhere.
std::vector<int> barrier_distance(const PartitionGrid& g) {
  const int total = g.nx * g.ny;
  std::vector<int> dist(total, std::numeric_limits<int>::max());
  std::vector<int> frontier;
  for (int c = 0; c < total; ++c)
    if (g.barrier[c]) {
      dist[c] = 0;
      frontier.push_back(c);
    }
  std::vector<int> next;
  int level = 0;
  while (!frontier.empty()) {
    ++level;
    next.clear();
    for (int c : frontier) {
      const int i = c % g.nx, j = c / g.nx;
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          const int ii = i + di, jj = j + dj;
          if (ii < 0 || ii >= g.nx || jj < 0 || jj >= g.ny) continue;
          const int cc = ii + jj * g.nx;
          if (dist[cc] > level) {
            dist[cc] = level;
            next.push_back(cc);
          }
        }
    }
    frontier.swap(next);
  }
  return dist;
}

// k distinct cell centers from one component, preferring cells deeper than
// 2 * dilation from the barriers; deterministic for a fixed seed.
std::vector<cplx> draw_samples(const PartitionGrid& g, const std::vector<int>& dist, int comp,
                               int k, std::uint64_t seed) {
  const int total = g.nx * g.ny;
  const int deep = 2 * std::max(1, g.dilation);
  std::vector<int> pool;
  for (int c = 0; c < total; ++c)
    if (g.label[c] == comp && dist[c] > deep) pool.push_back(c);
  if ((int)pool.size() < k)
    for (int c = 0; c < total; ++c)
      if (g.label[c] == comp && dist[c] <= deep) pool.push_back(c);
  std::vector<cplx> out;
  if (pool.empty()) return out;
  std::mt19937_64 eng(seed ^ (0x9e3779b97f4a7c15ull * std::uint64_t(comp + 1)));
  std::vector<char> used(pool.size(), 0);
  const int m = std::min<int>(k, (int)pool.size());
  for (int guard = 0; (int)out.size() < m && guard < 64 * k; ++guard) {
    const size_t idx = (size_t)(eng() % pool.size());
    if (used[idx]) continue;
    used[idx] = 1;
    out.push_back(g.center(pool[idx] % g.nx, pool[idx] / g.nx));
  }
  for (size_t idx = 0; (int)out.size() < m && idx < pool.size(); ++idx)
    if (!used[idx]) {
      used[idx] = 1;
      out.push_back(g.center(pool[idx] % g.nx, pool[idx] / g.nx));
    }
  return out;
}

// Grid-scale stand-in for simple connectedness: the complement of the
// component (8-connected) is one piece and touches the viewport edge.
bool simply_connected_estimate(const PartitionGrid& g, int comp) {
  const int total = g.nx * g.ny;
  int complement = 0, start = -1;
  for (int c = 0; c < total; ++c)
    if (g.label[c] != comp) {
      ++complement;
      if (start < 0) start = c;
    }
  if (complement == 0) return false;
  std::vector<char> seen(total, 0);
  std::vector<int> stack{start};
  seen[start] = 1;
  int visited = 0;
  bool edge = false;
  while (!stack.empty()) {
    const int c = stack.back();
    stack.pop_back();
    ++visited;
    const int i = c % g.nx, j = c / g.nx;
    if (i == 0 || i == g.nx - 1 || j == 0 || j == g.ny - 1) edge = true;
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        const int ii = i + di, jj = j + dj;
        if (ii < 0 || ii >= g.nx || jj < 0 || jj >= g.ny) continue;
        const int cc = ii + jj * g.nx;
        if (!seen[cc] && g.label[cc] != comp) {
          seen[cc] = 1;
          stack.push_back(cc);
        }
      }
  }
  return visited == complement && edge;
}

// Bucketed distance field over the bounding box of the inserted features.
// lower_bound(w) never exceeds the true euclidean distance from w to the
// feature set, and is tight to within about two buckets, so threshold tests
// against a per-query tolerance only overmark, never leak.
struct FeatureField {
  std::vector<std::pair<cplx, cplx>> segs;
  double bucket = 1.0, x0 = 0.0, y0 = 0.0;
  int nx = 0, ny = 0;
  std::vector<std::int32_t> dist;  // Chebyshev bucket distance to the set

  void add(cplx a, cplx b) {
    if (finite(a) && finite(b)) segs.emplace_back(a, b);
  }

  void build(double tol) {
    if (segs.empty()) return;
    double X0 = 1e300, X1 = -1e300, Y0 = 1e300, Y1 = -1e300;
    for (const auto& [a, b] : segs) {
      X0 = std::min({X0, a.real(), b.real()});
      X1 = std::max({X1, a.real(), b.real()});
      Y0 = std::min({Y0, a.imag(), b.imag()});
      Y1 = std::max({Y1, a.imag(), b.imag()});
    }
    const double span = std::max({X1 - X0, Y1 - Y0, 1e-12});
    bucket = std::max(tol, span / 2048.0);
    x0 = X0 - 2 * bucket;
    y0 = Y0 - 2 * bucket;
    nx = (int)std::ceil((X1 - x0) / bucket) + 3;
    ny = (int)std::ceil((Y1 - y0) / bucket) + 3;
    dist.assign((size_t)nx * ny, std::numeric_limits<std::int32_t>::max());
    std::vector<int> frontier, next;
    for (const auto& [a, b] : segs) {
      const int n = std::max(1, (int)std::ceil(std::abs(b - a) / (0.5 * bucket)));
      for (int i = 0; i <= n; ++i) {
        const cplx p = a + (b - a) * (double(i) / n);
        const int bi = (int)((p.real() - x0) / bucket), bj = (int)((p.imag() - y0) / bucket);
        const int c = bi + bj * nx;
        if (dist[c] != 0) {
          dist[c] = 0;
          frontier.push_back(c);
        }
      }
    }
    int level = 0;
    while (!frontier.empty()) {
      ++level;
      next.clear();
      for (int c : frontier) {
        const int i = c % nx, j = c / nx;
        for (int dj = -1; dj <= 1; ++dj)
          for (int di = -1; di <= 1; ++di) {
            const int ii = i + di, jj = j + dj;
            if (ii < 0 || ii >= nx || jj < 0 || jj >= ny) continue;
            const int cc = ii + jj * nx;
            if (dist[cc] > level) {
              dist[cc] = level;
              next.push_back(cc);
            }
          }
      }
      frontier.swap(next);
    }
  }

  double lower_bound(cplx w) const {
    if (dist.empty()) return 1e300;
    const double cx = std::clamp(w.real(), x0, x0 + (nx - 1) * bucket);
    const double cy = std::clamp(w.imag(), y0, y0 + (ny - 1) * bucket);
    const double clamp_d = std::hypot(w.real() - cx, w.imag() - cy);
    const int bi = std::clamp((int)((cx - x0) / bucket), 0, nx - 1);
    const int bj = std::clamp((int)((cy - y0) / bucket), 0, ny - 1);
    const double g = double(std::max(dist[bi + bj * nx] - 1, 0)) * bucket;
    return std::max(clamp_d, g - clamp_d);
  }
};

void rasterize_set(PartitionGrid& g, const ImageCurve& curves, const ClusterSet& cluster) {
  for (const auto& pl : curves.polylines) {
    for (size_t i = 0; i + 1 < pl.pts.size(); ++i) mark_segment(g, pl.pts[i], pl.pts[i + 1]);
    if (pl.closed && pl.pts.size() > 1) mark_segment(g, pl.pts.back(), pl.pts.front());
  }
  for (cplx w : curves.isolated_images) mark_cell(g, w);
  const double span = std::hypot(g.viewport.width(), g.viewport.height());
  const cplx mid(0.5 * (g.viewport.x0 + g.viewport.x1), 0.5 * (g.viewport.y0 + g.viewport.y1));
  for (const auto& [pt, dir] : cluster.lines) {
    const double reach = std::abs(pt - mid) + span;
    mark_segment(g, pt - reach * dir, pt + reach * dir);
  }
  for (cplx w : cluster.points) mark_cell(g, w);
  for (cplx w : cluster.cloud) mark_cell(g, w);
}

PreimageSet preimage_set(const PlaneMap& f, cplx w, const Viewport& box,
                         const PartitionOptions& opt) {
  if (f.poly) return preimages(*f.poly, w);
  return preimages_numeric(f, w, box, opt.numeric_grid);
}

int count_in_component(const PartitionGrid& domain, int comp, const PreimageSet& ps) {
  int n = 0;
  for (cplx z : ps.solutions)
    if (domain.label_at(z) == comp) ++n;
  return n;
}

}  // namespace

PartitionGrid build_range_partition(const ImageCurve& curves, const ClusterSet& cluster,
                                    const Viewport& vp, int cell_n, int dilation) {
  if (cell_n < 8) throw std::invalid_argument("build_range_partition: cell_n < 8");
  if (dilation < 0) throw std::invalid_argument("build_range_partition: negative dilation");
  PartitionGrid g;
  g.viewport = vp;
  g.nx = g.ny = cell_n;
  g.dilation = std::max(1, dilation);
  g.barrier.assign(cell_n * cell_n, 0);
  rasterize_set(g, curves, cluster);
  dilate(g, dilation);
  require_free_cells(g, "build_range_partition");
  flood(g);
  return g;
}

PartitionGrid build_domain_partition(const PlaneMap& f, const ImageCurve& curves,
                                     const ClusterSet& cluster, const Viewport& vp,
                                     int cell_n, double image_tol) {
  if (cell_n < 8) throw std::invalid_argument("build_domain_partition: cell_n < 8");
  PartitionGrid g;
  g.viewport = vp;
  g.nx = g.ny = cell_n;
  g.dilation = 1;
  g.barrier.assign(cell_n * cell_n, 0);
  const double tol = image_tol > 0 ? image_tol : 2.0 * vp.width() / cell_n;

  FeatureField field;
  for (const auto& pl : curves.polylines) {
    for (size_t i = 0; i + 1 < pl.pts.size(); ++i) field.add(pl.pts[i], pl.pts[i + 1]);
    if (pl.closed && pl.pts.size() > 1) field.add(pl.pts.back(), pl.pts.front());
  }
  for (cplx w : curves.isolated_images) field.add(w, w);
  for (cplx w : cluster.cloud) field.add(w, w);
  field.build(tol);
  ClusterSet thin;  // lines and points admit direct distance queries
  thin.lines = cluster.lines;
  thin.points = cluster.points;
  const bool any_thin = !thin.lines.empty() || !thin.points.empty();

  // A cell is a barrier when the image of the whole cell can reach the set:
  // the tolerance grows with the cell's image diameter (Jacobian norm times
  // cell radius), otherwise fast-moving maps leave gaps in the preimage
  // bands and the flood fill leaks between sheets.
  const double radius = 0.5 * std::hypot(g.cell_dx(), g.cell_dy());
  parallel_for(cell_n * cell_n, [&](std::int64_t c) {
    const cplx z = g.center((int)(c % cell_n), (int)(c / cell_n));
    const cplx w = f(z);
    if (!finite(w)) return;
    const Jacobian2x2 J = f.jacobian_matrix(z);
    const double stretch = std::sqrt(J.ux * J.ux + J.uy * J.uy + J.vx * J.vx + J.vy * J.vy);
    const double cell_tol = tol + radius * (std::isfinite(stretch) ? stretch : 0.0);
    if (field.lower_bound(w) <= cell_tol || (any_thin && thin.distance(w) <= cell_tol))
      g.barrier[c] = 1;
  });
  require_free_cells(g, "build_domain_partition");
  flood(g);
  return g;
}

std::vector<ComponentReport> component_valences(const PlaneMap& f, const PartitionGrid& grid,
                                                const PartitionOptions& opt) {
  if (opt.samples_per_component < 3)
    throw std::invalid_argument("component_valences: need at least 3 samples per component");
  const std::vector<int> dist = barrier_distance(grid);
  std::vector<ComponentReport> reports(grid.components);
  for (int lab : grid.label)
    if (lab >= 0) ++reports[lab].cells;
  parallel_for(grid.components, [&](std::int64_t id) {
    ComponentReport& rep = reports[id];
    rep.id = (int)id;
    rep.range_side = true;
    rep.bounded = grid.bounded_component((int)id);
    rep.samples = draw_samples(grid, dist, (int)id, opt.samples_per_component, opt.seed);
    bool first = true;
    for (cplx w : rep.samples) {
      const ValenceResult v = valence(f, w, opt.numeric_box, opt.numeric_grid);
      if (v.verdict != PreimageSet::Verdict::finite) continue;
      if (first) {
        rep.valence = v.count;
        rep.certified = v.certified;
        first = false;
      } else {
        if (v.count != rep.valence) rep.constancy_violation = true;
        rep.certified = rep.certified && v.certified;
      }
    }
  });
  for (auto& rep : reports)
    if (rep.bounded) rep.simply_connected_estimate = simply_connected_estimate(grid, rep.id);
  return reports;
}

ComponentMapping component_mapping(const PlaneMap& f, const PartitionGrid& domain, int comp,
                                   const PartitionGrid& range, const PartitionOptions& opt) {
  if (comp < 0 || comp >= domain.components)
    throw std::invalid_argument("component_mapping: no such component");
  const std::vector<int> dist = barrier_distance(domain);
  const int want = std::max(opt.samples_per_component, 3);
  ComponentMapping m;
  bool one_range = true;
  int valid = 0;
  std::vector<cplx> targets;
  const auto absorb = [&](const std::vector<cplx>& zs) {
    for (cplx z : zs) {
      const int rid = range.label_at(f(z));
      if (rid < 0) continue;
      if (m.range_id < 0)
        m.range_id = rid;
      else if (rid != m.range_id)
        one_range = false;
      if ((int)targets.size() < 3) targets.push_back(f(z));
      if (++valid >= want) return;
    }
  };
  absorb(draw_samples(domain, dist, comp, want + 4, opt.seed));
  // Unbounded components map mostly outside the range window, so few draws
  // yield a labeled image; retry with a wider net before giving up.
  if (valid < want) {
    valid = 0;
    m = ComponentMapping{};
    one_range = true;
    targets.clear();
    absorb(draw_samples(domain, dist, comp, std::max(16 * want, 64), opt.seed));
  }
  if (m.range_id < 0 || targets.size() < 3) return m;
  bool even = true;
  for (cplx w : targets) {
    const int n = count_in_component(domain, comp, preimage_set(f, w, domain.viewport, opt));
    if (m.n0 < 0)
      m.n0 = n;
    else if (n != m.n0)
      even = false;
  }
  m.consistent = one_range && even;
  return m;
}

namespace {

std::optional<FoldArcCheck> check_arc_point(const PlaneMap& map, const HarmonicPolynomial& f,
                                            const CriticalSet& cs, const PartitionGrid& range,
                                            int ci, cplx z0, double eps,
                                            const PartitionOptions& opt) {
  FoldArcCheck fc;
  fc.curve = ci;
  fc.z0 = z0;
  fc.w0 = map(z0);
  // Probe along the image of the Jacobian kernel: the arc image bounces off
  // w0 into the side containing the fold tangent.
  const Jacobian2x2 J = map.jacobian_matrix(z0);
  const cplx ker = std::hypot(J.ux, J.uy) >= std::hypot(J.vx, J.vy) ? cplx(J.uy, -J.ux)
                                                                    : cplx(J.vy, -J.vx);
  const double kn = std::abs(ker);
  if (!(kn > 0.0)) return std::nullopt;
  const double h = 1e-4 * (1.0 + std::abs(z0));
  const cplx bounce =
      (map(z0 + h * ker / kn) - fc.w0) + (map(z0 - h * ker / kn) - fc.w0);
  if (!(std::abs(bounce) > 0.0) || !finite(bounce)) return std::nullopt;
  const cplx dir = bounce / std::abs(bounce);
  fc.region_plus = range.label_at(fc.w0 + eps * dir);
  fc.region_minus = range.label_at(fc.w0 - eps * dir);
  fc.tangent_side_ok =
      fc.region_plus >= 0 && fc.region_minus >= 0 && fc.region_plus != fc.region_minus;
  if (!fc.tangent_side_ok) return std::nullopt;  // ambiguous: resample along the arc
  const PreimageSet ps = preimages(f, fc.w0);
  for (cplx z : ps.solutions)
    (cs.distance_to_curves(z) <= 1e-4 ? fc.N1 : fc.N0)++;
  fc.val_plus = valence(map, fc.w0 + eps * dir, opt.numeric_box, opt.numeric_grid).count;
  fc.val_minus = valence(map, fc.w0 - eps * dir, opt.numeric_box, opt.numeric_grid).count;
  fc.jump_ok = fc.val_plus == fc.N0 + 2 * fc.N1 && fc.val_minus == fc.N0;
  return fc;
}

}  // namespace

std::vector<FoldArcCheck> fold_arc_checks(const HarmonicPolynomial& f, const CriticalSet& cs,
                                          const PartitionGrid& range, int arcs_per_curve,
                                          const PartitionOptions& opt) {
  if (arcs_per_curve < 1) throw std::invalid_argument("fold_arc_checks: arcs_per_curve < 1");
  const PlaneMap map = make_plane_map(f);
  const auto classified = classify(f, cs);
  const ImageCurve ic = image_curve(map, cs);
  const double eps = 3.0 * std::max(range.cell_dx(), range.cell_dy());
  std::vector<FoldArcCheck> out;
  for (size_t ci = 0; ci < cs.curves.size(); ++ci) {
    const auto& pts = cs.curves[ci].pts;
    const int n = (int)pts.size();
    if (n < 12) continue;
    std::vector<char> excluded(n, 0);
    const auto exclude_near = [&](int v) {
      for (int k = std::max(0, v - 5); k <= std::min(n - 1, v + 5); ++k) excluded[k] = 1;
    };
    for (const auto& cp : classified)
      if (cp.curve == (int)ci && cp.kind != CritKind::regular_fold)
        exclude_near((int)std::lround(cp.t));
    for (const auto& cu : ic.cusps)
      if (cu.curve == (int)ci) {
        int best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (int k = 0; k < n; ++k)
          if (std::abs(pts[k] - cu.z) < bd) {
            bd = std::abs(pts[k] - cu.z);
            best = k;
          }
        exclude_near(best);
      }
    if (!cs.curves[ci].closed)
      for (int k = 0; k < n; ++k)
        if (k < 5 || k >= n - 5) excluded[k] = 1;
    std::vector<int> cand;
    for (int k = 0; k < n; ++k)
      if (!excluded[k]) cand.push_back(k);
    if (cand.empty()) continue;
    // spread candidates along the arc; retry in chunks while probes stay
    // ambiguous (side landed on a barrier)
    const int stride = std::max<int>(1, (int)cand.size() / (6 * arcs_per_curve));
    std::vector<int> order;
    for (int off = 0; off < stride; ++off)
      for (size_t q = off; q < cand.size(); q += stride) order.push_back(cand[q]);
    int taken = 0;
    for (size_t base = 0; base < order.size() && taken < arcs_per_curve;
         base += arcs_per_curve) {
      const size_t m = std::min(order.size() - base, (size_t)arcs_per_curve);
      std::vector<std::optional<FoldArcCheck>> slot(m);
      parallel_for((std::int64_t)m, [&](std::int64_t q) {
        slot[q] = check_arc_point(map, f, cs, range, (int)ci, pts[order[base + q]], eps, opt);
      });
      for (size_t q = 0; q < m && taken < arcs_per_curve; ++q)
        if (slot[q]) {
          out.push_back(*slot[q]);
          ++taken;
        }
    }
  }
  return out;
}

std::vector<PunctureFinding> puncture_analysis(const PlaneMap& f, const PartitionGrid& range,
                                               const PartitionGrid& domain,
                                               const std::vector<cplx>& isolated_images,
                                               const CriticalSet& cs,
                                               const PartitionOptions& opt) {
  std::vector<PunctureFinding> out;
  if (isolated_images.empty()) return out;
  std::vector<ComponentMapping> maps(domain.components);
  for (int c = 0; c < domain.components; ++c)
    if (domain.bounded_component(c)) maps[c] = component_mapping(f, domain, c, range, opt);

  // A barrier point belongs to `comp` when the nearest labeled cells (walked
  // in Chebyshev rings, so the reach scales with the barrier blob around the
  // point) include that component before any other shows up.
  const auto near_component = [&](cplx z, int comp) {
    const int c = domain.cell_index(z);
    if (c < 0) return false;
    if (domain.label[c] >= 0) return domain.label[c] == comp;
    const int i = c % domain.nx, j = c / domain.nx;
    for (int r = 1; r <= domain.nx / 8; ++r) {
      bool hit = false, other = false;
      for (int dj = -r; dj <= r; ++dj)
        for (int di = -r; di <= r; ++di) {
          if (std::max(std::abs(di), std::abs(dj)) != r) continue;
          const int ii = i + di, jj = j + dj;
          if (ii < 0 || ii >= domain.nx || jj < 0 || jj >= domain.ny) continue;
          const int lab = domain.label[ii + jj * domain.nx];
          if (lab == comp) hit = true;
          else if (lab >= 0) other = true;
        }
      if (hit) return true;
      if (other) return false;
    }
    return false;
  };

  for (cplx w0 : isolated_images) {
    // the component the puncture sits in: majority label over a probe ring
    const double rr = 3.0 * std::max(range.cell_dx(), range.cell_dy());
    std::unordered_map<int, int> votes;
    for (int t = 0; t < 16; ++t) {
      const int lab = range.label_at(w0 + std::polar(rr, 2.0 * M_PI * t / 16.0));
      if (lab >= 0) ++votes[lab];
    }
    int omega = -1, best = 0;
    for (const auto& [lab, cnt] : votes)
      if (cnt > best || (cnt == best && lab < omega)) {
        omega = lab;
        best = cnt;
      }
    if (omega < 0) continue;
    const PreimageSet ps = preimage_set(f, w0, domain.viewport, opt);
    for (int c = 0; c < domain.components; ++c) {
      // only components with a resolved covering count say anything useful
      if (!domain.bounded_component(c) || maps[c].range_id != omega) continue;
      if (maps[c].n0 <= 0) continue;
      PunctureFinding pf;
      pf.w0 = w0;
      pf.domain_component = c;
      pf.range_component = omega;
      pf.valence = maps[c].n0;
      bool off_s = true;
      for (cplx z : ps.solutions) {
        if (!near_component(z, c)) continue;
        ++pf.boundary_preimages;
        if (cs.distance_to_set(z) <= 1e-4) off_s = false;
      }
      pf.preimages_off_S = pf.boundary_preimages > 0 && off_s;
      pf.fill_in_candidate =
          pf.boundary_preimages == pf.valence && pf.valence == 1 && pf.preimages_off_S;
      out.push_back(pf);
    }
  }
  return out;
}

JoinVerdict join_probe(const PlaneMap& f, const PartitionGrid& domain,
                       const std::vector<int>& components, const CriticalSet& cs,
                       int arc_samples, const PartitionOptions& opt) {
  JoinVerdict v;
  if (components.empty()) {
    v.detail = "no components listed";
    return v;
  }
  std::set<int> ids(components.begin(), components.end());
  for (int id : ids)
    if (id < 0 || id >= domain.components) {
      v.detail = "unknown component id";
      return v;
    }
  const int total = domain.nx * domain.ny;

  // owner: nearest component label, extended over barrier cells by BFS
  std::vector<int> owner(domain.label);
  {
    std::vector<int> frontier, next;
    for (int c = 0; c < total; ++c)
      if (owner[c] >= 0) frontier.push_back(c);
    while (!frontier.empty()) {
      next.clear();
      for (int c : frontier) {
        const int i = c % domain.nx, j = c / domain.nx;
        constexpr int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
        for (int t = 0; t < 4; ++t) {
          const int ii = i + di[t], jj = j + dj[t];
          if (ii < 0 || ii >= domain.nx || jj < 0 || jj >= domain.ny) continue;
          const int cc = ii + jj * domain.nx;
          if (owner[cc] < 0) {
            owner[cc] = owner[c];
            next.push_back(cc);
          }
        }
      }
      frontier.swap(next);
    }
  }

  // mask: listed components plus barrier cells claimed by growth from the
  // two-owner seams. Cells whose neighborhood sees a third owner, or an
  // owner outside the merge set, are never claimed.
  std::vector<char> mask(total, 0);
  for (int c = 0; c < total; ++c)
    if (domain.label[c] >= 0 && ids.count(domain.label[c])) mask[c] = 1;

  const auto local_owners = [&](int c) {
    std::set<int> got;
    const int i = c % domain.nx, j = c / domain.nx;
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        const int ii = i + di, jj = j + dj;
        if (ii < 0 || ii >= domain.nx || jj < 0 || jj >= domain.ny) continue;
        if (owner[ii + jj * domain.nx] >= 0) got.insert(owner[ii + jj * domain.nx]);
      }
    return got;
  };
  const auto claimable = [&](int c) {
    if (!domain.barrier[c]) return false;
    const auto got = local_owners(c);
    if (got.size() > 2) return false;  // triple junction: never claimed
    for (int o : got)
      if (!ids.count(o)) return false;
    return true;
  };

  std::vector<char> claimed(total, 0);
  if (ids.size() > 1) {
    std::vector<int> frontier, next;
    for (int c = 0; c < total; ++c)
      if (claimable(c) && local_owners(c).size() == 2) {
        claimed[c] = 1;
        frontier.push_back(c);
      }
    while (!frontier.empty()) {
      next.clear();
      for (int c : frontier) {
        const int i = c % domain.nx, j = c / domain.nx;
        for (int dj = -1; dj <= 1; ++dj)
          for (int di = -1; di <= 1; ++di) {
            const int ii = i + di, jj = j + dj;
            if (ii < 0 || ii >= domain.nx || jj < 0 || jj >= domain.ny) continue;
            const int cc = ii + jj * domain.nx;
            if (!claimed[cc] && claimable(cc)) {
              claimed[cc] = 1;
              next.push_back(cc);
            }
          }
      }
      frontier.swap(next);
    }
    for (int c = 0; c < total; ++c)
      if (claimed[c]) mask[c] = 1;
  }

  // the union must be one piece
  {
    int start = -1, mask_total = 0;
    for (int c = 0; c < total; ++c)
      if (mask[c]) {
        ++mask_total;
        if (start < 0) start = c;
      }
    if (start < 0) {
      v.detail = "listed components have no cells";
      return v;
    }
    std::vector<char> seen(total, 0);
    std::vector<int> stack{start};
    seen[start] = 1;
    int visited = 0;
    while (!stack.empty()) {
      const int c = stack.back();
      stack.pop_back();
      ++visited;
      const int i = c % domain.nx, j = c / domain.nx;
      constexpr int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
      for (int t = 0; t < 4; ++t) {
        const int ii = i + di[t], jj = j + dj[t];
        if (ii < 0 || ii >= domain.nx || jj < 0 || jj >= domain.ny) continue;
        const int cc = ii + jj * domain.nx;
        if (mask[cc] && !seen[cc]) {
          seen[cc] = 1;
          stack.push_back(cc);
        }
      }
    }
    if (visited != mask_total) {
      v.kind = JoinVerdict::Kind::rejected;
      v.detail = "components are not adjacent";
      return v;
    }
  }

  // enclosed non-mask pockets (unclaimed barrier islands, swallowed
  // components): flood the complement from the grid edge
  {
    std::vector<char> open(total, 0);
    std::vector<int> stack;
    for (int c = 0; c < total; ++c) {
      const int i = c % domain.nx, j = c / domain.nx;
      if (!mask[c] && (i == 0 || i == domain.nx - 1 || j == 0 || j == domain.ny - 1)) {
        open[c] = 1;
        stack.push_back(c);
      }
    }
    while (!stack.empty()) {
      const int c = stack.back();
      stack.pop_back();
      const int i = c % domain.nx, j = c / domain.nx;
      constexpr int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
      for (int t = 0; t < 4; ++t) {
        const int ii = i + di[t], jj = j + dj[t];
        if (ii < 0 || ii >= domain.nx || jj < 0 || jj >= domain.ny) continue;
        const int cc = ii + jj * domain.nx;
        if (!mask[cc] && !open[cc]) {
          open[cc] = 1;
          stack.push_back(cc);
        }
      }
    }
    // triple-junction plugs: unclaimed barrier cells between three merged
    // components are the grid form of a puncture in the joined region
    for (int c = 0; c < total; ++c) {
      if (!domain.barrier[c] || claimed[c] || open[c] == 0) continue;
      const auto got = local_owners(c);
      if (got.size() < 3) continue;
      bool internal = true;
      for (int o : got)
        if (!ids.count(o)) internal = false;
      if (internal) open[c] = 0;  // demote to "pocket" so the scan below reports it
    }
    std::vector<char> pocket_seen(total, 0);
    for (int c = 0; c < total && (int)v.obstructions.size() < 32; ++c) {
      if (mask[c] || open[c] || pocket_seen[c]) continue;
      // one representative per pocket
      double sx = 0, sy = 0;
      int cnt = 0;
      std::vector<int> stk{c};
      pocket_seen[c] = 1;
      while (!stk.empty()) {
        const int cc = stk.back();
        stk.pop_back();
        const cplx z = domain.center(cc % domain.nx, cc / domain.nx);
        sx += z.real();
        sy += z.imag();
        ++cnt;
        const int i = cc % domain.nx, j = cc / domain.nx;
        constexpr int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
        for (int t = 0; t < 4; ++t) {
          const int ii = i + di[t], jj = j + dj[t];
          if (ii < 0 || ii >= domain.nx || jj < 0 || jj >= domain.ny) continue;
          const int c2 = ii + jj * domain.nx;
          if (!mask[c2] && !open[c2] && !pocket_seen[c2]) {
            pocket_seen[c2] = 1;
            stk.push_back(c2);
          }
        }
      }
      v.obstructions.emplace_back(sx / cnt, sy / cnt);
    }
  }

  // Merge hypothesis: the interior of each shared band must avoid the traced
  // critical curves. Band endpoints may land on them, so cells near band ends
  // (marked by adjacent unclaimable barrier cells) are exempt.
  bool s_clear = true;
  if (!cs.curves.empty()) {
    std::unordered_set<int> s_cells;
    for (const auto& pl : cs.curves)
      for (cplx z : pl.pts) {
        const int c = domain.cell_index(z);
        if (c >= 0) s_cells.insert(c);
      }
    const auto near_band_end = [&](int c) {
      const int i = c % domain.nx, j = c / domain.nx;
      for (int dj = -3; dj <= 3; ++dj)
        for (int di = -3; di <= 3; ++di) {
          const int ii = i + di, jj = j + dj;
          if (ii < 0 || ii >= domain.nx || jj < 0 || jj >= domain.ny) continue;
          const int cc = ii + jj * domain.nx;
          if (domain.barrier[cc] && !claimed[cc] && !claimable(cc)) return true;
        }
      return false;
    };
    for (int c = 0; c < total && s_clear; ++c) {
      if (!claimed[c] || near_band_end(c)) continue;
      const int i = c % domain.nx, j = c / domain.nx;
      for (int dj = -2; dj <= 2 && s_clear; ++dj)
        for (int di = -2; di <= 2; ++di) {
          const int ii = i + di, jj = j + dj;
          if (ii < 0 || ii >= domain.nx || jj < 0 || jj >= domain.ny) continue;
          if (s_cells.count(ii + jj * domain.nx)) {
            s_clear = false;
            break;
          }
        }
    }
  }

  // individual univalence precondition
  std::string pre_fail;
  {
    const std::vector<int> dist = barrier_distance(domain);
    for (int id : ids) {
      const auto zs = draw_samples(domain, dist, id, 3, opt.seed);
      bool uni = !zs.empty();
      for (cplx z : zs) {
        const PreimageSet ps = preimage_set(f, f(z), domain.viewport, opt);
        if (count_in_component(domain, id, ps) != 1) uni = false;
      }
      if (!uni) {
        pre_fail = "component " + std::to_string(id) + " is not individually univalent";
        break;
      }
    }
  }

  // univalence probe on the union: seeded samples with pairwise-distinct
  // images, then covering count 1 per target
  const int m = std::max(arc_samples, 8);
  std::vector<cplx> samples;
  {
    // distance to the mask complement, for interior draws
    std::vector<int> dist(total, std::numeric_limits<int>::max());
    std::vector<int> frontier, next;
    for (int c = 0; c < total; ++c)
      if (!mask[c]) {
        dist[c] = 0;
        frontier.push_back(c);
      }
    int level = 0;
    while (!frontier.empty()) {
      ++level;
      next.clear();
      for (int c : frontier) {
        const int i = c % domain.nx, j = c / domain.nx;
        for (int dj = -1; dj <= 1; ++dj)
          for (int di = -1; di <= 1; ++di) {
            const int ii = i + di, jj = j + dj;
            if (ii < 0 || ii >= domain.nx || jj < 0 || jj >= domain.ny) continue;
            const int cc = ii + jj * domain.nx;
            if (dist[cc] > level) {
              dist[cc] = level;
              next.push_back(cc);
            }
          }
      }
      frontier.swap(next);
    }
    std::vector<int> pool;
    const int deep = 2 * std::max(1, domain.dilation);
    for (int c = 0; c < total; ++c)
      if (mask[c] && dist[c] > deep) pool.push_back(c);
    if ((int)pool.size() < m)
      for (int c = 0; c < total; ++c)
        if (mask[c] && dist[c] <= deep) pool.push_back(c);
    std::mt19937_64 eng(opt.seed ^ 0xa02bdbf7bb3c0a7ull);
    std::vector<char> used(pool.size(), 0);
    for (int guard = 0; (int)samples.size() < std::min<int>(m, (int)pool.size()) &&
                        guard < 64 * m;
         ++guard) {
      const size_t idx = (size_t)(eng() % pool.size());
      if (used[idx]) continue;
      used[idx] = 1;
      samples.push_back(domain.center(pool[idx] % domain.nx, pool[idx] / domain.nx));
    }
  }

  bool injective = true;
  for (size_t a = 0; a < samples.size() && injective; ++a)
    for (size_t b = a + 1; b < samples.size(); ++b)
      if (std::abs(f(samples[a]) - f(samples[b])) <= 1e-6) {
        injective = false;
        v.witness_a = samples[a];
        v.witness_b = samples[b];
        break;
      }
  bool covering_one = true;
  for (size_t t = 0; t < samples.size() && t < 3; ++t) {
    const PreimageSet ps = preimage_set(f, f(samples[t]), domain.viewport, opt);
    int cnt = 0;
    cplx in_mask_a, in_mask_b;
    for (cplx z : ps.solutions) {
      const int c = domain.cell_index(z);
      if (c >= 0 && mask[c]) {
        if (cnt == 0)
          in_mask_a = z;
        else
          in_mask_b = z;
        ++cnt;
      }
    }
    v.preimage_counts.push_back(cnt);
    if (cnt != 1 && covering_one) {
      covering_one = false;
      if (cnt > 1) {
        v.witness_a = in_mask_a;
        v.witness_b = in_mask_b;
      }
    }
  }

  if (!pre_fail.empty() || !s_clear || !v.obstructions.empty()) {
    v.kind = JoinVerdict::Kind::hypothesis_violated;
    v.detail = !v.obstructions.empty()
                   ? "union encloses unclaimed barrier pockets (puncture obstruction)"
               : !pre_fail.empty() ? pre_fail
                                   : "critical curve meets a shared arc";
    return v;
  }
  if (injective && covering_one) {
    v.kind = JoinVerdict::Kind::univalent;
    v.detail = "pairwise-distinct images and covering count 1";
  } else {
    v.kind = JoinVerdict::Kind::not_univalent;
    v.detail = injective ? "covering count above 1 on the union"
                         : "two samples share an image";
  }
  return v;
}

PartitionReport analyze_partition(const PlaneMap& f, const Viewport& domain_vp,
                                  const Viewport& range_vp, const PipelineOptions& opt) {
  PartitionReport rep;
  const double res =
      opt.trace_resolution > 0 ? opt.trace_resolution : domain_vp.width() / opt.cell_n;
  rep.critical = trace(f, domain_vp, res);
  rep.curves = image_curve(f, rep.critical);
  ClusterEstimate ce = cluster_at_infinity(f, range_vp);
  rep.cluster = ce.set;
  for (const auto& w : ce.warnings) rep.warnings.push_back("cluster: " + w);

  rep.range = build_range_partition(rep.curves, rep.cluster, range_vp, opt.cell_n, opt.dilation);
  rep.range_components = component_valences(f, rep.range, opt.partition);
  rep.domain = build_domain_partition(f, rep.curves, rep.cluster, domain_vp, opt.cell_n,
                                      2.0 * rep.range.cell_dx());

  const std::vector<int> dist = barrier_distance(rep.domain);
  rep.domain_components.resize(rep.domain.components);
  for (int lab : rep.domain.label)
    if (lab >= 0) ++rep.domain_components[lab].cells;
  for (int c = 0; c < rep.domain.components; ++c) {
    ComponentReport& dc = rep.domain_components[c];
    dc.id = c;
    dc.range_side = false;
    dc.bounded = rep.domain.bounded_component(c);
    dc.samples = draw_samples(rep.domain, dist, c, opt.partition.samples_per_component,
                              opt.partition.seed);
    const ComponentMapping m = component_mapping(f, rep.domain, c, rep.range, opt.partition);
    dc.mapped_to = m.range_id;
    dc.n0 = m.n0;
    dc.n0_consistent = m.consistent;
    if (m.range_id >= 0 && m.range_id < (int)rep.range_components.size()) {
      const ComponentReport& rc = rep.range_components[m.range_id];
      if (rc.simply_connected_estimate && m.n0 > 1)
        rep.warnings.push_back(
            "grid-resolution artifact: domain component " + std::to_string(c) + " covers " +
            "simply connected range component " + std::to_string(m.range_id) + " with n0 = " +
            std::to_string(m.n0));
    }
  }

  if (opt.fold_checks && f.poly && !rep.critical.curves.empty())
    rep.arcs =
        fold_arc_checks(*f.poly, rep.critical, rep.range, opt.arcs_per_curve, opt.partition);
  rep.punctures = puncture_analysis(f, rep.range, rep.domain, rep.curves.isolated_images,
                                    rep.critical, opt.partition);
  return rep;
}

}  // namespace harmval

#include "harmval/planemap.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace harmval {

namespace {

double poly_scale_at(const CPoly& p, double az) {
  double s = 0.0, pw = 1.0;
  for (const auto& a : p.coeffs()) {
    s += std::abs(a) * pw;
    pw *= az;
  }
  return s;
}

}  // namespace

Jacobian2x2 PlaneMap::jacobian_matrix(cplx z) const {
  Jacobian2x2 m;
  if (harmonic_derivs) {
    auto [dh, dg] = harmonic_derivs(z);
    cplx fx = dh + std::conj(dg);
    cplx fy = cplx(0, 1) * (dh - std::conj(dg));
    m.ux = fx.real();
    m.vx = fx.imag();
    m.uy = fy.real();
    m.vy = fy.imag();
    return m;
  }
  if (jac_analytic) return jac_analytic(z);
  double h = fd_step_rel * std::max(1.0, std::abs(z));
  cplx fxp = f(z + h), fxm = f(z - h);
  cplx fyp = f(z + cplx(0, h)), fym = f(z - cplx(0, h));
  m.ux = (fxp.real() - fxm.real()) / (2 * h);
  m.vx = (fxp.imag() - fxm.imag()) / (2 * h);
  m.uy = (fyp.real() - fym.real()) / (2 * h);
  m.vy = (fyp.imag() - fym.imag()) / (2 * h);
  return m;
}

double PlaneMap::jacobian(cplx z) const {
  if (harmonic_derivs) {
    auto [dh, dg] = harmonic_derivs(z);
    double a = std::abs(dh), b = std::abs(dg);
    return a * a - b * b;
  }
  return jacobian_matrix(z).det();
}

PlaneMap make_plane_map(const HarmonicPolynomial& fp, std::string name) {
  PlaneMap m;
  m.name = std::move(name);
  m.poly = fp;
  m.harmonic = true;
  CPoly p = fp.p, q = fp.q;
  CPoly dp = p.derivative(), dq = q.derivative();
  m.f = [p, q](cplx z) { return p.eval(z) + std::conj(q.eval(z)); };
  m.harmonic_derivs = [dp, dq](cplx z) { return std::make_pair(dp.eval(z), dq.eval(z)); };
  return m;
}

DegeneracyReport detect_degeneracy(const HarmonicPolynomial& f, double tol) {
  DegeneracyReport r;
  CPoly dp = f.p.derivative(), dq = f.q.derivative();
  if (dp.is_zero() && dq.is_zero()) {
    r.kind = DegeneracyReport::Kind::constant_range;
    r.alpha = f.eval(0.0);
    return r;
  }
  if (dp.is_zero() || dq.is_zero()) return r;  // analytic or anti-analytic: open map
  if (dp.degree() != dq.degree()) return r;
  cplx lambda = dp.lead() / dq.lead();
  double scale = std::max(dp.coeff_scale(), dq.coeff_scale());
  for (int k = 0; k <= dp.degree(); ++k)
    if (std::abs(dp.coeff(k) - lambda * dq.coeff(k)) > tol * scale) return r;
  if (std::abs(std::abs(lambda) - 1.0) > tol) return r;
  r.kind = DegeneracyReport::Kind::line_range;
  r.lambda = lambda;
  cplx tau = std::sqrt(lambda);
  r.beta = 2.0 * tau;
  r.alpha = f.p.eval(0.0) - lambda * f.q.eval(0.0);
  return r;
}

PsiValue SecondDilatation::at(cplx z) const {
  PsiValue out;
  double az = std::abs(z);
  double ns = std::max(poly_scale_at(num, az), 1e-300);
  double ds = std::max(poly_scale_at(den, az), 1e-300);
  cplx nv = num.eval(z), dv = den.eval(z);
  bool n0 = num.is_zero() || std::abs(nv) <= 1e-12 * ns;
  bool d0 = den.is_zero() || std::abs(dv) <= 1e-12 * ds;
  if (d0 && n0) {
    out.kind = PsiValue::Kind::indeterminate;
  } else if (d0) {
    out.kind = PsiValue::Kind::pole;
  } else {
    out.kind = PsiValue::Kind::value;
    out.v = nv / dv;
  }
  return out;
}

SecondDilatation second_dilatation(const HarmonicPolynomial& f) {
  SecondDilatation sd;
  sd.num = f.p.derivative();
  sd.den = f.q.derivative();
  if (sd.den.is_zero() || sd.num.is_zero()) return sd;
  CPoly g = poly_gcd(sd.num, sd.den);
  if (g.degree() >= 1) {
    CPoly qn, qd;
    sd.num.divmod(g, &qn);
    sd.den.divmod(g, &qd);
    sd.num = qn;
    sd.den = qd;
  }
  return sd;
}

PsiValue psi(const HarmonicPolynomial& f, cplx z) { return second_dilatation(f).at(z); }

double ClusterSet::distance(cplx w) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [pt, dir] : lines)
    best = std::min(best, std::abs(std::imag((w - pt) * std::conj(dir))) / std::abs(dir));
  for (const auto& pt : points) best = std::min(best, std::abs(w - pt));
  for (const auto& c : cloud) best = std::min(best, std::abs(w - c));
  return best;
}

namespace {

HarmonicPolynomial hp(std::vector<cplx> pc, std::vector<cplx> qc) {
  return HarmonicPolynomial{CPoly(std::move(pc)), CPoly(std::move(qc))};
}

ClusterSet horizontal_lines(const Viewport& vp, double spacing, double offset) {
  ClusterSet cs;
  cs.exact = true;
  double xm = 0.5 * (vp.x0 + vp.x1);
  long k0 = (long)std::ceil((vp.y0 - offset) / spacing);
  long k1 = (long)std::floor((vp.y1 - offset) / spacing);
  for (long k = k0; k <= k1; ++k) cs.lines.push_back({cplx(xm, offset + k * spacing), 1.0});
  return cs;
}

ClusterSet real_axis(const Viewport& vp) {
  ClusterSet cs;
  cs.exact = true;
  if (vp.y0 <= 0.0 && vp.y1 >= 0.0) cs.lines.push_back({cplx(0.5 * (vp.x0 + vp.x1), 0), 1.0});
  return cs;
}

ClusterSet empty_cluster(const Viewport&) {
  ClusterSet cs;
  cs.exact = true;
  return cs;
}

std::vector<CatalogEntry> build_catalog() {
  std::vector<CatalogEntry> v;
  const cplx I(0, 1);

  {
    CatalogEntry e;
    e.name = "quadratic";
    e.formula = "f(z) = z^2 + z - conj(z)";
    e.map = make_plane_map(hp({0, 1, 1}, {0, -1}), e.name);
    e.critset_residual = [](cplx z) { return std::abs(std::abs(z + 0.5) - 0.5); };
    e.exact_cluster = empty_cluster;
    e.has_exact_cluster = true;
    e.notes = "critical circle |z+1/2| = 1/2, hypocycloid image with 3 cusps";
    v.push_back(std::move(e));
  }
  {
    CatalogEntry e;
    e.name = "cubic-star";
    e.formula = "f(z) = z^3/3 - conj(z)^2/2";
    e.map = make_plane_map(hp({0, 0, 0, cplx(1.0 / 3.0)}, {0, 0, -0.5}), e.name);
    e.critset_residual = [](cplx z) {
      return std::min(std::abs(std::abs(z) - 1.0), std::abs(z));
    };
    e.exact_cluster = empty_cluster;
    e.has_exact_cluster = true;
    e.notes = "unit circle plus an isolated critical point at the origin";
    v.push_back(std::move(e));
  }
  {
    CatalogEntry e;
    e.name = "cubic-twos";
    e.formula = "f(z) = -z^3/2 + 3z/2 - conj(z)";
    e.map = make_plane_map(hp({0, 1.5, 0, -0.5}, {0, -1}), e.name);
    e.critset_residual = [](cplx z) {
      return std::abs(std::abs(z * z - 1.0) - 2.0 / 3.0) / std::max(2.0 * std::abs(z), 0.3);
    };
    e.exact_cluster = empty_cluster;
    e.has_exact_cluster = true;
    e.notes = "two disjoint critical ovals around +1 and -1";
    v.push_back(std::move(e));
  }
  {
    CatalogEntry e;
    e.name = "dumbbell";
    e.formula = "f(z) = -z^3/2 + 9z/10 - conj(z)";
    e.map = make_plane_map(hp({0, 0.9, 0, -0.5}, {0, -1}), e.name);
    e.critset_residual = [](cplx z) {
      return std::abs(std::abs(z * z - 0.6) - 2.0 / 3.0) / std::max(2.0 * std::abs(z), 0.3);
    };
    e.exact_cluster = empty_cluster;
    e.has_exact_cluster = true;
    e.notes = "single dumbbell-shaped critical curve";
    v.push_back(std::move(e));
  }
  {
    CatalogEntry e;
    e.name = "transharm";
    e.formula = "f(z) = z + Re(e^z)";
    e.map.name = e.name;
    e.map.harmonic = true;
    e.map.f = [](cplx z) { return z + std::real(std::exp(z)); };
    e.map.harmonic_derivs = [](cplx z) {
      cplx ez = std::exp(z);
      return std::make_pair(1.0 + 0.5 * ez, 0.5 * ez);
    };
    e.critset_residual = [](cplx z) {
      double ex = std::exp(z.real());
      return std::abs(ex * std::cos(z.imag()) + 1.0) / std::max(ex, 1e-12);
    };
    e.exact_cluster = [](const Viewport& vp) { return horizontal_lines(vp, M_PI, M_PI / 2); };
    e.has_exact_cluster = true;
    e.notes = "cluster set is the lines Im w = (2k+1)pi/2";
    v.push_back(std::move(e));
  }
  {
    CatalogEntry e;
    e.name = "polyunbdds";
    e.formula = "f(z) = 2(Re(z^3) + i z)";
    e.map = make_plane_map(hp({0, 2.0 * I, 0, 1}, {0, 0, 0, 1}), e.name);
    e.critset_residual = [](cplx z) {
      double x = z.real(), y = z.imag();
      return std::abs(x * y + 1.0 / 6.0) / std::max(std::hypot(x, y), 0.1);
    };
    e.exact_cluster = real_axis;
    e.has_exact_cluster = true;
    e.notes = "critical hyperbola xy = -1/6, cluster set is the real axis";
    v.push_back(std::move(e));
  }
  {
    CatalogEntry e;
    e.name = "flatpoly";
    e.formula = "f(z) = 2(Re(z^2) + i(Re z - Im z))";
    e.map = make_plane_map(hp({0, I - 1.0, 1}, {0, 1.0 - I, 1}), e.name);
    e.map.light = false;
    e.critset_residual = [](cplx z) { return std::abs(z.real() - z.imag()) / std::sqrt(2.0); };
    e.exact_cluster = real_axis;
    e.has_exact_cluster = true;
    e.notes = "f collapses the line x = y to 0; image of the critical set is one point";
    v.push_back(std::move(e));
  }
  {
    CatalogEntry e;
    e.name = "sarason";
    e.formula = "f(z) = Re(e^(-z^2)) + z";
    e.map.name = e.name;
    e.map.harmonic = true;
    e.map.f = [](cplx z) { return z + std::real(std::exp(-z * z)); };
    e.map.harmonic_derivs = [](cplx z) {
      cplx w = std::exp(-z * z);
      return std::make_pair(1.0 - z * w, -z * w);
    };
    e.exact_cluster = empty_cluster;
    e.has_exact_cluster = true;
    e.notes = "|f| -> infinity in every direction, empty cluster set";
    v.push_back(std::move(e));
  }
  {
    CatalogEntry e;
    e.name = "c1poly";
    e.formula = "f(x,y) = (x^2 + y^2, 2xy)";
    e.map.name = e.name;
    e.map.harmonic = false;
    e.map.f = [](cplx z) {
      double x = z.real(), y = z.imag();
      return cplx(x * x + y * y, 2 * x * y);
    };
    e.map.jac_analytic = [](cplx z) {
      double x = z.real(), y = z.imag();
      return Jacobian2x2{2 * x, 2 * y, 2 * y, 2 * x};
    };
    e.critset_residual = [](cplx z) {
      double x = z.real(), y = z.imag();
      return std::min(std::abs(x - y), std::abs(x + y)) / std::sqrt(2.0);
    };
    e.exact_cluster = empty_cluster;
    e.has_exact_cluster = true;
    e.notes = "critical set is the diagonals y = x and y = -x";
    v.push_back(std::move(e));
  }
  {
    CatalogEntry e;
    e.name = "c1trans";
    e.formula = "f(x,y) = (x cos y, y)";
    e.map.name = e.name;
    e.map.harmonic = false;
    e.map.light = false;
    e.map.f = [](cplx z) {
      double x = z.real(), y = z.imag();
      return cplx(x * std::cos(y), y);
    };
    e.map.jac_analytic = [](cplx z) {
      double x = z.real(), y = z.imag();
      return Jacobian2x2{std::cos(y), -x * std::sin(y), 0.0, 1.0};
    };
    e.critset_residual = [](cplx z) {
      double y = z.imag();
      long k = (long)std::lround(y / M_PI - 0.5);
      return std::abs(y - (2 * k + 1) * M_PI / 2);
    };
    e.exact_cluster = [](const Viewport& vp) { return horizontal_lines(vp, M_PI, M_PI / 2); };
    e.has_exact_cluster = true;
    e.notes = "univalent on each horizontal strip between the lines y = (2k+1)pi/2";
    v.push_back(std::move(e));
  }
  return v;
}

}  // namespace

const std::vector<CatalogEntry>& catalog() {
  static const std::vector<CatalogEntry> v = build_catalog();
  return v;
}

const CatalogEntry* find_catalog(const std::string& name) {
  for (const auto& e : catalog())
    if (e.name == name) return &e;
  return nullptr;
}

namespace {

std::vector<cplx> parse_coeff_array(const nlohmann::json& arr, const char* field) {
  if (!arr.is_array())
    throw std::invalid_argument(std::string("field '") + field + "' must be an array");
  std::vector<cplx> out;
  for (const auto& item : arr) {
    if (!item.is_array() || item.size() != 2 || !item[0].is_number() || !item[1].is_number())
      throw std::invalid_argument(std::string("entries of '") + field +
                                  "' must be [re, im] number pairs");
    out.emplace_back(item[0].get<double>(), item[1].get<double>());
  }
  return out;
}

}  // namespace

PlaneMap parse_function(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("function spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("function spec must be a JSON object");
  for (const auto& [key, val] : j.items()) {
    (void)val;
    if (key != "name" && key != "p" && key != "q")
      throw std::invalid_argument("unknown field '" + key + "' in function spec");
  }
  bool has_name = j.contains("name"), has_p = j.contains("p"), has_q = j.contains("q");
  if (has_name && (has_p || has_q))
    throw std::invalid_argument("function spec cannot combine 'name' with 'p'/'q'");
  if (has_name) {
    if (!j["name"].is_string()) throw std::invalid_argument("field 'name' must be a string");
    const auto* e = find_catalog(j["name"].get<std::string>());
    if (!e) throw std::invalid_argument("unknown catalog name '" + j["name"].get<std::string>() + "'");
    return e->map;
  }
  if (!has_p || !has_q)
    throw std::invalid_argument("function spec needs either 'name' or both 'p' and 'q'");
  HarmonicPolynomial f{CPoly(parse_coeff_array(j["p"], "p")), CPoly(parse_coeff_array(j["q"], "q"))};
  return make_plane_map(f, "custom");
}

std::string serialize_function(const PlaneMap& m) {
  if (!m.name.empty() && m.name != "custom" && find_catalog(m.name)) {
    nlohmann::json j;
    j["name"] = m.name;
    return j.dump();
  }
  if (!m.poly) throw std::invalid_argument("only catalog members and polynomial maps serialize");
  auto emit = [](const CPoly& p) {
    std::string out = "[";
    char buf[80];
    bool first = true;
    for (const auto& a : p.coeffs()) {
      std::snprintf(buf, sizeof buf, "%s[%.17g,%.17g]", first ? "" : ",", a.real(), a.imag());
      out += buf;
      first = false;
    }
    return out + "]";
  };
  return std::string("{\"p\":") + emit(m.poly->p) + ",\"q\":" + emit(m.poly->q) + "}";
}

}  // namespace harmval

#include "jetquant/lagrangian_module.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>

#include "jetquant/stationary.hpp"

namespace jq {

namespace {

bool has(const std::vector<int>& v, int k) { return std::find(v.begin(), v.end(), k) != v.end(); }

RationalPoly poly_const(int nvars, const Rational& c) {
  RationalPoly p;
  p.nvars = nvars;
  if (c != 0) p.terms[std::vector<int>(nvars, 0)] = c;
  return p;
}

RationalPoly poly_var(int nvars, int i) {
  RationalPoly p;
  p.nvars = nvars;
  std::vector<int> e(nvars, 0);
  e[i] = 1;
  p.terms[e] = 1;
  return p;
}

void poly_clean(RationalPoly& p) {
  for (auto it = p.terms.begin(); it != p.terms.end();) it = it->second == 0 ? p.terms.erase(it) : std::next(it);
}

RationalPoly poly_add(RationalPoly a, const RationalPoly& b, const Rational& s = 1) {
  for (const auto& [e, c] : b.terms) a.terms[e] += s * c;
  poly_clean(a);
  return a;
}

RationalPoly poly_mul(const RationalPoly& a, const RationalPoly& b) {
  RationalPoly r;
  r.nvars = a.nvars;
  for (const auto& [e, c] : a.terms)
    for (const auto& [f, d] : b.terms) {
      std::vector<int> g(e.size());
      for (std::size_t k = 0; k < e.size(); ++k) g[k] = e[k] + f[k];
      r.terms[g] += c * d;
    }
  poly_clean(r);
  return r;
}

// Renames variable k of p to variable into[k] of an nvars-variable polynomial.
RationalPoly poly_embed(const RationalPoly& p, const std::vector<int>& into, int nvars) {
  RationalPoly r;
  r.nvars = nvars;
  for (const auto& [e, c] : p.terms) {
    std::vector<int> f(nvars, 0);
    for (std::size_t k = 0; k < e.size(); ++k) f[into[k]] += e[k];
    r.terms[f] += c;
  }
  poly_clean(r);
  return r;
}

Series poly_series(const RationalPoly& F, const std::vector<Series>& args) {
  const LayoutPtr& l = args.at(0).layout_ptr();
  std::vector<std::vector<Series>> pw(args.size());
  auto power_of = [&](std::size_t k, int p) -> const Series& {
    if (pw[k].empty()) pw[k].push_back(Series::constant(l, 1.0));
    while (static_cast<int>(pw[k].size()) <= p) pw[k].push_back(pw[k].back() * args[k]);
    return pw[k][p];
  };
  Series r(l);
  for (const auto& [e, c] : F.terms) {
    Series t = Series::constant(l, to_double(c));
    for (std::size_t k = 0; k < e.size(); ++k)
      if (e[k]) t = t * power_of(k, e[k]);
    r += t;
  }
  return r;
}

int exact_rank(RationalMatrix m) {
  int rank = 0;
  const int rows = static_cast<int>(m.size());
  const int cols = rows ? static_cast<int>(m[0].size()) : 0;
  for (int c = 0; c < cols && rank < rows; ++c) {
    int piv = -1;
    for (int r = rank; r < rows; ++r)
      if (m[r][c] != 0) {
        piv = r;
        break;
      }
    if (piv < 0) continue;
    std::swap(m[piv], m[rank]);
    for (int r = 0; r < rows; ++r) {
      if (r == rank || m[r][c] == 0) continue;
      Rational f = m[r][c] / m[rank][c];
      for (int k = c; k < cols; ++k) m[r][k] -= f * m[rank][k];
    }
    ++rank;
  }
  return rank;
}

std::vector<double> to_doubles(const std::vector<Rational>& v) {
  std::vector<double> r;
  for (const auto& q : v) r.push_back(to_double(q));
  return r;
}

Series times_ih(const Series& f) {
  const int h = f.layout().hbar();
  Exponent e(f.nvars(), 0);
  e[h] = 1;
  return f.times_monomial(e, cplx(0, 1));
}


// Amplitude layout y1..yn, h into the Weyl layout x1..xn, h (and back).
Series to_weyl(const WeylAlgebra& A, const Series& b) {
  const Layout& l = b.layout();
  std::vector<int> m(l.size(), -1);
  for (std::size_t k = 0; k < l.size(); ++k) {
    const std::string& v = l.vars[k];
    if (v == "h") m[k] = static_cast<int>(A.h);
    else if (v[0] == 'y') m[k] = static_cast<int>(A.x.at(std::stoi(v.substr(1)) - 1));
    else m[k] = A.layout->index(v);
    if (m[k] < 0) throw Error("module: variable " + v + " has no counterpart in the algebra");
  }
  return b.relayout(A.layout, m);
}

Series from_weyl(const WeylAlgebra& A, const Series& f, const LayoutPtr& out) {
  std::vector<int> m(A.layout->size(), -1);
  for (int k = 0; k < A.n; ++k) m[A.x[k]] = out->index("y" + std::to_string(k + 1));
  m[A.h] = out->hbar();
  for (std::size_t p : A.params) m[p] = out->index(A.layout->vars[p]);
  for (const auto& [e, c] : f.terms())
    for (int k = 0; k < A.n; ++k)
      if (e[A.xi[k]]) throw Error("module: xi-hat remains in a function");
  return f.relayout(out, m);
}

cplx eighth_root(int k) { return std::polar(1.0, std::numbers::pi * k / 4.0); }

Series scalar_series(const OscillatoryScalar& s, const Series& amplitude) {
  return s.phase8() * (s.as_series(amplitude.layout_ptr()) * amplitude);
}

}  // namespace

json chart_data_to_json(const LagrangianChartData& c) {
  return {{"base_chart", c.base_chart}, {"n", c.n}, {"xi_free", c.xi_free}, {"F", c.F.to_json()}};
}

LagrangianChartData chart_data_from_json(const json& j) {
  LagrangianChartData c;
  c.base_chart = j.value("base_chart", std::string());
  c.n = j.at("n");
  c.xi_free = j.value("xi_free", std::vector<int>{});
  c.F = RationalPoly::from_json(j.at("F"));
  return c;
}

bool PhaseChart::xi_slot(int k) const { return has(data.xi_free, k); }

std::vector<Rational> PhaseChart::point() const {
  const int n = data.n;
  std::vector<Rational> p(2 * n);
  for (int k = 0; k < n; ++k) {
    Rational d = data.F.derivative(k).evaluate(base);
    if (xi_slot(k)) {
      p[k] = -d;
      p[n + k] = base[k];
    } else {
      p[k] = base[k];
      p[n + k] = d;
    }
  }
  return p;
}

std::vector<Rational> PhaseChart::theta() const {
  auto p = point();
  return {p.begin() + n(), p.end()};
}

std::vector<Rational> free_coordinates(const LagrangianChartData& data, const std::vector<Rational>& point) {
  if (static_cast<int>(point.size()) != 2 * data.n) throw Error("phase chart: point has the wrong dimension");
  std::vector<Rational> y(data.n);
  for (int k = 0; k < data.n; ++k) y[k] = has(data.xi_free, k) ? point[data.n + k] : point[k];
  return y;
}

bool PhaseChart::contains(const std::vector<Rational>& p) const {
  PhaseChart c = *this;
  c.base = free_coordinates(data, p);
  return c.point() == p;
}

PhaseChart PhaseChart::moved(const std::vector<Rational>& p) const {
  if (!contains(p)) throw Error("phase chart " + id + ": point is not on the chart's Lagrangian");
  PhaseChart c = *this;
  c.base = free_coordinates(data, p);
  return c;
}

json PhaseChart::to_json() const {
  json b = json::array();
  for (const auto& q : base) b.push_back(rational_to_json(q));
  return {{"id", id}, {"chart", chart_data_to_json(data)}, {"base", b}};
}

PhaseChart PhaseChart::from_json(const json& j) {
  std::vector<Rational> b;
  for (const auto& q : j.at("base")) b.push_back(rational_from_json(q));
  return phase_from_generating(chart_data_from_json(j.at("chart")), b, j.value("id", std::string()));
}

PhaseChart phase_from_generating(const LagrangianChartData& data, const std::vector<Rational>& base,
                                 const std::string& id) {
  const int n = data.n;
  if (n < 1) throw Error("phase chart: dimension must be positive");
  if (data.F.nvars != n) throw Error("phase chart: F must have one variable per slot");
  std::vector<int> S = data.xi_free;
  std::sort(S.begin(), S.end());
  if (std::adjacent_find(S.begin(), S.end()) != S.end()) throw Error("phase chart: repeated xi-free slot");
  for (int k : S)
    if (k < 0 || k >= n) throw Error("phase chart: xi-free slot out of range");
  if (static_cast<int>(base.size()) != n) throw Error("phase chart: base point has the wrong dimension");

  PhaseChart c;
  c.id = id;
  c.data = data;
  c.data.xi_free = S;
  c.base = base;
  const int m = 2 * n;
  std::vector<int> into(n);
  for (int k = 0; k < n; ++k) into[k] = has(S, k) ? n + k : k;
  RationalPoly phi = poly_embed(data.F, into, m);
  for (int k = 0; k < n; ++k) {
    if (has(S, k)) {
      phi = poly_add(phi, poly_mul(poly_var(m, k), poly_var(m, n + k)));
    } else {
      RationalPoly d = poly_add(poly_var(m, n + k), poly_embed(data.F.derivative(k), into, m), -1);
      phi = poly_add(phi, poly_mul(d, d), Rational(1, 2));
    }
  }
  c.phi.n = n;
  c.phi.phi = phi;

  std::vector<Rational> p = c.point();
  std::vector<Rational> xt = p;  // (x, theta) with theta = xi
  for (int k = 0; k < n; ++k) {
    if (phi.derivative(n + k).evaluate(xt) != 0) throw Error("phase chart " + id + ": base point is not critical");
    if (phi.derivative(k).evaluate(xt) != p[n + k]) throw Error("phase chart " + id + ": covector mismatch");
  }
  RationalMatrix M(n, std::vector<Rational>(m));
  for (int k = 0; k < n; ++k) {
    RationalPoly dk = phi.derivative(n + k);
    for (int j = 0; j < m; ++j) M[k][j] = dk.derivative(j).evaluate(xt);
  }
  if (exact_rank(M) != n) throw Error("phase chart " + id + ": rank condition fails at the base point");
  return c;
}

LayoutPtr module_layout(int n, int cap, const std::vector<std::string>& base) {
  std::vector<std::string> v;
  for (int k = 0; k < n; ++k) v.push_back("y" + std::to_string(k + 1));
  for (const auto& b : base) v.push_back(b);
  v.push_back("h");
  return make_layout(v, cap);
}

Series phase_jet(const PhaseChart& c, const LayoutPtr& layout, const std::vector<std::string>& base) {
  const int n = c.n();
  if (!base.empty() && static_cast<int>(base.size()) != n) throw Error("phase jet: need one base parameter per slot");
  std::vector<Series> p, py;
  for (int k = 0; k < n; ++k) {
    Series s = Series::constant(layout, to_double(c.base[k]));
    if (!base.empty()) s += Series::variable(layout, base[k]);
    p.push_back(s);
    py.push_back(s + Series::variable(layout, "y" + std::to_string(k + 1)));
  }
  Series r = poly_series(c.data.F, py) - poly_series(c.data.F, p);
  for (int k = 0; k < n; ++k) r -= poly_series(c.data.F.derivative(k), p) * Series::variable(layout, "y" + std::to_string(k + 1));
  return r;
}

ModuleJet ModuleJet::make(const PhaseChart& c, const Series& amplitude, const std::vector<std::string>& base) {
  LayoutPtr l = module_layout(c.n(), amplitude.cap(), base);
  if (amplitude.layout().vars != l->vars) throw Error("module jet: amplitude layout must be y1..yn, base, h");
  ModuleJet m;
  m.chart = c;
  m.base = base;
  m.amplitude = amplitude;
  m.phase = phase_jet(c, amplitude.layout_ptr(), base);
  m.scalar = OscillatoryScalar::one(amplitude.cap());
  return m;
}

json ModuleJet::to_json() const {
  return {{"role", "module"}, {"chart", chart.to_json()}, {"base", base}, {"amplitude", amplitude.to_json()},
          {"scalar", scalar.to_json()}};
}

ModuleJet ModuleJet::from_json(const json& j) {
  if (j.value("role", std::string("module")) != "module") throw Error("module jet: wrong role tag");
  PhaseChart c = PhaseChart::from_json(j.at("chart"));
  auto base = j.value("base", std::vector<std::string>{});
  Series a = Series::from_json(j.at("amplitude"));
  ModuleJet m = make(c, a.relayout(module_layout(c.n(), a.cap(), base)), base);
  if (j.contains("scalar")) m.scalar = OscillatoryScalar::from_json(j["scalar"]);
  return m;
}

LayoutPtr RawModuleJet::layout(int n, int cap) {
  std::vector<std::string> v;
  for (int k = 0; k < n; ++k) v.push_back("xh" + std::to_string(k + 1));
  for (int k = 0; k < n; ++k) v.push_back("th" + std::to_string(k + 1));
  v.push_back("h");
  return make_layout(v, cap);
}

RawModuleJet RawModuleJet::make(const PhaseChart& c, const Series& amplitude) {
  const int n = c.n();
  LayoutPtr l = layout(n, amplitude.cap());
  if (amplitude.layout().vars != l->vars) throw Error("raw module jet: amplitude layout must be xh, th, h");
  std::vector<Rational> p = c.point();
  std::vector<Series> args;
  for (int k = 0; k < 2 * n; ++k) args.push_back(Series::constant(l, to_double(p[k])) + Series::variable(l, k));
  RawModuleJet r;
  r.chart = c;
  r.phase = poly_series(c.phi.phi, args).degree_range(2, l->cap);
  r.amplitude = amplitude;
  r.scalar = OscillatoryScalar::one(l->cap);
  return r;
}

Series RawModuleJet::relation(const Series& b, int k) const {
  const std::size_t t = chart.n() + k;
  return times_ih(b.derivative(t)) - phase.derivative(t) * b;
}

ModuleJet normalize(const RawModuleJet& raw) {
  const int n = raw.chart.n();
  const LayoutPtr& l = raw.amplitude.layout_ptr();
  const std::vector<int>& S = raw.chart.data.xi_free;
  std::vector<std::size_t> fiber;
  for (int k = 0; k < n; ++k)
    if (!has(S, k)) fiber.push_back(n + k);

  OscillatoryScalar scalar = raw.scalar;
  Series G = raw.phase, c = raw.amplitude;
  if (!fiber.empty()) {
    StationaryPhase sp = stationary_phase(raw.phase, raw.amplitude, fiber);
    G = sp.critical_value;
    c = sp.amplitude;
    scalar *= sp.prefactor * eighth_root(-static_cast<int>(fiber.size()));
  }

  // G = x-hat_S theta-hat_S + F~(x-hat_S', theta-hat_S).
  std::vector<int> to_raw(n + 1);
  LayoutPtr ml = module_layout(n, l->cap);
  for (int k = 0; k < n; ++k) to_raw[k] = has(S, k) ? n + k : k;
  to_raw[n] = l->hbar();
  Series Ft = phase_jet(raw.chart, ml).relayout(l, to_raw);
  Series expect = Ft;
  for (int k : S) expect += Series::variable(l, k) * Series::variable(l, n + k);
  if (distance(G, expect) > 1e-8 * std::max(1.0, expect.max_abs()))
    throw Error("normalize: critical value does not match the chart's generating function");

  // x-hat_k c ~ (i h d_theta_k - F~_theta_k) c for k in S.
  for (int k : S) {
    for (;;) {
      Series c0(l), c1(l);
      for (const auto& [e, v] : c.terms()) {
        if (e[k] == 0) {
          c0.add(e, v);
        } else {
          Exponent f = e;
          f[k] -= 1;
          c1.add(f, v);
        }
      }
      if (c1.is_zero()) break;
      c = c0 + times_ih(c1.derivative(n + k)) - Ft.derivative(n + k) * c1;
    }
  }

  std::vector<int> back(l->size(), -1);
  for (int k = 0; k < n; ++k) back[to_raw[k]] = k;
  back[l->hbar()] = n;
  for (const auto& [e, v] : c.terms())
    for (std::size_t i = 0; i < e.size(); ++i)
      if (e[i] && back[i] < 0) throw Error("normalize: amplitude still depends on an eliminated variable");
  ModuleJet m = ModuleJet::make(raw.chart, c.relayout(ml, back));
  m.scalar = scalar;
  return m;
}

RawModuleJet raw_act_x(int k, const RawModuleJet& m) {
  RawModuleJet r = m;
  r.amplitude = Series::variable(m.amplitude.layout_ptr(), k) * m.amplitude;
  return r;
}

RawModuleJet raw_act_xi(int k, const RawModuleJet& m) {
  RawModuleJet r = m;
  r.amplitude = times_ih(m.amplitude.derivative(k)) - m.phase.derivative(k) * m.amplitude;
  return r;
}

namespace {

struct ChartOps {
  const PhaseChart& c;
  const Series& phase;
  std::size_t y(int k) const { return static_cast<std::size_t>(k); }
  Series shifted(int k, const Series& b) const { return times_ih(b.derivative(y(k))) - phase.derivative(y(k)) * b; }
  Series mult(int k, const Series& b) const { return Series::variable(b.layout_ptr(), y(k)) * b; }
  Series x(int k, const Series& b) const { return c.xi_slot(k) ? shifted(k, b) : mult(k, b); }
  Series xi(int k, const Series& b) const { return c.xi_slot(k) ? -mult(k, b) : shifted(k, b); }
};

}  // namespace

Series module_act_amplitude(const WeylAlgebra& A, const Series& w, const Series& phase, const PhaseChart& c,
                            const Series& amplitude) {
  const int n = c.n();
  if (A.n != n) throw Error("module action: algebra and chart dimensions differ");
  const LayoutPtr& l = amplitude.layout_ptr();
  Series normal = weyl_quantize(A, w);
  ChartOps ops{c, phase};

  // Coefficients of x-hat^alpha xi-hat^beta as series in h and the base parameters.
  std::map<std::pair<Exponent, Exponent>, Series> groups;
  std::vector<int> pmap(A.layout->size(), -1);
  pmap[A.h] = l->hbar();
  for (std::size_t p : A.params) {
    pmap[p] = l->index(A.layout->vars[p]);
    if (pmap[p] < 0) throw Error("module action: parameter " + A.layout->vars[p] + " is not a base parameter of the jet");
  }
  for (const auto& [e, v] : normal.terms()) {
    Exponent a(n), b(n);
    for (int k = 0; k < n; ++k) {
      a[k] = e[A.x[k]];
      b[k] = e[A.xi[k]];
    }
    Exponent rest(l->size(), 0);
    for (std::size_t i = 0; i < e.size(); ++i)
      if (pmap[i] >= 0) rest[pmap[i]] += e[i];
    auto it = groups.try_emplace({a, b}, Series(l)).first;
    it->second.add(rest, v);
  }

  std::map<Exponent, Series> xi_cache;
  std::function<const Series&(const Exponent&)> xi_pow = [&](const Exponent& b) -> const Series& {
    auto it = xi_cache.find(b);
    if (it != xi_cache.end()) return it->second;
    int k = 0;
    while (k < n && b[k] == 0) ++k;
    Series r = amplitude;
    if (k < n) {
      Exponent c = b;
      c[k] -= 1;
      r = ops.xi(k, xi_pow(c));
    }
    return xi_cache.emplace(b, r).first->second;
  };

  Series out(l);
  for (const auto& [ab, coef] : groups) {
    Series t = xi_pow(ab.second);
    for (int k = 0; k < n; ++k)
      for (int q = 0; q < ab.first[k]; ++q) t = ops.x(k, t);
    out += coef * t;
  }
  return out;
}

ModuleJet module_act(const WeylAlgebra& A, const Series& w, const ModuleJet& m) {
  ModuleJet r = m;
  r.amplitude = module_act_amplitude(A, w, m.phase, m.chart, m.amplitude);
  return r;
}


namespace {

// Free coordinates of the source chart as polynomials in those of the target chart.
std::vector<RationalPoly> chart_change(const PhaseChart& source, const PhaseChart& target) {
  const int n = source.n();
  std::vector<RationalPoly> r;
  for (int k = 0; k < n; ++k) {
    const bool s = source.xi_slot(k), t = target.xi_slot(k);
    if (s == t) r.push_back(poly_var(n, k));
    else if (t) r.push_back(poly_add(poly_const(n, 0), target.data.F.derivative(k), -1));
    else r.push_back(target.data.F.derivative(k));
  }
  return r;
}

Rational phase_value(const PhaseChart& c) { return c.phi.phi.evaluate(c.point()); }

void require_same_point(const PhaseChart& source, const PhaseChart& target) {
  if (source.n() != target.n()) throw Error("module transition: dimensions differ");
  if (source.data.base_chart != target.data.base_chart)
    throw Error("module transition: charts " + source.id + " and " + target.id + " lie over different base charts");
  if (source.point() != target.point())
    throw Error("module transition: point outside the overlap of " + source.id + " and " + target.id);
}

int centered8(int e) {
  e = ((e % 8) + 8) % 8;
  return e > 4 ? e - 8 : e;
}

std::vector<Series> monomial_basis(const LayoutPtr& l, int n, int max_deg) {
  std::vector<Series> out;
  Exponent e(l->size(), 0);
  std::function<void(int, int)> rec = [&](int k, int left) {
    if (k == n) {
      out.push_back(Series::monomial(l, e, 1.0));
      return;
    }
    for (int p = 0; p <= left; ++p) {
      e[k] = p;
      rec(k + 1, left - p);
    }
    e[k] = 0;
  };
  rec(0, max_deg);
  return out;
}

}  // namespace

ModuleJet module_transition(const PhaseChart& target, const ModuleJet& m) {
  const PhaseChart& src = m.chart;
  const int n = src.n();
  if (!m.base.empty()) throw Error("module transition: jets with base parameters are not supported");
  require_same_point(src, target);
  const LayoutPtr& l = m.amplitude.layout_ptr();
  const int cap = l->cap;

  std::vector<int> to_xi, to_x, E;
  for (int k = 0; k < n; ++k) {
    const bool s = src.xi_slot(k), t = target.xi_slot(k);
    if (t && !s) to_xi.push_back(k);
    if (s && !t) to_x.push_back(k);
    if (s != t) E.push_back(k);
  }
  Series target_phase = phase_jet(target, l);
  OscillatoryScalar t = OscillatoryScalar::one(cap);
  t.set_exponent(phase_value(src) - phase_value(target));
  Series amp;
  if (E.empty()) {
    if (distance(m.phase, target_phase) > 1e-8 * std::max(1.0, target_phase.max_abs()))
      throw Error("module transition: the charts describe different Lagrangians at the point");
    amp = m.amplitude;
  } else {
    std::vector<std::string> names;
    for (int k = 0; k < n; ++k) names.push_back("y" + std::to_string(k + 1));
    for (int k : E) names.push_back("z" + std::to_string(k + 1));
    names.push_back("h");
    LayoutPtr w = make_layout(names, cap);
    std::vector<int> into(l->size());
    for (int k = 0; k < n; ++k) into[k] = k;
    into[l->hbar()] = w->hbar();
    Series P = m.phase.relayout(w, into);
    for (int k : to_xi) P -= Series::variable(w, k) * Series::variable(w, "z" + std::to_string(k + 1));
    for (int k : to_x) P += Series::variable(w, k) * Series::variable(w, "z" + std::to_string(k + 1));
    std::vector<std::size_t> fiber(E.begin(), E.end());
    Eigen::MatrixXd H = hessian_at_zero(m.phase, fiber).real();
    if (std::abs(H.determinant()) <= 1e-12) throw Error("module transition: degenerate mixed Hessian");
    const int sig = real_signature(H);
    StationaryPhase sp = stationary_phase(P, m.amplitude.relayout(w, into), fiber);

    std::vector<int> back(w->size(), -1);
    for (int k = 0; k < n; ++k)
      if (!has(E, k)) back[k] = k;
    for (int k : E) back[w->index("z" + std::to_string(k + 1))] = k;
    back[w->hbar()] = l->hbar();
    Series G = sp.critical_value.relayout(l, back);
    if (distance(G, target_phase) > 1e-8 * std::max(1.0, target_phase.max_abs()))
      throw Error("module transition: the charts describe different Lagrangians at the point");
    amp = sp.amplitude.relayout(l, back);
    t.eighth = ((sig % 8) + 8) % 8;
    t *= sp.prefactor * eighth_root(-sig);
  }
  ModuleJet r = ModuleJet::make(target, amp);
  r.scalar = m.scalar * t;
  return r;
}

std::vector<double> module_covector(const PhaseChart& c) {
  auto p = c.point();
  std::vector<double> xi;
  for (int k = 0; k < c.n(); ++k) xi.push_back(-to_double(p[c.n() + k]));
  return xi;
}

ModuleJet module_transition(const PhaseChart& target, const ModuleJet& m, const BaseMap& g) {
  const PhaseChart& src = m.chart;
  const int n = src.n();
  if (!m.base.empty()) throw Error("module transition: jets with base parameters are not supported");
  if (!src.data.xi_free.empty() || !target.data.xi_free.empty())
    throw Error("module transition: base changes are supported between graph charts only");
  if (target.n() != n || g.dim != n) throw Error("module transition: dimensions differ");
  const std::vector<double> xt = to_doubles(target.base), xs = g.at(xt);
  for (int k = 0; k < n; ++k)
    if (std::abs(xs[k] - to_double(src.base[k])) > 1e-10)
      throw Error("module transition: point outside the overlap of " + src.id + " and " + target.id);
  const LayoutPtr& l = m.amplitude.layout_ptr();
  const int cap = l->cap;
  WeylAlgebra W = WeylAlgebra::make(n, cap + 1);
  LayoutPtr l1 = module_layout(n, cap + 1);
  std::vector<Series> gh = jet_transition(W, g, xt);

  // F~_target = F~_source(g^) + F'_source . (g^ - g' x-hat)
  Series Fs = to_weyl(W, phase_jet(src, l1));
  std::vector<Series> args = gh;
  for (int k = 0; k < n; ++k) args.push_back(W.xihat(k));
  args.push_back(W.hbar());
  Series expect = compose(Fs, args);
  auto p = src.point();
  for (int k = 0; k < n; ++k) {
    Series r = gh[k] - gh[k].degree_range(1, 1);
    expect += to_double(p[n + k]) * r;
  }
  Series Ft = to_weyl(W, phase_jet(target, l1));
  if (distance(expect.relayout(with_cap(W.layout, cap)), Ft.relayout(with_cap(W.layout, cap))) >
      1e-8 * std::max(1.0, Ft.max_abs()))
    throw Error("module transition: the charts describe different Lagrangians at the point");

  std::vector<std::size_t> xv(W.x.begin(), W.x.end());
  Series det = determinant(jacobian(gh, xv));
  if (det.constant_term().real() < 0) det = -det;
  Series b = to_weyl(W, m.amplitude.relayout(l1));
  Series out = compose(b, args) * real_power(det, 0.5);
  OscillatoryScalar t = OscillatoryScalar::one(cap);
  t.set_exponent(phase_value(src) - phase_value(target));
  ModuleJet r = ModuleJet::make(target, from_weyl(W, out, l1).relayout(l));
  r.scalar = m.scalar * t;
  return r;
}

json ScalarCocycle::to_json() const {
  return {{"alpha", rational_to_json(alpha)}, {"mu2", mu2}, {"g", g.to_json()}, {"density", density},
          {"unit_residual", unit_residual}, {"maslov_mu2", maslov_mu2},
          {"maslov_alpha", rational_to_json(maslov_alpha)}, {"consistent", consistent}};
}

ScalarCocycle extract_scalar_cocycle(const PhaseChart& source, const PhaseChart& target, int cap, double tol) {
  const int n = source.n();
  require_same_point(source, target);
  LayoutPtr l = module_layout(n, cap);
  ModuleJet r = module_transition(target, ModuleJet::make(source, Series::constant(l, 1.0)));
  ScalarCocycle s;
  s.alpha = *r.scalar.exact_exponent;
  s.mu2 = centered8(r.scalar.eighth);

  std::vector<RationalPoly> psi = chart_change(source, target);
  RationalMatrix J(n, std::vector<Rational>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) J[i][j] = psi[i].derivative(j).evaluate(target.base);
  Eigen::MatrixXd Jd(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) Jd(i, j) = to_double(J[i][j]);
  s.density = std::sqrt(std::abs(Jd.determinant()));
  if (s.density == 0) throw Error("scalar cocycle: the chart change is singular at the point");

  Series at_point = r.amplitude;
  for (int k = 0; k < n; ++k) at_point = at_point.slice(k, 0);
  s.g = r.scalar.as_series(l) * at_point * (1.0 / s.density);
  const cplx g0 = s.g.constant_term();
  if (std::abs(g0) < 1e-12) throw Error("scalar cocycle: residual is not a unit");
  s.unit_residual = std::abs(g0 - 1.0);

  bool same = source.data.xi_free == target.data.xi_free;
  s.maslov_mu2 = same ? 0 : submanifold_cocycle(source.data, target.data, OverlapCase::Subdivision, source.base);
  std::vector<Rational> sample = source.point();
  std::vector<Rational> th = target.theta();
  sample.resize(2 * n);
  sample.insert(sample.end(), th.begin(), th.end());
  s.maslov_alpha = alpha_cocycle(source.phi, target.phi, {sample});
  s.consistent = s.mu2 == centered8(s.maslov_mu2) && s.alpha == s.maslov_alpha && s.unit_residual <= tol;
  return s;
}

std::vector<ModuleJet> connection_apply(const ModuleJet& m) {
  const int n = m.n();
  if (static_cast<int>(m.base.size()) != n) throw Error("connection: the jet needs one base parameter per slot");
  const Layout& l = m.amplitude.layout();
  std::vector<ModuleJet> out;
  for (int k = 0; k < n; ++k) {
    ModuleJet r = m;
    r.amplitude = m.amplitude.derivative(l.index(m.base[k])) - m.amplitude.derivative(k);
    out.push_back(r);
  }
  return out;
}

std::vector<Series> algebra_connection_apply(const WeylAlgebra& A, const PhaseChart& c, const Series& s,
                                             const std::vector<std::string>& base) {
  const int n = c.n();
  if (static_cast<int>(base.size()) != n) throw Error("connection: need one base parameter per slot");
  std::vector<Series> p;
  for (int k = 0; k < n; ++k) p.push_back(A.constant(to_double(c.base[k])) + A.param(base[k]));
  std::vector<Series> x, xi;
  for (int k = 0; k < n; ++k) {
    Series d = poly_series(c.data.F.derivative(k), p);
    if (c.xi_slot(k)) {
      x.push_back(-d);
      xi.push_back(p[k]);
    } else {
      x.push_back(p[k]);
      xi.push_back(d);
    }
  }
  std::vector<Series> out;
  for (int j = 0; j < n; ++j) {
    const std::size_t pj = A.layout->index(base[j]);
    Series r = s.derivative(pj);
    for (int i = 0; i < n; ++i) {
      r -= x[i].derivative(pj) * s.derivative(A.x[i]);
      r += xi[i].derivative(pj) * s.derivative(A.xi[i]);
    }
    out.push_back(r);
  }
  return out;
}

CanonicalOperator canonical_operator(const WeylAlgebra& A, const PhaseChart& c) {
  if (A.n != c.n()) throw Error("canonical operator: dimensions differ");
  CanonicalOperator h;
  h.block = c.data.xi_free;
  h.phase = to_weyl(A, phase_jet(c, module_layout(c.n(), A.layout->cap)));
  std::vector<std::size_t> xv(A.x.begin(), A.x.end());
  h.hessian = hessian_at_zero(h.phase, xv).real();
  h.higher = h.phase.degree_range(3, A.layout->cap);
  return h;
}

Series CanonicalOperator::transport(const WeylAlgebra& A, const Series& w) const {
  const int n = A.n;
  std::vector<Series> X, Xi;
  for (int k = 0; k < n; ++k) {
    Series shifted = A.xihat(k) - phase.derivative(A.x[k]);
    if (has(block, k)) {
      X.push_back(shifted);
      Xi.push_back(-A.xhat(k));
    } else {
      X.push_back(A.xhat(k));
      Xi.push_back(shifted);
    }
  }
  std::map<Exponent, Series> xc, xic;
  std::function<const Series&(std::map<Exponent, Series>&, const std::vector<Series>&, const Exponent&)> pw =
      [&](std::map<Exponent, Series>& cache, const std::vector<Series>& gen, const Exponent& a) -> const Series& {
    auto it = cache.find(a);
    if (it != cache.end()) return it->second;
    int k = 0;
    while (k < n && a[k] == 0) ++k;
    Series r = A.constant(1.0);
    if (k < n) {
      Exponent b = a;
      b[k] -= 1;
      r = moyal_star(A, gen[k], pw(cache, gen, b));
    }
    return cache.emplace(a, r).first->second;
  };

  Series normal = weyl_quantize(A, w);
  std::map<std::pair<Exponent, Exponent>, Series> groups;
  for (const auto& [e, v] : normal.terms()) {
    Exponent a(n), b(n), rest = e;
    for (int k = 0; k < n; ++k) {
      a[k] = e[A.x[k]];
      b[k] = e[A.xi[k]];
      rest[A.x[k]] = rest[A.xi[k]] = 0;
    }
    groups.try_emplace({a, b}, A.zero()).first->second.add(rest, v);
  }
  Series out = A.zero();
  for (const auto& [ab, coef] : groups) out += coef * moyal_star(A, pw(xc, X, ab.first), pw(xic, Xi, ab.second));
  return out;
}

json CanonicalOperator::to_json() const {
  json H = json::array();
  for (int i = 0; i < hessian.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < hessian.cols(); ++j) row.push_back(hessian(i, j));
    H.push_back(row);
  }
  return {{"block", block}, {"hessian", H}, {"higher", higher.to_json()}};
}

Series standard_act(const WeylAlgebra& A, const Series& w, const Series& amplitude) {
  return from_weyl(A, apply_normal(A, weyl_quantize(A, w), to_weyl(A, amplitude)), amplitude.layout_ptr());
}

json MainTheoremReport::to_json() const {
  return {{"claim1", claim1}, {"claim1_residual", claim1_residual}, {"claim2", claim2},
          {"claim2_residual", claim2_residual}, {"claim3", claim3}, {"claim3_residual", claim3_residual},
          {"alpha", rational_to_json(alpha)}, {"mu2", mu2}, {"failure", failure}};
}

MainTheoremReport compare_zero_section(const PhaseChart& source, const PhaseChart& target, int cap, double tol) {
  const int n = source.n();
  require_same_point(source, target);
  MainTheoremReport rep;
  LayoutPtr l = module_layout(n, cap), l1 = module_layout(n, cap + 1);
  WeylAlgebra A = WeylAlgebra::make(n, cap);

  std::vector<int> to_xi, E;
  for (int k = 0; k < n; ++k) {
    if (target.xi_slot(k) && !source.xi_slot(k)) to_xi.push_back(k);
    if (target.xi_slot(k) != source.xi_slot(k)) E.push_back(k);
  }
  rep.mu2 = E.empty() ? 0 : centered8(submanifold_cocycle(source.data, target.data, OverlapCase::Subdivision, source.base));
  rep.alpha = phase_value(source) - phase_value(target);

  // Zero-section transition: b -> b(psi^) |det psi^'|^{1/2}.
  std::vector<RationalPoly> psi = chart_change(source, target);
  std::vector<Series> pt, args;
  for (int k = 0; k < n; ++k)
    pt.push_back(Series::constant(l1, to_double(target.base[k])) + Series::variable(l1, k));
  for (int k = 0; k < n; ++k) {
    Series v = poly_series(psi[k], pt);
    args.push_back(v - Series::constant(l1, v.constant_term()));
  }
  std::vector<std::size_t> yv;
  for (int k = 0; k < n; ++k) yv.push_back(k);
  Series det = determinant(jacobian(args, yv));
  if (det.constant_term().real() < 0) det = -det;
  Series dens = real_power(det, 0.5).relayout(l);
  for (auto& a : args) a = a.relayout(l);
  args.push_back(Series::variable(l, "h"));

  CanonicalOperator hs = canonical_operator(A, source), ht = canonical_operator(A, target);
  Eigen::MatrixXd refl = Eigen::MatrixXd::Identity(n, n);
  for (int k : to_xi) refl(k, k) = -1;
  LayoutPtr al = GaussianJet::amplitude_layout(n, cap);
  std::vector<int> same(l->size());
  for (std::size_t k = 0; k < l->size(); ++k) same[k] = static_cast<int>(k);

  bool defined = true;
  for (const Series& b : monomial_basis(l, n, cap)) {
    ModuleJet r = module_transition(target, ModuleJet::make(source, b));
    OscillatoryScalar s = r.scalar;
    s.set_exponent(Rational(0));
    Series V = scalar_series(s, r.amplitude);
    Series Z = eighth_root(rep.mu2) * (compose(b, args) * dens);
    rep.claim2_residual = std::max(rep.claim2_residual, distance(V.slice(n, 0), Z.slice(n, 0)));

    try {
      GaussianJet J = GaussianJet::make(GaussianJet::Mode::V0, Eigen::MatrixXcd::Zero(n, n), b.relayout(al, same));
      J = act_shear(hs.hessian, J);
      J = exp_act(A, -hs.higher, J);
      if (!E.empty()) J = act_fourier(E, J);
      if (!to_xi.empty()) J = act_gl(refl, J);
      J = exp_act(A, ht.higher, J);
      J = act_shear(-ht.hessian, J);
      rep.claim1_residual = std::max(rep.claim1_residual, J.T.cwiseAbs().maxCoeff());
      // negative powers of h picked up on the way must cancel
      const int hk = J.amplitude.layout().hbar();
      for (const auto& [e, v] : J.amplitude.terms())
        if (e[hk] < 0) rep.claim1_residual = std::max(rep.claim1_residual, std::abs(v));
      Series Wv = scalar_series(J.scalar, J.amplitude.relayout(l, same));
      rep.claim3_residual = std::max(rep.claim3_residual, distance(Wv, V));
    } catch (const UndefinedAction& e) {
      defined = false;
      rep.failure = e.what();
    }
  }
  rep.claim1 = defined && rep.claim1_residual <= tol;
  rep.claim2 = rep.claim2_residual < 1e-9;
  rep.claim3 = defined && rep.claim3_residual < tol;
  if (rep.failure.empty() && !rep.ok()) rep.failure = "claims fail between " + source.id + " and " + target.id;
  return rep;
}

ConormalJet conormal_module_act(const WeylAlgebra& A, const Series& w, const ConormalJet& m) {
  Series prod = normal_compose(A, weyl_quantize(A, w), m.amplitude);
  Series out = A.zero();
  for (const auto& [e, v] : prod.terms())
    if (A.xi_degree(e) == 0) out.add(e, v);
  return {out};
}

bool GradingReport::ok(double tol) const { return zero_section_residual == 0 && graded_residual <= tol; }

json GradingReport::to_json() const {
  return {{"zero_section_residual", zero_section_residual}, {"graded_residual", graded_residual}};
}

GradingReport grading_compare(const PhaseChart& c, int cap) {
  const int n = c.n();
  WeylAlgebra A = WeylAlgebra::make(n, cap);
  LayoutPtr l = module_layout(n, cap);
  LagrangianChartData zd;
  zd.base_chart = c.data.base_chart;
  zd.n = n;
  zd.F.nvars = n;
  PhaseChart z = phase_from_generating(zd, std::vector<Rational>(n, Rational(0)), "zero");
  Series zphase = phase_jet(z, l);

  CanonicalOperator lin;
  lin.block = c.data.xi_free;
  Series phase2 = phase_jet(c, l).homogeneous(2);
  lin.phase = to_weyl(A, phase2);

  std::vector<Series> gens;
  for (int k = 0; k < n; ++k) {
    gens.push_back(A.xhat(k));
    gens.push_back(A.xihat(k));
  }
  GradingReport rep;
  std::vector<Series> basis;
  for (const Series& b : monomial_basis(l, n, cap - 1)) {
    basis.push_back(b);
    basis.push_back(times_ih(b));
  }
  for (const Series& g : gens)
    for (const Series& b : basis) {
      Series chart = module_act_amplitude(A, g, zphase, z, b);
      Series conormal = from_weyl(A, conormal_module_act(A, g, {to_weyl(A, b)}).amplitude, l);
      rep.zero_section_residual = std::max(rep.zero_section_residual, distance(chart, conormal));
      Series graded = module_act_amplitude(A, g, phase2, c, b);
      rep.graded_residual = std::max(rep.graded_residual, distance(graded, standard_act(A, lin.transport(A, g), b)));
    }
  return rep;
}

LagrangianConfig LagrangianConfig::from_json(const json& j) {
  LagrangianConfig c;
  c.name = j.value("name", std::string());
  c.n = j.at("n");
  for (const auto& p : j.at("points")) {
    std::vector<Rational> q;
    for (const auto& v : p) q.push_back(rational_from_json(v));
    if (static_cast<int>(q.size()) != 2 * c.n) throw Error("lagrangian config: point has the wrong dimension");
    c.points.push_back(q);
  }
  for (const auto& cj : j.at("charts")) {
    const std::string id = cj.value("id", std::string());
    try {
      json full = cj;
      if (!full.contains("n")) full["n"] = c.n;
      LagrangianChartData d = chart_data_from_json(full);
      if (d.n != c.n) throw Error("dimension differs from the configuration");
      PhaseChart probe;
      probe.data = d;
      const std::vector<Rational>* found = nullptr;
      for (const auto& p : c.points) {
        probe.base = free_coordinates(d, p);
        if (d.F.nvars == d.n && probe.point() == p) {
          found = &p;
          break;
        }
      }
      if (!found) throw Error("contains none of the points");
      c.charts.push_back(phase_from_generating(d, free_coordinates(d, *found), id));
    } catch (const Error& e) {
      throw Error("lagrangian config: chart " + id + ": " + e.what());
    }
  }
  return c;
}

json LagrangianConfig::to_json() const {
  json pts = json::array();
  for (const auto& p : points) {
    json q = json::array();
    for (const auto& v : p) q.push_back(rational_to_json(v));
    pts.push_back(q);
  }
  json cs = json::array();
  for (const auto& c : charts) {
    json d = chart_data_to_json(c.data);
    d["id"] = c.id;
    cs.push_back(d);
  }
  return {{"name", name}, {"n", n}, {"points", pts}, {"charts", cs}};
}

}  // namespace jq

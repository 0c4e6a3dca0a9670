#include "jetquant/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

namespace jq {

namespace {

// Polynomial evaluation at arguments that may have constant terms.
Series eval_poly(const Series& poly, const std::vector<Series>& args) {
  if (args.size() != poly.nvars()) throw Error("eval_poly: arity mismatch");
  const LayoutPtr& out = args.at(0).layout_ptr();
  std::vector<std::vector<Series>> pw(args.size());
  auto power_of = [&](std::size_t k, int p) -> const Series& {
    if (p < 0) throw Error("eval_poly: negative exponent");
    if (pw[k].empty()) pw[k].push_back(Series::constant(out, 1.0));
    while (static_cast<int>(pw[k].size()) <= p) pw[k].push_back(pw[k].back() * args[k]);
    return pw[k][p];
  };
  Series r(out);
  for (const auto& [e, c] : poly.terms()) {
    Series t = Series::constant(out, c);
    for (std::size_t k = 0; k < e.size(); ++k)
      if (e[k]) t = t * power_of(k, e[k]);
    r += t;
  }
  return r;
}

std::vector<Series> param_shifts(const WeylAlgebra& A, const std::vector<std::string>& names, std::size_t count) {
  std::vector<Series> s;
  for (std::size_t k = 0; k < count; ++k)
    s.push_back(names.empty() ? A.zero() : A.param(names.at(k)));
  return s;
}

std::size_t param_index(const WeylAlgebra& A, const std::string& name) {
  int i = A.layout->index(name);
  if (i < 0) throw Error("unknown base parameter " + name);
  return static_cast<std::size_t>(i);
}

// Replaces the named parameters by the given series; other variables stay.
Series substitute_params(const WeylAlgebra& A, const Series& f, const std::vector<std::string>& names,
                         const std::vector<Series>& values) {
  std::vector<Series> subs;
  for (std::size_t v = 0; v < A.layout->size(); ++v) subs.push_back(Series::variable(A.layout, v));
  for (std::size_t k = 0; k < names.size(); ++k) subs[param_index(A, names[k])] = values.at(k);
  return compose(f, subs);
}

bool is_central_exponent(const WeylAlgebra& A, const Exponent& e) {
  return A.x_degree(e) == 0 && A.xi_degree(e) == 0;
}

Series noncentral_part(const WeylAlgebra& A, const Series& f) {
  Series r = A.zero();
  for (const auto& [e, c] : f.terms())
    if (!is_central_exponent(A, e)) r.add(e, c);
  return r;
}

Series central_part(const WeylAlgebra& A, const Series& f) { return f - noncentral_part(A, f); }

Series truncated(const Series& f, int drop) {
  Series r(f.layout_ptr());
  for (const auto& [e, c] : f.terms())
    if (f.layout().degree(e) <= f.cap() - drop) r.add(e, c);
  return r;
}

std::vector<std::vector<double>> constant_matrix(const SeriesMatrix& m) {
  std::vector<std::vector<double>> r(m.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    for (const auto& s : m[i]) r[i].push_back(s.constant_term().real());
  return r;
}

Series nested_bracket_sum(const WeylAlgebra& A, const Series& sigma, Series t, const std::function<double(int)>& coef) {
  Series out = A.zero();
  for (int k = 0; !t.is_zero(); ++k) {
    if (k > A.layout->cap + 2) throw Error("series of brackets does not terminate; payload not in the filtration-raising part");
    out += t * coef(k);
    t = bracket_over_ih(A, sigma, t);
  }
  return out;
}

void require_raising(const WeylAlgebra& A, const Series& s, const char* what) {
  for (const auto& [e, c] : s.terms()) {
    (void)c;
    if (!is_central_exponent(A, e) && A.formal_degree(e) < 3) throw Error(std::string(what) + ": payload has a component of degree < 3");
  }
}

json matrix_json(const std::vector<std::vector<Series>>& m) {
  json j = json::array();
  for (const auto& row : m) {
    json r = json::array();
    for (const auto& s : row) r.push_back(to_string(s));
    j.push_back(r);
  }
  return j;
}

}  // namespace

// --- base maps and atlases

LayoutPtr BaseMap::poly_layout(int dim) {
  std::vector<std::string> v;
  for (int k = 1; k <= dim; ++k) v.push_back("u" + std::to_string(k));
  return make_layout(v, std::vector<int>(dim, 1), 64);
}

BaseMap BaseMap::identity(int dim) {
  BaseMap g;
  g.dim = dim;
  auto l = poly_layout(dim);
  for (int k = 0; k < dim; ++k) {
    g.num.push_back(Series::variable(l, k));
    g.den.push_back(Series::constant(l, 1.0));
  }
  return g;
}

BaseMap BaseMap::linear(const std::vector<std::vector<double>>& B) {
  BaseMap g;
  g.dim = static_cast<int>(B.size());
  auto l = poly_layout(g.dim);
  for (int i = 0; i < g.dim; ++i) {
    Series s(l);
    for (int j = 0; j < g.dim; ++j) s += Series::variable(l, j, B[i][j]);
    g.num.push_back(s);
    g.den.push_back(Series::constant(l, 1.0));
  }
  return g;
}

namespace {

Series poly_from_json(const json& j, const LayoutPtr& l) {
  Series s(l);
  for (const auto& t : j) {
    Exponent e = t.at(1).get<Exponent>();
    if (e.size() != l->size()) throw Error("base map: exponent arity mismatch");
    s.add(e, t.at(0).is_number() ? cplx(t.at(0).get<double>()) : cplx(to_double(rational_from_json(t.at(0)))));
  }
  return s;
}

json poly_to_json(const Series& s) {
  json j = json::array();
  for (const auto& [e, c] : s.terms()) j.push_back({c.real(), e});
  return j;
}

}  // namespace

BaseMap BaseMap::from_json(const json& j) {
  BaseMap g;
  g.dim = j.at("dim").get<int>();
  auto l = poly_layout(g.dim);
  for (const auto& p : j.at("num")) g.num.push_back(poly_from_json(p, l));
  if (j.contains("den")) {
    for (const auto& p : j.at("den")) g.den.push_back(poly_from_json(p, l));
  } else {
    g.den.assign(g.num.size(), Series::constant(l, 1.0));
  }
  if (static_cast<int>(g.num.size()) != g.dim || g.den.size() != g.num.size())
    throw Error("base map: need dim numerators and denominators");
  return g;
}

json BaseMap::to_json() const {
  json n = json::array(), d = json::array();
  for (const auto& s : num) n.push_back(poly_to_json(s));
  for (const auto& s : den) d.push_back(poly_to_json(s));
  return {{"dim", dim}, {"num", n}, {"den", d}};
}

std::vector<double> BaseMap::at(const std::vector<double>& point) const {
  auto l = make_layout({"t"}, 1);
  std::vector<Series> zero(dim, Series(l));
  std::vector<double> r;
  for (const auto& s : evaluate(point, zero)) r.push_back(s.constant_term().real());
  return r;
}

std::vector<Series> BaseMap::evaluate(const std::vector<double>& point, const std::vector<Series>& shift) const {
  if (static_cast<int>(point.size()) != dim || static_cast<int>(shift.size()) != dim)
    throw Error("base map: point dimension mismatch");
  std::vector<Series> args;
  for (int k = 0; k < dim; ++k) args.push_back(shift[k] + Series::constant(shift[k].layout_ptr(), point[k]));
  std::vector<Series> out;
  for (int k = 0; k < dim; ++k) {
    Series d = eval_poly(den[k], args);
    if (std::abs(d.constant_term()) < 1e-12) throw Error("base map: pole at the point");
    out.push_back(eval_poly(num[k], args) * reciprocal(d));
  }
  return out;
}

const Atlas::Transition* Atlas::find(int a, int b) const {
  for (const auto& t : transitions)
    if (t.a == a && t.b == b) return &t;
  return nullptr;
}

int Atlas::chart_index(const std::string& id) const {
  auto it = std::find(charts.begin(), charts.end(), id);
  if (it == charts.end()) throw Error("atlas: unknown chart " + id);
  return static_cast<int>(it - charts.begin());
}

namespace {

BaseMap map_or_identity(const Atlas& atlas, int a, int b) {
  if (a == b) return BaseMap::identity(atlas.dim);
  const auto* t = atlas.find(a, b);
  if (!t) throw Error("atlas: no transition from " + atlas.charts.at(b) + " to " + atlas.charts.at(a));
  return t->map;
}

}  // namespace

void Atlas::validate(int cap, double tol) const {
  std::vector<std::string> v;
  for (int k = 1; k <= dim; ++k) v.push_back("x" + std::to_string(k));
  auto l = make_layout(v, cap);
  const int m = static_cast<int>(charts.size());
  for (const auto& t : transitions) {
    if (t.map.dim != dim) throw Error("atlas: transition dimension mismatch");
    for (int a = 0; a < m; ++a) {
      if (a != t.a && !find(a, t.a)) continue;
      if (a != t.b && !find(a, t.b)) continue;
      BaseMap ab = map_or_identity(*this, a, t.a), ac = map_or_identity(*this, a, t.b);
      for (const auto& p : t.points) {
        std::vector<Series> xh;
        for (int k = 0; k < dim; ++k) xh.push_back(Series::variable(l, k));
        std::vector<Series> inner = t.map.evaluate(p, xh);
        std::vector<double> q = t.map.at(p);
        for (int k = 0; k < dim; ++k) inner[k] -= Series::constant(l, q[k]);
        std::vector<Series> lhs = ab.evaluate(q, inner), rhs = ac.evaluate(p, xh);
        for (int k = 0; k < dim; ++k)
          if (distance(lhs[k], rhs[k]) > tol)
            throw Error("atlas: transitions do not compose on (" + charts[a] + ", " + charts[t.a] + ", " + charts[t.b] + ")");
      }
    }
  }
}

Atlas Atlas::from_json(const json& j) {
  Atlas at;
  at.dim = j.at("dim").get<int>();
  at.charts = j.at("charts").get<std::vector<std::string>>();
  for (const auto& t : j.at("transitions")) {
    Transition tr;
    tr.a = at.chart_index(t.at("alpha").get<std::string>());
    tr.b = at.chart_index(t.at("beta").get<std::string>());
    json m = t.at("map");
    if (!m.contains("dim")) m["dim"] = at.dim;
    tr.map = BaseMap::from_json(m);
    tr.points = t.value("points", std::vector<std::vector<double>>{});
    at.transitions.push_back(tr);
  }
  return at;
}

json Atlas::to_json() const {
  json t = json::array();
  for (const auto& tr : transitions)
    t.push_back({{"alpha", charts[tr.a]}, {"beta", charts[tr.b]}, {"map", tr.map.to_json()}, {"points", tr.points}});
  return {{"dim", dim}, {"charts", charts}, {"transitions", t}};
}

// --- transitions

std::vector<Series> jet_transition(const WeylAlgebra& A, const BaseMap& g, const std::vector<double>& point,
                                   const std::vector<std::string>& base_params) {
  if (g.dim != A.n) throw Error("jet_transition: dimension mismatch");
  std::vector<Series> shift = param_shifts(A, base_params, A.n), moved;
  for (int k = 0; k < A.n; ++k) moved.push_back(shift[k] + A.xhat(k));
  std::vector<Series> G = g.evaluate(point, moved), G0 = g.evaluate(point, shift);
  for (int k = 0; k < A.n; ++k) G[k] -= G0[k];
  SeriesMatrix J = jacobian(G, A.x);
  Series det = determinant(J);
  if (std::abs(det.constant_term()) < 1e-12) throw Error("jet_transition: singular Jacobian at the point");
  return G;
}

Series CotangentTransition::apply(const WeylAlgebra& A, const Series& w) const {
  return k_conjugate(work, k, w.relayout(work.layout)).relayout(A.layout);
}

Series CotangentTransition::apply_factored(const WeylAlgebra& A, const Series& w) const {
  const WeylAlgebra& W = work;
  KGroupElement lin;
  lin.density_weight = k.density_weight;
  lin.multiplier = W.zero();
  SeriesMatrix J = jacobian(k.diffeo, W.x);
  for (int i = 0; i < W.n; ++i) {
    Series s = W.zero();
    for (int j = 0; j < W.n; ++j) {
      Series c = J[i][j];
      for (auto v : W.x) c = c.drop_var(v);
      s += c * W.xhat(j);
    }
    lin.diffeo.push_back(s);
  }
  return k_conjugate(W, higher, k_conjugate(W, lin, w.relayout(W.layout))).relayout(A.layout);
}

CotangentTransition cotangent_weyl_transition(const WeylAlgebra& A, const BaseMap& g, const std::vector<double>& x,
                                              const std::vector<double>& xi,
                                              const std::vector<std::string>& base_params) {
  const int n = A.n;
  if (g.dim != n || static_cast<int>(xi.size()) != n) throw Error("cotangent_weyl_transition: dimension mismatch");
  if (!base_params.empty() && static_cast<int>(base_params.size()) != 2 * n)
    throw Error("cotangent_weyl_transition: need 2n base parameters");
  CotangentTransition t;
  // one extra order so that first derivatives are exact to the cap
  t.work = A.with_cap(A.layout->cap + 1);
  const WeylAlgebra& W = t.work;
  std::vector<Series> shift = param_shifts(W, base_params, 2 * n);
  std::vector<Series> dx(shift.begin(), shift.begin() + n), moved;
  for (int k = 0; k < n; ++k) moved.push_back(dx[k] + W.xhat(k));
  std::vector<Series> G = g.evaluate(x, moved), G0 = g.evaluate(x, dx);

  t.x_a = g.at(x);
  std::vector<Series> diffeo;
  for (int k = 0; k < n; ++k) diffeo.push_back(G[k] - G0[k]);
  SeriesMatrix Jx = jacobian(diffeo, W.x);  // g'(b + x-hat)
  SeriesMatrix Jb = Jx;
  for (auto& row : Jb)
    for (auto& s : row)
      for (auto v : W.x) s = s.drop_var(v);
  if (std::abs(determinant(Jb).constant_term()) < 1e-12) throw Error("cotangent_weyl_transition: singular Jacobian");
  SeriesMatrix Jb_inv = inverse(Jb), Jx_inv = inverse(Jx);

  std::vector<Series> p, xi_a(n, W.zero());
  for (int k = 0; k < n; ++k) p.push_back(W.constant(xi[k]) + shift[n + k]);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j) xi_a[k] += Jb_inv[j][k] * p[j];
  for (int k = 0; k < n; ++k) t.xi_a.push_back(xi_a[k].constant_term().real());

  // q = -(i/h) xi_a . (g(b + x-hat) - g(b) - g'(b) x-hat)
  Series r = W.zero();
  for (int k = 0; k < n; ++k) {
    Series lin = W.zero();
    for (int j = 0; j < n; ++j) lin += Jb[k][j] * W.xhat(j);
    r += xi_a[k] * (diffeo[k] - lin);
  }
  t.k.diffeo = diffeo;
  t.k.multiplier = W.times_ih(r, -1);

  for (int k = 0; k < n; ++k) t.classical.push_back(diffeo[k].relayout(A.layout));
  for (int k = 0; k < n; ++k) {
    Series s = W.zero();
    for (int j = 0; j < n; ++j) s += Jx_inv[j][k] * (p[j] + W.xihat(j));
    t.classical.push_back((s - xi_a[k]).relayout(A.layout));
  }

  t.linear = constant_matrix(Jb);
  t.higher.multiplier = t.k.multiplier;
  for (int i = 0; i < n; ++i) {
    Series s = W.zero();
    for (int j = 0; j < n; ++j) s += Jb_inv[i][j] * diffeo[j];
    t.higher.diffeo.push_back(s);
  }
  return t;
}

double transition_cocycle_residual(const WeylAlgebra& A, const Atlas& atlas, int a, int b, int c,
                                   const std::vector<double>& x, const std::vector<double>& xi) {
  CotangentTransition bc = cotangent_weyl_transition(A, map_or_identity(atlas, b, c), x, xi);
  CotangentTransition ab = cotangent_weyl_transition(A, map_or_identity(atlas, a, b), bc.x_a, bc.xi_a);
  CotangentTransition ac = cotangent_weyl_transition(A, map_or_identity(atlas, a, c), x, xi);
  double r = 0;
  for (int k = 0; k < A.n; ++k)
    for (const Series& w : {A.xhat(k), A.xihat(k)})
      r = std::max(r, distance(bc.apply(A, ab.apply(A, w)), ac.apply(A, w)));
  return r;
}

// --- connections

std::vector<Series> ConnectionData::apply(const WeylAlgebra& A, const Series& section) const {
  std::vector<Series> out;
  for (std::size_t i = 0; i < base.size(); ++i)
    out.push_back(section.derivative(param_index(A, base[i])) + bracket_over_ih(A, coeff.at(i), section));
  return out;
}

json ConnectionData::to_json() const {
  json c = json::array();
  for (const auto& s : coeff) c.push_back(s.to_json());
  return {{"base", base}, {"lifted", lifted}, {"coeff", c}};
}

ConnectionData ConnectionData::from_json(const json& j, const WeylAlgebra& A) {
  ConnectionData d;
  d.base = j.at("base").get<std::vector<std::string>>();
  d.lifted = j.value("lifted", true);
  for (const auto& s : j.at("coeff")) d.coeff.push_back(Series::from_json(s).relayout(A.layout));
  if (d.coeff.size() != d.base.size()) throw Error("connection: one coefficient per base coordinate");
  for (const auto& b : d.base) param_index(A, b);
  return d;
}

std::vector<std::string> base_names(const std::string& prefix, int n) {
  std::vector<std::string> v;
  for (int k = 1; k <= n; ++k) v.push_back(prefix + std::to_string(k));
  return v;
}

std::vector<std::string> cotangent_base_names(int n) {
  std::vector<std::string> v = base_names("bx", n), p = base_names("bp", n);
  v.insert(v.end(), p.begin(), p.end());
  return v;
}

ConnectionData canonical_connection(const WeylAlgebra& A, const std::vector<std::string>& base) {
  if (static_cast<int>(base.size()) != 2 * A.n) throw Error("canonical_connection: need 2n base coordinates");
  ConnectionData c;
  c.base = base;
  for (int k = 0; k < A.n; ++k) c.coeff.push_back(-1.0 * A.xihat(k));
  for (int k = 0; k < A.n; ++k) c.coeff.push_back(A.xhat(k));
  return c;
}

std::vector<Series> canonical_connection_apply(const WeylAlgebra& A, const Series& section,
                                               const std::vector<std::string>& base, ConnectionModel model) {
  if (model == ConnectionModel::CotangentWeyl) return canonical_connection(A, base).apply(A, section);
  if (static_cast<int>(base.size()) != A.n) throw Error("canonical_connection_apply: need n base coordinates");
  std::vector<Series> out;
  for (int k = 0; k < A.n; ++k) out.push_back(section.derivative(param_index(A, base[k])) - section.derivative(A.x[k]));
  return out;
}

Series prolongation(const WeylAlgebra& A, const Series& u, const std::vector<double>& point,
                    const std::vector<std::string>& base, ConnectionModel model) {
  const int dim = model == ConnectionModel::Jet ? A.n : 2 * A.n;
  if (static_cast<int>(base.size()) != dim || static_cast<int>(point.size()) != dim ||
      static_cast<int>(u.nvars()) != dim)
    throw Error("prolongation: dimension mismatch");
  std::vector<Series> args;
  for (int k = 0; k < dim; ++k) {
    Series f = k < A.n ? A.xhat(k) : A.xihat(k - A.n);
    args.push_back(A.constant(point[k]) + A.param(base[k]) + f);
  }
  return eval_poly(u, args);
}

bool FedosovReport::ok(double tol) const {
  return grading && normalization && flat && flatness_residual < tol && theta_closed && symplectic_residual < tol &&
         higher_residual < tol;
}

json FedosovReport::to_json() const {
  return {{"grading", grading},
          {"normalization", normalization},
          {"flat", flat},
          {"flatness_residual", flatness_residual},
          {"theta", matrix_json(theta)},
          {"theta_closed", theta_closed},
          {"symplectic_residual", symplectic_residual},
          {"higher_residual", higher_residual},
          {"failure", failure}};
}

FedosovReport check_fedosov(const WeylAlgebra& A, const ConnectionData& conn, double tol) {
  const int n = A.n, m = static_cast<int>(conn.base.size());
  if (m != 2 * n || static_cast<int>(conn.coeff.size()) != m) throw Error("check_fedosov: malformed connection data");
  FedosovReport r;
  std::vector<std::size_t> p;
  for (const auto& b : conn.base) p.push_back(param_index(A, b));

  for (int i = 0; i < m; ++i)
    for (const auto& [e, c] : conn.coeff[i].terms()) {
      (void)c;
      if (e[A.h] < 0) {
        r.grading = false;
        r.failure = "negative power of h in coefficient " + conn.base[i];
      }
    }
  if (!r.grading) throw Error("check_fedosov: malformed grading: " + r.failure);

  for (int i = 0; i < m; ++i) {
    Series lin = A.zero();
    for (const auto& [e, c] : conn.coeff[i].terms())
      if (A.formal_degree(e) == 1) lin.add(e, c);
    Series expect = i < n ? -1.0 * A.xihat(i) : A.xhat(i - n);
    if (distance(lin, expect) > tol) {
      r.normalization = false;
      r.failure = "A_{-1} does not match -omega along " + conn.base[i];
    }
  }

  r.theta.assign(m, std::vector<Series>(m, A.zero()));
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      Series F = conn.coeff[j].derivative(p[i]) - conn.coeff[i].derivative(p[j]) +
                 bracket_over_ih(A, conn.coeff[i], conn.coeff[j]);
      F = truncated(F, 1);
      double res = noncentral_part(A, F).max_abs();
      r.flatness_residual = std::max(r.flatness_residual, res);
      r.theta[i][j] = central_part(A, F);
      r.theta[j][i] = -r.theta[i][j];
    }
  r.flat = r.flatness_residual < tol;
  if (!r.flat && r.failure.empty()) r.failure = "curvature has a non-central part";

  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      for (int k = j + 1; k < m; ++k) {
        Series d = r.theta[j][k].derivative(p[i]) + r.theta[k][i].derivative(p[j]) + r.theta[i][j].derivative(p[k]);
        if (truncated(d, 2).max_abs() > tol) r.theta_closed = false;
      }

  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      const Series& t = r.theta[i][j];
      Series leading = t.slice(A.h, 0);
      double expect = (j == i + n && i < n) ? -1.0 : 0.0;
      r.symplectic_residual = std::max(r.symplectic_residual, distance(leading, A.constant(expect)));
      r.higher_residual = std::max(r.higher_residual, (t - leading).max_abs());
    }
  if (!conn.lifted) r.symplectic_residual = r.higher_residual = 0;
  return r;
}

// --- gauge group

Series bch(const WeylAlgebra& A, const Series& a, const Series& b) {
  require_raising(A, a, "bch");
  require_raising(A, b, "bch");
  const int K = std::max(1, A.layout->cap);
  // Dynkin coefficients on right-nested words in X (0) and Y (1).
  std::map<std::vector<int>, double> coef;
  std::vector<double> fact(K + 1, 1.0);
  for (int k = 1; k <= K; ++k) fact[k] = fact[k - 1] * k;
  std::vector<std::pair<int, int>> blocks;
  std::function<void(int)> rec = [&](int used) {
    if (!blocks.empty()) {
      const int nb = static_cast<int>(blocks.size());
      std::vector<int> word;
      double den = used;
      for (auto [r, s] : blocks) {
        word.insert(word.end(), r, 0);
        word.insert(word.end(), s, 1);
        den *= fact[r] * fact[s];
      }
      coef[word] += ((nb % 2) ? 1.0 : -1.0) / nb / den;
    }
    for (int t = 1; used + t <= K; ++t)
      for (int r = 0; r <= t; ++r) {
        blocks.push_back({r, t - r});
        rec(used + t);
        blocks.pop_back();
      }
  };
  rec(0);
  std::map<std::vector<int>, Series> nested;
  std::function<const Series&(const std::vector<int>&)> value = [&](const std::vector<int>& w) -> const Series& {
    auto it = nested.find(w);
    if (it != nested.end()) return it->second;
    Series v = A.zero();
    if (w.size() == 1) {
      v = w[0] ? b : a;
    } else {
      const Series& rest = value(std::vector<int>(w.begin() + 1, w.end()));
      if (!rest.is_zero()) v = bracket_over_ih(A, w[0] ? b : a, rest);
    }
    return nested.emplace(w, v).first->second;
  };
  Series z = A.zero();
  for (const auto& [w, c] : coef)
    if (std::abs(c) > 0) z += value(w) * c;
  return z;
}

Series exp_log_derivative(const WeylAlgebra& A, const Series& sigma, std::size_t p) {
  return nested_bracket_sum(A, sigma, sigma.derivative(p), [](int k) {
    double f = 1;
    for (int j = 2; j <= k + 1; ++j) f *= j;
    return 1.0 / f;
  });
}

ConnectionData gauge_transform(const WeylAlgebra& A, const ConnectionData& conn, const Series& sigma) {
  require_raising(A, sigma, "gauge_transform");
  ConnectionData out = conn;
  for (std::size_t i = 0; i < conn.base.size(); ++i)
    out.coeff[i] = exp_ad(A, sigma, conn.coeff[i]) - exp_log_derivative(A, sigma, param_index(A, conn.base[i]));
  return out;
}

double connection_distance(const ConnectionData& a, const ConnectionData& b) {
  if (a.base != b.base) throw Error("connection_distance: different base coordinates");
  double r = 0;
  for (std::size_t i = 0; i < a.coeff.size(); ++i)
    r = std::max(r, truncated(a.coeff[i] - b.coeff[i], 1).max_abs());
  return r;
}

// --- L-compatibility

bool LCompatReport::ok() const {
  return preserved && std::all_of(sigma_in_gL.begin(), sigma_in_gL.end(), [](bool b) { return b; });
}

json LCompatReport::to_json() const {
  return {{"preserved", preserved},
          {"failing_generator", failing_generator},
          {"failing_direction", failing_direction},
          {"residual", residual},
          {"sigma_in_gL", sigma_in_gL}};
}

namespace {

double graph_ideal_residual(const WeylAlgebra& A, const Series& w, const std::vector<std::vector<Series>>& S) {
  Series q = A.zero();
  for (int i = 0; i < A.n; ++i)
    for (int j = 0; j < A.n; ++j) q += S[i][j] * A.xhat(i) * A.xhat(j) * 0.5;
  Series back = exp_ad(A, -1.0 * q, w);
  Series N = weyl_quantize(A, back);
  double r = 0;
  for (const auto& [e, c] : N.terms())
    if (A.xi_degree(e) == 0) r = std::max(r, std::abs(c));
  return r;
}

Series rational_poly_series(const RationalPoly& F, const std::vector<Series>& args) {
  Series r(args.at(0).layout_ptr());
  for (const auto& [e, c] : F.terms) {
    Series t = Series::constant(args[0].layout_ptr(), to_double(c));
    for (std::size_t k = 0; k < e.size(); ++k)
      for (int q = 0; q < e[k]; ++q) t = t * args[k];
    r += t;
  }
  return r;
}

}  // namespace

bool in_graph_ideal(const WeylAlgebra& A, const Series& w, const std::vector<std::vector<Series>>& S) {
  return graph_ideal_residual(A, w, S) < 1e-8;
}

LCompatReport check_L_compatible(const WeylAlgebra& A, const ConnectionData& conn, const LagrangianChartData& L,
                                 const std::vector<double>& x, const std::vector<Series>& sigmas) {
  const int n = A.n;
  if (L.n != n || static_cast<int>(conn.base.size()) != 2 * n || static_cast<int>(x.size()) != n)
    throw Error("check_L_compatible: mismatched atlases");
  if (!L.xi_free.empty()) throw Error("check_L_compatible: only graph-type Lagrangian charts are supported");
  std::vector<std::string> bx(conn.base.begin(), conn.base.begin() + n), bp(conn.base.begin() + n, conn.base.end());
  std::vector<Series> args;
  for (int k = 0; k < n; ++k) args.push_back(A.constant(x[k]) + A.param(bx[k]));
  std::vector<std::vector<Series>> S(n, std::vector<Series>(n));
  std::vector<Series> dxi;
  for (int i = 0; i < n; ++i) {
    RationalPoly Fi = L.F.derivative(i);
    Series v = rational_poly_series(Fi, args);
    dxi.push_back(v - A.constant(v.constant_term()));
    for (int j = 0; j < n; ++j) S[i][j] = rational_poly_series(Fi.derivative(j), args);
  }
  auto on_L = [&](const Series& f) { return substitute_params(A, f, bp, dxi); };

  LCompatReport r;
  for (int k = 0; k < n; ++k) {
    Series ell = A.xihat(k);
    for (int j = 0; j < n; ++j) ell -= S[k][j] * A.xhat(j);
    for (int i = 0; i < n; ++i) {
      Series a = conn.coeff[i];
      Series d = ell.derivative(param_index(A, bx[i]));
      for (int j = 0; j < n; ++j) {
        a += S[i][j] * conn.coeff[n + j];
        d += S[i][j] * ell.derivative(param_index(A, bp[j]));
      }
      Series v = truncated(on_L(d + bracket_over_ih(A, a, ell)), 1);
      double res = graph_ideal_residual(A, v, S);
      if (res > r.residual) r.residual = res;
      if (res > 1e-8 && r.preserved) {
        r.preserved = false;
        r.failing_generator = k;
        r.failing_direction = i;
      }
    }
  }
  for (const auto& s : sigmas) r.sigma_in_gL.push_back(graph_ideal_residual(A, on_L(s), S) < 1e-8);
  return r;
}

// --- lifted cocycle

json LiftedCocycleReport::to_json() const {
  return {{"residual", residual}, {"per_direction", per_direction}, {"location", location}};
}

LiftedCocycleReport check_lifted_cocycle(const WeylAlgebra& A, const BaseMap& g_ab, const ConnectionData& conn_a,
                                         const ConnectionData& conn_b, const std::vector<double>& x,
                                         const std::vector<double>& xi, const std::string& location) {
  CotangentTransition t = cotangent_weyl_transition(A, g_ab, x, xi, conn_b.base);
  return check_lifted_cocycle(A, g_ab, t, conn_a, conn_b, x, xi, location);
}

LiftedCocycleReport check_lifted_cocycle(const WeylAlgebra& A, const BaseMap& g_ab, const CotangentTransition& lift,
                                         const ConnectionData& conn_a, const ConnectionData& conn_b,
                                         const std::vector<double>& x, const std::vector<double>& xi,
                                         const std::string& location) {
  const int n = A.n;
  if (conn_a.base.size() != conn_b.base.size() || static_cast<int>(conn_b.base.size()) != 2 * n ||
      lift.work.n != n || lift.work.layout->cap != A.layout->cap + 1)
    throw Error("check_lifted_cocycle: non-composable lifting data");
  const WeylAlgebra& W = lift.work;
  // Chart a base point as a jet in chart b's base parameters.
  std::vector<Series> dx, dp;
  for (int k = 0; k < n; ++k) {
    dx.push_back(W.param(conn_b.base[k]));
    dp.push_back(W.param(conn_b.base[n + k]));
  }
  std::vector<Series> xa = g_ab.evaluate(x, dx);
  std::vector<Series> moved;
  for (int k = 0; k < n; ++k) moved.push_back(dx[k] + W.xhat(k));
  std::vector<Series> G = g_ab.evaluate(x, moved);
  for (int k = 0; k < n; ++k) G[k] -= xa[k];
  SeriesMatrix Jb = jacobian(G, W.x);
  for (auto& row : Jb)
    for (auto& s : row)
      for (auto v : W.x) s = s.drop_var(v);
  SeriesMatrix Jinv = inverse(Jb);
  std::vector<Series> ya;  // shifts of chart a coordinates
  for (int k = 0; k < n; ++k) ya.push_back(xa[k] - W.constant(xa[k].constant_term()));
  for (int k = 0; k < n; ++k) {
    Series s = W.zero();
    for (int j = 0; j < n; ++j) s += Jinv[j][k] * (W.constant(xi[j]) + dp[j]);
    ya.push_back(s - W.constant(s.constant_term()));
  }
  std::vector<Series> coeff_a;
  for (const auto& c : conn_a.coeff) coeff_a.push_back(substitute_params(W, c.relayout(W.layout), conn_a.base, ya));

  LiftedCocycleReport r;
  r.location = location;
  for (int j = 0; j < 2 * n; ++j) {
    const std::size_t pj = param_index(W, conn_b.base[j]);
    Series pulled = W.zero();
    for (int z = 0; z < 2 * n; ++z) pulled += coeff_a[z] * ya[z].derivative(pj);
    Series lhs = conn_b.coeff[j].relayout(W.layout) + k_log_derivative(W, lift.k, conn_b.base[j]);
    Series rhs = k_conjugate(W, lift.k, pulled);
    double d = (lhs - rhs).relayout(A.layout).max_abs();
    r.per_direction.push_back(d);
    r.residual = std::max(r.residual, d);
  }
  return r;
}

// --- stack identities

bool StackReport::ok(double tol) const { return unit_mod_h && horizontal_residual < tol && ad_residual < tol; }

json StackReport::to_json() const {
  return {{"c", to_string(c)},
          {"unit_mod_h", unit_mod_h},
          {"horizontal_residual", horizontal_residual},
          {"ad_residual", ad_residual}};
}

Series stack_element(const WeylAlgebra& A, const Series& sij, const Series& sjk, const Series& sik) {
  return bch(A, bch(A, sij, sjk), -1.0 * sik);
}

StackReport stack_identities(const WeylAlgebra& A, const std::vector<ConnectionData>& conns, const Series& s12,
                             const Series& s23, const Series& s13, double tol) {
  if (conns.size() != 3) throw Error("stack_identities: need three connections");
  auto intertwines = [&](const Series& s, int i, int j) {
    if (connection_distance(gauge_transform(A, conns[j], s), conns[i]) > tol)
      throw Error("stack_identities: sigma_" + std::to_string(i + 1) + std::to_string(j + 1) +
                  " does not intertwine the connections");
  };
  intertwines(s12, 0, 1);
  intertwines(s23, 1, 2);
  intertwines(s13, 0, 2);
  StackReport r;
  r.c = stack_element(A, s12, s23, s13);
  r.unit_mod_h = true;
  for (const auto& [e, c] : r.c.terms()) {
    (void)c;
    if (e[A.h] < 2) r.unit_mod_h = false;
  }
  r.horizontal_residual = connection_distance(gauge_transform(A, conns[0], r.c), conns[0]);
  for (int k = 0; k < A.n; ++k)
    for (const Series& w : {A.xhat(k), A.xihat(k)}) {
      Series lhs = exp_ad(A, s12, exp_ad(A, s23, w));
      Series rhs = exp_ad(A, r.c, exp_ad(A, s13, w));
      // the action on a degree-one generator sees payloads one order past the cap
      r.ad_residual = std::max(r.ad_residual, truncated(lhs - rhs, 1).max_abs());
    }
  return r;
}

double tetrahedron_residual(const WeylAlgebra& A, const Series& s12, const Series& s13, const Series& s14,
                            const Series& s23, const Series& s24, const Series& s34) {
  Series c123 = stack_element(A, s12, s23, s13);
  Series c134 = stack_element(A, s13, s34, s14);
  Series c234 = stack_element(A, s23, s34, s24);
  Series c124 = stack_element(A, s12, s24, s14);
  Series lhs = bch(A, c123, c134);
  Series rhs = bch(A, exp_ad(A, s12, c234), c124);
  return distance(lhs, rhs);
}

}  // namespace jq

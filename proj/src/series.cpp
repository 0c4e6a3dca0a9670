#include "jetquant/series.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace jq {

int Layout::degree(const Exponent& e) const {
  int d = 0;
  for (std::size_t i = 0; i < e.size(); ++i) d += weights[i] * e[i];
  return d;
}

int Layout::index(const std::string& name) const {
  for (std::size_t i = 0; i < vars.size(); ++i)
    if (vars[i] == name) return static_cast<int>(i);
  return -1;
}

bool Layout::same_as(const Layout& o) const {
  return vars == o.vars && weights == o.weights && cap == o.cap;
}

LayoutPtr make_layout(std::vector<std::string> vars, std::vector<int> weights, int cap, double eps) {
  if (vars.size() != weights.size()) throw Error("layout: weights/vars size mismatch");
  for (int w : weights)
    if (w <= 0) throw Error("layout: weights must be positive");
  auto l = std::make_shared<Layout>();
  l->vars = std::move(vars);
  l->weights = std::move(weights);
  l->cap = cap;
  l->eps = eps;
  return l;
}

LayoutPtr make_layout(std::vector<std::string> vars, int cap, double eps) {
  std::vector<int> w;
  for (const auto& v : vars) w.push_back(v == "h" ? 2 : 1);
  return make_layout(std::move(vars), std::move(w), cap, eps);
}

LayoutPtr with_cap(const LayoutPtr& l, int cap) {
  if (l->cap == cap) return l;
  return make_layout(l->vars, l->weights, cap, l->eps);
}

Series::Series(LayoutPtr layout) : layout_(std::move(layout)) {}

Series Series::constant(LayoutPtr layout, cplx c) {
  Series s(layout);
  s.add(Exponent(layout->size(), 0), c);
  return s;
}

Series Series::variable(LayoutPtr layout, std::size_t i, cplx c) {
  Exponent e(layout->size(), 0);
  e.at(i) = 1;
  return monomial(std::move(layout), std::move(e), c);
}

Series Series::variable(LayoutPtr layout, const std::string& name, cplx c) {
  int i = layout->index(name);
  if (i < 0) throw Error("unknown variable " + name);
  return variable(std::move(layout), static_cast<std::size_t>(i), c);
}

Series Series::monomial(LayoutPtr layout, Exponent e, cplx c) {
  Series s(layout);
  if (e.size() != layout->size()) throw Error("monomial: arity mismatch");
  s.add(e, c);
  return s;
}

cplx Series::coeff(const Exponent& e) const {
  auto it = terms_.find(e);
  return it == terms_.end() ? cplx{} : it->second;
}

cplx Series::constant_term() const { return coeff(Exponent(nvars(), 0)); }

void Series::add(const Exponent& e, cplx c) {
  if (layout_->degree(e) > layout_->cap) return;
  auto [it, inserted] = terms_.try_emplace(e, c);
  if (!inserted) it->second += c;
  if (std::abs(it->second) < layout_->eps) terms_.erase(it);
}

void Series::prune() {
  for (auto it = terms_.begin(); it != terms_.end();) {
    if (std::abs(it->second) < layout_->eps || layout_->degree(it->first) > layout_->cap)
      it = terms_.erase(it);
    else
      ++it;
  }
}

int Series::min_degree() const {
  if (terms_.empty()) return 0;
  int m = layout_->degree(terms_.begin()->first);
  for (const auto& [e, c] : terms_) m = std::min(m, layout_->degree(e));
  return m;
}

int Series::max_degree() const {
  int m = 0;
  bool first = true;
  for (const auto& [e, c] : terms_) {
    int d = layout_->degree(e);
    m = first ? d : std::max(m, d);
    first = false;
  }
  return m;
}

double Series::max_abs() const {
  double m = 0;
  for (const auto& [e, c] : terms_) m = std::max(m, std::abs(c));
  return m;
}

Series Series::operator-() const {
  Series r = *this;
  for (auto& [e, c] : r.terms_) c = -c;
  return r;
}

void require_compatible(const Series& a, const Series& b, const char* what) {
  if (a.layout_ptr() == b.layout_ptr()) return;
  if (!a.layout_ptr() || !b.layout_ptr() || !a.layout().same_as(b.layout()))
    throw Error(std::string(what) + ": variable/cap mismatch");
}

Series& Series::operator+=(const Series& o) {
  require_compatible(*this, o, "add");
  for (const auto& [e, c] : o.terms_) add(e, c);
  return *this;
}

Series& Series::operator-=(const Series& o) {
  require_compatible(*this, o, "subtract");
  for (const auto& [e, c] : o.terms_) add(e, -c);
  return *this;
}

Series& Series::operator*=(cplx c) {
  for (auto& [e, v] : terms_) v *= c;
  prune();
  return *this;
}

Series& Series::operator*=(const Series& o) {
  *this = multiply(*this, o);
  return *this;
}

Series operator+(Series a, const Series& b) { return a += b; }
Series operator-(Series a, const Series& b) { return a -= b; }
Series operator*(Series a, cplx c) { return a *= c; }
Series operator*(cplx c, Series a) { return a *= c; }
Series operator*(const Series& a, const Series& b) { return multiply(a, b); }

Series Series::derivative(std::size_t i) const {
  Series r(layout_);
  for (const auto& [e, c] : terms_) {
    if (e[i] == 0) continue;
    Exponent f = e;
    f[i] -= 1;
    r.add(f, c * static_cast<double>(e[i]));
  }
  return r;
}

Series Series::derivative(std::size_t i, int order) const {
  Series r = *this;
  for (int k = 0; k < order; ++k) r = r.derivative(i);
  return r;
}

Series Series::times_monomial(const Exponent& m, cplx c) const {
  Series r(layout_);
  for (const auto& [e, v] : terms_) {
    Exponent f = e;
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += m[i];
    r.add(f, v * c);
  }
  return r;
}

Series Series::homogeneous(int d) const { return degree_range(d, d); }

Series Series::degree_range(int lo, int hi) const {
  Series r(layout_);
  for (const auto& [e, c] : terms_) {
    int d = layout_->degree(e);
    if (d >= lo && d <= hi) r.terms_.emplace(e, c);
  }
  return r;
}

Series Series::drop_var(std::size_t i) const { return slice(i, 0); }

Series Series::slice(std::size_t i, int p) const {
  Series r(layout_);
  for (const auto& [e, c] : terms_)
    if (e[i] == p) r.terms_.emplace(e, c);
  return r;
}

Series Series::relayout(const LayoutPtr& target, const std::vector<int>& map) const {
  Series r(target);
  for (const auto& [e, c] : terms_) {
    Exponent f(target->size(), 0);
    bool keep = true;
    for (std::size_t k = 0; k < e.size(); ++k) {
      if (e[k] == 0) continue;
      if (map[k] < 0) {
        keep = false;
        break;
      }
      f[map[k]] += e[k];
    }
    if (keep) r.add(f, c);
  }
  return r;
}

Series Series::relayout(const LayoutPtr& target) const {
  std::vector<int> map(nvars());
  for (std::size_t k = 0; k < nvars(); ++k) {
    map[k] = target->index(layout_->vars[k]);
    if (map[k] < 0) {
      for (const auto& [e, c] : terms_)
        if (e[k] != 0) throw Error("relayout: variable " + layout_->vars[k] + " missing in target");
    }
  }
  return relayout(target, map);
}

Series Series::conj() const {
  Series r = *this;
  for (auto& [e, c] : r.terms_) c = std::conj(c);
  return r;
}

json Series::to_json() const {
  json t = json::array();
  for (const auto& [e, c] : terms_) t.push_back({{"exp", e}, {"re", c.real()}, {"im", c.imag()}});
  return {{"variables", layout_->vars}, {"weights", layout_->weights}, {"cap", layout_->cap},
          {"terms", t}};
}

Series Series::from_json(const json& j, double eps) {
  auto l = make_layout(j.at("variables").get<std::vector<std::string>>(),
                       j.at("weights").get<std::vector<int>>(), j.at("cap").get<int>(), eps);
  Series s(l);
  for (const auto& t : j.at("terms")) {
    Exponent e = t.at("exp").get<Exponent>();
    if (e.size() != l->size()) throw Error("series json: exponent arity mismatch");
    s.add(e, {t.at("re").get<double>(), t.value("im", 0.0)});
  }
  return s;
}

Series multiply(const Series& a, const Series& b) {
  require_compatible(a, b, "multiply");
  const Layout& l = a.layout();
  Series r(a.layout_ptr());
  std::map<Exponent, cplx> acc;
  Exponent f(l.size());
  for (const auto& [ea, ca] : a.terms()) {
    int da = l.degree(ea);
    for (const auto& [eb, cb] : b.terms()) {
      if (da + l.degree(eb) > l.cap) continue;
      for (std::size_t i = 0; i < f.size(); ++i) f[i] = ea[i] + eb[i];
      acc[f] += ca * cb;
    }
  }
  for (const auto& [e, c] : acc) r.add(e, c);
  return r;
}

Series power(const Series& a, int k) {
  if (k < 0) throw Error("power: negative exponent");
  Series r = Series::constant(a.layout_ptr(), 1.0);
  Series base = a;
  while (k > 0) {
    if (k & 1) r = multiply(r, base);
    k >>= 1;
    if (k) base = multiply(base, base);
  }
  return r;
}

Series exp_series(const Series& a) {
  if (a.is_zero()) return Series::constant(a.layout_ptr(), 1.0);
  if (a.min_degree() < 1) throw Error("exp_series: argument must have positive filtration degree");
  Series r = Series::constant(a.layout_ptr(), 1.0);
  Series term = r;
  for (int k = 1; k <= a.cap() + 1; ++k) {
    term = multiply(term, a) * cplx(1.0 / k);
    if (term.is_zero()) break;
    r += term;
  }
  return r;
}

double distance(const Series& a, const Series& b) {
  require_compatible(a, b, "distance");
  // without the eps pruning of operator-
  std::map<Exponent, cplx> d = a.terms();
  for (const auto& [e, c] : b.terms()) d[e] -= c;
  double m = 0;
  for (const auto& [e, c] : d) m = std::max(m, std::abs(c));
  return m;
}

Series compose(const Series& f, const std::vector<Series>& g) {
  if (g.size() != f.nvars()) throw Error("compose: arity mismatch");
  if (g.empty()) return f;
  const LayoutPtr& out = g[0].layout_ptr();
  for (const auto& gk : g) {
    require_compatible(g[0], gk, "compose");
    if (std::abs(gk.constant_term()) > 0) throw Error("compose: substituted series has a nonzero constant term");
  }
  // Positive powers are built with the cap raised by the weight of the negative factors.
  int extra = 0;
  for (const auto& [e, c] : f.terms()) {
    int w = 0;
    for (std::size_t k = 0; k < e.size(); ++k)
      if (e[k] < 0) {
        if (g[k].terms().size() != 1) throw Error("compose: negative power of a non-monomial");
        w -= e[k] * out->degree(g[k].terms().begin()->first);
      }
    extra = std::max(extra, w);
  }
  const LayoutPtr work = extra > 0 ? with_cap(out, out->cap + extra) : out;
  std::vector<Series> gw;
  for (const auto& gk : g) gw.push_back(extra > 0 ? gk.relayout(work) : gk);

  std::vector<std::map<int, Series>> cache(g.size());
  auto pw = [&](std::size_t k, int p) -> const Series& {
    auto it = cache[k].find(p);
    if (it != cache[k].end()) return it->second;
    if (p < 0) {
      const auto& [e, c] = *gw[k].terms().begin();
      Exponent m = e;
      for (auto& x : m) x *= p;
      return cache[k].emplace(p, Series::monomial(work, m, std::pow(c, p))).first->second;
    }
    if (cache[k].empty() || cache[k].begin()->first > 0) cache[k].emplace(0, Series::constant(work, 1.0));
    int top = cache[k].rbegin()->first;
    for (int q = top + 1; q <= p; ++q) cache[k].emplace(q, multiply(cache[k].at(q - 1), gw[k]));
    return cache[k].at(p);
  };
  Series r(out);
  for (const auto& [e, c] : f.terms()) {
    Series t = Series::constant(work, c);
    for (std::size_t k = 0; k < e.size(); ++k)
      if (e[k] > 0) t = multiply(t, pw(k, e[k]));
    for (std::size_t k = 0; k < e.size(); ++k)
      if (e[k] < 0) t = multiply(t, pw(k, e[k]));
    r += extra > 0 ? t.relayout(out) : t;
  }
  return r;
}

std::vector<Series> identity_map(const LayoutPtr& layout, std::size_t m) {
  std::vector<Series> id;
  for (std::size_t k = 0; k < m; ++k) id.push_back(Series::variable(layout, k));
  return id;
}

std::vector<Series> compose_maps(const std::vector<Series>& g, const std::vector<Series>& h) {
  if (g.empty()) return {};
  const LayoutPtr& l = h.empty() ? g[0].layout_ptr() : h[0].layout_ptr();
  std::vector<Series> full = h;
  for (std::size_t k = h.size(); k < g[0].nvars(); ++k) full.push_back(Series::variable(l, k));
  std::vector<Series> r;
  for (const auto& gi : g) r.push_back(compose(gi, full));
  return r;
}

std::vector<Series> invert_map(const std::vector<Series>& g) {
  const std::size_t m = g.size();
  if (m == 0) return {};
  const LayoutPtr& l = g[0].layout_ptr();
  Eigen::MatrixXcd M(m, m);
  std::vector<Series> nonlinear;
  for (std::size_t i = 0; i < m; ++i) {
    if (std::abs(g[i].constant_term()) > 0) throw Error("invert_map: nonzero constant term");
    Series n = g[i];
    for (std::size_t j = 0; j < m; ++j) {
      Exponent e(l->size(), 0);
      e[j] = 1;
      M(i, j) = g[i].coeff(e);
      n.add(e, -M(i, j));
    }
    nonlinear.push_back(n);
  }
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M);
  if (std::abs(M.determinant()) <= l->eps) throw Error("invert_map: singular linear part");
  Eigen::MatrixXcd Minv = lu.inverse();
  std::vector<Series> h(m, Series(l));
  std::vector<Series> x = identity_map(l, m);
  for (int it = 0; it <= l->cap; ++it) {
    std::vector<Series> nh = compose_maps(nonlinear, h);
    std::vector<Series> next;
    for (std::size_t i = 0; i < m; ++i) {
      Series s(l);
      for (std::size_t j = 0; j < m; ++j) s += (x[j] - nh[j]) * Minv(i, j);
      next.push_back(s);
    }
    h = std::move(next);
  }
  return h;
}

std::string to_string(const Series& s) {
  std::ostringstream os;
  if (s.is_zero()) return "0";
  bool first = true;
  for (const auto& [e, c] : s.terms()) {
    if (!first) os << " + ";
    first = false;
    os << "(" << c.real();
    if (c.imag() != 0) os << (c.imag() < 0 ? "-" : "+") << std::abs(c.imag()) << "i";
    os << ")";
    for (std::size_t k = 0; k < e.size(); ++k) {
      if (e[k] == 0) continue;
      os << "*" << s.layout().vars[k];
      if (e[k] != 1) os << "^" << e[k];
    }
  }
  return os.str();
}

}  // namespace jq

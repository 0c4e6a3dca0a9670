#include "jetquant/weyl.hpp"

#include <cmath>
#include <functional>
#include <numeric>

namespace jq {

namespace {

double falling(int a, int k) {
  double r = 1;
  for (int i = 0; i < k; ++i) r *= a - i;
  return r;
}

double factorial(int k) { return falling(k, k); }

// Visits every multi-index 0 <= m <= bound.
void for_each_index(const std::vector<int>& bound, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> m(bound.size(), 0);
  for (;;) {
    fn(m);
    std::size_t j = 0;
    while (j < m.size() && m[j] == bound[j]) m[j++] = 0;
    if (j == m.size()) return;
    ++m[j];
  }
}

cplx ipow(int k) {
  static const cplx p[4] = {1.0, cplx(0, 1), -1.0, cplx(0, -1)};
  return p[((k % 4) + 4) % 4];
}

// exp(c h d_x . d_xi) applied termwise.
Series order_change(const WeylAlgebra& A, const Series& f, cplx c) {
  Series r(A.layout);
  std::vector<int> bound(A.n);
  for (const auto& [e, v] : f.terms()) {
    for (int j = 0; j < A.n; ++j) bound[j] = std::min(e[A.x[j]], e[A.xi[j]]);
    for_each_index(bound, [&](const std::vector<int>& k) {
      Exponent g = e;
      double coef = 1;
      int total = 0;
      for (int j = 0; j < A.n; ++j) {
        coef *= falling(e[A.x[j]], k[j]) * falling(e[A.xi[j]], k[j]) / factorial(k[j]);
        g[A.x[j]] -= k[j];
        g[A.xi[j]] -= k[j];
        total += k[j];
      }
      g[A.h] += total;
      r.add(g, v * coef * std::pow(c, total));
    });
  }
  return r;
}

}  // namespace

WeylAlgebra WeylAlgebra::make(int n, int cap, const std::vector<std::string>& params, double eps) {
  WeylAlgebra A;
  A.n = n;
  std::vector<std::string> vars;
  std::vector<int> weights;
  for (int k = 1; k <= n; ++k) {
    A.x.push_back(vars.size());
    vars.push_back("x" + std::to_string(k));
    weights.push_back(1);
  }
  for (int k = 1; k <= n; ++k) {
    A.xi.push_back(vars.size());
    vars.push_back("xi" + std::to_string(k));
    weights.push_back(1);
  }
  A.h = vars.size();
  vars.push_back("h");
  weights.push_back(2);
  for (const auto& p : params) {
    A.params.push_back(vars.size());
    vars.push_back(p);
    weights.push_back(1);
  }
  A.layout = make_layout(vars, weights, cap, eps);
  return A;
}

WeylAlgebra WeylAlgebra::with_cap(int cap) const {
  WeylAlgebra B = *this;
  B.layout = jq::with_cap(layout, cap);
  return B;
}

Series WeylAlgebra::times_ih(const Series& f, int p) const {
  Exponent e(layout->size(), 0);
  e[h] = p;
  return f.times_monomial(e, ipow(p));
}

int WeylAlgebra::formal_degree(const Exponent& e) const {
  int d = 2 * e[h];
  for (int j = 0; j < n; ++j) d += e[x[j]] + e[xi[j]];
  return d;
}

int WeylAlgebra::xi_degree(const Exponent& e) const {
  int d = 0;
  for (int j = 0; j < n; ++j) d += e[xi[j]];
  return d;
}

int WeylAlgebra::x_degree(const Exponent& e) const {
  int d = 0;
  for (int j = 0; j < n; ++j) d += e[x[j]];
  return d;
}

bool WeylAlgebra::is_function(const Series& f) const {
  for (const auto& [e, c] : f.terms())
    if (xi_degree(e) > 0) return false;
  return true;
}

json weyl_to_json(const Series& f) {
  json j = f.to_json();
  j["role"] = "weyl";
  return j;
}

Series weyl_from_json(const WeylAlgebra& A, const json& j) {
  if (j.value("role", std::string()) != "weyl") throw Error("weyl element: wrong role tag");
  return Series::from_json(j, A.layout->eps).relayout(A.layout);
}

Series moyal_star(const WeylAlgebra& A, const Series& f, const Series& g) {
  require_compatible(f, g, "moyal_star");
  const Layout& l = *A.layout;
  if (!f.layout().same_as(l)) throw Error("moyal_star: layout is not the Weyl layout");
  std::map<Exponent, cplx> acc;
  std::vector<int> bound(2 * A.n);
  for (const auto& [ea, ca] : f.terms()) {
    const int da = l.degree(ea);
    for (const auto& [eb, cb] : g.terms()) {
      if (da + l.degree(eb) > l.cap) continue;
      for (int j = 0; j < A.n; ++j) {
        bound[j] = std::min(ea[A.xi[j]], eb[A.x[j]]);          // alpha: d_xi f, d_x g
        bound[A.n + j] = std::min(ea[A.x[j]], eb[A.xi[j]]);    // beta: d_x f, d_xi g
      }
      for_each_index(bound, [&](const std::vector<int>& m) {
        Exponent e(ea.size());
        for (std::size_t k = 0; k < e.size(); ++k) e[k] = ea[k] + eb[k];
        double coef = 1;
        int order = 0, sign = 0;
        for (int j = 0; j < A.n; ++j) {
          const int a = m[j], b = m[A.n + j];
          coef *= falling(ea[A.xi[j]], a) * falling(eb[A.x[j]], a) / factorial(a);
          coef *= falling(ea[A.x[j]], b) * falling(eb[A.xi[j]], b) / factorial(b);
          e[A.x[j]] -= a + b;
          e[A.xi[j]] -= a + b;
          order += a + b;
          sign += b;
        }
        e[A.h] += order;
        cplx c = ca * cb * coef * ipow(order) * std::pow(0.5, order) * (sign % 2 ? -1.0 : 1.0);
        acc[e] += c;
      });
    }
  }
  Series r(A.layout);
  for (const auto& [e, c] : acc) r.add(e, c);
  return r;
}

Series commutator(const WeylAlgebra& A, const Series& f, const Series& g) {
  return moyal_star(A, f, g) - moyal_star(A, g, f);
}

Series poisson_bracket(const WeylAlgebra& A, const Series& f, const Series& g) {
  Series r(A.layout);
  for (int j = 0; j < A.n; ++j) {
    r += f.derivative(A.xi[j]) * g.derivative(A.x[j]);
    r -= f.derivative(A.x[j]) * g.derivative(A.xi[j]);
  }
  return r;
}

Series bracket_over_ih(const WeylAlgebra& A, const Series& f, const Series& g) {
  WeylAlgebra W = A.with_cap(A.layout->cap + 2);
  Series c = commutator(W, f.relayout(W.layout), g.relayout(W.layout));
  return W.times_ih(c, -1).relayout(A.layout);
}

Series weyl_quantize(const WeylAlgebra& A, const Series& f) { return order_change(A, f, cplx(0, 0.5)); }

Series weyl_symbol(const WeylAlgebra& A, const Series& normal) {
  return order_change(A, normal, cplx(0, -0.5));
}

Series normal_compose(const WeylAlgebra& A, const Series& a, const Series& b) {
  require_compatible(a, b, "normal_compose");
  const Layout& l = *A.layout;
  std::map<Exponent, cplx> acc;
  std::vector<int> bound(A.n);
  for (const auto& [ea, ca] : a.terms()) {
    const int da = l.degree(ea);
    for (const auto& [eb, cb] : b.terms()) {
      if (da + l.degree(eb) > l.cap) continue;
      for (int j = 0; j < A.n; ++j) bound[j] = std::min(ea[A.xi[j]], eb[A.x[j]]);
      for_each_index(bound, [&](const std::vector<int>& m) {
        Exponent e(ea.size());
        for (std::size_t k = 0; k < e.size(); ++k) e[k] = ea[k] + eb[k];
        double coef = 1;
        int order = 0;
        for (int j = 0; j < A.n; ++j) {
          coef *= falling(ea[A.xi[j]], m[j]) * falling(eb[A.x[j]], m[j]) / factorial(m[j]);
          e[A.xi[j]] -= m[j];
          e[A.x[j]] -= m[j];
          order += m[j];
        }
        e[A.h] += order;
        acc[e] += ca * cb * coef * ipow(order);
      });
    }
  }
  Series r(A.layout);
  for (const auto& [e, c] : acc) r.add(e, c);
  return r;
}

Series apply_normal(const WeylAlgebra& A, const Series& op, const Series& f) {
  require_compatible(op, f, "apply_normal");
  if (!A.is_function(f)) throw Error("apply_normal: argument depends on xi-hat");
  Series r(A.layout);
  for (const auto& [e, c] : op.terms()) {
    Series d = f;
    int order = 0;
    for (int j = 0; j < A.n; ++j) {
      d = d.derivative(A.x[j], e[A.xi[j]]);
      order += e[A.xi[j]];
    }
    Exponent m = e;
    for (int j = 0; j < A.n; ++j) m[A.xi[j]] = 0;
    m[A.h] += order;
    r += d.times_monomial(m, c * ipow(order));
  }
  return r;
}

Series exp_ad(const WeylAlgebra& A, const Series& payload, const Series& f) {
  if (payload.is_zero()) return f;
  const int raise = payload.min_degree() - 2;
  const int span = A.layout->cap - (f.is_zero() ? 0 : f.min_degree());
  const int bound = raise >= 1 ? span / raise + 1 : A.layout->cap + 2;
  Series result = f;
  Series term = f;
  for (int k = 1; k <= bound; ++k) {
    term = bracket_over_ih(A, payload, term) * cplx(1.0 / k);
    if (term.is_zero()) return result;
    result += term;
  }
  if (raise < 1) throw Error("exp_ad: adjoint action does not terminate");
  return result;
}

Series exp_ad(const WeylAlgebra& A, const LieElement& h, const Series& f) { return exp_ad(A, h.payload, f); }

LieClass lie_classify(const WeylAlgebra& A, const Series& payload) {
  LieClass c;
  c.in_P = c.in_N = c.in_k = true;
  std::vector<int> grades;
  for (const auto& [e, v] : payload.terms()) {
    const int d = A.formal_degree(e);
    const int b = A.xi_degree(e);
    const int a = A.x_degree(e);
    const int k = e[A.h];
    grades.push_back(d - 2);
    // h times a constant is central and lies in the quotient by scalars.
    const bool central = (a == 0 && b == 0 && k == 1);
    if (!central && !((b >= 1 && d >= 2) || (k >= 1 && d >= 3))) c.in_P = false;
    if (!central && !(b >= 2 || (k >= 1 && b >= 1) || k >= 2)) c.in_N = false;
    if (!((b == 1 && k == 0 && a >= 2) || (b == 0 && k == 1 && a >= 1))) c.in_k = false;
  }
  std::sort(grades.begin(), grades.end());
  grades.erase(std::unique(grades.begin(), grades.end()), grades.end());
  c.grades = grades;
  return c;
}

SeriesMatrix jacobian(const std::vector<Series>& g, const std::vector<std::size_t>& vars) {
  SeriesMatrix m;
  for (const auto& gi : g) {
    std::vector<Series> row;
    for (auto v : vars) row.push_back(gi.derivative(v));
    m.push_back(row);
  }
  return m;
}

Series determinant(const SeriesMatrix& m) {
  const std::size_t n = m.size();
  if (n == 1) return m[0][0];
  Series d(m[0][0].layout_ptr());
  for (std::size_t j = 0; j < n; ++j) {
    SeriesMatrix minor;
    for (std::size_t i = 1; i < n; ++i) {
      std::vector<Series> row;
      for (std::size_t k = 0; k < n; ++k)
        if (k != j) row.push_back(m[i][k]);
      minor.push_back(row);
    }
    Series t = m[0][j] * determinant(minor);
    if (j % 2) d -= t; else d += t;
  }
  return d;
}

SeriesMatrix inverse(const SeriesMatrix& m) {
  const std::size_t n = m.size();
  Series inv_det = reciprocal(determinant(m));
  SeriesMatrix r(n, std::vector<Series>(n, Series(m[0][0].layout_ptr())));
  if (n == 1) {
    r[0][0] = inv_det;
    return r;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      SeriesMatrix minor;
      for (std::size_t a = 0; a < n; ++a) {
        if (a == j) continue;
        std::vector<Series> row;
        for (std::size_t b = 0; b < n; ++b)
          if (b != i) row.push_back(m[a][b]);
        minor.push_back(row);
      }
      Series c = determinant(minor) * inv_det;
      r[i][j] = ((i + j) % 2) ? -c : c;
    }
  return r;
}

Series reciprocal(const Series& s) {
  cplx c = s.constant_term();
  if (std::abs(c) <= s.layout().eps) throw Error("reciprocal: constant term vanishes");
  Series u = s * (1.0 / c) - Series::constant(s.layout_ptr(), 1.0);
  Series r = Series::constant(s.layout_ptr(), 1.0);
  Series term = r;
  for (int k = 1; k <= s.cap() + 1; ++k) {
    term = -(term * u);
    if (term.is_zero()) break;
    r += term;
  }
  return r * (1.0 / c);
}

Series real_power(const Series& s, double p) {
  cplx c = s.constant_term();
  if (std::abs(c) <= s.layout().eps) throw Error("real_power: constant term vanishes");
  Series u = s * (1.0 / c) - Series::constant(s.layout_ptr(), 1.0);
  Series r = Series::constant(s.layout_ptr(), 1.0);
  Series term = r;
  double binom = 1;
  Series upow = r;
  for (int k = 1; k <= s.cap() + 1; ++k) {
    binom *= (p - (k - 1)) / k;
    upow = upow * u;
    if (upow.is_zero()) break;
    r += upow * binom;
  }
  return r * std::pow(std::abs(c), p);
}

Series log_derivative(const Series& s, std::size_t var) { return s.derivative(var) * reciprocal(s); }

KGroupElement KGroupElement::identity(const WeylAlgebra& A) {
  KGroupElement k;
  for (int j = 0; j < A.n; ++j) k.diffeo.push_back(A.xhat(j));
  k.multiplier = A.zero();
  return k;
}

KGroupElement KGroupElement::linear(const WeylAlgebra& A, const std::vector<std::vector<double>>& B) {
  KGroupElement k;
  for (int i = 0; i < A.n; ++i) {
    Series s = A.zero();
    for (int j = 0; j < A.n; ++j) s += A.xhat(j, B[i][j]);
    k.diffeo.push_back(s);
  }
  k.multiplier = A.zero();
  return k;
}

namespace {

std::vector<Series> full_substitution(const WeylAlgebra& A, const std::vector<Series>& gamma) {
  std::vector<Series> sub = identity_map(A.layout, A.layout->size());
  for (int j = 0; j < A.n; ++j) sub[A.x[j]] = gamma[j];
  return sub;
}

void check_k(const WeylAlgebra& A, const KGroupElement& k) {
  if (static_cast<int>(k.diffeo.size()) != A.n) throw Error("K element: diffeo arity mismatch");
  for (const auto& g : k.diffeo)
    if (!A.is_function(g) || !A.is_function(k.multiplier)) throw Error("K element: depends on xi-hat");
}

}  // namespace

Series k_act(const WeylAlgebra& A, const KGroupElement& k, const Series& f) {
  check_k(A, k);
  if (!A.is_function(f)) throw Error("k_act: argument depends on xi-hat");
  Series det = determinant(jacobian(k.diffeo, A.x));
  Series r = compose(f, full_substitution(A, k.diffeo)) * real_power(det, k.density_weight);
  return exp_series(k.multiplier) * r;
}

KGroupElement k_inverse(const WeylAlgebra& A, const KGroupElement& k) {
  check_k(A, k);
  KGroupElement r;
  r.density_weight = k.density_weight;
  r.diffeo = invert_map(k.diffeo);
  r.multiplier = -compose(k.multiplier, full_substitution(A, r.diffeo));
  return r;
}

std::vector<Series> k_conjugate_xi(const WeylAlgebra& A, const KGroupElement& k) {
  check_k(A, k);
  SeriesMatrix J = jacobian(k.diffeo, A.x);
  SeriesMatrix Jinv = inverse(J);
  Series det = determinant(J);
  Series inv_det = reciprocal(det);
  std::vector<Series> L;
  for (int i = 0; i < A.n; ++i)
    L.push_back(k.multiplier.derivative(A.x[i]) + det.derivative(A.x[i]) * inv_det * k.density_weight);
  std::vector<Series> D;
  for (int j = 0; j < A.n; ++j) {
    Series d = A.zero();
    for (int i = 0; i < A.n; ++i) {
      // (J^{-T})_{ji} = (J^{-1})_{ij}
      d += Jinv[i][j] * (A.xihat(i) - A.times_ih(L[i], 1));
    }
    D.push_back(d);
  }
  return D;
}

Series k_conjugate(const WeylAlgebra& A, const KGroupElement& k, const Series& w) {
  std::vector<Series> D = k_conjugate_xi(A, k);
  Series N = weyl_quantize(A, w);
  std::vector<std::map<int, Series>> gpow(A.n), dpow(A.n);
  auto power_of = [&](std::vector<std::map<int, Series>>& cache, int j, int p, bool normal) -> const Series& {
    auto& c = cache[j];
    if (c.empty()) c.emplace(0, A.constant(1.0));
    for (int q = c.rbegin()->first + 1; q <= p; ++q) {
      const Series& base = normal ? D[j] : k.diffeo[j];
      c.emplace(q, normal ? normal_compose(A, c.at(q - 1), base) : c.at(q - 1) * base);
    }
    return c.at(p);
  };
  Series out = A.zero();
  for (const auto& [e, c] : N.terms()) {
    Series left = A.constant(1.0);
    for (int j = 0; j < A.n; ++j)
      if (e[A.x[j]]) left = left * power_of(gpow, j, e[A.x[j]], false);
    Series right = A.constant(1.0);
    for (int j = 0; j < A.n; ++j)
      if (e[A.xi[j]]) right = normal_compose(A, right, power_of(dpow, j, e[A.xi[j]], true));
    Exponent rest = e;
    for (int j = 0; j < A.n; ++j) rest[A.x[j]] = rest[A.xi[j]] = 0;
    out += (left * right).times_monomial(rest, c);
  }
  return weyl_symbol(A, out);
}

Series k_log_derivative(const WeylAlgebra& A, const KGroupElement& k, const std::string& param) {
  const int p = A.layout->index(param);
  if (p < 0) throw Error("k_log_derivative: unknown parameter " + param);
  std::vector<Series> D = k_conjugate_xi(A, k);
  Series det = determinant(jacobian(k.diffeo, A.x));
  Series dlogm = k.multiplier.derivative(p) + log_derivative(det, p) * k.density_weight;
  Series out = A.times_ih(dlogm, 1);
  for (int j = 0; j < A.n; ++j) out += k.diffeo[j].derivative(p) * D[j];
  return weyl_symbol(A, out);
}

}  // namespace jq

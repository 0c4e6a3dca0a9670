#include "jetquant/maslov.hpp"

#include <algorithm>
#include <set>

namespace jq {

namespace {

std::vector<int> complement(const std::vector<int>& I, int n) {
  std::vector<int> J;
  for (int k = 0; k < n; ++k)
    if (std::find(I.begin(), I.end(), k) == I.end()) J.push_back(k);
  return J;
}

bool contains(const std::vector<int>& v, int k) { return std::find(v.begin(), v.end(), k) != v.end(); }

int rank(RationalMatrix m) {
  const std::size_t rows = m.size(), cols = rows ? m[0].size() : 0;
  int r = 0;
  for (std::size_t c = 0; c < cols && r < static_cast<int>(rows); ++c) {
    std::size_t p = r;
    while (p < rows && m[p][c] == 0) ++p;
    if (p == rows) continue;
    std::swap(m[p], m[r]);
    for (std::size_t i = 0; i < rows; ++i) {
      if (static_cast<int>(i) == r || m[i][c] == 0) continue;
      Rational f = m[i][c] / m[r][c];
      for (std::size_t k = c; k < cols; ++k) m[i][k] -= f * m[r][k];
    }
    ++r;
  }
  return r;
}

RationalMatrix restrict(const RationalMatrix& S, const std::vector<int>& idx) {
  RationalMatrix r(idx.size(), std::vector<Rational>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) r[i][j] = S[idx[i]][idx[j]];
  return r;
}

Rational rpow(const Rational& x, int e) {
  Rational r = 1;
  for (int k = 0; k < e; ++k) r *= x;
  return r;
}

}  // namespace

Inertia inertia(const RationalMatrix& S) {
  RationalMatrix M = S;
  for (std::size_t i = 0; i < M.size(); ++i)
    for (std::size_t j = 0; j < M.size(); ++j)
      if (M[i][j] != M[j][i]) throw Error("inertia: matrix is not symmetric");
  Inertia in;
  while (!M.empty()) {
    const std::size_t m = M.size();
    std::size_t piv = m;
    for (std::size_t i = 0; i < m; ++i)
      if (M[i][i] != 0) {
        piv = i;
        break;
      }
    RationalMatrix next;
    if (piv < m) {
      const Rational p = M[piv][piv];
      (p > 0 ? in.positive : in.negative) += 1;
      for (std::size_t r = 0; r < m; ++r) {
        if (r == piv) continue;
        std::vector<Rational> row;
        for (std::size_t s = 0; s < m; ++s)
          if (s != piv) row.push_back(M[r][s] - M[r][piv] * M[piv][s] / p);
        next.push_back(row);
      }
    } else {
      std::size_t a = m, b = m;
      for (std::size_t i = 0; i < m && a == m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
          if (M[i][j] != 0) {
            a = i;
            b = j;
            break;
          }
      if (a == m) {
        in.zero += static_cast<int>(m);
        break;
      }
      // [[0, c], [c, 0]] has one positive and one negative eigenvalue.
      in.positive += 1;
      in.negative += 1;
      const Rational c = M[a][b];
      for (std::size_t r = 0; r < m; ++r) {
        if (r == a || r == b) continue;
        std::vector<Rational> row;
        for (std::size_t s = 0; s < m; ++s)
          if (s != a && s != b) row.push_back(M[r][s] - (M[r][a] * M[b][s] + M[r][b] * M[a][s]) / c);
        next.push_back(row);
      }
    }
    M = std::move(next);
  }
  return in;
}

int signature(const RationalMatrix& S) {
  Inertia in = inertia(S);
  if (in.zero) throw Error("signature: degenerate matrix");
  return in.positive - in.negative;
}

RationalMatrix rational_identity(int n) {
  RationalMatrix r(n, std::vector<Rational>(n, 0));
  for (int i = 0; i < n; ++i) r[i][i] = 1;
  return r;
}

RationalMatrix multiply(const RationalMatrix& a, const RationalMatrix& b) {
  const std::size_t n = a.size(), m = b.empty() ? 0 : b[0].size(), k = b.size();
  RationalMatrix r(n, std::vector<Rational>(m, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < k; ++l) {
      if (a[i][l] == 0) continue;
      for (std::size_t j = 0; j < m; ++j) r[i][j] += a[i][l] * b[l][j];
    }
  return r;
}

RationalMatrix transpose(const RationalMatrix& a) {
  const std::size_t n = a.size(), m = n ? a[0].size() : 0;
  RationalMatrix r(m, std::vector<Rational>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) r[j][i] = a[i][j];
  return r;
}

std::optional<RationalMatrix> inverse(const RationalMatrix& a) {
  const std::size_t n = a.size();
  RationalMatrix m = a, r = rational_identity(static_cast<int>(n));
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    while (p < n && m[p][c] == 0) ++p;
    if (p == n) return std::nullopt;
    std::swap(m[p], m[c]);
    std::swap(r[p], r[c]);
    const Rational d = m[c][c];
    for (std::size_t k = 0; k < n; ++k) {
      m[c][k] /= d;
      r[c][k] /= d;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (i == c || m[i][c] == 0) continue;
      const Rational f = m[i][c];
      for (std::size_t k = 0; k < n; ++k) {
        m[i][k] -= f * m[c][k];
        r[i][k] -= f * r[c][k];
      }
    }
  }
  return r;
}

RationalMatrix LagrangianFrame::hessian() const {
  const std::size_t p = A.size(), q = C.size();
  RationalMatrix H(p + q, std::vector<Rational>(p + q, 0));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) H[i][j] = A[i][j];
    for (std::size_t j = 0; j < q; ++j) H[i][p + j] = H[p + j][i] = B[i][j];
  }
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < q; ++j) H[p + i][p + j] = C[i][j];
  return H;
}

RationalMatrix LagrangianFrame::basis() const {
  const std::vector<int> J = complement(I, n);
  const RationalMatrix H = hessian();
  const std::size_t p = I.size();
  RationalMatrix b(2 * n, std::vector<Rational>(n, 0));
  for (std::size_t a = 0; a < p; ++a) {
    b[I[a]][a] = 1;                                                        // x_I
    for (int u = 0; u < n; ++u) b[n + I[a]][u] = H[a][u];                  // xi_I = A x_I + B xi_J
  }
  for (std::size_t c = 0; c < J.size(); ++c) {
    b[n + J[c]][p + c] = 1;                                                // xi_J
    for (int u = 0; u < n; ++u) b[J[c]][u] = -H[p + c][u];                 // x_J = -B^t x_I - C xi_J
  }
  return b;
}

LagrangianFrame chart_parameters(const RationalMatrix& basis, std::vector<int> I) {
  const int n = static_cast<int>(basis.size()) / 2;
  if (static_cast<int>(basis.size()) != 2 * n || (n > 0 && static_cast<int>(basis[0].size()) != n))
    throw Error("chart_parameters: basis must be 2n x n");
  std::sort(I.begin(), I.end());
  const std::vector<int> J = complement(I, n);
  RationalMatrix P, D;
  for (int k : I) P.push_back(basis[k]);
  for (int k : J) P.push_back(basis[n + k]);
  for (int k : I) D.push_back(basis[n + k]);
  for (int k : J) D.push_back(basis[k]);
  auto Pi = inverse(P);
  if (!Pi) throw Error("chart_parameters: projection is singular, L is outside the chart");
  RationalMatrix M = multiply(D, *Pi);
  const std::size_t p = I.size(), q = J.size();
  LagrangianFrame f;
  f.n = n;
  f.I = I;
  f.A.assign(p, std::vector<Rational>(p));
  f.B.assign(p, std::vector<Rational>(q));
  f.C.assign(q, std::vector<Rational>(q));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) f.A[i][j] = M[i][j];
    for (std::size_t j = 0; j < q; ++j) f.B[i][j] = M[i][p + j];
  }
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = 0; j < q; ++j) f.C[i][j] = -M[p + i][p + j];
    for (std::size_t j = 0; j < p; ++j)
      if (M[p + i][j] != -f.B[j][i]) throw Error("chart_parameters: subspace is not Lagrangian");
  }
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j)
      if (f.A[i][j] != f.A[j][i]) throw Error("chart_parameters: subspace is not Lagrangian");
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < q; ++j)
      if (f.C[i][j] != f.C[j][i]) throw Error("chart_parameters: subspace is not Lagrangian");
  return f;
}

bool same_subspace(const RationalMatrix& a, const RationalMatrix& b) {
  RationalMatrix ab = a;
  for (std::size_t i = 0; i < ab.size(); ++i) ab[i].insert(ab[i].end(), b[i].begin(), b[i].end());
  const int ra = rank(a);
  return ra == rank(b) && rank(ab) == ra;
}

int linear_cocycle(const RationalMatrix& basis, const std::vector<int>& I, const std::vector<int>& J) {
  LagrangianFrame f = chart_parameters(basis, I);
  const std::vector<int> Ic = complement(f.I, f.n);
  std::vector<int> idx;
  for (std::size_t a = 0; a < f.I.size(); ++a)
    if (!contains(J, f.I[a])) idx.push_back(static_cast<int>(a));
  for (std::size_t c = 0; c < Ic.size(); ++c)
    if (contains(J, Ic[c])) idx.push_back(static_cast<int>(f.I.size() + c));
  Inertia in = inertia(restrict(f.hessian(), idx));
  if (in.zero) throw Error("linear_cocycle: L is outside the chart overlap");
  return in.positive - in.negative;
}

Rational RationalPoly::evaluate(const std::vector<Rational>& p) const {
  if (static_cast<int>(p.size()) != nvars) throw Error("polynomial: point has the wrong dimension");
  Rational s = 0;
  for (const auto& [e, c] : terms) {
    Rational t = c;
    for (int i = 0; i < nvars; ++i) t *= rpow(p[i], e[i]);
    s += t;
  }
  return s;
}

RationalPoly RationalPoly::derivative(int i) const {
  RationalPoly d;
  d.nvars = nvars;
  for (const auto& [e, c] : terms) {
    if (e[i] == 0) continue;
    auto f = e;
    f[i] -= 1;
    d.terms[f] += c * e[i];
  }
  for (auto it = d.terms.begin(); it != d.terms.end();) it = it->second == 0 ? d.terms.erase(it) : std::next(it);
  return d;
}

RationalMatrix RationalPoly::hessian(const std::vector<Rational>& p) const {
  RationalMatrix H(nvars, std::vector<Rational>(nvars));
  for (int i = 0; i < nvars; ++i) {
    RationalPoly di = derivative(i);
    for (int j = i; j < nvars; ++j) H[i][j] = H[j][i] = di.derivative(j).evaluate(p);
  }
  return H;
}

json RationalPoly::to_json() const {
  json t = json::array();
  for (const auto& [e, c] : terms) t.push_back({{"exp", e}, {"c", rational_to_json(c)}});
  return {{"nvars", nvars}, {"terms", t}};
}

RationalPoly RationalPoly::from_json(const json& j) {
  RationalPoly p;
  p.nvars = j.at("nvars");
  for (const auto& t : j.at("terms")) {
    auto e = t.at("exp").get<std::vector<int>>();
    if (static_cast<int>(e.size()) != p.nvars) throw Error("polynomial: exponent arity mismatch");
    Rational c = rational_from_json(t.at("c"));
    if (c != 0) p.terms[e] += c;
  }
  return p;
}

std::vector<int> LagrangianChartData::x_free() const { return complement(xi_free, n); }

RationalMatrix tangent_space(const LagrangianChartData& chart, const std::vector<Rational>& point) {
  const int n = chart.n;
  RationalMatrix H = chart.F.hessian(point);
  RationalMatrix b(2 * n, std::vector<Rational>(n, 0));
  for (int k = 0; k < n; ++k) {
    const bool xi = contains(chart.xi_free, k);
    for (int u = 0; u < n; ++u) {
      if (xi) {
        b[k][u] = -H[k][u];
        b[n + k][u] = (u == k) ? 1 : 0;
      } else {
        b[k][u] = (u == k) ? 1 : 0;
        b[n + k][u] = H[k][u];
      }
    }
  }
  return b;
}

int submanifold_cocycle(const LagrangianChartData& beta, const LagrangianChartData& gamma, OverlapCase c,
                        const std::vector<Rational>& point) {
  if (beta.n != gamma.n) throw Error("submanifold_cocycle: dimension mismatch");
  if (c == OverlapCase::BaseChange) return 0;
  if (beta.base_chart != gamma.base_chart) throw Error("submanifold_cocycle: subdivision change needs a common base chart");
  if (beta.F.nvars != beta.n) throw Error("submanifold_cocycle: generating function arity mismatch");
  std::vector<int> idx;
  for (int k = 0; k < beta.n; ++k)
    if (contains(beta.xi_free, k) != contains(gamma.xi_free, k)) idx.push_back(k);
  Inertia in = inertia(restrict(beta.F.hessian(point), idx));
  if (in.zero) throw Error("submanifold_cocycle: degenerate mixed Hessian");
  return in.positive - in.negative;
}

Rational alpha_cocycle(const PhaseFunction& beta, const PhaseFunction& gamma,
                       const std::vector<std::vector<Rational>>& samples) {
  if (beta.n != gamma.n) throw Error("alpha_cocycle: dimension mismatch");
  const int n = beta.n, mb = beta.phi.nvars - n, mg = gamma.phi.nvars - n;
  std::optional<Rational> value;
  for (const auto& s : samples) {
    if (static_cast<int>(s.size()) != n + mb + mg) throw Error("alpha_cocycle: sample has the wrong dimension");
    std::vector<Rational> pb(s.begin(), s.begin() + n + mb);
    std::vector<Rational> pg(s.begin(), s.begin() + n);
    pg.insert(pg.end(), s.begin() + n + mb, s.end());
    for (int t = 0; t < mb; ++t)
      if (beta.phi.derivative(n + t).evaluate(pb) != 0) throw Error("alpha_cocycle: sample off the critical set of phi_beta");
    for (int t = 0; t < mg; ++t)
      if (gamma.phi.derivative(n + t).evaluate(pg) != 0) throw Error("alpha_cocycle: sample off the critical set of phi_gamma");
    for (int k = 0; k < n; ++k)
      if (beta.phi.derivative(k).evaluate(pb) != gamma.phi.derivative(k).evaluate(pg))
        throw Error("alpha_cocycle: phase functions describe different covectors");
    Rational d = beta.phi.evaluate(pb) - gamma.phi.evaluate(pg);
    if (value && *value != d) throw Error("alpha_cocycle: difference is not locally constant");
    value = d;
  }
  if (!value) throw Error("alpha_cocycle: no samples");
  return *value;
}

json CechReport::to_json() const {
  json j{{"antisymmetric", antisymmetric}, {"cocycle", cocycle}, {"complete", complete},
         {"failing_triples", failing_triples}};
  json m = json::array();
  for (auto [a, b] : missing) m.push_back({a, b});
  j["missing"] = m;
  if (trivialized) j["trivialized"] = *trivialized;
  return j;
}

CechReport verify_cech_cocycle(int charts, const std::vector<CochainValue>& values,
                               std::vector<std::vector<int>> triples,
                               const std::optional<std::vector<Rational>>& cochain) {
  CechReport r;
  std::map<std::pair<int, int>, Rational> c;
  for (const auto& v : values) {
    if (v.a < 0 || v.b < 0 || v.a >= charts || v.b >= charts) throw Error("cech: chart index out of range");
    if (v.a == v.b && v.value != 0) r.antisymmetric = false;
    auto it = c.find({v.b, v.a});
    if (it != c.end() && it->second != -v.value) r.antisymmetric = false;
    c[{v.a, v.b}] = v.value;
  }
  auto get = [&](int a, int b) -> std::optional<Rational> {
    if (a == b) return Rational(0);
    if (auto it = c.find({a, b}); it != c.end()) return it->second;
    if (auto it = c.find({b, a}); it != c.end()) return Rational(-it->second);
    return std::nullopt;
  };
  if (triples.empty()) {
    for (int a = 0; a < charts; ++a)
      for (int b = a + 1; b < charts; ++b)
        for (int d = b + 1; d < charts; ++d)
          if (get(a, b) && get(b, d) && get(a, d)) triples.push_back({a, b, d});
  }
  for (const auto& t : triples) {
    if (t.size() != 3) throw Error("cech: triples must have three entries");
    auto ab = get(t[0], t[1]), bc = get(t[1], t[2]), ca = get(t[2], t[0]);
    if (!ab) r.missing.push_back({t[0], t[1]});
    if (!bc) r.missing.push_back({t[1], t[2]});
    if (!ca) r.missing.push_back({t[2], t[0]});
    if (!ab || !bc || !ca) {
      r.complete = false;
      continue;
    }
    if (*ab + *bc + *ca != 0) {
      r.cocycle = false;
      r.failing_triples.push_back(t);
    }
  }
  if (cochain) {
    if (static_cast<int>(cochain->size()) != charts) throw Error("cech: cochain has the wrong length");
    // c_ab = b_b - b_a
    bool ok = true;
    for (const auto& [k, v] : c)
      if (v != (*cochain)[k.second] - (*cochain)[k.first]) ok = false;
    r.trivialized = ok;
  }
  return r;
}

}  // namespace jq

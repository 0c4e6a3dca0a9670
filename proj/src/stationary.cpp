#include "jetquant/stationary.hpp"

#include <cmath>
#include <numbers>

namespace jq {

namespace {

int fiber_degree(const Exponent& e, const std::vector<std::size_t>& fiber) {
  int d = 0;
  for (auto k : fiber) d += e[k];
  return d;
}

cplx pairing_sum(const Eigen::MatrixXcd& C, Exponent alpha, std::map<Exponent, cplx>& memo) {
  int total = 0;
  for (int a : alpha) total += a;
  if (total == 0) return 1.0;
  if (total % 2) return 0.0;
  auto it = memo.find(alpha);
  if (it != memo.end()) return it->second;
  const Exponent key = alpha;
  std::size_t j = 0;
  while (alpha[j] == 0) ++j;
  alpha[j] -= 1;
  cplx s = 0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    if (alpha[k] == 0) continue;
    Exponent rest = alpha;
    rest[k] -= 1;
    s += C(j, k) * static_cast<double>(alpha[k]) * pairing_sum(C, rest, memo);
  }
  memo.emplace(key, s);
  return s;
}

struct Extended {
  LayoutPtr layout;
  std::vector<std::size_t> fiber;
  std::vector<int> back;  // extended index -> original index, -1 for integrated variables
};

// Appends one dual variable per non-h variable of l.
Extended dual_layout(const Layout& l, int cap) {
  Extended x;
  auto vars = l.vars;
  auto weights = l.weights;
  x.back.assign(l.size(), -1);
  int h = l.hbar();
  if (h >= 0) x.back[h] = h;
  for (std::size_t k = 0; k < l.size(); ++k) {
    if (static_cast<int>(k) == h) continue;
    x.fiber.push_back(k);
    vars.push_back("_dual_" + l.vars[k]);
    weights.push_back(1);
    x.back.push_back(static_cast<int>(k));
  }
  if (h < 0) {
    vars.push_back("h");
    weights.push_back(2);
    x.back.push_back(-1);
  }
  x.layout = make_layout(vars, weights, cap, l.eps);
  return x;
}

Series pairing_phase(const Extended& x, const Series& F) {
  Series phi = F.relayout(x.layout);
  for (std::size_t i = 0; i < x.fiber.size(); ++i) {
    Exponent e(x.layout->size(), 0);
    e[x.fiber[i]] = 1;
    e[F.nvars() + i] = 1;
    phi.add(e, 1.0);
  }
  return phi;
}

}  // namespace

Eigen::MatrixXcd hessian_at_zero(const Series& f, const std::vector<std::size_t>& vars) {
  const std::size_t m = vars.size();
  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) {
      Exponent e(f.nvars(), 0);
      e[vars[i]] += 1;
      e[vars[j]] += 1;
      cplx c = f.coeff(e);
      if (i == j)
        H(i, i) = 2.0 * c;
      else
        H(i, j) = H(j, i) = c;
    }
  return H;
}

cplx wick_pairing_sum(const Eigen::MatrixXcd& C, const Exponent& alpha) {
  std::map<Exponent, cplx> memo;
  return pairing_sum(C, alpha, memo);
}

Series gaussian_moment(const SymmetricMatrix& Q, const Exponent& alpha, int cap) {
  const Eigen::MatrixXcd& q = Q.complex();
  if (static_cast<int>(alpha.size()) != Q.dim()) throw Error("gaussian_moment: arity mismatch");
  if (std::abs(q.determinant()) <= kDefaultEps) throw Error("gaussian_moment: singular quadratic form");
  auto l = make_layout({"h"}, cap);
  int total = 0;
  for (int a : alpha) total += a;
  if (total % 2) return Series(l);
  Eigen::MatrixXcd C = cplx(0, 1) * q.inverse();
  return Series::monomial(l, {total / 2}, wick_pairing_sum(C, alpha));
}

int real_signature(const Eigen::MatrixXd& Q, double eps) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
  int s = 0;
  for (int k = 0; k < Q.rows(); ++k) {
    double v = es.eigenvalues()(k);
    if (std::abs(v) <= eps) throw Error("signature: degenerate form");
    s += v > 0 ? 1 : -1;
  }
  return s;
}

cplx gaussian_prefactor(const Eigen::MatrixXcd& Q) {
  if (Q.size() == 0) return 1.0;
  if (Q.imag().cwiseAbs().maxCoeff() == 0) {
    Eigen::MatrixXd R = Q.real();
    double det = R.determinant();
    if (std::abs(det) <= kDefaultEps) throw Error("degenerate Hessian");
    int sgn = real_signature(R);
    return std::polar(std::pow(std::abs(det), -0.5), std::numbers::pi * sgn / 4.0);
  }
  if (std::abs(Q.determinant()) <= kDefaultEps) throw Error("degenerate Hessian");
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(Q);
  cplx p = 1.0;
  for (int k = 0; k < Q.rows(); ++k) p /= std::sqrt(cplx(0, -1) * es.eigenvalues()(k));
  return p;
}

CriticalPoint critical_point(const Series& phase, const std::vector<std::size_t>& fiber) {
  const LayoutPtr& l = phase.layout_ptr();
  const std::size_t m = fiber.size();
  CriticalPoint cp;
  cp.hessian = hessian_at_zero(phase, fiber);
  if (m > 0 && std::abs(cp.hessian.determinant()) <= l->eps) throw Error("degenerate Hessian");
  Eigen::MatrixXcd Hinv = m > 0 ? Eigen::MatrixXcd(cp.hessian.inverse()) : Eigen::MatrixXcd();
  std::vector<Series> rest;
  for (std::size_t i = 0; i < m; ++i) {
    Series r = phase.derivative(fiber[i]);
    if (std::abs(r.constant_term()) > l->eps) throw Error("critical_point: phase has a linear term in the fiber");
    for (std::size_t j = 0; j < m; ++j) r -= Series::variable(l, fiber[j], cp.hessian(i, j));
    rest.push_back(r);
  }
  std::vector<Series> subst = identity_map(l, l->size());
  cp.point.assign(m, Series(l));
  for (int it = 0; it <= l->cap; ++it) {
    for (std::size_t i = 0; i < m; ++i) subst[fiber[i]] = cp.point[i];
    std::vector<Series> next(m, Series(l));
    for (std::size_t j = 0; j < m; ++j) {
      Series rj = compose(rest[j], subst);
      for (std::size_t i = 0; i < m; ++i) next[i] -= rj * Hinv(i, j);
    }
    cp.point = std::move(next);
  }
  for (std::size_t i = 0; i < m; ++i) subst[fiber[i]] = cp.point[i];
  cp.value = compose(phase, subst);
  return cp;
}

StationaryPhase stationary_phase(const Series& phase, const Series& amplitude,
                                 const std::vector<std::size_t>& fiber) {
  require_compatible(phase, amplitude, "stationary_phase");
  const LayoutPtr& l = phase.layout_ptr();
  const int h = l->hbar();
  if (h < 0) throw Error("stationary_phase: layout has no h");
  const int low = amplitude.is_zero() ? 0 : std::min(0, amplitude.min_degree());
  LayoutPtr w = with_cap(l, l->cap + 2 - low);
  Series phi = phase.relayout(w);
  CriticalPoint cp = critical_point(phi, fiber);

  StationaryPhase out;
  out.hessian = cp.hessian;
  out.prefactor = gaussian_prefactor(cp.hessian);
  out.critical_value = cp.value.relayout(l);
  for (const auto& y : cp.point) out.point.push_back(y.relayout(l));
  out.amplitude = Series(l);
  if (amplitude.is_zero()) return out;

  std::vector<Series> subst = identity_map(w, w->size());
  for (std::size_t i = 0; i < fiber.size(); ++i)
    subst[fiber[i]] = cp.point[i] + Series::variable(w, fiber[i]);
  Series shifted = compose(phi, subst) - cp.value;
  Series cubic(w);
  for (const auto& [e, c] : shifted.terms()) {
    int fd = fiber_degree(e, fiber);
    if (fd <= 1) continue;
    if (fd == 2 && w->degree(e) == 2) continue;
    cubic.add(e, c);
  }
  Exponent inv_h(w->size(), 0);
  inv_h[h] = -1;
  Series P = cubic.times_monomial(inv_h, cplx(0, 1));
  Series E = multiply(exp_series(P), compose(amplitude.relayout(w), subst));

  Eigen::MatrixXcd C = cplx(0, 1) * cp.hessian.inverse();
  std::map<Exponent, cplx> memo;
  for (const auto& [e, c] : E.terms()) {
    Exponent alpha(fiber.size());
    int total = 0;
    for (std::size_t i = 0; i < fiber.size(); ++i) total += alpha[i] = e[fiber[i]];
    if (total % 2) continue;
    cplx moment = pairing_sum(C, alpha, memo);
    Exponent f = e;
    for (auto k : fiber) f[k] = 0;
    f[h] += total / 2;
    out.amplitude.add(f, c * moment);
  }
  return out;
}

Series legendre_transform(const Series& F) {
  for (const auto& [e, c] : F.terms())
    if (F.layout().degree(e) < 2 && std::abs(c) > 0) throw Error("legendre_transform: constant or linear term");
  Extended x = dual_layout(F.layout(), F.cap());
  CriticalPoint cp = critical_point(pairing_phase(x, F), x.fiber);
  return cp.value.relayout(F.layout_ptr(), x.back);
}

FourierResult stationary_phase(const Series& F, const Series& amplitude) {
  require_compatible(F, amplitude, "stationary_phase");
  if (F.layout().hbar() < 0) throw Error("stationary_phase: layout has no h");
  for (const auto& [e, c] : F.terms())
    if (F.layout().degree(e) < 2 && std::abs(c) > 0) throw Error("stationary_phase: constant or linear term");
  Extended x = dual_layout(F.layout(), F.cap());
  StationaryPhase sp = stationary_phase(pairing_phase(x, F), amplitude.relayout(x.layout), x.fiber);
  FourierResult r;
  r.G = sp.critical_value.relayout(F.layout_ptr(), x.back);
  r.prefactor = sp.prefactor;
  r.b = sp.amplitude.relayout(F.layout_ptr(), x.back);
  return r;
}

}  // namespace jq

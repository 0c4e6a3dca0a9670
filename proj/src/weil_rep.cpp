#include "jetquant/weil_rep.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "jetquant/stationary.hpp"

namespace jq {

namespace {

std::vector<std::string> amplitude_vars(int n) {
  std::vector<std::string> v;
  for (int k = 1; k <= n; ++k) v.push_back("x" + std::to_string(k));
  v.push_back("h");
  return v;
}

bool is_real(const Eigen::MatrixXcd& T, double tol) { return T.size() == 0 || T.imag().cwiseAbs().maxCoeff() <= tol; }

// prod (-i mu_k)^{-1/2}, principal branch, for Im T positive definite.
cplx weil_branch(const Eigen::MatrixXcd& T) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(T);
  cplx p = 1.0;
  for (int k = 0; k < T.rows(); ++k) p /= std::sqrt(cplx(0, -1) * es.eigenvalues()(k));
  return p;
}

// prod (-i lambda_k)^{-1/2} over the real eigenvalues; equals exp(i pi sgn/4)|det|^{-1/2}.
cplx real_branch(const Eigen::MatrixXd& T) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
  double mag = 1;
  int sgn = 0;
  for (int k = 0; k < T.rows(); ++k) {
    double l = es.eigenvalues()(k);
    mag *= std::abs(l);
    sgn += l > 0 ? 1 : -1;
  }
  return std::polar(1.0 / std::sqrt(mag), std::numbers::pi * sgn / 4.0);
}

bool has_negative_h(const Series& a) {
  const int h = a.layout().hbar();
  for (const auto& [e, c] : a.terms())
    if (e[h] < 0) return true;
  return false;
}

Series full_value(const GaussianJet& f) {
  return f.scalar.as_series(f.amplitude.layout_ptr()) * f.scalar.phase8() * f.amplitude;
}

}  // namespace

const char* mode_name(GaussianJet::Mode m) {
  switch (m) {
    case GaussianJet::Mode::Weil: return "weil";
    case GaussianJet::Mode::V0: return "v0";
    case GaussianJet::Mode::Hat: return "hat";
  }
  return "?";
}

LayoutPtr GaussianJet::amplitude_layout(int n, int cap, double eps) {
  return make_layout(amplitude_vars(n), cap, eps);
}

GaussianJet GaussianJet::make(Mode mode, const Eigen::MatrixXcd& T, const Series& amplitude) {
  GaussianJet g;
  g.mode = mode;
  g.T = T;
  g.amplitude = amplitude;
  g.scalar = OscillatoryScalar::one(amplitude.cap());
  g.validate();
  return g;
}

void GaussianJet::validate() const {
  if (T.rows() != T.cols()) throw Error("gaussian jet: T is not square");
  if ((T - T.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw Error("gaussian jet: T is not symmetric");
  const Layout& l = amplitude.layout();
  if (l.vars != amplitude_vars(n())) throw Error("gaussian jet: amplitude layout must be x1..xn, h");
  const double tol = l.eps;
  switch (mode) {
    case Mode::Weil: {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T.imag());
      if (n() > 0 && es.eigenvalues().minCoeff() <= tol) throw Error("gaussian jet: Im T must be positive definite");
      break;
    }
    case Mode::V0:
    case Mode::Hat:
      if (!is_real(T, tol)) throw Error("gaussian jet: T must be real in this mode");
      break;
  }
  if (amplitude.is_zero()) return;
  if (mode == Mode::V0 && has_negative_h(amplitude)) throw Error("gaussian jet: negative powers of h need the completed mode");
  if (amplitude.min_degree() < -l.cap) throw Error("gaussian jet: filtration degree below -cap");
}

json GaussianJet::to_json() const {
  json t = json::array();
  for (int i = 0; i < n(); ++i) {
    json row = json::array();
    for (int j = 0; j < n(); ++j) row.push_back({T(i, j).real(), T(i, j).imag()});
    t.push_back(row);
  }
  return {{"mode", mode_name(mode)}, {"T", t}, {"scalar", scalar.to_json()}, {"amplitude", amplitude.to_json()}};
}

GaussianJet GaussianJet::from_json(const json& j) {
  GaussianJet g;
  const std::string m = j.at("mode");
  if (m == "weil") g.mode = Mode::Weil;
  else if (m == "v0") g.mode = Mode::V0;
  else if (m == "hat") g.mode = Mode::Hat;
  else throw Error("gaussian jet: unknown mode " + m);
  const json& t = j.at("T");
  const int n = static_cast<int>(t.size());
  g.T = Eigen::MatrixXcd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      const json& v = t[i][k];
      g.T(i, k) = v.is_array() ? cplx(v[0].get<double>(), v[1].get<double>()) : cplx(v.get<double>(), 0);
    }
  Series a = Series::from_json(j.at("amplitude"));
  g.amplitude = a.relayout(amplitude_layout(n, a.cap(), a.layout().eps));
  g.scalar = j.contains("scalar") ? OscillatoryScalar::from_json(j["scalar"]) : OscillatoryScalar::one(a.cap());
  g.validate();
  return g;
}

SpGenerator SpGenerator::shear(const Eigen::MatrixXd& A) {
  SpGenerator g;
  g.kind = Kind::Shear;
  g.matrix = A;
  return g;
}

SpGenerator SpGenerator::linear(const Eigen::MatrixXd& B) {
  SpGenerator g;
  g.kind = Kind::Linear;
  g.matrix = B;
  return g;
}

SpGenerator SpGenerator::fourier(std::vector<int> vars) {
  SpGenerator g;
  g.kind = Kind::Fourier;
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  g.vars = vars;
  return g;
}

SpGenerator SpGenerator::central(int k) {
  SpGenerator g;
  g.kind = Kind::Central;
  g.power = ((k % 4) + 4) % 4;
  return g;
}

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
  json r = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    r.push_back(row);
  }
  return r;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const int r = static_cast<int>(j.size());
  const int c = r ? static_cast<int>(j[0].size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i) {
    if (static_cast<int>(j[i].size()) != c) throw Error("matrix: ragged rows");
    for (int k = 0; k < c; ++k) m(i, k) = j[i][k].is_number_float() ? j[i][k].get<double>() : to_double(rational_from_json(j[i][k]));
  }
  return m;
}

}  // namespace

json word_to_json(const SpWord& w) {
  json r = json::array();
  for (const auto& g : w) {
    switch (g.kind) {
      case SpGenerator::Kind::Shear: r.push_back({{"kind", "shear"}, {"payload", matrix_json(g.matrix)}}); break;
      case SpGenerator::Kind::Linear: r.push_back({{"kind", "linear"}, {"payload", matrix_json(g.matrix)}}); break;
      case SpGenerator::Kind::Fourier: r.push_back({{"kind", "fourier"}, {"payload", g.vars}}); break;
      case SpGenerator::Kind::Central: r.push_back({{"kind", "central"}, {"payload", g.power}}); break;
    }
  }
  return r;
}

SpWord word_from_json(const json& j) {
  SpWord w;
  for (const auto& g : j) {
    const std::string k = g.at("kind");
    const json& p = g.at("payload");
    if (k == "shear") w.push_back(SpGenerator::shear(matrix_from_json(p)));
    else if (k == "linear") w.push_back(SpGenerator::linear(matrix_from_json(p)));
    else if (k == "fourier") w.push_back(SpGenerator::fourier(p.get<std::vector<int>>()));
    else if (k == "central") w.push_back(SpGenerator::central(p.get<int>()));
    else throw Error("sp word: unknown generator " + k);
  }
  return w;
}

GaussianJet act_shear(const Eigen::MatrixXd& A, const GaussianJet& f) {
  if (A.rows() != f.n() || A.cols() != f.n()) throw Error("shear: dimension mismatch");
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw Error("shear: A is not symmetric");
  GaussianJet g = f;
  g.T += A.cast<cplx>();
  return g;
}

GaussianJet act_gl(const Eigen::MatrixXd& B, const GaussianJet& f) {
  const int n = f.n();
  if (B.rows() != n || B.cols() != n) throw Error("linear: dimension mismatch");
  const double det = B.determinant();
  if (std::abs(det) <= f.amplitude.layout().eps) throw Error("linear: singular matrix");
  Eigen::MatrixXd Bi = B.inverse();
  GaussianJet g = f;
  g.T = Bi.transpose().cast<cplx>() * f.T * Bi.cast<cplx>();
  const LayoutPtr& l = f.amplitude.layout_ptr();
  std::vector<Series> sub;
  for (int i = 0; i < n; ++i) {
    Series s(l);
    for (int j = 0; j < n; ++j) s += Series::variable(l, j, Bi(i, j));
    sub.push_back(s);
  }
  sub.push_back(Series::variable(l, n));
  g.amplitude = compose(f.amplitude, sub);
  g.scalar *= 1.0 / std::sqrt(std::abs(det));
  return g;
}

GaussianJet act_fourier(const std::vector<int>& vars, const GaussianJet& f) {
  const int n = f.n();
  std::vector<int> S = vars;
  if (S.empty())
    for (int k = 0; k < n; ++k) S.push_back(k);
  for (int s : S)
    if (s < 0 || s >= n) throw Error("fourier: variable index out of range");
  const int m = static_cast<int>(S.size());
  Eigen::MatrixXcd TS(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) TS(a, b) = f.T(S[a], S[b]);

  const Layout& al = f.amplitude.layout();
  cplx pref;
  if (f.mode == GaussianJet::Mode::Weil) {
    pref = weil_branch(TS);
  } else {
    Eigen::MatrixXd R = TS.real();
    if (m > 0 && std::abs(R.determinant()) <= al.eps) throw UndefinedAction("fourier: degenerate block, action undefined at this element", -1);
    pref = real_branch(R);
  }

  // Extended layout x1..xn, h, eta_1..eta_m.
  std::vector<std::string> names = al.vars;
  std::vector<int> weights = al.weights;
  for (int a = 0; a < m; ++a) {
    names.push_back("eta" + std::to_string(a + 1));
    weights.push_back(1);
  }
  LayoutPtr xl = make_layout(names, weights, al.cap, al.eps);
  Series phase(xl);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Exponent e(xl->size(), 0);
      e[i] += 1;
      e[j] += 1;
      phase.add(e, 0.5 * f.T(i, j));
    }
  std::vector<std::size_t> fiber;
  for (int a = 0; a < m; ++a) {
    Exponent e(xl->size(), 0);
    e[S[a]] = 1;
    e[n + 1 + a] = 1;
    phase.add(e, 1.0);
    fiber.push_back(S[a]);
  }
  std::vector<int> into(al.size(), -1);
  for (std::size_t k = 0; k < al.size(); ++k) into[k] = static_cast<int>(k);
  StationaryPhase sp = stationary_phase(phase, f.amplitude.relayout(xl, into), fiber);

  std::vector<int> back(xl->size(), -1);
  for (int k = 0; k <= n; ++k) back[k] = k;
  for (int s : S) back[s] = -1;
  for (int a = 0; a < m; ++a) back[n + 1 + a] = S[a];
  LayoutPtr out = f.amplitude.layout_ptr();
  Series G = sp.critical_value.relayout(out, back);
  std::vector<std::size_t> xs;
  for (int k = 0; k < n; ++k) xs.push_back(k);
  GaussianJet g = f;
  g.T = hessian_at_zero(G, xs);
  g.amplitude = sp.amplitude.relayout(out, back);
  g.scalar *= pref;
  return g;
}

GaussianJet act_central(int k, const GaussianJet& f) {
  GaussianJet g = f;
  g.scalar.eighth = ((g.scalar.eighth + 2 * k) % 8 + 8) % 8;
  return g;
}

GaussianJet act_generator(const SpGenerator& g, const GaussianJet& f) {
  switch (g.kind) {
    case SpGenerator::Kind::Shear: return act_shear(g.matrix, f);
    case SpGenerator::Kind::Linear: return act_gl(g.matrix, f);
    case SpGenerator::Kind::Fourier: return act_fourier(g.vars, f);
    case SpGenerator::Kind::Central: return act_central(g.power, f);
  }
  return f;
}

GaussianJet act_word(const SpWord& w, const GaussianJet& f) {
  GaussianJet g = f;
  for (int k = static_cast<int>(w.size()) - 1; k >= 0; --k) {
    try {
      g = act_generator(w[k], g);
    } catch (const UndefinedAction& e) {
      throw UndefinedAction("step " + std::to_string(k) + ": " + e.what(), k);
    }
  }
  return g;
}

Eigen::MatrixXd sp_matrix(const SpGenerator& g, int n) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  switch (g.kind) {
    case SpGenerator::Kind::Shear: M.block(0, n, n, n) = g.matrix; break;
    case SpGenerator::Kind::Linear:
      M.block(0, 0, n, n) = g.matrix;
      M.block(n, n, n, n) = g.matrix.inverse().transpose();
      break;
    case SpGenerator::Kind::Fourier: {
      std::vector<int> S = g.vars;
      if (S.empty())
        for (int k = 0; k < n; ++k) S.push_back(k);
      for (int s : S) {
        M(s, s) = 0;
        M(n + s, n + s) = 0;
        M(s, n + s) = 1;
        M(n + s, s) = -1;
      }
      break;
    }
    case SpGenerator::Kind::Central: break;
  }
  return M;
}

Eigen::MatrixXd sp_matrix(const SpWord& w, int n) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  for (const auto& g : w) M = M * sp_matrix(g, n);
  return M;
}

SpWord compose_words(const SpWord& w1, const SpWord& w2, int n) {
  SpWord out;
  auto same_block = [](const SpGenerator& a, const SpGenerator& b) { return a.vars == b.vars; };
  for (const SpWord* w : {&w1, &w2})
    for (const auto& g : *w) {
      out.push_back(g);
      while (out.size() >= 2) {
        SpGenerator& a = out[out.size() - 2];
        const SpGenerator b = out.back();
        if (a.kind != b.kind) break;
        if (a.kind == SpGenerator::Kind::Shear) {
          a.matrix += b.matrix;
        } else if (a.kind == SpGenerator::Kind::Linear) {
          a.matrix = a.matrix * b.matrix;
        } else if (a.kind == SpGenerator::Kind::Central) {
          a.power = (a.power + b.power) % 4;
        } else if (same_block(a, b)) {
          Eigen::MatrixXd R = Eigen::MatrixXd::Identity(n, n);
          if (b.vars.empty()) R = -R;
          for (int s : b.vars) R(s, s) = -1;
          out.pop_back();
          out.back() = SpGenerator::linear(R);
          continue;
        } else {
          break;
        }
        out.pop_back();
      }
    }
  return out;
}

CenterComparison compare_up_to_center(const GaussianJet& a, const GaussianJet& b, double tol) {
  CenterComparison c;
  if (a.n() != b.n() || (a.T - b.T).cwiseAbs().maxCoeff() > tol) {
    c.residual = std::numeric_limits<double>::infinity();
    return c;
  }
  if (std::abs(a.scalar.exponent - b.scalar.exponent) > tol) {
    c.residual = std::numeric_limits<double>::infinity();
    return c;
  }
  Series A = full_value(a), B = full_value(b);
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 4; ++k) {
    static const cplx p[4] = {1.0, cplx(0, 1), -1.0, cplx(0, -1)};
    double r = distance(A, B * p[k]);
    if (r < best) {
      best = r;
      c.power = k;
    }
  }
  c.residual = best;
  c.matched = best < tol;
  return c;
}

double jet_distance(const GaussianJet& a, const GaussianJet& b, double tol) {
  if (a.n() != b.n() || (a.T - b.T).cwiseAbs().maxCoeff() > tol) throw Error("jet_distance: Gaussian parts differ");
  if (std::abs(a.scalar.exponent - b.scalar.exponent) > tol) throw Error("jet_distance: oscillatory exponents differ");
  return distance(full_value(a), full_value(b));
}

GaussianJet weyl_act(const WeylAlgebra& A, const Series& w, const GaussianJet& f) {
  const int n = f.n();
  if (A.n != n) throw Error("weyl_act: dimension mismatch");
  std::vector<Series> sub = identity_map(A.layout, A.layout->size());
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) sub[A.xi[j]] -= A.xhat(k, f.T(j, k));
  Series conj = compose(w, sub);
  Series N = weyl_quantize(A, conj);
  Series amp = f.amplitude.relayout(A.layout);
  GaussianJet g = f;
  g.amplitude = apply_normal(A, N, amp).relayout(f.amplitude.layout_ptr());
  return g;
}

GaussianJet exp_act(const WeylAlgebra& A, const Series& payload, const GaussianJet& f) {
  if (payload.is_zero()) return f;
  if (payload.min_degree() < 3) throw Error("exp_act: payload must raise the filtration");
  GaussianJet term = f;
  GaussianJet out = f;
  const int lo = f.amplitude.is_zero() ? 0 : f.amplitude.min_degree();
  const int steps = f.amplitude.cap() - lo + 1;
  for (int k = 1; k <= steps; ++k) {
    term = weyl_act(A, payload, term);
    Exponent inv(term.amplitude.nvars(), 0);
    inv[term.n()] = -1;
    term.amplitude = term.amplitude.times_monomial(inv, cplx(0, -1.0 / k));
    if (term.amplitude.is_zero()) break;
    out.amplitude += term.amplitude;
  }
  if (out.mode == GaussianJet::Mode::V0 && has_negative_h(out.amplitude))
    out.mode = GaussianJet::Mode::Hat;
  return out;
}

}  // namespace jq

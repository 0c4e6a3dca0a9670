#include "jetquant/suites.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "jetquant/stationary.hpp"

namespace jq {

namespace {

using Rng = std::mt19937_64;
const cplx I(0, 1);

Rng suite_rng(const RunConfig& cfg, const std::string& suite) {
  const auto& names = suite_names();
  const auto k = std::find(names.begin(), names.end(), suite) - names.begin();
  return Rng(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(k));
}

double uniform(Rng& rng, double a = -1, double b = 1) { return std::uniform_real_distribution<double>(a, b)(rng); }
int uniform_int(Rng& rng, int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); }

// Random terms of weighted degree in [min_deg, max_deg] in the given variables.
Series random_series(const LayoutPtr& l, std::vector<std::size_t> vars, Rng& rng, int max_deg, int min_deg = 0,
                     int terms = 8) {
  Series s(l);
  for (int t = 0; t < terms; ++t) {
    Exponent e(l->size(), 0);
    std::shuffle(vars.begin(), vars.end(), rng);
    int left = uniform_int(rng, min_deg, max_deg);
    for (auto k : vars) {
      e[k] = uniform_int(rng, 0, left / l->weights[k]);
      left -= e[k] * l->weights[k];
    }
    if (l->degree(e) >= min_deg) s.add(e, {uniform(rng), uniform(rng)});
  }
  return s;
}

std::vector<std::size_t> formal_vars(const WeylAlgebra& A, const std::vector<std::string>& params = {}) {
  std::vector<std::size_t> v(A.x.begin(), A.x.end());
  v.insert(v.end(), A.xi.begin(), A.xi.end());
  v.push_back(A.h);
  for (const auto& p : params) v.push_back(A.layout->index(p));
  return v;
}

Series random_symbol(const WeylAlgebra& A, Rng& rng, int max_deg, int min_deg = 0,
                     const std::vector<std::string>& params = {}) {
  return random_series(A.layout, formal_vars(A, params), rng, max_deg, min_deg);
}

Series random_amplitude(const LayoutPtr& l, Rng& rng, int max_deg) {
  std::vector<std::size_t> v(l->size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = k;
  return random_series(l, v, rng, max_deg);
}

struct Worst {
  double value = 0;
  std::string where;
  void see(double r, const std::string& at) {
    if (r > value || where.empty()) {
      value = std::max(value, r);
      where = at;
    }
  }
};

CheckRecord record(const std::string& suite, const std::string& id, bool pass, double residual,
                   const std::string& location, const std::string& anchor, json detail = json::object()) {
  CheckRecord r;
  r.suite = suite;
  r.id = id;
  r.status = pass ? Status::Pass : Status::Fail;
  r.residual = residual;
  r.location = location;
  r.anchor = anchor;
  r.detail = std::move(detail);
  return r;
}

CheckRecord undefined(const std::string& suite, const std::string& id, const std::string& location,
                      const std::string& anchor, const std::string& why) {
  CheckRecord r;
  r.suite = suite;
  r.id = id;
  r.status = Status::Undefined;
  r.location = location;
  r.anchor = anchor;
  r.detail = {{"reason", why}};
  return r;
}

json cplx_json(cplx c) { return json::array({c.real(), c.imag()}); }

std::string point_string(const std::vector<Rational>& p) {
  std::string s = "(";
  for (std::size_t k = 0; k < p.size(); ++k) s += (k ? ", " : "") + p[k].str();
  return s + ")";
}

std::string point_string(const std::vector<double>& p) {
  std::ostringstream s;
  s << "(";
  for (std::size_t k = 0; k < p.size(); ++k) s << (k ? ", " : "") << p[k];
  s << ")";
  return s.str();
}

// ---- star, poisson ----

Report moyal_suite(const RunConfig& cfg) {
  const int cap = cfg.cap_for("moyal");
  Rng rng = suite_rng(cfg, "moyal");
  const WeylAlgebra alg[2] = {WeylAlgebra::make(1, cap), WeylAlgebra::make(2, cap)};
  Worst w;
  for (int t = 0; t < 100; ++t) {
    const WeylAlgebra& A = alg[t % 2];
    Series f = random_symbol(A, rng, 4), g = random_symbol(A, rng, 4), h = random_symbol(A, rng, 4);
    Series l = moyal_star(A, moyal_star(A, f, g), h), r = moyal_star(A, f, moyal_star(A, g, h));
    w.see(distance(l, r), "triple " + std::to_string(t) + ", n = " + std::to_string(A.n));
  }
  Report rep;
  rep.checks.push_back(record("moyal", "associativity", w.value < 1e-9, w.value, w.where, "Moyal product",
                              {{"triples", 100}, {"max_degree", 4}, {"cap", cap}}));
  return rep;
}

// sum_k f_xi g_x - f_x g_xi on the h^0 parts
Series first_order(const WeylAlgebra& A, const Series& f, const Series& g) {
  Series f0 = f.slice(A.h, 0), g0 = g.slice(A.h, 0);
  Series d = A.zero();
  for (int k = 0; k < A.n; ++k)
    d += f0.derivative(A.xi[k]) * g0.derivative(A.x[k]) - f0.derivative(A.x[k]) * g0.derivative(A.xi[k]);
  return d;
}

Report poisson_suite(const RunConfig& cfg) {
  const int cap = cfg.cap_for("poisson");
  Rng rng = suite_rng(cfg, "poisson");
  const WeylAlgebra alg[2] = {WeylAlgebra::make(1, cap), WeylAlgebra::make(2, cap)};
  Worst w;
  for (int t = 0; t < 100; ++t) {
    const WeylAlgebra& A = alg[t % 2];
    Series f = random_symbol(A, rng, 4), g = random_symbol(A, rng, 4);
    Series lead = bracket_over_ih(A, f, g).slice(A.h, 0);
    w.see(distance(lead, first_order(A, f, g)), "pair " + std::to_string(t) + ", n = " + std::to_string(A.n));
  }
  Report rep;
  rep.checks.push_back(record("poisson", "leading term", w.value < 1e-9, w.value, w.where,
                              "is the Poisson bracket defined by the symplectic structure",
                              {{"pairs", 100}, {"cap", cap}}));
  return rep;
}

// ---- gaussian, weil ----

cplx oscillatory_integral(double k, double h) {
  using boost::math::quadrature::gauss_kronrod;
  double re = 0, im = 0;
  for (int s = 0; s < 2000; ++s) {
    const double a = -10 + 0.01 * s, b = a + 0.01;
    re += gauss_kronrod<double, 61>::integrate([&](double t) { return std::cos(k * t * t / (2 * h)) * std::exp(-t * t / 2); }, a, b, 6, 1e-12);
    im += gauss_kronrod<double, 61>::integrate([&](double t) { return std::sin(k * t * t / (2 * h)) * std::exp(-t * t / 2); }, a, b, 6, 1e-12);
  }
  return cplx(re, im) / std::sqrt(2 * std::numbers::pi * h);
}

Report gaussian_suite(const RunConfig&) {
  Report rep;
  const double h = 1e-2;
  for (double k : {1.0, -1.0, 2.0, -2.0, 3.0}) {
    const std::string at = "k = " + std::to_string(static_cast<int>(k));
    LayoutPtr l = make_layout({"y", "h"}, 16);
    Series y = Series::variable(l, 0);
    StationaryPhase bare = stationary_phase(0.5 * k * y * y, Series::constant(l, 1.0), {0});
    const cplx displayed = 1.0 / std::sqrt(I * k);
    const double phase_err = std::abs(std::arg(bare.prefactor) - std::arg(std::sqrt(I * k)));
    const double conj_err = std::abs(bare.prefactor - std::conj(displayed));
    const double mod_err = std::abs(std::abs(bare.prefactor) - 1.0 / std::sqrt(std::abs(k)));
    const double branch = std::max({phase_err, conj_err, mod_err});
    rep.checks.push_back(record("gaussian", "branch " + at, branch < 1e-12, branch, at, "Gaussian integral",
                                {{"engine", cplx_json(bare.prefactor)}, {"displayed_formula", cplx_json(displayed)},
                                 {"conjugate_of_displayed", cplx_json(std::conj(displayed))},
                                 {"sqrt_i_lambda_phase", std::arg(std::sqrt(I * k))}}));

    StationaryPhase sp = stationary_phase(0.5 * k * y * y, exp_series(-0.5 * y * y), {0});
    cplx formal = 0;
    for (const auto& [e, c] : sp.amplitude.terms()) formal += c * std::pow(h, e[1]);
    formal *= sp.prefactor;
    const cplx numeric = oscillatory_integral(k, h);
    const double q = std::abs(numeric - formal);
    rep.checks.push_back(record("gaussian", "quadrature " + at, q < 1e-4, q, at + ", h = 0.01", "Gaussian integral",
                                {{"formal", cplx_json(formal)}, {"numeric", cplx_json(numeric)}}));
  }
  return rep;
}

Eigen::MatrixXd random_symmetric(Rng& rng, int n) {
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) A(i, j) = A(j, i) = uniform(rng);
  return A;
}

Eigen::MatrixXcd random_weil_T(Rng& rng, int n) {
  Eigen::MatrixXd Y = random_symmetric(rng, n);
  Y = Y * Y.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
  return random_symmetric(rng, n).cast<cplx>() + I * Y.cast<cplx>();
}

Eigen::MatrixXd random_invertible(Rng& rng, int n) {
  for (;;) {
    Eigen::MatrixXd B(n, n);
    for (int i = 0; i < n * n; ++i) B(i / n, i % n) = uniform(rng, -1.5, 1.5);
    if (std::abs(B.determinant()) > 0.2) return B;
  }
}

SpGenerator random_generator(Rng& rng, int n) {
  switch (uniform_int(rng, 0, 3)) {
    case 0: return SpGenerator::shear(random_symmetric(rng, n));
    case 1: return SpGenerator::linear(random_invertible(rng, n));
    case 2: {
      if (n == 1) return SpGenerator::fourier();
      const int p = uniform_int(rng, 0, 2);
      return p == 2 ? SpGenerator::fourier() : SpGenerator::fourier({p});
    }
    default: return SpGenerator::central(uniform_int(rng, 1, 3));
  }
}

Report weil_suite(const RunConfig& cfg) {
  const int cap = cfg.cap_for("weil");
  Rng rng = suite_rng(cfg, "weil");
  Worst w;
  int unmatched = 0;
  for (int t = 0; t < 50; ++t) {
    const int n = 1 + t % 2;
    LayoutPtr l = GaussianJet::amplitude_layout(n, cap);
    Series amp = Series::constant(l, 1.0) + random_amplitude(l, rng, 4);
    GaussianJet j = GaussianJet::make(GaussianJet::Mode::Weil, random_weil_T(rng, n), amp);
    SpWord w1{random_generator(rng, n), random_generator(rng, n)};
    SpWord w2{random_generator(rng, n), random_generator(rng, n)};
    SpWord word = compose_words(w1, w2, n);
    CenterComparison c = compare_up_to_center(act_word(word, j), act_word(w1, act_word(w2, j)));
    if (!c.matched) ++unmatched;
    w.see(c.matched ? c.residual : std::max(c.residual, 1.0), "word pair " + std::to_string(t) + ", n = " + std::to_string(n));
  }
  Report rep;
  rep.checks.push_back(record("weil", "composition", unmatched == 0 && w.value < 1e-8, w.value, w.where,
                              "is equal to the composition of the former two", {{"words", 50}, {"cap", cap}}));

  LayoutPtr l = GaussianJet::amplitude_layout(1, cap);
  GaussianJet g = GaussianJet::make(GaussianJet::Mode::Weil, Eigen::MatrixXcd::Constant(1, 1, I), Series::constant(l, 1.0));
  GaussianJet f = act_fourier({}, g);
  const double r = std::max({std::abs(f.scalar.leading() - 1.0), std::abs(f.T(0, 0) - I), distance(f.amplitude, g.amplitude)});
  rep.checks.push_back(record("weil", "fourier self-duality", r < 1e-9, r, "exp(-x^2/2h)",
                              "is equal to the composition of the former two",
                              {{"prefactor", cplx_json(f.scalar.leading())}}));
  return rep;
}

}  // namespace

namespace {

// ---- maslov ----

Rational random_rational(Rng& rng, int range = 5) {
  return Rational(uniform_int(rng, -range, range)) / uniform_int(rng, 1, 4);
}

const std::vector<std::vector<int>> kCharts2{{}, {0}, {1}, {0, 1}};

LagrangianChartData line_chart(int k, bool fiber) {
  LagrangianChartData d;
  d.n = 1;
  d.F.nvars = 1;
  if (fiber) {
    d.xi_free = {0};
    d.F.terms[{2}] = Rational(-1) / (2 * k);
  } else {
    d.F.terms[{2}] = Rational(k) / 2;
  }
  return d;
}

Report maslov_suite(const RunConfig& cfg) {
  Rng rng = suite_rng(cfg, "maslov");
  Report rep;
  int worst_anti = 0, worst_triple = 0, triples = 0;
  std::string where_anti, where_triple;
  bool cech_ok = true;
  for (int t = 0; t < 200; ++t) {
    LagrangianFrame g;
    g.n = 2;
    g.I = kCharts2[uniform_int(rng, 0, 3)];
    RationalMatrix H(2, std::vector<Rational>(2));
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j <= i; ++j) H[i][j] = H[j][i] = random_rational(rng);
    const std::size_t p = g.I.size();
    g.A.assign(p, std::vector<Rational>(p));
    g.B.assign(p, std::vector<Rational>(2 - p));
    g.C.assign(2 - p, std::vector<Rational>(2 - p));
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        if (i < p && j < p) g.A[i][j] = H[i][j];
        else if (i < p) g.B[i][j - p] = H[i][j];
        else if (j >= p) g.C[i - p][j - p] = H[i][j];
      }
    RationalMatrix L = g.basis();
    std::vector<int> in;
    for (int c = 0; c < 4; ++c) {
      try {
        chart_parameters(L, kCharts2[c]);
        in.push_back(c);
      } catch (const Error&) {
      }
    }
    std::vector<CochainValue> vals;
    for (int a : in)
      for (int b : in) {
        const int v = linear_cocycle(L, kCharts2[a], kCharts2[b]);
        const int anti = std::abs(v + linear_cocycle(L, kCharts2[b], kCharts2[a])) + (a == b ? std::abs(v) : 0);
        if (anti > worst_anti || where_anti.empty()) {
          worst_anti = std::max(worst_anti, anti);
          where_anti = "subspace " + std::to_string(t) + ", charts " + std::to_string(a) + " " + std::to_string(b);
        }
        vals.push_back({a, b, Rational(v) / 2});
      }
    for (int a : in)
      for (int b : in)
        for (int c : in) {
          const int s = linear_cocycle(L, kCharts2[a], kCharts2[b]) + linear_cocycle(L, kCharts2[b], kCharts2[c]) +
                        linear_cocycle(L, kCharts2[c], kCharts2[a]);
          if (std::abs(s) > worst_triple || where_triple.empty()) {
            worst_triple = std::max(worst_triple, std::abs(s));
            where_triple = "subspace " + std::to_string(t) + ", charts " + std::to_string(a) + " " +
                           std::to_string(b) + " " + std::to_string(c);
          }
          ++triples;
        }
    if (!verify_cech_cocycle(4, vals).ok()) cech_ok = false;
  }
  const std::string anchor = "Čech 1-cocycle for the cover";
  rep.checks.push_back(record("maslov", "antisymmetry", worst_anti == 0, worst_anti, where_anti, anchor,
                              {{"subspaces", 200}}));
  rep.checks.push_back(record("maslov", "triple sums", worst_triple == 0 && cech_ok, worst_triple, where_triple,
                              anchor, {{"subspaces", 200}, {"triples", triples}, {"cech_report_ok", cech_ok}}));

  const int cap = cfg.cap_for("maslov");
  for (int k : {1, -1, 2}) {
    const std::string at = "xi = " + std::to_string(k) + " x, graph to fiber";
    const Rational x0(1, 2);
    PhaseChart graph = phase_from_generating(line_chart(k, false), {x0}, "graph");
    PhaseChart fiber = phase_from_generating(line_chart(k, true), {k * x0}, "fiber");
    const int mu2 = submanifold_cocycle(graph.data, fiber.data, OverlapCase::Subdivision, graph.base);
    const cplx mu = std::polar(1.0, std::numbers::pi * mu2 / 4);
    const cplx expect = std::polar(1.0, std::numbers::pi * (k > 0 ? 1 : -1) / 4);
    ModuleJet r = module_transition(fiber, ModuleJet::make(graph, Series::constant(module_layout(1, cap), 1.0)));
    cplx lead = r.scalar.leading() * r.amplitude.constant_term();
    lead /= std::abs(lead);
    const double res = std::max(std::abs(mu - expect), std::abs(lead - mu));
    rep.checks.push_back(record("maslov", "line phase k = " + std::to_string(k), res < 1e-9, res, at,
                                "modules supported on L",
                                {{"mu2", mu2}, {"maslov_phase", cplx_json(mu)}, {"transition_phase", cplx_json(lead)}}));
  }
  return rep;
}

// ---- geometry, stack ----

std::vector<double> sample_covector(int n) {
  std::vector<double> xi;
  for (int k = 0; k < n; ++k) xi.push_back(0.8 - 0.3 * k);
  return xi;
}

Report geometry_suite(const RunConfig& cfg, const SuiteInputs& in) {
  Report rep;
  const int cap = cfg.cap_for("geometry");
  Rng rng = suite_rng(cfg, "geometry");
  if (in.atlases.empty())
    rep.checks.push_back(undefined("geometry", "atlas", "", "characteristic class θ of this deformation", "no atlas input"));
  for (const auto& [name, at] : in.atlases) {
    const int n = at.dim;
    WeylAlgebra A = WeylAlgebra::make(n, cap);
    const std::vector<double> xi = sample_covector(n);
    Worst prod, cocycle, lifted;
    int points = 0;
    try {
      at.validate(cfg.jet_order, cfg.tol);
    } catch (const Error& e) {
      rep.checks.push_back(record("geometry", "atlas composition", false, 1.0, name, "characteristic class θ of this deformation",
                                  {{"error", e.what()}}));
      continue;
    }
    auto base = cotangent_base_names(n);
    WeylAlgebra Ab = WeylAlgebra::make(n, cap, base);
    ConnectionData conn = canonical_connection(Ab, base);
    for (const auto& tr : at.transitions) {
      const std::string pair = name + ": " + at.charts[tr.a] + " <- " + at.charts[tr.b];
      const Atlas::Transition* back = at.find(tr.b, tr.a);
      for (const auto& p : tr.points) {
        const std::string loc = pair + " at " + point_string(p);
        CotangentTransition t = cotangent_weyl_transition(A, tr.map, p, xi);
        for (int k = 0; k < 10; ++k) {
          Series f = random_symbol(A, rng, 4), g = random_symbol(A, rng, 4);
          prod.see(distance(t.apply(A, moyal_star(A, f, g)), moyal_star(A, t.apply(A, f), t.apply(A, g))), loc);
        }
        if (back) {
          cocycle.see(transition_cocycle_residual(A, at, tr.a, tr.b, tr.a, tr.map.at(p), xi), loc);
          ++points;
        }
        lifted.see(check_lifted_cocycle(Ab, tr.map, conn, conn, p, xi, loc).residual, loc);
      }
    }
    const std::string anchor = "characteristic class θ of this deformation";
    rep.checks.push_back(record("geometry", "product preservation", prod.value < cfg.tol, prod.value, prod.where, anchor,
                                {{"atlas", name}, {"cap", cap}}));
    rep.checks.push_back(record("geometry", "transition cocycle", points > 0 && cocycle.value < cfg.tol, cocycle.value,
                                points > 0 ? cocycle.where : name, anchor, {{"atlas", name}, {"points", points}}));
    rep.checks.push_back(record("geometry", "lifted cocycle", lifted.value < cfg.tol, lifted.value, lifted.where, anchor,
                                {{"atlas", name}}));
    FedosovReport f = check_fedosov(Ab, conn, cfg.tol);
    const double r = std::max({f.flatness_residual, f.symplectic_residual, f.higher_residual});
    rep.checks.push_back(record("geometry", "flat lifted connection", f.ok(cfg.tol), r, name + ": canonical connection", anchor,
                                f.to_json()));
  }
  return rep;
}

Report stack_suite(const RunConfig& cfg) {
  const int cap = cfg.cap_for("stack");
  Rng rng = suite_rng(cfg, "stack");
  auto base = cotangent_base_names(1);
  WeylAlgebra A = WeylAlgebra::make(1, cap, base);
  ConnectionData conn = canonical_connection(A, base);
  Worst element, twisted, tetra;
  for (int t = 0; t < 10; ++t) {
    const std::string at = "gauge triple " + std::to_string(t);
    Series s12 = random_symbol(A, rng, 5, 3), s23 = random_symbol(A, rng, 5, 3);
    ConnectionData c2 = gauge_transform(A, conn, -1.0 * s12);
    ConnectionData c3 = gauge_transform(A, c2, -1.0 * s23);
    Series s13 = bch(A, s12, s23);
    StackReport r = stack_identities(A, {conn, c2, c3}, s12, s23, s13, cfg.tol);
    element.see(r.c.max_abs(), at);

    auto ul = BaseMap::poly_layout(2);
    Series uu = Series::monomial(ul, {2, 1}, uniform(rng)) + Series::monomial(ul, {0, 3}, uniform(rng));
    Series rho = A.hbar() * A.hbar() * prolongation(A, uu, {0.1, 0.2}, base, ConnectionModel::CotangentWeyl);
    rho = rho - A.constant(rho.constant_term());
    Series s13t = bch(A, -1.0 * rho, s13);
    StackReport rt = stack_identities(A, {conn, c2, c3}, s12, s23, s13t, cfg.tol);
    const double tw = std::max({rt.horizontal_residual, rt.ad_residual, distance(rt.c, rho), rt.unit_mod_h ? 0.0 : 1.0});
    twisted.see(tw, at);

    Series s14 = random_symbol(A, rng, 5, 3), s24 = random_symbol(A, rng, 5, 3), s34 = random_symbol(A, rng, 5, 3);
    tetra.see(tetrahedron_residual(A, s12, s13t, s14, s23, s24, s34), "gauge quadruple " + std::to_string(t));
  }
  const std::string anchor = "there is a canonical element";
  Report rep;
  rep.checks.push_back(record("stack", "canonical element", element.value < cfg.tol, element.value, element.where, anchor,
                              {{"cap", cap}}));
  rep.checks.push_back(record("stack", "horizontal twist", twisted.value < cfg.tol, twisted.value, twisted.where, anchor));
  rep.checks.push_back(record("stack", "tetrahedron", tetra.value < cfg.tol, tetra.value, tetra.where, anchor,
                              {{"quadruples", 10}}));
  return rep;
}

// ---- module, compare ----

Series full_series(const ModuleJet& m) {
  return m.scalar.as_series(m.amplitude.layout_ptr()) * m.scalar.phase8() * m.amplitude;
}

struct ChartsAt {
  std::vector<Rational> point;
  std::vector<PhaseChart> charts;
};

std::vector<ChartsAt> charts_by_point(const LagrangianConfig& c) {
  std::vector<ChartsAt> out;
  for (const auto& p : c.points) {
    ChartsAt a{p, {}};
    for (const auto& ch : c.charts)
      if (ch.contains(p)) a.charts.push_back(ch.moved(p));
    out.push_back(a);
  }
  return out;
}

Report module_suite(const RunConfig& cfg, const SuiteInputs& in) {
  Report rep;
  const int cap = cfg.cap_for("module");
  Rng rng = suite_rng(cfg, "module");
  const std::string anchor = "modules supported on L";
  if (in.lagrangians.empty()) rep.checks.push_back(undefined("module", "configs", "", anchor, "no Lagrangian input"));
  for (const auto& lc : in.lagrangians) {
    Worst axioms, inter, unit;
    bool consistent = true;
    int pairs = 0;
    std::string error, error_at;
    for (const auto& at : charts_by_point(lc)) {
      const std::string pt = lc.name + " at " + point_string(at.point);
      for (const auto& c : at.charts) {
        WeylAlgebra A = WeylAlgebra::make(c.n(), cap);
        LayoutPtr l = module_layout(c.n(), cap);
        for (int t = 0; t < 3; ++t) {
          ModuleJet m = ModuleJet::make(c, random_amplitude(l, rng, cap));
          Series f = random_symbol(A, rng, 3), g = random_symbol(A, rng, 3);
          const double r = std::max(
              distance(module_act(A, moyal_star(A, f, g), m).amplitude, module_act(A, f, module_act(A, g, m)).amplitude),
              distance(module_act(A, A.constant(1.0), m).amplitude, m.amplitude));
          axioms.see(r, pt + ", chart " + c.id);
        }
      }
      for (const auto& s : at.charts)
        for (const auto& t : at.charts) {
          if (s.data.base_chart != t.data.base_chart) continue;
          const std::string loc = pt + ", " + s.id + " -> " + t.id;
          try {
            WeylAlgebra A = WeylAlgebra::make(s.n(), cap);
            LayoutPtr l = module_layout(s.n(), cap);
            for (int k = 0; k < 3; ++k) {
              ModuleJet m = ModuleJet::make(s, random_amplitude(l, rng, cap));
              Series w = random_symbol(A, rng, 3);
              inter.see(distance(full_series(module_transition(t, module_act(A, w, m))),
                                 full_series(module_act(A, w, module_transition(t, m)))),
                        loc);
            }
            ScalarCocycle sc = extract_scalar_cocycle(s, t, cap, 1e-12);
            unit.see(sc.unit_residual, loc);
            if (!sc.consistent) {
              consistent = false;
              if (error.empty()) error_at = loc, error = "scalar cocycle disagrees with the Maslov data";
            }
            ++pairs;
          } catch (const Error& e) {
            if (error.empty()) error_at = loc, error = e.what();
            inter.see(1.0, loc);
          }
        }
    }
    json d = {{"config", lc.name}, {"cap", cap}, {"pairs", pairs}};
    if (!error.empty()) d["error"] = error;
    rep.checks.push_back(record("module", "axioms", axioms.value < cfg.tol, axioms.value, axioms.where, anchor, d));
    rep.checks.push_back(record("module", "intertwining", error.empty() && inter.value < cfg.tol, inter.value,
                                error.empty() ? inter.where : error_at, anchor, d));
    rep.checks.push_back(record("module", "scalar cocycle", consistent && unit.value < 1e-12, unit.value,
                                consistent ? unit.where : error_at, anchor, d));
  }
  return rep;
}

Report compare_suite(const RunConfig& cfg, const SuiteInputs& in) {
  Report rep;
  const int cap = cfg.cap_for("compare");
  const std::string anchor = "reduces this statement to the case when L is the zero section";
  if (in.lagrangians.empty()) rep.checks.push_back(undefined("compare", "configs", "", anchor, "no Lagrangian input"));
  for (const auto& lc : in.lagrangians) {
    for (const auto& at : charts_by_point(lc)) {
      const std::string pt = lc.name + " at " + point_string(at.point);
      for (const auto& s : at.charts)
        for (const auto& t : at.charts) {
          if (s.data.base_chart != t.data.base_chart) continue;
          const std::string loc = pt + ", " + s.id + " -> " + t.id;
          try {
            MainTheoremReport r = compare_zero_section(s, t, cap, cfg.tol);
            const double res = std::max({r.claim1_residual, r.claim2_residual, r.claim3_residual});
            rep.checks.push_back(record("compare", "claims " + s.id + " -> " + t.id, r.ok(), res, loc, anchor, r.to_json()));
          } catch (const Error& e) {
            rep.checks.push_back(record("compare", "claims " + s.id + " -> " + t.id, false, 1.0, loc, anchor,
                                        {{"error", e.what()}}));
          }
        }
      for (const auto& c : at.charts) {
        GradingReport g = grading_compare(c, cap);
        rep.checks.push_back(record("compare", "zero section model " + c.id, g.zero_section_residual == 0,
                                    g.zero_section_residual, pt + ", chart " + c.id, anchor, g.to_json()));
        rep.checks.push_back(record("compare", "graded model " + c.id, g.graded_residual < cfg.tol, g.graded_residual,
                                    pt + ", chart " + c.id, "isomorphism of bundles of W ⊗ K-modules", g.to_json()));
      }
    }
  }
  return rep;
}

}  // namespace

const char* status_name(Status s) {
  switch (s) {
    case Status::Pass: return "pass";
    case Status::Fail: return "fail";
    case Status::Undefined: return "undefined";
  }
  return "?";
}

json CheckRecord::to_json() const {
  return {{"suite", suite}, {"id", id}, {"status", status_name(status)}, {"residual", residual},
          {"location", location}, {"anchor", anchor}, {"detail", detail}};
}

bool Report::passed() const {
  return std::none_of(checks.begin(), checks.end(), [](const CheckRecord& c) { return c.status == Status::Fail; });
}

void Report::append(const Report& o) { checks.insert(checks.end(), o.checks.begin(), o.checks.end()); }

json Report::to_json() const {
  json cs = json::array();
  int counts[3] = {0, 0, 0};
  for (const auto& c : checks) {
    cs.push_back(c.to_json());
    ++counts[static_cast<int>(c.status)];
  }
  return {{"config", config}, {"checks", cs}, {"passed", passed()},
          {"summary", {{"pass", counts[0]}, {"fail", counts[1]}, {"undefined", counts[2]}}}};
}

int RunConfig::cap_for(const std::string& suite) const {
  if (cap > 0) return cap;
  if (suite == "moyal" || suite == "poisson") return 8;
  if (suite == "stack") return 7;
  return 6;
}

void RunConfig::validate() const {
  if (cap != 0 && cap < 2) throw ConfigError("/cap", "cap must be at least 2");
  if (jet_order < 2) throw ConfigError("/jet_order", "jet order must be at least 2");
  if (!(tol > 0)) throw ConfigError("/tol", "tolerance must be positive");
  if (workers < 1) throw ConfigError("/workers", "need at least one worker");
  for (std::size_t k = 0; k < suites.size(); ++k)
    if (!is_suite(suites[k])) throw ConfigError("/suites/" + std::to_string(k), "unknown suite " + suites[k]);
}

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("", "run config must be an object");
  RunConfig c;
  for (const auto& [key, v] : j.items()) {
    const std::string at = "/" + key;
    try {
      if (key == "cap") c.cap = v.get<int>();
      else if (key == "jet_order") c.jet_order = v.get<int>();
      else if (key == "tol") c.tol = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "suites") c.suites = v.get<std::vector<std::string>>();
      else if (key == "inputs") c.inputs = v.get<std::vector<std::string>>();
      else if (key == "report") c.report = v.get<std::string>();
      else if (key == "workers") c.workers = v.get<int>();
      else throw ConfigError(at, "unknown key");
    } catch (const json::exception& e) {
      throw ConfigError(at, e.what());
    }
  }
  c.validate();
  return c;
}

json RunConfig::to_json() const {
  return {{"cap", cap}, {"jet_order", jet_order}, {"tol", tol}, {"seed", seed}, {"suites", suites}, {"inputs", inputs}};
}

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("", "cannot read " + path);
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("", path + ": invalid JSON: " + e.what());
  }
}

namespace {

void require(bool ok, const std::string& pointer, const std::string& what) {
  if (!ok) throw ConfigError(pointer, what);
}

void check_lagrangian_schema(const json& j) {
  require(j.contains("n") && j["n"].is_number_integer() && j["n"].get<int>() > 0, "/n", "positive integer required");
  const int n = j["n"];
  require(j.contains("points") && j["points"].is_array(), "/points", "array required");
  for (std::size_t p = 0; p < j["points"].size(); ++p) {
    const auto& q = j["points"][p];
    require(q.is_array() && static_cast<int>(q.size()) == 2 * n, "/points/" + std::to_string(p),
            "point needs " + std::to_string(2 * n) + " coordinates");
  }
  require(j.contains("charts") && j["charts"].is_array() && !j["charts"].empty(), "/charts", "non-empty array required");
  for (std::size_t c = 0; c < j["charts"].size(); ++c) {
    const std::string at = "/charts/" + std::to_string(c);
    const auto& ch = j["charts"][c];
    require(ch.is_object(), at, "object required");
    require(ch.contains("id") && ch["id"].is_string(), at + "/id", "string required");
    require(ch.contains("F") && ch["F"].is_object() && ch["F"].contains("nvars") && ch["F"].contains("terms"),
            at + "/F", "polynomial {nvars, terms} required");
    if (ch.contains("xi_free")) {
      require(ch["xi_free"].is_array(), at + "/xi_free", "array required");
      std::vector<int> seen;
      for (const auto& k : ch["xi_free"]) {
        require(k.is_number_integer() && k.get<int>() >= 0 && k.get<int>() < n, at + "/xi_free", "slot out of range");
        require(std::find(seen.begin(), seen.end(), k.get<int>()) == seen.end(), at + "/xi_free",
                "subdivision blocks overlap in chart " + ch["id"].get<std::string>());
        seen.push_back(k.get<int>());
      }
    }
  }
}

}  // namespace

SuiteInputs load_inputs(const std::vector<std::string>& paths, const RunConfig& cfg) {
  SuiteInputs in;
  for (const auto& path : paths) {
    json j = read_json_file(path);
    const std::string name = std::filesystem::path(path).stem().string();
    try {
      if (j.contains("transitions")) {
        Atlas a = Atlas::from_json(j);
        try {
          a.validate(cfg.jet_order, cfg.tol);
        } catch (const Error& e) {
          throw ConfigError("/transitions", e.what());
        }
        in.atlases.emplace_back(name, a);
      } else if (j.contains("charts")) {
        check_lagrangian_schema(j);
        LagrangianConfig c;
        try {
          c = LagrangianConfig::from_json(j);
        } catch (const Error& e) {
          throw ConfigError("/charts", e.what());
        }
        if (c.name.empty()) c.name = name;
        in.lagrangians.push_back(c);
      } else {
        throw ConfigError("", "neither a Lagrangian config nor an atlas");
      }
    } catch (const ConfigError& e) {
      throw ConfigError(path + "#" + e.pointer, e.detail);
    } catch (const json::exception& e) {
      throw ConfigError(path + "#", e.what());
    } catch (const Error& e) {
      throw ConfigError(path + "#", e.what());
    }
  }
  return in;
}

std::vector<std::string> bundled_configs(const std::string& dir) {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".json") out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"moyal",    "poisson", "gaussian", "weil",   "maslov",
                                                 "geometry", "stack",   "module",   "compare"};
  return names;
}

bool is_suite(const std::string& name) {
  const auto& n = suite_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

Report run_suite(const std::string& name, const RunConfig& cfg, const SuiteInputs& in) {
  try {
    if (name == "moyal") return moyal_suite(cfg);
    if (name == "poisson") return poisson_suite(cfg);
    if (name == "gaussian") return gaussian_suite(cfg);
    if (name == "weil") return weil_suite(cfg);
    if (name == "maslov") return maslov_suite(cfg);
    if (name == "geometry") return geometry_suite(cfg, in);
    if (name == "stack") return stack_suite(cfg);
    if (name == "module") return module_suite(cfg, in);
    if (name == "compare") return compare_suite(cfg, in);
  } catch (const Error& e) {
    Report r;
    r.checks.push_back(record(name, "run", false, 1.0, name, "", {{"error", e.what()}}));
    return r;
  }
  throw ConfigError("/suites", "unknown suite " + name);
}

Report run_verification(const RunConfig& cfg, const SuiteInputs& in) {
  Report rep;
  rep.config = cfg.to_json();
  std::vector<Report> parts(cfg.suites.size());
  for (std::size_t lo = 0; lo < cfg.suites.size(); lo += cfg.workers) {
    std::vector<std::future<Report>> jobs;
    const std::size_t hi = std::min(cfg.suites.size(), lo + cfg.workers);
    for (std::size_t k = lo; k < hi; ++k)
      jobs.push_back(std::async(std::launch::async, [&, k] { return run_suite(cfg.suites[k], cfg, in); }));
    for (std::size_t k = lo; k < hi; ++k) parts[k] = jobs[k - lo].get();
  }
  for (const auto& p : parts) rep.append(p);
  return rep;
}

}  // namespace jq

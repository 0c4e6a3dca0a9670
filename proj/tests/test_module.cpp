#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "jetquant/lagrangian_module.hpp"

using namespace jq;

namespace {

RationalPoly poly(int n, std::vector<std::pair<Rational, std::vector<int>>> terms) {
  RationalPoly p;
  p.nvars = n;
  for (auto& [c, e] : terms)
    if (c != 0) p.terms[e] += c;
  return p;
}

LagrangianChartData chart(int n, std::vector<int> xi_free, RationalPoly F, std::string base = "") {
  LagrangianChartData d;
  d.base_chart = base;
  d.n = n;
  d.xi_free = xi_free;
  d.F = F;
  return d;
}

// L = {xi = k x}: graph and fiber charts through x = x0.
PhaseChart kx_graph(Rational k, Rational x0, Rational c = 0) {
  return phase_from_generating(chart(1, {}, poly(1, {{k / 2, {2}}, {c, {0}}})), {x0}, "graph");
}
PhaseChart kx_fiber(Rational k, Rational x0) {
  return phase_from_generating(chart(1, {0}, poly(1, {{Rational(-1) / (2 * k), {2}}})), {k * x0}, "fiber");
}

// Bundled n = 2 example: F = x1^3/3 + x1 x2 + x2^2 and its partial Legendre transform in x2.
const std::vector<Rational> kMixedPoint = {Rational(1, 2), Rational(1, 3), Rational(7, 12), Rational(7, 6)};
PhaseChart mixed_graph() {
  return phase_from_generating(chart(2, {}, poly(2, {{Rational(1, 3), {3, 0}}, {1, {1, 1}}, {1, {0, 2}}})),
                               {Rational(1, 2), Rational(1, 3)}, "graph");
}
PhaseChart mixed_partial() {
  // x1^3/3 - (xi2 - x1)^2 / 4
  auto F = poly(2, {{Rational(1, 3), {3, 0}}, {Rational(-1, 4), {0, 2}}, {Rational(1, 2), {1, 1}}, {Rational(-1, 4), {2, 0}}});
  return phase_from_generating(chart(2, {1}, F), {Rational(1, 2), Rational(7, 6)}, "partial");
}

Series random_amplitude(const LayoutPtr& l, std::mt19937& rng, int max_deg) {
  std::uniform_real_distribution<double> u(-1, 1);
  Series s(l);
  for (int t = 0; t < 8; ++t) {
    Exponent x(l->size(), 0);
    int left = std::uniform_int_distribution<int>(0, max_deg)(rng);
    for (std::size_t k = 0; k < l->size(); ++k) {
      x[k] = std::uniform_int_distribution<int>(0, left / l->weights[k])(rng);
      left -= x[k] * l->weights[k];
    }
    s.add(x, {u(rng), u(rng)});
  }
  return s;
}

Series random_symbol(const WeylAlgebra& A, std::mt19937& rng, int max_deg, const std::vector<std::string>& params = {}) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<std::size_t> vars(A.x.begin(), A.x.end());
  vars.insert(vars.end(), A.xi.begin(), A.xi.end());
  vars.push_back(A.h);
  for (const auto& p : params) vars.push_back(A.layout->index(p));
  Series s = A.zero();
  for (int t = 0; t < 8; ++t) {
    Exponent x(A.layout->size(), 0);
    std::shuffle(vars.begin(), vars.end(), rng);
    int left = std::uniform_int_distribution<int>(0, max_deg)(rng);
    for (auto k : vars) {
      x[k] = std::uniform_int_distribution<int>(0, left / A.layout->weights[k])(rng);
      left -= x[k] * A.layout->weights[k];
    }
    s.add(x, {u(rng), u(rng)});
  }
  return s;
}

// Charts of a linear L = {xi = H x} in R^4 for every subdivision, through the point x0.
PhaseChart linear_chart(const RationalMatrix& H, std::vector<int> S, const std::vector<Rational>& x0) {
  RationalMatrix basis(4, std::vector<Rational>(2));
  for (int i = 0; i < 2; ++i) {
    basis[i][i] = 1;
    for (int j = 0; j < 2; ++j) basis[2 + i][j] = H[i][j];
  }
  std::vector<int> I;
  for (int k = 0; k < 2; ++k)
    if (std::find(S.begin(), S.end(), k) == S.end()) I.push_back(k);
  LagrangianFrame f = chart_parameters(basis, I);
  // hessian() is ordered (x_I, xi_J); slots are 0, 1.
  std::vector<int> order = I;
  for (int k : S) order.push_back(k);
  RationalMatrix Q = f.hessian();
  RationalPoly F;
  F.nvars = 2;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      std::vector<int> e(2, 0);
      e[order[a]] += 1;
      e[order[b]] += 1;
      F.terms[e] += Q[a][b] / 2;
    }
  for (auto it = F.terms.begin(); it != F.terms.end();) it = it->second == 0 ? F.terms.erase(it) : std::next(it);
  std::vector<Rational> pt(4);
  for (int i = 0; i < 2; ++i) {
    pt[i] = x0[i];
    pt[2 + i] = H[i][0] * x0[0] + H[i][1] * x0[1];
  }
  PhaseChart c = phase_from_generating(chart(2, S, F), free_coordinates(chart(2, S, F), pt), "S" + std::to_string(S.size()));
  return c;
}

}  // namespace

TEST_CASE("phase functions from generating functions") {
  PhaseChart z = phase_from_generating(chart(1, {}, poly(1, {})), {0});
  CHECK(z.phi.phi.terms.size() == 1);
  CHECK(z.phi.phi.terms.at({0, 2}) == Rational(1, 2));

  PhaseChart g = kx_graph(3, 0);
  // k x^2/2 + (theta - k x)^2 / 2
  CHECK(g.phi.phi.terms.at({2, 0}) == Rational(3, 2) + Rational(9, 2));
  CHECK(g.phi.phi.terms.at({1, 1}) == -3);
  CHECK(g.phi.phi.terms.at({0, 2}) == Rational(1, 2));

  // condition (i) recovers the chart's equations at the base point
  PhaseChart m = mixed_graph();
  CHECK(m.point() == kMixedPoint);
  CHECK(mixed_partial().point() == kMixedPoint);
  PhaseFunction phi = m.phi;
  std::vector<Rational> xt = kMixedPoint;
  for (int k = 0; k < 2; ++k) {
    CHECK(phi.phi.derivative(2 + k).evaluate(xt) == 0);
    CHECK(phi.phi.derivative(k).evaluate(xt) == kMixedPoint[2 + k]);
  }

  CHECK_THROWS_AS(phase_from_generating(chart(2, {1, 1}, poly(2, {})), {0, 0}), Error);
  CHECK_THROWS_AS(phase_from_generating(chart(2, {}, poly(1, {})), {0, 0}), Error);
  CHECK_THROWS_AS(m.moved({0, 0, 1, 0}), Error);
  PhaseChart back = PhaseChart::from_json(m.to_json());
  CHECK(back.point() == m.point());
}

TEST_CASE("normal form of raw jets") {
  const int cap = 6;
  LayoutPtr rl = RawModuleJet::layout(1, cap);
  PhaseChart z = phase_from_generating(chart(1, {}, poly(1, {})), {0});
  // theta-hat^2 integrates to i h
  RawModuleJet raw = RawModuleJet::make(z, Series::variable(rl, "th1", 1.0) * Series::variable(rl, "th1", 1.0));
  ModuleJet m = normalize(raw);
  LayoutPtr l = module_layout(1, cap);
  CHECK(distance(m.scalar.as_series(l) * m.scalar.phase8() * m.amplitude, Series::variable(l, "h", cplx(0, 1))) < 1e-12);
  ModuleJet again = normalize(m);
  CHECK(distance(again.amplitude, m.amplitude) == 0);

  std::mt19937 rng(7);
  std::vector<PhaseChart> charts = {kx_graph(2, Rational(1, 3)), kx_fiber(-3, Rational(1, 2)), mixed_graph(), mixed_partial()};
  for (const PhaseChart& c : charts) {
    LayoutPtr L = RawModuleJet::layout(c.n(), cap);
    for (int t = 0; t < 5; ++t) {
      Series a = random_amplitude(L, rng, cap - 2), b = random_amplitude(L, rng, cap - 2);
      RawModuleJet r = RawModuleJet::make(c, a);
      ModuleJet base = normalize(r);
      for (int k = 0; k < c.n(); ++k) {
        RawModuleJet s = r;
        s.amplitude = a + r.relation(b, k);
        CHECK(distance(normalize(s).amplitude, base.amplitude) < 1e-9);
      }
      // the printed action on raw jets descends to the normal form
      for (int k = 0; k < c.n(); ++k) {
        WeylAlgebra A = WeylAlgebra::make(c.n(), cap);
        CHECK(distance(normalize(raw_act_x(k, r)).amplitude, module_act(A, A.xhat(k), base).amplitude) < 1e-9);
        CHECK(distance(normalize(raw_act_xi(k, r)).amplitude, module_act(A, A.xihat(k), base).amplitude) < 1e-9);
      }
    }
  }
}

namespace {

Series full(const ModuleJet& m) { return m.scalar.as_series(m.amplitude.layout_ptr()) * m.scalar.phase8() * m.amplitude; }

Rational exponent(const ModuleJet& m) { return m.scalar.exact_exponent.value_or(Rational(0)); }

std::vector<PhaseChart> action_charts() {
  return {kx_graph(2, Rational(1, 3)), kx_fiber(-3, Rational(1, 2)),
          phase_from_generating(chart(1, {}, poly(1, {{Rational(1, 3), {3}}, {1, {2}}})), {Rational(1, 4)}, "cubic"),
          mixed_graph(), mixed_partial()};
}

}  // namespace

TEST_CASE("module action") {
  const int cap = 6;
  LayoutPtr l = module_layout(1, cap);
  WeylAlgebra A = WeylAlgebra::make(1, cap);
  Series y = Series::variable(l, "y1");
  PhaseChart z = phase_from_generating(chart(1, {}, poly(1, {})), {0});
  ModuleJet m = ModuleJet::make(z, y * y * y);
  CHECK(distance(module_act(A, A.xihat(0), m).amplitude, y * y * cplx(0, 3) * Series::variable(l, "h")) < 1e-12);
  CHECK(distance(module_act(A, A.xhat(0), m).amplitude, y * y * y * y) < 1e-12);

  ModuleJet one = ModuleJet::make(kx_graph(5, 0), Series::constant(l, 1.0));
  CHECK(distance(module_act(A, A.xihat(0), one).amplitude, -5.0 * y) < 1e-12);

  std::mt19937 rng(11);
  for (const PhaseChart& c : action_charts()) {
    WeylAlgebra B = WeylAlgebra::make(c.n(), cap);
    LayoutPtr L = module_layout(c.n(), cap);
    for (int t = 0; t < 4; ++t) {
      ModuleJet j = ModuleJet::make(c, random_amplitude(L, rng, cap));
      Series f = random_symbol(B, rng, 3), g = random_symbol(B, rng, 3);
      Series lhs = module_act(B, moyal_star(B, f, g), j).amplitude;
      Series rhs = module_act(B, f, module_act(B, g, j)).amplitude;
      CHECK(distance(lhs, rhs) < 1e-9);
      CHECK(distance(module_act(B, B.constant(1.0), j).amplitude, j.amplitude) == 0);
    }
  }
}

TEST_CASE("transitions between phase charts") {
  const int cap = 6;
  LayoutPtr l = module_layout(1, cap);
  ModuleJet one = ModuleJet::make(kx_graph(2, Rational(1, 3)), Series::constant(l, 1.0));
  ModuleJet same = module_transition(one.chart, one);
  CHECK(distance(full(same), full(one)) < 1e-12);
  CHECK(exponent(same) == 0);

  for (int k : {1, -1, 2, -3}) {
    ModuleJet g = ModuleJet::make(kx_graph(k, Rational(1, 2)), Series::constant(l, 1.0));
    ModuleJet f = module_transition(kx_fiber(k, Rational(1, 2)), g);
    cplx expect = std::polar(1.0 / std::sqrt(std::abs(k)), std::numbers::pi * (k > 0 ? 1 : -1) / 4);
    CHECK(std::abs(full(f).constant_term() - expect) < 1e-12);
    ModuleJet back = module_transition(g.chart, f);
    CHECK(distance(full(back), full(g)) < 1e-10);
    CHECK(exponent(back) == 0);
  }

  // constant shifts of F only move the exponent
  ModuleJet shifted = module_transition(kx_graph(2, Rational(1, 3), Rational(1, 3)), one);
  CHECK(exponent(shifted) == Rational(-1, 3));
  CHECK(distance(full(shifted), full(one)) < 1e-12);
  CHECK_THROWS_AS(module_transition(kx_graph(3, Rational(1, 3)), one), Error);

  std::mt19937 rng(5);
  RationalMatrix H = {{2, 1}, {1, 3}};
  std::vector<Rational> x0 = {Rational(1, 2), Rational(-1, 3)};
  std::vector<PhaseChart> cs = {linear_chart(H, {}, x0), linear_chart(H, {0}, x0), linear_chart(H, {1}, x0),
                                linear_chart(H, {0, 1}, x0)};
  LayoutPtr L = module_layout(2, cap);
  for (int t = 0; t < 3; ++t)
    for (std::size_t a = 0; a < cs.size(); ++a)
      for (std::size_t b = 0; b < cs.size(); ++b)
        for (std::size_t c = 0; c < cs.size(); ++c) {
          ModuleJet m = ModuleJet::make(cs[a], random_amplitude(L, rng, cap));
          ModuleJet two = module_transition(cs[c], module_transition(cs[b], m));
          ModuleJet direct = module_transition(cs[c], m);
          CHECK(distance(full(two), full(direct)) < 1e-9);
        }

  ModuleJet n2 = ModuleJet::make(mixed_graph(), random_amplitude(L, rng, cap));
  ModuleJet there = module_transition(mixed_partial(), n2);
  CHECK(distance(full(module_transition(mixed_graph(), there)), full(n2)) < 1e-9);
}

TEST_CASE("scalar cocycle") {
  const int cap = 6;
  for (int k : {1, -1, 2, -3}) {
    ScalarCocycle s = extract_scalar_cocycle(kx_graph(k, Rational(1, 2)), kx_fiber(k, Rational(1, 2)), cap);
    CHECK(s.mu2 == (k > 0 ? 1 : -1));
    CHECK(s.maslov_mu2 == s.mu2);
    CHECK(s.unit_residual < 1e-12);
    CHECK(s.consistent);
  }
  ScalarCocycle id = extract_scalar_cocycle(mixed_graph(), mixed_graph(), cap);
  CHECK(id.mu2 == 0);
  CHECK(id.alpha == 0);
  CHECK(std::abs(id.g.constant_term() - 1.0) < 1e-12);
  ScalarCocycle mixed = extract_scalar_cocycle(mixed_graph(), mixed_partial(), cap);
  CHECK(mixed.consistent);
  CHECK(mixed.to_json().at("mu2") == mixed.mu2);
}

TEST_CASE("transitions intertwine the actions") {
  const int cap = 5;
  std::mt19937 rng(3);
  std::vector<std::pair<PhaseChart, PhaseChart>> pairs = {{kx_graph(2, Rational(1, 3)), kx_fiber(2, Rational(1, 3))},
                                                          {mixed_graph(), mixed_partial()},
                                                          {mixed_partial(), mixed_graph()}};
  for (auto& [s, t] : pairs) {
    WeylAlgebra A = WeylAlgebra::make(s.n(), cap);
    LayoutPtr L = module_layout(s.n(), cap);
    for (int r = 0; r < 4; ++r) {
      ModuleJet m = ModuleJet::make(s, random_amplitude(L, rng, cap));
      Series w = random_symbol(A, rng, 3);
      ModuleJet lhs = module_transition(t, module_act(A, w, m));
      ModuleJet rhs = module_act(A, w, module_transition(t, m));
      CHECK(distance(full(lhs), full(rhs)) < 1e-9);
    }
  }

  // base change x_source = x + x^2 between graph charts
  const Rational x = Rational(1, 5), u = x + x * x;
  PhaseChart src = phase_from_generating(chart(1, {}, poly(1, {{Rational(1, 2), {2}}}), "a"), {u}, "a");
  PhaseChart tgt = phase_from_generating(
      chart(1, {}, poly(1, {{Rational(1, 2), {2}}, {1, {3}}, {Rational(1, 2), {4}}}), "b"), {x}, "b");
  BaseMap g = BaseMap::from_json(json::parse(R"({"dim": 1, "num": [[[1, [1]], [1, [2]]]]})"));
  WeylAlgebra A = WeylAlgebra::make(1, cap);
  LayoutPtr L = module_layout(1, cap);
  CotangentTransition ct = cotangent_weyl_transition(A, g, {to_double(x)}, module_covector(tgt));
  for (int r = 0; r < 4; ++r) {
    ModuleJet m = ModuleJet::make(src, random_amplitude(L, rng, cap));
    Series w = random_symbol(A, rng, 3);
    ModuleJet lhs = module_transition(tgt, module_act(A, w, m), g);
    ModuleJet rhs = module_act(A, ct.apply(A, w), module_transition(tgt, m, g));
    CHECK(distance(full(lhs), full(rhs)) < 1e-9);
  }
  CHECK_THROWS_AS(module_transition(tgt, ModuleJet::make(kx_fiber(1, u), Series::constant(L, 1.0)), g), Error);
}

TEST_CASE("connection") {
  const int cap = 6;
  const std::vector<std::string> base = {"p1", "p2"};
  std::mt19937 rng(17);
  for (const PhaseChart& c : {mixed_graph(), mixed_partial()}) {
    LayoutPtr l = module_layout(2, cap, base);
    ModuleJet one = ModuleJet::make(c, Series::constant(l, 1.0), base);
    for (const ModuleJet& d : connection_apply(one)) CHECK(d.amplitude.is_zero());

    // jets of a global function f(p + y)
    Series f = Series::constant(l, 0.0);
    for (int k = 0; k < 2; ++k) {
      Series s = Series::variable(l, k) + Series::variable(l, base[k]);
      f += power(s, 3) * cplx(k + 1.0, -1.0) + s * s * Series::variable(l, "h");
    }
    for (const ModuleJet& d : connection_apply(ModuleJet::make(c, f, base))) CHECK(d.amplitude.max_abs() < 1e-12);

    WeylAlgebra A = WeylAlgebra::make(2, cap, base);
    LayoutPtr low = with_cap(l, cap - 1);
    for (int t = 0; t < 4; ++t) {
      ModuleJet m = ModuleJet::make(c, random_amplitude(l, rng, cap), base);
      Series w = random_symbol(A, rng, 3, base);
      auto lhs = connection_apply(module_act(A, w, m));
      auto dw = algebra_connection_apply(A, c, w, base);
      auto dm = connection_apply(m);
      for (int j = 0; j < 2; ++j) {
        Series rhs = module_act(A, dw[j], m).amplitude + module_act(A, w, dm[j]).amplitude;
        CHECK(distance(lhs[j].amplitude.relayout(low), rhs.relayout(low)) < 1e-9);
      }
    }
  }
  CHECK_THROWS_AS(connection_apply(ModuleJet::make(mixed_graph(), Series::constant(module_layout(2, cap), 1.0))),
                  Error);
}

TEST_CASE("canonical operator") {
  const int cap = 6;
  WeylAlgebra A = WeylAlgebra::make(1, cap);
  PhaseChart z = phase_from_generating(chart(1, {}, poly(1, {})), {0});
  std::mt19937 rng(23);
  Series w = random_symbol(A, rng, 4);
  CHECK(distance(canonical_operator(A, z).transport(A, w), w) < 1e-12);
  CanonicalOperator k = canonical_operator(A, kx_graph(4, Rational(1, 2)));
  CHECK(distance(k.transport(A, A.xihat(0)), A.xihat(0) - 4.0 * A.xhat(0)) < 1e-12);
  CHECK(std::abs(k.hessian(0, 0) - 4.0) < 1e-12);
  CHECK(k.higher.is_zero());
  CanonicalOperator f = canonical_operator(A, kx_fiber(2, 1));
  CHECK(distance(f.transport(A, A.xihat(0)), -A.xhat(0)) < 1e-12);

  for (const PhaseChart& c : action_charts()) {
    WeylAlgebra B = WeylAlgebra::make(c.n(), cap);
    LayoutPtr l = module_layout(c.n(), cap);
    CanonicalOperator h = canonical_operator(B, c);
    Series phase = phase_jet(c, l);
    for (int t = 0; t < 4; ++t) {
      Series b = random_amplitude(l, rng, cap), s = random_symbol(B, rng, 3);
      CHECK(distance(module_act_amplitude(B, s, phase, c, b), standard_act(B, h.transport(B, s), b)) < 1e-9);
    }
  }
}

TEST_CASE("comparison with the zero section") {
  const int cap = 6;
  PhaseChart z = phase_from_generating(chart(1, {}, poly(1, {})), {0});
  MainTheoremReport r0 = compare_zero_section(z, z, cap);
  CHECK(r0.ok());
  CHECK(r0.mu2 == 0);
  for (int k : {1, -1, 2}) {
    MainTheoremReport r = compare_zero_section(kx_graph(k, Rational(1, 2)), kx_fiber(k, Rational(1, 2)), cap);
    CHECK_MESSAGE(r.ok(), r.to_json().dump());
    CHECK(r.mu2 == (k > 0 ? 1 : -1));
  }
  MainTheoremReport m = compare_zero_section(mixed_graph(), mixed_partial(), cap);
  CHECK_MESSAGE(m.ok(), m.to_json().dump());
  MainTheoremReport back = compare_zero_section(mixed_partial(), mixed_graph(), cap);
  CHECK_MESSAGE(back.ok(), back.to_json().dump());
  CHECK(back.alpha == -m.alpha);
}

TEST_CASE("conormal model and grading") {
  const int cap = 5;
  WeylAlgebra A = WeylAlgebra::make(1, cap);
  ConormalJet one{A.constant(1.0)};
  CHECK(conormal_module_act(A, A.xihat(0), one).amplitude.is_zero());
  CHECK(distance(conormal_module_act(A, A.xhat(0), one).amplitude, A.xhat(0)) == 0);
  for (const PhaseChart& c : action_charts()) {
    GradingReport g = grading_compare(c, cap);
    CHECK(g.zero_section_residual == 0);
    CHECK(g.ok(1e-9));
  }
}

TEST_CASE("configuration round trip") {
  json j = json::parse(R"({"name": "line", "n": 1, "points": [["1/2", "1"]],
    "charts": [{"id": "graph", "base_chart": "", "xi_free": [], "F": {"nvars": 1, "terms": [{"c": "1", "exp": [2]}]}},
               {"id": "fiber", "base_chart": "", "xi_free": [0], "F": {"nvars": 1, "terms": [{"c": "-1/4", "exp": [2]}]}}]})");
  LagrangianConfig c = LagrangianConfig::from_json(j);
  REQUIRE(c.charts.size() == 2);
  CHECK(c.charts[1].point() == c.charts[0].point());
  LagrangianConfig again = LagrangianConfig::from_json(c.to_json());
  CHECK(again.to_json() == c.to_json());
  j["charts"][1]["F"]["terms"][0]["c"] = "1";
  CHECK_THROWS_AS(LagrangianConfig::from_json(j), Error);
}

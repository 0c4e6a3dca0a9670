#include <doctest.h>

#include <random>

#include "jetquant/geometry.hpp"

using namespace jq;

namespace {

const cplx I(0, 1);

// Random symbol in the formal variables (and optionally the listed parameters).
Series random_symbol(const WeylAlgebra& A, std::mt19937& rng, int max_deg, int min_deg = 0,
                     const std::vector<std::string>& params = {}) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_int_distribution<int> e(0, max_deg);
  std::vector<std::size_t> vars(A.x.begin(), A.x.end());
  vars.insert(vars.end(), A.xi.begin(), A.xi.end());
  vars.push_back(A.h);
  for (const auto& p : params) vars.push_back(A.layout->index(p));
  Series s = A.zero();
  for (int t = 0; t < 8; ++t) {
    Exponent x(A.layout->size(), 0);
    for (auto k : vars) x[k] = e(rng);
    const int d = A.layout->degree(x), f = A.formal_degree(x);
    if (d > max_deg || f < min_deg) continue;
    s.add(x, {u(rng), u(rng)});
  }
  return s;
}

// x / (1 - x) and its inverse x / (1 + x).
Atlas mobius_atlas() {
  return Atlas::from_json(json::parse(R"({
    "dim": 1, "charts": ["alpha", "beta"],
    "transitions": [
      {"alpha": "alpha", "beta": "beta", "map": {"num": [[[1, [1]]]], "den": [[[1, [0]], [-1, [1]]]]},
       "points": [[0.1], [0.3], [-0.4], [0.45], [-0.2]]},
      {"alpha": "beta", "beta": "alpha", "map": {"num": [[[1, [1]]]], "den": [[[1, [0]], [1, [1]]]]},
       "points": [[0.2], [-0.3]]}
    ]})"));
}

BaseMap square_map() {
  return BaseMap::from_json(json::parse(R"({"dim": 1, "num": [[[1, [2]]]]})"));
}

}  // namespace

TEST_CASE("jet transitions") {
  auto A = WeylAlgebra::make(1, 6);
  Series x = A.xhat(0);
  CHECK(distance(jet_transition(A, BaseMap::identity(1), {0.7})[0], x) < 1e-15);
  CHECK(distance(jet_transition(A, square_map(), {1.0})[0], 2.0 * x + x * x) < 1e-14);
  BaseMap shift = BaseMap::from_json(json::parse(R"({"dim": 1, "num": [[[1, [1]], [2.5, [0]]]]})"));
  CHECK(distance(jet_transition(A, shift, {0.3})[0], x) < 1e-14);
  CHECK_THROWS_AS(jet_transition(A, square_map(), {0.0}), Error);

  auto at = mobius_atlas();
  CHECK_NOTHROW(at.validate(6, 1e-9));
  auto bad = at;
  bad.transitions[1].map.den[0] = bad.transitions[1].map.den[0] + Series::variable(BaseMap::poly_layout(1), 0);
  try {
    bad.validate(6, 1e-9);
    FAIL("expected an ingestion error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("(beta, alpha, beta)") != std::string::npos);
  }
  CHECK(Atlas::from_json(at.to_json()).transitions.size() == 2);
}

TEST_CASE("cotangent Weyl transitions") {
  auto A = WeylAlgebra::make(2, 6);
  auto id = cotangent_weyl_transition(A, BaseMap::identity(2), {0.1, 0.2}, {0.3, -0.4});
  for (int k = 0; k < 2; ++k) {
    CHECK(distance(id.apply(A, A.xhat(k)), A.xhat(k)) < 1e-14);
    CHECK(distance(id.apply(A, A.xihat(k)), A.xihat(k)) < 1e-14);
  }
  // B = [[2, 1], [0, 1]], B^{-t} = [[1/2, 0], [-1/2, 1]]
  auto lin = cotangent_weyl_transition(A, BaseMap::linear({{2, 1}, {0, 1}}), {0.5, 1.0}, {1.0, 2.0});
  CHECK(distance(lin.apply(A, A.xhat(0)), 2.0 * A.xhat(0) + A.xhat(1)) < 1e-13);
  CHECK(distance(lin.apply(A, A.xhat(1)), A.xhat(1)) < 1e-13);
  CHECK(distance(lin.apply(A, A.xihat(0)), 0.5 * A.xihat(0)) < 1e-13);
  CHECK(distance(lin.apply(A, A.xihat(1)), -0.5 * A.xihat(0) + A.xihat(1)) < 1e-13);
  CHECK(distance(lin.classical[3], -0.5 * A.xihat(0) + A.xihat(1)) < 1e-13);
  CHECK(lin.xi_a[0] == doctest::Approx(0.5));
  CHECK(lin.xi_a[1] == doctest::Approx(1.5));

  auto B = WeylAlgebra::make(1, 6);
  auto at = mobius_atlas();
  const BaseMap& g = at.find(0, 1)->map;
  auto t = cotangent_weyl_transition(B, g, {0.3}, {0.7});
  std::mt19937 rng(11);
  double worst = 0;
  for (int k = 0; k < 20; ++k) {
    Series f = random_symbol(B, rng, 4), h = random_symbol(B, rng, 4);
    worst = std::max(worst, distance(t.apply(B, moyal_star(B, f, h)), moyal_star(B, t.apply(B, f), t.apply(B, h))));
  }
  CHECK(worst < 1e-8);
  // the classical substitution is the leading symbol of the quantum one
  for (const Series& w : {B.xhat(0), B.xihat(0), B.xhat(0) * B.xihat(0) * B.xihat(0)}) {
    Series q = t.apply(B, w).slice(B.h, 0);
    Series c = compose(w, {t.classical[0], t.classical[1], B.hbar()});
    CHECK(distance(q, c) < 1e-10);
    CHECK(distance(t.apply_factored(B, w), t.apply(B, w)) < 1e-10);
  }
  // xi-hat goes to g'(x + x-hat)^{-1} (xi + xi-hat) - g'(x)^{-1} xi with g' = 1 / (1 - x)^2
  Series dsq = power(B.constant(0.7) - B.xhat(0), 2);
  CHECK(distance(t.classical[1], dsq * (B.constant(0.7) + B.xihat(0)) - B.constant(0.49 * 0.7)) < 1e-12);
  CHECK(t.xi_a[0] == doctest::Approx(0.49 * 0.7));
  CHECK_THROWS_AS(cotangent_weyl_transition(B, square_map(), {0.0}, {1.0}), Error);
}

TEST_CASE("transition cocycle on the two-chart atlas") {
  auto A = WeylAlgebra::make(1, 6);
  auto at = mobius_atlas();
  for (const auto& p : at.find(0, 1)->points) {
    CHECK(transition_cocycle_residual(A, at, 0, 1, 0, {p[0] / (1 + p[0])}, {0.8}) < 1e-8);
    CHECK(transition_cocycle_residual(A, at, 1, 0, 1, p, {-1.1}) < 1e-8);
  }
}

TEST_CASE("canonical connection") {
  auto base = cotangent_base_names(1);
  auto A = WeylAlgebra::make(1, 6, base);
  Series x = A.xhat(0), p = A.xihat(0);
  Series f = power(x, 3) + 2.0 * x;
  auto jet = WeylAlgebra::make(1, 6, {"bx1"});
  Series fj = power(jet.xhat(0), 3) + 2.0 * jet.xhat(0);
  auto dj = canonical_connection_apply(jet, fj, {"bx1"}, ConnectionModel::Jet);
  CHECK(distance(dj[0], -1.0 * fj.derivative(jet.x[0])) < 1e-14);
  auto dw = canonical_connection_apply(A, f, base, ConnectionModel::CotangentWeyl);
  CHECK(distance(dw[0], -1.0 * f.derivative(A.x[0])) < 1e-12);
  // the xi-direction acts through the x-hat commutator
  auto dx = canonical_connection_apply(A, p * p, base, ConnectionModel::CotangentWeyl);
  CHECK(distance(dx[1], bracket_over_ih(A, x, p * p)) < 1e-12);
  CHECK(distance(dx[1], -2.0 * p) < 1e-12);

  // prolongations of base functions are horizontal
  auto ul = BaseMap::poly_layout(2);
  Series u = Series::monomial(ul, {3, 1}, 1.0) - 2.0 * Series::monomial(ul, {0, 2}, 1.0) + Series::variable(ul, 0);
  Series s = prolongation(A, u, {0.4, -0.3}, base, ConnectionModel::CotangentWeyl);
  for (const auto& d : canonical_connection_apply(A, s, base, ConnectionModel::CotangentWeyl))
    CHECK(d.degree_range(0, 5).max_abs() < 1e-12);
  auto u1 = BaseMap::poly_layout(1);
  Series v = Series::monomial(u1, {4}, 1.0) - Series::variable(u1, 0);
  Series sj = prolongation(jet, v, {0.25}, {"bx1"}, ConnectionModel::Jet);
  CHECK(canonical_connection_apply(jet, sj, {"bx1"}, ConnectionModel::Jet)[0].degree_range(0, 5).max_abs() < 1e-12);
  // a section that is not a prolongation is not horizontal
  CHECK(canonical_connection_apply(jet, fj, {"bx1"}, ConnectionModel::Jet)[0].max_abs() > 0.5);
}

TEST_CASE("fedosov checks") {
  for (int n : {1, 2}) {
    auto base = cotangent_base_names(n);
    auto A = WeylAlgebra::make(n, 6, base);
    auto conn = canonical_connection(A, base);
    auto r = check_fedosov(A, conn);
    CHECK(r.ok(1e-12));
    CHECK(r.theta[0][n].coeff(Exponent(A.layout->size(), 0)) == cplx(-1.0));
    CHECK(r.higher_residual == 0.0);

    auto flipped = conn;
    flipped.coeff[0] = -1.0 * flipped.coeff[0];
    auto rf = check_fedosov(A, flipped);
    CHECK_FALSE(rf.normalization);
    CHECK_FALSE(rf.ok(1e-8));

    std::mt19937 rng(5 + n);
    for (int t = 0; t < 3; ++t) {
      Series sigma = random_symbol(A, rng, 5, 3, base);
      auto gauged = gauge_transform(A, conn, sigma);
      auto rg = check_fedosov(A, gauged);
      CHECK(rg.flatness_residual < 1e-8);
      CHECK(rg.symplectic_residual < 1e-8);
      CHECK(rg.higher_residual < 1e-8);
      CHECK(rg.theta_closed);
    }
  }
  auto A = WeylAlgebra::make(1, 6, cotangent_base_names(1));
  auto conn = canonical_connection(A, cotangent_base_names(1));
  conn.coeff[0] += A.xhat(0) * A.xhat(0) * A.xihat(0);
  CHECK_FALSE(check_fedosov(A, conn).flat);
  conn.coeff[0] = A.times_ih(A.xhat(0), -1);
  CHECK_THROWS_AS(check_fedosov(A, conn), Error);
}

TEST_CASE("gauge group arithmetic") {
  auto A = WeylAlgebra::make(1, 8);
  std::mt19937 rng(21);
  for (int t = 0; t < 5; ++t) {
    Series a = random_symbol(A, rng, 5, 3), b = random_symbol(A, rng, 5, 3), c = random_symbol(A, rng, 5, 3);
    CHECK(bch(A, a, -1.0 * a).max_abs() < 1e-12);
    CHECK(distance(bch(A, bch(A, a, b), c), bch(A, a, bch(A, b, c))) < 1e-9);
    for (const Series& w : {A.xhat(0), A.xihat(0)})
      CHECK(distance(exp_ad(A, bch(A, a, b), w), exp_ad(A, a, exp_ad(A, b, w))) < 1e-9);
  }
  CHECK(distance(bch(A, A.hbar(2.0), A.xhat(0) * A.xhat(0) * A.xhat(0)),
                 A.hbar(2.0) + A.xhat(0) * A.xhat(0) * A.xhat(0)) < 1e-14);
  CHECK_THROWS_AS(bch(A, A.xhat(0) * A.xihat(0), A.xhat(0) * A.xhat(0) * A.xhat(0)), Error);
}

TEST_CASE("L-compatibility") {
  auto base = cotangent_base_names(1);
  auto A = WeylAlgebra::make(1, 6, base);
  auto conn = canonical_connection(A, base);
  LagrangianChartData zero{"X", 1, {}, {}};
  zero.F.nvars = 1;
  Series normal = weyl_symbol(A, A.xhat(0) * A.xhat(0) * A.xihat(0));
  Series weyl = A.xhat(0) * A.xhat(0) * A.xihat(0);
  auto r = check_L_compatible(A, conn, zero, {0.2}, {normal, weyl});
  CHECK(r.preserved);
  REQUIRE(r.sigma_in_gL.size() == 2);
  CHECK(r.sigma_in_gL[0]);
  CHECK_FALSE(r.sigma_in_gL[1]);

  auto tilted = conn;
  tilted.coeff[0] += A.xhat(0) * A.xhat(0);
  auto t = check_L_compatible(A, tilted, zero, {0.2});
  CHECK_FALSE(t.preserved);
  CHECK(t.failing_generator == 0);
  CHECK(t.failing_direction == 0);

  for (int k : {1, -1, 2}) {
    LagrangianChartData graph{"X", 1, {}, {}};
    graph.F.nvars = 1;
    graph.F.terms[{2}] = Rational(k) / 2;
    CHECK(check_L_compatible(A, conn, graph, {0.5}).preserved);
    // the flat canonical connection does not see the curvature of a curved graph
    graph.F.terms[{3}] = Rational(1, 3);
    CHECK_FALSE(check_L_compatible(A, conn, graph, {0.5}).preserved);
  }
  LagrangianChartData fiber{"X", 1, {0}, {}};
  CHECK_THROWS_AS(check_L_compatible(A, conn, fiber, {0.0}), Error);
}

TEST_CASE("lifted cocycle on the two-chart atlas") {
  auto base = cotangent_base_names(1);
  auto A = WeylAlgebra::make(1, 6, base);
  auto conn = canonical_connection(A, base);
  auto at = mobius_atlas();
  const BaseMap& g = at.find(0, 1)->map;
  for (const auto& p : at.find(0, 1)->points) {
    auto r = check_lifted_cocycle(A, g, conn, conn, p, {0.6}, "alpha-beta");
    CHECK(r.residual < 1e-8);
  }
  auto single = check_lifted_cocycle(A, BaseMap::identity(1), conn, conn, {0.1}, {0.2});
  CHECK(single.residual < 1e-12);

  auto t = cotangent_weyl_transition(A, g, {0.3}, {0.6}, base);
  auto bad = t;
  bad.k.multiplier += t.work.times_ih(power(t.work.xhat(0), 3), -1) * t.work.param("bx1");
  auto rb = check_lifted_cocycle(A, g, bad, conn, conn, {0.3}, {0.6}, "alpha-beta");
  CHECK(rb.residual > 1e-3);
  CHECK(rb.location == "alpha-beta");
}

TEST_CASE("stack identities") {
  auto base = cotangent_base_names(1);
  auto A = WeylAlgebra::make(1, 7, base);
  auto conn = canonical_connection(A, base);
  Series zero = A.zero();
  auto triv = stack_identities(A, {conn, conn, conn}, zero, zero, zero);
  CHECK(triv.c.is_zero());
  CHECK(triv.ok(1e-12));

  std::mt19937 rng(99);
  std::uniform_real_distribution<double> u(-1, 1);
  int count = 0;
  for (int t = 0; t < 10; ++t) {
    Series s12 = random_symbol(A, rng, 5, 3), s23 = random_symbol(A, rng, 5, 3);
    auto c2 = gauge_transform(A, conn, -1.0 * s12);
    auto c3 = gauge_transform(A, c2, -1.0 * s23);
    Series s13 = bch(A, s12, s23);
    auto r = stack_identities(A, {conn, c2, c3}, s12, s23, s13);
    CHECK(r.c.max_abs() < 1e-9);
    // twist s13 by a horizontal element h^2 u(jets) of the first connection
    auto ul = BaseMap::poly_layout(2);
    Series uu = Series::monomial(ul, {2, 1}, u(rng)) + Series::monomial(ul, {0, 3}, u(rng));
    Series rho = A.hbar() * A.hbar() * prolongation(A, uu, {0.1, 0.2}, base, ConnectionModel::CotangentWeyl);
    rho = rho - A.constant(rho.constant_term());
    Series s13t = bch(A, -1.0 * rho, s13);
    auto rt = stack_identities(A, {conn, c2, c3}, s12, s23, s13t);
    CHECK(rt.unit_mod_h);
    CHECK(rt.horizontal_residual < 1e-8);
    CHECK(rt.ad_residual < 1e-8);
    CHECK(distance(rt.c, rho) < 1e-8);

    Series s14 = random_symbol(A, rng, 5, 3), s24 = random_symbol(A, rng, 5, 3), s34 = random_symbol(A, rng, 5, 3);
    CHECK(tetrahedron_residual(A, s12, s13t, s14, s23, s24, s34) < 1e-8);
    ++count;
  }
  CHECK(count == 10);
  CHECK_THROWS_AS(stack_identities(A, {conn, conn, conn}, random_symbol(A, rng, 5, 3), zero, zero), Error);
}

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "jetquant/stationary.hpp"

using namespace jq;

namespace {

Series random_poly(const LayoutPtr& l, std::mt19937& rng, int max_deg, bool no_constant = false) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_int_distribution<int> e(0, max_deg);
  Series s(l);
  for (int k = 0; k < 8; ++k) {
    Exponent x(l->size());
    for (auto& v : x) v = e(rng);
    if (l->degree(x) > max_deg) continue;
    if (no_constant && l->degree(x) == 0) continue;
    s.add(x, {u(rng), u(rng)});
  }
  return s;
}

// Direct distributive expansion without truncation, truncated at the end.
Series naive_product(const Series& a, const Series& b) {
  Series r(a.layout_ptr());
  for (const auto& [ea, ca] : a.terms())
    for (const auto& [eb, cb] : b.terms()) {
      Exponent f(ea.size());
      for (std::size_t i = 0; i < f.size(); ++i) f[i] = ea[i] + eb[i];
      r.add(f, ca * cb);
    }
  return r;
}

}  // namespace

TEST_CASE("difference of squares") {
  auto l = make_layout({"x"}, 6);
  Series x = Series::variable(l, 0);
  Series one = Series::constant(l, 1.0);
  Series p = (one + x) * (one - x);
  CHECK(distance(p, one - x * x) == 0.0);
}

TEST_CASE("truncation drops terms above the cap") {
  auto l = make_layout({"x", "h"}, 2);
  Series x = Series::variable(l, 0);
  Series s = x + Series::variable(l, "h");
  Series r = x * s * x;
  CHECK(r.is_zero());
}

TEST_CASE("product agrees with naive expansion and is commutative and associative") {
  std::mt19937 rng(7);
  auto l = make_layout({"x", "y", "h"}, 8);
  for (int t = 0; t < 30; ++t) {
    Series a = random_poly(l, rng, 4), b = random_poly(l, rng, 4), c = random_poly(l, rng, 4);
    CHECK(distance(a * b, naive_product(a, b)) < 1e-12);
    CHECK(distance(a * b, b * a) < 1e-12);
    CHECK(distance((a * b) * c, a * (b * c)) < 1e-12);
  }
}

TEST_CASE("json round trip with canonical ordering") {
  std::mt19937 rng(3);
  auto l = make_layout({"x", "h"}, 6);
  Series a = random_poly(l, rng, 6);
  Series b = Series::from_json(a.to_json());
  CHECK(distance(a, b.relayout(l)) == 0.0);
  CHECK(a.to_json().dump() == b.to_json().dump());
}

TEST_CASE("compose respects the weight of h") {
  auto l = make_layout({"x", "h"}, 6);
  Series x = Series::variable(l, 0), h = Series::variable(l, 1);
  Series f = x * x;
  Series r = compose(f, {x + h, h});
  CHECK(distance(r, x * x + 2.0 * h * x + h * h) < 1e-14);
  CHECK(distance(compose(f, {x, h}), f) == 0.0);
  CHECK_THROWS_AS(compose(f, {x + Series::constant(l, 1.0), h}), Error);
}

TEST_CASE("compose is associative on random cubics") {
  std::mt19937 rng(11);
  auto l = make_layout({"x", "y"}, 7);
  for (int t = 0; t < 10; ++t) {
    Series f = random_poly(l, rng, 3);
    std::vector<Series> g{random_poly(l, rng, 3, true), random_poly(l, rng, 3, true)};
    std::vector<Series> k{random_poly(l, rng, 3, true), random_poly(l, rng, 3, true)};
    Series lhs = compose(compose(f, g), k);
    Series rhs = compose(f, compose_maps(g, k));
    CHECK(distance(lhs, rhs) < 1e-10);
  }
}

TEST_CASE("invert_map") {
  auto l = make_layout({"x"}, 8);
  Series x = Series::variable(l, 0);
  auto h = invert_map({2.0 * x});
  CHECK(distance(h[0], 0.5 * x) < 1e-14);

  auto k = invert_map({x + x * x});
  // Catalan numbers with alternating signs.
  const double cat[] = {1, 1, 2, 5, 14, 42, 132, 429};
  for (int n = 1; n <= 8; ++n) CHECK(std::abs(k[0].coeff({n}) - cplx(std::pow(-1.0, n - 1) * cat[n - 1])) < 1e-10);
  CHECK(distance(compose(x + x * x, k), x) < 1e-10);

  std::mt19937 rng(5);
  auto l2 = make_layout({"x", "y", "h"}, 6);
  for (int t = 0; t < 5; ++t) {
    std::vector<Series> g{Series::variable(l2, 0, 1.5) + Series::variable(l2, 1, 0.3) + random_poly(l2, rng, 3).degree_range(2, 6),
                          Series::variable(l2, 1, -0.7) + random_poly(l2, rng, 3).degree_range(2, 6)};
    auto gi = invert_map(g);
    auto id = compose_maps(g, gi);
    CHECK(distance(id[0], Series::variable(l2, 0)) < 1e-9);
    CHECK(distance(id[1], Series::variable(l2, 1)) < 1e-9);
    auto back = invert_map(gi);
    CHECK(distance(back[0], g[0]) < 1e-9);
    CHECK(distance(back[1], g[1]) < 1e-9);
  }
  CHECK_THROWS_AS(invert_map({x * x}), Error);
}

TEST_CASE("legendre transform") {
  auto l = make_layout({"y"}, 8);
  Series y = Series::variable(l, 0);
  Series G = legendre_transform(0.5 * 3.0 * y * y);
  CHECK(distance(G, (-1.0 / 6.0) * y * y) < 1e-14);

  Series F = 0.5 * y * y + y * y * y;
  Series G2 = legendre_transform(F);
  CHECK(std::abs(G2.coeff({2}) + 0.5) < 1e-12);
  CHECK(std::abs(G2.coeff({3}) + 1.0) < 1e-12);
  // Oracle: series reversion of eta = -(y + 3 y^2) gives y(eta); G(eta) = eta y + F(y).
  auto yinv = invert_map({-1.0 * (y + 3.0 * y * y)});
  Series oracle = y * yinv[0] + compose(F, yinv);
  CHECK(distance(G2, oracle) < 1e-9);
  CHECK(std::abs(G2.coeff({4}) - oracle.coeff({4})) < 1e-9);
  // G'(eta) = y(eta)
  CHECK(distance(G2.derivative(0), yinv[0].degree_range(0, 7)) < 1e-9);

  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  auto l2 = make_layout({"a", "b"}, 7);
  for (int t = 0; t < 5; ++t) {
    Series a = Series::variable(l2, 0), b = Series::variable(l2, 1);
    Series F2 = 1.3 * a * a + 0.4 * a * b - 0.9 * b * b + random_poly(l2, rng, 4).degree_range(3, 4);
    Series back = legendre_transform(legendre_transform(F2));
    Series reflected = compose(F2, {-1.0 * a, -1.0 * b});
    CHECK(distance(back, reflected) < 1e-8);
  }
  CHECK_THROWS_AS(legendre_transform(y * y * y), Error);
}

TEST_CASE("gaussian moments") {
  const double k = 2.5;
  auto Q = SymmetricMatrix::from_real(Eigen::MatrixXd::Constant(1, 1, k));
  const cplx ih(0, 1);
  CHECK(std::abs(gaussian_moment(Q, {2}).coeff({1}) - ih / k) < 1e-14);
  CHECK(std::abs(gaussian_moment(Q, {4}).coeff({2}) - 3.0 * (ih / k) * (ih / k)) < 1e-14);
  CHECK(gaussian_moment(Q, {3}).is_zero());
  Eigen::MatrixXd Q2(2, 2);
  Q2 << 2, 1, 1, 3;
  auto m = gaussian_moment(SymmetricMatrix::from_real(Q2), {2, 2});
  Eigen::MatrixXd C = Q2.inverse();
  // <z1^2 z2^2> = C11 C22 + 2 C12^2 in units of (i h)^2
  CHECK(std::abs(m.coeff({2}) - cplx(-1.0) * (C(0, 0) * C(1, 1) + 2 * C(0, 1) * C(0, 1))) < 1e-14);
  // Homogeneity: scaling Q by s scales the moment by s^{-|alpha|/2}.
  auto m3 = gaussian_moment(SymmetricMatrix::from_real(3.0 * Q2), {2, 2});
  CHECK(std::abs(m3.coeff({2}) - m.coeff({2}) / 9.0) < 1e-14);
}

TEST_CASE("stationary phase, quadratic phase") {
  for (double k : {1.0, -1.0, 2.0, -2.0, 3.0}) {
    auto l = make_layout({"y", "h"}, 8);
    Series y = Series::variable(l, 0);
    auto r = stationary_phase(0.5 * k * y * y, Series::constant(l, 1.0));
    CHECK(distance(r.G, (-0.5 / k) * y * y) < 1e-12);
    cplx expect = std::polar(1.0 / std::sqrt(std::abs(k)), std::numbers::pi / 4 * (k > 0 ? 1 : -1));
    CHECK(std::abs(r.prefactor - expect) < 1e-14);
    CHECK(distance(r.b, Series::constant(l, 1.0)) < 1e-12);
  }
  auto l = make_layout({"y", "h"}, 8);
  auto z = stationary_phase(0.5 * Series::variable(l, 0) * Series::variable(l, 0), Series(l));
  CHECK(z.b.is_zero());
}

TEST_CASE("stationary phase, cubic phase against brute-force contractions") {
  // F = y^2/2 + y^3 at eta: shift by the critical point, then contract
  // exp(i/h (F(y*+z) - F(y*) - z^2/2)) term by term with <z^2n> = (2n-1)!! (i h)^n.
  auto l = make_layout({"y", "h"}, 8);
  Series y = Series::variable(l, 0);
  auto r = stationary_phase(0.5 * y * y + y * y * y, Series::constant(l, 1.0));
  // At eta = 0 (constant part of b): b1 from <(i/h) z^3>^2/2 and <(i/h)... > terms.
  // exp(i z^3 / h) -> (i/h)^2/2 <z^6> = -(1/2h^2) 15 (ih)^3 = 15 i h / 2.
  const cplx b1 = cplx(0, 7.5);
  CHECK(std::abs(r.b.coeff({0, 1}) - b1) < 1e-10);
  // h^2 at eta = 0: (i/h)^4/24 <z^12> = (1/24h^4) 10395 (ih)^6 = -10395 h^2/24.
  CHECK(std::abs(r.b.coeff({0, 2}) - cplx(-10395.0 / 24.0)) < 1e-8);
}

TEST_CASE("compose keeps high positive powers balanced by negative ones") {
  LayoutPtr l = make_layout({"x", "h"}, 6);
  Exponent e = {9, -3};
  Series f = Series::monomial(l, e, 2.0);
  Series r = compose(f, identity_map(l, 2));
  CHECK(std::abs(r.coeff(e) - 2.0) < 1e-15);
  Series g = compose(f, {Series::variable(l, "x") * 2.0, Series::variable(l, "h")});
  CHECK(std::abs(g.coeff(e) - 1024.0) < 1e-12);
}

#include <doctest.h>

#include <random>

#include <Eigen/Dense>

#include "jetquant/maslov.hpp"

using namespace jq;

namespace {

Rational random_rational(std::mt19937& rng, int range = 5) {
  std::uniform_int_distribution<int> num(-range, range), den(1, 4);
  return Rational(num(rng), den(rng));
}

RationalMatrix random_symmetric(std::mt19937& rng, int n) {
  RationalMatrix S(n, std::vector<Rational>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) S[i][j] = S[j][i] = random_rational(rng);
  return S;
}

int float_signature(const RationalMatrix& S) {
  const int n = static_cast<int>(S.size());
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = to_double(S[i][j]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  int s = 0;
  for (int k = 0; k < n; ++k) s += es.eigenvalues()(k) > 0 ? 1 : -1;
  return s;
}

RationalMatrix diag(std::vector<int> d) {
  RationalMatrix m(d.size(), std::vector<Rational>(d.size(), 0));
  for (std::size_t i = 0; i < d.size(); ++i) m[i][i] = d[i];
  return m;
}

const std::vector<std::vector<int>> kCharts2{{}, {0}, {1}, {0, 1}};

}  // namespace

TEST_CASE("exact signature") {
  CHECK(signature(rational_identity(2)) == 2);
  CHECK(signature(diag({1, -1})) == 0);
  CHECK(signature({{0, 1}, {1, 0}}) == 0);
  CHECK(signature({{0, 1, 0}, {1, 0, 0}, {0, 0, -2}}) == -1);
  CHECK_THROWS_AS(signature({{1, 1}, {1, 1}}), Error);
  CHECK(inertia({{1, 1}, {1, 1}}).zero == 1);

  std::mt19937 rng(3);
  for (int t = 0; t < 100; ++t) {
    const int n = 1 + t % 4;
    std::vector<int> d;
    int expect = 0;
    for (int k = 0; k < n; ++k) {
      d.push_back(rng() % 2 ? 1 : -1);
      expect += d.back();
    }
    RationalMatrix P(n, std::vector<Rational>(n));
    do {
      for (auto& row : P)
        for (auto& v : row) v = random_rational(rng, 3);
    } while (!inverse(P));
    RationalMatrix S = multiply(multiply(transpose(P), diag(d)), P);
    CHECK(signature(S) == expect);
    RationalMatrix R = random_symmetric(rng, n);
    if (inertia(R).zero == 0) CHECK(signature(R) == float_signature(R));
  }
  // additivity over block diagonals
  RationalMatrix a = {{2, 1}, {1, -3}}, b = {{0, 5}, {5, 0}};
  RationalMatrix ab(4, std::vector<Rational>(4, 0));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      ab[i][j] = a[i][j];
      ab[2 + i][2 + j] = b[i][j];
    }
  CHECK(signature(ab) == signature(a) + signature(b));
}

TEST_CASE("chart parameters") {
  LagrangianFrame zero;
  zero.n = 2;
  zero.I = {0};
  zero.A = {{0}};
  zero.B = {{0}};
  zero.C = {{0}};
  auto f0 = chart_parameters(zero.basis(), {0});
  CHECK(f0.A[0][0] == 0);
  CHECK(f0.B[0][0] == 0);
  CHECK(f0.C[0][0] == 0);

  RationalMatrix graph = {{1}, {Rational(3, 2)}};  // xi = 3/2 x
  auto f = chart_parameters(graph, {0});
  CHECK(f.A[0][0] == Rational(3, 2));
  CHECK(same_subspace(f.basis(), graph));
  CHECK_THROWS_AS(chart_parameters({{0}, {1}}, {0}), Error);
  // not Lagrangian: span of x1 and x2 + xi1 in R^4 with omega(x1, xi1) != 0
  CHECK_THROWS_AS(chart_parameters({{1, 0}, {0, 1}, {0, 1}, {0, 0}}, {0, 1}), Error);

  std::mt19937 rng(9);
  for (int t = 0; t < 50; ++t) {
    LagrangianFrame g;
    g.n = 2;
    g.I = kCharts2[t % 4];
    RationalMatrix H = random_symmetric(rng, 2);
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
    auto back = chart_parameters(g.basis(), g.I);
    CHECK(back.hessian() == g.hessian());
  }
}

TEST_CASE("linear cocycle") {
  RationalMatrix diagonal = {{1}, {1}};  // xi = x
  CHECK(linear_cocycle(diagonal, {0}, {}) == 1);
  CHECK(linear_cocycle(diagonal, {}, {0}) == -1);
  CHECK(linear_cocycle(diagonal, {0}, {0}) == 0);
  RationalMatrix neg = {{1}, {-2}};
  CHECK(linear_cocycle(neg, {0}, {}) == -1);
  CHECK_THROWS_AS(linear_cocycle({{1}, {0}}, {0}, {}), Error);

  std::mt19937 rng(2024);
  int triples = 0;
  for (int t = 0; t < 200; ++t) {
    LagrangianFrame g;
    g.n = 2;
    g.I = kCharts2[rng() % 4];
    RationalMatrix H = random_symmetric(rng, 2);
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
        CHECK(v == -linear_cocycle(L, kCharts2[b], kCharts2[a]));
        if (a == b) CHECK(v == 0);
        vals.push_back({a, b, Rational(v, 2)});
      }
    for (int a : in)
      for (int b : in)
        for (int c : in) {
          const int s = linear_cocycle(L, kCharts2[a], kCharts2[b]) + linear_cocycle(L, kCharts2[b], kCharts2[c]) +
                        linear_cocycle(L, kCharts2[c], kCharts2[a]);
          CHECK(s == 0);
          ++triples;
        }
    CHECK(verify_cech_cocycle(4, vals).ok());
  }
  CHECK(triples > 1000);
}

TEST_CASE("submanifold cocycle") {
  for (int k : {1, -1, 2, -3}) {
    LagrangianChartData graph{"X", 1, {}, {}};
    graph.F.nvars = 1;
    graph.F.terms[{2}] = Rational(k, 2);
    LagrangianChartData fiber{"X", 1, {0}, {}};
    fiber.F.nvars = 1;
    fiber.F.terms[{2}] = Rational(-1) / (2 * k);
    CHECK(submanifold_cocycle(graph, fiber, OverlapCase::Subdivision, {Rational(1, 3)}) == (k > 0 ? 1 : -1));
    CHECK(submanifold_cocycle(fiber, graph, OverlapCase::Subdivision, {Rational(1, 3)}) == (k > 0 ? -1 : 1));
    LagrangianChartData other = graph;
    other.base_chart = "Y";
    CHECK(submanifold_cocycle(graph, other, OverlapCase::BaseChange, {Rational(0)}) == 0);
  }
  LagrangianChartData flat{"X", 1, {}, {}};
  flat.F.nvars = 1;
  flat.F.terms[{3}] = 1;
  LagrangianChartData fib{"X", 1, {0}, {}};
  CHECK_THROWS_AS(submanifold_cocycle(flat, fib, OverlapCase::Subdivision, {Rational(0)}), Error);

  // triple overlaps at rational points of random cubic generating functions
  std::mt19937 rng(17);
  int checked = 0;
  for (int t = 0; t < 60; ++t) {
    LagrangianChartData beta{"X", 2, kCharts2[rng() % 4], {}};
    beta.F.nvars = 2;
    for (int a = 0; a <= 3; ++a)
      for (int b = 0; a + b <= 3; ++b)
        if (a + b >= 2) beta.F.terms[{a, b}] = random_rational(rng);
    std::vector<Rational> pt{random_rational(rng, 2), random_rational(rng, 2)};
    RationalMatrix T = tangent_space(beta, pt);
    for (int g = 0; g < 4; ++g)
      for (int d = 0; d < 4; ++d) {
        LagrangianChartData gamma{"X", 2, kCharts2[g], {}}, delta{"X", 2, kCharts2[d], {}};
        auto to_chart = [&](LagrangianChartData& c) {
          LagrangianFrame fr = chart_parameters(T, c.x_free());
          RationalMatrix H = fr.hessian();
          // slot order of F is by index; the frame orders x_I first, then xi_J
          std::vector<int> order = c.x_free();
          for (int k : c.xi_free) order.push_back(k);
          c.F.nvars = 2;
          for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
              std::vector<int> e(2, 0);
              e[order[i]] += 1;
              e[order[j]] += 1;
              c.F.terms[e] += H[i][j] / 2;
            }
        };
        try {
          to_chart(gamma);
          to_chart(delta);
          std::vector<Rational> z(2, 0);
          const int s = submanifold_cocycle(beta, gamma, OverlapCase::Subdivision, pt) +
                        submanifold_cocycle(gamma, delta, OverlapCase::Subdivision, z) +
                        submanifold_cocycle(delta, beta, OverlapCase::Subdivision, pt);
          CHECK(s == 0);
          CHECK(submanifold_cocycle(beta, gamma, OverlapCase::Subdivision, pt) ==
                linear_cocycle(T, beta.x_free(), gamma.x_free()));
          ++checked;
        } catch (const Error&) {
        }
      }
  }
  CHECK(checked > 100);
}

TEST_CASE("alpha cocycle") {
  PhaseFunction zero{1, {}};
  zero.phi.nvars = 1;
  CHECK(alpha_cocycle(zero, zero, {{Rational(1)}, {Rational(2)}}) == 0);

  const Rational k(3, 2);
  PhaseFunction graph{1, {}}, fiber{1, {}};
  graph.phi.nvars = 1;
  graph.phi.terms[{2}] = k / 2;
  fiber.phi.nvars = 2;
  fiber.phi.terms[{1, 1}] = 1;
  fiber.phi.terms[{0, 2}] = -1 / (2 * k);
  std::vector<std::vector<Rational>> samples;
  for (Rational x : {Rational(1), Rational(-2, 3), Rational(5)}) samples.push_back({x, k * x});
  CHECK(alpha_cocycle(graph, fiber, samples) == 0);
  CHECK_THROWS_AS(alpha_cocycle(graph, fiber, {{Rational(1), Rational(1)}}), Error);

  // L = {xi = 1} on a circle covered by two arcs; the overlap has two components.
  PhaseFunction p1{1, {}}, p2a{1, {}}, p2b{1, {}};
  p1.phi.nvars = p2a.phi.nvars = p2b.phi.nvars = 1;
  p1.phi.terms[{1}] = 1;
  p2a.phi.terms[{1}] = 1;
  p2b.phi.terms[{1}] = 1;
  p2b.phi.terms[{0}] = 1;  // the second arc's coordinate is x + 1 on this component
  Rational a = alpha_cocycle(p1, p2a, {{Rational(3, 5)}, {Rational(7, 10)}});
  Rational b = alpha_cocycle(p1, p2b, {{Rational(1, 10)}, {Rational(1, 5)}});
  CHECK(a == 0);
  CHECK(b == -1);
  // per-overlap values are constant, yet no 0-cochain matches both components
  CHECK(a != b);
}

TEST_CASE("cech verification") {
  CHECK(verify_cech_cocycle(1, {}).ok());
  std::vector<CochainValue> v{{0, 1, Rational(1, 2)}, {1, 2, Rational(-1)}, {0, 2, Rational(-1, 2)}};
  auto r = verify_cech_cocycle(3, v);
  CHECK(r.ok());
  auto t = verify_cech_cocycle(3, v, {}, std::vector<Rational>{0, Rational(1, 2), Rational(-1, 2)});
  CHECK(t.trivialized.value());
  v[1].value = Rational(-1, 2);
  r = verify_cech_cocycle(3, v);
  CHECK_FALSE(r.cocycle);
  REQUIRE(r.failing_triples.size() == 1);
  CHECK(r.failing_triples[0] == std::vector<int>{0, 1, 2});
  auto m = verify_cech_cocycle(3, {{0, 1, Rational(1)}}, {{0, 1, 2}});
  CHECK_FALSE(m.complete);
  auto bad = verify_cech_cocycle(2, {{0, 1, Rational(1)}, {1, 0, Rational(1)}});
  CHECK_FALSE(bad.antisymmetric);
}

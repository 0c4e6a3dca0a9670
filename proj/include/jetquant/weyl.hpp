#pragma once

#include <string>
#include <vector>

#include "jetquant/series.hpp"

namespace jq {

// Layout for the Weyl algebra in n degrees of freedom: x1..xn, xi1..xin, h, then
// commuting parameters (base coordinates and the like).
struct WeylAlgebra {
  int n = 0;
  LayoutPtr layout;
  std::vector<std::size_t> x, xi, params;
  std::size_t h = 0;

  static WeylAlgebra make(int n, int cap, const std::vector<std::string>& params = {},
                          double eps = kDefaultEps);
  WeylAlgebra with_cap(int cap) const;

  Series zero() const { return Series(layout); }
  Series constant(cplx c) const { return Series::constant(layout, c); }
  Series xhat(int k, cplx c = 1.0) const { return Series::variable(layout, x.at(k), c); }
  Series xihat(int k, cplx c = 1.0) const { return Series::variable(layout, xi.at(k), c); }
  Series hbar(cplx c = 1.0) const { return Series::variable(layout, h, c); }
  Series param(const std::string& name, cplx c = 1.0) const { return Series::variable(layout, name, c); }
  // Multiplies by (i h)^p; p may be negative.
  Series times_ih(const Series& f, int p) const;
  // Degree in x-hat, xi-hat and h only.
  int formal_degree(const Exponent& e) const;
  int xi_degree(const Exponent& e) const;
  int x_degree(const Exponent& e) const;
  bool is_function(const Series& f) const;  // no xi-hat dependence
};

// Series JSON plus "role": "weyl". Reading checks the role and maps variables by name into A.
json weyl_to_json(const Series& f);
Series weyl_from_json(const WeylAlgebra& A, const json& j);

// exp((i h/2)(d_xi d_y - d_eta d_x)) f(x, xi) g(y, eta) on the diagonal.
Series moyal_star(const WeylAlgebra& A, const Series& f, const Series& g);
Series commutator(const WeylAlgebra& A, const Series& f, const Series& g);
// {f, g} = f_xi g_x - f_x g_xi; with this sign {x, xi} = -1.
Series poisson_bracket(const WeylAlgebra& A, const Series& f, const Series& g);
// (1/ih)[f, g], computed with two extra orders so the result is exact to the cap.
Series bracket_over_ih(const WeylAlgebra& A, const Series& f, const Series& g);

// Operator form: a normal-ordered symbol, x-hat to the left of (i h d/dx)^beta.
Series weyl_quantize(const WeylAlgebra& A, const Series& f);
Series weyl_symbol(const WeylAlgebra& A, const Series& normal);
// Composition of normal-ordered operators.
Series normal_compose(const WeylAlgebra& A, const Series& a, const Series& b);
// Applies a normal-ordered operator to a function of x-hat (no xi-hat).
Series apply_normal(const WeylAlgebra& A, const Series& op, const Series& f);

// Payload f stands for the element (1/ih) f of g~.
struct LieElement {
  Series payload;
  enum class Algebra { g, gtilde } algebra = Algebra::gtilde;
};

// Sum_k ad(h)^k f / k! with ad(h) f = (1/ih)[payload, f].
Series exp_ad(const WeylAlgebra& A, const Series& payload, const Series& f);
Series exp_ad(const WeylAlgebra& A, const LieElement& h, const Series& f);

struct LieClass {
  bool in_P = false;
  bool in_N = false;
  bool in_k = false;
  std::vector<int> grades;  // k with nonzero component in g~_k
};
LieClass lie_classify(const WeylAlgebra& A, const Series& payload);

// f(x) -> exp(q(x)) f(g(x)) |det g'(x)|^{1/2}; all series live in A.layout without xi-hat.
struct KGroupElement {
  std::vector<Series> diffeo;
  Series multiplier;  // q, acting through exp(q)
  double density_weight = 0.5;

  static KGroupElement identity(const WeylAlgebra& A);
  static KGroupElement linear(const WeylAlgebra& A, const std::vector<std::vector<double>>& B);
};

Series k_act(const WeylAlgebra& A, const KGroupElement& k, const Series& f);
KGroupElement k_inverse(const WeylAlgebra& A, const KGroupElement& k);
// Normal-ordered operator k (i h d_j) k^{-1} for each j.
std::vector<Series> k_conjugate_xi(const WeylAlgebra& A, const KGroupElement& k);
// Weyl symbol of k w k^{-1}.
Series k_conjugate(const WeylAlgebra& A, const KGroupElement& k, const Series& w);
// Weyl symbol of (d/dp k) k^{-1} times ih, for the parameter p.
Series k_log_derivative(const WeylAlgebra& A, const KGroupElement& k, const std::string& param);

// Matrix helpers on series entries.
using SeriesMatrix = std::vector<std::vector<Series>>;
SeriesMatrix jacobian(const std::vector<Series>& g, const std::vector<std::size_t>& vars);
Series determinant(const SeriesMatrix& m);
SeriesMatrix inverse(const SeriesMatrix& m);
Series reciprocal(const Series& s);
// |s|^r for a series with nonzero constant term (taken with the sign of that term).
Series real_power(const Series& s, double r);
Series log_derivative(const Series& s, std::size_t var);  // d(log s)/d var

}  // namespace jq

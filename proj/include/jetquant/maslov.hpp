#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jetquant/scalars.hpp"

namespace jq {

struct Inertia {
  int positive = 0, negative = 0, zero = 0;
};

// Exact inertia by symmetric elimination with 1x1 and 2x2 pivots.
Inertia inertia(const RationalMatrix& S);
// Throws on a degenerate matrix.
int signature(const RationalMatrix& S);

RationalMatrix rational_identity(int n);
RationalMatrix multiply(const RationalMatrix& a, const RationalMatrix& b);
RationalMatrix transpose(const RationalMatrix& a);
// Exact inverse; std::nullopt when singular.
std::optional<RationalMatrix> inverse(const RationalMatrix& a);

// xi_I = A x_I + B xi_J, x_J = -B^t x_I - C xi_J with J the complement of I.
struct LagrangianFrame {
  int n = 0;
  std::vector<int> I;  // indices whose x is free
  RationalMatrix A, B, C;
  // Hessian [[A, B], [B^t, C]] of the generating function in (x_I, xi_J).
  RationalMatrix hessian() const;
  // Basis (2n x n, rows x_1..x_n, xi_1..xi_n) of the subspace it describes.
  RationalMatrix basis() const;
};

// basis: 2n x n with rows x_1..x_n, xi_1..xi_n spanning L.
LagrangianFrame chart_parameters(const RationalMatrix& basis, std::vector<int> I);
bool same_subspace(const RationalMatrix& a, const RationalMatrix& b);

// 2 c_{IJ}, with c_{IJ} = 1/2 signature of the generating Hessian of chart I restricted
// to the exchanged variables x_k (k in I \ J) and xi_k (k in J \ I).
int linear_cocycle(const RationalMatrix& basis, const std::vector<int>& I, const std::vector<int>& J);

// Polynomial with exact rational coefficients.
struct RationalPoly {
  int nvars = 0;
  std::map<std::vector<int>, Rational> terms;

  Rational evaluate(const std::vector<Rational>& p) const;
  RationalPoly derivative(int i) const;
  RationalMatrix hessian(const std::vector<Rational>& p) const;
  json to_json() const;
  static RationalPoly from_json(const json& j);
};

// L near a point: slot k of F is x_k when k is not in xi_free, xi_k otherwise.
struct LagrangianChartData {
  std::string base_chart;
  int n = 0;
  std::vector<int> xi_free;
  RationalPoly F;
  std::vector<int> x_free() const;
};

enum class OverlapCase { BaseChange, Subdivision };

// 2 c_{beta gamma}. BaseChange gives 0; Subdivision uses the mixed Hessian of F_beta at the
// point (given in beta's free coordinates) over the exchanged variables.
int submanifold_cocycle(const LagrangianChartData& beta, const LagrangianChartData& gamma, OverlapCase c,
                        const std::vector<Rational>& point);
// Tangent space of L at the point, as a basis in (x, xi).
RationalMatrix tangent_space(const LagrangianChartData& chart, const std::vector<Rational>& point);

// A phase function phi(x, theta): the first n variables are x, the rest theta.
struct PhaseFunction {
  int n = 0;
  RationalPoly phi;
};

// phi_beta - phi_gamma on the critical sets. Each sample is (x, theta_beta, theta_gamma);
// throws if a sample is not critical, the covectors disagree, or the difference varies.
Rational alpha_cocycle(const PhaseFunction& beta, const PhaseFunction& gamma,
                       const std::vector<std::vector<Rational>>& samples);

struct CochainValue {
  int a = 0, b = 0;
  Rational value;
};

struct CechReport {
  bool antisymmetric = true;
  bool cocycle = true;
  bool complete = true;
  std::vector<std::vector<int>> failing_triples;
  std::vector<std::pair<int, int>> missing;
  std::optional<bool> trivialized;
  bool ok() const { return antisymmetric && cocycle && complete && trivialized.value_or(true); }
  json to_json() const;
};

// Checks c_aa = 0, c_ab = -c_ba and c_ab + c_bc + c_ca = 0 over the listed triples
// (every triple of charts with all overlaps present when none are listed).
CechReport verify_cech_cocycle(int charts, const std::vector<CochainValue>& values,
                               std::vector<std::vector<int>> triples = {},
                               const std::optional<std::vector<Rational>>& cochain = std::nullopt);

}  // namespace jq

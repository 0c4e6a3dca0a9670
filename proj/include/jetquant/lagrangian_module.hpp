#pragma once

#include <string>
#include <vector>

#include "jetquant/geometry.hpp"
#include "jetquant/maslov.hpp"
#include "jetquant/weil_rep.hpp"
#include "jetquant/weyl.hpp"

namespace jq {

// phi(x, theta) = x_S xi_S + F(x_{S'}, xi_S) + 1/2 |xi_{S'} - F_{x_{S'}}|^2 with theta = xi,
// S the xi-free slots and S' the rest.
struct PhaseChart {
  std::string id;
  LagrangianChartData data;
  std::vector<Rational> base;  // free coordinates of the base point (slot order of F)
  PhaseFunction phi;

  int n() const { return data.n; }
  int n1() const { return data.n - static_cast<int>(data.xi_free.size()); }
  bool xi_slot(int k) const;
  // (x_1..x_n, xi_1..xi_n) of the base point.
  std::vector<Rational> point() const;
  std::vector<Rational> theta() const;
  // Same chart, another base point given as (x, xi) on L.
  PhaseChart moved(const std::vector<Rational>& point) const;
  bool contains(const std::vector<Rational>& point) const;

  json to_json() const;
  static PhaseChart from_json(const json& j);
};

json chart_data_to_json(const LagrangianChartData& c);
LagrangianChartData chart_data_from_json(const json& j);

// Throws when the chart is malformed or the rank condition fails at the base point.
PhaseChart phase_from_generating(const LagrangianChartData& data, const std::vector<Rational>& base,
                                 const std::string& id = "");
// Free coordinates of a point (x, xi) in the given chart.
std::vector<Rational> free_coordinates(const LagrangianChartData& data, const std::vector<Rational>& point);

// Layout y1..yn, base..., h. y_k is x-hat_k on x slots and theta-hat_k on xi slots.
LayoutPtr module_layout(int n, int cap, const std::vector<std::string>& base = {});
// F(p + y) - F(p) - F'(p) y with p the base point shifted by the named parameters.
Series phase_jet(const PhaseChart& c, const LayoutPtr& layout, const std::vector<std::string>& base = {});

// Normalized element: scalar * exp(i/h (x-hat_S theta-hat_S + phase)) * amplitude, modulo the
// relation in theta-hat_S; theta-hat_{S'} has been integrated out.
struct ModuleJet {
  PhaseChart chart;
  std::vector<std::string> base;
  Series phase;
  Series amplitude;
  OscillatoryScalar scalar;

  int n() const { return chart.n(); }
  static ModuleJet make(const PhaseChart& c, const Series& amplitude, const std::vector<std::string>& base = {});
  json to_json() const;
  static ModuleJet from_json(const json& j);
};

// exp(i Phi / h) a in x-hat_1..n, theta-hat_1..n, h with Phi the phase at the base point.
struct RawModuleJet {
  PhaseChart chart;
  Series phase;
  Series amplitude;
  OscillatoryScalar scalar;

  static LayoutPtr layout(int n, int cap);
  static RawModuleJet make(const PhaseChart& c, const Series& amplitude);
  // i h d_{theta_k} b - Phi_{theta_k} b, equivalent to zero.
  Series relation(const Series& b, int k) const;
};

ModuleJet normalize(const RawModuleJet& raw);
inline ModuleJet normalize(const ModuleJet& m) { return m; }

// x-hat_k and xi-hat_k acting on a raw jet as printed.
RawModuleJet raw_act_x(int k, const RawModuleJet& m);
RawModuleJet raw_act_xi(int k, const RawModuleJet& m);

// w is a Weyl symbol; parameters of A are matched to the jet's base parameters by name.
ModuleJet module_act(const WeylAlgebra& A, const Series& w, const ModuleJet& m);
Series module_act_amplitude(const WeylAlgebra& A, const Series& w, const Series& phase, const PhaseChart& c,
                            const Series& amplitude);

// Same point, charts over the same base chart: partial Fourier transform over the exchanged slots.
ModuleJet module_transition(const PhaseChart& target, const ModuleJet& m);
// Graph charts over different base charts with x_source = g(x_target).
ModuleJet module_transition(const PhaseChart& target, const ModuleJet& m, const BaseMap& g);
// The base-point covector used by the algebra acting on the module (chart coordinates).
std::vector<double> module_covector(const PhaseChart& c);

struct ScalarCocycle {
  Rational alpha;
  int mu2 = 0;            // doubled, in (-4, 4]
  Series g;               // amplitude of the image of 1 over the half-density factor
  double density = 1.0;   // |det d(y_source)/d(y_target)|^{1/2} at the point
  double unit_residual = 0.0;  // h^0 part of g against 1
  int maslov_mu2 = 0;
  Rational maslov_alpha;
  bool consistent = false;
  json to_json() const;
};

// Throws when the residual is not a unit.
ScalarCocycle extract_scalar_cocycle(const PhaseChart& source, const PhaseChart& target, int cap, double tol = 1e-9);

// (d_p - d_y) b along each base parameter; the jet must carry n base parameters.
std::vector<ModuleJet> connection_apply(const ModuleJet& m);
// Compatible connection on W-valued families over L with the same base parameters.
std::vector<Series> algebra_connection_apply(const WeylAlgebra& A, const PhaseChart& c, const Series& s,
                                             const std::vector<std::string>& base);

// tau = shear by F~ after the rotation x-hat_S -> xi-hat_S, xi-hat_S -> -x-hat_S, so that the
// chart action of w equals the standard action of tau(w).
struct CanonicalOperator {
  std::vector<int> block;
  Series phase;  // F~ in x-hat
  Eigen::MatrixXd hessian;
  Series higher;  // cubic and higher part of F~
  Series transport(const WeylAlgebra& A, const Series& w) const;
  json to_json() const;
};
CanonicalOperator canonical_operator(const WeylAlgebra& A, const PhaseChart& c);
// x-hat multiplication and xi-hat = i h d.
Series standard_act(const WeylAlgebra& A, const Series& w, const Series& amplitude);

struct MainTheoremReport {
  bool claim1 = false;
  double claim1_residual = 0;
  bool claim2 = false;
  double claim2_residual = 0;
  bool claim3 = false;
  double claim3_residual = 0;
  Rational alpha;
  int mu2 = 0;
  std::string failure;
  bool ok() const { return claim1 && claim2 && claim3; }
  json to_json() const;
};

MainTheoremReport compare_zero_section(const PhaseChart& source, const PhaseChart& target, int cap,
                                       double tol = 1e-8);

// W / W xi-hat with classes represented by functions of x-hat.
struct ConormalJet {
  Series amplitude;  // in A's layout, free of xi-hat
};
ConormalJet conormal_module_act(const WeylAlgebra& A, const Series& w, const ConormalJet& m);

struct GradingReport {
  double zero_section_residual = 0;  // chart action against the conormal model
  double graded_residual = 0;        // linearized chart action against the transported model
  bool ok(double tol) const;
  json to_json() const;
};
// The zero-section table is computed on the zero section of the same dimension.
GradingReport grading_compare(const PhaseChart& c, int cap);

struct LagrangianConfig {
  std::string name;
  int n = 0;
  std::vector<PhaseChart> charts;  // base points are the first point each chart contains
  std::vector<std::vector<Rational>> points;
  static LagrangianConfig from_json(const json& j);
  json to_json() const;
};

}  // namespace jq

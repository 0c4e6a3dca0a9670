#pragma once

#include <optional>
#include <string>
#include <vector>

#include "jetquant/maslov.hpp"
#include "jetquant/weyl.hpp"

namespace jq {

// Rational map of base coordinates: component k is num[k] / den[k], polynomials in u1..u_dim.
struct BaseMap {
  int dim = 0;
  std::vector<Series> num, den;

  static LayoutPtr poly_layout(int dim);
  static BaseMap identity(int dim);
  static BaseMap linear(const std::vector<std::vector<double>>& B);
  // Components num / den from dense coefficient lists; den defaults to 1.
  static BaseMap from_json(const json& j);
  json to_json() const;

  std::vector<double> at(const std::vector<double>& point) const;
  // g(point + shift) as series in the layout of the shift.
  std::vector<Series> evaluate(const std::vector<double>& point, const std::vector<Series>& shift) const;
};

// x_a = g_ab(x_b); points are sample points in chart b coordinates.
struct Atlas {
  struct Transition {
    int a = 0, b = 0;
    BaseMap map;
    std::vector<std::vector<double>> points;
  };
  int dim = 0;
  std::vector<std::string> charts;
  std::vector<Transition> transitions;

  const Transition* find(int a, int b) const;
  int chart_index(const std::string& id) const;
  // Checks g_ab(g_bc) = g_ac in jets to the cap at every sample point of (b, c);
  // throws naming the first failing triple.
  void validate(int cap, double tol) const;
  static Atlas from_json(const json& j);
  json to_json() const;
};

// x-hat -> g(p + x-hat) - g(p) in A.x; base_params (one per base coordinate) shift p.
std::vector<Series> jet_transition(const WeylAlgebra& A, const BaseMap& g, const std::vector<double>& point,
                                   const std::vector<std::string>& base_params = {});

// Transition of the cotangent Weyl bundle at (x, xi) in chart b coordinates, going from chart a's
// fiber to chart b's (pullback of symbols).
struct CotangentTransition {
  std::vector<Series> classical;  // images of x-hat_1..n, xi-hat_1..n (commutative product)
  WeylAlgebra work;               // the algebra at cap + 1 in which k and higher live
  KGroupElement k;                // half-density lift with multiplier exp(q), q carrying 1/h
  std::vector<std::vector<double>> linear;  // g'(x)
  KGroupElement higher;                     // k = higher after linear, with identity linear part
  std::vector<double> x_a, xi_a;            // image point in chart a

  Series apply(const WeylAlgebra& A, const Series& w) const;
  Series apply_factored(const WeylAlgebra& A, const Series& w) const;
};

// base_params, when given, name 2n shifts of (x, xi) so the result is a jet in the base point too.
CotangentTransition cotangent_weyl_transition(const WeylAlgebra& A, const BaseMap& g, const std::vector<double>& x,
                                              const std::vector<double>& xi,
                                              const std::vector<std::string>& base_params = {});

// Max coefficient distance between T_bc(T_ab(w)) and T_ac(w) on the generators, at a point of chart c.
double transition_cocycle_residual(const WeylAlgebra& A, const Atlas& atlas, int a, int b, int c,
                                   const std::vector<double>& x, const std::vector<double>& xi);

// g~-valued one-form: coefficient i is the payload along base parameter i; the covariant
// derivative of a section s is d_i s + (1/ih)[coeff_i, s].
struct ConnectionData {
  std::vector<std::string> base;  // Darboux order: x_1..x_n then xi_1..xi_n
  std::vector<Series> coeff;
  bool lifted = true;

  std::vector<Series> apply(const WeylAlgebra& A, const Series& section) const;
  json to_json() const;
  static ConnectionData from_json(const json& j, const WeylAlgebra& A);
};

std::vector<std::string> base_names(const std::string& prefix, int n);
std::vector<std::string> cotangent_base_names(int n);

// (d/dx - xi-hat/ih) dx + (d/dxi + x-hat/ih) dxi.
ConnectionData canonical_connection(const WeylAlgebra& A, const std::vector<std::string>& base);

enum class ConnectionModel { Jet, CotangentWeyl };
// Jet: (d/dx - d/dx-hat) dx on sections in x-hat. CotangentWeyl: the canonical connection above.
std::vector<Series> canonical_connection_apply(const WeylAlgebra& A, const Series& section,
                                               const std::vector<std::string>& base, ConnectionModel model);
// s(p + dp)(x-hat) = u(p + dp + x-hat): jets of a base function given as a polynomial.
Series prolongation(const WeylAlgebra& A, const Series& u, const std::vector<double>& point,
                    const std::vector<std::string>& base, ConnectionModel model);

struct FedosovReport {
  bool grading = true;
  bool normalization = true;
  bool flat = true;
  double flatness_residual = 0;
  std::vector<std::vector<Series>> theta;  // payload of curvature along (i, j)
  bool theta_closed = true;
  double symplectic_residual = 0;  // theta against omega / ih
  double higher_residual = 0;      // theta_k for k >= 1
  std::string failure;
  bool ok(double tol) const;
  json to_json() const;
};

FedosovReport check_fedosov(const WeylAlgebra& A, const ConnectionData& conn, double tol = 1e-8);

// Payload of log(e^{a/ih} e^{b/ih}) for payloads of degree >= 3 plus central terms.
Series bch(const WeylAlgebra& A, const Series& a, const Series& b);
// Payload of (d_p e^{X}) e^{-X} for X = sigma / ih.
Series exp_log_derivative(const WeylAlgebra& A, const Series& sigma, std::size_t p);
// e^{sigma/ih} . conn: coefficients Ad(e^X) A - (d e^X) e^{-X}.
ConnectionData gauge_transform(const WeylAlgebra& A, const ConnectionData& conn, const Series& sigma);
double connection_distance(const ConnectionData& a, const ConnectionData& b);

struct LCompatReport {
  bool preserved = true;
  int failing_generator = -1, failing_direction = -1;
  double residual = 0;
  std::vector<bool> sigma_in_gL;
  bool ok() const;
  json to_json() const;
};

// Membership in the left ideal generated by xi-hat_i - S_ij x-hat_j.
bool in_graph_ideal(const WeylAlgebra& A, const Series& w, const std::vector<std::vector<Series>>& S);
// L given by a graph-type chart (no xi-free slots) through the base point x.
LCompatReport check_L_compatible(const WeylAlgebra& A, const ConnectionData& conn, const LagrangianChartData& L,
                                 const std::vector<double>& x, const std::vector<Series>& sigmas = {});

// Both sides of A_b + (d k) k^{-1} = k A_a k^{-1} for the lifted transition at a point.
struct LiftedCocycleReport {
  double residual = 0;
  std::vector<double> per_direction;
  std::string location;
  json to_json() const;
};
LiftedCocycleReport check_lifted_cocycle(const WeylAlgebra& A, const BaseMap& g_ab, const ConnectionData& conn_a,
                                         const ConnectionData& conn_b, const std::vector<double>& x,
                                         const std::vector<double>& xi, const std::string& location = "");
// Uses an explicit lift in place of the canonical one (for corrupted liftings).
LiftedCocycleReport check_lifted_cocycle(const WeylAlgebra& A, const BaseMap& g_ab, const CotangentTransition& lift,
                                         const ConnectionData& conn_a, const ConnectionData& conn_b,
                                         const std::vector<double>& x, const std::vector<double>& xi,
                                         const std::string& location = "");

struct StackReport {
  Series c;                          // payload of sigma12 sigma23 sigma13^{-1}
  bool unit_mod_h = false;           // c = 1 mod h
  double horizontal_residual = 0;    // c . conn1 against conn1
  double ad_residual = 0;            // Ad(s12) Ad(s23) against Ad(c) Ad(s13) on generators
  bool ok(double tol) const;
  json to_json() const;
};

// sigma_ij maps conn_j to conn_i; throws when they do not.
StackReport stack_identities(const WeylAlgebra& A, const std::vector<ConnectionData>& conns, const Series& s12,
                             const Series& s23, const Series& s13, double tol = 1e-8);
Series stack_element(const WeylAlgebra& A, const Series& sij, const Series& sjk, const Series& sik);
// c123 c134 against Ad(s12)(c234) c124.
double tetrahedron_residual(const WeylAlgebra& A, const Series& s12, const Series& s13, const Series& s14,
                            const Series& s23, const Series& s24, const Series& s34);

}  // namespace jq

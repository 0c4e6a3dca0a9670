#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace jq {

using cplx = std::complex<double>;
using Exponent = std::vector<int>;
using json = nlohmann::json;

inline constexpr double kDefaultEps = 1e-9;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Variable names, filtration weights and the truncation cap shared by a family of series.
// The variable named "h" plays the role of the deformation parameter.
struct Layout {
  std::vector<std::string> vars;
  std::vector<int> weights;
  int cap = 0;
  double eps = kDefaultEps;

  std::size_t size() const { return vars.size(); }
  int degree(const Exponent& e) const;
  int index(const std::string& name) const;  // -1 when absent
  int hbar() const { return index("h"); }
  bool same_as(const Layout& o) const;
};

using LayoutPtr = std::shared_ptr<const Layout>;

LayoutPtr make_layout(std::vector<std::string> vars, std::vector<int> weights, int cap,
                      double eps = kDefaultEps);
// Names get weight 1, except "h" which gets weight 2.
LayoutPtr make_layout(std::vector<std::string> vars, int cap, double eps = kDefaultEps);
LayoutPtr with_cap(const LayoutPtr& l, int cap);

class Series {
 public:
  using Terms = std::map<Exponent, cplx>;

  Series() = default;
  explicit Series(LayoutPtr layout);

  static Series constant(LayoutPtr layout, cplx c);
  static Series variable(LayoutPtr layout, std::size_t i, cplx c = 1.0);
  static Series variable(LayoutPtr layout, const std::string& name, cplx c = 1.0);
  static Series monomial(LayoutPtr layout, Exponent e, cplx c);

  const Layout& layout() const { return *layout_; }
  const LayoutPtr& layout_ptr() const { return layout_; }
  std::size_t nvars() const { return layout_->size(); }
  int cap() const { return layout_->cap; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  cplx coeff(const Exponent& e) const;
  cplx constant_term() const;

  // Accumulates c at e. Terms above the cap are ignored; small results are erased.
  void add(const Exponent& e, cplx c);
  void prune();

  int min_degree() const;  // of stored terms; 0 for the zero series
  int max_degree() const;
  double max_abs() const;

  Series operator-() const;
  Series& operator+=(const Series& o);
  Series& operator-=(const Series& o);
  Series& operator*=(cplx c);
  Series& operator*=(const Series& o);

  Series derivative(std::size_t i) const;
  Series derivative(std::size_t i, int order) const;
  Series times_monomial(const Exponent& e, cplx c = 1.0) const;
  // Component of weighted degree d.
  Series homogeneous(int d) const;
  Series degree_range(int lo, int hi) const;
  // Sets variable i to zero.
  Series drop_var(std::size_t i) const;
  // Keeps terms whose exponent of variable i equals p.
  Series slice(std::size_t i, int p) const;
  // Maps variable k of this layout to variable map[k] of target (or drops terms using it when -1).
  Series relayout(const LayoutPtr& target, const std::vector<int>& map) const;
  // Matches variables by name; variables missing from target must not occur.
  Series relayout(const LayoutPtr& target) const;
  Series conj() const;

  json to_json() const;
  static Series from_json(const json& j, double eps = kDefaultEps);

 private:
  LayoutPtr layout_;
  Terms terms_;
};

Series operator+(Series a, const Series& b);
Series operator-(Series a, const Series& b);
Series operator*(Series a, cplx c);
Series operator*(cplx c, Series a);
Series operator*(const Series& a, const Series& b);

void require_compatible(const Series& a, const Series& b, const char* what);

Series multiply(const Series& a, const Series& b);
Series power(const Series& a, int k);
// exp of a series all of whose terms have positive weighted degree.
Series exp_series(const Series& a);
// Maximum coefficient modulus of a - b.
double distance(const Series& a, const Series& b);

// f(g_1, ..., g_m) with g_k in a common layout; arity must equal f.nvars().
// A component may carry negative exponents in f only if it is a single monomial.
Series compose(const Series& f, const std::vector<Series>& g);

// Inverse of x -> g(x) in the first g.size() variables; the others are held fixed.
std::vector<Series> invert_map(const std::vector<Series>& g);
std::vector<Series> identity_map(const LayoutPtr& layout, std::size_t m);
std::vector<Series> compose_maps(const std::vector<Series>& g, const std::vector<Series>& h);

std::string to_string(const Series& s);

}  // namespace jq

#pragma once

#include <complex>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

#include "jetquant/series.hpp"

namespace jq {

using Rational = boost::multiprecision::cpp_rational;
using RationalMatrix = std::vector<std::vector<Rational>>;

double to_double(const Rational& r);
Rational rational_from_json(const json& j);  // "p/q" string, integer, or [p, q]
json rational_to_json(const Rational& r);

class SymmetricMatrix {
 public:
  enum class Mode { Rational, Complex };

  SymmetricMatrix() = default;
  static SymmetricMatrix from_rational(RationalMatrix m);
  static SymmetricMatrix from_complex(Eigen::MatrixXcd m);
  static SymmetricMatrix from_real(const Eigen::MatrixXd& m);

  Mode mode() const { return mode_; }
  int dim() const { return static_cast<int>(c_.rows()); }
  const RationalMatrix& rational() const;
  const Eigen::MatrixXcd& complex() const { return c_; }
  bool is_real(double tol = 0.0) const;

 private:
  Mode mode_ = Mode::Complex;
  RationalMatrix r_;
  Eigen::MatrixXcd c_;
};

// e^{i a/h} e^{i pi k/4} sum_j c_j h^j.
struct OscillatoryScalar {
  double exponent = 0.0;
  std::optional<Rational> exact_exponent;
  int eighth = 0;  // mod 8
  std::map<int, cplx> laurent{{0, 1.0}};
  int cap = 16;  // highest retained weighted degree; h has weight 2

  static OscillatoryScalar one(int cap);
  static OscillatoryScalar from_complex(cplx c, int cap);

  bool exact() const { return exact_exponent.has_value(); }
  void set_exponent(const Rational& a);
  void set_exponent(double a);
  OscillatoryScalar operator*(const OscillatoryScalar& o) const;
  OscillatoryScalar& operator*=(cplx c);
  OscillatoryScalar inverse() const;
  cplx phase8() const;
  // Leading Laurent coefficient times the eighth-root phase.
  cplx leading() const;
  int leading_power() const;
  cplx evaluate(double h) const;
  void prune(double eps);
  // Laurent part as a series in the variable "h" of the given layout.
  Series as_series(const LayoutPtr& layout) const;

  json to_json() const;
  static OscillatoryScalar from_json(const json& j);
};

}  // namespace jq

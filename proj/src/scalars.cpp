#include "jetquant/scalars.hpp"

#include <cmath>
#include <numbers>

namespace jq {

double to_double(const Rational& r) { return r.convert_to<double>(); }

Rational rational_from_json(const json& j) {
  if (j.is_number_integer()) return Rational(j.get<long long>());
  if (j.is_array() && j.size() == 2)
    return Rational(j[0].get<long long>()) / Rational(j[1].get<long long>());
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    auto slash = s.find('/');
    if (slash == std::string::npos) return Rational(boost::multiprecision::cpp_int(s));
    return Rational(boost::multiprecision::cpp_int(s.substr(0, slash))) /
           Rational(boost::multiprecision::cpp_int(s.substr(slash + 1)));
  }
  throw Error("rational: expected integer, [p,q] or \"p/q\"");
}

json rational_to_json(const Rational& r) {
  if (denominator(r) == 1) return numerator(r).str();
  return numerator(r).str() + "/" + denominator(r).str();
}

SymmetricMatrix SymmetricMatrix::from_rational(RationalMatrix m) {
  const std::size_t n = m.size();
  SymmetricMatrix s;
  s.mode_ = Mode::Rational;
  s.c_.resize(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (m[i].size() != n) throw Error("symmetric matrix: not square");
    for (std::size_t j = 0; j < n; ++j) {
      if (m[i][j] != m[j][i]) throw Error("symmetric matrix: not symmetric");
      s.c_(i, j) = to_double(m[i][j]);
    }
  }
  s.r_ = std::move(m);
  return s;
}

SymmetricMatrix SymmetricMatrix::from_complex(Eigen::MatrixXcd m) {
  if (m.rows() != m.cols()) throw Error("symmetric matrix: not square");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 0) throw Error("symmetric matrix: not symmetric");
  SymmetricMatrix s;
  s.c_ = std::move(m);
  return s;
}

SymmetricMatrix SymmetricMatrix::from_real(const Eigen::MatrixXd& m) {
  return from_complex(m.cast<cplx>());
}

const RationalMatrix& SymmetricMatrix::rational() const {
  if (mode_ != Mode::Rational) throw Error("symmetric matrix: not in rational mode");
  return r_;
}

bool SymmetricMatrix::is_real(double tol) const {
  return c_.size() == 0 || c_.imag().cwiseAbs().maxCoeff() <= tol;
}

OscillatoryScalar OscillatoryScalar::one(int cap) {
  OscillatoryScalar s;
  s.cap = cap;
  s.exact_exponent = Rational(0);
  return s;
}

OscillatoryScalar OscillatoryScalar::from_complex(cplx c, int cap) {
  OscillatoryScalar s = one(cap);
  s.laurent[0] = c;
  return s;
}

void OscillatoryScalar::set_exponent(const Rational& a) {
  exact_exponent = a;
  exponent = to_double(a);
}

void OscillatoryScalar::set_exponent(double a) {
  exact_exponent.reset();
  exponent = a;
}

OscillatoryScalar OscillatoryScalar::operator*(const OscillatoryScalar& o) const {
  OscillatoryScalar r;
  r.cap = std::min(cap, o.cap);
  if (exact() && o.exact())
    r.set_exponent(*exact_exponent + *o.exact_exponent);
  else
    r.set_exponent(exponent + o.exponent);
  r.eighth = ((eighth + o.eighth) % 8 + 8) % 8;
  r.laurent.clear();
  for (const auto& [p, c] : laurent)
    for (const auto& [q, d] : o.laurent)
      if (2 * (p + q) <= r.cap) r.laurent[p + q] += c * d;
  return r;
}

OscillatoryScalar& OscillatoryScalar::operator*=(cplx c) {
  for (auto& [p, v] : laurent) v *= c;
  return *this;
}

OscillatoryScalar OscillatoryScalar::inverse() const {
  OscillatoryScalar r;
  r.cap = cap;
  if (exact())
    r.set_exponent(-*exact_exponent);
  else
    r.set_exponent(-exponent);
  r.eighth = (8 - eighth) % 8;
  r.laurent.clear();
  int p0 = leading_power();
  cplx c0 = laurent.at(p0);
  // u = c0 h^p0 (1 + v); 1/u = h^-p0 / c0 * sum (-v)^k
  std::map<int, cplx> v;
  for (const auto& [p, c] : laurent)
    if (p > p0) v[p - p0] = c / c0;
  std::map<int, cplx> inv{{0, 1.0}};
  const int top = cap / 2 + std::max(0, p0);
  for (int k = 1; k <= top; ++k) {
    cplx s = 0;
    for (const auto& [j, c] : v)
      if (j <= k && inv.count(k - j)) s -= c * inv[k - j];
    inv[k] = s;
  }
  for (const auto& [k, c] : inv)
    if (2 * (k - p0) <= cap) r.laurent[k - p0] = c / c0;
  return r;
}

cplx OscillatoryScalar::phase8() const {
  return std::polar(1.0, std::numbers::pi * eighth / 4.0);
}

int OscillatoryScalar::leading_power() const {
  for (const auto& [p, c] : laurent)
    if (std::abs(c) > 0) return p;
  throw Error("oscillatory scalar: zero");
}

cplx OscillatoryScalar::leading() const { return phase8() * laurent.at(leading_power()); }

cplx OscillatoryScalar::evaluate(double h) const {
  cplx s = 0;
  for (const auto& [p, c] : laurent) s += c * std::pow(h, p);
  return std::polar(1.0, exponent / h) * phase8() * s;
}

void OscillatoryScalar::prune(double eps) {
  for (auto it = laurent.begin(); it != laurent.end();)
    it = std::abs(it->second) < eps ? laurent.erase(it) : std::next(it);
}

Series OscillatoryScalar::as_series(const LayoutPtr& layout) const {
  int hi = layout->hbar();
  if (hi < 0) throw Error("oscillatory scalar: layout has no h");
  Series s(layout);
  for (const auto& [p, c] : laurent) {
    Exponent e(layout->size(), 0);
    e[hi] = p;
    s.add(e, c);
  }
  return s;
}

json OscillatoryScalar::to_json() const {
  json l = json::array();
  for (const auto& [p, c] : laurent) l.push_back({{"pow", p}, {"re", c.real()}, {"im", c.imag()}});
  json j{{"exponent", exponent}, {"eighth", eighth}, {"laurent", l}, {"cap", cap}};
  if (exact()) j["exact_exponent"] = rational_to_json(*exact_exponent);
  return j;
}

OscillatoryScalar OscillatoryScalar::from_json(const json& j) {
  OscillatoryScalar s;
  s.cap = j.value("cap", 16);
  if (j.contains("exact_exponent"))
    s.set_exponent(rational_from_json(j["exact_exponent"]));
  else
    s.set_exponent(j.value("exponent", 0.0));
  s.eighth = j.value("eighth", 0);
  if (j.contains("laurent")) {
    s.laurent.clear();
    for (const auto& t : j["laurent"])
      s.laurent[t.at("pow").get<int>()] = {t.at("re").get<double>(), t.value("im", 0.0)};
  }
  return s;
}

}  // namespace jq

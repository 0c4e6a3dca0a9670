#pragma once

#include <vector>

#include "jetquant/scalars.hpp"
#include "jetquant/series.hpp"

namespace jq {

// Quadratic part of f in the listed variables: f = 1/2 y^t H y + ...
Eigen::MatrixXcd hessian_at_zero(const Series& f, const std::vector<std::size_t>& vars);

// Sum over perfect pairings of prod C_{jk}; zero for odd total degree.
cplx wick_pairing_sum(const Eigen::MatrixXcd& C, const Exponent& alpha);

// <z^alpha> under exp(i Q z^2 / 2h), as a series in the single variable h.
Series gaussian_moment(const SymmetricMatrix& Q, const Exponent& alpha, int cap = 16);

// prod (-i mu_k)^{-1/2} over eigenvalues of Q, principal branch.
// For real Q this is exp(i pi sgn Q / 4) |det Q|^{-1/2}.
cplx gaussian_prefactor(const Eigen::MatrixXcd& Q);
int real_signature(const Eigen::MatrixXd& Q, double eps = kDefaultEps);

struct CriticalPoint {
  std::vector<Series> point;  // y*(p), one per fiber variable
  Series value;               // phase(p, y*(p))
  Eigen::MatrixXcd hessian;   // fiber Hessian at the origin
};

// Formal solution of d_y phase = 0 through the origin, by jet-degree iteration.
CriticalPoint critical_point(const Series& phase, const std::vector<std::size_t>& fiber);

struct StationaryPhase {
  Series critical_value;      // G(p)
  std::vector<Series> point;  // y*(p)
  cplx prefactor = 1.0;
  Eigen::MatrixXcd hessian;
  Series amplitude;           // sum_k b_k(p) h^k
};

// (2 pi h)^{-m/2} int exp(i phase / h) a dy over the fiber variables, expanded formally.
// The layout must contain "h". Fiber variables do not occur in the result.
StationaryPhase stationary_phase(const Series& phase, const Series& amplitude,
                                 const std::vector<std::size_t>& fiber);

// Legendre transform: G(eta) = eta y + F(y) with eta + F'(y) = 0.
// Variable k of the result stands for eta_k; "h" (if present) is a parameter.
Series legendre_transform(const Series& F);

struct FourierResult {
  Series G;
  cplx prefactor = 1.0;
  Series b;
};

// Fourier transform of exp(i F/h) a under the kernel (2 pi h)^{-m/2} exp(i y eta / h),
// integrating over every variable of F except "h". Variables of the result stand for eta.
FourierResult stationary_phase(const Series& F, const Series& amplitude);

}  // namespace jq

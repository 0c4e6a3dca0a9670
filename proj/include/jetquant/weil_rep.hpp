#pragma once

#include <string>
#include <vector>

#include "jetquant/scalars.hpp"
#include "jetquant/weyl.hpp"

namespace jq {

// scalar * exp(i T x^2 / 2h) * amplitude(x, h)
struct GaussianJet {
  enum class Mode { Weil, V0, Hat };
  Mode mode = Mode::Weil;
  Eigen::MatrixXcd T;
  Series amplitude;  // layout x1..xn, h
  OscillatoryScalar scalar;

  int n() const { return static_cast<int>(T.rows()); }
  static LayoutPtr amplitude_layout(int n, int cap, double eps = kDefaultEps);
  static GaussianJet make(Mode mode, const Eigen::MatrixXcd& T, const Series& amplitude);
  // Checks the mode invariants; throws Error.
  void validate() const;

  json to_json() const;
  static GaussianJet from_json(const json& j);
};

const char* mode_name(GaussianJet::Mode m);

struct SpGenerator {
  enum class Kind { Shear, Linear, Fourier, Central };
  Kind kind = Kind::Central;
  Eigen::MatrixXd matrix;         // A for Shear, B for Linear
  std::vector<int> vars;          // Fourier block; empty means all
  int power = 0;                  // Central

  static SpGenerator shear(const Eigen::MatrixXd& A);
  static SpGenerator linear(const Eigen::MatrixXd& B);
  static SpGenerator fourier(std::vector<int> vars = {});
  static SpGenerator central(int k);
};

// Product g_1 g_2 ... g_m; the rightmost generator acts first.
using SpWord = std::vector<SpGenerator>;

json word_to_json(const SpWord& w);
SpWord word_from_json(const json& j);

// Raised when a step is undefined on its input (degenerate block in V0 mode).
struct UndefinedAction : Error {
  int step = -1;
  UndefinedAction(const std::string& what, int step) : Error(what), step(step) {}
};

GaussianJet act_shear(const Eigen::MatrixXd& A, const GaussianJet& f);
GaussianJet act_gl(const Eigen::MatrixXd& B, const GaussianJet& f);
// Kernel (2 pi h)^{-m/2} exp(i x_S eta_S / h) over the block S; eta_S takes the slots of x_S.
GaussianJet act_fourier(const std::vector<int>& vars, const GaussianJet& f);
GaussianJet act_central(int k, const GaussianJet& f);
GaussianJet act_generator(const SpGenerator& g, const GaussianJet& f);
GaussianJet act_word(const SpWord& w, const GaussianJet& f);

// Matrix in Sp(2n) acting on (x, xi).
Eigen::MatrixXd sp_matrix(const SpGenerator& g, int n);
Eigen::MatrixXd sp_matrix(const SpWord& w, int n);

// w1 w2 with adjacent generators merged (shears add, linears multiply,
// a repeated Fourier block becomes the reflection on that block).
SpWord compose_words(const SpWord& w1, const SpWord& w2, int n);

struct CenterComparison {
  int power = 0;          // a = i^power b
  double residual = 0.0;  // after removing the central factor
  bool matched = false;
};
CenterComparison compare_up_to_center(const GaussianJet& a, const GaussianJet& b, double tol = 1e-8);

// Op(w) applied to the jet; w lives in A with A.n == f.n().
GaussianJet weyl_act(const WeylAlgebra& A, const Series& w, const GaussianJet& f);
// exp((1/ih) Op(payload)) applied to the jet; payload degree must be at least 3.
GaussianJet exp_act(const WeylAlgebra& A, const Series& payload, const GaussianJet& f);

// Largest coefficient distance between jets with equal T (throws if T differs beyond tol).
double jet_distance(const GaussianJet& a, const GaussianJet& b, double tol = 1e-9);

}  // namespace jq

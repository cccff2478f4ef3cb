#ifndef SARCASM_NUMERICS_HPP
#define SARCASM_NUMERICS_HPP

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sarcasm/rng.hpp"

namespace sarcasm {

// Model arithmetic runs in double by default. Defining
// SARCASM_SINGLE_PRECISION (cmake -DSARCASM_SINGLE_PRECISION=ON) switches the
// scalar to float; test tolerances that depend on it widen by 10x.
#ifdef SARCASM_SINGLE_PRECISION
using Real = float;
#else
using Real = double;
#endif

using Vector = std::vector<Real>;

// Dense row-major matrix. Gradients here are hand-derived per layer, so all
// the structure we need is contiguous storage with an explicit shape.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, Real value = 0);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Real& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  Real operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  Real* row(std::size_t i) { return data_.data() + i * cols_; }
  const Real* row(std::size_t i) const { return data_.data() + i * cols_; }
  std::span<Real> row_span(std::size_t i) { return {row(i), cols_}; }
  std::span<const Real> row_span(std::size_t i) const { return {row(i), cols_}; }

  std::span<Real> flat() { return data_; }
  std::span<const Real> flat() const { return data_; }

  void fill(Real value);
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> data_;
};

enum class Activation { identity, relu };

// Max-shifted softmax; finite scores give a finite distribution summing to 1.
Vector softmax(std::span<const Real> scores);

Real relu(Real x);
Vector relu(std::span<const Real> x);

// Valid-window 1-d convolution over sentence rows: output[t] is the
// activation of the Frobenius inner product of `filter` with rows
// [t, t + filter.rows()) of `sentence`, plus `bias`. Output length is
// sentence.rows() - filter.rows() + 1; a taller filter than sentence is an
// error.
Vector convolve(const Matrix& sentence, const Matrix& filter, Real bias, Activation act);

// Same computation writing into `out`; `filter` is a raw row-major block of
// shape height x width. Hot path for the encoder, which stores filter banks
// stacked in one matrix.
void convolve_into(const Matrix& sentence, const Real* filter, std::size_t height,
                   std::size_t width, Real bias, Activation act, Vector& out);

// First index attaining the maximum (ties break low).
std::size_t argmax_first(std::span<const Real> values);

Real max_pool(std::span<const Real> feature_map);

// -log(probs[gold]) with probs floored at 1e-12 before the log.
Real cross_entropy(std::span<const Real> probs, std::size_t gold);

// a.b / (|a| |b|); zero when either vector is zero.
Real cosine_similarity(std::span<const Real> a, std::span<const Real> b);

// Per-tensor AdaDelta accumulators, lazily sized on first step.
struct AdaDeltaState {
  Vector grad_sq;    // E[g^2]
  Vector update_sq;  // E[dx^2]
};

// E[g^2] <- rho E[g^2] + (1-rho) g^2
// dx     <- -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
// E[dx^2]<- rho E[dx^2] + (1-rho) dx^2
// Accumulators decay even where g is zero.
void adadelta_step(std::span<Real> param, std::span<const Real> grad, AdaDeltaState& state,
                   Real rho, Real eps);

struct GradCheckGroup {
  std::string name;
  std::span<Real> param;       // perturbed in place and restored
  std::span<const Real> grad;  // analytic gradient at the current point
};

struct GradCheckReport {
  double max_rel_error = 0;
  std::string worst_group;
  std::size_t worst_index = 0;
  double worst_analytic = 0;
  double worst_numeric = 0;
};

// Central-difference check of analytic gradients. Samples up to
// `coords_per_group` coordinates from each group (all of them when the group
// is smaller), relative error |a - n| / max(1e-8, |a| + |n|). The loss
// callback is evaluated twice up front; disagreement means it is not
// deterministic and raises an error.
GradCheckReport gradient_check(const std::function<double()>& loss,
                               std::span<GradCheckGroup> groups, double fd_eps,
                               std::size_t coords_per_group, Rng& rng);

// Rows projected onto their top two principal components (covariance
// eigenvectors via cyclic Jacobi). Requires at least two rows and two
// columns. Component signs are fixed by making each vector's
// largest-magnitude entry positive.
struct Pca2d {
  Matrix coords;  // n x 2
  std::array<double, 2> eigenvalues;
};
Pca2d pca_2d(const Matrix& rows);

}  // namespace sarcasm

#endif

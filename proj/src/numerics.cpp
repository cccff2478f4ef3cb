#include "sarcasm/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

namespace sarcasm {

Matrix::Matrix(std::size_t rows, std::size_t cols, Real value)
    : rows_(rows), cols_(cols), data_(rows * cols, value) {}

void Matrix::fill(Real value) { std::fill(data_.begin(), data_.end(), value); }

Vector softmax(std::span<const Real> scores) {
  if (scores.empty()) throw std::invalid_argument("softmax: empty input");
  Real max = *std::max_element(scores.begin(), scores.end());
  Vector out(scores.size());
  Real sum = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - max);
    sum += out[i];
  }
  for (Real& v : out) v /= sum;
  return out;
}

Real relu(Real x) { return x > 0 ? x : Real(0); }

Vector relu(std::span<const Real> x) {
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = relu(x[i]);
  return out;
}

void convolve_into(const Matrix& sentence, const Real* filter, std::size_t height,
                   std::size_t width, Real bias, Activation act, Vector& out) {
  if (width != sentence.cols())
    throw std::invalid_argument("convolve: filter width does not match sentence columns");
  if (height == 0 || height > sentence.rows())
    throw std::invalid_argument("convolve: filter height exceeds sentence length");
  const std::size_t n = sentence.rows() - height + 1;
  out.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    Real acc = bias;
    for (std::size_t r = 0; r < height; ++r) {
      const Real* srow = sentence.row(t + r);
      const Real* frow = filter + r * width;
      for (std::size_t c = 0; c < width; ++c) acc += frow[c] * srow[c];
    }
    out[t] = act == Activation::relu ? relu(acc) : acc;
  }
}

Vector convolve(const Matrix& sentence, const Matrix& filter, Real bias, Activation act) {
  Vector out;
  convolve_into(sentence, filter.row(0), filter.rows(), filter.cols(), bias, act, out);
  return out;
}

std::size_t argmax_first(std::span<const Real> values) {
  if (values.empty()) throw std::invalid_argument("argmax_first: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

Real max_pool(std::span<const Real> feature_map) {
  return feature_map[argmax_first(feature_map)];
}

Real cross_entropy(std::span<const Real> probs, std::size_t gold) {
  if (gold >= probs.size()) throw std::invalid_argument("cross_entropy: gold index out of range");
  Real p = std::max(probs[gold], Real(1e-12));
  return -std::log(p);
}

Real cosine_similarity(std::span<const Real> a, std::span<const Real> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("cosine_similarity: length mismatch");
  Real dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

void adadelta_step(std::span<Real> param, std::span<const Real> grad, AdaDeltaState& state,
                   Real rho, Real eps) {
  if (param.size() != grad.size())
    throw std::invalid_argument("adadelta_step: param/grad shape mismatch");
  if (state.grad_sq.empty()) {
    state.grad_sq.assign(param.size(), 0);
    state.update_sq.assign(param.size(), 0);
  }
  if (state.grad_sq.size() != param.size())
    throw std::invalid_argument("adadelta_step: state shape mismatch");
  for (std::size_t i = 0; i < param.size(); ++i) {
    Real g = grad[i];
    state.grad_sq[i] = rho * state.grad_sq[i] + (1 - rho) * g * g;
    Real dx = -std::sqrt(state.update_sq[i] + eps) / std::sqrt(state.grad_sq[i] + eps) * g;
    state.update_sq[i] = rho * state.update_sq[i] + (1 - rho) * dx * dx;
    param[i] += dx;
  }
}

GradCheckReport gradient_check(const std::function<double()>& loss,
                               std::span<GradCheckGroup> groups, double fd_eps,
                               std::size_t coords_per_group, Rng& rng) {
  double l0 = loss();
  double l1 = loss();
  if (std::memcmp(&l0, &l1, sizeof(double)) != 0)
    throw std::runtime_error("gradient_check: loss function is not deterministic");

  GradCheckReport report;
  for (GradCheckGroup& group : groups) {
    if (group.param.size() != group.grad.size())
      throw std::invalid_argument("gradient_check: param/grad size mismatch in group " +
                                  group.name);
    std::vector<std::size_t> coords(group.param.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (coords.size() > coords_per_group) {
      rng.shuffle(coords);
      coords.resize(coords_per_group);
    }
    for (std::size_t idx : coords) {
      Real saved = group.param[idx];
      group.param[idx] = saved + static_cast<Real>(fd_eps);
      double plus = loss();
      group.param[idx] = saved - static_cast<Real>(fd_eps);
      double minus = loss();
      group.param[idx] = saved;
      double numeric = (plus - minus) / (2 * fd_eps);
      double analytic = static_cast<double>(group.grad[idx]);
      double rel = std::abs(analytic - numeric) /
                   std::max(1e-8, std::abs(analytic) + std::abs(numeric));
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_group = group.name;
        report.worst_index = idx;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

namespace {

// cyclic Jacobi sweeps on a symmetric matrix; good enough for the small
// covariance matrices seen here
void jacobi_eigen(Matrix& a, Matrix& vecs) {
  const std::size_t n = a.rows();
  vecs = Matrix(n, n, 0);
  for (std::size_t i = 0; i < n; ++i) vecs(i, i) = 1;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += double(a(i, j)) * double(a(i, j));
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        double theta = (double(a(q, q)) - double(a(p, p))) / (2.0 * double(a(p, q)));
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = a(k, p), akq = a(k, q);
          a(k, p) = static_cast<Real>(c * akp - s * akq);
          a(k, q) = static_cast<Real>(s * akp + c * akq);
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a(p, k), aqk = a(q, k);
          a(p, k) = static_cast<Real>(c * apk - s * aqk);
          a(q, k) = static_cast<Real>(s * apk + c * aqk);
        }
        for (std::size_t k = 0; k < n; ++k) {
          double vkp = vecs(k, p), vkq = vecs(k, q);
          vecs(k, p) = static_cast<Real>(c * vkp - s * vkq);
          vecs(k, q) = static_cast<Real>(s * vkp + c * vkq);
        }
      }
    }
  }
}

}  // namespace

Pca2d pca_2d(const Matrix& rows) {
  const std::size_t n = rows.rows();
  const std::size_t d = rows.cols();
  if (n < 2 || d < 2)
    throw std::invalid_argument("pca_2d: need at least 2 rows and 2 columns");

  Vector mean(d, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += rows(i, j);
  for (Real& m : mean) m /= static_cast<Real>(n);

  Matrix cov(d, d, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a) {
      Real va = rows(i, a) - mean[a];
      for (std::size_t b = a; b < d; ++b) cov(a, b) += va * (rows(i, b) - mean[b]);
    }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      cov(a, b) /= static_cast<Real>(n - 1);
      cov(b, a) = cov(a, b);
    }

  Matrix vecs;
  jacobi_eigen(cov, vecs);

  std::array<std::size_t, 2> top{0, 0};
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return cov(x, x) > cov(y, y); });
  top = {order[0], order[1]};

  Pca2d out;
  out.eigenvalues = {double(cov(top[0], top[0])), double(cov(top[1], top[1]))};
  out.coords = Matrix(n, 2, 0);
  for (int comp = 0; comp < 2; ++comp) {
    std::size_t col = top[static_cast<std::size_t>(comp)];
    // sign convention: largest-magnitude entry positive
    std::size_t big = 0;
    for (std::size_t k = 1; k < d; ++k)
      if (std::abs(vecs(k, col)) > std::abs(vecs(big, col))) big = k;
    Real sign = vecs(big, col) >= 0 ? Real(1) : Real(-1);
    for (std::size_t i = 0; i < n; ++i) {
      Real dot = 0;
      for (std::size_t j = 0; j < d; ++j) dot += (rows(i, j) - mean[j]) * vecs(j, col);
      out.coords(i, static_cast<std::size_t>(comp)) = sign * dot;
    }
  }
  return out;
}

}  // namespace sarcasm

#ifndef CFSM_PROBLEMS_HPP
#define CFSM_PROBLEMS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cfsm/core.hpp"
#include "cfsm/rng.hpp"

namespace cfsm {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Quadratics f_j(x) = s_j ||x - c_j||^2
// ---------------------------------------------------------------------------

/// Scaled isotropic quadratics. With a single common scale the prefix optimum
/// is the running mean of the centers; with per-component scales it is the
/// scale-weighted mean.
///
/// G is the gradient-norm bound over the origin ball of radius `feasible_radius`
/// (pass +inf when there is no bounded feasible set).
template <typename Scalar = double>
class QuadraticStream final : public ComponentStream<Scalar> {
 public:
  using Vector = VectorX<Scalar>;

  QuadraticStream(std::vector<Vector> centers, std::vector<Scalar> scales,
                  Scalar feasible_radius)
      : centers_(std::move(centers)), scales_(std::move(scales)) {
    if (centers_.empty()) throw InvalidInput("quadratic stream needs at least one component");
    if (scales_.size() == 1) scales_.assign(centers_.size(), scales_.front());
    if (scales_.size() != centers_.size())
      throw InvalidInput("quadratic stream: one scale per center (or a single shared scale)");
    const Eigen::Index d = centers_.front().size();
    Scalar max_center = 0;
    for (const auto& c : centers_) {
      if (c.size() != d || d == 0 || !all_finite(c))
        throw InvalidInput("quadratic stream: centers must be finite with equal dimension");
      max_center = std::max(max_center, c.norm());
    }
    for (Scalar s : scales_)
      if (!(s > 0) || !std::isfinite(s)) throw InvalidInput("quadratic stream: scales must be positive");
    const auto [lo, hi] = std::minmax_element(scales_.begin(), scales_.end());
    constants_.mu = 2 * *lo;
    constants_.L = 2 * *hi;
    constants_.G = 2 * *hi * (feasible_radius + max_center);

    running_weight_.resize(centers_.size());
    running_sum_.resize(centers_.size());
    Scalar weight = 0;
    Vector sum = Vector::Zero(d);
    for (std::size_t j = 0; j < centers_.size(); ++j) {
      weight += scales_[j];
      sum += scales_[j] * centers_[j];
      running_weight_[j] = weight;
      running_sum_[j] = sum;
    }
  }

  QuadraticStream(std::vector<Vector> centers, Scalar scale, Scalar feasible_radius)
      : QuadraticStream(std::move(centers), std::vector<Scalar>{scale}, feasible_radius) {}

  std::size_t size() const override { return centers_.size(); }
  Eigen::Index dimension() const override { return centers_.front().size(); }
  Constants<Scalar> constants() const override { return constants_; }
  Scalar component_smoothness(std::size_t j) const override {
    this->check_index(j);
    return 2 * scales_[j - 1];
  }

  const Vector& center(std::size_t j) const { return centers_.at(j - 1); }
  Scalar scale(std::size_t j) const { return scales_.at(j - 1); }

  /// Unconstrained minimizer of g_i.
  Vector optimum(std::size_t i) const {
    this->check_stage(i);
    return running_sum_[i - 1] / running_weight_[i - 1];
  }

 protected:
  Scalar do_value(std::size_t j, const Vector& x) const override {
    return scales_[j - 1] * (x - centers_[j - 1]).squaredNorm();
  }
  void do_gradient(std::size_t j, const Vector& x, Eigen::Ref<Vector> out) const override {
    out = 2 * scales_[j - 1] * (x - centers_[j - 1]);
  }

 private:
  std::vector<Vector> centers_;
  std::vector<Scalar> scales_;
  std::vector<Scalar> running_weight_;
  std::vector<Vector> running_sum_;
  Constants<Scalar> constants_;
};

/// n centers drawn uniformly from the origin ball of radius `radius`.
template <typename Scalar = double>
std::vector<VectorX<Scalar>> random_ball_points(std::size_t n, Eigen::Index d, Scalar radius, Rng& rng) {
  std::vector<VectorX<Scalar>> points;
  points.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    VectorX<Scalar> direction(d);
    for (Eigen::Index k = 0; k < d; ++k) direction(k) = static_cast<Scalar>(rng.normal());
    const Scalar norm = direction.norm();
    const Scalar r = radius * std::pow(static_cast<Scalar>(rng.uniform01()), Scalar(1) / static_cast<Scalar>(d));
    points.push_back(norm > 0 ? VectorX<Scalar>(direction * (r / norm)) : VectorX<Scalar>::Zero(d));
  }
  return points;
}

// ---------------------------------------------------------------------------
// Ridge regression f_j(x) = (a_j^T x - b_j)^2 + lambda ||x||^2
// ---------------------------------------------------------------------------

template <typename Scalar = double>
struct RidgeConstants {
  Scalar mu{};           // 2 lambda
  Scalar L{};            // 2 lambda_max(sum a a^T / n) + 2 lambda
  Scalar G{};            // gradient bound over the origin ball of radius R
  Scalar L_component{};  // max_j 2 ||a_j||^2 + 2 lambda
  bool converged = true;
  int iterations = 0;
};

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
/// Returns {estimate, converged, iterations}.
template <typename Scalar>
std::tuple<Scalar, bool, int> power_iteration(const MatrixX<Scalar>& m, Scalar rel_tol = Scalar(1e-6),
                                              int max_iterations = 1000) {
  const Eigen::Index d = m.rows();
  VectorX<Scalar> v(d);
  for (Eigen::Index k = 0; k < d; ++k) v(k) = Scalar(1) + Scalar(k + 1) / Scalar(7 * d);
  v.normalize();
  Scalar estimate = v.dot(m * v);
  for (int it = 1; it <= max_iterations; ++it) {
    VectorX<Scalar> w = m * v;
    const Scalar norm = w.norm();
    if (norm == 0) return {Scalar(0), true, it};
    v = w / norm;
    const Scalar next = v.dot(m * v);
    if (std::abs(next - estimate) <= rel_tol * std::abs(next)) return {next, true, it};
    estimate = next;
  }
  return {estimate, false, max_iterations};
}

template <typename Scalar>
RidgeConstants<Scalar> estimate_ridge_constants(const RowMatrixX<Scalar>& rows, const VectorX<Scalar>& targets,
                                                Scalar lambda, Scalar radius) {
  RidgeConstants<Scalar> c;
  const auto n = static_cast<Scalar>(rows.rows());
  c.mu = 2 * lambda;
  const MatrixX<Scalar> gram = (rows.transpose() * rows) / n;
  auto [top, converged, iterations] = power_iteration<Scalar>(gram);
  c.L = 2 * top + 2 * lambda;
  c.converged = converged;
  c.iterations = iterations;
  const VectorX<Scalar> row_norms = rows.rowwise().norm();
  Scalar worst = 0;
  for (Eigen::Index j = 0; j < rows.rows(); ++j)
    worst = std::max(worst, row_norms(j) * (row_norms(j) * radius + std::abs(targets(j))));
  c.G = 2 * worst + 2 * lambda * radius;
  c.L_component = 2 * row_norms.array().square().maxCoeff() + 2 * lambda;
  return c;
}

template <typename Scalar = double>
class RidgeStream final : public ComponentStream<Scalar> {
 public:
  using Vector = VectorX<Scalar>;
  using Rows = RowMatrixX<Scalar>;

  /// `radius` bounds the region over which G is computed; +inf gives G = +inf.
  RidgeStream(Rows rows, Vector targets, Scalar lambda,
              Scalar radius = std::numeric_limits<Scalar>::infinity())
      : rows_(std::move(rows)), targets_(std::move(targets)), lambda_(lambda) {
    if (rows_.rows() == 0 || rows_.cols() == 0) throw InvalidInput("ridge stream needs data");
    if (targets_.size() != rows_.rows()) throw InvalidInput("ridge stream: one target per row");
    if (!(lambda_ > 0) || !std::isfinite(lambda_)) throw InvalidInput("ridge stream: lambda must be positive");
    if (!all_finite(rows_) || !all_finite(targets_)) throw InvalidInput("ridge stream: non-finite data");
    constants_ = estimate_ridge_constants<Scalar>(rows_, targets_, lambda_, radius);
  }

  std::size_t size() const override { return static_cast<std::size_t>(rows_.rows()); }
  Eigen::Index dimension() const override { return rows_.cols(); }
  Constants<Scalar> constants() const override { return {constants_.mu, constants_.L, constants_.G}; }
  Scalar component_smoothness(std::size_t j) const override {
    this->check_index(j);
    return 2 * rows_.row(static_cast<Eigen::Index>(j - 1)).squaredNorm() + 2 * lambda_;
  }

  const RidgeConstants<Scalar>& ridge_constants() const noexcept { return constants_; }
  const Rows& rows() const noexcept { return rows_; }
  const Vector& targets() const noexcept { return targets_; }
  Scalar lambda() const noexcept { return lambda_; }

 protected:
  Scalar do_value(std::size_t j, const Vector& x) const override {
    const auto row = static_cast<Eigen::Index>(j - 1);
    const Scalar residual = rows_.row(row).dot(x) - targets_(row);
    return residual * residual + lambda_ * x.squaredNorm();
  }
  void do_gradient(std::size_t j, const Vector& x, Eigen::Ref<Vector> out) const override {
    const auto row = static_cast<Eigen::Index>(j - 1);
    const Scalar residual = rows_.row(row).dot(x) - targets_(row);
    out = (2 * residual) * rows_.row(row).transpose() + (2 * lambda_) * x;
  }

 private:
  Rows rows_;
  Vector targets_;
  Scalar lambda_;
  RidgeConstants<Scalar> constants_;
};

/// Re-estimate the constants of a ridge stream with G taken over the origin ball of radius R.
template <typename Scalar>
RidgeConstants<Scalar> estimate_constants(const RidgeStream<Scalar>& stream, Scalar radius) {
  if (!(radius > 0)) throw InvalidInput("estimate_constants: radius must be positive");
  return estimate_ridge_constants<Scalar>(stream.rows(), stream.targets(), stream.lambda(), radius);
}

template <typename Scalar = double>
struct RidgeOptimum {
  VectorX<Scalar> x;
  Scalar value{};
};

/// Exact minimizer of g_i from a from-scratch Gram build. O(i d^2 + d^3).
template <typename Scalar>
RidgeOptimum<Scalar> ridge_exact_optimum(const RidgeStream<Scalar>& stream, std::size_t i) {
  stream.check_stage(i);
  const auto head = stream.rows().topRows(static_cast<Eigen::Index>(i));
  const auto inv_i = Scalar(1) / static_cast<Scalar>(i);
  MatrixX<Scalar> system = inv_i * (head.transpose() * head);
  system.diagonal().array() += stream.lambda();
  const VectorX<Scalar> rhs = inv_i * (head.transpose() * stream.targets().head(static_cast<Eigen::Index>(i)));
  Eigen::LLT<MatrixX<Scalar>> llt(system);
  if (llt.info() != Eigen::Success) throw NumericError("ridge_exact_optimum: factorization failed");
  RidgeOptimum<Scalar> out{llt.solve(rhs), Scalar(0)};
  if (!all_finite(out.x)) throw NumericError("ridge_exact_optimum: non-finite solution");
  const Scalar residual = (system * out.x - rhs).norm();
  if (residual > Scalar(1e-10) * std::max(rhs.norm(), std::numeric_limits<Scalar>::min()))
    throw NumericError("ridge_exact_optimum: residual " + std::to_string(residual) + " too large");
  out.value = prefix_value(stream, i, out.x);
  return out;
}

/// All per-stage ridge optima, built with rank-1 Gram updates.
///
/// The gap g_i(x) - g_i(x*_i) equals (x - x*_i)^T M_i (x - x*_i) with
/// M_i = sum_{j<=i} a_j a_j^T / i + lambda I, which is how gap() evaluates it
/// (exactly nonnegative, O(d^2)).
template <typename Scalar = double>
class RidgeOptima {
 public:
  explicit RidgeOptima(const RidgeStream<Scalar>& stream) {
    const Eigen::Index d = stream.dimension();
    const std::size_t n = stream.size();
    MatrixX<Scalar> gram = MatrixX<Scalar>::Zero(d, d);
    VectorX<Scalar> moment = VectorX<Scalar>::Zero(d);
    Scalar target_sq = 0;
    systems_.reserve(n);
    optima_.reserve(n);
    values_.reserve(n);
    for (std::size_t i = 1; i <= n; ++i) {
      const auto row = stream.rows().row(static_cast<Eigen::Index>(i - 1)).transpose();
      const Scalar b = stream.targets()(static_cast<Eigen::Index>(i - 1));
      gram.noalias() += row * row.transpose();
      moment += b * row;
      target_sq += b * b;
      const Scalar inv_i = Scalar(1) / static_cast<Scalar>(i);
      MatrixX<Scalar> system = inv_i * gram;
      system.diagonal().array() += stream.lambda();
      const VectorX<Scalar> rhs = inv_i * moment;
      Eigen::LLT<MatrixX<Scalar>> llt(system);
      if (llt.info() != Eigen::Success) throw NumericError("RidgeOptima: factorization failed");
      VectorX<Scalar> x = llt.solve(rhs);
      if (!all_finite(x)) throw NumericError("RidgeOptima: non-finite solution");
      values_.push_back(inv_i * target_sq - rhs.dot(x));
      optima_.push_back(std::move(x));
      systems_.push_back(std::move(system));
    }
  }

  std::size_t size() const noexcept { return optima_.size(); }
  const VectorX<Scalar>& optimum(std::size_t i) const { return optima_.at(i - 1); }
  Scalar optimal_value(std::size_t i) const { return values_.at(i - 1); }
  /// M_i = H_i / i + lambda I.
  const MatrixX<Scalar>& system(std::size_t i) const { return systems_.at(i - 1); }

  Scalar gap(std::size_t i, const VectorX<Scalar>& x) const {
    const VectorX<Scalar> delta = x - optimum(i);
    return delta.dot(system(i) * delta);
  }

 private:
  std::vector<MatrixX<Scalar>> systems_;
  std::vector<VectorX<Scalar>> optima_;
  std::vector<Scalar> values_;
};

enum class FeatureDistribution { kGaussian, kUniform };

/// Synthetic regression data: a_j with i.i.d. entries of variance 1/d,
/// b_j = a_j^T w + noise * N(0,1), w ~ N(0, I).
struct SyntheticRidgeSpec {
  std::uint64_t seed = 0;
  std::size_t n = 100;
  Eigen::Index d = 10;
  double noise = 0.1;
  FeatureDistribution distribution = FeatureDistribution::kGaussian;
};

template <typename Scalar = double>
std::pair<RowMatrixX<Scalar>, VectorX<Scalar>> synthetic_ridge_data(const SyntheticRidgeSpec& spec) {
  if (spec.n == 0 || spec.d <= 0) throw InvalidInput("synthetic ridge: n and d must be positive");
  Rng rng(spec.seed);
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(spec.d));
  VectorX<Scalar> truth(spec.d);
  for (Eigen::Index k = 0; k < spec.d; ++k) truth(k) = static_cast<Scalar>(rng.normal());
  RowMatrixX<Scalar> rows(static_cast<Eigen::Index>(spec.n), spec.d);
  VectorX<Scalar> targets(static_cast<Eigen::Index>(spec.n));
  for (Eigen::Index j = 0; j < rows.rows(); ++j) {
    for (Eigen::Index k = 0; k < spec.d; ++k) {
      const double draw = spec.distribution == FeatureDistribution::kGaussian
                              ? rng.normal()
                              : std::sqrt(3.0) * (2.0 * rng.uniform01() - 1.0);
      rows(j, k) = scale * static_cast<Scalar>(draw);
    }
    targets(j) = rows.row(j).dot(truth) + static_cast<Scalar>(spec.noise * rng.normal());
  }
  return {std::move(rows), std::move(targets)};
}

/// Divide every feature column by its largest absolute value, mapping features into [-1, 1].
template <typename Scalar>
void standardize_features(RowMatrixX<Scalar>& rows) {
  for (Eigen::Index k = 0; k < rows.cols(); ++k) {
    const Scalar peak = rows.col(k).cwiseAbs().maxCoeff();
    if (peak > 0) rows.col(k) /= peak;
  }
}

// ---------------------------------------------------------------------------
// Lower-bound instance on [-1, 1]^2
// ---------------------------------------------------------------------------

/// f_l = x1^2 + x2^2 for l not in {k, i*};  f_k adds (x1 - x2)^2;
/// f_{i*} = (x1 - 1)^2 + x1^2 + x2^2. Every component is 2-strongly convex,
/// 6-smooth and 6 sqrt(2)-Lipschitz on the box.
template <typename Scalar = double>
class AdversarialInstance final : public ComponentStream<Scalar> {
 public:
  using Vector = VectorX<Scalar>;

  AdversarialInstance(std::size_t n, std::size_t target_stage, std::size_t hidden)
      : n_(n), target_(target_stage), hidden_(hidden) {
    if (target_ < 2 || target_ > n_) throw InvalidInput("adversarial instance: need 2 <= i* <= n");
    if (hidden_ < 1 || hidden_ >= target_) throw InvalidInput("adversarial instance: need 1 <= k < i*");
  }

  /// Draws the hidden index k ~ Unif(1..i*-1).
  static AdversarialInstance sample(std::size_t n, std::size_t target_stage, Rng& rng) {
    if (target_stage < 2) throw InvalidInput("adversarial instance: need i* >= 2");
    return AdversarialInstance(n, target_stage, rng.uniform_index(1, target_stage - 1));
  }

  static Domain<Scalar> domain() {
    return Domain<Scalar>::box(Vector::Constant(2, -1), Vector::Constant(2, 1));
  }

  std::size_t size() const override { return n_; }
  Eigen::Index dimension() const override { return 2; }
  Constants<Scalar> constants() const override { return {Scalar(2), Scalar(6), 6 * std::sqrt(Scalar(2))}; }

  std::size_t target_stage() const noexcept { return target_; }
  std::size_t hidden() const noexcept { return hidden_; }

 protected:
  Scalar do_value(std::size_t j, const Vector& x) const override {
    Scalar v = x.squaredNorm();
    if (j == hidden_) v += (x(0) - x(1)) * (x(0) - x(1));
    if (j == target_) v += (x(0) - 1) * (x(0) - 1);
    return v;
  }
  void do_gradient(std::size_t j, const Vector& x, Eigen::Ref<Vector> out) const override {
    out = 2 * x;
    if (j == hidden_) {
      out(0) += 2 * (x(0) - x(1));
      out(1) -= 2 * (x(0) - x(1));
    }
    if (j == target_) out(0) += 2 * (x(0) - 1);
  }

 private:
  std::size_t n_, target_, hidden_;
};

/// Minimizer of g_i for the lower-bound instance at i = i*: ((i+1)/(i^2+3i+1), 1/(i^2+3i+1)).
template <typename Scalar = double>
VectorX<Scalar> adversarial_optimum(std::size_t i) {
  const auto s = static_cast<Scalar>(i);
  const Scalar denom = s * s + 3 * s + 1;
  VectorX<Scalar> x(2);
  x << (s + 1) / denom, Scalar(1) / denom;
  return x;
}

/// Minimizer over the axis x2 = 0: w = 1/(i+2), with value (i+1)/(i(i+2)).
template <typename Scalar = double>
std::pair<Scalar, Scalar> adversarial_axis_minimum(std::size_t i) {
  const auto s = static_cast<Scalar>(i);
  return {Scalar(1) / (s + 2), (s + 1) / (s * (s + 2))};
}

/// Gap of the best point with second coordinate 0: 1/(i^4 + 5i^3 + 7i^2 + 2i).
template <typename Scalar = double>
Scalar adversarial_gap(std::size_t i) {
  if (i < 2) throw InvalidInput("adversarial_gap: need i >= 2");
  const auto s = static_cast<Scalar>(i);
  return Scalar(1) / (((s + 5) * s + 7) * s * s + 2 * s);
}

// ---------------------------------------------------------------------------
// Drift of consecutive optima
// ---------------------------------------------------------------------------

/// ||x*_{i+j} - x*_i|| <= 2 j G / (mu (2i + j)).
template <typename Scalar>
Scalar drift_bound(std::size_t i, std::size_t j, Scalar G, Scalar mu) {
  return 2 * static_cast<Scalar>(j) * G / (mu * static_cast<Scalar>(2 * i + j));
}

template <typename Scalar>
bool drift_bound_check(const VectorX<Scalar>& optimum_i, const VectorX<Scalar>& optimum_i_plus_j,
                       std::size_t i, std::size_t j, Scalar G, Scalar mu) {
  return (optimum_i_plus_j - optimum_i).norm() <= drift_bound(i, j, G, mu);
}

/// Stream-level form for families that know their optima (QuadraticStream).
template <typename Stream>
bool drift_bound_check(const Stream& stream, std::size_t i, std::size_t j) {
  if (i < 1 || j < 1 || i + j > stream.size()) throw InvalidInput("drift_bound_check: need i, j >= 1, i + j <= n");
  const auto c = stream.constants();
  return drift_bound_check(stream.optimum(i), stream.optimum(i + j), i, j, c.G, c.mu);
}

}  // namespace cfsm

#endif  // CFSM_PROBLEMS_HPP

#ifndef CFSM_CORE_HPP
#define CFSM_CORE_HPP

// Shared abstractions for continual finite-sum minimization.
//
// Indexing convention: stages and component indices are 1-based, matching the
// meaning "stage i has seen f_1..f_i". Eigen coordinates stay 0-based.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfsm/errors.hpp"

namespace cfsm {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& x) {
  return x.allFinite();
}

/// Counts first-order oracle calls: one per single-component gradient.
///
/// Optionally logs the component index of every query, which the lower-bound
/// demonstration uses to decide whether a hidden component was ever touched.
class FoLedger {
 public:
  std::uint64_t count() const noexcept { return count_; }

  void record(std::size_t component) {
    ++count_;
    if (logging_) log_.push_back(component);
  }

  void enable_log() { logging_ = true; }
  const std::vector<std::size_t>& log() const noexcept { return log_; }
  void clear_log() { log_.clear(); }

 private:
  std::uint64_t count_ = 0;
  bool logging_ = false;
  std::vector<std::size_t> log_;
};

/// Strong convexity, smoothness and gradient-norm bound of every component.
template <typename Scalar = double>
struct Constants {
  Scalar mu{};
  Scalar L{};
  Scalar G{};

  void validate() const {
    if (!(mu > 0)) throw InvalidConfig("constants: mu must be positive");
    if (!(L >= mu)) throw InvalidConfig("constants: need L >= mu");
    if (!(G >= 0)) throw InvalidConfig("constants: G must be nonnegative");
  }
};

/// Feasible set with Euclidean projection.
template <typename Scalar = double>
class Domain {
 public:
  using Vector = VectorX<Scalar>;
  enum class Kind { kUnconstrained, kBox, kBall };

  static Domain unconstrained(Eigen::Index dimension) {
    if (dimension <= 0) throw InvalidInput("domain dimension must be positive");
    Domain d;
    d.kind_ = Kind::kUnconstrained;
    d.dimension_ = dimension;
    return d;
  }

  static Domain box(Vector lower, Vector upper) {
    if (lower.size() != upper.size() || lower.size() == 0)
      throw InvalidInput("box bounds must have equal, positive dimension");
    if (!all_finite(lower) || !all_finite(upper) || (upper.array() < lower.array()).any())
      throw InvalidInput("box bounds must be finite with lower <= upper");
    Domain d;
    d.kind_ = Kind::kBox;
    d.dimension_ = lower.size();
    d.lower_ = std::move(lower);
    d.upper_ = std::move(upper);
    return d;
  }

  static Domain ball(Vector center, Scalar radius) {
    if (center.size() == 0 || !all_finite(center))
      throw InvalidInput("ball center must be finite and nonempty");
    if (!(radius >= 0) || !std::isfinite(radius))
      throw InvalidInput("ball radius must be finite and nonnegative");
    Domain d;
    d.kind_ = Kind::kBall;
    d.dimension_ = center.size();
    d.center_ = std::move(center);
    d.radius_ = radius;
    return d;
  }

  Kind kind() const noexcept { return kind_; }
  Eigen::Index dimension() const noexcept { return dimension_; }
  bool bounded() const noexcept { return kind_ != Kind::kUnconstrained; }

  /// Largest pairwise distance; +inf when unconstrained.
  Scalar diameter() const {
    switch (kind_) {
      case Kind::kBox: return (upper_ - lower_).norm();
      case Kind::kBall: return 2 * radius_;
      default: return std::numeric_limits<Scalar>::infinity();
    }
  }

  /// Radius of the smallest origin-centered ball containing the set.
  Scalar origin_radius() const {
    switch (kind_) {
      case Kind::kBox: return lower_.cwiseAbs().cwiseMax(upper_.cwiseAbs()).norm();
      case Kind::kBall: return center_.norm() + radius_;
      default: return std::numeric_limits<Scalar>::infinity();
    }
  }

  bool contains(const Vector& x, Scalar tol = 0) const {
    check_dimension(x);
    switch (kind_) {
      case Kind::kBox:
        return ((x - lower_).array() >= -tol).all() && ((upper_ - x).array() >= -tol).all();
      case Kind::kBall: return (x - center_).norm() <= radius_ + tol;
      default: return true;
    }
  }

  const Vector& lower() const noexcept { return lower_; }
  const Vector& upper() const noexcept { return upper_; }
  const Vector& center() const noexcept { return center_; }
  Scalar radius() const noexcept { return radius_; }

  void check_dimension(const Vector& x) const {
    if (x.size() != dimension_)
      throw InvalidInput("dimension mismatch: expected " + std::to_string(dimension_) +
                         ", got " + std::to_string(x.size()));
  }

 private:
  Domain() = default;

  Kind kind_ = Kind::kUnconstrained;
  Eigen::Index dimension_ = 0;
  Vector lower_, upper_, center_;
  Scalar radius_ = 0;
};

/// Euclidean projection onto the domain.
template <typename Scalar>
VectorX<Scalar> project(const Domain<Scalar>& domain, const VectorX<Scalar>& x) {
  domain.check_dimension(x);
  if (!all_finite(x)) throw NumericError("project: non-finite point");
  using Kind = typename Domain<Scalar>::Kind;
  switch (domain.kind()) {
    case Kind::kBox: return x.cwiseMax(domain.lower()).cwiseMin(domain.upper());
    case Kind::kBall: {
      const VectorX<Scalar> offset = x - domain.center();
      const Scalar dist = offset.norm();
      if (dist <= domain.radius()) return x;
      return domain.center() + offset * (domain.radius() / dist);
    }
    default: return x;
  }
}

/// Ordered sequence f_1..f_n of component functions.
///
/// Gradients are only reachable through a FoLedger, so no algorithm can
/// evaluate one without it being counted. Values are free.
template <typename Scalar = double>
class ComponentStream {
 public:
  using Vector = VectorX<Scalar>;

  virtual ~ComponentStream() = default;

  virtual std::size_t size() const = 0;
  virtual Eigen::Index dimension() const = 0;
  virtual Constants<Scalar> constants() const = 0;

  /// Smoothness of component j alone; defaults to the shared bound L.
  virtual Scalar component_smoothness(std::size_t j) const {
    check_index(j);
    return constants().L;
  }

  Scalar value(std::size_t j, const Vector& x) const {
    check_index(j);
    check_point(x);
    return do_value(j, x);
  }

  void gradient(std::size_t j, const Vector& x, Eigen::Ref<Vector> out, FoLedger& ledger) const {
    check_index(j);
    check_point(x);
    ledger.record(j);
    do_gradient(j, x, out);
  }

  Vector gradient(std::size_t j, const Vector& x, FoLedger& ledger) const {
    Vector out(dimension());
    gradient(j, x, out, ledger);
    return out;
  }

  void check_index(std::size_t j) const {
    if (j < 1 || j > size())
      throw InvalidInput("component index " + std::to_string(j) + " outside [1, " +
                         std::to_string(size()) + "]");
  }

  void check_stage(std::size_t i) const {
    if (i < 1 || i > size())
      throw InvalidInput("stage " + std::to_string(i) + " outside [1, " +
                         std::to_string(size()) + "]");
  }

 protected:
  virtual Scalar do_value(std::size_t j, const Vector& x) const = 0;
  virtual void do_gradient(std::size_t j, const Vector& x, Eigen::Ref<Vector> out) const = 0;

 private:
  void check_point(const Vector& x) const {
    if (x.size() != dimension())
      throw InvalidInput("dimension mismatch: expected " + std::to_string(dimension()) +
                         ", got " + std::to_string(x.size()));
  }
};

/// g_i(x) = (1/i) sum_{j<=i} f_j(x). Does not touch any ledger.
template <typename Scalar>
Scalar prefix_value(const ComponentStream<Scalar>& stream, std::size_t i,
                    const VectorX<Scalar>& x) {
  stream.check_stage(i);
  Scalar total = 0;
  for (std::size_t j = 1; j <= i; ++j) total += stream.value(j, x);
  return total / static_cast<Scalar>(i);
}

/// grad g_i(x). Costs exactly i FOs.
template <typename Scalar>
VectorX<Scalar> prefix_gradient(const ComponentStream<Scalar>& stream, std::size_t i,
                                const VectorX<Scalar>& x, FoLedger& ledger) {
  stream.check_stage(i);
  VectorX<Scalar> total = VectorX<Scalar>::Zero(stream.dimension());
  VectorX<Scalar> grad(stream.dimension());
  for (std::size_t j = 1; j <= i; ++j) {
    stream.gradient(j, x, grad, ledger);
    total += grad;
  }
  return total / static_cast<Scalar>(i);
}

/// One row of a continual run: what a method produced at stage i.
struct RunRecord {
  std::size_t stage = 0;
  std::string method;
  double gap = std::numeric_limits<double>::quiet_NaN();  // filled by the evaluator
  std::uint64_t cum_fos = 0;
  double wall_seconds = 0.0;
};

/// Outputs x̂_1..x̂_n (outputs[i-1] is stage i) with one record per stage.
template <typename Scalar = double>
struct ContinualRun {
  std::vector<VectorX<Scalar>> outputs;
  std::vector<RunRecord> records;
};

}  // namespace cfsm

#endif  // CFSM_CORE_HPP

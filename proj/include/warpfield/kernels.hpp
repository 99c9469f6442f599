#pragma once

#include "warpfield/geometry.hpp"

#include <Eigen/Dense>

#include <numbers>

namespace warpfield {

/// Full 2x2 Gaussian bandwidth matrix (km^2). Construction rejects anything
/// that is not symmetric positive definite.
class Bandwidth {
 public:
  Bandwidth() : Bandwidth(Eigen::Matrix2d::Identity()) {}

  explicit Bandwidth(const Eigen::Matrix2d& h) : h_(h) {
    if (!h.allFinite() || h(0, 1) != h(1, 0)) throw ValidationError("bandwidth must be symmetric and finite");
    const double det = h.determinant();
    if (!(h(0, 0) > 0) || !(det > 0)) throw ValidationError("bandwidth must be positive definite");
    inv_ = h.inverse();
    inv_(0, 1) = inv_(1, 0);
    det_ = det;
    peak_ = 1.0 / (2.0 * std::numbers::pi * std::sqrt(det));
  }

  static Bandwidth isotropic(double variance) {
    return Bandwidth(variance * Eigen::Matrix2d::Identity());
  }

  Bandwidth scaled(double alpha) const { return Bandwidth(alpha * h_); }

  const Eigen::Matrix2d& matrix() const { return h_; }
  const Eigen::Matrix2d& inverse() const { return inv_; }
  double determinant() const { return det_; }
  /// Kernel value at zero offset.
  double peak() const { return peak_; }
  /// Largest marginal standard deviation.
  double max_std() const { return std::sqrt(h_.selfadjointView<Eigen::Lower>().eigenvalues().maxCoeff()); }

  /// Quadratic form d' H^-1 d.
  double mahalanobis2(double dx, double dy) const {
    return inv_(0, 0) * dx * dx + 2.0 * inv_(0, 1) * dx * dy + inv_(1, 1) * dy * dy;
  }

 private:
  Eigen::Matrix2d h_;
  Eigen::Matrix2d inv_;
  double det_ = 1;
  double peak_ = 0;
};

inline double gaussian_eval(const Point& x, const Point& s, const Bandwidth& h) {
  const Point d = x - s;
  return h.peak() * std::exp(-0.5 * h.mahalanobis2(d.x(), d.y()));
}

/// Squared Mahalanobis radius past which kernel matrices and rasters drop a
/// term; exp(-30) relative to the peak.
inline constexpr double kKernelCutoff = 60.0;

namespace detail {
/// exp(x), zero past the kernel cutoff. Keeps the tail of K at exact zeros
/// instead of subnormals, which would slow the LU factorization severalfold.
inline Eigen::ArrayXd flushed_exp(const Eigen::ArrayXd& x) {
  return (x < -0.5 * kKernelCutoff).select(0.0, x.exp());
}
}  // namespace detail

/// Row i holds k(a_i, b_j | H).
inline Eigen::MatrixXd kernel_matrix(const std::vector<Point>& a, const std::vector<Point>& b,
                                     const Bandwidth& h) {
  const auto na = static_cast<Eigen::Index>(a.size()), nb = static_cast<Eigen::Index>(b.size());
  Eigen::MatrixXd k(na, nb);
  Eigen::ArrayXd ax(na), ay(na);
  for (Eigen::Index i = 0; i < na; ++i) {
    ax[i] = a[i].x();
    ay[i] = a[i].y();
  }
  const auto& inv = h.inverse();
  Eigen::ArrayXd dx, dy;
  for (Eigen::Index j = 0; j < nb; ++j) {
    dx = ax - b[j].x();
    dy = ay - b[j].y();
    k.col(j).array() =
        h.peak() * detail::flushed_exp(-0.5 * (inv(0, 0) * dx.square() + 2.0 * inv(0, 1) * dx * dy + inv(1, 1) * dy.square()));
  }
  return k;
}

/// Symmetric Gram matrix of a point set; the diagonal is exactly the peak.
inline Eigen::MatrixXd gram_matrix(const std::vector<Point>& pts, const Bandwidth& h) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd k(n, n);
  Eigen::ArrayXd px(n), py(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    px[i] = pts[i].x();
    py[i] = pts[i].y();
  }
  const auto& inv = h.inverse();
  Eigen::ArrayXd dx, dy;
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto len = n - j;
    dx = px.tail(len) - pts[j].x();
    dy = py.tail(len) - pts[j].y();
    k.col(j).tail(len).array() =
        h.peak() * detail::flushed_exp(-0.5 * (inv(0, 0) * dx.square() + 2.0 * inv(0, 1) * dx * dy + inv(1, 1) * dy.square()));
    k(j, j) = h.peak();
  }
  k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
  return k;
}

/// Factorization of (I + lambda L K), shared by every right-hand side that
/// needs the warp operator applied.
class WarpFactor {
 public:
  /// Condition numbers above this are reported as numerical failure.
  static constexpr double kMaxCondition = 1e12;

  WarpFactor(const Laplacian& lap, const Eigen::MatrixXd& gram, double lambda)
      : lap_(&lap), lambda_(lambda) {
    if (lambda < 0) throw ValidationError("deformation must be >= 0");
    if (lap.size() != gram.rows()) throw ValidationError("cloud and Laplacian sizes disagree");
    trivial_ = lambda == 0 || lap.matrix.nonZeros() == 0;
    if (trivial_) return;
    // I + lambda L K is the transpose of I + lambda K L (both symmetric), and
    // K L is cheap to build from column axpys, so factor that and solve
    // against its transpose.
    const auto z = gram.rows();
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(z, z);
    for (Eigen::Index j = 0; j < lap.matrix.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(lap.matrix, j); it; ++it)
        system.col(j) += (lambda * it.value()) * gram.col(it.index());
    lu_.compute(system);
    const double rc = lu_.rcond();
    condition_ = rc > 0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
    if (!(condition_ <= kMaxCondition) || !lu_.matrixLU().diagonal().allFinite())
      throw NumericalError("warp system is singular or ill-conditioned (condition estimate " +
                               std::to_string(condition_) + ")",
                           condition_);
  }

  bool trivial() const { return trivial_; }
  double condition() const { return condition_; }
  double lambda() const { return lambda_; }

  /// (I + lambda L K)^-1 lambda L B, column by column.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& rhs) const {
    if (trivial_) return Eigen::MatrixXd::Zero(rhs.rows(), rhs.cols());
    Eigen::MatrixXd b = lambda_ * (lap_->matrix * rhs);
    return lu_.transpose().solve(b);
  }

  /// The full warp operator W.
  Eigen::MatrixXd operator_matrix() const {
    const auto z = lap_->size();
    if (trivial_) return Eigen::MatrixXd::Zero(z, z);
    Eigen::MatrixXd w = lu_.transpose().solve(lambda_ * lap_->dense());
    return 0.5 * (w + w.transpose());
  }

 private:
  const Laplacian* lap_;
  double lambda_;
  bool trivial_ = true;
  double condition_ = 1.0;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

/// Everything needed to evaluate the warped kernel for one (cloud, H, lambda).
struct LaplacianContext {
  PointCloud cloud;
  Laplacian laplacian;
  Bandwidth bandwidth;
  double lambda = 0;
  Eigen::MatrixXd gram;  // K
  Eigen::MatrixXd warp;  // W = (I + lambda L K)^-1 lambda L, symmetrized
  double condition = 1;

  Eigen::VectorXd kernel_vector(const Point& x) const {
    return kernel_matrix({x}, cloud.points, bandwidth).row(0).transpose();
  }
};

inline LaplacianContext build_context(PointCloud cloud, Laplacian lap, const Bandwidth& h, double lambda) {
  if (static_cast<std::size_t>(lap.size()) != cloud.size())
    throw ValidationError("cloud and Laplacian sizes disagree");
  LaplacianContext ctx;
  ctx.gram = gram_matrix(cloud.points, h);
  {
    WarpFactor factor(lap, ctx.gram, lambda);
    ctx.warp = factor.operator_matrix();
    ctx.condition = factor.condition();
  }
  ctx.cloud = std::move(cloud);
  ctx.laplacian = std::move(lap);
  ctx.bandwidth = h;
  ctx.lambda = lambda;
  return ctx;
}

/// Convenience: cloud -> kNN graph -> Laplacian -> context.
inline LaplacianContext build_context(const PointCloud& cloud, const Bandwidth& h, double lambda,
                                      const KnnOptions& knn = {}) {
  const auto graph = cloud.size() >= 2 ? build_knn_graph(cloud, knn) : empty_graph(static_cast<int>(cloud.size()));
  return build_context(cloud, build_laplacian(graph), h, lambda);
}

/// k(x,s) - k_x' W k_s. Can be negative.
inline double warped_eval(const LaplacianContext& ctx, const Point& x, const Point& s) {
  const double base = gaussian_eval(x, s, ctx.bandwidth);
  if (ctx.lambda == 0) return base;
  const Eigen::VectorXd kx = ctx.kernel_vector(x), ks = ctx.kernel_vector(s);
  return base - kx.dot(ctx.warp * ks);
}

inline Eigen::MatrixXd warped_gram(const LaplacianContext& ctx, const std::vector<Point>& pts) {
  Eigen::MatrixXd g = gram_matrix(pts, ctx.bandwidth);
  if (ctx.lambda == 0) return g;
  const Eigen::MatrixXd kp = kernel_matrix(pts, ctx.cloud.points, ctx.bandwidth);
  g -= kp * ctx.warp * kp.transpose();
  return 0.5 * (g + g.transpose());
}

}  // namespace warpfield

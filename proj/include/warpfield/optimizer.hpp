#pragma once

#include "warpfield/common.hpp"

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <random>

namespace warpfield {

struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::Index dims() const { return lower.size(); }
  Eigen::VectorXd width() const { return upper - lower; }
  bool contains(const Eigen::VectorXd& x) const {
    return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
  }
};

struct RbfOptions {
  int budget = 100;
  int design_size = 8;          // Latin-hypercube points
  int perturbed_candidates = 100;
  int uniform_candidates = 100;
  std::vector<double> sigmas{0.2, 0.05, 0.01};        // fractions of the box width
  std::vector<double> surrogate_weights{0.3, 0.5, 0.8, 0.95};
  double min_separation = 1e-9;  // in unit-box coordinates
  std::uint64_t seed = 1;
};

struct Evaluation {
  Eigen::VectorXd x;
  double value = 0;
};

struct RbfResult {
  Eigen::VectorXd best;
  double best_value = -std::numeric_limits<double>::infinity();
  std::vector<Evaluation> history;
  std::vector<double> incumbent_trace;  // best value after each evaluation
  int degenerate_fits = 0;              // iterations that fell back to a random candidate
};

namespace detail {

/// Cubic RBF interpolant with a linear tail, in unit-box coordinates.
class CubicRbf {
 public:
  bool fit(const std::vector<Eigen::VectorXd>& x, const std::vector<double>& f) {
    const auto n = static_cast<Eigen::Index>(x.size());
    const auto d = x.front().size();
    const auto m = n + d + 1;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) a(i, j) = std::pow((x[i] - x[j]).norm(), 3);
      a(i, n) = a(n, i) = 1.0;
      for (Eigen::Index k = 0; k < d; ++k) a(i, n + 1 + k) = a(n + 1 + k, i) = x[i][k];
      rhs[i] = f[i];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible()) return false;
    coef_ = lu.solve(rhs);
    if (!coef_.allFinite() || (a * coef_ - rhs).norm() > 1e-6 * (1.0 + rhs.norm())) return false;
    centers_ = x;
    return true;
  }

  double operator()(const Eigen::VectorXd& y) const {
    const auto n = static_cast<Eigen::Index>(centers_.size());
    double s = coef_[n];
    for (Eigen::Index i = 0; i < n; ++i) s += coef_[i] * std::pow((y - centers_[i]).norm(), 3);
    for (Eigen::Index k = 0; k < y.size(); ++k) s += coef_[n + 1 + k] * y[k];
    return s;
  }

 private:
  std::vector<Eigen::VectorXd> centers_;
  Eigen::VectorXd coef_;
};

}  // namespace detail

/// Stochastic RBF surrogate search that MAXIMIZES `objective` over `box`.
/// `prior` evaluations (e.g. from an earlier, shorter run on the same
/// objective) count toward the budget and replace the initial design.
inline RbfResult stochastic_rbf_optimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                                         const Box& box, const RbfOptions& opt,
                                         const std::vector<Evaluation>& prior = {}) {
  const auto d = box.dims();
  if (d < 1 || box.upper.size() != d || !((box.upper.array() > box.lower.array()).all()))
    throw ValidationError("optimizer box must have positive width in every dimension");
  if (prior.empty() && opt.budget < opt.design_size)
    throw ValidationError("budget must be at least the initial design size");

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::VectorXd width = box.width();
  auto to_box = [&](const Eigen::VectorXd& u) -> Eigen::VectorXd {
    Eigen::VectorXd x = box.lower + (u.array() * width.array()).matrix();
    return x.cwiseMax(box.lower).cwiseMin(box.upper);
  };
  auto to_unit = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return ((x - box.lower).array() / width.array()).matrix();
  };

  RbfResult res;
  std::vector<Eigen::VectorXd> unit;
  std::vector<double> values;
  auto record = [&](const Eigen::VectorXd& x, double v) {
    if (!std::isfinite(v)) v = -std::numeric_limits<double>::max() / 4;
    res.history.push_back({x, v});
    unit.push_back(to_unit(x));
    values.push_back(v);
    if (v > res.best_value || res.best.size() == 0) {
      res.best_value = v;
      res.best = x;
    }
    res.incumbent_trace.push_back(res.best_value);
  };

  if (!prior.empty()) {
    for (const auto& e : prior) record(e.x, e.value);
  } else {
    // Latin hypercube: one point per stratum in every dimension.
    const int n = opt.design_size;
    Eigen::MatrixXd u(n, d);
    for (Eigen::Index k = 0; k < d; ++k) {
      std::vector<int> perm(n);
      for (int i = 0; i < n; ++i) perm[i] = i;
      std::shuffle(perm.begin(), perm.end(), rng);
      for (int i = 0; i < n; ++i) u(i, k) = (perm[i] + unif(rng)) / n;
    }
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd x = to_box(u.row(i).transpose());
      record(x, objective(x));
    }
  }

  for (int iter = 0; static_cast<int>(values.size()) < opt.budget; ++iter) {
    const double sigma = opt.sigmas[static_cast<std::size_t>(iter) % opt.sigmas.size()];
    const double w = opt.surrogate_weights[static_cast<std::size_t>(iter) % opt.surrogate_weights.size()];
    const Eigen::VectorXd inc = to_unit(res.best);

    std::vector<Eigen::VectorXd> cand;
    for (int i = 0; i < opt.perturbed_candidates; ++i) {
      Eigen::VectorXd c = inc;
      for (Eigen::Index k = 0; k < d; ++k) c[k] = std::clamp(c[k] + sigma * normal(rng), 0.0, 1.0);
      cand.push_back(c);
    }
    for (int i = 0; i < opt.uniform_candidates; ++i) {
      Eigen::VectorXd c(d);
      for (Eigen::Index k = 0; k < d; ++k) c[k] = unif(rng);
      cand.push_back(c);
    }

    // Keep candidates that are not (numerically) already evaluated.
    std::vector<double> dist(cand.size());
    for (std::size_t i = 0; i < cand.size(); ++i) {
      double dm = std::numeric_limits<double>::infinity();
      for (const auto& p : unit) dm = std::min(dm, (cand[i] - p).norm());
      dist[i] = dm;
    }

    detail::CubicRbf surrogate;
    std::size_t choice = cand.size();
    if (surrogate.fit(unit, values)) {
      // Both criteria are scored by rank among the admissible candidates
      // (0 = best), so a few far-off candidates cannot flatten the scale.
      std::vector<std::size_t> ok;
      std::vector<double> s(cand.size());
      for (std::size_t i = 0; i < cand.size(); ++i) {
        if (dist[i] < opt.min_separation) continue;
        s[i] = surrogate(cand[i]);
        ok.push_back(i);
      }
      if (!ok.empty()) {
        const double denom = ok.size() > 1 ? static_cast<double>(ok.size() - 1) : 1.0;
        auto ranks = [&](auto better) {
          std::vector<std::size_t> order = ok;
          std::stable_sort(order.begin(), order.end(), better);
          std::vector<double> r(cand.size(), 0.0);
          for (std::size_t k = 0; k < order.size(); ++k) r[order[k]] = static_cast<double>(k) / denom;
          return r;
        };
        const auto vr = ranks([&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
        const auto vd = ranks([&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
        double best_score = std::numeric_limits<double>::infinity();
        for (std::size_t i : ok) {
          const double score = w * vr[i] + (1.0 - w) * vd[i];
          if (score < best_score) {
            best_score = score;
            choice = i;
          }
        }
      }
    } else {
      ++res.degenerate_fits;
    }
    if (choice == cand.size()) {
      // Degenerate surrogate (or every candidate collided): uniform fallback.
      choice = static_cast<std::size_t>(opt.perturbed_candidates);
      if (choice >= cand.size()) {
        Eigen::VectorXd c(d);
        for (Eigen::Index k = 0; k < d; ++k) c[k] = unif(rng);
        cand.push_back(c);
        choice = cand.size() - 1;
      }
    }
    const Eigen::VectorXd x = to_box(cand[choice]);
    record(x, objective(x));
  }
  return res;
}

}  // namespace warpfield

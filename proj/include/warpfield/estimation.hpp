#pragma once

#include "warpfield/density.hpp"
#include "warpfield/optimizer.hpp"
#include "warpfield/partition.hpp"

#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>

namespace warpfield {

struct WarpParams {
  double alpha = 0.15;  // H = alpha * H_pi
  double lambda = 1.0;  // deformation
};

struct ParamBounds {
  double alpha_min = 0.01, alpha_max = 1.0;
  double lambda_min = 0.0, lambda_max = 8.0;

  bool contains(const WarpParams& p) const {
    return p.alpha >= alpha_min && p.alpha <= alpha_max && p.lambda >= lambda_min && p.lambda <= lambda_max;
  }
  Box box() const {
    Box b{Eigen::VectorXd(2), Eigen::VectorXd(2)};
    b.lower << alpha_min, lambda_min;
    b.upper << alpha_max, lambda_max;
    return b;
  }
};

struct BandwidthEstimate {
  Bandwidth bandwidth;
  bool regularized = false;
};

/// Bivariate normal-reference bandwidth, H = n^(-1/3) * sample covariance.
/// A (near-)singular covariance gets 1e-6 * trace * I added and is flagged.
inline BandwidthEstimate normal_reference_bandwidth(const std::vector<Point>& pts) {
  const std::size_t n = pts.size();
  if (n < 3) throw ValidationError("normal-reference bandwidth needs at least 3 points");
  Point mean = Point::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& p : pts) {
    const Point d = p - mean;
    sxx += d.x() * d.x();
    sxy += d.x() * d.y();
    syy += d.y() * d.y();
  }
  const double denom = static_cast<double>(n - 1);
  Eigen::Matrix2d cov;
  cov << sxx / denom, sxy / denom, sxy / denom, syy / denom;
  BandwidthEstimate out;
  const double trace = cov.trace();
  const double det = cov.determinant();
  if (!(det > 1e-10 * 0.25 * trace * trace)) {
    cov.diagonal().array() += trace > 0 ? 1e-6 * trace : 1e-6;
    out.regularized = true;
  }
  out.bandwidth = Bandwidth(std::pow(static_cast<double>(n), -1.0 / 3.0) * cov);
  return out;
}

struct FitConfig {
  int weeks = 8;                // M
  std::size_t cloud_size = 1000;
  KnnOptions knn{};
  double fine_cell_km = 0.25;
  double count_cell_km = 1.0;
  int folds = 5;
  ParamBounds bounds{};
  int budget = 100;             // objective evaluations per component
  int search_budget = 30;       // per component while searching the cluster count
  int design_size = 8;
  WarpParams fallback{0.15, 1.0};
  double crop_margin_std = 4.0;
  std::uint64_t seed = 20240601;
  unsigned threads = 0;
};

/// Fold per labeled event: events are grouped by source week, shuffled
/// within the week, and dealt round-robin so folds stay balanced across weeks.
inline std::vector<int> make_folds(const std::vector<Event>& labeled, int folds, std::uint64_t seed) {
  std::vector<int> fold(labeled.size(), 0);
  std::map<long, std::vector<std::size_t>> by_week;
  for (std::size_t i = 0; i < labeled.size(); ++i) by_week[(labeled[i].period - 1) / kWeekLength].push_back(i);
  std::mt19937_64 rng(seed);
  int next = 0;
  for (auto& [week, idx] : by_week) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (auto i : idx) fold[i] = next++ % folds;
  }
  return fold;
}

/// Fine grid restricted to `lo..hi` plus margin, snapped to the cells of
/// `global` and clipped to it.
inline GridSpec crop_grid(const GridSpec& global, Point lo, Point hi, double margin) {
  lo -= Point(margin, margin);
  hi += Point(margin, margin);
  const int c0 = std::clamp(static_cast<int>(std::floor((lo.x() - global.origin.x()) / global.cell)), 0, global.width - 1);
  const int r0 = std::clamp(static_cast<int>(std::floor((lo.y() - global.origin.y()) / global.cell)), 0, global.height - 1);
  const int c1 = std::clamp(static_cast<int>(std::floor((hi.x() - global.origin.x()) / global.cell)), 0, global.width - 1);
  const int r1 = std::clamp(static_cast<int>(std::floor((hi.y() - global.origin.y()) / global.cell)), 0, global.height - 1);
  GridSpec g;
  g.origin = global.origin + Point(c0 * global.cell, r0 * global.cell);
  g.cell = global.cell;
  g.width = c1 - c0 + 1;
  g.height = r1 - r0 + 1;
  return g;
}

/// Five-fold cross-validated log-likelihood of one component's labeled data
/// as a function of (alpha, lambda). Cloud, graph, folds and H_pi are fixed
/// at construction so every evaluation sees the same problem.
class CvProblem {
 public:
  CvProblem(const std::vector<Event>& labeled, const std::vector<Event>& past, const GridSpec& global,
            const FitConfig& config, std::uint64_t seed)
      : config_(config), global_(global) {
    if (labeled.size() < kMinClusterSize)
      throw ValidationError("cross-validation needs at least 15 labeled points");
    if (past.empty()) throw ValidationError("cross-validation needs past-window events for the cloud");
    points_ = locations(labeled);
    fold_ = make_folds(labeled, config.folds, derive_seed(seed, 1));
    hpi_ = normal_reference_bandwidth(points_);
    cloud_ = sample_point_cloud(past, config.cloud_size, derive_seed(seed, 2));
    const auto graph = cloud_.size() >= 2 ? build_knn_graph(cloud_, config.knn)
                                          : empty_graph(static_cast<int>(cloud_.size()));
    laplacian_ = build_laplacian(graph);
    std::vector<Point> all = points_;
    all.insert(all.end(), cloud_.points.begin(), cloud_.points.end());
    std::tie(lo_, hi_) = bounding_box(all);
    train_.resize(config.folds);
    held_.resize(config.folds);
    for (std::size_t i = 0; i < points_.size(); ++i)
      for (int f = 0; f < config.folds; ++f) (fold_[i] == f ? held_ : train_)[f].push_back(static_cast<int>(i));
    for (int f = 0; f < config.folds; ++f)
      if (train_[f].empty() || held_[f].empty()) throw ValidationError("empty cross-validation fold");
  }

  const Bandwidth& plugin_bandwidth() const { return hpi_.bandwidth; }
  bool plugin_regularized() const { return hpi_.regularized; }
  const PointCloud& cloud() const { return cloud_; }
  const Laplacian& laplacian() const { return laplacian_; }
  const std::vector<int>& folds() const { return fold_; }

  GridSpec grid_for(const Bandwidth& h) const {
    return crop_grid(global_, lo_, hi_, config_.crop_margin_std * h.max_std());
  }

  /// Mean over folds of the mean held-out log density.
  double evaluate(const WarpParams& p) const {
    const Bandwidth h = hpi_.bandwidth.scaled(p.alpha);
    const GridSpec grid = grid_for(h);
    const int nf = config_.folds;
    const auto cells = static_cast<Eigen::Index>(grid.cells());

    Eigen::MatrixXd cloud_term;
    if (p.lambda > 0 && laplacian_.matrix.nonZeros() > 0) {
      const Eigen::MatrixXd kc = kernel_matrix(points_, cloud_.points, h);
      Eigen::MatrixXd kbar(kc.cols(), nf);
      for (int f = 0; f < nf; ++f) {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(kc.cols());
        for (int i : train_[f]) s += kc.row(i).transpose();
        kbar.col(f) = s / static_cast<double>(train_[f].size());
      }
      Eigen::MatrixXd v;
      try {
        WarpFactor factor(laplacian_, gram_matrix(cloud_.points, h), p.lambda);
        v = factor.apply(kbar);
      } catch (const NumericalError&) {
        return std::log(kLogFloor);
      }
      cloud_term = Eigen::MatrixXd::Zero(cells, nf);
      accumulate_kernels(grid, cloud_.points, v, h, cloud_term);
    }

    // Column f holds the training-fold KDE; points outside the fold carry
    // weight 0 and are skipped, so each column matches kde_raw on its fold.
    Eigen::MatrixXd fold_w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(points_.size()), nf);
    for (int f = 0; f < nf; ++f)
      for (int i : train_[f]) fold_w(i, f) = 1.0 / static_cast<double>(train_[f].size());
    Eigen::MatrixXd kde = Eigen::MatrixXd::Zero(cells, nf);
    accumulate_kernels(grid, points_, fold_w, h, kde);

    double total = 0;
    for (int f = 0; f < nf; ++f) {
      std::vector<double> raw(kde.col(f).data(), kde.col(f).data() + cells);
      if (cloud_term.size() > 0)
        for (Eigen::Index i = 0; i < cells; ++i) raw[static_cast<std::size_t>(i)] -= cloud_term(i, f);
      total += held_out_score(grid, std::move(raw), f);
    }
    return total / nf;
  }

  /// Same folds and bandwidth with an unwarped KDE.
  double evaluate_unwarped(double alpha) const {
    const Bandwidth h = hpi_.bandwidth.scaled(alpha);
    const GridSpec grid = grid_for(h);
    double total = 0;
    for (int f = 0; f < config_.folds; ++f) total += held_out_score(grid, kde_raw(subset(train_[f]), h, grid), f);
    return total / config_.folds;
  }

 private:
  std::vector<Point> subset(const std::vector<int>& idx) const {
    std::vector<Point> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(points_[i]);
    return out;
  }

  double held_out_score(const GridSpec& grid, std::vector<double> raw, int f) const {
    double sum = 0;
    try {
      const auto r = clamp_normalize(grid, std::move(raw));
      for (double v : log_density_at(r, subset(held_[f])).values) sum += v;
    } catch (const DegenerateDensity&) {
      sum = std::log(kLogFloor) * static_cast<double>(held_[f].size());
    }
    return sum / static_cast<double>(held_[f].size());
  }

  FitConfig config_;
  GridSpec global_;
  std::vector<Point> points_;
  std::vector<int> fold_;
  std::vector<std::vector<int>> train_, held_;
  BandwidthEstimate hpi_;
  PointCloud cloud_;
  Laplacian laplacian_;
  Point lo_, hi_;
};

/// Grid covering the events at `cell` resolution (for standalone CV use).
inline GridSpec grid_for_events(const std::vector<Event>& events, double cell) {
  auto [lo, hi] = bounding_box(locations(events));
  return grid_covering(lo, hi, cell);
}

inline double cv_objective(const std::vector<Event>& labeled, const std::vector<Event>& past, const WarpParams& params,
                           std::uint64_t seed, const FitConfig& config = {}) {
  std::vector<Event> all = labeled;
  all.insert(all.end(), past.begin(), past.end());
  CvProblem problem(labeled, past, grid_for_events(all, config.fine_cell_km), config, seed);
  return problem.evaluate(params);
}

/// Runs the surrogate optimizer on one component's CV objective.
inline RbfResult optimize_component(const CvProblem& problem, const FitConfig& config, int budget,
                                    std::uint64_t seed, const std::vector<Evaluation>& prior = {}) {
  RbfOptions opt;
  opt.budget = budget;
  opt.design_size = config.design_size;
  opt.seed = seed;
  return stochastic_rbf_optimize(
      [&](const Eigen::VectorXd& x) { return problem.evaluate({x[0], x[1]}); }, config.bounds.box(), opt, prior);
}

// ---------------------------------------------------------------------------
// Weekly cycle

struct ComponentPlan {
  Point centroid = Point::Zero();
  WarpParams params;
  std::uint64_t cloud_seed = 0;
  Eigen::Matrix2d plugin = Eigen::Matrix2d::Identity();  // H_pi snapshot at fit time
  std::size_t labeled_count = 0;
  double cv_value = 0;
  bool flagged = false;
};

struct PeriodPlan {
  int slot = 0;
  std::vector<ComponentPlan> components;
  bool fallback = false;
  int search_evaluations = 0;

  int k() const { return static_cast<int>(components.size()); }
  std::vector<Point> centroids() const {
    std::vector<Point> c;
    for (const auto& comp : components) c.push_back(comp.centroid);
    return c;
  }
};

struct WeeklyCycle {
  int weeks = 8;
  std::size_t cloud_size = 1000;
  int neighbors = 5;
  WeightMode weight_mode = WeightMode::binary;
  std::vector<PeriodPlan> slots;  // indexed by period mod 168
};

inline int slot_of(long period) { return static_cast<int>(period % kWeekLength); }

/// Fine and count grids sharing an origin; the fine grid refines each count
/// cell into (count / fine)^2 sub-cells.
struct EvalGrids {
  GridSpec counts;
  GridSpec fine;
};

inline EvalGrids evaluation_grids(const std::vector<Event>& events, double count_cell, double fine_cell) {
  if (events.empty()) throw ValidationError("evaluation grid needs events");
  const double ratio = count_cell / fine_cell;
  const int factor = static_cast<int>(std::lround(ratio));
  if (factor < 1 || std::abs(ratio - factor) > 1e-9) throw ValidationError("fine resolution must divide the count resolution");
  auto [lo, hi] = bounding_box(locations(events));
  EvalGrids g;
  g.counts = grid_covering(lo, hi, count_cell);
  g.fine = g.counts.refined(factor);
  return g;
}

namespace detail {

inline std::vector<std::vector<Event>> split_by_label(const std::vector<Event>& events, const std::vector<int>& labels,
                                                      int k) {
  std::vector<std::vector<Event>> out(k);
  for (std::size_t i = 0; i < events.size(); ++i) out[labels[i]].push_back(events[i]);
  return out;
}

struct ComponentFit {
  std::unique_ptr<CvProblem> problem;
  RbfResult result;
  std::size_t count = 0;
};

}  // namespace detail

/// Fits the plan for one hour slot using the labeled set of target period u.
inline PeriodPlan fit_slot(const EventStore& store, long u, const GridSpec& fine, const FitConfig& config) {
  PeriodPlan plan;
  plan.slot = slot_of(u);
  const auto labeled = labeled_set(store, u, config.weeks);
  const auto past = past_window(store, u, config.weeks);
  const auto slot_seed = derive_seed(config.seed, plan.slot);

  if (labeled.size() < kMinClusterSize || past.size() < 3) {
    ComponentPlan c;
    c.params = config.fallback;
    c.flagged = true;
    c.labeled_count = labeled.size();
    c.cloud_seed = derive_seed(slot_seed, 0, 0);
    const auto pts = locations(labeled.size() >= 3 ? labeled : past);
    if (!pts.empty()) {
      for (const auto& p : pts) c.centroid += p;
      c.centroid /= static_cast<double>(pts.size());
    } else {
      c.centroid = fine.center(fine.width / 2, fine.height / 2);
    }
    if (pts.size() >= 3) c.plugin = normal_reference_bandwidth(pts).bandwidth.matrix();
    plan.components.push_back(c);
    plan.fallback = true;
    return plan;
  }

  const auto labeled_pts = locations(labeled);
  const auto past_pts = locations(past);
  const int search_budget = config.search_budget > 0 ? std::min(config.search_budget, config.budget) : config.budget;
  std::map<int, std::vector<detail::ComponentFit>> fits;

  auto validate = [&](const Clustering& c) {
    const auto lab_parts = detail::split_by_label(labeled, c.labels, c.k);
    const auto past_parts = detail::split_by_label(past, assign_to_components(c, past_pts), c.k);
    std::vector<detail::ComponentFit> comps(c.k);
    double value = 0;
    const double n = static_cast<double>(labeled.size());
    for (int j = 0; j < c.k; ++j) {
      auto& fit = comps[j];
      fit.count = lab_parts[j].size();
      const auto seed = derive_seed(slot_seed, c.k, j);
      // Labeled events are part of the past window, so every part has a cloud.
      fit.problem = std::make_unique<CvProblem>(lab_parts[j], past_parts[j], fine, config, seed);
      fit.result = optimize_component(*fit.problem, config, search_budget, derive_seed(seed, 3));
      const double w = static_cast<double>(fit.count) / n;
      value += w * (fit.result.best_value + std::log(w));
    }
    fits[c.k] = std::move(comps);
    return value;
  };

  const auto search = search_cluster_count(labeled_pts, validate, warm_start_clusters(labeled.size()), slot_seed);
  plan.search_evaluations = search.evaluations;
  const auto& clustering = search.clustering;
  if (fits.find(clustering.k) == fits.end()) validate(clustering);  // k forced to 1 without a search
  auto& comps = fits.at(clustering.k);

  for (int j = 0; j < clustering.k; ++j) {
    auto& fit = comps[j];
    const auto seed = derive_seed(slot_seed, clustering.k, j);
    if (static_cast<int>(fit.result.history.size()) < config.budget)
      fit.result = optimize_component(*fit.problem, config, config.budget, derive_seed(seed, 4), fit.result.history);
    ComponentPlan cp;
    cp.centroid = clustering.centroids[j];
    cp.params = {fit.result.best[0], fit.result.best[1]};
    cp.cloud_seed = derive_seed(seed, 2);
    cp.plugin = fit.problem->plugin_bandwidth().matrix();
    cp.labeled_count = fit.count;
    cp.cv_value = fit.result.best_value;
    cp.flagged = fit.problem->plugin_regularized() || fit.result.degenerate_fits > 0;
    plan.components.push_back(cp);
  }
  return plan;
}

/// Fits all 168 slot plans on the window [from, to], which must span at
/// least M + 1 weeks. Slot h is fitted on the target period in the window's
/// last week whose slot is h.
inline WeeklyCycle fit_weekly_cycle(const EventStore& store, long from, long to, const FitConfig& config) {
  if (from < 1 || to - from + 1 < static_cast<long>(kWeekLength) * (config.weeks + 1))
    throw InsufficientHistory("fit window must span at least M + 1 weeks");
  const auto window = store.range(from, to);
  if (window.empty()) throw ValidationError("fit window contains no events");
  const auto grids = evaluation_grids(window, config.count_cell_km, config.fine_cell_km);

  WeeklyCycle cycle;
  cycle.weeks = config.weeks;
  cycle.cloud_size = config.cloud_size;
  cycle.neighbors = config.knn.neighbors;
  cycle.weight_mode = config.knn.mode;
  cycle.slots.resize(kWeekLength);

  const long base = from + static_cast<long>(kWeekLength) * config.weeks;
  FitConfig inner = config;
  inner.knn.threads = 1;
  parallel_for(kWeekLength, config.threads, [&](std::size_t h) {
    const long u = base + ((static_cast<long>(h) - base) % kWeekLength + kWeekLength) % kWeekLength;
    cycle.slots[h] = fit_slot(store, u, grids.fine, inner);
  });
  return cycle;
}

// ---------------------------------------------------------------------------
// Prediction

struct Prediction {
  DensityRaster raster;
  std::vector<double> weights;  // blend weight per component
  bool flagged = false;
};

/// Raster for period u: per component, warped KDE of its labeled points on a
/// cloud drawn from its share of the past window; components blended by
/// labeled counts and renormalized.
inline Prediction predict_period(const EventStore& store, long u, const WeeklyCycle& cycle, const GridSpec& fine,
                                 unsigned threads = 1) {
  if (cycle.slots.size() != static_cast<std::size_t>(kWeekLength)) throw ValidationError("weekly cycle must have 168 slots");
  const auto& plan = cycle.slots[slot_of(u)];
  const auto labeled = labeled_set(store, u, cycle.weeks);
  const auto past = past_window(store, u, cycle.weeks);
  Prediction out;
  if (labeled.empty()) {
    out.raster = uniform_raster(fine);
    out.flagged = true;
    return out;
  }
  const int k = plan.k();
  const auto centroids = plan.centroids();
  const auto lab_parts = detail::split_by_label(labeled, assign_to_components(centroids, locations(labeled)), k);
  const auto past_parts = detail::split_by_label(past, assign_to_components(centroids, locations(past)), k);

  KnnOptions knn;
  knn.neighbors = cycle.neighbors;
  knn.mode = cycle.weight_mode;
  knn.threads = threads;

  std::vector<double> blend(fine.cells(), 0.0);
  out.weights.assign(k, 0.0);
  const double n = static_cast<double>(labeled.size());
  for (int j = 0; j < k; ++j) {
    const auto& lab = lab_parts[j];
    if (lab.empty()) continue;
    const auto& comp = plan.components[j];
    const auto pts = locations(lab);
    Bandwidth hpi(comp.plugin);
    if (pts.size() >= 3) {
      auto est = normal_reference_bandwidth(pts);
      hpi = est.bandwidth;
      out.flagged |= est.regularized;
    }
    const Bandwidth h = hpi.scaled(comp.params.alpha);
    const auto cloud = sample_point_cloud(past_parts[j].empty() ? lab : past_parts[j], cycle.cloud_size, comp.cloud_seed);
    DensityRaster r;
    try {
      r = warped_raster(pts, build_context(cloud, h, comp.params.lambda, knn), fine);
    } catch (const NumericalError&) {
      r = kde_raster(pts, h, fine);
      out.flagged = true;
    }
    const double w = static_cast<double>(lab.size()) / n;
    out.weights[j] = w;
    for (std::size_t i = 0; i < blend.size(); ++i) blend[i] += w * r.values[i];
  }
  out.raster = clamp_normalize(fine, std::move(blend));
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline void write_cycle(std::ostream& out, const WeeklyCycle& cycle) {
  using detail::fmt_double;
  out << "warpfield-cycle 1\n";
  out << "weeks " << cycle.weeks << '\n';
  out << "cloud_size " << cycle.cloud_size << '\n';
  out << "neighbors " << cycle.neighbors << '\n';
  out << "weight_mode " << (cycle.weight_mode == WeightMode::binary ? "binary" : "heat") << '\n';
  out << "slots " << cycle.slots.size() << '\n';
  for (const auto& s : cycle.slots) {
    out << "slot " << s.slot << " k " << s.k() << " fallback " << (s.fallback ? 1 : 0) << " evaluations "
        << s.search_evaluations << '\n';
    for (const auto& c : s.components) {
      out << "component " << fmt_double(c.centroid.x()) << ' ' << fmt_double(c.centroid.y()) << ' '
          << fmt_double(c.params.alpha) << ' ' << fmt_double(c.params.lambda) << ' ' << c.cloud_seed << ' '
          << fmt_double(c.plugin(0, 0)) << ' ' << fmt_double(c.plugin(0, 1)) << ' ' << fmt_double(c.plugin(1, 1))
          << ' ' << c.labeled_count << ' ' << fmt_double(c.cv_value) << ' ' << (c.flagged ? 1 : 0) << '\n';
    }
  }
}

inline WeeklyCycle read_cycle(std::istream& in) {
  WeeklyCycle cycle;
  std::string line;
  long lineno = 0;
  auto next = [&](const char* what) -> std::istringstream {
    if (!std::getline(in, line)) throw ParseError(std::string("unexpected end of cycle file, expected ") + what, lineno + 1);
    ++lineno;
    return std::istringstream(line);
  };
  auto expect = [&](std::istringstream& ss, const char* key) {
    std::string k;
    if (!(ss >> k) || k != key) throw ParseError(std::string("expected '") + key + "'", lineno);
  };
  {
    auto ss = next("header");
    std::string magic;
    int version = 0;
    if (!(ss >> magic >> version) || magic != "warpfield-cycle" || version != 1)
      throw ParseError("not a version-1 warpfield cycle file", lineno);
  }
  std::size_t nslots = 0;
  std::string mode;
  {
    auto ss = next("weeks");
    expect(ss, "weeks");
    if (!(ss >> cycle.weeks) || cycle.weeks < 1) throw ParseError("bad weeks", lineno);
  }
  {
    auto ss = next("cloud_size");
    expect(ss, "cloud_size");
    if (!(ss >> cycle.cloud_size) || cycle.cloud_size < 1) throw ParseError("bad cloud_size", lineno);
  }
  {
    auto ss = next("neighbors");
    expect(ss, "neighbors");
    if (!(ss >> cycle.neighbors) || cycle.neighbors < 1) throw ParseError("bad neighbors", lineno);
  }
  {
    auto ss = next("weight_mode");
    expect(ss, "weight_mode");
    if (!(ss >> mode) || (mode != "binary" && mode != "heat")) throw ParseError("bad weight_mode", lineno);
    cycle.weight_mode = mode == "binary" ? WeightMode::binary : WeightMode::heat;
  }
  {
    auto ss = next("slots");
    expect(ss, "slots");
    if (!(ss >> nslots) || nslots != static_cast<std::size_t>(kWeekLength)) throw ParseError("cycle must have 168 slots", lineno);
  }
  cycle.slots.resize(nslots);
  for (std::size_t s = 0; s < nslots; ++s) {
    auto ss = next("slot");
    auto& plan = cycle.slots[s];
    int k = 0, fallback = 0;
    expect(ss, "slot");
    ss >> plan.slot;
    expect(ss, "k");
    ss >> k;
    expect(ss, "fallback");
    ss >> fallback;
    expect(ss, "evaluations");
    if (!(ss >> plan.search_evaluations) || plan.slot != static_cast<int>(s) || k < 1 || k > kMaxClusters)
      throw ParseError("bad slot line", lineno);
    plan.fallback = fallback != 0;
    for (int j = 0; j < k; ++j) {
      auto cs = next("component");
      expect(cs, "component");
      ComponentPlan c;
      double cx = 0, cy = 0, h11 = 0, h12 = 0, h22 = 0;
      int flagged = 0;
      if (!(cs >> cx >> cy >> c.params.alpha >> c.params.lambda >> c.cloud_seed >> h11 >> h12 >> h22 >> c.labeled_count >>
            c.cv_value >> flagged))
        throw ParseError("bad component line", lineno);
      c.centroid = Point(cx, cy);
      c.plugin << h11, h12, h12, h22;
      c.flagged = flagged != 0;
      plan.components.push_back(c);
    }
  }
  return cycle;
}

inline void save_cycle(const std::string& path, const WeeklyCycle& cycle) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  write_cycle(out, cycle);
}

inline WeeklyCycle load_cycle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  return read_cycle(in);
}

}  // namespace warpfield

#pragma once
// Soft-margin linear SVM: minimize 1/2|w|^2 + C * sum hinge(y_i (w.x_i + b))
// with an unregularized bias. Solved in the dual by two-coordinate ascent
// (maximal-violating-pair selection with a second-order choice of the
// partner), which honors the equality constraint sum(alpha_i y_i) = 0 that a
// free bias induces. Linear kernel rows are computed on demand and kept in an
// LRU cache. The solve is deterministic: a pure function of the problem and
// configuration; the seed parameter is reserved.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <list>
#include <unordered_map>
#include <vector>

#include "enn/common.hpp"
#include "enn/model.hpp"

namespace enn {

struct SvmProblem {
  Matrix positives;
  Matrix negatives;
  double cost = 1.0;
  // Optional restriction of active features; masked-out features keep weight 0.
  std::vector<std::uint8_t> feature_mask;
};

struct SvmSolution {
  Hyperplane hyperplane;  // margin = 1/|w|; support indices in stacked order
  double objective = 0.0;
  double train_error = 0.0;
  bool converged = false;
  std::uint64_t iterations = 0;
};

struct SvmConfig {
  double gap_tolerance = 1e-6;   // relative duality gap at which to stop
  std::uint64_t max_updates = 0; // 0 -> 10 * n * d pair updates
  double support_slack = 1e-6;   // functional margin <= 1 + slack => support
  std::size_t cache_bytes = 256ull << 20;
  // Optional warm start: a dual-feasible alpha for the same samples (used by
  // pruning refits, where only the feature set shrinks).
  const std::vector<double>* warm_alpha = nullptr;
};

namespace detail {

class KernelRowCache {
 public:
  KernelRowCache(const Matrix& x, std::size_t max_rows)
      : x_(x), max_rows_(std::max<std::size_t>(2, max_rows)) {}

  std::span<const double> row(std::size_t i) {
    auto it = slots_.find(i);
    if (it != slots_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second.lru_it);
      return {storage_.data() + it->second.offset * x_.rows(), x_.rows()};
    }
    std::size_t offset;
    if (slots_.size() < max_rows_) {
      offset = slots_.size();
      if (storage_.size() < (offset + 1) * x_.rows())
        storage_.resize((offset + 1) * x_.rows());
    } else {
      std::size_t victim = lru_.back();
      lru_.pop_back();
      offset = slots_[victim].offset;
      slots_.erase(victim);
    }
    lru_.push_front(i);
    slots_[i] = {offset, lru_.begin()};
    double* out = storage_.data() + offset * x_.rows();
    auto xi = x_.row(i);
    for (std::size_t t = 0; t < x_.rows(); ++t) out[t] = dot(xi, x_.row(t));
    return {out, x_.rows()};
  }

 private:
  struct Slot {
    std::size_t offset;
    std::list<std::size_t>::iterator lru_it;
  };
  const Matrix& x_;
  std::size_t max_rows_;
  std::vector<double> storage_;
  std::unordered_map<std::size_t, Slot> slots_;
  std::list<std::size_t> lru_;
};

// Exact minimizer over b of C * sum hinge(y_i (s_i + b)) for fixed scores s.
// The hinge sum is piecewise linear in b; scan breakpoints by slope.
inline double best_bias(const std::vector<double>& score,
                        const std::vector<double>& y, double cost) {
  std::size_t n = score.size();
  // Term t active iff y_t * b < 1 - y_t * s_t, i.e. b < beta (y=+1) or
  // b > beta (y=-1) with beta = y_t - s_t. Slope of active terms: -C for
  // y=+1, +C for y=-1.
  std::vector<std::pair<double, int>> events(n);
  std::size_t n_pos = 0;
  for (std::size_t t = 0; t < n; ++t) {
    events[t] = {y[t] - score[t], y[t] > 0 ? +1 : -1};
    if (y[t] > 0) ++n_pos;
  }
  std::sort(events.begin(), events.end());
  // Walking b upward: slope starts at -C*n_pos; crossing a (+1) event adds C
  // (a positive hinge deactivates), crossing a (-1) event adds C as well
  // (a negative hinge activates).
  double slope = -cost * static_cast<double>(n_pos);
  if (slope >= 0.0) return events.empty() ? 0.0 : events.front().first;
  for (std::size_t k = 0; k < events.size(); ++k) {
    slope += cost;
    if (slope >= 0.0) return events[k].first;
  }
  return events.back().first;
}

}  // namespace detail

// Primal objective at a given (w, b).
inline double svm_primal_objective(const Matrix& x, const std::vector<double>& y,
                                   double cost, std::span<const double> w, double b) {
  double obj = 0.5 * squared_norm(w);
  for (std::size_t t = 0; t < x.rows(); ++t) {
    double m = y[t] * (dot(w, x.row(t)) + b);
    if (m < 1.0) obj += cost * (1.0 - m);
  }
  return obj;
}

inline SvmSolution train_svm(const SvmProblem& problem, std::uint64_t /*seed*/,
                             const SvmConfig& cfg = {}) {
  require(problem.positives.rows() > 0 && problem.negatives.rows() > 0,
          "train_svm: positives and negatives must be nonempty");
  require(problem.positives.cols() == problem.negatives.cols(),
          "train_svm: feature dimension mismatch");
  require(problem.cost > 0.0, "train_svm: cost must be positive");
  require(all_finite(problem.positives.data()) && all_finite(problem.negatives.data()),
          "train_svm: non-finite feature values");

  const std::size_t full_dim = problem.positives.cols();
  std::vector<std::size_t> active_features;
  if (!problem.feature_mask.empty()) {
    require(problem.feature_mask.size() == full_dim,
            "train_svm: feature mask length mismatch");
    for (std::size_t f = 0; f < full_dim; ++f)
      if (problem.feature_mask[f]) active_features.push_back(f);
    require(!active_features.empty(), "train_svm: all features masked");
  }

  const std::size_t np = problem.positives.rows();
  const std::size_t nn = problem.negatives.rows();
  const std::size_t n = np + nn;
  Matrix x(n, active_features.empty() ? full_dim : active_features.size());
  for (std::size_t r = 0; r < np; ++r) {
    auto src = problem.positives.row(r);
    auto dst = x.row(r);
    if (active_features.empty())
      std::copy(src.begin(), src.end(), dst.begin());
    else
      for (std::size_t j = 0; j < active_features.size(); ++j) dst[j] = src[active_features[j]];
  }
  for (std::size_t r = 0; r < nn; ++r) {
    auto src = problem.negatives.row(r);
    auto dst = x.row(np + r);
    if (active_features.empty())
      std::copy(src.begin(), src.end(), dst.begin());
    else
      for (std::size_t j = 0; j < active_features.size(); ++j) dst[j] = src[active_features[j]];
  }
  std::vector<double> y(n);
  for (std::size_t t = 0; t < n; ++t) y[t] = t < np ? 1.0 : -1.0;

  const double c = problem.cost;
  const std::size_t d = x.cols();
  std::uint64_t max_updates = cfg.max_updates;
  if (max_updates == 0) {
    max_updates = 10ull * n * std::max<std::uint64_t>(1, d);
    max_updates = std::max<std::uint64_t>(max_updates, 1000);
  }

  std::vector<double> alpha(n, 0.0), g(n, -1.0), w(d, 0.0), diag(n);
  for (std::size_t t = 0; t < n; ++t) diag[t] = squared_norm(x.row(t));
  detail::KernelRowCache cache(x, std::max<std::size_t>(64, cfg.cache_bytes / (8 * n)));

  const double bound_tol = 1e-12 * std::max(1.0, c);
  auto in_up = [&](std::size_t t) {
    return (y[t] > 0 && alpha[t] < c - bound_tol) || (y[t] < 0 && alpha[t] > bound_tol);
  };
  auto in_low = [&](std::size_t t) {
    return (y[t] < 0 && alpha[t] < c - bound_tol) || (y[t] > 0 && alpha[t] > bound_tol);
  };

  SvmSolution sol;
  double eps_kkt = 1e-3;
  std::uint64_t iterations = 0;
  bool converged = false;

  while (iterations < max_updates) {
    // Maximal violating pair: i from I_up, then second-order j from I_low.
    std::size_t i = n;
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t)
      if (in_up(t) && -y[t] * g[t] > m) {
        m = -y[t] * g[t];
        i = t;
      }
    double big_m = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t)
      if (in_low(t)) big_m = std::min(big_m, -y[t] * g[t]);

    if (i == n || m - big_m <= eps_kkt) {
      // KKT satisfied at the current ladder step; verify the duality gap.
      std::vector<double> score(n);
      for (std::size_t t = 0; t < n; ++t) score[t] = dot(w, x.row(t));
      double b_opt = detail::best_bias(score, y, c);
      double primal = 0.5 * squared_norm(w);
      for (std::size_t t = 0; t < n; ++t) {
        double mm = y[t] * (score[t] + b_opt);
        if (mm < 1.0) primal += c * (1.0 - mm);
      }
      double dual = 0.0;
      for (std::size_t t = 0; t < n; ++t) dual += alpha[t];
      dual -= 0.5 * squared_norm(w);
      double gap = primal - dual;
      if (gap <= cfg.gap_tolerance * std::max(1.0, std::abs(primal)) ||
          eps_kkt <= 1e-14) {
        converged = gap <= cfg.gap_tolerance * std::max(1.0, std::abs(primal));
        break;
      }
      eps_kkt = std::max(eps_kkt / 10.0, 1e-14);
      continue;
    }

    auto ki = cache.row(i);
    std::size_t j = n;
    double best = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      double mt = -y[t] * g[t];
      if (mt >= m) continue;
      double bq = m - mt;
      double a = diag[i] + diag[t] - 2.0 * ki[t];
      if (a <= 0.0) a = 1e-12;
      double gain = -(bq * bq) / a;
      if (gain < best) {
        best = gain;
        j = t;
      }
    }
    if (j == n) {
      // No admissible partner below m; treat as converged at this ladder step.
      eps_kkt = std::max(eps_kkt / 10.0, 1e-14);
      ++iterations;
      continue;
    }

    double a = diag[i] + diag[j] - 2.0 * ki[j];
    if (a <= 0.0) a = 1e-12;
    double delta = (m - (-y[j] * g[j])) / a;
    // Clip to the box while preserving the equality constraint.
    double lo = y[i] > 0 ? -alpha[i] : alpha[i] - c;
    double hi = y[i] > 0 ? c - alpha[i] : alpha[i];
    if (y[j] > 0) {
      lo = std::max(lo, alpha[j] - c);
      hi = std::min(hi, alpha[j]);
    } else {
      lo = std::max(lo, -alpha[j]);
      hi = std::min(hi, c - alpha[j]);
    }
    delta = std::clamp(delta, lo, hi);
    if (delta == 0.0) {
      eps_kkt = std::max(eps_kkt / 10.0, 1e-14);
      ++iterations;
      continue;
    }

    alpha[i] += y[i] * delta;
    alpha[j] -= y[j] * delta;
    auto xi = x.row(i), xj = x.row(j);
    for (std::size_t f = 0; f < d; ++f) w[f] += delta * (xi[f] - xj[f]);
    auto kj = cache.row(j);
    for (std::size_t t = 0; t < n; ++t) g[t] += y[t] * delta * (ki[t] - kj[t]);
    ++iterations;
  }

  // Bias: mean over free support vectors when any exist, otherwise the
  // midpoint of the KKT interval.
  double b;
  std::size_t n_free = 0;
  double b_sum = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > bound_tol && alpha[t] < c - bound_tol) {
      b_sum += y[t] - dot(w, x.row(t));
      ++n_free;
    }
  }
  if (n_free > 0) {
    b = b_sum / static_cast<double>(n_free);
  } else {
    // Recompute the KKT interval in case the loop ended on the update cap.
    double final_m = -std::numeric_limits<double>::infinity();
    double final_big_m = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      if (in_up(t)) final_m = std::max(final_m, -y[t] * g[t]);
      if (in_low(t)) final_big_m = std::min(final_big_m, -y[t] * g[t]);
    }
    if (!std::isfinite(final_m)) final_m = 0.0;
    if (!std::isfinite(final_big_m)) final_big_m = 0.0;
    b = -(final_m + final_big_m) / 2.0;
  }

  sol.converged = converged;
  sol.iterations = iterations;
  sol.objective = svm_primal_objective(x, y, c, w, b);
  std::size_t errors = 0;
  for (std::size_t t = 0; t < n; ++t) {
    double fm = y[t] * (dot(w, x.row(t)) + b);
    if (fm <= 0.0) ++errors;  // a point on the boundary is not classified
    if (fm <= 1.0 + cfg.support_slack) sol.hyperplane.support_indices.push_back(t);
  }
  sol.train_error = static_cast<double>(errors) / static_cast<double>(n);

  if (active_features.empty()) {
    sol.hyperplane.w = std::move(w);
  } else {
    sol.hyperplane.w.assign(full_dim, 0.0);
    for (std::size_t j2 = 0; j2 < active_features.size(); ++j2)
      sol.hyperplane.w[active_features[j2]] = w[j2];
  }
  sol.hyperplane.b = b;
  double norm = std::sqrt(squared_norm(sol.hyperplane.w));
  sol.hyperplane.margin = norm > 0.0 ? 1.0 / norm : 0.0;
  return sol;
}

// Multiplier-scaled copy of the solution's hyperplane. The recorded margin
// and support indices are carried over unchanged.
inline Hyperplane scale(const SvmSolution& sol, double multiplier) {
  require(multiplier > 0.0, "scale: multiplier must be positive");
  Hyperplane h = sol.hyperplane;
  for (double& v : h.w) v *= multiplier;
  h.b *= multiplier;
  return h;
}

// Trains `sets[target]` against the union of all other sets (stacked in set
// order). Support indices refer to the stacked positives-then-negatives order.
inline SvmSolution one_vs_all(const std::vector<Matrix>& sets, std::size_t target,
                              double cost, std::uint64_t seed, const SvmConfig& cfg = {}) {
  require(sets.size() >= 2, "one_vs_all: need at least two sets");
  require(target < sets.size(), "one_vs_all: target index out of range");
  SvmProblem p;
  p.positives = sets[target];
  p.cost = cost;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    if (s == target) continue;
    for (std::size_t r = 0; r < sets[s].rows(); ++r) p.negatives.append_row(sets[s].row(r));
  }
  return train_svm(p, seed, cfg);
}

}  // namespace enn

#pragma once
// Agglomerative Ward clustering (nearest-neighbor chain over the
// Lance-Williams recurrence, O(n^2) memory), the single-global-cutoff
// subconcept partition, and Lloyd k-means with k-means++ seeding.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "enn/common.hpp"
#include "enn/rng.hpp"

namespace enn {

struct LinkageTree {
  struct Merge {
    std::size_t a = 0, b = 0;   // cluster ids: leaves 0..n-1, merge k creates n+k
    double height = 0.0;        // ward distance at the merge
    std::size_t size = 0;       // size of the merged cluster
  };
  std::vector<Merge> merges;
  std::size_t n_leaves = 0;

  // Number of clusters when every merge with height <= h is applied.
  std::size_t clusters_at(double h) const {
    std::size_t applied = 0;
    for (const auto& m : merges)
      if (m.height <= h) ++applied;
    return n_leaves - applied;
  }
};

inline LinkageTree ward_linkage(const Matrix& x) {
  require(x.rows() >= 1, "ward_linkage: need at least one sample");
  require(all_finite(x.data()), "ward_linkage: non-finite feature values");
  const std::size_t n = x.rows();
  LinkageTree tree;
  tree.n_leaves = n;
  if (n == 1) return tree;

  // Working squared-distance matrix over cluster slots; merged clusters
  // collapse into the lower slot.
  std::vector<double> d2(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double v = squared_distance(x.row(i), x.row(j));
      d2[i * n + j] = v;
      d2[j * n + i] = v;
    }
  std::vector<std::size_t> size(n, 1);
  std::vector<bool> active(n, true);

  struct RawMerge {
    std::size_t slot_a, slot_b;
    double h2;
  };
  std::vector<RawMerge> raw;
  raw.reserve(n - 1);
  std::vector<std::size_t> chain;
  chain.reserve(n);

  while (raw.size() < n - 1) {
    if (chain.empty()) {
      for (std::size_t s = 0; s < n; ++s)
        if (active[s]) {
          chain.push_back(s);
          break;
        }
    }
    while (true) {
      std::size_t a = chain.back();
      std::size_t nearest = n;
      double best = std::numeric_limits<double>::infinity();
      // Prefer the previous chain element on ties so reciprocal pairs close.
      std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : n;
      for (std::size_t t = 0; t < n; ++t) {
        if (!active[t] || t == a) continue;
        double v = d2[a * n + t];
        if (v < best || (v == best && t == prev)) {
          best = v;
          nearest = t;
        }
      }
      if (nearest == prev) {
        chain.pop_back();
        chain.pop_back();
        raw.push_back({a, nearest, best});
        // Lance-Williams ward update into the lower slot.
        std::size_t keep = std::min(a, nearest), drop = std::max(a, nearest);
        double sa = static_cast<double>(size[a]), sb = static_cast<double>(size[nearest]);
        for (std::size_t t = 0; t < n; ++t) {
          if (!active[t] || t == a || t == nearest) continue;
          double st = static_cast<double>(size[t]);
          double v = ((sa + st) * d2[a * n + t] + (sb + st) * d2[nearest * n + t] -
                      st * best) /
                     (sa + sb + st);
          d2[keep * n + t] = v;
          d2[t * n + keep] = v;
        }
        size[keep] = size[a] + size[nearest];
        active[drop] = false;
        break;
      }
      chain.push_back(nearest);
    }
  }

  // Order merges by height (stable), then relabel slots to dendrogram ids.
  std::vector<std::size_t> order(raw.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return raw[i].h2 < raw[j].h2;
  });
  std::vector<std::size_t> slot_id(n), slot_size(n, 1);
  std::iota(slot_id.begin(), slot_id.end(), 0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const RawMerge& rm = raw[order[k]];
    std::size_t keep = std::min(rm.slot_a, rm.slot_b);
    std::size_t ida = slot_id[rm.slot_a], idb = slot_id[rm.slot_b];
    LinkageTree::Merge m;
    m.a = std::min(ida, idb);
    m.b = std::max(ida, idb);
    m.height = std::sqrt(rm.h2);
    m.size = slot_size[rm.slot_a] + slot_size[rm.slot_b];
    slot_id[keep] = n + k;
    slot_size[keep] = m.size;
    tree.merges.push_back(m);
  }
  return tree;
}

// Leaf labels after applying all merges with height <= h; labels are dense
// and ordered by each cluster's lowest member index.
inline std::vector<std::size_t> cut_tree(const LinkageTree& tree, double h) {
  const std::size_t n = tree.n_leaves;
  std::vector<std::size_t> parent(n + tree.merges.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };
  for (std::size_t k = 0; k < tree.merges.size(); ++k) {
    const auto& m = tree.merges[k];
    if (m.height <= h) {
      parent[find(m.a)] = n + k;
      parent[find(m.b)] = n + k;
    }
  }
  std::vector<std::size_t> labels(n);
  std::vector<std::size_t> root_label(n + tree.merges.size(),
                                      std::numeric_limits<std::size_t>::max());
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = find(i);
    if (root_label[r] == std::numeric_limits<std::size_t>::max()) root_label[r] = next++;
    labels[i] = root_label[r];
  }
  return labels;
}

// Dendrogram leaf order (used for neuron ordering in analyses).
inline std::vector<std::size_t> leaf_order(const LinkageTree& tree) {
  const std::size_t n = tree.n_leaves;
  if (tree.merges.empty()) {
    std::vector<std::size_t> out(n);
    std::iota(out.begin(), out.end(), 0);
    return out;
  }
  std::vector<std::vector<std::size_t>> leaves(n + tree.merges.size());
  for (std::size_t i = 0; i < n; ++i) leaves[i] = {i};
  for (std::size_t k = 0; k < tree.merges.size(); ++k) {
    auto& dst = leaves[n + k];
    dst = std::move(leaves[tree.merges[k].a]);
    auto& rhs = leaves[tree.merges[k].b];
    dst.insert(dst.end(), rhs.begin(), rhs.end());
    rhs.clear();
  }
  return leaves[n + tree.merges.size() - 1];
}

struct SubconceptPartition {
  // Per-sample (class index, local subconcept id within the class).
  std::vector<std::pair<std::size_t, std::size_t>> assignment;
  // Flat subconcept order: classes ascending, local ids ascending.
  std::vector<std::size_t> sub_class;               // flat id -> class
  std::vector<std::vector<std::size_t>> members;    // flat id -> sample ids
  Matrix means;                                     // flat id -> centroid
  double cutoff = 0.0;
  std::size_t count() const { return sub_class.size(); }

  std::size_t flat_of(std::size_t cls, std::size_t local) const {
    std::size_t f = 0;
    for (; f < sub_class.size(); ++f) {
      if (sub_class[f] == cls) return f + local;
    }
    return f;
  }
};

// Finds one height applied to every class tree so the summed cluster count
// equals target_total, or the smallest achievable count above it.
inline SubconceptPartition cut_for_total(
    const std::vector<LinkageTree>& trees,
    const std::vector<std::vector<std::size_t>>& class_sample_ids, const Matrix& x,
    std::size_t target_total) {
  require(trees.size() == class_sample_ids.size(),
          "cut_for_total: trees/classes mismatch");
  std::size_t n_classes = trees.size();
  std::size_t n_samples = 0;
  for (const auto& ids : class_sample_ids) n_samples += ids.size();
  require(target_total >= n_classes && target_total <= n_samples,
          "cut_for_total: target " + std::to_string(target_total) +
              " outside achievable range [" + std::to_string(n_classes) + ", " +
              std::to_string(n_samples) + "]");

  std::vector<double> heights;
  for (const auto& t : trees)
    for (const auto& m : t.merges) heights.push_back(m.height);
  std::sort(heights.begin(), heights.end());
  heights.erase(std::unique(heights.begin(), heights.end()), heights.end());

  auto count_at = [&](double h) {
    std::size_t c = 0;
    for (const auto& t : trees) c += t.clusters_at(h);
    return c;
  };

  // Candidates: below every merge (all singletons, h = -1) and at each
  // distinct height. count(h) is nonincreasing in h; take the smallest count
  // >= target and the largest height achieving it.
  double best_h = -1.0;
  std::size_t best_count = n_samples;
  for (double h : heights) {
    std::size_t c = count_at(h);
    if (c >= target_total && (c < best_count || (c == best_count && h > best_h))) {
      best_count = c;
      best_h = h;
    }
  }

  SubconceptPartition part;
  part.cutoff = best_h;
  part.assignment.resize(n_samples);
  for (std::size_t cls = 0; cls < n_classes; ++cls) {
    auto labels = cut_tree(trees[cls], best_h);
    std::size_t k = *std::max_element(labels.begin(), labels.end()) + 1;
    std::size_t base = part.sub_class.size();
    for (std::size_t local = 0; local < k; ++local) {
      part.sub_class.push_back(cls);
      part.members.emplace_back();
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      std::size_t sample = class_sample_ids[cls][i];
      part.assignment[sample] = {cls, labels[i]};
      part.members[base + labels[i]].push_back(sample);
    }
  }
  part.means = Matrix(part.count(), x.cols());
  for (std::size_t f = 0; f < part.count(); ++f) {
    auto mean = part.means.row(f);
    for (std::size_t id : part.members[f]) axpy(1.0, x.row(id), mean);
    for (double& v : mean) v /= static_cast<double>(part.members[f].size());
  }
  return part;
}

struct KmeansResult {
  Matrix centroids;
  std::vector<std::size_t> assignment;
  std::vector<double> inertia_history;  // one entry per Lloyd iteration
  double inertia = 0.0;
};

inline KmeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed,
                           std::size_t max_iter = 300) {
  const std::size_t n = x.rows();
  require(k >= 1 && k <= n, "kmeans: need 1 <= k <= n_samples");
  Rng rng(derive_seed(seed, "kmeans"));

  // k-means++ style seeding.
  std::vector<std::size_t> chosen;
  chosen.push_back(rng.below(n));
  std::vector<double> d2(n);
  while (chosen.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c : chosen)
        best = std::min(best, squared_distance(x.row(i), x.row(c)));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= r && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    if (pick == n) {  // duplicates everywhere: first index not yet chosen
      for (std::size_t i = 0; i < n; ++i)
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) {
          pick = i;
          break;
        }
    }
    chosen.push_back(pick);
  }

  KmeansResult res;
  res.centroids = Matrix(k, x.cols());
  for (std::size_t c = 0; c < k; ++c) {
    auto src = x.row(chosen[c]);
    std::copy(src.begin(), src.end(), res.centroids.row(c).begin());
  }
  res.assignment.assign(n, k);

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double bestd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        double v = squared_distance(x.row(i), res.centroids.row(c));
        if (v < bestd) {
          bestd = v;
          best = c;
        }
      }
      if (res.assignment[i] != best) {
        res.assignment[i] = best;
        changed = true;
      }
      inertia += bestd;
    }
    res.inertia_history.push_back(inertia);
    res.inertia = inertia;
    if (!changed) break;

    Matrix sums(k, x.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      axpy(1.0, x.row(i), sums.row(res.assignment[i]));
      ++counts[res.assignment[i]];
    }
    std::vector<bool> point_used(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        auto dst = res.centroids.row(c);
        auto src = sums.row(c);
        for (std::size_t f = 0; f < x.cols(); ++f)
          dst[f] = src[f] / static_cast<double>(counts[c]);
      } else {
        // Empty cluster: re-seed at the point farthest from its centroid.
        std::size_t far = 0;
        double fard = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (point_used[i]) continue;
          double v = squared_distance(x.row(i), res.centroids.row(res.assignment[i]));
          if (v > fard) {
            fard = v;
            far = i;
          }
        }
        point_used[far] = true;
        auto src = x.row(far);
        std::copy(src.begin(), src.end(), res.centroids.row(c).begin());
      }
    }
  }
  return res;
}

}  // namespace enn

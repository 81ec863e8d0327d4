#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "kmsdyn/projective.hpp"

namespace kmsdyn {

template <class Point>
struct Cluster {
  Point representative;
  int multiplicity = 0;
};

namespace detail {

/// Uniform grid over embedding coordinates with cell side 2 tol.  A point
/// within `tol` of a query lies in the query's cell or, per axis, the
/// neighbour on the nearer side: at most 8 cells.
class GridIndex {
 public:
  explicit GridIndex(double tol, std::size_t expected = 0) : inv_cell_(0.5 / tol) {
    if (expected) cells_.reserve(expected);
  }

  using Key = std::array<std::int64_t, 3>;

  struct Probe {
    Key key;
    std::array<std::int8_t, 3> side;  // -1 or +1: the nearer neighbour per axis
  };

  Probe key(const std::array<double, 3>& x) const {
    Probe p;
    for (int i = 0; i < 3; ++i) {
      const double s = x[i] * inv_cell_;
      const double f = std::floor(s);
      p.key[i] = static_cast<std::int64_t>(f);
      p.side[i] = s - f < 0.5 ? -1 : 1;
    }
    return p;
  }

  void insert(const Probe& p, std::size_t id) {
    if (next_.size() <= id) next_.resize(id + 1, kNone);
    auto [it, fresh] = cells_.try_emplace(p.key, id);
    if (!fresh) {
      next_[id] = it->second;
      it->second = id;
    }
  }

  template <class F>
  void for_neighbours(const Probe& p, F&& f) const {
    for (int mask = 0; mask < 8; ++mask) {
      Key k = p.key;
      for (int i = 0; i < 3; ++i)
        if (mask & (1 << i)) k[i] += p.side[i];
      auto it = cells_.find(k);
      if (it == cells_.end()) continue;
      for (std::size_t id = it->second; id != kNone; id = next_[id]) f(id);
    }
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      std::uint64_t h = 0x9e3779b97f4a7c15ull;
      for (auto v : k) {
        h ^= static_cast<std::uint64_t>(v);
        h *= 0xff51afd7ed558ccdull;
        h ^= h >> 33;
      }
      return static_cast<std::size_t>(h);
    }
  };

  double inv_cell_;
  std::unordered_map<Key, std::size_t, KeyHash> cells_;  // cell -> most recent id
  std::vector<std::size_t> next_;                        // id -> previous id in the same cell
};

}  // namespace detail

/// Greedy assignment in input order: each point joins the earliest
/// representative within `tol`, otherwise it becomes a new representative.
/// Returns, for every input point, the index of its cluster.
template <class Point>
std::vector<std::size_t> greedy_cluster_ids(std::span<const Point> points, double tol,
                                            std::vector<std::size_t>* reps_out = nullptr) {
  detail::GridIndex grid(tol, points.size());
  std::vector<std::size_t> reps;  // input index of each representative
  std::vector<std::size_t> ids(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto key = grid.key(embedding(points[i]));
    std::size_t best = reps.size();
    grid.for_neighbours(key, [&](std::size_t c) {
      if (c < best && distance(points[reps[c]], points[i]) <= tol) best = c;
    });
    if (best == reps.size()) {
      reps.push_back(i);
      grid.insert(key, best);
    }
    ids[i] = best;
  }
  if (reps_out) *reps_out = std::move(reps);
  return ids;
}

/// Groups points lying within `tol` of each other (chordal on the sphere,
/// Euclidean in the plane).  Representatives are the first member of each
/// cluster in input order and are pairwise farther apart than `tol`.
template <class Point>
std::vector<Cluster<Point>> cluster(std::span<const Point> points, double tol = kDefaultPointTol) {
  std::vector<std::size_t> reps;
  const auto ids = greedy_cluster_ids(points, tol, &reps);
  std::vector<Cluster<Point>> out;
  out.reserve(reps.size());
  for (std::size_t r : reps) out.push_back({points[r], 0});
  for (std::size_t id : ids) ++out[id].multiplicity;
  return out;
}

template <class Point>
std::vector<Cluster<Point>> cluster(const std::vector<Point>& points, double tol = kDefaultPointTol) {
  return cluster(std::span<const Point>(points), tol);
}

}  // namespace kmsdyn

namespace kmsdyn {

/// Weighted mean of nearby points; sphere points are averaged on S^2.
inline SpherePoint weighted_mean(std::span<const SpherePoint> pts, std::span<const double> w) {
  std::array<double, 3> acc{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto e = embedding(pts[i]);
    for (int k = 0; k < 3; ++k) acc[k] += w[i] * e[k];
  }
  return sphere_point_from_embedding(acc);
}

inline PlanePoint weighted_mean(std::span<const PlanePoint> pts, std::span<const double> w) {
  PlanePoint acc;
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    acc = acc + pts[i] * w[i];
    total += w[i];
  }
  return acc * (1.0 / total);
}

enum class MergeRepresentative { First, WeightedMean };

/// Sorts (point, weight) pairs by embedding coordinates, then merges points
/// within `tol`, summing weights.  The result is independent of input order.
template <class Point>
void merge_weighted(std::vector<Point>& pts, std::vector<double>& weights, double tol,
                    MergeRepresentative rep = MergeRepresentative::WeightedMean) {
  const std::size_t n = pts.size();
  if (n == 0) return;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::vector<std::array<double, 3>> keys(n);
  for (std::size_t i = 0; i < n; ++i) keys[i] = embedding(pts[i]);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (keys[a] != keys[b]) return keys[a] < keys[b];
    return weights[a] < weights[b];
  });
  std::vector<Point> sorted(n);
  std::vector<double> sw(n);
  for (std::size_t i = 0; i < n; ++i) {
    sorted[i] = pts[order[i]];
    sw[i] = weights[order[i]];
  }

  std::vector<std::size_t> reps;
  const auto ids = greedy_cluster_ids(std::span<const Point>(sorted), tol, &reps);
  const std::size_t nc = reps.size();
  std::vector<Point> out_pts(nc);
  std::vector<double> out_w(nc, 0.0);
  // members of cluster c are sorted[member[start[c] .. start[c+1])]
  std::vector<std::size_t> start(nc + 1, 0), member(n);
  for (std::size_t i = 0; i < n; ++i) {
    out_w[ids[i]] += sw[i];
    ++start[ids[i] + 1];
  }
  for (std::size_t c = 0; c < nc; ++c) start[c + 1] += start[c];
  {
    std::vector<std::size_t> fill(start.begin(), start.end() - 1);
    for (std::size_t i = 0; i < n; ++i) member[fill[ids[i]]++] = i;
  }
  std::vector<Point> mp;
  std::vector<double> mw;
  for (std::size_t c = 0; c < nc; ++c) {
    out_pts[c] = sorted[reps[c]];
    const std::size_t b = start[c], e = start[c + 1];
    if (rep == MergeRepresentative::First || e - b == 1) continue;
    bool identical = true;
    for (std::size_t k = b; k < e; ++k) identical = identical && sorted[member[k]] == sorted[member[b]];
    if (identical) continue;
    mp.clear();
    mw.clear();
    for (std::size_t k = b; k < e; ++k) {
      mp.push_back(sorted[member[k]]);
      mw.push_back(sw[member[k]]);
    }
    out_pts[c] = weighted_mean(std::span<const Point>(mp), std::span<const double>(mw));
  }
  pts = std::move(out_pts);
  weights = std::move(out_w);
}

}  // namespace kmsdyn

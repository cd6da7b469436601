#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "sam/error.hpp"
#include "sam/io.hpp"
#include "sam/matrix.hpp"

namespace sam {

//! One agglomeration step. Ids below the leaf count are samples; the i-th
//! merge creates cluster id `leaf_count + i`.
struct Merge {
  std::size_t left = 0;   // smaller child id
  std::size_t right = 0;  // larger child id
  double height = 0.0;
  std::size_t size = 0;

  friend bool operator==(const Merge&, const Merge&) = default;
};

//! Binary merge tree over n leaves, stored as its n-1 merges in order.
class Dendrogram {
 public:
  Dendrogram(std::size_t leaf_count, std::vector<Merge> merges)
      : leaf_count_(leaf_count), merges_(std::move(merges)) {
    validate();
  }

  std::size_t leaf_count() const { return leaf_count_; }
  const std::vector<Merge>& merges() const { return merges_; }

  std::string to_csv() const {
    std::string out = "left,right,height,size\n";
    for (const auto& m : merges_) {
      out += std::to_string(m.left) + ',' + std::to_string(m.right) + ',' +
             io::format_number(m.height) + ',' + std::to_string(m.size) + '\n';
    }
    return out;
  }

 private:
  void validate() const {
    const auto n = leaf_count_;
    if (n < 2) throw ValidationError("dendrogram needs at least 2 leaves");
    if (merges_.size() != n - 1) {
      throw ValidationError("dendrogram over " + std::to_string(n) + " leaves needs " +
                            std::to_string(n - 1) + " merges");
    }
    std::vector<std::size_t> sizes(2 * n - 1, 0);
    std::fill(sizes.begin(), sizes.begin() + n, 1);
    std::vector<bool> consumed(2 * n - 1, false);
    for (std::size_t i = 0; i < merges_.size(); ++i) {
      const auto& m = merges_[i];
      const auto id = n + i;
      if (m.left >= m.right || m.right >= id) {
        throw ValidationError("merge " + std::to_string(i) + " references invalid children");
      }
      if (consumed[m.left] || consumed[m.right]) {
        throw ValidationError("merge " + std::to_string(i) + " reuses a consumed cluster");
      }
      if (!(m.height >= 0.0) || (i > 0 && m.height < merges_[i - 1].height)) {
        throw ValidationError("merge " + std::to_string(i) + " breaks height monotonicity");
      }
      if (m.size != sizes[m.left] + sizes[m.right]) {
        throw ValidationError("merge " + std::to_string(i) + " has inconsistent size");
      }
      consumed[m.left] = consumed[m.right] = true;
      sizes[id] = m.size;
    }
  }

  std::size_t leaf_count_;
  std::vector<Merge> merges_;
};

//! Flat clustering: assignment[i] in [0, k).
struct Partition {
  std::vector<std::size_t> assignment;
  std::size_t k = 0;

  std::size_t size() const { return assignment.size(); }
  friend bool operator==(const Partition&, const Partition&) = default;
};

//! Validates a raw assignment vector and counts its clusters. Every index
//! in [0, max] must be used.
inline Partition make_partition(std::vector<std::size_t> assignment) {
  if (assignment.empty()) throw ValidationError("partition is empty");
  const auto k = *std::max_element(assignment.begin(), assignment.end()) + 1;
  std::vector<bool> used(k, false);
  for (auto a : assignment) used[a] = true;
  if (std::find(used.begin(), used.end(), false) != used.end()) {
    throw ValidationError("partition leaves a cluster index unused");
  }
  return Partition{std::move(assignment), k};
}

namespace detail {

// Condensed upper-triangular storage for i < j.
class CondensedMatrix {
 public:
  explicit CondensedMatrix(std::size_t n) : n_(n), data_(n * (n - 1) / 2) {}

  double& at(std::size_t i, std::size_t j) { return data_[offset(i, j)]; }
  double at(std::size_t i, std::size_t j) const { return data_[offset(i, j)]; }

 private:
  std::size_t offset(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return i * (2 * n_ - i - 1) / 2 + (j - i - 1);
  }

  std::size_t n_;
  std::vector<double> data_;
};

template <typename T>
CondensedMatrix squared_distances(const Matrix<T>& x) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  CondensedMatrix dist(n);
  auto fill_rows = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto a = x.row(i);
      for (std::size_t j = i + 1; j < n; ++j) {
        const auto b = x.row(j);
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          const double diff = static_cast<double>(a[c]) - static_cast<double>(b[c]);
          s += diff * diff;
        }
        dist.at(i, j) = s;
      }
    }
  };
  // Rows near the top carry more pairs; interleave blocks across workers.
  const std::size_t workers =
      n < 512 ? 1 : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (workers == 1) {
    fill_rows(0, n);
  } else {
    constexpr std::size_t kBlock = 64;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t b = w * kBlock; b < n; b += workers * kBlock) {
          fill_rows(b, std::min(n, b + kBlock));
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  return dist;
}

}  // namespace detail

//! Ward-linkage agglomerative clustering by the nearest-neighbor chain.
//!
//! Works on squared Euclidean distances in double precision and updates them
//! with the Lance-Williams recurrence
//!   D(k, i+j) = ((n_i+n_k) D(k,i) + (n_j+n_k) D(k,j) - n_k D(i,j)) / (n_i+n_j+n_k),
//! where D(i,j) = 2 n_i n_j / (n_i+n_j) * |c_i - c_j|^2. Reported heights are
//! sqrt(D). Memory is one condensed n x n matrix.
//!
//! Ties: a chain tip's nearest neighbour prefers the previous chain element,
//! then the smallest slot. Equal-height merges keep the order they were found.
template <typename T>
Dendrogram ward_linkage(const Matrix<T>& x) {
  const std::size_t n = x.rows();
  if (n < 2) throw ValidationError("ward_linkage needs at least 2 rows");
  for (auto v : x.values()) {
    if (!std::isfinite(static_cast<double>(v))) throw NumericError("ward_linkage input is not finite");
  }
  auto dist = detail::squared_distances(x);

  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> size(n, 1);
  std::vector<double> slot_height(n, 0.0);
  std::vector<std::size_t> active(n);  // sorted list of live slots
  std::iota(active.begin(), active.end(), std::size_t{0});
  std::vector<std::size_t> chain;
  chain.reserve(n);

  struct Raw {
    std::size_t a, b;
    double d2;
  };
  std::vector<Raw> raw;
  raw.reserve(n - 1);

  while (active.size() > 1) {
    if (chain.empty()) chain.push_back(active.front());
    std::size_t a = 0, b = 0;
    double best = 0.0;
    while (true) {
      a = chain.back();
      const std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : kNone;
      b = kNone;
      best = std::numeric_limits<double>::infinity();
      if (prev != kNone) {
        b = prev;
        best = dist.at(a, prev);
      }
      for (auto c : active) {
        if (c == a || c == prev) continue;
        const double v = dist.at(a, c);
        if (v < best || (v == best && b != prev && c < b)) {
          best = v;
          b = c;
        }
      }
      if (b == prev) break;
      chain.push_back(b);
    }
    chain.pop_back();
    chain.pop_back();

    // New cluster lives in the larger slot; the smaller slot retires.
    const std::size_t keep = std::max(a, b);
    const std::size_t drop = std::min(a, b);
    const double na = static_cast<double>(size[a]);
    const double nb = static_cast<double>(size[b]);
    for (auto c : active) {
      if (c == a || c == b) continue;
      const double nc = static_cast<double>(size[c]);
      const double updated =
          ((na + nc) * dist.at(c, a) + (nb + nc) * dist.at(c, b) - nc * best) / (na + nb + nc);
      dist.at(c, keep) = updated;
    }
    // Rounding can push a parent marginally below a child; clamp so that
    // sorting by height never places a parent before its children.
    const double d2 = std::max({best, slot_height[a], slot_height[b]});
    raw.push_back({a, b, d2});
    size[keep] = size[a] + size[b];
    slot_height[keep] = d2;
    active.erase(std::lower_bound(active.begin(), active.end(), drop));
  }

  std::vector<std::size_t> order(raw.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return raw[i].d2 < raw[j].d2; });

  // Slot -> current cluster id, replaying merges in height order.
  std::vector<std::size_t> cluster_of(n);
  std::iota(cluster_of.begin(), cluster_of.end(), std::size_t{0});
  std::vector<std::size_t> cluster_size(2 * n - 1, 1);
  std::vector<Merge> merges;
  merges.reserve(n - 1);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& r = raw[order[i]];
    const auto ca = cluster_of[r.a];
    const auto cb = cluster_of[r.b];
    const auto id = n + i;
    Merge m;
    m.left = std::min(ca, cb);
    m.right = std::max(ca, cb);
    m.height = std::sqrt(std::max(r.d2, 0.0));
    m.size = cluster_size[ca] + cluster_size[cb];
    cluster_size[id] = m.size;
    cluster_of[std::max(r.a, r.b)] = id;
    merges.push_back(m);
  }
  return Dendrogram(n, std::move(merges));
}

namespace detail {

inline std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace detail

//! Partition with k clusters: applies the first n-k merges. Cluster indices
//! are numbered by each cluster's smallest member row.
inline Partition cut(const Dendrogram& dendrogram, std::size_t k) {
  const std::size_t n = dendrogram.leaf_count();
  if (k < 1 || k > n) {
    throw ValidationError("cut: k = " + std::to_string(k) + " outside [1, " + std::to_string(n) +
                          "]");
  }
  std::vector<std::size_t> parent(2 * n - 1);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  const auto& merges = dendrogram.merges();
  for (std::size_t i = 0; i < n - k; ++i) {
    parent[merges[i].left] = n + i;
    parent[merges[i].right] = n + i;
  }
  constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> label(2 * n - 1, kUnset);
  Partition p;
  p.assignment.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto root = detail::find_root(parent, i);
    if (label[root] == kUnset) label[root] = p.k++;
    p.assignment[i] = label[root];
  }
  return p;
}

}  // namespace sam

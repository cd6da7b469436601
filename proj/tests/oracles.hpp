#pragma once

// Independent reference implementations used only by tests. These recompute
// everything from scratch and deliberately share no code with the library
// beyond the Matrix container.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "sam/matrix.hpp"

namespace oracle {

struct NaiveMerge {
  std::size_t left, right;
  double height;
  std::size_t size;
};

// O(n^3 d) Ward agglomeration: every step recomputes centroids from the
// member lists and scans all live pairs. Ties go to the lexicographically
// smallest (min id, max id).
template <typename T>
std::vector<NaiveMerge> ward(const sam::Matrix<T>& x) {
  const std::size_t n = x.rows(), d = x.cols();
  struct Cluster {
    std::size_t id;
    std::vector<std::size_t> members;
  };
  std::vector<Cluster> live;
  for (std::size_t i = 0; i < n; ++i) live.push_back({i, {i}});
  auto centroid = [&](const Cluster& c) {
    std::vector<double> m(d, 0.0);
    for (auto r : c.members)
      for (std::size_t j = 0; j < d; ++j) m[j] += static_cast<double>(x(r, j));
    for (auto& v : m) v /= static_cast<double>(c.members.size());
    return m;
  };
  std::vector<NaiveMerge> out;
  std::size_t next_id = n;
  while (live.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    std::pair<std::size_t, std::size_t> best_key{SIZE_MAX, SIZE_MAX};
    for (std::size_t i = 0; i < live.size(); ++i) {
      const auto ci = centroid(live[i]);
      for (std::size_t j = i + 1; j < live.size(); ++j) {
        const auto cj = centroid(live[j]);
        double dist = 0.0;
        for (std::size_t t = 0; t < d; ++t) dist += (ci[t] - cj[t]) * (ci[t] - cj[t]);
        const double ni = static_cast<double>(live[i].members.size());
        const double nj = static_cast<double>(live[j].members.size());
        const double cost = 2.0 * ni * nj / (ni + nj) * dist;
        const std::pair<std::size_t, std::size_t> key{std::min(live[i].id, live[j].id),
                                                      std::max(live[i].id, live[j].id)};
        if (cost < best || (cost == best && key < best_key)) {
          best = cost;
          best_key = key;
          bi = i;
          bj = j;
        }
      }
    }
    Cluster merged{next_id++, live[bi].members};
    merged.members.insert(merged.members.end(), live[bj].members.begin(), live[bj].members.end());
    out.push_back({best_key.first, best_key.second, std::sqrt(best), merged.members.size()});
    live.erase(live.begin() + static_cast<std::ptrdiff_t>(bj));
    live.erase(live.begin() + static_cast<std::ptrdiff_t>(bi));
    live.push_back(std::move(merged));
  }
  return out;
}

// Every distinct score is a threshold; precision and recall are recounted
// from scratch at each one. AP = sum of recall increments times precision.
inline double aprc_all_thresholds(const std::vector<double>& scores, const std::vector<bool>& gold) {
  std::set<double, std::greater<>> thresholds(scores.begin(), scores.end());
  double positives = 0;
  for (bool g : gold) positives += g;
  double ap = 0.0, prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0, predicted = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) {
        ++predicted;
        tp += gold[i];
      }
    }
    const double recall = tp / positives;
    ap += (recall - prev_recall) * (tp / predicted);
    prev_recall = recall;
  }
  return ap;
}

// Davies-Bouldin index straight from its definition, cluster by cluster.
template <typename T>
double dbi(const sam::Matrix<T>& x, const std::vector<std::size_t>& assignment) {
  const std::size_t d = x.cols();
  const std::size_t k = *std::max_element(assignment.begin(), assignment.end()) + 1;
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < assignment.size(); ++i) members[assignment[i]].push_back(i);
  std::vector<std::vector<double>> c(k, std::vector<double>(d, 0.0));
  std::vector<double> s(k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    for (auto r : members[a])
      for (std::size_t j = 0; j < d; ++j) c[a][j] += x(r, j);
    for (auto& v : c[a]) v /= static_cast<double>(members[a].size());
    for (auto r : members[a]) {
      double q = 0;
      for (std::size_t j = 0; j < d; ++j) q += (x(r, j) - c[a][j]) * (x(r, j) - c[a][j]);
      s[a] += std::sqrt(q);
    }
    s[a] /= static_cast<double>(members[a].size());
  }
  double total = 0;
  for (std::size_t a = 0; a < k; ++a) {
    double worst = 0;
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) continue;
      double q = 0;
      for (std::size_t j = 0; j < d; ++j) q += (c[a][j] - c[b][j]) * (c[a][j] - c[b][j]);
      worst = std::max(worst, (s[a] + s[b]) / std::sqrt(q));
    }
    total += worst;
  }
  return total / static_cast<double>(k);
}

inline sam::Matrix<double> random_matrix(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n * d);
  for (auto& x : v) x = u(rng);
  return sam::Matrix<double>(n, d, std::move(v));
}

// Isotropic Gaussian blobs; blob b is centred at spacing * e_(b mod d)
// scaled by (1 + b / d). Returns the matrix and the blob index per row.
struct Blobs {
  sam::Matrix<double> x;
  std::vector<std::size_t> blob;
};

inline Blobs make_blobs(std::size_t blobs, std::size_t per_blob, std::size_t d, double spacing,
                        double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, sigma);
  Blobs out{sam::Matrix<double>(blobs * per_blob, d), {}};
  for (std::size_t b = 0; b < blobs; ++b) {
    for (std::size_t i = 0; i < per_blob; ++i) {
      const std::size_t r = b * per_blob + i;
      for (std::size_t j = 0; j < d; ++j) out.x(r, j) = g(rng);
      out.x(r, b % d) += spacing * (1.0 + static_cast<double>(b / d));
      out.blob.push_back(b);
    }
  }
  return out;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("samkit-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace oracle

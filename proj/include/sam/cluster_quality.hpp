#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sam/alignment.hpp"
#include "sam/error.hpp"
#include "sam/hierclust.hpp"
#include "sam/matrix.hpp"

namespace sam {

//! Davies-Bouldin index: mean over clusters of the worst ratio
//! (S_i + S_j) / M_ij, with S the mean member-to-centroid distance and M the
//! centroid distance. Lower is better.
//!
//! Throws NumericError when two centroids coincide.
template <typename T>
double dbi(const Matrix<T>& x, const Partition& partition) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  const std::size_t k = partition.k;
  if (partition.size() != n) {
    throw ValidationError("partition covers " + std::to_string(partition.size()) +
                          " rows but matrix has " + std::to_string(n));
  }
  if (k < 2) throw ValidationError("Davies-Bouldin index needs at least 2 clusters");

  std::vector<double> centroid(k * d, 0.0);
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = partition.assignment[i];
    if (c >= k) throw ValidationError("partition index out of range");
    ++count[c];
    const auto row = x.row(i);
    for (std::size_t j = 0; j < d; ++j) centroid[c * d + j] += static_cast<double>(row[j]);
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (count[c] == 0) throw ValidationError("partition has an empty cluster");
    for (std::size_t j = 0; j < d; ++j) centroid[c * d + j] /= static_cast<double>(count[c]);
  }

  std::vector<double> spread(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = partition.assignment[i];
    const auto row = x.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = static_cast<double>(row[j]) - centroid[c * d + j];
      s += diff * diff;
    }
    spread[c] += std::sqrt(s);
  }
  for (std::size_t c = 0; c < k; ++c) spread[c] /= static_cast<double>(count[c]);

  std::vector<double> worst(k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = centroid[a * d + j] - centroid[b * d + j];
        s += diff * diff;
      }
      const double sep = std::sqrt(s);
      if (sep == 0.0) {
        throw NumericError("degenerate partition: clusters " + std::to_string(a) + " and " +
                           std::to_string(b) + " share a centroid");
      }
      const double r = (spread[a] + spread[b]) / sep;
      worst[a] = std::max(worst[a], r);
      worst[b] = std::max(worst[b], r);
    }
  }
  double total = 0.0;
  for (double w : worst) total += w;
  return total / static_cast<double>(k);
}

struct DbiCurve {
  std::vector<CurvePoint> points;
  double area = 0.0;
  // Grid values dropped because the partition had coincident centroids.
  std::vector<std::size_t> skipped;

  std::string to_csv() const {
    std::string out = "k,dbi\n";
    for (const auto& p : points) out += std::to_string(p.k) + ',' + io::format_number(p.value) + '\n';
    return out;
  }
};

template <typename T>
DbiCurve dbi_curve(const Matrix<T>& x, const Dendrogram& dendrogram,
                   std::vector<std::size_t> grid) {
  const std::size_t n = dendrogram.leaf_count();
  if (x.rows() != n) throw ValidationError("matrix rows do not match dendrogram leaves");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (!grid.empty() && grid.front() < 2) {
    throw ValidationError("Davies-Bouldin grid must start at k >= 2");
  }
  if (!grid.empty() && grid.back() > n) {
    throw ValidationError("grid values must lie in [2, " + std::to_string(n) + "]");
  }
  if (grid.size() < 2) throw ValidationError("Davies-Bouldin curve needs at least 2 grid values");

  DbiCurve curve;
  for (auto k : grid) {
    try {
      curve.points.push_back({k, dbi(x, cut(dendrogram, k))});
    } catch (const NumericError&) {
      curve.skipped.push_back(k);
    }
  }
  curve.area = sam_area(curve.points);
  return curve;
}

}  // namespace sam

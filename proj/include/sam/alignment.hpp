#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sam/dataset.hpp"
#include "sam/error.hpp"
#include "sam/hierclust.hpp"
#include "sam/io.hpp"

namespace sam {

//! z(x, l): fraction of x's cluster carrying label l. Columns follow the
//! dataset's sorted class order.
struct ScoreTable {
  Matrix<double> scores;
  std::vector<std::string> classes;

  std::vector<double> column(std::size_t l) const {
    std::vector<double> out(scores.rows());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = scores(i, l);
    return out;
  }
};

inline ScoreTable cluster_scores(const Partition& partition, const LabeledDataset& dataset) {
  const std::size_t n = dataset.size();
  if (partition.size() != n) {
    throw ValidationError("partition covers " + std::to_string(partition.size()) +
                          " samples but dataset has " + std::to_string(n));
  }
  const std::size_t labels = dataset.class_count();
  std::vector<std::size_t> counts(partition.k * labels, 0);
  std::vector<std::size_t> sizes(partition.k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = partition.assignment[i];
    if (c >= partition.k) throw ValidationError("partition index out of range");
    ++counts[c * labels + dataset.codes()[i]];
    ++sizes[c];
  }
  ScoreTable table{Matrix<double>(n, labels), dataset.classes()};
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = partition.assignment[i];
    for (std::size_t l = 0; l < labels; ++l) {
      table.scores(i, l) =
          static_cast<double>(counts[c * labels + l]) / static_cast<double>(sizes[c]);
    }
  }
  return table;
}

//! Items sharing one score: `count` samples of which `positives` are gold.
struct ScoreGroup {
  double score = 0.0;
  std::size_t positives = 0;
  std::size_t count = 0;
};

namespace detail {

// Average precision with every distinct score acting as one threshold step:
// sum over steps of (recall gained) * (precision after the step).
inline double average_precision(std::vector<ScoreGroup> groups) {
  std::sort(groups.begin(), groups.end(),
            [](const ScoreGroup& a, const ScoreGroup& b) { return a.score > b.score; });
  std::size_t total_pos = 0;
  for (const auto& g : groups) total_pos += g.positives;
  if (total_pos == 0) throw ValidationError("APRC is undefined without positive samples");
  const double p = static_cast<double>(total_pos);
  double ap = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < groups.size();) {
    std::size_t step_pos = 0;
    const double s = groups[i].score;
    for (; i < groups.size() && groups[i].score == s; ++i) {
      step_pos += groups[i].positives;
      seen += groups[i].count;
    }
    tp += step_pos;
    if (step_pos > 0) {
      ap += (static_cast<double>(step_pos) / p) *
            (static_cast<double>(tp) / static_cast<double>(seen));
    }
  }
  return ap;
}

}  // namespace detail

//! Area under the precision-recall curve in average-precision form, tied
//! scores grouped into a single threshold.
inline double aprc(std::span<const double> scores, const std::vector<bool>& gold) {
  if (scores.size() != gold.size()) throw ValidationError("aprc: scores and gold differ in length");
  std::vector<ScoreGroup> groups;
  groups.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw NumericError("aprc: NaN score");
    groups.push_back({scores[i], gold[i] ? std::size_t{1} : std::size_t{0}, 1});
  }
  return detail::average_precision(std::move(groups));
}

enum class AlignmentMode { balanced, target };

inline std::string to_string(AlignmentMode mode) {
  return mode == AlignmentMode::balanced ? "balanced" : "target";
}

inline AlignmentMode parse_alignment_mode(std::string_view s) {
  if (s == "balanced") return AlignmentMode::balanced;
  if (s == "target") return AlignmentMode::target;
  throw ValidationError("unknown alignment mode \"" + std::string(s) + "\"");
}

namespace detail {

// Class columns that contribute to the alignment score.
inline std::vector<std::size_t> scored_classes(const LabeledDataset& dataset, AlignmentMode mode,
                                               const std::optional<std::string>& target) {
  if (mode == AlignmentMode::balanced) {
    std::vector<std::size_t> all(dataset.class_count());
    for (std::size_t l = 0; l < all.size(); ++l) all[l] = l;
    return all;
  }
  if (!target) throw ValidationError("target mode requires a target label");
  const auto idx = dataset.class_index(*target);
  if (!idx) throw ValidationError("target label \"" + *target + "\" does not occur in the dataset");
  return {*idx};
}

}  // namespace detail

//! a(p_k): APRC of the target class, or the unweighted mean of per-class
//! APRCs in balanced mode.
inline double alignment_score(const Partition& partition, const LabeledDataset& dataset,
                              AlignmentMode mode,
                              const std::optional<std::string>& target = std::nullopt) {
  const auto classes = detail::scored_classes(dataset, mode, target);
  const auto table = cluster_scores(partition, dataset);
  double sum = 0.0;
  for (auto l : classes) {
    const auto col = table.column(l);
    std::vector<bool> gold(dataset.size());
    for (std::size_t i = 0; i < gold.size(); ++i) gold[i] = dataset.codes()[i] == l;
    sum += aprc(col, gold);
  }
  return sum / static_cast<double>(classes.size());
}

struct CurvePoint {
  std::size_t k = 0;
  double value = 0.0;
};

//! Trapezoid integral over k divided by the k range.
inline double sam_area(std::span<const CurvePoint> points) {
  if (points.size() < 2) throw ValidationError("curve area needs at least 2 points");
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].k <= points[i - 1].k) throw ValidationError("curve k values must increase");
    area += static_cast<double>(points[i].k - points[i - 1].k) *
            (points[i].value + points[i - 1].value) / 2.0;
  }
  return area / static_cast<double>(points.back().k - points.front().k);
}

enum class GridKind { full, automatic };

//! Evaluation grid over [k_min, k_max]. `full` is every k. `automatic` is
//! every k when n <= 2000; otherwise every k up to 100 followed by 300
//! geometrically spaced values up to k_max.
inline std::vector<std::size_t> make_grid(GridKind kind, std::size_t n, std::size_t k_min,
                                          std::size_t k_max) {
  if (k_min < 1 || k_max > n || k_min >= k_max) {
    throw ValidationError("grid bounds [" + std::to_string(k_min) + ", " + std::to_string(k_max) +
                          "] invalid for n = " + std::to_string(n));
  }
  std::vector<std::size_t> grid;
  if (kind == GridKind::full || n <= 2000 || k_max <= 100) {
    for (auto k = k_min; k <= k_max; ++k) grid.push_back(k);
    return grid;
  }
  constexpr std::size_t kDense = 100;
  constexpr std::size_t kGeometric = 300;
  for (auto k = k_min; k <= kDense; ++k) grid.push_back(k);
  const double lo = std::log(static_cast<double>(std::max(k_min, kDense + 1)));
  const double hi = std::log(static_cast<double>(k_max));
  for (std::size_t i = 0; i < kGeometric; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(kGeometric - 1);
    grid.push_back(static_cast<std::size_t>(std::llround(std::exp(lo + t * (hi - lo)))));
  }
  grid.push_back(k_max);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

struct AlignmentCurve {
  std::vector<CurvePoint> points;
  AlignmentMode mode = AlignmentMode::balanced;
  std::optional<std::string> target;
  double sam = 0.0;
  std::size_t k_min = 0;
  std::size_t k_max = 0;

  std::string to_csv() const {
    std::string out = "k,a\n";
    for (const auto& p : points) out += std::to_string(p.k) + ',' + io::format_number(p.value) + '\n';
    return out;
  }
};

//! Alignment score at every grid k plus the normalized area under it.
//!
//! Walks the merge list once from the singletons upward, keeping a label
//! histogram per live cluster, and scores the live clusters whenever the
//! cluster count reaches a grid value. Equivalent to cut() followed by
//! alignment_score() at each k.
inline AlignmentCurve alignment_curve(const Dendrogram& dendrogram, const LabeledDataset& dataset,
                                      std::vector<std::size_t> grid, AlignmentMode mode,
                                      const std::optional<std::string>& target = std::nullopt) {
  const std::size_t n = dendrogram.leaf_count();
  if (dataset.size() != n) {
    throw ValidationError("dendrogram has " + std::to_string(n) + " leaves but dataset has " +
                          std::to_string(dataset.size()) + " samples");
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.size() < 2) throw ValidationError("alignment curve needs at least 2 grid values");
  if (grid.front() < 1 || grid.back() > n) {
    throw ValidationError("grid values must lie in [1, " + std::to_string(n) + "]");
  }
  const auto classes = detail::scored_classes(dataset, mode, target);
  const std::size_t labels = dataset.class_count();

  std::vector<std::size_t> hist((2 * n - 1) * labels, 0);
  std::vector<std::size_t> size(2 * n - 1, 1);
  for (std::size_t i = 0; i < n; ++i) hist[i * labels + dataset.codes()[i]] = 1;
  std::vector<std::size_t> live(n), where(2 * n - 1, 0);
  for (std::size_t i = 0; i < n; ++i) live[i] = where[i] = i;
  auto remove_live = [&](std::size_t id) {
    const auto pos = where[id];
    live[pos] = live.back();
    where[live[pos]] = pos;
    live.pop_back();
  };

  std::vector<double> values(grid.size());
  std::vector<ScoreGroup> groups;
  std::size_t applied = 0;
  const auto& merges = dendrogram.merges();
  for (std::size_t g = grid.size(); g-- > 0;) {
    const std::size_t k = grid[g];
    while (n - applied > k) {
      const auto& m = merges[applied];
      const auto id = n + applied;
      for (std::size_t l = 0; l < labels; ++l) {
        hist[id * labels + l] = hist[m.left * labels + l] + hist[m.right * labels + l];
      }
      size[id] = size[m.left] + size[m.right];
      remove_live(m.left);
      remove_live(m.right);
      where[id] = live.size();
      live.push_back(id);
      ++applied;
    }
    double sum = 0.0;
    for (auto l : classes) {
      groups.clear();
      for (auto c : live) {
        const auto pos = hist[c * labels + l];
        groups.push_back(
            {static_cast<double>(pos) / static_cast<double>(size[c]), pos, size[c]});
      }
      sum += detail::average_precision(groups);
    }
    values[g] = sum / static_cast<double>(classes.size());
  }

  AlignmentCurve curve;
  curve.mode = mode;
  curve.target = mode == AlignmentMode::target ? target : std::nullopt;
  for (std::size_t g = 0; g < grid.size(); ++g) curve.points.push_back({grid[g], values[g]});
  curve.k_min = grid.front();
  curve.k_max = grid.back();
  curve.sam = sam_area(curve.points);
  return curve;
}

}  // namespace sam

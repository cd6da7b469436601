#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sam/alignment.hpp"
#include "sam/dataset.hpp"
#include "sam/error.hpp"
#include "sam/io.hpp"
#include "sam/matrix.hpp"

namespace sam {

// ---------------------------------------------------------------------------
// Max-entropy (multinomial logistic regression) model.

struct TrainStats {
  double initial_loss = 0.0;  // at all-zero parameters
  double final_loss = 0.0;
  double gradient_norm = 0.0;  // infinity norm at the returned parameters
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> loss_history;  // one entry per accepted iterate
};

struct MaxEntModel {
  Matrix<double> weights;  // classes x features
  std::vector<double> bias;
  double l2_strength = 0.0;
  std::vector<std::string> classes;
  TrainStats stats;

  std::size_t class_count() const { return bias.size(); }

  template <typename T>
  std::vector<double> predict_proba(std::span<const T> features) const {
    std::vector<double> logits(bias);
    for (std::size_t l = 0; l < logits.size(); ++l) {
      const auto w = weights.row(l);
      for (std::size_t j = 0; j < w.size(); ++j) logits[l] += w[j] * static_cast<double>(features[j]);
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (auto& v : logits) z += (v = std::exp(v - mx));
    for (auto& v : logits) v /= z;
    return logits;
  }

  template <typename T>
  std::size_t predict(std::span<const T> features) const {
    const auto p = predict_proba(features);
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  }
};

//! Mean multinomial negative log-likelihood plus l2/2 * |W|^2 (bias not
//! penalized). Parameters are packed as [W row-major, bias].
class MaxEntObjective {
 public:
  template <typename T>
  MaxEntObjective(const Matrix<T>& x, std::span<const std::size_t> y, std::size_t classes,
                  double l2)
      : x_(x.template cast<double>()), y_(y.begin(), y.end()), classes_(classes), l2_(l2) {
    if (y_.size() != x_.rows()) throw ValidationError("labels and feature rows differ in count");
    for (auto c : y_) {
      if (c >= classes_) throw ValidationError("label index out of range");
    }
  }

  std::size_t parameter_count() const { return classes_ * (x_.cols() + 1); }

  double operator()(std::span<const double> theta, std::span<double> grad) const {
    const std::size_t n = x_.rows();
    const std::size_t d = x_.cols();
    const std::size_t L = classes_;
    const double* w = theta.data();
    const double* b = theta.data() + L * d;
    std::fill(grad.begin(), grad.end(), 0.0);
    double* gw = grad.data();
    double* gb = grad.data() + L * d;

    std::vector<double> logits(L);
    double nll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto xi = x_.row(i);
      for (std::size_t l = 0; l < L; ++l) {
        double s = b[l];
        const double* wl = w + l * d;
        for (std::size_t j = 0; j < d; ++j) s += wl[j] * xi[j];
        logits[l] = s;
      }
      const double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (std::size_t l = 0; l < L; ++l) z += std::exp(logits[l] - mx);
      const double log_z = mx + std::log(z);
      nll += log_z - logits[y_[i]];
      for (std::size_t l = 0; l < L; ++l) {
        const double r = std::exp(logits[l] - log_z) - (l == y_[i] ? 1.0 : 0.0);
        if (r == 0.0) continue;
        double* gl = gw + l * d;
        for (std::size_t j = 0; j < d; ++j) gl[j] += r * xi[j];
        gb[l] += r;
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    double penalty = 0.0;
    for (std::size_t p = 0; p < L * d; ++p) {
      gw[p] = gw[p] * inv_n + l2_ * w[p];
      penalty += w[p] * w[p];
    }
    for (std::size_t l = 0; l < L; ++l) gb[l] *= inv_n;
    return nll * inv_n + 0.5 * l2_ * penalty;
  }

 private:
  Matrix<double> x_;
  std::vector<std::size_t> y_;
  std::size_t classes_;
  double l2_;
};

struct OptimizerOptions {
  double gradient_tolerance = 1e-6;  // infinity norm
  std::size_t max_iterations = 500;
  std::size_t history = 10;
};

namespace detail {

inline double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Limited-memory BFGS with Armijo backtracking. Every accepted step lowers
// the objective.
template <typename Objective>
TrainStats minimize_lbfgs(const Objective& f, std::vector<double>& theta,
                          const OptimizerOptions& opt) {
  const std::size_t p = theta.size();
  std::vector<double> grad(p), next(p), next_grad(p), dir(p);
  TrainStats stats;
  double loss = f(theta, grad);
  if (!std::isfinite(loss)) throw NumericError("max-entropy loss is not finite");
  stats.initial_loss = loss;
  stats.loss_history.push_back(loss);

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  std::vector<double> alpha;
  while (stats.iterations < opt.max_iterations) {
    if (inf_norm(grad) <= opt.gradient_tolerance) {
      stats.converged = true;
      break;
    }
    // Two-loop recursion.
    for (std::size_t i = 0; i < p; ++i) dir[i] = -grad[i];
    alpha.assign(s_hist.size(), 0.0);
    for (std::size_t h = s_hist.size(); h-- > 0;) {
      alpha[h] = rho_hist[h] * dot(s_hist[h], dir);
      for (std::size_t i = 0; i < p; ++i) dir[i] -= alpha[h] * y_hist[h][i];
    }
    if (!s_hist.empty()) {
      const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
      for (auto& v : dir) v *= gamma;
    }
    for (std::size_t h = 0; h < s_hist.size(); ++h) {
      const double beta = rho_hist[h] * dot(y_hist[h], dir);
      for (std::size_t i = 0; i < p; ++i) dir[i] += s_hist[h][i] * (alpha[h] - beta);
    }
    double slope = dot(grad, dir);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t i = 0; i < p; ++i) dir[i] = -grad[i];
      slope = dot(grad, dir);
    }
    double step = s_hist.empty() ? std::min(1.0, 1.0 / inf_norm(grad)) : 1.0;
    double next_loss = 0.0;
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      for (std::size_t i = 0; i < p; ++i) next[i] = theta[i] + step * dir[i];
      next_loss = f(next, next_grad);
      if (std::isfinite(next_loss) && next_loss <= loss + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || !(next_loss < loss)) break;  // no further progress at this precision

    std::vector<double> s(p), y(p);
    for (std::size_t i = 0; i < p; ++i) {
      s[i] = next[i] - theta[i];
      y[i] = next_grad[i] - grad[i];
    }
    const double sy = dot(s, y);
    if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > opt.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    theta.swap(next);
    grad.swap(next_grad);
    loss = next_loss;
    stats.loss_history.push_back(loss);
    ++stats.iterations;
  }
  stats.final_loss = loss;
  stats.gradient_norm = inf_norm(grad);
  stats.converged = stats.converged || stats.gradient_norm <= opt.gradient_tolerance;
  return stats;
}

}  // namespace detail

//! Fits an L2-regularized max-entropy classifier from all-zero parameters.
//! `y` holds indices into `classes`; every class must occur at least once.
template <typename T>
MaxEntModel train_maxent(const Matrix<T>& x, std::span<const std::size_t> y,
                         const std::vector<std::string>& classes, double l2,
                         const OptimizerOptions& opt = {}) {
  if (!(l2 > 0.0) || !std::isfinite(l2)) throw ValidationError("l2 strength must be positive");
  if (classes.size() < 2) throw ValidationError("max-entropy needs at least 2 classes");
  std::vector<std::size_t> seen(classes.size(), 0);
  for (auto c : y) {
    if (c >= classes.size()) throw ValidationError("label index out of range");
    ++seen[c];
  }
  for (std::size_t l = 0; l < classes.size(); ++l) {
    if (seen[l] == 0) throw ValidationError("class \"" + classes[l] + "\" absent from training labels");
  }
  const MaxEntObjective objective(x, y, classes.size(), l2);
  std::vector<double> theta(objective.parameter_count(), 0.0);
  auto stats = detail::minimize_lbfgs(objective, theta, opt);
  for (double v : theta) {
    if (!std::isfinite(v)) throw NumericError("max-entropy parameters diverged");
  }

  const std::size_t d = x.cols();
  MaxEntModel model;
  model.weights = Matrix<double>(classes.size(), d,
                                 std::vector<double>(theta.begin(), theta.begin() + classes.size() * d));
  model.bias.assign(theta.begin() + classes.size() * d, theta.end());
  model.l2_strength = l2;
  model.classes = classes;
  model.stats = std::move(stats);
  return model;
}

// ---------------------------------------------------------------------------
// Evaluation.

enum class Metric { accuracy, f1, aprc };

inline std::string to_string(Metric m) {
  switch (m) {
    case Metric::accuracy: return "accuracy";
    case Metric::f1: return "f1";
    case Metric::aprc: return "aprc";
  }
  return "?";
}

inline Metric parse_metric(std::string_view s) {
  if (s == "accuracy") return Metric::accuracy;
  if (s == "f1" || s == "f1-target") return Metric::f1;
  if (s == "aprc") return Metric::aprc;
  throw ValidationError("unknown metric \"" + std::string(s) + "\"");
}

//! F1 of one class from confusion counts; 0 when precision and recall are
//! both undefined or zero.
inline double f1_score(std::size_t tp, std::size_t fp, std::size_t fn) {
  const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

//! Scores a model on rows of `x` with gold class indices `y`.
//!
//! accuracy: fraction correct. f1: F1 of the target class. aprc: APRC of the
//! target class's probability, or the mean over classes that have positives
//! when no target is given.
template <typename T>
double evaluate(const MaxEntModel& model, const Matrix<T>& x, std::span<const std::size_t> y,
                Metric metric, std::optional<std::size_t> target = std::nullopt) {
  if (x.rows() != y.size()) throw ValidationError("labels and feature rows differ in count");
  if (x.rows() == 0) throw ValidationError("cannot evaluate on an empty set");
  for (auto c : y) {
    if (c >= model.class_count()) throw ValidationError("label index unknown to the model");
  }
  if (target && *target >= model.class_count()) throw ValidationError("target class unknown to the model");
  switch (metric) {
    case Metric::accuracy: {
      std::size_t correct = 0;
      for (std::size_t i = 0; i < y.size(); ++i) correct += model.predict(x.row(i)) == y[i];
      return static_cast<double>(correct) / static_cast<double>(y.size());
    }
    case Metric::f1: {
      if (!target) throw ValidationError("f1 metric requires a target class");
      std::size_t tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        const bool pred = model.predict(x.row(i)) == *target;
        const bool gold = y[i] == *target;
        tp += pred && gold;
        fp += pred && !gold;
        fn += !pred && gold;
      }
      return f1_score(tp, fp, fn);
    }
    case Metric::aprc: {
      std::vector<std::vector<double>> proba;
      proba.reserve(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) proba.push_back(model.predict_proba(x.row(i)));
      auto class_ap = [&](std::size_t l) -> std::optional<double> {
        std::vector<double> scores(y.size());
        std::vector<bool> gold(y.size());
        bool any = false;
        for (std::size_t i = 0; i < y.size(); ++i) {
          scores[i] = proba[i][l];
          gold[i] = y[i] == l;
          any = any || gold[i];
        }
        if (!any) return std::nullopt;
        return aprc(scores, gold);
      };
      if (target) return class_ap(*target).value_or(0.0);
      double sum = 0.0;
      std::size_t used = 0;
      for (std::size_t l = 0; l < model.class_count(); ++l) {
        if (auto ap = class_ap(l)) {
          sum += *ap;
          ++used;
        }
      }
      return used == 0 ? 0.0 : sum / static_cast<double>(used);
    }
  }
  return 0.0;
}

//! String-label overload; labels must belong to the model's classes.
template <typename T>
double evaluate(const MaxEntModel& model, const Matrix<T>& x, std::span<const std::string> labels,
                Metric metric, const std::optional<std::string>& target = std::nullopt) {
  auto index_of = [&](const std::string& label) {
    auto it = std::find(model.classes.begin(), model.classes.end(), label);
    if (it == model.classes.end()) throw ValidationError("label \"" + label + "\" unseen by the model");
    return static_cast<std::size_t>(it - model.classes.begin());
  };
  std::vector<std::size_t> y;
  y.reserve(labels.size());
  for (const auto& l : labels) y.push_back(index_of(l));
  std::optional<std::size_t> t;
  if (target) t = index_of(*target);
  return evaluate(model, x, std::span<const std::size_t>(y), metric, t);
}

// ---------------------------------------------------------------------------
// Learning curves under an annotation budget.

struct ExperimentConfig {
  std::vector<std::size_t> budgets{100, 200, 300, 400, 500, 600, 700, 800, 900, 1000};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::size_t folds = 5;
  std::vector<double> l2_grid{1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
  Metric metric = Metric::accuracy;
  std::optional<std::string> target;
  std::string representation;
  std::string dataset_name;

  std::string dataset_path;
  std::string vectors_path;   // empty: bag-of-words built from dataset texts
  std::string test_ids_path;  // one id per line; empty: random split below
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;

  std::size_t workers = 0;  // 0: hardware concurrency
  std::size_t max_retries = 100;

  void validate() const {
    if (budgets.empty()) throw ValidationError("config: budgets must not be empty");
    for (std::size_t i = 0; i < budgets.size(); ++i) {
      if (budgets[i] == 0) throw ValidationError("config: budgets must be positive");
      if (i > 0 && budgets[i] <= budgets[i - 1]) {
        throw ValidationError("config: budgets must be strictly increasing");
      }
    }
    if (seeds.empty()) throw ValidationError("config: seeds must not be empty");
    if (folds < 2) throw ValidationError("config: folds must be >= 2");
    if (l2_grid.empty()) throw ValidationError("config: l2_grid must not be empty");
    for (double v : l2_grid) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("config: l2 values must be positive");
    }
    if (metric == Metric::f1 && !target) throw ValidationError("config: f1 metric needs a target");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
      throw ValidationError("config: test_fraction must lie in (0, 1)");
    }
  }
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{{"budgets", c.budgets},
                     {"seeds", c.seeds},
                     {"folds", c.folds},
                     {"l2_grid", c.l2_grid},
                     {"metric", to_string(c.metric)},
                     {"target", c.target ? nlohmann::json(*c.target) : nlohmann::json(nullptr)},
                     {"representation", c.representation},
                     {"dataset_name", c.dataset_name},
                     {"dataset", c.dataset_path},
                     {"vectors", c.vectors_path},
                     {"test_ids", c.test_ids_path},
                     {"test_fraction", c.test_fraction},
                     {"split_seed", c.split_seed},
                     {"workers", c.workers},
                     {"max_retries", c.max_retries}};
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  try {
    if (j.contains("budgets")) c.budgets = j.at("budgets").get<std::vector<std::size_t>>();
    if (j.contains("seeds")) {
      if (j.at("seeds").is_number_integer()) {
        c.seeds.resize(j.at("seeds").get<std::size_t>());
        std::iota(c.seeds.begin(), c.seeds.end(), std::uint64_t{0});
      } else {
        c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
      }
    }
    if (j.contains("folds")) c.folds = j.at("folds").get<std::size_t>();
    if (j.contains("l2_grid")) c.l2_grid = j.at("l2_grid").get<std::vector<double>>();
    if (j.contains("metric")) c.metric = parse_metric(j.at("metric").get<std::string>());
    if (j.contains("target") && !j.at("target").is_null()) c.target = j.at("target").get<std::string>();
    if (j.contains("representation")) c.representation = j.at("representation").get<std::string>();
    if (j.contains("dataset_name")) c.dataset_name = j.at("dataset_name").get<std::string>();
    if (j.contains("dataset")) c.dataset_path = j.at("dataset").get<std::string>();
    if (j.contains("vectors")) c.vectors_path = j.at("vectors").get<std::string>();
    if (j.contains("test_ids")) c.test_ids_path = j.at("test_ids").get<std::string>();
    if (j.contains("test_fraction")) c.test_fraction = j.at("test_fraction").get<double>();
    if (j.contains("split_seed")) c.split_seed = j.at("split_seed").get<std::uint64_t>();
    if (j.contains("workers")) c.workers = j.at("workers").get<std::size_t>();
    if (j.contains("max_retries")) c.max_retries = j.at("max_retries").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

//! Disjoint row sets: training pool and fixed test set.
struct Split {
  std::vector<std::size_t> pool;
  std::vector<std::size_t> test;
};

inline Split split_by_test_ids(const LabeledDataset& ds, const std::vector<std::string>& test_ids) {
  std::unordered_map<std::string, std::size_t> row;
  for (std::size_t i = 0; i < ds.size(); ++i) row.emplace(ds.ids()[i], i);
  std::vector<bool> is_test(ds.size(), false);
  for (const auto& id : test_ids) {
    auto it = row.find(id);
    if (it == row.end()) throw ValidationError("test id \"" + id + "\" not in dataset");
    is_test[it->second] = true;
  }
  Split s;
  for (std::size_t i = 0; i < ds.size(); ++i) (is_test[i] ? s.test : s.pool).push_back(i);
  return s;
}

inline Split random_split(std::size_t n, double test_fraction, std::uint64_t seed) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(rows.begin(), rows.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  Split s;
  s.test.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.pool.assign(rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.pool.begin(), s.pool.end());
  return s;
}

struct CellRecord {
  std::uint64_t seed = 0;
  std::size_t budget = 0;
  double chosen_l2 = 0.0;
  double cv_score = 0.0;
  double test_score = 0.0;
  std::size_t resamples = 0;  // budget draws rejected for a missing class

  nlohmann::json to_json() const {
    return {{"seed", seed},         {"N", budget},
            {"chosen_l2", chosen_l2}, {"cv_score", cv_score},
            {"test_score", test_score}, {"resamples", resamples}};
  }
};

struct LearningPoint {
  std::size_t budget = 0;
  double mean = 0.0;
  double std = 0.0;
};

struct LearningCurve {
  std::vector<LearningPoint> points;
  Metric metric = Metric::accuracy;
  double alc = 0.0;

  std::string to_csv() const {
    std::string out = "N,mean,std\n";
    for (const auto& p : points) {
      out += std::to_string(p.budget) + ',' + io::format_number(p.mean) + ',' +
             io::format_number(p.std) + '\n';
    }
    return out;
  }
};

//! Unweighted mean of the per-budget mean scores.
inline double area_under_learning_curve(std::span<const LearningPoint> points) {
  if (points.empty()) throw ValidationError("learning curve has no points");
  double s = 0.0;
  for (const auto& p : points) s += p.mean;
  return s / static_cast<double>(points.size());
}

struct LearningCurveResult {
  LearningCurve curve;
  std::vector<CellRecord> cells;  // seed-major, then budget
};

inline std::mt19937_64 cell_rng(std::uint64_t seed, std::size_t budget) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(budget)};
  return std::mt19937_64(seq);
}

//! Uniform draw of `budget` rows from the pool (without replacement).
inline std::vector<std::size_t> draw_budget(std::span<const std::size_t> pool, std::size_t budget,
                                            std::mt19937_64& rng) {
  if (budget > pool.size()) {
    throw ValidationError("budget " + std::to_string(budget) + " exceeds the training pool of " +
                          std::to_string(pool.size()));
  }
  std::vector<std::size_t> rows(pool.begin(), pool.end());
  for (std::size_t i = 0; i < budget; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, rows.size() - 1);
    std::swap(rows[i], rows[pick(rng)]);
  }
  rows.resize(budget);
  return rows;
}

//! fold[i] in [0, folds) for each of `count` items, balanced in size.
inline std::vector<std::size_t> assign_folds(std::size_t count, std::size_t folds,
                                             std::mt19937_64& rng) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> fold(count);
  for (std::size_t i = 0; i < count; ++i) fold[order[i]] = i % folds;
  return fold;
}

namespace detail {

inline bool covers_all(std::span<const std::size_t> y, std::size_t classes) {
  std::vector<bool> seen(classes, false);
  std::size_t distinct = 0;
  for (auto c : y) {
    if (!seen[c]) {
      seen[c] = true;
      ++distinct;
    }
  }
  return distinct == classes;
}

template <typename T>
CellRecord run_cell(const ExperimentConfig& cfg, const LabeledDataset& ds, const Matrix<T>& x,
                    const Split& split, std::uint64_t seed, std::size_t budget,
                    std::optional<std::size_t> target) {
  const auto& codes = ds.codes();
  const std::size_t classes = ds.class_count();
  auto rng = cell_rng(seed, budget);
  CellRecord rec;
  rec.seed = seed;
  rec.budget = budget;

  std::vector<std::size_t> sample, y;
  for (std::size_t attempt = 0;; ++attempt) {
    sample = draw_budget(split.pool, budget, rng);
    y.clear();
    for (auto r : sample) y.push_back(codes[r]);
    if (covers_all(y, classes)) break;
    if (attempt + 1 >= cfg.max_retries) {
      throw ValidationError("budget " + std::to_string(budget) + " (seed " + std::to_string(seed) +
                            "): no draw covering every class after " +
                            std::to_string(cfg.max_retries) + " attempts");
    }
    ++rec.resamples;
  }
  const auto xs = x.select_rows(sample);

  // Folds are redrawn until every training side sees every class.
  std::vector<std::size_t> fold;
  for (std::size_t attempt = 0;; ++attempt) {
    fold = assign_folds(budget, cfg.folds, rng);
    bool ok = true;
    for (std::size_t f = 0; f < cfg.folds && ok; ++f) {
      std::vector<std::size_t> train_y;
      for (std::size_t i = 0; i < budget; ++i) {
        if (fold[i] != f) train_y.push_back(y[i]);
      }
      ok = covers_all(train_y, classes);
    }
    if (ok) break;
    if (attempt + 1 >= cfg.max_retries) {
      throw ValidationError("budget " + std::to_string(budget) +
                            ": cannot form cross-validation folds covering every class");
    }
  }

  struct FoldData {
    Matrix<T> train_x, val_x;
    std::vector<std::size_t> train_y, val_y;
  };
  std::vector<FoldData> fold_data(cfg.folds);
  for (std::size_t f = 0; f < cfg.folds; ++f) {
    std::vector<std::size_t> tr, va;
    for (std::size_t i = 0; i < budget; ++i) {
      if (fold[i] == f) {
        va.push_back(i);
        fold_data[f].val_y.push_back(y[i]);
      } else {
        tr.push_back(i);
        fold_data[f].train_y.push_back(y[i]);
      }
    }
    fold_data[f].train_x = xs.select_rows(tr);
    fold_data[f].val_x = xs.select_rows(va);
  }

  double best = -std::numeric_limits<double>::infinity();
  for (double l2 : cfg.l2_grid) {
    double total = 0.0;
    for (const auto& fd : fold_data) {
      const auto model = train_maxent(fd.train_x, std::span<const std::size_t>(fd.train_y),
                                      ds.classes(), l2);
      total += evaluate(model, fd.val_x, std::span<const std::size_t>(fd.val_y), cfg.metric, target);
    }
    const double mean = total / static_cast<double>(cfg.folds);
    if (mean > best) {
      best = mean;
      rec.chosen_l2 = l2;
    }
  }
  rec.cv_score = best;

  const auto model = train_maxent(xs, std::span<const std::size_t>(y), ds.classes(), rec.chosen_l2);
  const auto xt = x.select_rows(split.test);
  std::vector<std::size_t> yt;
  for (auto r : split.test) yt.push_back(codes[r]);
  rec.test_score = evaluate(model, xt, std::span<const std::size_t>(yt), cfg.metric, target);
  return rec;
}

}  // namespace detail

//! Runs every (seed, budget) cell: uniform budget draw from the pool, k-fold
//! cross-validation over the l2 grid, refit on the whole draw, score on the
//! fixed test rows. Cells run on a bounded worker pool; results do not
//! depend on scheduling.
template <typename T>
LearningCurveResult learning_curve(const ExperimentConfig& cfg, const LabeledDataset& ds,
                                   const Matrix<T>& x, const Split& split) {
  cfg.validate();
  if (x.rows() != ds.size()) {
    throw ValidationError("vectors have " + std::to_string(x.rows()) + " rows but dataset has " +
                          std::to_string(ds.size()) + " samples");
  }
  if (split.test.empty()) throw ValidationError("test split is empty");
  {
    std::vector<bool> in_pool(ds.size(), false);
    for (auto r : split.pool) in_pool.at(r) = true;
    for (auto r : split.test) {
      if (in_pool.at(r)) throw ValidationError("test rows overlap the training pool");
    }
  }
  for (auto b : cfg.budgets) {
    if (b > split.pool.size()) {
      throw ValidationError("budget " + std::to_string(b) + " exceeds the training pool of " +
                            std::to_string(split.pool.size()));
    }
  }
  std::optional<std::size_t> target;
  if (cfg.target) {
    target = ds.class_index(*cfg.target);
    if (!target) throw ValidationError("target label \"" + *cfg.target + "\" not in dataset");
  }

  const std::size_t n_cells = cfg.seeds.size() * cfg.budgets.size();
  std::vector<CellRecord> cells(n_cells);
  std::vector<std::exception_ptr> errors(n_cells);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c; (c = next.fetch_add(1)) < n_cells;) {
      try {
        cells[c] = detail::run_cell(cfg, ds, x, split, cfg.seeds[c / cfg.budgets.size()],
                                    cfg.budgets[c % cfg.budgets.size()], target);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  std::size_t workers = cfg.workers ? cfg.workers : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, n_cells);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  LearningCurveResult result;
  result.curve.metric = cfg.metric;
  for (std::size_t b = 0; b < cfg.budgets.size(); ++b) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t s = 0; s < cfg.seeds.size(); ++s) sum += cells[s * cfg.budgets.size() + b].test_score;
    const double m = static_cast<double>(cfg.seeds.size());
    const double mean = sum / m;
    for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
      const double dv = cells[s * cfg.budgets.size() + b].test_score - mean;
      sq += dv * dv;
    }
    result.curve.points.push_back({cfg.budgets[b], mean, cfg.seeds.size() > 1 ? std::sqrt(sq / (m - 1.0)) : 0.0});
  }
  result.curve.alc = area_under_learning_curve(result.curve.points);
  result.cells = std::move(cells);
  return result;
}

//! Sample Pearson correlation coefficient.
inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ValidationError("pearson: inputs differ in length");
  if (xs.size() < 3) throw ValidationError("pearson: needs at least 3 points");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw NumericError("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace sam

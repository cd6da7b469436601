// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
// fails. An optional argument restricts the run to criteria whose name
// contains it.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sam/alignment.hpp"
#include "sam/budget.hpp"
#include "sam/cluster_quality.hpp"
#include "sam/hierclust.hpp"

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Tolerances and limits.
constexpr double kHeightTol = 1e-9;
constexpr double kEndpointTol = 1e-12;
constexpr double kAprcTol = 1e-9;
constexpr double kDbiFixtureTol = 1e-12;
constexpr double kDbiOracleTol = 1e-9;
constexpr double kGradientTol = 1e-5;
constexpr double kMinCorrelation = 0.8;
constexpr int kMinShuffleWins = 99;
constexpr double kOracleSeconds = 30.0;
constexpr double kLadderSeconds = 600.0;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

Outcome ward_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1001);
  std::size_t pair_mismatch = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 63;
    const std::size_t d = 1 + rng() % 8;
    const auto x = oracle::random_matrix(n, d, rng);
    const auto fast = sam::ward_linkage(x).merges();
    const auto slow = oracle::ward(x);
    for (std::size_t i = 0; i < slow.size(); ++i) {
      if (fast[i].left != slow[i].left || fast[i].right != slow[i].right || fast[i].size != slow[i].size)
        ++pair_mismatch;
      worst = std::max(worst, std::abs(fast[i].height - slow[i].height));
    }
  }
  const double secs = seconds_since(t0);
  return {pair_mismatch == 0 && worst <= kHeightTol && secs < kOracleSeconds,
          "200 datasets, pair mismatches " + std::to_string(pair_mismatch) + ", max height error " + fmt(worst) +
              ", " + fmt(secs) + " s"};
}

Outcome monotonicity() {
  std::mt19937_64 rng(1002);
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    const std::size_t d = 1 + rng() % 16;
    // Mix continuous data with heavily duplicated integer grids.
    sam::Matrix<double> x = oracle::random_matrix(n, d, rng);
    if (trial % 2) {
      for (auto& v : x.values()) v = std::round(v * 2.0);
    }
    const auto merges = sam::ward_linkage(x).merges();
    for (std::size_t i = 1; i < merges.size(); ++i) violations += merges[i].height < merges[i - 1].height;
  }
  return {violations == 0, "1000 instances, violations " + std::to_string(violations)};
}

Outcome sam_endpoints() {
  std::mt19937_64 rng(1003);
  std::size_t top_misses = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 10 + rng() % 300;
    const std::size_t classes = 2 + rng() % 4;
    const auto x = oracle::random_matrix(n, 1 + rng() % 6, rng);
    std::vector<std::string> ids, labels;
    for (std::size_t i = 0; i < n; ++i) {
      ids.push_back(std::to_string(i));
      labels.push_back("c" + std::to_string(i < classes ? i : rng() % classes));
    }
    const sam::LabeledDataset ds(ids, labels);
    const auto d = sam::ward_linkage(x);
    const std::string target = "c" + std::to_string(rng() % classes);
    const double prevalence =
        static_cast<double>(std::count(labels.begin(), labels.end(), target)) / static_cast<double>(n);
    const auto t = sam::alignment_curve(d, ds, {1, n}, sam::AlignmentMode::target, target);
    const auto b = sam::alignment_curve(d, ds, {1, n}, sam::AlignmentMode::balanced);
    top_misses += t.points.back().value != 1.0;
    top_misses += b.points.back().value != 1.0;
    worst = std::max(worst, std::abs(t.points.front().value - prevalence));
  }
  return {top_misses == 0 && worst <= kEndpointTol,
          "100 datasets, a(p_n) != 1 in " + std::to_string(top_misses) + " curves, max |a(p_1) - prevalence| " +
              fmt(worst)};
}

Outcome aprc_cases() {
  double worst_hand = 0.0;
  worst_hand = std::max(worst_hand, std::abs(sam::aprc(std::vector<double>{0.9, 0.8, 0.2, 0.1},
                                                       {true, true, false, false}) -
                                             1.0));
  std::vector<bool> gold(10, false);
  gold[2] = gold[5] = gold[7] = true;
  worst_hand = std::max(worst_hand, std::abs(sam::aprc(std::vector<double>(10, 0.4), gold) - 0.3));
  worst_hand = std::max(worst_hand, std::abs(sam::aprc(std::vector<double>{0.9, 0.8, 0.7, 0.6},
                                                       {true, false, true, false}) -
                                             (1.0 + 2.0 / 3.0) / 2.0));

  std::mt19937_64 rng(1004);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 200;
    const bool coarse = trial % 2 == 0;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> scores(n);
    std::vector<bool> g(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = coarse ? std::floor(u(rng) * 6.0) / 6.0 : u(rng);
      g[i] = u(rng) < 0.3;
    }
    g[rng() % n] = true;
    worst = std::max(worst, std::abs(sam::aprc(scores, g) - oracle::aprc_all_thresholds(scores, g)));
  }
  return {worst_hand <= kAprcTol && worst <= kAprcTol,
          "hand cases max error " + fmt(worst_hand) + ", 500 random max error " + fmt(worst)};
}

Outcome dbi_cases() {
  const auto fixture = sam::Matrix<double>::from_rows({{0, 0}, {0, 1}, {10, 0}, {10, 1}});
  const double hand = sam::dbi(fixture, sam::make_partition({0, 0, 1, 1}));
  std::mt19937_64 rng(1005);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 4 + rng() % 150;
    const std::size_t k = 2 + rng() % std::min<std::size_t>(n - 2, 12);
    const auto x = oracle::random_matrix(n, 1 + rng() % 8, rng);
    std::vector<std::size_t> assign(n);
    for (std::size_t i = 0; i < n; ++i) assign[i] = i < k ? i : rng() % k;
    std::shuffle(assign.begin(), assign.end(), rng);
    worst = std::max(worst, std::abs(sam::dbi(x, sam::make_partition(assign)) - oracle::dbi(x, assign)));
  }
  return {std::abs(hand - 0.1) <= kDbiFixtureTol && worst <= kDbiOracleTol,
          "fixture " + fmt(hand) + ", 200 random partitions max error " + fmt(worst)};
}

Outcome gradient_check() {
  std::mt19937_64 rng(1006);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  std::size_t loss_increases = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + rng() % 60, d = 1 + rng() % 8, L = 2 + rng() % 4;
    const auto x = oracle::random_matrix(n, d, rng);
    std::vector<std::size_t> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = i < L ? i : rng() % L;
    const double l2 = std::pow(10.0, -4.0 + static_cast<double>(rng() % 7));
    const sam::MaxEntObjective f(x, y, L, l2);
    std::vector<double> theta(f.parameter_count()), grad(theta.size()), scratch(theta.size());
    for (auto& t : theta) t = g(rng);
    f(theta, grad);
    for (std::size_t p = 0; p < theta.size(); ++p) {
      auto plus = theta, minus = theta;
      const double h = 1e-5 * std::max(1.0, std::abs(theta[p]));
      plus[p] += h;
      minus[p] -= h;
      const double numeric = (f(plus, scratch) - f(minus, scratch)) / (2.0 * h);
      worst = std::max(worst, std::abs(numeric - grad[p]) / std::max(1.0, std::abs(numeric)));
    }
    std::vector<std::string> classes;
    for (std::size_t l = 0; l < L; ++l) classes.push_back(std::to_string(l));
    const auto model = sam::train_maxent(x, std::span<const std::size_t>(y), classes, l2);
    loss_increases += model.stats.final_loss > model.stats.initial_loss;
  }
  return {worst < kGradientTol && loss_increases == 0,
          "50 problems, max relative error " + fmt(worst) + ", final > initial loss in " +
              std::to_string(loss_increases)};
}

// Labeled blob data: each class owns two sub-blobs on random directions, so
// the class structure is visible to Ward but not linearly trivial.
struct LabeledBlobs {
  sam::Matrix<double> x;
  std::vector<std::string> labels;
};

LabeledBlobs labeled_blobs(std::size_t n, std::size_t classes, std::size_t d, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::size_t sub = 2 * classes;
  std::vector<std::vector<double>> centres(sub, std::vector<double>(d));
  for (auto& c : centres)
    for (auto& v : c) v = spread * g(rng);
  LabeledBlobs out{sam::Matrix<double>(n, d), {}};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = i % sub;
    for (std::size_t j = 0; j < d; ++j) out.x(i, j) = centres[b][j] + g(rng);
    out.labels.push_back("c" + std::to_string(b % classes));
  }
  return out;
}

Outcome noise_ladder() {
  const auto t0 = Clock::now();
  constexpr std::size_t kPool = 1000, kTest = 500;
  const auto data = labeled_blobs(kPool + kTest, 4, 12, 1.6, 1007);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < kPool + kTest; ++i) ids.push_back("r" + std::to_string(i));
  const sam::LabeledDataset ds(ids, data.labels);
  sam::Split split;
  for (std::size_t i = 0; i < kPool + kTest; ++i) (i < kPool ? split.pool : split.test).push_back(i);
  const sam::LabeledDataset pool_ds = ds.subset(split.pool);

  sam::ExperimentConfig cfg;  // budgets 100..1000, 5 seeds, 5 folds, 7 l2 values
  const std::vector<double> sigmas = {0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0};
  std::vector<double> sams, alcs;
  std::string table;
  for (std::size_t r = 0; r < sigmas.size(); ++r) {
    const auto x = fixture::add_noise(data.x, sigmas[r], 2000 + r).cast<float>();
    const auto pool_x = x.select_rows(split.pool);
    const auto curve = sam::alignment_curve(sam::ward_linkage(pool_x), pool_ds,
                                            sam::make_grid(sam::GridKind::automatic, kPool, 1, kPool),
                                            sam::AlignmentMode::balanced);
    const auto lc = sam::learning_curve(cfg, ds, x, split);
    sams.push_back(curve.sam);
    alcs.push_back(lc.curve.alc);
    table += " [sigma " + fmt(sigmas[r]) + ": SAM " + fmt(curve.sam) + ", ALC " + fmt(lc.curve.alc) + "]";
  }
  const double r = sam::pearson(sams, alcs);
  const bool ranking = (sams.front() > sams.back()) == (alcs.front() > alcs.back());
  const double secs = seconds_since(t0);
  return {r > kMinCorrelation && ranking && secs < kLadderSeconds,
          "r(SAM, ALC) " + fmt(r) + ", ranking " + (ranking ? "matches" : "differs") + ", " + fmt(secs) + " s;" +
              table};
}

Outcome shuffle_trials() {
  const auto data = labeled_blobs(400, 2, 8, 3.0, 1008);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < data.labels.size(); ++i) ids.push_back(std::to_string(i));
  const auto d = sam::ward_linkage(data.x);
  const auto grid = sam::make_grid(sam::GridKind::automatic, 400, 1, 400);
  const double aligned =
      sam::alignment_curve(d, sam::LabeledDataset(ids, data.labels), grid, sam::AlignmentMode::balanced).sam;
  std::mt19937_64 rng(1009);
  int wins = 0;
  double best_shuffled = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto labels = data.labels;
    std::shuffle(labels.begin(), labels.end(), rng);
    const double s = sam::alignment_curve(d, sam::LabeledDataset(ids, labels), grid, sam::AlignmentMode::balanced).sam;
    wins += aligned > s;
    best_shuffled = std::max(best_shuffled, s);
  }
  return {wins >= kMinShuffleWins, "aligned SAM " + fmt(aligned) + " beats shuffled in " + std::to_string(wins) +
                                       "/100, best shuffled " + fmt(best_shuffled)};
}

Outcome cli_determinism() {
  oracle::TempDir dir;
  std::mt19937_64 rng(1010);
  const auto blobs = oracle::make_blobs(3, 40, 4, 5.0, 1.0, rng);
  const auto labels = fixture::blob_labels(blobs.blob, 3);
  std::vector<fixture::Files> reps;
  for (std::size_t i = 0; i < 3; ++i)
    reps.push_back(fixture::write_labeled_vectors(dir.path(), "rep" + std::to_string(i),
                                                  fixture::add_noise(blobs.x, 1.5 * static_cast<double>(i), 50 + i),
                                                  labels));
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < labels.size(); ++i) texts.push_back(labels[i] + " word" + std::to_string(i % 7));
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < labels.size(); ++i) ids.push_back("doc" + std::to_string(i));
  sam::io::write_file_atomic(dir / "texts.jsonl", sam::to_jsonl(sam::LabeledDataset(ids, labels, texts)));

  struct Run {
    std::vector<std::string> args;
    fs::path manifest;
    std::vector<std::string> csvs;  // relative to the output directory
    std::string out_file = {};      // bow writes to a file path rather than a directory
  };
  std::vector<Run> runs;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    const std::string rep = "rep" + std::to_string(i);
    const auto sam_dir = dir / ("sam-" + rep), dbi_dir = dir / ("dbi-" + rep), lc_dir = dir / ("lc-" + rep);
    runs.push_back({{"sam", "--vectors", reps[i].vectors, "--labels", reps[i].labels, "--out", sam_dir,
                     "--dendrogram", "--dataset-name", "blobs", "--representation", rep},
                    sam_dir / "manifest.json",
                    {"curve.csv", "dendrogram.csv"}});
    runs.push_back({{"dbi", "--vectors", reps[i].vectors, "--out", dbi_dir, "--k-max", "30", "--dataset-name",
                     "blobs", "--representation", rep},
                    dbi_dir / "manifest.json",
                    {"dbi.csv"}});
    const nlohmann::json cfg = {{"dataset", reps[i].labels.string()}, {"vectors", reps[i].vectors.string()},
                                {"budgets", {15, 30, 60}},           {"seeds", 3},
                                {"folds", 3},                        {"l2_grid", {0.01, 1.0}},
                                {"dataset_name", "blobs"},           {"representation", rep}};
    sam::io::write_file_atomic(dir / (rep + ".json"), cfg.dump());
    runs.push_back({{"lc", "--config", dir / (rep + ".json"), "--out", lc_dir}, lc_dir / "manifest.json", {"curve.csv"}});
  }
  runs.push_back({{"bow", "--input", dir / "texts.jsonl", "--out", dir / "bow" / "bow.samv"},
                  dir / "bow" / "bow.samv.manifest.json",
                  {"bow.samv.labels.tsv"},
                  "bow.samv"});
  runs.push_back({{"correlate", "--summaries", (dir / "*/summary.json").string(), "--out", dir / "cor"},
                  dir / "cor" / "manifest.json",
                  {"scatter.csv"}});

  std::size_t compared = 0, differing = 0;
  for (const auto& run : runs) {
    const auto first = fixture::samkit(run.args);
    if (first.exit_code != 0) return {false, run.args[0] + " failed: " + first.output};
    const auto redo = dir / "rerun";
    fs::remove_all(redo);
    const auto again = fixture::samkit(
        {"rerun", "--manifest", run.manifest, "--out", run.out_file.empty() ? redo : redo / run.out_file});
    if (again.exit_code != 0) return {false, "rerun of " + run.args[0] + " failed: " + again.output};
    const auto origin = run.manifest.parent_path();
    for (const auto& name : run.csvs) {
      ++compared;
      differing += fixture::slurp(origin / name) != fixture::slurp(redo / name);
    }
    if (run.args[0] == "bow") {
      ++compared;
      differing += fixture::slurp(origin / "bow.samv") != fixture::slurp(redo / "bow.samv");
    }
  }
  return {differing == 0,
          std::to_string(runs.size()) + " runs over 5 commands, " + std::to_string(compared) + " files compared, " +
              std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string filter = argc > 1 ? argv[1] : "";
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"ward-oracle-equivalence", ward_oracle},
      {"dendrogram-monotonicity", monotonicity},
      {"sam-endpoint-exactness", sam_endpoints},
      {"aprc-hand-cases-and-oracle", aprc_cases},
      {"dbi-hand-case-and-oracle", dbi_cases},
      {"maxent-gradient-check", gradient_check},
      {"noise-ladder-sam-vs-alc", noise_ladder},
      {"aligned-vs-shuffled-labels", shuffle_trials},
      {"cli-rerun-determinism", cli_determinism},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    if (!filter.empty() && name.find(filter) == std::string::npos) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}

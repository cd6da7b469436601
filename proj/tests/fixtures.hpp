#pragma once

// On-disk fixtures and a thin process runner for exercising the samkit binary.

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sam/dataset.hpp"
#include "sam/io.hpp"

namespace fixture {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

inline std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

inline RunResult samkit(const std::vector<std::string>& args) {
  std::string cmd = quote(SAMKIT_BINARY);
  for (const auto& a : args) cmd += ' ' + quote(a);
  cmd += " 2>&1";
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  for (std::size_t got; (got = std::fread(buf, 1, sizeof buf, pipe)) > 0;) r.output.append(buf, got);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string slurp(const fs::path& p) { return sam::io::read_file(p); }

// Writes <stem>.jsonl (ids and labels) next to <stem>.samv and returns both paths.
struct Files {
  fs::path labels, vectors;
};

inline Files write_labeled_vectors(const fs::path& dir, const std::string& stem, const sam::Matrix<double>& x,
                                   const std::vector<std::string>& labels) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < labels.size(); ++i) ids.push_back("doc" + std::to_string(i));
  const sam::LabeledDataset ds(ids, labels);
  Files f{dir / (stem + ".jsonl"), dir / (stem + ".samv")};
  sam::io::write_file_atomic(f.labels, sam::to_jsonl(ds));
  sam::save_vectors(f.vectors, x.cast<float>());
  return f;
}

inline std::vector<std::string> blob_labels(const std::vector<std::size_t>& blob, std::size_t classes) {
  std::vector<std::string> out;
  for (auto b : blob) out.push_back("c" + std::to_string(b % classes));
  return out;
}

// Adds isotropic Gaussian noise of the given scale to every entry.
inline sam::Matrix<double> add_noise(const sam::Matrix<double>& x, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  auto y = x;
  for (auto& v : y.values()) v += g(rng);
  return y;
}

}  // namespace fixture

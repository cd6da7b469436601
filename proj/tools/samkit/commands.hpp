#pragma once

// Subcommand implementations for the samkit binary. Each command takes a
// plain options struct that round-trips through JSON, so a run can be
// replayed from its manifest.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <glob.h>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "sam/alignment.hpp"
#include "sam/budget.hpp"
#include "sam/cluster_quality.hpp"
#include "sam/dataset.hpp"
#include "sam/hierclust.hpp"
#include "sam/io.hpp"
#include "sam/manifest.hpp"
#include "sam/svg.hpp"

namespace samkit {

namespace fs = std::filesystem;
using nlohmann::json;

inline std::string grid_name(sam::GridKind g) { return g == sam::GridKind::full ? "full" : "auto"; }

inline sam::GridKind parse_grid(const std::string& s) {
  if (s == "full") return sam::GridKind::full;
  if (s == "auto") return sam::GridKind::automatic;
  throw sam::ValidationError("unknown grid \"" + s + "\" (expected full or auto)");
}

struct SamOptions {
  std::string vectors;
  std::string labels;
  std::string mode = "balanced";
  std::optional<std::string> target;
  std::size_t k_min = 1;
  std::size_t k_max = 0;  // 0: n
  std::string grid = "auto";
  std::string out;
  bool svg = false;
  bool dendrogram = false;
  std::size_t max_samples = 10000;
  std::uint64_t seed = 0;
  std::string dataset_name;
  std::string representation;
};

inline json to_json(const SamOptions& o) {
  return {{"vectors", o.vectors},     {"labels", o.labels},
          {"mode", o.mode},           {"target", o.target ? json(*o.target) : json(nullptr)},
          {"k_min", o.k_min},         {"k_max", o.k_max},
          {"grid", o.grid},           {"out", o.out},
          {"svg", o.svg},             {"dendrogram", o.dendrogram},
          {"max_samples", o.max_samples}, {"seed", o.seed},
          {"dataset_name", o.dataset_name}, {"representation", o.representation}};
}

inline void from_json(const json& j, SamOptions& o) {
  o.vectors = j.at("vectors").get<std::string>();
  o.labels = j.at("labels").get<std::string>();
  o.mode = j.at("mode").get<std::string>();
  o.target = j.at("target").is_null() ? std::nullopt
                                      : std::optional<std::string>(j.at("target").get<std::string>());
  o.k_min = j.at("k_min").get<std::size_t>();
  o.k_max = j.at("k_max").get<std::size_t>();
  o.grid = j.at("grid").get<std::string>();
  o.out = j.at("out").get<std::string>();
  o.svg = j.at("svg").get<bool>();
  o.dendrogram = j.at("dendrogram").get<bool>();
  o.max_samples = j.at("max_samples").get<std::size_t>();
  o.seed = j.at("seed").get<std::uint64_t>();
  o.dataset_name = j.at("dataset_name").get<std::string>();
  o.representation = j.at("representation").get<std::string>();
}

struct DbiOptions {
  std::string vectors;
  std::string labels;  // optional; only used to check row alignment
  std::size_t k_min = 2;
  std::size_t k_max = 0;  // 0: n
  std::string grid = "auto";
  std::string out;
  bool svg = false;
  std::size_t max_samples = 10000;
  std::uint64_t seed = 0;
  std::string dataset_name;
  std::string representation;
};

inline json to_json(const DbiOptions& o) {
  return {{"vectors", o.vectors}, {"labels", o.labels}, {"k_min", o.k_min},
          {"k_max", o.k_max},     {"grid", o.grid},     {"out", o.out},
          {"svg", o.svg},         {"max_samples", o.max_samples}, {"seed", o.seed},
          {"dataset_name", o.dataset_name}, {"representation", o.representation}};
}

inline void from_json(const json& j, DbiOptions& o) {
  o.vectors = j.at("vectors").get<std::string>();
  o.labels = j.at("labels").get<std::string>();
  o.k_min = j.at("k_min").get<std::size_t>();
  o.k_max = j.at("k_max").get<std::size_t>();
  o.grid = j.at("grid").get<std::string>();
  o.out = j.at("out").get<std::string>();
  o.svg = j.at("svg").get<bool>();
  o.max_samples = j.at("max_samples").get<std::size_t>();
  o.seed = j.at("seed").get<std::uint64_t>();
  o.dataset_name = j.at("dataset_name").get<std::string>();
  o.representation = j.at("representation").get<std::string>();
}

struct LcOptions {
  std::string config_path;
  sam::ExperimentConfig config;
  std::string out;
  bool svg = false;
};

inline json to_json(const LcOptions& o) {
  return {{"config_path", o.config_path}, {"config", json(o.config)}, {"out", o.out}, {"svg", o.svg}};
}

inline void from_json(const json& j, LcOptions& o) {
  o.config_path = j.at("config_path").get<std::string>();
  o.config = j.at("config").get<sam::ExperimentConfig>();
  o.out = j.at("out").get<std::string>();
  o.svg = j.at("svg").get<bool>();
}

struct BowOptions {
  std::string input;
  std::string out;
};

inline json to_json(const BowOptions& o) { return {{"input", o.input}, {"out", o.out}}; }

inline void from_json(const json& j, BowOptions& o) {
  o.input = j.at("input").get<std::string>();
  o.out = j.at("out").get<std::string>();
}

struct CorrelateOptions {
  std::string summaries;  // glob pattern
  std::string out;
};

inline json to_json(const CorrelateOptions& o) { return {{"summaries", o.summaries}, {"out", o.out}}; }

inline void from_json(const json& j, CorrelateOptions& o) {
  o.summaries = j.at("summaries").get<std::string>();
  o.out = j.at("out").get<std::string>();
}

// ---------------------------------------------------------------------------

namespace detail {

inline void write(const fs::path& path, std::string_view contents) {
  sam::io::write_file_atomic(path, contents);
}

inline void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw sam::IoError("cannot create directory " + dir.string());
}

inline void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw sam::ValidationError(std::string("missing --") + what);
  if (!fs::is_regular_file(path)) throw sam::IoError(std::string(what) + " file not found: " + path);
}

inline std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

// Sorted uniform subset of rows when n exceeds the cap, else all rows.
inline std::vector<std::size_t> subsample(std::size_t n, std::size_t cap, std::uint64_t seed) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (cap == 0 || n <= cap) return rows;
  std::mt19937_64 rng(seed);
  std::shuffle(rows.begin(), rows.end(), rng);
  rows.resize(cap);
  std::sort(rows.begin(), rows.end());
  return rows;
}

// Vector ids (CSV input) must match the label file's ids row by row.
inline sam::EmbeddingMatrix load_vectors_for(const std::string& path,
                                             const std::optional<sam::LabeledDataset>& labels) {
  const auto bytes = sam::io::read_file(path);
  sam::EmbeddingMatrix m;
  try {
    if (bytes.starts_with("id,")) {
      auto table = sam::parse_vector_csv(bytes);
      if (labels && table.ids != labels->ids()) {
        throw sam::ValidationError("vector ids do not match label ids row by row");
      }
      m = std::move(table.matrix);
    } else {
      m = sam::decode_vectors(bytes);
    }
  } catch (const sam::ValidationError& e) {
    throw sam::ValidationError(path + ": " + e.what());
  }
  if (labels && m.rows() != labels->size()) {
    throw sam::ValidationError(path + " has " + std::to_string(m.rows()) + " rows but labels have " +
                               std::to_string(labels->size()));
  }
  return m;
}

inline sam::RunManifest begin_manifest(const std::string& command, json options) {
  sam::RunManifest m;
  m.command = command;
  m.options = std::move(options);
  m.started = sam::utc_timestamp();
  return m;
}

inline void finish_manifest(sam::RunManifest& m, const fs::path& path) {
  m.finished = sam::utc_timestamp();
  write(path, m.to_json().dump(2) + "\n");
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline int run_sam(const SamOptions& o, std::ostream& out) {
  detail::require_file(o.vectors, "vectors");
  detail::require_file(o.labels, "labels");
  if (o.out.empty()) throw sam::ValidationError("missing --out");
  const auto mode = sam::parse_alignment_mode(o.mode);
  const auto grid_kind = parse_grid(o.grid);
  if (mode == sam::AlignmentMode::target && !o.target) {
    throw sam::ValidationError("--mode target requires --target");
  }
  auto manifest = detail::begin_manifest("sam", to_json(o));
  manifest.add_input(o.vectors);
  manifest.add_input(o.labels);
  manifest.seeds = {o.seed};

  const auto full = sam::load_dataset(o.labels);
  const auto matrix_full = detail::load_vectors_for(o.vectors, full);
  const auto rows = detail::subsample(full.size(), o.max_samples, o.seed);
  const auto dataset = full.subset(rows);
  const auto matrix = matrix_full.select_rows(rows);
  const std::size_t n = dataset.size();
  const std::size_t k_max = o.k_max == 0 ? n : o.k_max;

  const auto dendrogram = sam::ward_linkage(matrix);
  const auto grid = sam::make_grid(grid_kind, n, o.k_min, k_max);
  const auto curve = sam::alignment_curve(dendrogram, dataset, grid, mode, o.target);

  json summary = {{"kind", "sam"},
                  {"mode", sam::to_string(mode)},
                  {"target", curve.target ? json(*curve.target) : json(nullptr)},
                  {"k_min", curve.k_min},
                  {"k_max", curve.k_max},
                  {"sam", curve.sam},
                  {"n", n},
                  {"seed", o.seed},
                  {"grid", o.grid},
                  {"grid_points", curve.points.size()},
                  {"dataset", o.dataset_name.empty() ? detail::stem_of(o.labels) : o.dataset_name},
                  {"representation",
                   o.representation.empty() ? detail::stem_of(o.vectors) : o.representation}};

  const fs::path dir(o.out);
  detail::make_dir(dir);
  detail::write(dir / "curve.csv", curve.to_csv());
  detail::write(dir / "summary.json", summary.dump(2) + "\n");
  if (o.dendrogram) detail::write(dir / "dendrogram.csv", dendrogram.to_csv());
  if (o.svg) {
    sam::svg::Series s{summary["representation"].get<std::string>(), {}, {}};
    for (const auto& p : curve.points) {
      s.x.push_back(static_cast<double>(p.k));
      s.y.push_back(p.value);
    }
    detail::write(dir / "curve.svg",
                  sam::svg::render({s}, {"Alignment curve", "number of clusters k", "a(p_k)"}));
  }
  detail::finish_manifest(manifest, dir / "manifest.json");
  out << sam::io::format_number(curve.sam) << '\n';
  return 0;
}

inline int run_dbi(const DbiOptions& o, std::ostream& out) {
  detail::require_file(o.vectors, "vectors");
  if (!o.labels.empty()) detail::require_file(o.labels, "labels");
  if (o.out.empty()) throw sam::ValidationError("missing --out");
  const auto grid_kind = parse_grid(o.grid);
  auto manifest = detail::begin_manifest("dbi", to_json(o));
  manifest.add_input(o.vectors);
  if (!o.labels.empty()) manifest.add_input(o.labels);
  manifest.seeds = {o.seed};

  std::optional<sam::LabeledDataset> labels;
  if (!o.labels.empty()) labels = sam::load_dataset(o.labels);
  const auto matrix_full = detail::load_vectors_for(o.vectors, labels);
  const auto rows = detail::subsample(matrix_full.rows(), o.max_samples, o.seed);
  const auto matrix = matrix_full.select_rows(rows);
  const std::size_t n = matrix.rows();
  const std::size_t k_max = o.k_max == 0 ? n : o.k_max;
  if (o.k_min < 2) throw sam::ValidationError("Davies-Bouldin grid must start at k >= 2");

  const auto dendrogram = sam::ward_linkage(matrix);
  const auto grid = sam::make_grid(grid_kind, n, o.k_min, k_max);
  const auto curve = sam::dbi_curve(matrix, dendrogram, grid);
  for (auto k : curve.skipped) {
    std::cerr << "warning: skipped k = " << k << " (coincident centroids)\n";
  }

  json summary = {{"kind", "dbi"},
                  {"area", curve.area},
                  {"grid", {{"kind", o.grid}, {"k_min", o.k_min}, {"k_max", k_max},
                            {"points", curve.points.size()}}},
                  {"skipped", curve.skipped},
                  {"n", n},
                  {"seed", o.seed},
                  {"dataset", o.dataset_name.empty()
                                  ? (o.labels.empty() ? detail::stem_of(o.vectors) : detail::stem_of(o.labels))
                                  : o.dataset_name},
                  {"representation",
                   o.representation.empty() ? detail::stem_of(o.vectors) : o.representation}};

  const fs::path dir(o.out);
  detail::make_dir(dir);
  detail::write(dir / "dbi.csv", curve.to_csv());
  detail::write(dir / "summary.json", summary.dump(2) + "\n");
  if (o.svg) {
    sam::svg::Series s{summary["representation"].get<std::string>(), {}, {}};
    for (const auto& p : curve.points) {
      s.x.push_back(static_cast<double>(p.k));
      s.y.push_back(p.value);
    }
    sam::svg::PlotOptions plot{"Davies-Bouldin index (inverted y-axis)", "number of clusters k", "DBI"};
    plot.invert_y = true;
    detail::write(dir / "dbi.svg", sam::svg::render({s}, plot));
  }
  detail::finish_manifest(manifest, dir / "manifest.json");
  out << sam::io::format_number(curve.area) << '\n';
  return 0;
}

inline LcOptions load_lc_options(const std::string& config_path, const std::string& out, bool svg) {
  detail::require_file(config_path, "config");
  json j;
  try {
    j = json::parse(sam::io::read_file(config_path));
  } catch (const json::parse_error& e) {
    throw sam::ValidationError(config_path + ": " + e.what());
  }
  LcOptions o;
  o.config_path = config_path;
  sam::from_json(j, o.config);
  // Relative data paths resolve against the config file's directory.
  const auto base = fs::path(config_path).parent_path();
  for (auto* p : {&o.config.dataset_path, &o.config.vectors_path, &o.config.test_ids_path}) {
    if (!p->empty() && fs::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  }
  o.out = out;
  o.svg = svg;
  return o;
}

inline int run_lc(const LcOptions& o, std::ostream& out) {
  const auto& cfg = o.config;
  cfg.validate();
  if (o.out.empty()) throw sam::ValidationError("missing --out");
  detail::require_file(cfg.dataset_path, "dataset");
  if (!cfg.vectors_path.empty()) detail::require_file(cfg.vectors_path, "vectors");
  if (!cfg.test_ids_path.empty()) detail::require_file(cfg.test_ids_path, "test_ids");

  auto manifest = detail::begin_manifest("lc", to_json(o));
  if (!o.config_path.empty() && fs::exists(o.config_path)) manifest.add_input(o.config_path);
  manifest.add_input(cfg.dataset_path);
  if (!cfg.vectors_path.empty()) manifest.add_input(cfg.vectors_path);
  if (!cfg.test_ids_path.empty()) manifest.add_input(cfg.test_ids_path);
  manifest.seeds = cfg.seeds;

  const auto dataset = sam::load_dataset(cfg.dataset_path);
  const auto vectors = cfg.vectors_path.empty() ? sam::build_bow(dataset).first
                                                : detail::load_vectors_for(cfg.vectors_path, dataset);
  sam::Split split;
  if (!cfg.test_ids_path.empty()) {
    std::vector<std::string> ids;
    for (auto line : sam::io::lines(sam::io::read_file(cfg.test_ids_path))) {
      if (!line.empty()) ids.emplace_back(line);
    }
    split = sam::split_by_test_ids(dataset, ids);
  } else {
    split = sam::random_split(dataset.size(), cfg.test_fraction, cfg.split_seed);
  }

  const auto result = sam::learning_curve(cfg, dataset, vectors, split);

  std::string cells;
  for (const auto& c : result.cells) cells += c.to_json().dump() + "\n";
  const std::string representation =
      cfg.representation.empty()
          ? (cfg.vectors_path.empty() ? "bow" : detail::stem_of(cfg.vectors_path))
          : cfg.representation;
  json summary = {{"kind", "lc"},
                  {"alc", result.curve.alc},
                  {"metric", sam::to_string(cfg.metric)},
                  {"target", cfg.target ? json(*cfg.target) : json(nullptr)},
                  {"representation", representation},
                  {"dataset", cfg.dataset_name.empty() ? detail::stem_of(cfg.dataset_path) : cfg.dataset_name},
                  {"budgets", cfg.budgets},
                  {"seeds", cfg.seeds},
                  {"pool_size", split.pool.size()},
                  {"test_size", split.test.size()}};

  const fs::path dir(o.out);
  detail::make_dir(dir);
  detail::write(dir / "cells.jsonl", cells);
  detail::write(dir / "curve.csv", result.curve.to_csv());
  detail::write(dir / "summary.json", summary.dump(2) + "\n");
  if (o.svg) {
    sam::svg::Series s{representation, {}, {}};
    for (const auto& p : result.curve.points) {
      s.x.push_back(static_cast<double>(p.budget));
      s.y.push_back(p.mean);
    }
    detail::write(dir / "curve.svg",
                  sam::svg::render({s}, {"Learning curve", "annotation budget N", sam::to_string(cfg.metric)}));
  }
  detail::finish_manifest(manifest, dir / "manifest.json");
  out << sam::io::format_number(result.curve.alc) << '\n';
  return 0;
}

inline int run_bow(const BowOptions& o, std::ostream& out) {
  detail::require_file(o.input, "input");
  if (o.out.empty()) throw sam::ValidationError("missing --out");
  auto manifest = detail::begin_manifest("bow", to_json(o));
  manifest.add_input(o.input);

  const auto dataset = sam::load_dataset(o.input);
  const auto [matrix, vocab] = sam::build_bow(dataset);
  std::string vocab_text;
  for (const auto& t : vocab.terms()) vocab_text += t + '\n';

  const fs::path path(o.out);
  if (path.has_parent_path()) detail::make_dir(path.parent_path());
  sam::save_vectors(path, matrix);
  detail::write(path.string() + ".labels.tsv", sam::to_label_tsv(dataset));
  detail::write(path.string() + ".vocab.txt", vocab_text);
  detail::finish_manifest(manifest, path.string() + ".manifest.json");
  out << matrix.rows() << ' ' << matrix.cols() << '\n';
  return 0;
}

namespace detail {

inline std::vector<std::string> expand_glob(const std::string& pattern) {
  glob_t g{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<std::string> out;
  if (rc == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  }
  globfree(&g);
  if (rc != 0 && rc != GLOB_NOMATCH) throw sam::IoError("glob failed for " + pattern);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

inline int run_correlate(const CorrelateOptions& o, std::ostream& out) {
  if (o.summaries.empty()) throw sam::ValidationError("missing --summaries");
  if (o.out.empty()) throw sam::ValidationError("missing --out");
  const auto files = detail::expand_glob(o.summaries);
  if (files.empty()) throw sam::IoError("no summary files match " + o.summaries);
  auto manifest = detail::begin_manifest("correlate", to_json(o));

  struct Row {
    std::optional<double> sam, alc, dbi;
  };
  std::map<std::pair<std::string, std::string>, Row> rows;
  for (const auto& f : files) {
    manifest.add_input(f);
    json j;
    try {
      j = json::parse(sam::io::read_file(f));
    } catch (const json::parse_error& e) {
      throw sam::ValidationError(f + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("kind")) continue;
    const auto key = std::make_pair(j.value("dataset", std::string()), j.value("representation", std::string()));
    const auto kind = j["kind"].get<std::string>();
    auto& row = rows[key];
    auto assign = [&](std::optional<double>& slot, const char* field) {
      if (slot) throw sam::ValidationError("duplicate " + kind + " summary for " + key.first + "/" + key.second);
      slot = j.at(field).get<double>();
    };
    if (kind == "sam") assign(row.sam, "sam");
    else if (kind == "lc") assign(row.alc, "alc");
    else if (kind == "dbi") assign(row.dbi, "area");
  }

  std::vector<double> sam_x, sam_y, dbi_x, dbi_y;
  std::string csv = "dataset,representation,sam,alc,dbi_area\n";
  for (const auto& [key, row] : rows) {
    if (!row.alc || (!row.sam && !row.dbi)) continue;
    csv += key.first + ',' + key.second + ',' + (row.sam ? sam::io::format_number(*row.sam) : "") + ',' +
           sam::io::format_number(*row.alc) + ',' + (row.dbi ? sam::io::format_number(*row.dbi) : "") + '\n';
    if (row.sam) {
      sam_x.push_back(*row.sam);
      sam_y.push_back(*row.alc);
    }
    if (row.dbi) {
      dbi_x.push_back(*row.dbi);
      dbi_y.push_back(*row.alc);
    }
  }
  if (sam_x.size() < 3) {
    throw sam::ValidationError("correlate needs at least 3 (SAM, ALC) pairs, found " +
                               std::to_string(sam_x.size()));
  }
  const double r = sam::pearson(sam_x, sam_y);
  json result = {{"pearson_sam_alc", r}, {"pairs", sam_x.size()}};
  if (dbi_x.size() >= 3) {
    result["pearson_dbi_alc"] = sam::pearson(dbi_x, dbi_y);
    result["dbi_pairs"] = dbi_x.size();
  }

  const fs::path dir(o.out);
  detail::make_dir(dir);
  detail::write(dir / "scatter.csv", csv);
  detail::write(dir / "correlation.json", result.dump(2) + "\n");
  sam::svg::PlotOptions plot{"ALC vs SAM", "SAM", "ALC"};
  plot.scatter = true;
  detail::write(dir / "scatter.svg", sam::svg::render({{"", sam_x, sam_y}}, plot));
  if (dbi_x.size() >= 3) {
    sam::svg::PlotOptions dplot{"ALC vs area under DBI (inverted x-axis)", "DBI area", "ALC"};
    dplot.scatter = true;
    dplot.invert_x = true;
    detail::write(dir / "dbi_scatter.svg", sam::svg::render({{"", dbi_x, dbi_y}}, dplot));
  }
  detail::finish_manifest(manifest, dir / "manifest.json");
  out << sam::io::format_number(r) << '\n';
  return 0;
}

//! Replays a run from its manifest after checking every input digest.
//! `out_override` redirects the artifacts.
inline int run_from_manifest(const std::string& manifest_path, const std::string& out_override,
                             std::ostream& out) {
  detail::require_file(manifest_path, "manifest");
  const auto m = sam::load_manifest(manifest_path);
  m.verify_inputs();
  auto opts = m.options;
  if (!out_override.empty()) opts["out"] = out_override;
  try {
    if (m.command == "sam") return run_sam(opts.get<SamOptions>(), out);
    if (m.command == "dbi") return run_dbi(opts.get<DbiOptions>(), out);
    if (m.command == "lc") return run_lc(opts.get<LcOptions>(), out);
    if (m.command == "bow") return run_bow(opts.get<BowOptions>(), out);
    if (m.command == "correlate") return run_correlate(opts.get<CorrelateOptions>(), out);
  } catch (const json::exception& e) {
    throw sam::ValidationError(std::string("manifest options: ") + e.what());
  }
  throw sam::ValidationError("manifest names unknown command \"" + m.command + "\"");
}

}  // namespace samkit

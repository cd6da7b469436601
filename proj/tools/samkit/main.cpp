#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kIo = 2, kValidation = 3, kNumeric = 4 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"samkit: structural alignment of representations with class labels"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sam::kToolkitVersion);

  samkit::SamOptions sam_opt;
  std::string target;
  auto* sam_cmd = app.add_subcommand("sam", "Alignment curve and SAM for a vector file");
  sam_cmd->add_option("--vectors", sam_opt.vectors, "SAMV binary or headered CSV vectors")->required();
  sam_cmd->add_option("--labels", sam_opt.labels, "Labels: JSONL dataset or TSV with id,label")->required();
  sam_cmd->add_option("--mode", sam_opt.mode, "balanced | target")->check(CLI::IsMember({"balanced", "target"}));
  sam_cmd->add_option("--target", target, "Target label (target mode)");
  sam_cmd->add_option("--k-min", sam_opt.k_min, "Smallest k on the grid");
  sam_cmd->add_option("--k-max", sam_opt.k_max, "Largest k on the grid (default n)");
  sam_cmd->add_option("--grid", sam_opt.grid, "full | auto")->check(CLI::IsMember({"full", "auto"}));
  sam_cmd->add_option("--out", sam_opt.out, "Output directory")->required();
  sam_cmd->add_flag("--svg", sam_opt.svg, "Also write curve.svg");
  sam_cmd->add_flag("--dendrogram", sam_opt.dendrogram, "Also write dendrogram.csv");
  sam_cmd->add_option("--max-samples", sam_opt.max_samples, "Uniform sub-sample cap (0 = no cap)");
  sam_cmd->add_option("--seed", sam_opt.seed, "Sub-sampling seed");
  sam_cmd->add_option("--dataset-name", sam_opt.dataset_name, "Dataset key for correlate");
  sam_cmd->add_option("--representation", sam_opt.representation, "Representation key for correlate");

  samkit::DbiOptions dbi_opt;
  auto* dbi_cmd = app.add_subcommand("dbi", "Davies-Bouldin curve over the Ward dendrogram");
  dbi_cmd->add_option("--vectors", dbi_opt.vectors)->required();
  dbi_cmd->add_option("--labels", dbi_opt.labels, "Optional labels (row alignment check, dataset key)");
  dbi_cmd->add_option("--k-min", dbi_opt.k_min);
  dbi_cmd->add_option("--k-max", dbi_opt.k_max);
  dbi_cmd->add_option("--grid", dbi_opt.grid)->check(CLI::IsMember({"full", "auto"}));
  dbi_cmd->add_option("--out", dbi_opt.out)->required();
  dbi_cmd->add_flag("--svg", dbi_opt.svg);
  dbi_cmd->add_option("--max-samples", dbi_opt.max_samples);
  dbi_cmd->add_option("--seed", dbi_opt.seed);
  dbi_cmd->add_option("--dataset-name", dbi_opt.dataset_name);
  dbi_cmd->add_option("--representation", dbi_opt.representation);

  std::string lc_config, lc_out;
  bool lc_svg = false;
  auto* lc_cmd = app.add_subcommand("lc", "Learning curve under annotation budgets");
  lc_cmd->add_option("--config", lc_config, "Experiment config JSON")->required();
  lc_cmd->add_option("--out", lc_out)->required();
  lc_cmd->add_flag("--svg", lc_svg);

  samkit::BowOptions bow_opt;
  auto* bow_cmd = app.add_subcommand("bow", "Term-frequency bag-of-words vectors from a JSONL dataset");
  bow_cmd->add_option("--input", bow_opt.input)->required();
  bow_cmd->add_option("--out", bow_opt.out, "Output SAMV file")->required();

  samkit::CorrelateOptions cor_opt;
  auto* cor_cmd = app.add_subcommand("correlate", "Pearson correlation of SAM (and DBI area) with ALC");
  cor_cmd->add_option("--summaries", cor_opt.summaries, "Glob over summary.json files")->required();
  cor_cmd->add_option("--out", cor_opt.out)->required();

  std::string manifest_path, rerun_out;
  auto* rerun_cmd = app.add_subcommand("rerun", "Re-execute a run from its manifest");
  rerun_cmd->add_option("--manifest", manifest_path)->required();
  rerun_cmd->add_option("--out", rerun_out, "Write artifacts here instead");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    if (*sam_cmd) {
      if (!target.empty()) sam_opt.target = target;
      return samkit::run_sam(sam_opt, std::cout);
    }
    if (*dbi_cmd) return samkit::run_dbi(dbi_opt, std::cout);
    if (*lc_cmd) return samkit::run_lc(samkit::load_lc_options(lc_config, lc_out, lc_svg), std::cout);
    if (*bow_cmd) return samkit::run_bow(bow_opt, std::cout);
    if (*cor_cmd) return samkit::run_correlate(cor_opt, std::cout);
    if (*rerun_cmd) return samkit::run_from_manifest(manifest_path, rerun_out, std::cout);
  } catch (const sam::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const sam::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const sam::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

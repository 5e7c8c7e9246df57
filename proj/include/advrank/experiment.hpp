#pragma once

#include "advrank/trainer.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace advrank {

/// Invalid configuration; the message enumerates every offending field.
class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A declarative experiment: task, data locations, training configuration,
/// evaluation cutoffs, and output directory. Serialized verbatim into every
/// output directory.
struct ExperimentSpec {
  std::string task;  // "websearch" | "itemrec"
  std::string train_file;
  std::string test_file;
  std::string data_file;  // itemrec interactions file
  double split_ratio = 0.8;
  TrainConfig train;
  std::vector<int> cutoffs = {1, 3, 5, 10};
  double label_fraction = 1.0;
  std::vector<double> sweep_fractions;
  std::string out_dir;
  int hidden_dim = 0;  // websearch; 0 = feature dimension
  int latent_dim = 5;  // itemrec
  bool use_cache = true;
};

/// Parse a `key = value` spec file ('#' starts a comment). Unknown keys and
/// unparsable values are all reported in one SpecError.
ExperimentSpec parse_spec_file(const std::filesystem::path& path);

/// Canonical text form written to <out>/spec.txt; also the config-hash input.
std::string serialize_spec(const ExperimentSpec& spec);

/// All validation problems, empty when the spec is runnable.
std::vector<std::string> validate_spec(const ExperimentSpec& spec);

std::string config_hash(const ExperimentSpec& spec);

/// Train per spec, evaluate, and populate the output directory with the
/// exact spec, run metadata, TSV/JSON reports, the learning-curve file, and
/// the final checkpoint. Returns the final report.
EvalReport run_experiment(const ExperimentSpec& spec, std::ostream* log = nullptr);

/// One full run per label fraction with a fraction-derived sub-seed, plus a
/// consolidated sweep.tsv (fraction, metric, cutoff, value).
void run_sweep(const ExperimentSpec& spec, const std::vector<double>& fractions,
               std::ostream* log = nullptr);

/// {uniform, adversarial} x {pairwise_at, pairwise_svat, full_vat,
/// plain_pairwise} with shared seeds; consolidated ablation.tsv.
void run_ablation(const ExperimentSpec& spec, std::ostream* log = nullptr);

/// Evaluate a saved checkpoint against the spec's test data and write the
/// report files to the output directory.
EvalReport run_evaluate(const ExperimentSpec& spec, const std::filesystem::path& checkpoint,
                        std::ostream* log = nullptr);

/// Best-effort dataset download and verification under root. Returns true
/// when every required file is present and verified.
bool fetch_data(const std::filesystem::path& root, std::ostream& out);

/// Load the spec's datasets (train, test) honoring caches, the label
/// fraction, and the seed discipline used by run_experiment.
std::pair<RankingDataset, RankingDataset> load_task_data(const ExperimentSpec& spec);

/// Construct and seed-initialize the task's model.
std::unique_ptr<ScoreModel> build_task_model(const ExperimentSpec& spec,
                                             const RankingDataset& train);

}  // namespace advrank

// Experiment driver: training runs, checkpoint evaluation, label-fraction
// sweeps, sampler/objective ablations, and dataset fetching.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime abort.

#include "advrank/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

using advrank::ExperimentSpec;

struct CommonOpts {
  std::string spec_file;
  std::string task;
  std::string train_file;
  std::string test_file;
  std::string data_file;
  std::string objective;
  std::string sampler;
  std::string norm;
  std::string out;
  std::string data_root;
  double epsilon = 0.0;
  double tau = 0.0;
  double lr = 0.0;
  double alpha = 0.0;
  double label_fraction = 0.0;
  double split_ratio = 0.0;
  double vat_xi = 0.0;
  std::int64_t epochs = 0;
  std::int64_t seed = 0;
  std::int64_t eval_every = 0;
  std::int64_t candidate_pool = 0;
  std::int64_t refresh_every = 0;
  std::int64_t batch_size = 0;
  std::int64_t hidden_dim = 0;
  std::int64_t latent_dim = 0;
  std::int64_t vat_power_iters = 0;
  std::vector<double> fractions;
  bool no_cache = false;
};

void add_common_options(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--spec", o.spec_file, "spec file (key = value lines); flags override it");
  cmd->add_option("--task", o.task, "websearch | itemrec");
  cmd->add_option("--train-file", o.train_file, "LETOR training split");
  cmd->add_option("--test-file", o.test_file, "LETOR test split");
  cmd->add_option("--data-file", o.data_file, "MovieLens interaction file (u.data)");
  cmd->add_option("--objective", o.objective,
                  "plain_pointwise | plain_pairwise | pointwise_at | pairwise_at | "
                  "full_vat | pointwise_svat | pairwise_svat");
  cmd->add_option("--sampler", o.sampler, "uniform | adversarial");
  cmd->add_option("--epsilon", o.epsilon, "perturbation radius");
  cmd->add_option("--tau", o.tau, "sampling temperature");
  cmd->add_option("--norm", o.norm, "perturbation norm: l2 | max");
  cmd->add_option("--epochs", o.epochs, "training epochs");
  cmd->add_option("--lr", o.lr, "learning rate");
  cmd->add_option("--alpha", o.alpha, "adversarial/KL term weight");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--label-fraction", o.label_fraction, "labeled-data fraction in (0,1]");
  cmd->add_option("--split-ratio", o.split_ratio, "itemrec train fraction of labeled data");
  cmd->add_option("--eval-every", o.eval_every, "epochs between test evaluations");
  cmd->add_option("--candidate-pool", o.candidate_pool, "sampler candidate subset size (0 = all)");
  cmd->add_option("--refresh-every", o.refresh_every, "batches a score cache stays fresh");
  cmd->add_option("--batch-size", o.batch_size, "positives per SGD update");
  cmd->add_option("--hidden-dim", o.hidden_dim, "MLP hidden width (0 = feature dim)");
  cmd->add_option("--latent-dim", o.latent_dim, "MF latent dimension");
  cmd->add_option("--vat-xi", o.vat_xi, "VAT probe scale");
  cmd->add_option("--vat-power-iters", o.vat_power_iters, "VAT power iterations");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--data-root", o.data_root,
                  "dataset root (default: $ADVRANK_DATA_ROOT); resolves relative data paths");
  cmd->add_flag("--no-cache", o.no_cache, "ignore and skip dataset caches");
}

std::string resolve_path(const std::string& p, const std::string& root) {
  if (p.empty() || root.empty() || std::filesystem::path(p).is_absolute()) {
    return p;
  }
  return (std::filesystem::path(root) / p).string();
}

bool has_flag(const CLI::App* cmd, const std::string& name) {
  const CLI::Option* opt = cmd->get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

ExperimentSpec build_spec(const CLI::App* cmd, const CommonOpts& o) {
  ExperimentSpec spec;
  if (has_flag(cmd, "--spec")) {
    spec = advrank::parse_spec_file(o.spec_file);
  }
  if (has_flag(cmd, "--task")) spec.task = o.task;
  if (has_flag(cmd, "--train-file")) spec.train_file = o.train_file;
  if (has_flag(cmd, "--test-file")) spec.test_file = o.test_file;
  if (has_flag(cmd, "--data-file")) spec.data_file = o.data_file;
  if (has_flag(cmd, "--objective")) spec.train.objective = advrank::objective_from_name(o.objective);
  if (has_flag(cmd, "--sampler")) {
    if (o.sampler == "uniform") {
      spec.train.sampler.kind = advrank::SamplerKind::Uniform;
    } else if (o.sampler == "adversarial") {
      spec.train.sampler.kind = advrank::SamplerKind::Adversarial;
    } else {
      throw advrank::SpecError("unknown sampler '" + o.sampler + "'");
    }
  }
  if (has_flag(cmd, "--norm")) {
    if (o.norm == "l2") {
      spec.train.perturb.norm = advrank::PerturbNorm::L2;
    } else if (o.norm == "max") {
      spec.train.perturb.norm = advrank::PerturbNorm::MaxNorm;
    } else {
      throw advrank::SpecError("unknown norm '" + o.norm + "' (expected l2 or max)");
    }
  }
  if (has_flag(cmd, "--epsilon")) spec.train.perturb.epsilon = o.epsilon;
  if (has_flag(cmd, "--tau")) spec.train.sampler.tau = o.tau;
  if (has_flag(cmd, "--epochs")) spec.train.epochs = static_cast<int>(o.epochs);
  if (has_flag(cmd, "--lr")) spec.train.learning_rate = o.lr;
  if (has_flag(cmd, "--alpha")) spec.train.alpha = o.alpha;
  if (has_flag(cmd, "--seed")) spec.train.seed = static_cast<std::uint64_t>(o.seed);
  if (has_flag(cmd, "--label-fraction")) spec.label_fraction = o.label_fraction;
  if (has_flag(cmd, "--split-ratio")) spec.split_ratio = o.split_ratio;
  if (has_flag(cmd, "--eval-every")) spec.train.eval_every = static_cast<int>(o.eval_every);
  if (has_flag(cmd, "--candidate-pool"))
    spec.train.sampler.candidate_pool = static_cast<int>(o.candidate_pool);
  if (has_flag(cmd, "--refresh-every"))
    spec.train.sampler.refresh_every_batches = static_cast<int>(o.refresh_every);
  if (has_flag(cmd, "--batch-size")) spec.train.batch_size = static_cast<int>(o.batch_size);
  if (has_flag(cmd, "--hidden-dim")) spec.hidden_dim = static_cast<int>(o.hidden_dim);
  if (has_flag(cmd, "--latent-dim")) spec.latent_dim = static_cast<int>(o.latent_dim);
  if (has_flag(cmd, "--vat-xi")) spec.train.perturb.vat_xi = o.vat_xi;
  if (has_flag(cmd, "--vat-power-iters"))
    spec.train.perturb.vat_power_iters = static_cast<int>(o.vat_power_iters);
  if (has_flag(cmd, "--fractions")) spec.sweep_fractions = o.fractions;
  if (has_flag(cmd, "--out")) spec.out_dir = o.out;
  if (o.no_cache) spec.use_cache = false;

  std::string root = o.data_root;
  if (root.empty()) {
    if (const char* env = std::getenv("ADVRANK_DATA_ROOT")) {
      root = env;
    }
  }
  spec.train_file = resolve_path(spec.train_file, root);
  spec.test_file = resolve_path(spec.test_file, root);
  spec.data_file = resolve_path(spec.data_file, root);
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial sampling and training for implicit-feedback ranking"};
  app.require_subcommand(1);

  CommonOpts train_opts;
  CommonOpts eval_opts;
  CommonOpts sweep_opts;
  CommonOpts ablation_opts;
  std::string checkpoint;
  std::string fetch_root;

  CLI::App* cmd_train = app.add_subcommand("train", "train a model and write reports");
  add_common_options(cmd_train, train_opts);

  CLI::App* cmd_eval = app.add_subcommand("evaluate", "evaluate a saved checkpoint");
  add_common_options(cmd_eval, eval_opts);
  cmd_eval->add_option("--checkpoint", checkpoint, "model checkpoint to score with")->required();

  CLI::App* cmd_sweep = app.add_subcommand("sweep", "label-fraction data-efficiency sweep");
  add_common_options(cmd_sweep, sweep_opts);
  cmd_sweep->add_option("--fractions", sweep_opts.fractions, "label fractions in (0,1]");

  CLI::App* cmd_ablation = app.add_subcommand("ablation", "sampler x objective grid");
  add_common_options(cmd_ablation, ablation_opts);

  CLI::App* cmd_fetch = app.add_subcommand("fetch-data", "download and verify datasets");
  cmd_fetch->add_option("--root", fetch_root, "dataset root (default: $ADVRANK_DATA_ROOT)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (cmd_train->parsed()) {
      const ExperimentSpec spec = build_spec(cmd_train, train_opts);
      advrank::run_experiment(spec, &std::cout);
    } else if (cmd_eval->parsed()) {
      const ExperimentSpec spec = build_spec(cmd_eval, eval_opts);
      advrank::run_evaluate(spec, checkpoint, &std::cout);
    } else if (cmd_sweep->parsed()) {
      const ExperimentSpec spec = build_spec(cmd_sweep, sweep_opts);
      std::vector<double> fractions =
          spec.sweep_fractions.empty() ? std::vector<double>{1.0} : spec.sweep_fractions;
      advrank::run_sweep(spec, fractions, &std::cout);
    } else if (cmd_ablation->parsed()) {
      const ExperimentSpec spec = build_spec(cmd_ablation, ablation_opts);
      advrank::run_ablation(spec, &std::cout);
    } else if (cmd_fetch->parsed()) {
      std::string root = fetch_root;
      if (root.empty()) {
        if (const char* env = std::getenv("ADVRANK_DATA_ROOT")) {
          root = env;
        } else {
          root = "data";
        }
      }
      if (!advrank::fetch_data(root, std::cout)) {
        return 1;
      }
    }
  } catch (const advrank::SpecError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "run aborted: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

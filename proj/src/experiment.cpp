#include "advrank/experiment.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#ifndef ADVRANK_VERSION
#define ADVRANK_VERSION "0.0.0"
#endif

namespace advrank {

namespace fs = std::filesystem;

namespace {

// Seed streams so initialization, splitting, and subsampling stay
// independent of the training draw sequence.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSplitStream = 2;
constexpr std::uint64_t kSubsampleStream = 3;

std::string norm_name(PerturbNorm n) { return n == PerturbNorm::L2 ? "l2" : "max"; }

PerturbNorm norm_from_name(const std::string& s) {
  if (s == "l2") {
    return PerturbNorm::L2;
  }
  if (s == "max") {
    return PerturbNorm::MaxNorm;
  }
  throw std::invalid_argument("unknown norm '" + s + "' (expected l2 or max)");
}

std::string sampler_name(SamplerKind k) {
  return k == SamplerKind::Uniform ? "uniform" : "adversarial";
}

SamplerKind sampler_from_name(const std::string& s) {
  if (s == "uniform") {
    return SamplerKind::Uniform;
  }
  if (s == "adversarial") {
    return SamplerKind::Adversarial;
  }
  throw std::invalid_argument("unknown sampler '" + s + "'");
}

template <typename T>
std::string join_list(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) {
      out += ',';
    }
    if constexpr (std::is_same_v<T, double>) {
      out += format_shortest(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

}  // namespace

std::string serialize_spec(const ExperimentSpec& spec) {
  std::ostringstream out;
  out << "task = " << spec.task << '\n';
  out << "train_file = " << spec.train_file << '\n';
  out << "test_file = " << spec.test_file << '\n';
  out << "data_file = " << spec.data_file << '\n';
  out << "split_ratio = " << format_shortest(spec.split_ratio) << '\n';
  out << "objective = " << objective_name(spec.train.objective) << '\n';
  out << "sampler = " << sampler_name(spec.train.sampler.kind) << '\n';
  out << "tau = " << format_shortest(spec.train.sampler.tau) << '\n';
  out << "candidate_pool = " << spec.train.sampler.candidate_pool << '\n';
  out << "refresh_every = " << spec.train.sampler.refresh_every_batches << '\n';
  out << "exclude_labeled = " << (spec.train.sampler.exclude_labeled ? "true" : "false") << '\n';
  out << "epsilon = " << format_shortest(spec.train.perturb.epsilon) << '\n';
  out << "norm = " << norm_name(spec.train.perturb.norm) << '\n';
  out << "vat_xi = " << format_shortest(spec.train.perturb.vat_xi) << '\n';
  out << "vat_power_iters = " << spec.train.perturb.vat_power_iters << '\n';
  out << "alpha = " << format_shortest(spec.train.alpha) << '\n';
  out << "epochs = " << spec.train.epochs << '\n';
  out << "lr = " << format_shortest(spec.train.learning_rate) << '\n';
  out << "batch_size = " << spec.train.batch_size << '\n';
  out << "weight_decay = " << format_shortest(spec.train.weight_decay) << '\n';
  out << "seed = " << spec.train.seed << '\n';
  out << "eval_every = " << spec.train.eval_every << '\n';
  out << "cutoffs = " << join_list(spec.cutoffs) << '\n';
  out << "label_fraction = " << format_shortest(spec.label_fraction) << '\n';
  out << "sweep_fractions = " << join_list(spec.sweep_fractions) << '\n';
  out << "hidden_dim = " << spec.hidden_dim << '\n';
  out << "latent_dim = " << spec.latent_dim << '\n';
  out << "use_cache = " << (spec.use_cache ? "true" : "false") << '\n';
  out << "out = " << spec.out_dir << '\n';
  return out.str();
}

namespace {

double parse_num(const std::string& v, const std::string& key) {
  double d = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw std::invalid_argument(key + ": bad number '" + v + "'");
  }
  return d;
}

long long parse_int(const std::string& v, const std::string& key) {
  long long d = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw std::invalid_argument(key + ": bad integer '" + v + "'");
  }
  return d;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") {
    return true;
  }
  if (v == "false" || v == "0") {
    return false;
  }
  throw std::invalid_argument(key + ": bad boolean '" + v + "'");
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& v, Parse parse) {
  std::vector<T> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) {
      out.push_back(parse(item));
    }
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return "";
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

ExperimentSpec parse_spec_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw SpecError("cannot open spec file " + path.string());
  }
  ExperimentSpec spec;
  std::vector<std::string> errors;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(line_no) + ": expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "task") {
        spec.task = value;
      } else if (key == "train_file") {
        spec.train_file = value;
      } else if (key == "test_file") {
        spec.test_file = value;
      } else if (key == "data_file") {
        spec.data_file = value;
      } else if (key == "split_ratio") {
        spec.split_ratio = parse_num(value, key);
      } else if (key == "objective") {
        spec.train.objective = objective_from_name(value);
      } else if (key == "sampler") {
        spec.train.sampler.kind = sampler_from_name(value);
      } else if (key == "tau") {
        spec.train.sampler.tau = parse_num(value, key);
      } else if (key == "candidate_pool") {
        spec.train.sampler.candidate_pool = static_cast<int>(parse_int(value, key));
      } else if (key == "refresh_every") {
        spec.train.sampler.refresh_every_batches = static_cast<int>(parse_int(value, key));
      } else if (key == "exclude_labeled") {
        spec.train.sampler.exclude_labeled = parse_bool(value, key);
      } else if (key == "epsilon") {
        spec.train.perturb.epsilon = parse_num(value, key);
      } else if (key == "norm") {
        spec.train.perturb.norm = norm_from_name(value);
      } else if (key == "vat_xi") {
        spec.train.perturb.vat_xi = parse_num(value, key);
      } else if (key == "vat_power_iters") {
        spec.train.perturb.vat_power_iters = static_cast<int>(parse_int(value, key));
      } else if (key == "alpha") {
        spec.train.alpha = parse_num(value, key);
      } else if (key == "epochs") {
        spec.train.epochs = static_cast<int>(parse_int(value, key));
      } else if (key == "lr") {
        spec.train.learning_rate = parse_num(value, key);
      } else if (key == "batch_size") {
        spec.train.batch_size = static_cast<int>(parse_int(value, key));
      } else if (key == "weight_decay") {
        spec.train.weight_decay = parse_num(value, key);
      } else if (key == "seed") {
        spec.train.seed = static_cast<std::uint64_t>(parse_int(value, key));
      } else if (key == "eval_every") {
        spec.train.eval_every = static_cast<int>(parse_int(value, key));
      } else if (key == "cutoffs") {
        spec.cutoffs = parse_list<int>(
            value, [&](const std::string& s) { return static_cast<int>(parse_int(s, key)); });
      } else if (key == "label_fraction") {
        spec.label_fraction = parse_num(value, key);
      } else if (key == "sweep_fractions") {
        spec.sweep_fractions =
            parse_list<double>(value, [&](const std::string& s) { return parse_num(s, key); });
      } else if (key == "hidden_dim") {
        spec.hidden_dim = static_cast<int>(parse_int(value, key));
      } else if (key == "latent_dim") {
        spec.latent_dim = static_cast<int>(parse_int(value, key));
      } else if (key == "use_cache") {
        spec.use_cache = parse_bool(value, key);
      } else if (key == "out") {
        spec.out_dir = value;
      } else {
        errors.push_back("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
      }
    } catch (const std::exception& e) {
      errors.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!errors.empty()) {
    std::string msg = "invalid spec file " + path.string() + ":";
    for (const auto& e : errors) {
      msg += "\n  " + e;
    }
    throw SpecError(msg);
  }
  return spec;
}

std::vector<std::string> validate_spec(const ExperimentSpec& spec) {
  std::vector<std::string> errors;
  if (spec.task != "websearch" && spec.task != "itemrec") {
    errors.push_back("task must be 'websearch' or 'itemrec' (got '" + spec.task + "')");
  }
  if (spec.task == "websearch") {
    if (spec.train_file.empty() || !fs::exists(spec.train_file)) {
      errors.push_back("train_file missing or not found: '" + spec.train_file + "'");
    }
    if (spec.test_file.empty() || !fs::exists(spec.test_file)) {
      errors.push_back("test_file missing or not found: '" + spec.test_file + "'");
    }
  }
  if (spec.task == "itemrec") {
    if (spec.data_file.empty() || !fs::exists(spec.data_file)) {
      errors.push_back("data_file missing or not found: '" + spec.data_file + "'");
    }
    if (!(spec.split_ratio > 0.0 && spec.split_ratio < 1.0)) {
      errors.push_back("split_ratio must be in (0,1)");
    }
  }
  if (spec.train.epochs < 1) {
    errors.push_back("epochs must be >= 1");
  }
  if (!(spec.train.learning_rate > 0.0)) {
    errors.push_back("lr must be > 0");
  }
  if (spec.train.batch_size < 1) {
    errors.push_back("batch_size must be >= 1");
  }
  if (spec.train.perturb.epsilon < 0.0) {
    errors.push_back("epsilon must be >= 0");
  }
  if (!(spec.train.sampler.tau > 0.0)) {
    errors.push_back("tau must be > 0");
  }
  if (spec.train.sampler.refresh_every_batches < 1) {
    errors.push_back("refresh_every must be >= 1");
  }
  if (!(spec.train.perturb.vat_xi > 0.0)) {
    errors.push_back("vat_xi must be > 0");
  }
  if (spec.train.perturb.vat_power_iters < 1) {
    errors.push_back("vat_power_iters must be >= 1");
  }
  if (!(spec.label_fraction > 0.0 && spec.label_fraction <= 1.0)) {
    errors.push_back("label_fraction must be in (0,1]");
  }
  for (const double f : spec.sweep_fractions) {
    if (!(f > 0.0 && f <= 1.0)) {
      errors.push_back("sweep fraction " + format_shortest(f) + " outside (0,1]");
    }
  }
  if (spec.cutoffs.empty()) {
    errors.push_back("cutoffs must not be empty");
  }
  for (const int c : spec.cutoffs) {
    if (c < 1) {
      errors.push_back("cutoff " + std::to_string(c) + " must be >= 1");
    }
  }
  if (spec.out_dir.empty()) {
    errors.push_back("out directory must be set");
  }
  return errors;
}

std::string config_hash(const ExperimentSpec& spec) {
  // FNV-1a over the canonical serialization, minus the output location: the
  // hash identifies the configuration, and reruns land in fresh directories.
  ExperimentSpec keyed = spec;
  keyed.out_dir.clear();
  const std::string s = serialize_spec(keyed);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

RankingDataset load_letor_cached(const std::string& file, bool for_training, bool use_cache) {
  const fs::path cache =
      fs::path(file + (for_training ? ".train.cache" : ".eval.cache"));
  if (use_cache && fs::exists(cache) &&
      fs::last_write_time(cache) >= fs::last_write_time(file)) {
    try {
      return load_dataset_cache(cache);
    } catch (const std::exception&) {
      // stale or foreign cache: fall through to a fresh parse
    }
  }
  std::ifstream in(file);
  if (!in) {
    throw SpecError("cannot open " + file);
  }
  RankingDataset ds = compile_letor_dataset(parse_letor(in), for_training);
  if (use_cache) {
    try {
      save_dataset_cache(ds, cache);
    } catch (const std::exception&) {
      // read-only data directory: caching is best effort
    }
  }
  return ds;
}

void throw_if_invalid(const ExperimentSpec& spec) {
  const auto errors = validate_spec(spec);
  if (!errors.empty()) {
    std::string msg = "invalid experiment spec:";
    for (const auto& e : errors) {
      msg += "\n  " + e;
    }
    throw SpecError(msg);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << text;
}

void write_run_meta(const ExperimentSpec& spec, const fs::path& dir) {
  nlohmann::json j;
  j["format"] = "advrank.run";
  j["version"] = 1;
  j["code_version"] = ADVRANK_VERSION;
  j["seed"] = spec.train.seed;
  j["config_hash"] = config_hash(spec);
  write_text(dir / "run_meta.json", j.dump(2) + "\n");
}

void write_curve(const ExperimentSpec& spec, const std::vector<EpochLog>& logs,
                 const fs::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << "epoch\tmean_loss";
  for (const int c : spec.cutoffs) {
    out << "\tprecision@" << c;
  }
  for (const int c : spec.cutoffs) {
    out << "\tndcg@" << c;
  }
  out << '\n';
  for (const EpochLog& log : logs) {
    out << log.epoch << '\t' << format_sig9(log.mean_loss);
    if (log.eval) {
      for (const double v : log.eval->mean_precision) {
        out << '\t' << format_sig9(v);
      }
      for (const double v : log.eval->mean_ndcg) {
        out << '\t' << format_sig9(v);
      }
    } else {
      for (std::size_t i = 0; i < 2 * spec.cutoffs.size(); ++i) {
        out << '\t';
      }
    }
    out << '\n';
  }
}

}  // namespace

std::pair<RankingDataset, RankingDataset> load_task_data(const ExperimentSpec& spec) {
  RankingDataset train;
  RankingDataset test;
  if (spec.task == "websearch") {
    train = load_letor_cached(spec.train_file, true, spec.use_cache);
    test = load_letor_cached(spec.test_file, false, spec.use_cache);
  } else {
    std::ifstream in(spec.data_file);
    if (!in) {
      throw SpecError("cannot open " + spec.data_file);
    }
    const MovielensData data = parse_movielens(in);
    MovielensSplit split = compile_movielens_dataset(
        data, spec.split_ratio, derive_seed(spec.train.seed, kSplitStream));
    train = std::move(split.train);
    test = std::move(split.test);
    if (!spec.out_dir.empty() && fs::exists(spec.out_dir)) {
      save_id_map(data, fs::path(spec.out_dir) / "id_map.json");
    }
  }
  if (spec.label_fraction < 1.0) {
    train = subsample_labels(train, spec.label_fraction,
                             derive_seed(spec.train.seed, kSubsampleStream));
  }
  return {std::move(train), std::move(test)};
}

std::unique_ptr<ScoreModel> build_task_model(const ExperimentSpec& spec,
                                             const RankingDataset& train) {
  std::unique_ptr<ScoreModel> model;
  if (spec.task == "websearch") {
    const Index k = train.feature_dim;
    const Index hidden = spec.hidden_dim > 0 ? spec.hidden_dim : k;
    model = std::make_unique<RankMlp>(k, hidden);
  } else {
    model = std::make_unique<MatFac>(train.num_users, train.num_items, spec.latent_dim);
  }
  Rng init_rng(derive_seed(spec.train.seed, kInitStream));
  model->init_params(init_rng);
  return model;
}

EvalReport run_experiment(const ExperimentSpec& spec, std::ostream* log) {
  throw_if_invalid(spec);
  const fs::path out_dir(spec.out_dir);
  fs::create_directories(out_dir);
  write_text(out_dir / "spec.txt", serialize_spec(spec));
  write_run_meta(spec, out_dir);

  auto [train_ds, test_ds] = load_task_data(spec);
  auto model = build_task_model(spec, train_ds);

  TrainConfig cfg = spec.train;
  cfg.eval_cutoffs = spec.cutoffs;
  const std::vector<EpochLog> logs = train(*model, train_ds, cfg, &test_ds, log);
  write_curve(spec, logs, out_dir / "curve.tsv");

  EvalReport report = evaluate(*model, test_ds, spec.cutoffs);
  report.config_hash = config_hash(spec);
  report.seed = spec.train.seed;
  report.epoch = spec.train.epochs;
  write_report_tsv(report, out_dir / "report.tsv");
  write_report_json(report, out_dir / "report.json");
  save_checkpoint(*model, out_dir / "checkpoint.json");
  return report;
}

void run_sweep(const ExperimentSpec& spec, const std::vector<double>& fractions,
               std::ostream* log) {
  throw_if_invalid(spec);
  if (fractions.empty()) {
    throw SpecError("sweep needs at least one fraction");
  }
  const fs::path out_dir(spec.out_dir);
  fs::create_directories(out_dir);
  write_text(out_dir / "spec.txt", serialize_spec(spec));
  write_run_meta(spec, out_dir);

  std::ofstream table(out_dir / "sweep.tsv");
  table << "fraction\tmetric\tcutoff\tvalue\n";
  for (const double f : fractions) {
    ExperimentSpec cell = spec;
    cell.label_fraction = f;
    cell.sweep_fractions.clear();
    // Fraction-derived sub-seed; the full-data run keeps the master seed so
    // a {1.0} sweep reproduces the plain experiment exactly.
    if (f < 1.0) {
      cell.train.seed = derive_seed(spec.train.seed, std::bit_cast<std::uint64_t>(f));
    }
    cell.out_dir = (out_dir / ("frac_" + format_shortest(f))).string();
    const EvalReport report = run_experiment(cell, log);
    for (std::size_t c = 0; c < report.cutoffs.size(); ++c) {
      table << format_shortest(f) << "\tprecision\t" << report.cutoffs[c] << '\t'
            << format_sig9(report.mean_precision[c]) << '\n';
    }
    for (std::size_t c = 0; c < report.cutoffs.size(); ++c) {
      table << format_shortest(f) << "\tndcg\t" << report.cutoffs[c] << '\t'
            << format_sig9(report.mean_ndcg[c]) << '\n';
    }
  }
}

void run_ablation(const ExperimentSpec& spec, std::ostream* log) {
  throw_if_invalid(spec);
  const fs::path out_dir(spec.out_dir);
  fs::create_directories(out_dir);
  write_text(out_dir / "spec.txt", serialize_spec(spec));
  write_run_meta(spec, out_dir);

  const Objective objectives[] = {Objective::PairwiseAT, Objective::PairwiseSVAT,
                                  Objective::FullVAT, Objective::PlainPairwise};
  const SamplerKind samplers[] = {SamplerKind::Uniform, SamplerKind::Adversarial};

  std::ofstream table(out_dir / "ablation.tsv");
  table << "objective\tsampler\tmetric\tcutoff\tvalue\n";
  for (const Objective obj : objectives) {
    for (const SamplerKind sk : samplers) {
      ExperimentSpec cell = spec;
      cell.train.objective = obj;
      cell.train.sampler.kind = sk;
      // Shared master seed: identical splits and subsample across cells.
      cell.out_dir =
          (out_dir / (objective_name(obj) + "_" + sampler_name(sk))).string();
      const EvalReport report = run_experiment(cell, log);
      for (std::size_t c = 0; c < report.cutoffs.size(); ++c) {
        table << objective_name(obj) << '\t' << sampler_name(sk) << "\tprecision\t"
              << report.cutoffs[c] << '\t' << format_sig9(report.mean_precision[c]) << '\n';
      }
      for (std::size_t c = 0; c < report.cutoffs.size(); ++c) {
        table << objective_name(obj) << '\t' << sampler_name(sk) << "\tndcg\t"
              << report.cutoffs[c] << '\t' << format_sig9(report.mean_ndcg[c]) << '\n';
      }
    }
  }
}

EvalReport run_evaluate(const ExperimentSpec& spec, const fs::path& checkpoint,
                        std::ostream* log) {
  throw_if_invalid(spec);
  const fs::path out_dir(spec.out_dir);
  fs::create_directories(out_dir);
  write_text(out_dir / "spec.txt", serialize_spec(spec));
  write_run_meta(spec, out_dir);

  auto [train_ds, test_ds] = load_task_data(spec);
  (void)train_ds;
  const auto model = load_checkpoint(checkpoint);
  EvalReport report = evaluate(*model, test_ds, spec.cutoffs);
  report.config_hash = config_hash(spec);
  report.seed = spec.train.seed;
  write_report_tsv(report, out_dir / "report.tsv");
  write_report_json(report, out_dir / "report.json");
  if (log) {
    for (std::size_t c = 0; c < report.cutoffs.size(); ++c) {
      *log << "precision@" << report.cutoffs[c] << '\t' << format_sig9(report.mean_precision[c])
           << '\n';
    }
    for (std::size_t c = 0; c < report.cutoffs.size(); ++c) {
      *log << "ndcg@" << report.cutoffs[c] << '\t' << format_sig9(report.mean_ndcg[c]) << '\n';
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Dataset fetching

namespace {

bool verify_movielens(const fs::path& u_data, std::ostream& out) {
  std::ifstream in(u_data);
  if (!in) {
    return false;
  }
  try {
    const MovielensData data = parse_movielens(in);
    out << "  " << u_data.string() << ": " << data.interactions.size() << " interactions, "
        << data.user_ids.size() << " users, " << data.item_ids.size() << " items\n";
    if (data.interactions.size() != 100000 || data.user_ids.size() != 943 ||
        data.item_ids.size() != 1683) {
      out << "  warning: counts differ from the published MovieLens 100k release\n";
      return false;
    }
    return true;
  } catch (const std::exception& e) {
    out << "  " << u_data.string() << ": " << e.what() << '\n';
    return false;
  }
}

bool verify_letor_file(const fs::path& file, std::ostream& out) {
  std::ifstream in(file);
  if (!in) {
    return false;
  }
  try {
    const auto records = parse_letor(in);
    const RankingDataset ds = compile_letor_dataset(records, false);
    out << "  " << file.string() << ": " << records.size() << " pairs, " << ds.queries.size()
        << " queries\n";
    return !records.empty();
  } catch (const std::exception& e) {
    out << "  " << file.string() << ": " << e.what() << '\n';
    return false;
  }
}

// Cheap textual scan of distinct qid tokens, avoiding a full feature parse.
void collect_qids(const fs::path& file, std::set<std::string>& qids) {
  std::ifstream in(file);
  std::string line;
  while (std::getline(in, line)) {
    const auto pos = line.find("qid:");
    if (pos == std::string::npos) {
      continue;
    }
    const auto end = line.find(' ', pos);
    qids.insert(line.substr(pos + 4, end - pos - 4));
  }
}

}  // namespace

bool fetch_data(const fs::path& root, std::ostream& out) {
  fs::create_directories(root);
  bool all_ok = true;

  out << "MovieLens 100k (https://files.grouplens.org/datasets/movielens/ml-100k.zip,\n"
      << "                zip md5 0e33842e24a9c977be4e0107933c0723)\n";
  const fs::path u_data = root / "ml-100k" / "u.data";
  if (!fs::exists(u_data)) {
    const fs::path zip = root / "ml-100k.zip";
    const std::string fetch = "curl -fsSL -o '" + zip.string() +
                              "' https://files.grouplens.org/datasets/movielens/ml-100k.zip";
    out << "  downloading...\n";
    if (std::system(fetch.c_str()) == 0) {
      const std::string unpack = "cd '" + root.string() +
                                 "' && python3 -c \"import zipfile; "
                                 "zipfile.ZipFile('ml-100k.zip').extractall()\"";
      if (std::system(unpack.c_str()) != 0) {
        out << "  could not unpack " << zip.string() << '\n';
      }
    } else {
      out << "  download failed; fetch it manually from the URL above\n";
    }
  }
  if (fs::exists(u_data) && verify_movielens(u_data, out)) {
    out << "  ok\n";
  } else {
    out << "  MISSING: expected " << u_data.string() << '\n';
    all_ok = false;
  }

  out << "LETOR 4.0 MQ2008-semi (Fold1)\n"
      << "  source: the LETOR 4.0 distribution (MQ2008-semi.rar), published on the\n"
      << "  Microsoft Research LETOR page; also redistributed with the IRGAN benchmark\n"
      << "  code (github.com/geek-ai/irgan). Unpack Fold1 so that\n"
      << "  " << (root / "MQ2008-semi" / "Fold1").string() << "/{train.txt,vali.txt,test.txt} exist.\n";
  bool letor_ok = true;
  for (const char* name : {"train.txt", "test.txt"}) {
    const fs::path file = root / "MQ2008-semi" / "Fold1" / name;
    if (!(fs::exists(file) && verify_letor_file(file, out))) {
      out << "  MISSING: " << file.string() << '\n';
      letor_ok = false;
    }
  }
  // the fold's three splits partition the published 784 unique queries
  if (letor_ok && fs::exists(root / "MQ2008-semi" / "Fold1" / "vali.txt")) {
    std::set<std::string> qids;
    for (const char* name : {"train.txt", "vali.txt", "test.txt"}) {
      collect_qids(root / "MQ2008-semi" / "Fold1" / name, qids);
    }
    out << "  distinct queries across Fold1: " << qids.size() << " (expected 784)\n";
    if (qids.size() != 784) {
      out << "  warning: query count differs from the published release\n";
      letor_ok = false;
    }
  }
  if (letor_ok) {
    out << "  ok\n";
  }
  all_ok = all_ok && letor_ok;
  return all_ok;
}

}  // namespace advrank

#pragma once

#include "advrank/models.hpp"
#include "advrank/numerics.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace advrank {

inline constexpr int kLetorFeatureDim = 46;

/// One line of a LETOR/SVMlight ranking file.
struct LetorRecord {
  int relevance = 0;  // -1 (unlabeled), 0, 1, 2
  std::string query_id;
  Vec features;  // always kLetorFeatureDim entries
  std::string doc_id;
};

/// One MovieLens transaction, with user/item already densely re-indexed.
struct Interaction {
  int user = 0;
  int item = 0;
  int rating = 0;  // 1..5
  long long timestamp = 0;
};

struct MovielensData {
  std::vector<Interaction> interactions;
  std::vector<int> user_ids;  // dense index -> raw id
  std::vector<int> item_ids;
};

/// Per-query labeled (positive) and unlabeled (negative candidate) pools.
/// Document payloads are parallel arrays; only the arrays matching `rep`
/// are populated.
struct RankingDataset {
  Representation rep = Representation::JointFeatures;
  int feature_dim = 0;
  int num_users = 0;
  int num_items = 0;
  int vocab_size = 0;

  struct Query {
    std::string id;
    int user = -1;                             // UserItemIds
    std::vector<int> query_tokens;             // TokenSequences
    Mat features;                              // JointFeatures: docs x feature_dim
    std::vector<int> items;                    // UserItemIds: item id per doc
    std::vector<std::vector<int>> doc_tokens;  // TokenSequences
    std::vector<std::string> doc_ids;          // may be empty
    std::vector<double> grades;                // eval relevance; may be empty
    std::vector<int> labeled;                  // doc indices of the positive pool
    std::vector<int> unlabeled;                // doc indices of the candidate pool

    int num_docs() const;
    double grade(int doc) const { return grades.empty() ? 0.0 : grades[doc]; }
  };
  std::vector<Query> queries;

  /// View of one document as a scoring-model input.
  Example example(int query_idx, int doc_idx) const;

  std::size_t total_labeled() const;
};

/// Parse `<rel> qid:<id> 1:<v> ... 46:<v> [#docid = <id> ...]` lines.
/// Malformed or incomplete lines raise std::runtime_error naming the line.
std::vector<LetorRecord> parse_letor(std::istream& in);

/// Canonical text form: features in index order, shortest round-trip floats,
/// doc id comment when present. parse(serialize(r)) == r.
std::string serialize_letor(const std::vector<LetorRecord>& records);

/// Relevance 1 and 2 become the labeled pool, -1 and 0 the unlabeled pool;
/// grades (capped below at 0) are kept for evaluation. With for_training
/// set, queries without any labeled document are dropped.
RankingDataset compile_letor_dataset(const std::vector<LetorRecord>& records, bool for_training);

/// Parse tab-separated `user item rating timestamp` lines and re-index ids
/// densely in order of first appearance.
MovielensData parse_movielens(std::istream& in);

struct MovielensSplit {
  RankingDataset train;
  RankingDataset test;
  int users_without_train_positives = 0;
};

/// Ratings >= 4 are the single-class labeled data, split split_ratio : rest
/// into train/test by the seeded Rng. Each user's candidate pool is every
/// item minus their train positives; test relevance is binary.
MovielensSplit compile_movielens_dataset(const MovielensData& data, double split_ratio,
                                         std::uint64_t seed);

/// Keep ceil(fraction * N) labeled examples chosen uniformly across the whole
/// dataset; unlabeled pools are untouched and queries left without positives
/// are dropped. fraction must be in (0, 1]; 1.0 returns the input unchanged.
RankingDataset subsample_labels(const RankingDataset& ds, double fraction, std::uint64_t seed);

/// Versioned little-endian binary container so repeated runs skip parsing.
void save_dataset_cache(const RankingDataset& ds, const std::filesystem::path& path);
RankingDataset load_dataset_cache(const std::filesystem::path& path);

/// Sidecar mapping dense indices back to raw MovieLens ids.
void save_id_map(const MovielensData& data, const std::filesystem::path& path);

}  // namespace advrank

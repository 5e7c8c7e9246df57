#pragma once

#include "advrank/data.hpp"
#include "advrank/models.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace advrank {

/// Fraction of the top n that is relevant (grade > 0); lists shorter than n
/// count the missing tail as irrelevant.
double precision_at(const std::vector<double>& ranked_grades, int n);

/// DCG with gain 2^grade - 1 and discount log2(rank+1), normalized by the
/// ideal ordering of ideal_grades; 0 when the ideal DCG is 0.
double ndcg_at(const std::vector<double>& ranked_grades, std::vector<double> ideal_grades, int n);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  /// Set when the differences have zero variance: identical lists give
  /// t = 0, p = 1; a constant nonzero shift gives t = +/-inf, p = 0.
  bool degenerate = false;
};

/// Two-sided paired t-test on per-query metric differences (a - b).
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

/// Candidate doc indices ordered by descending score; ties break by
/// ascending doc index.
std::vector<int> rank_documents(const ScoreModel& model, const RankingDataset& ds, int query_idx);

struct QueryMetrics {
  std::string query_id;
  std::vector<double> precision;  // aligned with EvalReport::cutoffs
  std::vector<double> ndcg;
};

struct EvalReport {
  std::vector<int> cutoffs;
  std::vector<QueryMetrics> per_query;
  std::vector<double> mean_precision;
  std::vector<double> mean_ndcg;
  /// Queries without any relevant document, excluded from the means.
  int skipped_queries = 0;

  std::string config_hash;
  std::uint64_t seed = 0;
  int epoch = 0;

  double mean_precision_at(int n) const;
  double mean_ndcg_at(int n) const;
};

EvalReport evaluate(const ScoreModel& model, const RankingDataset& ds,
                    const std::vector<int>& cutoffs);

/// 9-significant-digit float formatting used by every report writer.
std::string format_sig9(double v);

/// Columns: metric, cutoff, value.
void write_report_tsv(const EvalReport& report, const std::filesystem::path& path);

/// Full per-query detail plus run metadata.
void write_report_json(const EvalReport& report, const std::filesystem::path& path);

}  // namespace advrank

#include "advrank/eval.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace advrank {

double precision_at(const std::vector<double>& ranked_grades, int n) {
  if (n < 1) {
    throw std::invalid_argument("precision_at: n must be >= 1");
  }
  int hits = 0;
  const int top = std::min<int>(n, static_cast<int>(ranked_grades.size()));
  for (int r = 0; r < top; ++r) {
    if (ranked_grades[r] > 0.0) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

namespace {

double dcg_at(const std::vector<double>& grades, int n) {
  double dcg = 0.0;
  const int top = std::min<int>(n, static_cast<int>(grades.size()));
  for (int r = 0; r < top; ++r) {
    dcg += (std::exp2(grades[r]) - 1.0) / std::log2(static_cast<double>(r) + 2.0);
  }
  return dcg;
}

}  // namespace

double ndcg_at(const std::vector<double>& ranked_grades, std::vector<double> ideal_grades, int n) {
  if (n < 1) {
    throw std::invalid_argument("ndcg_at: n must be >= 1");
  }
  std::sort(ideal_grades.begin(), ideal_grades.end(), std::greater<>());
  const double idcg = dcg_at(ideal_grades, n);
  if (idcg <= 0.0) {
    return 0.0;
  }
  return dcg_at(ranked_grades, n) / idcg;
}

// ---------------------------------------------------------------------------
// Paired t-test. The two-sided p-value comes from the regularized incomplete
// beta: p = I_{v/(v+t^2)}(v/2, 1/2) for v degrees of freedom.

namespace {

double beta_cont_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) {
    d = kTiny;
  }
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) {
      d = kTiny;
    }
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) {
      c = kTiny;
    }
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) {
      d = kTiny;
    }
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) {
      c = kTiny;
    }
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) {
      break;
    }
  }
  return h;
}

double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) {
    return 0.0;
  }
  if (x >= 1.0) {
    return 1.0;
  }
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                       b * std::log1p(-x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return bt * beta_cont_fraction(a, b, x) / a;
  }
  return 1.0 - bt * beta_cont_fraction(b, a, 1.0 - x) / b;
}

}  // namespace

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw std::invalid_argument("paired_t_test: need two lists of equal length >= 2");
  }
  const std::size_t n = a.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean += a[i] - b[i];
  }
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (a[i] - b[i]) - mean;
    ss += d * d;
  }
  const double var = ss / static_cast<double>(n - 1);

  TTestResult out;
  if (var <= 0.0) {
    out.degenerate = true;
    if (mean == 0.0) {
      out.t = 0.0;
      out.p = 1.0;
    } else {
      out.t = mean > 0.0 ? std::numeric_limits<double>::infinity()
                         : -std::numeric_limits<double>::infinity();
      out.p = 0.0;
    }
    return out;
  }
  const double dof = static_cast<double>(n - 1);
  out.t = mean / std::sqrt(var / static_cast<double>(n));
  out.p = reg_inc_beta(dof / 2.0, 0.5, dof / (dof + out.t * out.t));
  return out;
}

// ---------------------------------------------------------------------------
// Ranking and report assembly

std::vector<int> rank_documents(const ScoreModel& model, const RankingDataset& ds, int query_idx) {
  const auto& q = ds.queries[query_idx];
  const int n = q.num_docs();
  if (n == 0) {
    throw std::invalid_argument("rank_documents: query has no candidates");
  }
  std::vector<double> scores(n);
  for (int d = 0; d < n; ++d) {
    scores[d] = model.score(ds.example(query_idx, d));
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int lhs, int rhs) {
    if (scores[lhs] != scores[rhs]) {
      return scores[lhs] > scores[rhs];
    }
    return lhs < rhs;
  });
  return order;
}

double EvalReport::mean_precision_at(int n) const {
  for (std::size_t i = 0; i < cutoffs.size(); ++i) {
    if (cutoffs[i] == n) {
      return mean_precision[i];
    }
  }
  throw std::out_of_range("EvalReport: cutoff not evaluated");
}

double EvalReport::mean_ndcg_at(int n) const {
  for (std::size_t i = 0; i < cutoffs.size(); ++i) {
    if (cutoffs[i] == n) {
      return mean_ndcg[i];
    }
  }
  throw std::out_of_range("EvalReport: cutoff not evaluated");
}

EvalReport evaluate(const ScoreModel& model, const RankingDataset& ds,
                    const std::vector<int>& cutoffs) {
  EvalReport report;
  report.cutoffs = cutoffs;
  report.mean_precision.assign(cutoffs.size(), 0.0);
  report.mean_ndcg.assign(cutoffs.size(), 0.0);

  for (std::size_t qi = 0; qi < ds.queries.size(); ++qi) {
    const auto& q = ds.queries[qi];
    const int n = q.num_docs();
    std::vector<double> all_grades(n);
    bool any_relevant = false;
    for (int d = 0; d < n; ++d) {
      all_grades[d] = q.grade(d);
      any_relevant = any_relevant || all_grades[d] > 0.0;
    }
    if (!any_relevant) {
      ++report.skipped_queries;
      continue;
    }
    const std::vector<int> order = rank_documents(model, ds, static_cast<int>(qi));
    std::vector<double> ranked(n);
    for (int r = 0; r < n; ++r) {
      ranked[r] = all_grades[order[r]];
    }
    QueryMetrics qm;
    qm.query_id = q.id;
    for (const int c : cutoffs) {
      qm.precision.push_back(precision_at(ranked, c));
      qm.ndcg.push_back(ndcg_at(ranked, all_grades, c));
    }
    report.per_query.push_back(std::move(qm));
  }

  const double count = static_cast<double>(report.per_query.size());
  if (count > 0) {
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      double ps = 0.0;
      double ns = 0.0;
      for (const auto& qm : report.per_query) {
        ps += qm.precision[c];
        ns += qm.ndcg[c];
      }
      report.mean_precision[c] = ps / count;
      report.mean_ndcg[c] = ns / count;
    }
  }
  return report;
}

std::string format_sig9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void write_report_tsv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("write_report_tsv: cannot open " + path.string());
  }
  out << "metric\tcutoff\tvalue\n";
  for (std::size_t c = 0; c < report.cutoffs.size(); ++c) {
    out << "precision\t" << report.cutoffs[c] << '\t' << format_sig9(report.mean_precision[c])
        << '\n';
  }
  for (std::size_t c = 0; c < report.cutoffs.size(); ++c) {
    out << "ndcg\t" << report.cutoffs[c] << '\t' << format_sig9(report.mean_ndcg[c]) << '\n';
  }
}

void write_report_json(const EvalReport& report, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "advrank.report";
  j["version"] = 1;
  j["metadata"] = {{"config_hash", report.config_hash},
                   {"seed", report.seed},
                   {"epoch", report.epoch}};
  j["cutoffs"] = report.cutoffs;
  j["queries_evaluated"] = report.per_query.size();
  j["queries_skipped_no_relevant"] = report.skipped_queries;

  nlohmann::json means = nlohmann::json::object();
  nlohmann::json mean_p = nlohmann::json::object();
  nlohmann::json mean_n = nlohmann::json::object();
  for (std::size_t c = 0; c < report.cutoffs.size(); ++c) {
    mean_p[std::to_string(report.cutoffs[c])] = format_sig9(report.mean_precision[c]);
    mean_n[std::to_string(report.cutoffs[c])] = format_sig9(report.mean_ndcg[c]);
  }
  means["precision"] = mean_p;
  means["ndcg"] = mean_n;
  j["means"] = means;

  nlohmann::json per_query = nlohmann::json::array();
  for (const auto& qm : report.per_query) {
    nlohmann::json entry;
    entry["query"] = qm.query_id;
    nlohmann::json p = nlohmann::json::array();
    nlohmann::json nd = nlohmann::json::array();
    for (std::size_t c = 0; c < report.cutoffs.size(); ++c) {
      p.push_back(format_sig9(qm.precision[c]));
      nd.push_back(format_sig9(qm.ndcg[c]));
    }
    entry["precision"] = p;
    entry["ndcg"] = nd;
    per_query.push_back(std::move(entry));
  }
  j["per_query"] = per_query;

  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("write_report_json: cannot open " + path.string());
  }
  out << j.dump(2) << '\n';
}

}  // namespace advrank

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "advrank/sampling.hpp"
#include "support/linear_model.hpp"
#include "support/synthetic.hpp"

#include <cmath>
#include <map>

using namespace advrank;
using namespace advrank::testing;

namespace {

LinearJointModel unit_model() {
  Vec w(1);
  w << 1;
  return LinearJointModel(w, 0.0);
}

}  // namespace

TEST_CASE("sample_uniform") {
  SUBCASE("single-document pool") {
    const RankingDataset ds = joint_dataset_from_values({0.3});
    SamplerConfig cfg;
    NegativePool pool(ds, cfg);
    Rng rng(1);
    for (int i = 0; i < 10; ++i) {
      CHECK(pool.sample_uniform(0, rng) == 0);
    }
  }

  SUBCASE("frequencies within 3 sigma of uniform") {
    const RankingDataset ds = joint_dataset_from_values({0.1, 0.2, 0.3, 0.4});
    SamplerConfig cfg;
    NegativePool pool(ds, cfg);
    Rng rng(2);
    const int draws = 100000;
    std::map<int, int> counts;
    for (int i = 0; i < draws; ++i) {
      counts[pool.sample_uniform(0, rng)]++;
    }
    const double p = 0.25;
    const double sigma = std::sqrt(p * (1 - p) * draws);
    for (int d = 0; d < 4; ++d) {
      CHECK(std::abs(counts[d] - p * draws) < 3 * sigma);
    }
  }

  SUBCASE("empty pool is an error") {
    RankingDataset ds = joint_dataset_from_values({0.5}, 1);  // the only doc is labeled
    SamplerConfig cfg;
    NegativePool pool(ds, cfg);
    Rng rng(3);
    CHECK_THROWS_AS(pool.sample_uniform(0, rng), std::runtime_error);
  }
}

TEST_CASE("sample_adversarial distribution") {
  const LinearJointModel model = unit_model();

  SUBCASE("two candidates with scores (1,0) at tau 1") {
    const RankingDataset ds = joint_dataset_from_values({1.0, 0.0});
    SamplerConfig cfg;
    cfg.tau = 1.0;
    cfg.candidate_pool = 0;  // whole pool
    NegativePool pool(ds, cfg);
    Rng rng(4);
    const int draws = 100000;
    int first = 0;
    for (int i = 0; i < draws; ++i) {
      first += pool.sample_adversarial(0, model, cfg, rng) == 0 ? 1 : 0;
    }
    const double p = 0.7310585786300049;
    const double sigma = std::sqrt(p * (1 - p) * draws);
    CHECK(std::abs(first - p * draws) < 3 * sigma);
  }

  SUBCASE("equal scores reduce to uniform") {
    const RankingDataset ds = joint_dataset_from_values({0.5, 0.5, 0.5});
    SamplerConfig cfg;
    cfg.candidate_pool = 0;
    NegativePool pool(ds, cfg);
    Rng rng(5);
    const int draws = 60000;
    std::map<int, int> counts;
    for (int i = 0; i < draws; ++i) {
      counts[pool.sample_adversarial(0, model, cfg, rng)]++;
    }
    const double sigma = std::sqrt((1.0 / 3) * (2.0 / 3) * draws);
    for (int d = 0; d < 3; ++d) {
      CHECK(std::abs(counts[d] - draws / 3.0) < 3 * sigma);
    }
  }

  SUBCASE("candidate subset of one ignores the scores") {
    const RankingDataset ds = joint_dataset_from_values({100.0, 0.0, -100.0});
    SamplerConfig cfg;
    cfg.candidate_pool = 1;
    NegativePool pool(ds, cfg);
    Rng rng(6);
    const int draws = 30000;
    std::map<int, int> counts;
    for (int i = 0; i < draws; ++i) {
      counts[pool.sample_adversarial(0, model, cfg, rng)]++;
    }
    // degenerate subset: the pre-drawn candidate is returned, so the
    // distribution is the uniform subset draw, not the softmax
    const double sigma = std::sqrt((1.0 / 3) * (2.0 / 3) * draws);
    for (int d = 0; d < 3; ++d) {
      CHECK(std::abs(counts[d] - draws / 3.0) < 3 * sigma);
    }
  }

  SUBCASE("empty pool is an error") {
    RankingDataset ds = joint_dataset_from_values({0.5}, 1);
    SamplerConfig cfg;
    NegativePool pool(ds, cfg);
    Rng rng(7);
    CHECK_THROWS_AS(pool.sample_adversarial(0, model, cfg, rng), std::runtime_error);
  }
}

TEST_CASE("temperature controls concentration monotonically") {
  Vec scores(4);
  scores << 2.0, 1.0, 0.5, -1.0;
  double prev = 1.1;
  for (const double tau : {0.1, 0.5, 1.0, 2.0, 10.0}) {
    const double top = softmax_with_temperature(scores, tau)[0];
    CHECK(top <= prev + 1e-15);
    prev = top;
  }
}

TEST_CASE("score cache and staleness") {
  const RankingDataset ds = joint_dataset_from_values({0.4, -0.2, 0.9});
  const LinearJointModel model = unit_model();
  SamplerConfig cfg;
  cfg.refresh_every_batches = 3;
  NegativePool pool(ds, cfg);

  pool.refresh_scores(0, model);
  CHECK(pool.staleness(0) == 0);
  const Vec& cached = pool.cached_scores(0);
  for (std::size_t i = 0; i < pool.pool(0).size(); ++i) {
    const double direct = model.score(ds.example(0, pool.pool(0)[i]));
    CHECK(cached[static_cast<Index>(i)] == direct);  // bit-exact
  }

  pool.tick_batch();
  pool.tick_batch();
  CHECK(pool.staleness(0) == 2);  // K-1 batches without refresh

  // a stale cache refreshes lazily inside sampling
  pool.tick_batch();
  Rng rng(8);
  (void)pool.sample_adversarial(0, model, cfg, rng);
  CHECK(pool.staleness(0) == 0);

  // refresh on an empty pool is a no-op
  RankingDataset empty = joint_dataset_from_values({0.5}, 1);
  NegativePool epool(empty, cfg);
  epool.refresh_scores(0, model);
  CHECK(epool.pool(0).empty());
}

TEST_CASE("clicked documents never surface as negatives") {
  std::istringstream in(synthetic_letor_text(6, 20, 77));
  const RankingDataset ds = compile_letor_dataset(parse_letor(in), true);
  Vec w = Vec::Zero(kLetorFeatureDim);
  w[0] = 1.0;
  const LinearJointModel model(w, 0.0);
  SamplerConfig cfg;
  cfg.exclude_labeled = true;
  cfg.candidate_pool = 4;
  NegativePool pool(ds, cfg);
  Rng rng(9);
  for (std::size_t q = 0; q < ds.queries.size(); ++q) {
    std::set<int> labeled(ds.queries[q].labeled.begin(), ds.queries[q].labeled.end());
    for (int i = 0; i < 500; ++i) {
      CHECK_FALSE(labeled.count(pool.sample(static_cast<int>(q), model, cfg, rng)));
    }
  }
}

TEST_CASE("adversarial sampling draws harder negatives than uniform") {
  Rng gen(31);
  std::vector<double> values(80);
  for (auto& v : values) {
    v = gen.normal();
  }
  const RankingDataset ds = joint_dataset_from_values(values);
  const LinearJointModel model = unit_model();
  SamplerConfig cfg;
  cfg.candidate_pool = 16;
  NegativePool pool(ds, cfg);
  Rng rng(32);
  double adv_sum = 0.0;
  double uni_sum = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    adv_sum += values[pool.sample_adversarial(0, model, cfg, rng)];
    uni_sum += values[pool.sample_uniform(0, rng)];
  }
  CHECK(adv_sum / draws >= uni_sum / draws);
}

TEST_CASE("sampling is deterministic under a fixed seed") {
  const RankingDataset ds = joint_dataset_from_values({0.1, 0.7, -0.3, 0.2, 0.5});
  const LinearJointModel model = unit_model();
  SamplerConfig cfg;
  cfg.candidate_pool = 3;
  NegativePool p1(ds, cfg);
  NegativePool p2(ds, cfg);
  Rng r1(123);
  Rng r2(123);
  for (int i = 0; i < 200; ++i) {
    CHECK(p1.sample(0, model, cfg, r1) == p2.sample(0, model, cfg, r2));
  }
  CHECK(p1.samples_drawn() == 200);
}

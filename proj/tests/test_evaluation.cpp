#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "alsrec/evaluation.hpp"
#include "support/oracles.hpp"

using namespace alsrec;

namespace {

// mu = 3, zero biases, k = 1 so each user ranks items differently.
struct Fixture {
  ModelParams p;
  CsrMatrix train;
  CsrMatrix test;

  Fixture() {
    p.mu = 3.0;
    p.b_user = Vector::Zero(3);
    p.b_item = Vector::Zero(6);
    p.U = Factors(3, 1);
    p.U << 1.0, -1.0, 0.5;
    p.V = Factors(6, 1);
    p.V << 0.9, 0.8, 0.1, -0.2, 0.5, -0.7;
    const std::vector<Triple> tr{{0, 0, 4.0}, {1, 5, 3.0}, {1, 3, 2.0}, {2, 1, 4.0}};
    const std::vector<Triple> te{{0, 1, 4.0}, {0, 4, 2.0}, {0, 3, 5.0},
                                 {1, 2, 3.5}, {1, 0, 4.5}, {2, 2, 3.0}};
    train = build_csr(tr, 3, 6, Orientation::ByUser);
    test = build_csr(te, 3, 6, Orientation::ByUser);
  }
};

// Full sort of every unmasked item.
std::vector<Index> brute_top_k(const ModelParams& p, std::size_t u, const CsrMatrix& train,
                               std::size_t k) {
  std::vector<std::pair<double, Index>> all;
  for (Index i = 0; i < p.n_items(); ++i) {
    bool seen = false;
    for (auto c : train.row_indices(u)) seen = seen || c == i;
    if (!seen) all.emplace_back(-oracle::naive_predict(p, u, i), i);
  }
  std::sort(all.begin(), all.end());
  std::vector<Index> out;
  for (std::size_t j = 0; j < std::min(k, all.size()); ++j) out.push_back(all[j].second);
  return out;
}

}  // namespace

TEST(Rmse, PerfectPredictorIsZero) {
  ModelParams p;
  p.mu = 3.0;
  p.b_user = Vector::Zero(1);
  p.b_item = (Vector(2) << 1.0, -0.5).finished();
  p.U = Factors::Zero(1, 0);
  p.V = Factors::Zero(2, 0);
  const auto m = build_csr(std::vector<Triple>{{0, 0, 4.0}, {0, 1, 2.5}}, 1, 2, Orientation::ByUser);
  EXPECT_EQ(rmse(p, m), 0.0);
}

TEST(Rmse, ConstantPredictor) {
  ModelParams p;
  p.mu = 4.0;
  p.b_user = Vector::Zero(1);
  p.b_item = Vector::Zero(3);
  p.U = Factors::Zero(1, 0);
  p.V = Factors::Zero(3, 0);
  const auto m = build_csr(std::vector<Triple>{{0, 0, 3.0}, {0, 1, 4.0}, {0, 2, 5.0}}, 1, 3,
                           Orientation::ByUser);
  EXPECT_NEAR(rmse(p, m), std::sqrt(2.0 / 3.0), 1e-15);
}

TEST(Rmse, EmptyDataIsAnError) {
  Hyperparams h{1, 0.1, 0.1, 1, 0};
  const auto p = init_params(h, 2, 2, 3.0);
  EXPECT_THROW(rmse(p, build_csr(std::vector<Triple>{}, 2, 2, Orientation::ByUser)), Error);
}

TEST(Rmse, MatchesNaiveLoop) {
  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = oracle::random_instance(rng, 15, 15, 0.4);
    Hyperparams h{static_cast<std::size_t>(trial % 4), 0.1, 0.1, 1, rng()};
    const auto p = init_params(h, inst.n_users, inst.n_items, 3.2);
    double sse = 0.0;
    for (const auto& t : inst.triples) {
      const double e = t.rating - oracle::naive_predict(p, t.user, t.item);
      sse += e * e;
    }
    const auto m = build_csr(inst.triples, inst.n_users, inst.n_items, Orientation::ByUser);
    EXPECT_NEAR(rmse(p, m), std::sqrt(sse / static_cast<double>(inst.triples.size())), 1e-12);
  }
}

TEST(TopK, HandBuiltFixture) {
  const Fixture f;
  EXPECT_EQ(top_k_items(f.p, 0, f.train, 2), (std::vector<Index>{1, 4}));
  EXPECT_EQ(top_k_items(f.p, 1, f.train, 2), (std::vector<Index>{2, 4}));
  EXPECT_EQ(top_k_items(f.p, 2, f.train, 2), (std::vector<Index>{0, 4}));

  EvalConfig cfg;
  cfg.k = 2;
  const auto m = topk_metrics(f.p, f.train, f.test, cfg);
  EXPECT_EQ(m.users_evaluated, 3u);
  EXPECT_EQ(m.users_with_relevant, 2u);
  EXPECT_DOUBLE_EQ(m.precision, (0.5 + 0.5 + 0.0) / 3.0);
  EXPECT_DOUBLE_EQ(m.recall, (0.5 + 0.5) / 2.0);
}

TEST(TopK, AllRelevantGivesPrecisionOne) {
  Fixture f;
  // User 0's top two unmasked items are 1 and 4; make both liked test items.
  const std::vector<Triple> te{{0, 1, 4.0}, {0, 4, 5.0}};
  f.test = build_csr(te, 3, 6, Orientation::ByUser);
  EvalConfig cfg;
  cfg.k = 2;
  const auto m = topk_metrics(f.p, f.train, f.test, cfg);
  EXPECT_EQ(m.users_evaluated, 1u);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
}

TEST(TopK, UserWithoutRelevantItemsIsLeftOutOfRecall) {
  Fixture f;
  const std::vector<Triple> te{{2, 2, 3.0}};
  f.test = build_csr(te, 3, 6, Orientation::ByUser);
  EvalConfig cfg;
  cfg.k = 2;
  const auto m = topk_metrics(f.p, f.train, f.test, cfg);
  EXPECT_EQ(m.users_evaluated, 1u);
  EXPECT_EQ(m.users_with_relevant, 0u);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
}

TEST(TopK, SampleLargerThanPopulationEvaluatesEveryone) {
  const Fixture f;
  EvalConfig cfg;
  cfg.k = 2;
  cfg.sample_users = 1000;
  EXPECT_EQ(topk_metrics(f.p, f.train, f.test, cfg).users_evaluated, 3u);
  cfg.sample_users = 2;
  EXPECT_EQ(topk_metrics(f.p, f.train, f.test, cfg).users_evaluated, 2u);
}

TEST(TopK, TiesBreakTowardSmallerId) {
  ModelParams p;
  p.mu = 3.0;
  p.b_user = Vector::Zero(1);
  p.b_item = Vector::Zero(5);
  p.U = Factors::Zero(1, 0);
  p.V = Factors::Zero(5, 0);
  const auto train = build_csr(std::vector<Triple>{{0, 1, 3.0}}, 1, 5, Orientation::ByUser);
  EXPECT_EQ(top_k_items(p, 0, train, 3), (std::vector<Index>{0, 2, 3}));
}

TEST(TopK, InvalidConfig) {
  const Fixture f;
  EvalConfig cfg;
  cfg.k = 0;
  EXPECT_THROW(topk_metrics(f.p, f.train, f.test, cfg), Error);
  cfg.k = 2;
  cfg.relevance_threshold = 3.3;
  EXPECT_THROW(topk_metrics(f.p, f.train, f.test, cfg), Error);
}

TEST(TopK, MaskingAndBruteForceAgreeOnRandomFixtures) {
  std::mt19937_64 rng(89);
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = oracle::random_instance(rng, 10, 15, 0.3);
    Hyperparams h{2, 0.1, 0.1, 1, rng()};
    const auto p = init_params(h, inst.n_users, inst.n_items, 3.0);
    const auto train = build_csr(inst.triples, inst.n_users, inst.n_items, Orientation::ByUser);
    for (std::size_t u = 0; u < inst.n_users; ++u) {
      const auto top = top_k_items(p, u, train, 5);
      for (auto i : top) EXPECT_FALSE(train.contains(u, i));
      EXPECT_EQ(top, brute_top_k(p, u, train, 5));
    }
  }
}

TEST(TopK, ShiftingAUsersScoresKeepsTheList) {
  std::mt19937_64 rng(97);
  const auto inst = oracle::random_instance(rng, 10, 20, 0.3);
  Hyperparams h{3, 0.1, 0.1, 1, 5};
  auto p = init_params(h, inst.n_users, inst.n_items, 3.0);
  const auto train = build_csr(inst.triples, inst.n_users, inst.n_items, Orientation::ByUser);
  const auto before = top_k_items(p, 3, train, 5);
  p.b_user[3] += 0.75;
  EXPECT_EQ(top_k_items(p, 3, train, 5), before);
}

TEST(TopK, DeterministicForSeedAndIntegralCounts) {
  std::mt19937_64 rng(101);
  const auto inst = oracle::random_instance(rng, 40, 30, 0.3);
  Hyperparams h{3, 0.1, 0.1, 1, 5};
  const auto p = init_params(h, inst.n_users, inst.n_items, 3.0);
  std::vector<Triple> tr, te;
  for (std::size_t j = 0; j < inst.triples.size(); ++j) (j % 4 ? tr : te).push_back(inst.triples[j]);
  const auto train = build_csr(tr, inst.n_users, inst.n_items, Orientation::ByUser);
  const auto test = build_csr(te, inst.n_users, inst.n_items, Orientation::ByUser);
  EvalConfig cfg;
  cfg.k = 4;
  cfg.sample_users = 10;
  cfg.seed = 77;
  const auto a = topk_metrics(p, train, test, cfg);
  cfg.workers = 3;
  const auto b = topk_metrics(p, train, test, cfg);
  EXPECT_EQ(a.precision, b.precision);
  EXPECT_EQ(a.recall, b.recall);
  EXPECT_EQ(sample_test_users(test, 10, 77), sample_test_users(test, 10, 77));

  for (auto u : sample_test_users(test, 10, 77)) {
    const auto hits = user_hits(top_k_items(p, u, train, 4), test, u, 3.5);
    const double prec = static_cast<double>(hits.hits) / 4.0;
    EXPECT_EQ(prec * 4.0, std::round(prec * 4.0));
    EXPECT_LE(hits.hits, hits.relevant);
  }
}

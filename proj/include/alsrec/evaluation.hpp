#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "alsrec/csr.hpp"
#include "alsrec/engine.hpp"
#include "alsrec/error.hpp"
#include "alsrec/model.hpp"
#include "alsrec/parallel.hpp"
#include "alsrec/random.hpp"

namespace alsrec {

struct EvalConfig {
  std::size_t k = 10;
  double relevance_threshold = 3.5;
  std::size_t sample_users = 3000;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const {
    if (k < 1) throw Error("top-K size must be >= 1");
    if (!on_half_star_grid(relevance_threshold)) {
      throw Error("relevance threshold must be on the half-star grid");
    }
    if (sample_users < 1) throw Error("sample size must be >= 1");
  }
};

struct EvalReport {
  double rmse_train = 0.0;
  double rmse_test = 0.0;
  double precision_at_k = 0.0;
  double recall_at_k = 0.0;
  std::size_t users_evaluated = 0;
};

inline double rmse(const ModelParams& p, const CsrMatrix& by_user, std::size_t workers = 1) {
  if (by_user.nnz() == 0) throw Error("rmse: empty data");
  return std::sqrt(sum_squared_error(p, by_user, workers) / static_cast<double>(by_user.nnz()));
}

// Top-K over every item the user has not rated in `train`; ties go to the
// smaller item id.
inline std::vector<Index> top_k_items(const ModelParams& p, std::size_t user,
                                      const CsrMatrix& train, std::size_t k) {
  const auto seen = train.row_indices(user);
  std::vector<std::pair<double, Index>> cand;
  cand.reserve(p.n_items() - std::min(p.n_items(), seen.size()));
  std::size_t s = 0;
  for (Index i = 0; i < p.n_items(); ++i) {
    while (s < seen.size() && seen[s] < i) ++s;
    if (s < seen.size() && seen[s] == i) continue;
    cand.emplace_back(predict(p, user, i), i);
  }
  const auto better = [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  };
  const std::size_t take = std::min(k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(),
                    better);
  std::vector<Index> out(take);
  for (std::size_t j = 0; j < take; ++j) out[j] = cand[j].second;
  return out;
}

// Users with at least one test rating, sampled without replacement and
// returned in ascending id order.
inline std::vector<std::size_t> sample_test_users(const CsrMatrix& test, std::size_t n,
                                                  std::uint64_t seed) {
  std::vector<std::size_t> users;
  for (std::size_t u = 0; u < test.rows; ++u) {
    if (test.row_size(u) > 0) users.push_back(u);
  }
  if (n < users.size()) {
    std::mt19937_64 rng(derive_seed(seed, 0x4556u, 0));
    for (std::size_t j = 0; j < n; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, users.size() - 1);
      std::swap(users[j], users[pick(rng)]);
    }
    users.resize(n);
    std::sort(users.begin(), users.end());
  }
  return users;
}

struct UserHits {
  std::size_t hits = 0;
  std::size_t relevant = 0;
};

inline UserHits user_hits(const std::vector<Index>& top, const CsrMatrix& test, std::size_t user,
                          double threshold) {
  UserHits h;
  const auto idx = test.row_indices(user);
  const auto val = test.row_values(user);
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (val[j] < threshold) continue;
    ++h.relevant;
    if (std::find(top.begin(), top.end(), idx[j]) != top.end()) ++h.hits;
  }
  return h;
}

struct TopKMetrics {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t users_evaluated = 0;
  std::size_t users_with_relevant = 0;
};

// Precision@K averages hits/K over all sampled users; Recall@K averages
// hits/relevant over sampled users that have at least one relevant test item.
// Train items are masked out of every candidate list.
inline TopKMetrics topk_metrics(const ModelParams& p, const CsrMatrix& train,
                                const CsrMatrix& test, const EvalConfig& cfg) {
  cfg.validate();
  if (train.orientation != Orientation::ByUser || test.orientation != Orientation::ByUser) {
    throw Error("topk_metrics: expected by-user matrices");
  }
  if (train.rows != test.rows || train.cols != test.cols || train.rows != p.n_users() ||
      train.cols != p.n_items()) {
    throw Error("topk_metrics: train/test/model index spaces differ");
  }
  const auto users = sample_test_users(test, cfg.sample_users, cfg.seed);
  std::vector<UserHits> per_user(users.size());
  parallel_for_chunks(users.size(), cfg.workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t j = b; j < e; ++j) {
      const auto top = top_k_items(p, users[j], train, cfg.k);
      per_user[j] = user_hits(top, test, users[j], cfg.relevance_threshold);
    }
  });

  TopKMetrics m;
  m.users_evaluated = users.size();
  double prec = 0.0, rec = 0.0;
  for (const auto& h : per_user) {
    prec += static_cast<double>(h.hits) / static_cast<double>(cfg.k);
    if (h.relevant > 0) {
      rec += static_cast<double>(h.hits) / static_cast<double>(h.relevant);
      ++m.users_with_relevant;
    }
  }
  if (m.users_evaluated > 0) m.precision = prec / static_cast<double>(m.users_evaluated);
  if (m.users_with_relevant > 0) m.recall = rec / static_cast<double>(m.users_with_relevant);
  return m;
}

inline EvalReport evaluate(const ModelParams& p, const CsrMatrix& train, const CsrMatrix& test,
                           const EvalConfig& cfg) {
  EvalReport r;
  r.rmse_train = rmse(p, train, cfg.workers);
  r.rmse_test = rmse(p, test, cfg.workers);
  const auto m = topk_metrics(p, train, test, cfg);
  r.precision_at_k = m.precision;
  r.recall_at_k = m.recall;
  r.users_evaluated = m.users_evaluated;
  return r;
}

}  // namespace alsrec

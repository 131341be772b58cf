#pragma once

// Cold-start fold-in and popularity/affinity blended ranking.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "alsrec/csr.hpp"
#include "alsrec/engine.hpp"
#include "alsrec/error.hpp"
#include "alsrec/model.hpp"
#include "alsrec/ratings.hpp"

namespace alsrec {

struct ItemRating {
  Index item = 0;
  double stars = 0.0;
};

struct FoldedUser {
  Eigen::RowVectorXd traits;
  double bias = 0.0;
};

// One user-step visit for a user that is not in the model: starting from a
// zero trait vector, solve the bias, then the trait vector, with every item
// parameter frozen. Ratings are visited in ascending item order, as a
// training row would be.
inline FoldedUser fold_in_user(std::span<const ItemRating> ratings, const ModelParams& p,
                               const Hyperparams& h) {
  std::vector<std::pair<Index, double>> row;
  row.reserve(ratings.size());
  for (const auto& r : ratings) {
    if (r.item >= p.n_items()) throw Error("fold_in_user: unknown item " + std::to_string(r.item));
    if (!on_half_star_grid(r.stars)) throw Error("fold_in_user: rating not on half-star grid");
    row.emplace_back(r.item, r.stars);
  }
  std::sort(row.begin(), row.end());
  if (std::adjacent_find(row.begin(), row.end(), [](const auto& a, const auto& b) {
        return a.first == b.first;
      }) != row.end()) {
    throw Error("fold_in_user: item rated twice");
  }
  std::vector<Index> cols;
  std::vector<double> vals;
  for (const auto& [i, s] : row) {
    cols.push_back(i);
    vals.push_back(s);
  }

  FoldedUser out;
  out.traits = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(p.k()));
  const detail::FrozenSide items{p.b_item, p.V};
  out.bias = detail::solve_bias(p.mu, cols, vals, out.traits, items, h.lambda, h.tau);
  if (p.k() > 0) {
    detail::RidgeScratch scratch(static_cast<Eigen::Index>(p.k()));
    detail::solve_traits(p.mu, out.bias, cols, vals, items, h.lambda, h.tau, scratch, out.traits);
  }
  return out;
}

struct ScoredItem {
  Index item = 0;
  double score = 0.0;
  double popularity_part = 0.0;  // alpha * (mu + b_i)
  double affinity_part = 0.0;    // u . v_i
};

struct ScoreRequest {
  double alpha = 0.05;
  std::size_t top_k = 10;
  std::uint64_t min_ratings = 100;
};

// score = alpha * (mu + b_i) + u . v_i over items with at least `min_ratings`
// training ratings that the user did not rate; best first, ties by item id.
// The user bias is constant per user and does not enter the score.
inline std::vector<ScoredItem> score_items(const Eigen::RowVectorXd& user_traits,
                                           const ModelParams& p, std::span<const ItemRating> rated,
                                           const ScoreRequest& req,
                                           std::span<const std::uint64_t> item_counts) {
  if (req.top_k == 0) throw Error("score_items: top_k must be >= 1");
  if (!(req.alpha >= 0.0) || !std::isfinite(req.alpha)) throw Error("score_items: alpha must be >= 0");
  if (item_counts.size() != p.n_items()) throw Error("score_items: counts do not match item count");
  if (static_cast<std::size_t>(user_traits.size()) != p.k()) {
    throw Error("score_items: user vector has the wrong dimension");
  }
  std::vector<char> excluded(p.n_items(), 0);
  for (const auto& r : rated) {
    if (r.item < excluded.size()) excluded[r.item] = 1;
  }
  std::vector<ScoredItem> cand;
  for (Index i = 0; i < p.n_items(); ++i) {
    if (excluded[i] || item_counts[i] < req.min_ratings) continue;
    const auto ii = static_cast<Eigen::Index>(i);
    ScoredItem s;
    s.item = i;
    s.popularity_part = req.alpha * (p.mu + p.b_item[ii]);
    s.affinity_part = p.k() > 0 ? user_traits.dot(p.V.row(ii)) : 0.0;
    s.score = s.popularity_part + s.affinity_part;
    cand.push_back(s);
  }
  const std::size_t take = std::min(req.top_k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(),
                    [](const ScoredItem& a, const ScoredItem& b) {
                      return a.score > b.score || (a.score == b.score && a.item < b.item);
                    });
  cand.resize(take);
  return cand;
}

inline std::vector<ScoredItem> recommend_for(std::span<const ItemRating> ratings,
                                             const ModelParams& p, const Hyperparams& h,
                                             const ScoreRequest& req,
                                             std::span<const std::uint64_t> item_counts) {
  const auto user = fold_in_user(ratings, p, h);
  return score_items(user.traits, p, ratings, req, item_counts);
}

}  // namespace alsrec

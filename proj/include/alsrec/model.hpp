#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "alsrec/error.hpp"
#include "alsrec/random.hpp"

namespace alsrec {

using Vector = Eigen::VectorXd;
// Row r is the trait vector of user (or item) r; rows are contiguous.
using Factors = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// k = 0 selects the bias-only model.
struct Hyperparams {
  std::size_t k = 10;
  double lambda = 0.1;  // weight on the squared rating error
  double tau = 0.25;    // L2 penalty on biases and trait vectors
  std::size_t epochs = 20;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error("lambda must be > 0");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw Error("tau must be > 0");
    if (epochs < 1) throw Error("epochs must be >= 1");
  }

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

struct ModelParams {
  double mu = 0.0;
  Vector b_user;
  Vector b_item;
  Factors U;  // n_users x k
  Factors V;  // n_items x k

  std::size_t n_users() const noexcept { return static_cast<std::size_t>(b_user.size()); }
  std::size_t n_items() const noexcept { return static_cast<std::size_t>(b_item.size()); }
  std::size_t k() const noexcept { return static_cast<std::size_t>(U.cols()); }

  bool all_finite() const {
    return std::isfinite(mu) && b_user.allFinite() && b_item.allFinite() && U.allFinite() &&
           V.allFinite();
  }
};

// Stream tags for the per-row Gaussian draws.
inline constexpr std::uint64_t kUserStream = 0x55u;
inline constexpr std::uint64_t kItemStream = 0x49u;

// Biases start at zero; trait entries are N(0, 1/sqrt(k)) drawn from a stream
// keyed on (seed, side, row), so the result is independent of fill order.
inline ModelParams init_params(const Hyperparams& h, std::size_t n_users, std::size_t n_items,
                               double mu) {
  if (n_users == 0 || n_items == 0) throw Error("init_params: empty user or item set");
  ModelParams p;
  p.mu = mu;
  p.b_user = Vector::Zero(static_cast<Eigen::Index>(n_users));
  p.b_item = Vector::Zero(static_cast<Eigen::Index>(n_items));
  const auto k = static_cast<Eigen::Index>(h.k);
  p.U = Factors::Zero(static_cast<Eigen::Index>(n_users), k);
  p.V = Factors::Zero(static_cast<Eigen::Index>(n_items), k);
  if (h.k == 0) return p;

  const double stddev = 1.0 / std::sqrt(static_cast<double>(h.k));
  auto fill = [&](Factors& m, std::uint64_t stream) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      auto rng = make_stream(h.seed, stream, static_cast<std::uint64_t>(r));
      std::normal_distribution<double> normal(0.0, stddev);
      for (Eigen::Index c = 0; c < k; ++c) m(r, c) = normal(rng);
    }
  };
  fill(p.U, kUserStream);
  fill(p.V, kItemStream);
  return p;
}

inline double predict(const ModelParams& p, std::size_t user, std::size_t item, bool clip = false) {
  if (user >= p.n_users()) throw Error("predict: user id " + std::to_string(user) + " out of range");
  if (item >= p.n_items()) throw Error("predict: item id " + std::to_string(item) + " out of range");
  const auto u = static_cast<Eigen::Index>(user);
  const auto i = static_cast<Eigen::Index>(item);
  double r = p.mu + p.b_user[u] + p.b_item[i];
  if (p.k() > 0) r += p.U.row(u).dot(p.V.row(i));
  return clip ? std::clamp(r, 0.5, 5.0) : r;
}

}  // namespace alsrec

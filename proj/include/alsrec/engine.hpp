#pragma once

// Alternating closed-form training of the bias-only (k = 0) and bias + trait
// models. A half-step freezes one side and re-solves every row of the other
// side exactly; each row reads only frozen parameters and writes only its own
// bias and trait vector, so results do not depend on the worker count.

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "alsrec/csr.hpp"
#include "alsrec/error.hpp"
#include "alsrec/model.hpp"
#include "alsrec/parallel.hpp"

namespace alsrec {

enum class Side { User, Item };

namespace detail {

// The parameters of one side of the factorization, viewed generically so the
// user and item updates share one implementation.
struct SideRef {
  Vector& bias;
  Factors& factors;
};
struct FrozenSide {
  const Vector& bias;
  const Factors& factors;
};

inline SideRef own_side(ModelParams& p, Side s) {
  return s == Side::User ? SideRef{p.b_user, p.U} : SideRef{p.b_item, p.V};
}
inline FrozenSide other_side(const ModelParams& p, Side s) {
  return s == Side::User ? FrozenSide{p.b_item, p.V} : FrozenSide{p.b_user, p.U};
}

inline const char* side_name(Side s) { return s == Side::User ? "user" : "item"; }

// Scalar bias minimizer for one row given its current trait vector:
//   b = lambda * sum(r - mu - b_other - own.other) / (tau + lambda * n)
inline double solve_bias(double mu, std::span<const Index> cols, std::span<const double> vals,
                         const Eigen::Ref<const Eigen::RowVectorXd>& own_vec,
                         const FrozenSide& other, double lambda, double tau) {
  const bool traits = own_vec.size() > 0;
  double sum = 0.0;
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const auto c = static_cast<Eigen::Index>(cols[j]);
    double resid = vals[j] - mu - other.bias[c];
    if (traits) resid -= own_vec.dot(other.factors.row(c));
    sum += resid;
  }
  return lambda * sum / (tau + lambda * static_cast<double>(cols.size()));
}

// Per-worker scratch for the k x k normal equations.
struct RidgeScratch {
  Eigen::MatrixXd gram;
  Eigen::VectorXd rhs;
  Eigen::LLT<Eigen::MatrixXd> llt;

  explicit RidgeScratch(Eigen::Index k) : gram(k, k), rhs(k), llt(k) {}
};

// Trait-vector minimizer for one row with its bias held fixed:
//   (lambda * sum v v^T + tau I) x = lambda * sum v (r - mu - b_own - b_other)
inline void solve_traits(double mu, double own_bias, std::span<const Index> cols,
                         std::span<const double> vals, const FrozenSide& other, double lambda,
                         double tau, RidgeScratch& s, Eigen::Ref<Eigen::RowVectorXd> out) {
  s.gram.setZero();
  s.rhs.setZero();
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const auto c = static_cast<Eigen::Index>(cols[j]);
    const auto v = other.factors.row(c);
    s.gram.noalias() += v.transpose() * v;
    s.rhs.noalias() += (vals[j] - mu - own_bias - other.bias[c]) * v.transpose();
  }
  s.gram *= lambda;
  s.gram.diagonal().array() += tau;
  s.rhs *= lambda;
  s.llt.compute(s.gram);
  if (s.llt.info() != Eigen::Success) throw Error("normal equations not positive definite");
  out = s.llt.solve(s.rhs).transpose();
}

inline void visit_row(ModelParams& p, Side side, const CsrMatrix& m, std::size_t row,
                      const Hyperparams& h, bool traits, RidgeScratch* scratch) {
  SideRef own = own_side(p, side);
  const FrozenSide other = other_side(p, side);
  const auto r = static_cast<Eigen::Index>(row);
  const auto cols = m.row_indices(row);
  const auto vals = m.row_values(row);
  own.bias[r] = solve_bias(p.mu, cols, vals, own.factors.row(r), other, h.lambda, h.tau);
  if (traits) {
    solve_traits(p.mu, own.bias[r], cols, vals, other, h.lambda, h.tau, *scratch,
                 own.factors.row(r));
  }
  if (!std::isfinite(own.bias[r]) || (traits && !own.factors.row(r).allFinite())) {
    throw Error(std::string("non-finite parameters after update of ") + side_name(side) +
                " row " + std::to_string(row) + " (divergent hyperparameters?)");
  }
}

inline void check_orientation(const CsrMatrix& m, Side side, const ModelParams& p) {
  const bool ok = side == Side::User
                      ? (m.orientation == Orientation::ByUser && m.rows == p.n_users() &&
                         m.cols == p.n_items())
                      : (m.orientation == Orientation::ByItem && m.rows == p.n_items() &&
                         m.cols == p.n_users());
  if (!ok) throw Error(std::string("matrix shape/orientation does not match ") + side_name(side) +
                       " step");
}

inline void half_step(ModelParams& p, Side side, const CsrMatrix& m, const Hyperparams& h,
                      bool traits, std::size_t workers) {
  check_orientation(m, side, p);
  if (traits && p.k() == 0) throw Error("trait update requires k >= 1");
  parallel_for_chunks(m.rows, workers, [&](std::size_t begin, std::size_t end) {
    RidgeScratch scratch(static_cast<Eigen::Index>(p.k()));
    for (std::size_t row = begin; row < end; ++row) visit_row(p, side, m, row, h, traits, &scratch);
  });
}

}  // namespace detail

// Re-solves every user bias with items frozen. For k > 0 the residual also
// subtracts u.v, so this is the exact bias minimizer inside the full model.
inline void bias_user_step(ModelParams& p, const CsrMatrix& by_user, const Hyperparams& h,
                           std::size_t workers = 1) {
  detail::half_step(p, Side::User, by_user, h, false, workers);
}

inline void bias_item_step(ModelParams& p, const CsrMatrix& by_item, const Hyperparams& h,
                           std::size_t workers = 1) {
  detail::half_step(p, Side::Item, by_item, h, false, workers);
}

// For each user: bias first (with the current trait vector), then the ridge
// solve for the trait vector using the new bias.
inline void als_user_step(ModelParams& p, const CsrMatrix& by_user, const Hyperparams& h,
                          std::size_t workers = 1) {
  detail::half_step(p, Side::User, by_user, h, true, workers);
}

inline void als_item_step(ModelParams& p, const CsrMatrix& by_item, const Hyperparams& h,
                          std::size_t workers = 1) {
  detail::half_step(p, Side::Item, by_item, h, true, workers);
}

// One full user-step visit of a single row (bias, then traits when k > 0).
inline void visit_user(ModelParams& p, const CsrMatrix& by_user, std::size_t user,
                       const Hyperparams& h) {
  detail::check_orientation(by_user, Side::User, p);
  detail::RidgeScratch scratch(static_cast<Eigen::Index>(p.k()));
  detail::visit_row(p, Side::User, by_user, user, h, p.k() > 0, &scratch);
}

inline void visit_item(ModelParams& p, const CsrMatrix& by_item, std::size_t item,
                       const Hyperparams& h) {
  detail::check_orientation(by_item, Side::Item, p);
  detail::RidgeScratch scratch(static_cast<Eigen::Index>(p.k()));
  detail::visit_row(p, Side::Item, by_item, item, h, p.k() > 0, &scratch);
}

// Sum of squared (unclipped) prediction errors over a by-user matrix. Per-row
// partials are reduced in row order.
inline double sum_squared_error(const ModelParams& p, const CsrMatrix& by_user,
                                std::size_t workers = 1) {
  if (by_user.orientation != Orientation::ByUser) throw Error("expected a by-user matrix");
  if (by_user.rows > p.n_users() || by_user.cols > p.n_items()) {
    throw Error("matrix does not fit the model dimensions");
  }
  std::vector<double> partial(by_user.rows, 0.0);
  const bool traits = p.k() > 0;
  parallel_for_chunks(by_user.rows, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t u = begin; u < end; ++u) {
      const auto ui = static_cast<Eigen::Index>(u);
      const auto cols = by_user.row_indices(u);
      const auto vals = by_user.row_values(u);
      double acc = 0.0;
      for (std::size_t j = 0; j < cols.size(); ++j) {
        const auto i = static_cast<Eigen::Index>(cols[j]);
        double pred = p.mu + p.b_user[ui] + p.b_item[i];
        if (traits) pred += p.U.row(ui).dot(p.V.row(i));
        const double e = vals[j] - pred;
        acc += e * e;
      }
      partial[u] = acc;
    }
  });
  double total = 0.0;
  for (double x : partial) total += x;
  return total;
}

// lambda * SSE + tau * (|b_user|^2 + |b_item|^2 + |U|_F^2 + |V|_F^2)
inline double objective(const ModelParams& p, const CsrMatrix& by_user, const Hyperparams& h,
                        std::size_t workers = 1) {
  const double reg = p.b_user.squaredNorm() + p.b_item.squaredNorm() + p.U.squaredNorm() +
                     p.V.squaredNorm();
  return h.lambda * sum_squared_error(p, by_user, workers) + h.tau * reg;
}

inline double mean_rating(const CsrMatrix& m) {
  if (m.nnz() == 0) throw Error("mean_rating: empty matrix");
  double s = 0.0;
  for (double v : m.values) s += v;
  return s / static_cast<double>(m.nnz());
}

struct EpochRecord {
  std::size_t epoch = 0;
  double objective = 0.0;
  double train_rmse = 0.0;
  double test_rmse = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
};

using TrainHistory = std::vector<EpochRecord>;

struct TrainOptions {
  std::size_t workers = 1;
  // Called after every half-step with (params, side just updated, epoch).
  std::function<void(const ModelParams&, Side, std::size_t)> on_half_step;
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

// Trains from scratch: mu is the training mean, fixed for the whole run. An
// epoch is a user half-step followed by an item half-step. `test` may be null
// or empty, in which case test_rmse stays NaN.
inline TrainResult train(const DualCsr& data, const CsrMatrix* test, const Hyperparams& h,
                         const TrainOptions& opts = {}) {
  h.validate();
  if (data.by_user.rows != data.by_item.cols || data.by_user.cols != data.by_item.rows ||
      data.by_user.nnz() != data.by_item.nnz()) {
    throw Error("train: by-user and by-item matrices are not transposes");
  }
  TrainResult out;
  out.params = init_params(h, data.n_users(), data.n_items(), mean_rating(data.by_user));
  ModelParams& p = out.params;
  const bool traits = h.k > 0;
  const double n_train = static_cast<double>(data.by_user.nnz());

  for (std::size_t epoch = 1; epoch <= h.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    detail::half_step(p, Side::User, data.by_user, h, traits, opts.workers);
    if (opts.on_half_step) opts.on_half_step(p, Side::User, epoch);
    detail::half_step(p, Side::Item, data.by_item, h, traits, opts.workers);
    if (opts.on_half_step) opts.on_half_step(p, Side::Item, epoch);

    EpochRecord rec;
    rec.epoch = epoch;
    const double sse = sum_squared_error(p, data.by_user, opts.workers);
    const double reg = p.b_user.squaredNorm() + p.b_item.squaredNorm() + p.U.squaredNorm() +
                       p.V.squaredNorm();
    rec.objective = h.lambda * sse + h.tau * reg;
    rec.train_rmse = std::sqrt(sse / n_train);
    if (test != nullptr && test->nnz() > 0) {
      rec.test_rmse =
          std::sqrt(sum_squared_error(p, *test, opts.workers) / static_cast<double>(test->nnz()));
    }
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.history.push_back(rec);
  }
  return out;
}

inline void write_history_csv(std::ostream& out, const TrainHistory& history,
                              bool with_timing = true) {
  out << "epoch,objective,train_rmse,test_rmse,seconds\n";
  char buf[256];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.6f,%.6f,%.3f\n", r.epoch, r.objective,
                  r.train_rmse, r.test_rmse, with_timing ? r.seconds : 0.0);
    out << buf;
  }
}

}  // namespace alsrec

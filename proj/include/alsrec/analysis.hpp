#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "alsrec/error.hpp"
#include "alsrec/model.hpp"
#include "alsrec/ratings.hpp"

namespace alsrec {

struct Projection2D {
  std::vector<Index> items;
  Eigen::MatrixX2d coords;               // one row per item
  Eigen::Vector2d explained_variance_ratio;
  Eigen::Matrix<double, 2, Eigen::Dynamic> components;  // rows are unit directions
};

// Projects item trait vectors onto their top two principal directions, found
// by SVD of the mean-centred rows. Each direction is signed so that its
// largest-magnitude entry is positive.
inline Projection2D pca_project(const Factors& V, std::optional<std::span<const Index>> subset = {}) {
  if (V.cols() < 2) throw Error("pca_project: need k >= 2");
  Projection2D out;
  if (subset) {
    out.items.assign(subset->begin(), subset->end());
  } else {
    out.items.resize(static_cast<std::size_t>(V.rows()));
    std::iota(out.items.begin(), out.items.end(), Index{0});
  }
  if (out.items.size() < 2) throw Error("pca_project: need at least two items");

  const auto n = static_cast<Eigen::Index>(out.items.size());
  Eigen::MatrixXd X(n, V.cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto id = static_cast<Eigen::Index>(out.items[static_cast<std::size_t>(r)]);
    if (id >= V.rows()) throw Error("pca_project: item id out of range");
    X.row(r) = V.row(id);
  }
  X.rowwise() -= X.colwise().mean();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double total = s.squaredNorm();

  out.components.resize(2, V.cols());
  for (int c = 0; c < 2; ++c) {
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(V.cols());
    if (c < svd.matrixV().cols()) dir = svd.matrixV().col(c);
    Eigen::Index arg = 0;
    dir.cwiseAbs().maxCoeff(&arg);
    if (dir[arg] < 0) dir = -dir;
    out.components.row(c) = dir.transpose();
    const double sc = c < s.size() ? s[c] : 0.0;
    out.explained_variance_ratio[c] = total > 0 ? sc * sc / total : 0.0;
  }
  out.coords = X * out.components.transpose();
  return out;
}

enum class Metric { Cosine, Euclidean };

// The n items closest to `item` (excluding itself), nearest first; ties go to
// the smaller id. Zero vectors have cosine similarity 0 to everything.
inline std::vector<Index> nearest_neighbors(const Factors& V, Index item, std::size_t n,
                                            Metric metric) {
  const auto rows = static_cast<std::size_t>(V.rows());
  if (item >= rows) throw Error("nearest_neighbors: item id out of range");
  if (n >= rows) throw Error("nearest_neighbors: n must be smaller than the item count");
  const auto q = V.row(item);
  const double qn = q.norm();
  std::vector<std::pair<double, Index>> dist;  // smaller is closer
  dist.reserve(rows - 1);
  for (Index i = 0; i < rows; ++i) {
    if (i == item) continue;
    const auto v = V.row(i);
    double d = 0.0;
    if (metric == Metric::Euclidean) {
      d = (v - q).norm();
    } else {
      const double denom = qn * v.norm();
      d = -(denom > 0 ? q.dot(v) / denom : 0.0);
    }
    dist.emplace_back(d, i);
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(n), dist.end());
  std::vector<Index> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = dist[j].second;
  return out;
}

}  // namespace alsrec

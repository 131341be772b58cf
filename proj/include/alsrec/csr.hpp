#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <tuple>
#include <vector>

#include "alsrec/error.hpp"
#include "alsrec/ratings.hpp"

namespace alsrec {

enum class Orientation { ByUser, ByItem };

// One orientation of the interaction matrix as three flat arrays. Row r owns
// the half-open range [offsets[r], offsets[r+1]) of `indices` and `values`;
// column indices inside a row are strictly increasing.
struct CsrMatrix {
  Orientation orientation = Orientation::ByUser;
  std::vector<double> values;
  std::vector<Index> indices;
  std::vector<std::uint64_t> offsets{0};
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t nnz() const noexcept { return values.size(); }

  std::size_t row_size(std::size_t r) const noexcept { return offsets[r + 1] - offsets[r]; }

  std::span<const Index> row_indices(std::size_t r) const noexcept {
    return {indices.data() + offsets[r], row_size(r)};
  }
  std::span<const double> row_values(std::size_t r) const noexcept {
    return {values.data() + offsets[r], row_size(r)};
  }

  bool contains(std::size_t r, Index col) const noexcept {
    const auto idx = row_indices(r);
    return std::binary_search(idx.begin(), idx.end(), col);
  }
};

struct Triple {
  Index user = 0;
  Index item = 0;
  double rating = 0.0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

// Counting-sort construction from (user, item, rating) triples in dense ids.
inline CsrMatrix build_csr(std::span<const Triple> triples, std::size_t n_users,
                           std::size_t n_items, Orientation orientation) {
  const bool by_user = orientation == Orientation::ByUser;
  CsrMatrix m;
  m.orientation = orientation;
  m.rows = by_user ? n_users : n_items;
  m.cols = by_user ? n_items : n_users;
  m.offsets.assign(m.rows + 1, 0);
  for (const auto& t : triples) {
    const std::size_t row = by_user ? t.user : t.item;
    const std::size_t col = by_user ? t.item : t.user;
    if (row >= m.rows || col >= m.cols) throw Error("build_csr: id out of range");
    ++m.offsets[row + 1];
  }
  for (std::size_t r = 0; r < m.rows; ++r) m.offsets[r + 1] += m.offsets[r];

  m.values.resize(triples.size());
  m.indices.resize(triples.size());
  std::vector<std::uint64_t> cursor(m.offsets.begin(), m.offsets.end() - 1);
  for (const auto& t : triples) {
    const std::size_t row = by_user ? t.user : t.item;
    const auto pos = cursor[row]++;
    m.indices[pos] = by_user ? t.item : t.user;
    m.values[pos] = t.rating;
  }

  std::vector<std::pair<Index, double>> scratch;
  for (std::size_t r = 0; r < m.rows; ++r) {
    const auto b = m.offsets[r], e = m.offsets[r + 1];
    scratch.clear();
    for (auto p = b; p < e; ++p) scratch.emplace_back(m.indices[p], m.values[p]);
    std::sort(scratch.begin(), scratch.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    for (auto p = b; p < e; ++p) {
      m.indices[p] = scratch[p - b].first;
      m.values[p] = scratch[p - b].second;
      if (p > b && m.indices[p] == m.indices[p - 1]) {
        throw Error("build_csr: duplicate entry in row " + std::to_string(r));
      }
    }
  }
  return m;
}

inline std::vector<Triple> to_triples(const RatingsTable& table, const IndexMap& index) {
  std::vector<Triple> out;
  out.reserve(table.size());
  for (const auto& r : table.records) out.push_back({index.user(r.user), index.item(r.item), r.rating});
  return out;
}

inline CsrMatrix build_csr(const RatingsTable& table, const IndexMap& index,
                           Orientation orientation) {
  const auto triples = to_triples(table, index);
  return build_csr(triples, index.n_users(), index.n_items(), orientation);
}

// Re-extracts (user, item, rating) triples in row-major order.
inline std::vector<Triple> triples_of(const CsrMatrix& m) {
  std::vector<Triple> out;
  out.reserve(m.nnz());
  for (std::size_t r = 0; r < m.rows; ++r) {
    const auto idx = m.row_indices(r);
    const auto val = m.row_values(r);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      if (m.orientation == Orientation::ByUser) {
        out.push_back({static_cast<Index>(r), idx[j], val[j]});
      } else {
        out.push_back({idx[j], static_cast<Index>(r), val[j]});
      }
    }
  }
  return out;
}

inline CsrMatrix transpose(const CsrMatrix& m) {
  const auto t = triples_of(m);
  const bool by_user = m.orientation == Orientation::ByUser;
  const std::size_t n_users = by_user ? m.rows : m.cols;
  const std::size_t n_items = by_user ? m.cols : m.rows;
  return build_csr(t, n_users, n_items, by_user ? Orientation::ByItem : Orientation::ByUser);
}

// Training data in both orientations; the user step walks `by_user`, the item
// step walks `by_item`.
struct DualCsr {
  CsrMatrix by_user;
  CsrMatrix by_item;

  static DualCsr from(std::span<const Triple> triples, std::size_t n_users, std::size_t n_items) {
    return {build_csr(triples, n_users, n_items, Orientation::ByUser),
            build_csr(triples, n_users, n_items, Orientation::ByItem)};
  }
  static DualCsr from(const RatingsTable& table, const IndexMap& index) {
    const auto t = to_triples(table, index);
    return from(t, index.n_users(), index.n_items());
  }
  std::size_t n_users() const noexcept { return by_user.rows; }
  std::size_t n_items() const noexcept { return by_item.rows; }
};

}  // namespace alsrec

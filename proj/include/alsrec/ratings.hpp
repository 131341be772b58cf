#pragma once

// Rating tables: parsing, contiguous id remapping, the per-user stratified
// train/test split, and summary statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "alsrec/csv.hpp"
#include "alsrec/error.hpp"
#include "alsrec/random.hpp"

namespace alsrec {

using RawId = std::int64_t;
using Index = std::uint32_t;

struct Record {
  RawId user = 0;
  RawId item = 0;
  double rating = 0.0;
  std::int64_t timestamp = 0;

  friend bool operator==(const Record&, const Record&) = default;
};

struct RatingsTable {
  std::vector<Record> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
};

inline constexpr double kMinStars = 0.5;
inline constexpr double kMaxStars = 5.0;

inline bool on_half_star_grid(double stars) noexcept {
  if (!(stars >= kMinStars && stars <= kMaxStars)) return false;
  const double twice = stars * 2.0;
  return twice == std::round(twice);
}

inline constexpr const char* kRatingsHeader = "userId,movieId,rating,timestamp";

namespace detail {

// Rejects the first repeated (user, item) pair.
inline void check_unique_pairs(const RatingsTable& table, const std::string& source) {
  std::vector<std::pair<RawId, RawId>> pairs;
  pairs.reserve(table.size());
  for (const auto& r : table.records) pairs.emplace_back(r.user, r.item);
  std::sort(pairs.begin(), pairs.end());
  const auto dup = std::adjacent_find(pairs.begin(), pairs.end());
  if (dup != pairs.end()) {
    throw Error(source + ": duplicate rating for (user " + std::to_string(dup->first) +
                ", item " + std::to_string(dup->second) + ")");
  }
}

}  // namespace detail

// Reads `userId,movieId,rating,timestamp` CSV. Row order is preserved.
inline RatingsTable parse_ratings(std::istream& in, const std::string& source = "<stream>") {
  RatingsTable table;
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(source + ": missing header");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRatingsHeader) {
    throw Error(source + ": expected header '" + std::string(kRatingsHeader) + "', got '" +
                line + "'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = csv::split_line(line);
    Record rec;
    if (fields.size() != 4 || !csv::parse_number(fields[0], rec.user) ||
        !csv::parse_number(fields[1], rec.item) || !csv::parse_number(fields[2], rec.rating) ||
        !csv::parse_number(fields[3], rec.timestamp)) {
      throw Error(source + ":" + std::to_string(line_no) + ": malformed row '" + line + "'");
    }
    if (rec.user < 0 || rec.item < 0) {
      throw Error(source + ":" + std::to_string(line_no) + ": negative id");
    }
    if (!on_half_star_grid(rec.rating)) {
      throw Error(source + ":" + std::to_string(line_no) + ": rating not on half-star grid (" +
                  fields[2] + ")");
    }
    table.records.push_back(rec);
  }
  detail::check_unique_pairs(table, source);
  return table;
}

inline RatingsTable parse_ratings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return parse_ratings(in, path);
}

inline void write_ratings(std::ostream& out, const RatingsTable& table) {
  out << kRatingsHeader << '\n';
  char buf[32];
  for (const auto& r : table.records) {
    // Half-star values print exactly with one decimal.
    std::snprintf(buf, sizeof buf, "%.1f", r.rating);
    out << r.user << ',' << r.item << ',' << buf << ',' << r.timestamp << '\n';
  }
}

inline void write_ratings(const std::string& path, const RatingsTable& table) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_ratings(out, table);
}

// Bijection between raw ids and dense indices, assigned in ascending raw-id order.
struct IndexMap {
  std::unordered_map<RawId, Index> user_fwd;
  std::vector<RawId> user_rev;
  std::unordered_map<RawId, Index> item_fwd;
  std::vector<RawId> item_rev;

  std::size_t n_users() const noexcept { return user_rev.size(); }
  std::size_t n_items() const noexcept { return item_rev.size(); }

  Index user(RawId raw) const {
    const auto it = user_fwd.find(raw);
    if (it == user_fwd.end()) throw Error("unmapped user id " + std::to_string(raw));
    return it->second;
  }
  Index item(RawId raw) const {
    const auto it = item_fwd.find(raw);
    if (it == item_fwd.end()) throw Error("unmapped item id " + std::to_string(raw));
    return it->second;
  }

  // Rebuilds the forward maps from sorted reverse arrays.
  static IndexMap from_raw_ids(std::vector<RawId> users, std::vector<RawId> items) {
    IndexMap map;
    map.user_rev = std::move(users);
    map.item_rev = std::move(items);
    map.user_fwd.reserve(map.user_rev.size());
    for (Index d = 0; d < map.user_rev.size(); ++d) map.user_fwd.emplace(map.user_rev[d], d);
    map.item_fwd.reserve(map.item_rev.size());
    for (Index d = 0; d < map.item_rev.size(); ++d) map.item_fwd.emplace(map.item_rev[d], d);
    if (map.user_fwd.size() != map.user_rev.size() || map.item_fwd.size() != map.item_rev.size()) {
      throw Error("index map: raw ids are not unique");
    }
    return map;
  }
};

namespace detail {

inline std::vector<RawId> sorted_unique(std::vector<RawId> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace detail

inline IndexMap build_index(const RatingsTable& table) {
  if (table.empty()) throw Error("build_index: empty ratings table");
  std::vector<RawId> users, items;
  users.reserve(table.size());
  items.reserve(table.size());
  for (const auto& r : table.records) {
    users.push_back(r.user);
    items.push_back(r.item);
  }
  return IndexMap::from_raw_ids(detail::sorted_unique(std::move(users)),
                                detail::sorted_unique(std::move(items)));
}

struct SplitPair {
  RatingsTable train;
  RatingsTable test;
  double ratio = 0.8;
  std::uint64_t seed = 0;
};

// max(1, floor(ratio * c)); the epsilon absorbs products like 0.29 * 100.
inline std::size_t train_count_for(std::size_t count, double ratio) {
  if (count == 0) return 0;
  const auto n = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(count) + 1e-9));
  return std::clamp<std::size_t>(n, 1, count);
}

// Per-user stratified split. Each user's records get their own shuffle, seeded
// from (seed, user raw id), so the result does not depend on user order. Both
// halves keep the input row order.
inline SplitPair stratified_split(const RatingsTable& table, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw Error("stratified_split: ratio must lie in (0, 1)");
  }
  std::vector<std::size_t> order(table.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return table.records[a].user < table.records[b].user;
  });

  std::vector<char> in_train(table.size(), 0);
  std::size_t begin = 0;
  while (begin < order.size()) {
    const RawId user = table.records[order[begin]].user;
    std::size_t end = begin;
    while (end < order.size() && table.records[order[end]].user == user) ++end;

    std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                  order.begin() + static_cast<std::ptrdiff_t>(end));
    auto rng = make_stream(seed, 0x5350u, static_cast<std::uint64_t>(user));
    std::shuffle(rows.begin(), rows.end(), rng);
    const std::size_t keep = train_count_for(rows.size(), ratio);
    for (std::size_t j = 0; j < keep; ++j) in_train[rows[j]] = 1;
    begin = end;
  }

  SplitPair split;
  split.ratio = ratio;
  split.seed = seed;
  for (std::size_t r = 0; r < table.size(); ++r) {
    (in_train[r] ? split.train : split.test).records.push_back(table.records[r]);
  }
  return split;
}

struct StatsReport {
  double global_mean = 0.0;
  std::map<double, std::size_t> rating_histogram;
  std::vector<std::size_t> user_count_distribution;  // descending
  std::vector<std::size_t> item_count_distribution;  // descending
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t n_ratings = 0;
};

inline StatsReport dataset_stats(const RatingsTable& table) {
  if (table.empty()) throw Error("dataset_stats: empty ratings table");
  StatsReport report;
  std::unordered_map<RawId, std::size_t> per_user, per_item;
  double sum = 0.0;
  for (const auto& r : table.records) {
    sum += r.rating;
    ++report.rating_histogram[r.rating];
    ++per_user[r.user];
    ++per_item[r.item];
  }
  report.n_ratings = table.size();
  report.global_mean = sum / static_cast<double>(report.n_ratings);
  report.n_users = per_user.size();
  report.n_items = per_item.size();
  for (const auto& [id, c] : per_user) report.user_count_distribution.push_back(c);
  for (const auto& [id, c] : per_item) report.item_count_distribution.push_back(c);
  std::sort(report.user_count_distribution.rbegin(), report.user_count_distribution.rend());
  std::sort(report.item_count_distribution.rbegin(), report.item_count_distribution.rend());
  return report;
}

inline RatingsTable concat(const RatingsTable& a, const RatingsTable& b) {
  RatingsTable out;
  out.records.reserve(a.size() + b.size());
  out.records.insert(out.records.end(), a.records.begin(), a.records.end());
  out.records.insert(out.records.end(), b.records.begin(), b.records.end());
  return out;
}

}  // namespace alsrec

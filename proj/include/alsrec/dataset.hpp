#pragma once

// On-disk split directory produced by `alsrec ingest` and consumed by
// training, evaluation and the grid runner:
//   train.csv, test.csv   ratings in the input CSV layout
//   split.json            {"ratio", "seed", "n_train", "n_test"}
//   stats.json            summary of the full input table
//   counts.csv            movieId,rating_count,mean_rating over train.csv

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "alsrec/csr.hpp"
#include "alsrec/error.hpp"
#include "alsrec/ratings.hpp"

namespace alsrec {

namespace fs = std::filesystem;

inline nlohmann::ordered_json stats_to_json(const StatsReport& s) {
  nlohmann::ordered_json j;
  j["n_ratings"] = s.n_ratings;
  j["n_users"] = s.n_users;
  j["n_items"] = s.n_items;
  j["global_mean"] = s.global_mean;
  nlohmann::ordered_json hist = nlohmann::ordered_json::object();
  char key[16];
  for (const auto& [stars, count] : s.rating_histogram) {
    std::snprintf(key, sizeof key, "%.1f", stars);
    hist[key] = count;
  }
  j["rating_histogram"] = hist;
  j["user_count_distribution"] = s.user_count_distribution;
  j["item_count_distribution"] = s.item_count_distribution;
  return j;
}

struct ItemCount {
  RawId item = 0;
  std::uint64_t count = 0;
  double mean = 0.0;
};

inline std::vector<ItemCount> item_counts(const RatingsTable& table) {
  std::map<RawId, std::pair<std::uint64_t, double>> acc;
  for (const auto& r : table.records) {
    auto& [n, sum] = acc[r.item];
    ++n;
    sum += r.rating;
  }
  std::vector<ItemCount> out;
  out.reserve(acc.size());
  for (const auto& [id, ns] : acc) out.push_back({id, ns.first, ns.second / static_cast<double>(ns.first)});
  return out;
}

inline void write_counts_csv(const std::string& path, const std::vector<ItemCount>& counts) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "movieId,rating_count,mean_rating\n";
  char buf[64];
  for (const auto& c : counts) {
    std::snprintf(buf, sizeof buf, "%.6f", c.mean);
    out << c.item << ',' << c.count << ',' << buf << '\n';
  }
}

inline std::vector<ItemCount> read_counts_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::vector<ItemCount> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = csv::split_line(line);
    ItemCount c;
    if (f.size() != 3 || !csv::parse_number(f[0], c.item) || !csv::parse_number(f[1], c.count) ||
        !csv::parse_number(f[2], c.mean)) {
      throw Error(path + ":" + std::to_string(line_no) + ": malformed row");
    }
    out.push_back(c);
  }
  return out;
}

inline void write_split_dir(const fs::path& dir, const SplitPair& split, const StatsReport& stats) {
  fs::create_directories(dir);
  write_ratings((dir / "train.csv").string(), split.train);
  write_ratings((dir / "test.csv").string(), split.test);
  nlohmann::ordered_json meta;
  meta["ratio"] = split.ratio;
  meta["seed"] = split.seed;
  meta["n_train"] = split.train.size();
  meta["n_test"] = split.test.size();
  std::ofstream((dir / "split.json").string()) << meta.dump(2) << '\n';
  std::ofstream((dir / "stats.json").string()) << stats_to_json(stats).dump(2) << '\n';
  write_counts_csv((dir / "counts.csv").string(), item_counts(split.train));
}

// A split loaded into dense-index form. The index covers train and test, so
// items that only occur in test still get (untrained, zero) parameters.
struct LoadedSplit {
  RatingsTable train_table;
  RatingsTable test_table;
  IndexMap index;
  DualCsr train;
  CsrMatrix test;  // by user
  std::vector<std::uint64_t> item_train_counts;  // per dense item
};

inline LoadedSplit load_split(RatingsTable train_table, RatingsTable test_table) {
  LoadedSplit s;
  s.train_table = std::move(train_table);
  s.test_table = std::move(test_table);
  if (s.train_table.empty()) throw Error("load_split: empty training set");
  s.index = build_index(concat(s.train_table, s.test_table));
  s.train = DualCsr::from(s.train_table, s.index);
  s.test = build_csr(s.test_table, s.index, Orientation::ByUser);
  s.item_train_counts.resize(s.index.n_items());
  for (std::size_t i = 0; i < s.index.n_items(); ++i) {
    s.item_train_counts[i] = s.train.by_item.row_size(i);
  }
  return s;
}

inline LoadedSplit load_split_dir(const fs::path& dir) {
  return load_split(parse_ratings((dir / "train.csv").string()),
                    parse_ratings((dir / "test.csv").string()));
}

}  // namespace alsrec

#pragma once

// Versioned binary model file:
//   "ALSM" | version u32 | n_users u64 | n_items u64 | k u32 | mu f64
//   | b_user f64[n_users] | b_item f64[n_items]
//   | U f64[n_users*k] (row-major) | V f64[n_items*k] (row-major)
//   | trailer length u64 | trailer JSON (UTF-8)
// All integers and doubles are little-endian.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "alsrec/error.hpp"
#include "alsrec/model.hpp"
#include "alsrec/ratings.hpp"

namespace alsrec {

inline constexpr std::array<char, 4> kModelMagic{'A', 'L', 'S', 'M'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

// A trained model plus everything needed to serve it without the training data.
struct TrainedModel {
  ModelParams params;
  Hyperparams hyper;
  std::vector<RawId> user_ids;  // dense -> raw
  std::vector<RawId> item_ids;  // dense -> raw
  std::vector<std::uint64_t> item_train_counts;

  IndexMap index() const { return IndexMap::from_raw_ids(user_ids, item_ids); }
};

namespace detail {

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) {
    throw Error("model file truncated");
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  return std::bit_cast<T>(bytes);
}

// Bytes left in a seekable stream; max() when the stream cannot seek.
inline std::uint64_t bytes_left(std::istream& in) {
  const auto here = in.tellg();
  if (here < 0) return std::numeric_limits<std::uint64_t>::max();
  in.seekg(0, std::ios::end);
  const auto end = in.tellg();
  in.seekg(here);
  if (end < here) return 0;
  return static_cast<std::uint64_t>(end - here);
}

inline nlohmann::ordered_json trailer_json(const TrainedModel& m) {
  nlohmann::ordered_json j;
  j["hyperparams"] = {{"k", m.hyper.k},
                      {"lambda", m.hyper.lambda},
                      {"tau", m.hyper.tau},
                      {"epochs", m.hyper.epochs},
                      {"seed", m.hyper.seed}};
  j["user_ids"] = m.user_ids;
  j["item_ids"] = m.item_ids;
  j["item_train_counts"] = m.item_train_counts;
  return j;
}

}  // namespace detail

inline void save_model(std::ostream& out, const TrainedModel& m) {
  const auto& p = m.params;
  if (m.user_ids.size() != p.n_users() || m.item_ids.size() != p.n_items() ||
      m.item_train_counts.size() != p.n_items() || p.k() != m.hyper.k) {
    throw Error("save_model: metadata does not match parameter shapes");
  }
  out.write(kModelMagic.data(), kModelMagic.size());
  detail::put_le<std::uint32_t>(out, kModelFormatVersion);
  detail::put_le<std::uint64_t>(out, p.n_users());
  detail::put_le<std::uint64_t>(out, p.n_items());
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.k()));
  detail::put_le<double>(out, p.mu);
  for (Eigen::Index i = 0; i < p.b_user.size(); ++i) detail::put_le<double>(out, p.b_user[i]);
  for (Eigen::Index i = 0; i < p.b_item.size(); ++i) detail::put_le<double>(out, p.b_item[i]);
  for (Eigen::Index i = 0; i < p.U.size(); ++i) detail::put_le<double>(out, p.U.data()[i]);
  for (Eigen::Index i = 0; i < p.V.size(); ++i) detail::put_le<double>(out, p.V.data()[i]);
  const std::string trailer = detail::trailer_json(m).dump();
  detail::put_le<std::uint64_t>(out, trailer.size());
  out.write(trailer.data(), static_cast<std::streamsize>(trailer.size()));
  if (!out) throw Error("save_model: write failed");
}

inline void save_model(const std::string& path, const TrainedModel& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  save_model(out, m);
}

inline TrainedModel load_model(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kModelMagic) {
    throw Error("not a model file (bad magic)");
  }
  const auto version = detail::get_le<std::uint32_t>(in);
  if (version != kModelFormatVersion) {
    throw Error("unsupported model format version " + std::to_string(version));
  }
  const auto n_users = detail::get_le<std::uint64_t>(in);
  const auto n_items = detail::get_le<std::uint64_t>(in);
  const auto k = detail::get_le<std::uint32_t>(in);
  // Reject impossible sizes before allocating anything.
  constexpr std::uint64_t kMaxRows = std::uint64_t{1} << 40;
  if (n_users > kMaxRows || n_items > kMaxRows || k > (1u << 20) ||
      (n_users + n_items) * (std::uint64_t{k} + 1) + 2 > detail::bytes_left(in) / 8) {
    throw Error("model file truncated or header corrupt");
  }

  TrainedModel m;
  auto& p = m.params;
  p.mu = detail::get_le<double>(in);
  p.b_user.resize(static_cast<Eigen::Index>(n_users));
  p.b_item.resize(static_cast<Eigen::Index>(n_items));
  p.U.resize(static_cast<Eigen::Index>(n_users), k);
  p.V.resize(static_cast<Eigen::Index>(n_items), k);
  for (Eigen::Index i = 0; i < p.b_user.size(); ++i) p.b_user[i] = detail::get_le<double>(in);
  for (Eigen::Index i = 0; i < p.b_item.size(); ++i) p.b_item[i] = detail::get_le<double>(in);
  for (Eigen::Index i = 0; i < p.U.size(); ++i) p.U.data()[i] = detail::get_le<double>(in);
  for (Eigen::Index i = 0; i < p.V.size(); ++i) p.V.data()[i] = detail::get_le<double>(in);

  const auto len = detail::get_le<std::uint64_t>(in);
  if (len > detail::bytes_left(in)) throw Error("model file truncated in trailer");
  std::string trailer(len, '\0');
  if (!in.read(trailer.data(), static_cast<std::streamsize>(len))) {
    throw Error("model file truncated in trailer");
  }
  try {
    const auto j = nlohmann::json::parse(trailer);
    const auto& hp = j.at("hyperparams");
    m.hyper.k = hp.at("k").get<std::size_t>();
    m.hyper.lambda = hp.at("lambda").get<double>();
    m.hyper.tau = hp.at("tau").get<double>();
    m.hyper.epochs = hp.at("epochs").get<std::size_t>();
    m.hyper.seed = hp.at("seed").get<std::uint64_t>();
    m.user_ids = j.at("user_ids").get<std::vector<RawId>>();
    m.item_ids = j.at("item_ids").get<std::vector<RawId>>();
    m.item_train_counts = j.at("item_train_counts").get<std::vector<std::uint64_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("model trailer: ") + e.what());
  }
  if (m.hyper.k != k || m.user_ids.size() != n_users || m.item_ids.size() != n_items ||
      m.item_train_counts.size() != n_items) {
    throw Error("model trailer does not match header dimensions");
  }
  return m;
}

inline TrainedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return load_model(in);
}

}  // namespace alsrec

#pragma once

// JSON-over-HTTP facade for a loaded model. Handlers are plain member
// functions returning (status, body) so they can be exercised without a
// socket; `mount` binds them to a cpp-httplib server.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "alsrec/catalog.hpp"
#include "alsrec/dataset.hpp"
#include "alsrec/model_io.hpp"
#include "alsrec/recommend.hpp"

// After Eigen: <resolv.h>, pulled in by httplib, defines a `_res` macro that
// clashes with Eigen's kernels.
#include <httplib.h>

namespace alsrec {

using ojson = nlohmann::ordered_json;

// Serializes JSON with every floating-point number printed to six decimal
// places, so responses are byte-stable.
inline void write_fixed_json(std::string& out, const ojson& j) {
  switch (j.type()) {
    case ojson::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
      } else {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", v);
        out += buf;
      }
      break;
    }
    case ojson::value_t::array: {
      out += '[';
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += ',';
        first = false;
        write_fixed_json(out, e);
      }
      out += ']';
      break;
    }
    case ojson::value_t::object: {
      out += '{';
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) out += ',';
        first = false;
        out += ojson(key).dump();
        out += ':';
        write_fixed_json(out, value);
      }
      out += '}';
      break;
    }
    default:
      out += j.dump();
  }
}

inline std::string to_fixed_json(const ojson& j) {
  std::string out;
  write_fixed_json(out, j);
  return out;
}

struct Response {
  int status = 200;
  std::string body;
};

inline Response json_response(int status, const ojson& j) { return {status, to_fixed_json(j)}; }

inline Response error_response(int status, const std::string& message, ojson extra = {}) {
  ojson j;
  j["error"] = message;
  if (extra.is_object()) {
    for (const auto& [k, v] : extra.items()) j[k] = v;
  }
  return json_response(status, j);
}

struct RecommendInput {
  std::vector<std::pair<RawId, double>> ratings;
  double alpha = 0.05;
  std::size_t top_k = 10;
  std::uint64_t min_count = 100;
};

class RecommenderService {
 public:
  RecommenderService(std::optional<TrainedModel> model, std::vector<Movie> movies,
                     std::vector<ItemCount> counts)
      : model_(std::move(model)), movies_(std::move(movies)) {
    for (const auto& c : counts) counts_.emplace(c.item, c);
    for (std::size_t j = 0; j < movies_.size(); ++j) by_id_.emplace(movies_[j].id, j);
    if (model_) index_ = model_->index();
  }

  bool model_loaded() const noexcept { return model_.has_value(); }

  Response health() const {
    ojson j;
    j["status"] = "ok";
    j["model_loaded"] = model_loaded();
    return json_response(200, j);
  }

  Response model_info() const {
    if (!model_) return error_response(503, "no model loaded");
    const auto& h = model_->hyper;
    ojson j;
    j["k"] = h.k;
    j["lambda"] = h.lambda;
    j["tau"] = h.tau;
    j["epochs"] = h.epochs;
    j["n_users"] = model_->params.n_users();
    j["n_items"] = model_->params.n_items();
    j["global_mean"] = model_->params.mu;
    return json_response(200, j);
  }

  // Case-insensitive title substring search, most-rated first, ties by title.
  Response search(const std::optional<std::string>& query,
                  const std::optional<std::string>& limit_param) const {
    if (!query) return error_response(400, "missing query parameter 'q'");
    std::size_t limit = 20;
    if (limit_param) {
      long long v = 0;
      if (!csv::parse_number(*limit_param, v) || v < 1) {
        return error_response(400, "limit must be a positive integer");
      }
      limit = static_cast<std::size_t>(v);
    }
    const std::string needle = lower(*query);
    std::vector<std::size_t> hits;
    for (std::size_t j = 0; j < movies_.size(); ++j) {
      if (lower(movies_[j].title).find(needle) != std::string::npos) hits.push_back(j);
    }
    std::sort(hits.begin(), hits.end(), [&](std::size_t a, std::size_t b) {
      const auto ca = count_of(movies_[a].id), cb = count_of(movies_[b].id);
      if (ca != cb) return ca > cb;
      if (movies_[a].title != movies_[b].title) return movies_[a].title < movies_[b].title;
      return movies_[a].id < movies_[b].id;
    });
    if (hits.size() > limit) hits.resize(limit);
    ojson list = ojson::array();
    for (auto j : hits) list.push_back(catalog_entry(movies_[j]));
    return json_response(200, list);
  }

  Response recommend(const std::string& body) const {
    if (!model_) return error_response(503, "no model loaded");
    RecommendInput in;
    if (auto err = parse_recommend_body(body, in)) return *err;
    return recommend(in);
  }

  Response recommend(const RecommendInput& in) const {
    if (!model_) return error_response(503, "no model loaded");
    ojson unknown = ojson::array();
    std::vector<ItemRating> ratings;
    for (const auto& [raw, stars] : in.ratings) {
      const auto it = index_.item_fwd.find(raw);
      if (it == index_.item_fwd.end()) {
        unknown.push_back(raw);
      } else {
        ratings.push_back({it->second, stars});
      }
    }
    if (!unknown.empty()) {
      return error_response(422, "unknown movieId", ojson{{"unknown_movie_ids", unknown}});
    }
    for (const auto& r : ratings) {
      if (!on_half_star_grid(r.stars)) {
        return error_response(422, "ratings must be on the half-star grid 0.5..5.0");
      }
    }
    {
      std::vector<Index> ids;
      for (const auto& r : ratings) ids.push_back(r.item);
      std::sort(ids.begin(), ids.end());
      if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        return error_response(422, "a movie is rated more than once");
      }
    }
    if (ratings.empty() && in.alpha == 0.0) {
      return error_response(422, "no ratings and alpha = 0: every score would be zero");
    }
    ScoreRequest req;
    req.alpha = in.alpha;
    req.top_k = in.top_k;
    req.min_ratings = in.min_count;
    const auto items = recommend_for(ratings, model_->params, model_->hyper, req,
                                     model_->item_train_counts);
    ojson list = ojson::array();
    for (const auto& s : items) {
      const RawId raw = model_->item_ids[s.item];
      ojson e;
      e["movieId"] = raw;
      e["title"] = title_of(raw);
      e["score"] = s.score;
      e["popularityPart"] = s.popularity_part;
      e["affinityPart"] = s.affinity_part;
      list.push_back(std::move(e));
    }
    ojson j;
    j["items"] = std::move(list);
    return json_response(200, j);
  }

  static std::optional<Response> parse_recommend_body(const std::string& body, RecommendInput& in) {
    const auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return error_response(400, "body must be a JSON object");
    if (!j.contains("ratings") || !j["ratings"].is_array()) {
      return error_response(400, "'ratings' must be an array");
    }
    for (const auto& r : j["ratings"]) {
      if (!r.is_object() || !r.contains("movieId") || !r["movieId"].is_number_integer() ||
          !r.contains("rating") || !r["rating"].is_number()) {
        return error_response(400, "each rating needs integer 'movieId' and numeric 'rating'");
      }
      in.ratings.emplace_back(r["movieId"].get<RawId>(), r["rating"].get<double>());
    }
    if (j.contains("alpha")) {
      if (!j["alpha"].is_number() || j["alpha"].get<double>() < 0.0) {
        return error_response(400, "'alpha' must be a number >= 0");
      }
      in.alpha = j["alpha"].get<double>();
    }
    if (j.contains("topK")) {
      if (!j["topK"].is_number_integer() || j["topK"].get<long long>() < 1) {
        return error_response(400, "'topK' must be an integer >= 1");
      }
      in.top_k = j["topK"].get<std::size_t>();
    }
    if (j.contains("minCount")) {
      if (!j["minCount"].is_number_integer() || j["minCount"].get<long long>() < 0) {
        return error_response(400, "'minCount' must be an integer >= 0");
      }
      in.min_count = j["minCount"].get<std::uint64_t>();
    }
    return std::nullopt;
  }

  void mount(httplib::Server& server) const {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    auto send = [](httplib::Response& res, const Response& r) {
      res.status = r.status;
      res.set_content(r.body, "application/json");
    };
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });
    server.Get("/api/health", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, health());
    });
    server.Get("/api/model/info", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, model_info());
    });
    server.Get("/api/movies", [this, send](const httplib::Request& req, httplib::Response& res) {
      std::optional<std::string> q, limit;
      if (req.has_param("q")) q = req.get_param_value("q");
      if (req.has_param("limit")) limit = req.get_param_value("limit");
      send(res, search(q, limit));
    });
    server.Post("/api/recommend", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, recommend(req.body));
    });
  }

 private:
  static std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  }

  std::uint64_t count_of(RawId id) const {
    const auto it = counts_.find(id);
    return it == counts_.end() ? 0 : it->second.count;
  }

  std::string title_of(RawId id) const {
    const auto it = by_id_.find(id);
    return it == by_id_.end() ? std::string() : movies_[it->second].title;
  }

  ojson catalog_entry(const Movie& m) const {
    ojson e;
    e["movieId"] = m.id;
    e["title"] = m.title;
    e["genres"] = m.genres;
    const auto it = counts_.find(m.id);
    e["rating_count"] = it == counts_.end() ? std::uint64_t{0} : it->second.count;
    if (it == counts_.end() || it->second.count == 0) {
      e["mean_rating"] = nullptr;
    } else {
      e["mean_rating"] = it->second.mean;
    }
    return e;
  }

  std::optional<TrainedModel> model_;
  IndexMap index_;
  std::vector<Movie> movies_;
  std::unordered_map<RawId, std::size_t> by_id_;
  std::unordered_map<RawId, ItemCount> counts_;
};

}  // namespace alsrec

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "alsrec/service.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"

using namespace alsrec;
using nlohmann::json;

namespace {

// Ten movies with raw ids 100..109; every user rates most of them so the
// training counts are easy to reason about.
struct World {
  TrainedModel model;
  std::vector<Movie> movies;
  std::vector<ItemCount> counts;

  World() {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> stars(1, 10);
    std::bernoulli_distribution keep(0.7);
    RatingsTable table;
    for (RawId u = 1; u <= 40; ++u) {
      for (RawId i = 100; i < 110; ++i) {
        if (i == 109) continue;  // never rated
        if (keep(rng) || i == 100) table.records.push_back({u, i, 0.5 * stars(rng), 0});
      }
    }
    const auto index = build_index(table);
    const auto dual = DualCsr::from(table, index);
    model.hyper = Hyperparams{3, 0.5, 0.25, 5, 1};
    model.params = train(dual, nullptr, model.hyper).params;
    model.user_ids = index.user_rev;
    model.item_ids = index.item_rev;
    model.item_train_counts.assign(index.n_items(), 0);
    for (std::size_t i = 0; i < index.n_items(); ++i) model.item_train_counts[i] = dual.by_item.row_size(i);
    counts = item_counts(table);

    const char* titles[] = {"Toy Story (1995)", "Jumanji (1995)", "Heat (1995)",
                            "Sabrina (1995)",   "Tom and Huck (1995)", "Sudden Death (1995)",
                            "GoldenEye (1995)", "Casino (1995)", "Sense, Sensibility (1995)",
                            "Unseen Story (2001)"};
    for (int j = 0; j < 10; ++j) movies.push_back({100 + j, titles[j], {"Drama", "Comedy"}});
  }

  RecommenderService service() const { return RecommenderService(model, movies, counts); }
};

const World& world() {
  static const World w;
  return w;
}

json body_of(const Response& r) { return json::parse(r.body); }

std::string run_command(const std::string& cmd) {
  std::array<char, 4096> buf{};
  std::string out;
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(::popen(cmd.c_str(), "r"), ::pclose);
  if (!pipe) return out;
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe.get())) out += buf.data();
  return out;
}

}  // namespace

TEST(FixedJson, SixDecimalsAndOrder) {
  ojson j;
  j["b"] = 1.0 / 3.0;
  j["a"] = 2;
  j["c"] = ojson::array({0.5, nullptr, "x"});
  EXPECT_EQ(to_fixed_json(j), R"({"b":0.333333,"a":2,"c":[0.500000,null,"x"]})");
}

TEST(Service, HealthBeforeAndAfterLoad) {
  const RecommenderService empty(std::nullopt, {}, {});
  EXPECT_EQ(empty.health().body, R"({"status":"ok","model_loaded":false})");
  EXPECT_EQ(world().service().health().body, R"({"status":"ok","model_loaded":true})");
}

TEST(Service, ModelInfo) {
  const RecommenderService empty(std::nullopt, {}, {});
  EXPECT_EQ(empty.model_info().status, 503);
  const auto r = world().service().model_info();
  ASSERT_EQ(r.status, 200);
  const auto j = body_of(r);
  EXPECT_EQ(j["k"], 3);
  EXPECT_EQ(j["n_users"], 40);
  EXPECT_EQ(j["n_items"], 9);
  EXPECT_NEAR(j["global_mean"].get<double>(), world().model.params.mu, 1e-6);

  auto m = world().model;
  m.hyper.k = 0;
  m.params = init_params(m.hyper, 40, 9, 3.0);
  const auto zero = body_of(RecommenderService(m, {}, {}).model_info());
  EXPECT_EQ(zero["k"], 0);
}

TEST(Service, SearchRequiresQueryAndValidLimit) {
  const auto s = world().service();
  EXPECT_EQ(s.search(std::nullopt, std::nullopt).status, 400);
  EXPECT_EQ(s.search("toy", "0").status, 400);
  EXPECT_EQ(s.search("toy", "abc").status, 400);
}

TEST(Service, SearchIsCaseInsensitiveAndOrderedByCount) {
  const auto s = world().service();
  const auto hits = body_of(s.search("STORY", std::nullopt));
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(hits[0]["movieId"], 100);  // rated by everyone
  EXPECT_EQ(hits[1]["movieId"], 109);
  EXPECT_EQ(hits[1]["rating_count"], 0);
  EXPECT_TRUE(hits[1]["mean_rating"].is_null());
  EXPECT_EQ(hits[0]["rating_count"], 40);
  EXPECT_EQ(hits[0]["genres"], json::array({"Drama", "Comedy"}));

  const auto all = body_of(s.search("1995", std::nullopt));
  EXPECT_EQ(all.size(), 9u);
  for (std::size_t j = 1; j < all.size(); ++j) {
    EXPECT_GE(all[j - 1]["rating_count"].get<int>(), all[j]["rating_count"].get<int>());
  }
  EXPECT_EQ(body_of(s.search("1995", "3")).size(), 3u);
  EXPECT_EQ(body_of(s.search("no such title", std::nullopt)).size(), 0u);
}

TEST(Service, RecommendValidation) {
  const auto s = world().service();
  EXPECT_EQ(RecommenderService(std::nullopt, {}, {}).recommend(R"({"ratings":[]})").status, 503);
  EXPECT_EQ(s.recommend("not json").status, 400);
  EXPECT_EQ(s.recommend(R"({"ratings":5})").status, 400);
  EXPECT_EQ(s.recommend(R"({"ratings":[{"movieId":"100","rating":4}]})").status, 400);
  EXPECT_EQ(s.recommend(R"({"ratings":[],"alpha":-1})").status, 400);
  EXPECT_EQ(s.recommend(R"({"ratings":[],"topK":0})").status, 400);

  const auto unknown = s.recommend(R"({"ratings":[{"movieId":100,"rating":4},{"movieId":999,"rating":3},{"movieId":109,"rating":3}]})");
  EXPECT_EQ(unknown.status, 422);
  EXPECT_EQ(body_of(unknown)["unknown_movie_ids"], json::array({999, 109}));

  EXPECT_EQ(s.recommend(R"({"ratings":[{"movieId":100,"rating":4.2}]})").status, 422);
  EXPECT_EQ(s.recommend(R"({"ratings":[{"movieId":100,"rating":4},{"movieId":100,"rating":3}]})").status,
            422);
  EXPECT_EQ(s.recommend(R"({"ratings":[],"alpha":0})").status, 422);
  EXPECT_EQ(s.recommend(R"({"ratings":[],"alpha":0.1,"minCount":0})").status, 200);
}

TEST(Service, RecommendMatchesLibraryAndIsDeterministic) {
  const auto s = world().service();
  const std::string body =
      R"({"ratings":[{"movieId":101,"rating":5},{"movieId":104,"rating":1.5}],"alpha":0.05,"topK":4,"minCount":20})";
  const auto a = s.recommend(body);
  ASSERT_EQ(a.status, 200) << a.body;
  EXPECT_EQ(a.body, s.recommend(body).body);

  const auto& m = world().model;
  const auto idx = m.index();
  const std::vector<ItemRating> rated{{idx.item(101), 5.0}, {idx.item(104), 1.5}};
  const auto ref = recommend_for(rated, m.params, m.hyper, ScoreRequest{0.05, 4, 20},
                                 m.item_train_counts);
  const auto items = body_of(a)["items"];
  ASSERT_EQ(items.size(), ref.size());
  for (std::size_t j = 0; j < ref.size(); ++j) {
    EXPECT_EQ(items[j]["movieId"], m.item_ids[ref[j].item]);
    EXPECT_NEAR(items[j]["score"].get<double>(), ref[j].score, 5e-7);
    EXPECT_NEAR(items[j]["popularityPart"].get<double>(), ref[j].popularity_part, 5e-7);
    EXPECT_NEAR(items[j]["affinityPart"].get<double>(), ref[j].affinity_part, 5e-7);
    EXPECT_GE(m.item_train_counts[ref[j].item], 20u);
    EXPECT_NE(items[j]["movieId"], 101);
    EXPECT_NE(items[j]["movieId"], 104);
    if (j > 0) {
      EXPECT_GE(items[j - 1]["score"].get<double>(), items[j]["score"].get<double>());
    }
  }
  EXPECT_FALSE(items[0]["title"].get<std::string>().empty());
}

TEST(Service, HttpRoundTripWithCors) {
  const auto s = world().service();
  httplib::Server server;
  s.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/api/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(health->body, R"({"status":"ok","model_loaded":true})");
  EXPECT_EQ(health->get_header_value("Access-Control-Allow-Origin"), "*");

  auto pre = client.Options("/api/recommend");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
  EXPECT_NE(pre->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);

  auto search = client.Get("/api/movies?q=heat&limit=5");
  ASSERT_TRUE(search);
  EXPECT_EQ(search->body, s.search("heat", "5").body);
  EXPECT_EQ(client.Get("/api/movies")->status, 400);

  const std::string body = R"({"ratings":[{"movieId":102,"rating":4.5}],"topK":3,"minCount":0})";
  auto rec = client.Post("/api/recommend", body, "application/json");
  ASSERT_TRUE(rec);
  EXPECT_EQ(rec->status, 200);
  EXPECT_EQ(rec->body, s.recommend(body).body);
  EXPECT_EQ(client.Post("/api/recommend", "{", "application/json")->status, 400);

  auto info = client.Get("/api/model/info");
  ASSERT_TRUE(info);
  EXPECT_EQ(info->body, s.model_info().body);

  server.stop();
  t.join();
}

TEST(Service, CliJsonOutputMatchesService) {
  testing_support::TempDir dir("svc_cli");
  const auto model_path = (dir.path() / "model.bin").string();
  save_model(model_path, world().model);
  const auto movies_path = (dir.path() / "movies.csv").string();
  {
    std::ofstream out(movies_path);
    out << "movieId,title,genres\n";
    for (const auto& m : world().movies) out << m.id << ',' << csv::quote(m.title) << ",Drama|Comedy\n";
  }
  const std::string cmd = std::string(ALSREC_CLI_PATH) + " recommend --model " + model_path +
                          " --movies " + movies_path +
                          " --rate 101:5,104:1.5 --alpha 0.05 --top 4 --min-count 20 --json";
  auto out = run_command(cmd);
  while (!out.empty() && out.back() == '\n') out.pop_back();
  const std::string body =
      R"({"ratings":[{"movieId":101,"rating":5},{"movieId":104,"rating":1.5}],"alpha":0.05,"topK":4,"minCount":20})";
  EXPECT_EQ(out, world().service().recommend(body).body);
}

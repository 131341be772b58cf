// Command-line front end: ingest, train, evaluate, grid, project, recommend, serve.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "alsrec/analysis.hpp"
#include "alsrec/catalog.hpp"
#include "alsrec/dataset.hpp"
#include "alsrec/engine.hpp"
#include "alsrec/evaluation.hpp"
#include "alsrec/experiments.hpp"
#include "alsrec/model_io.hpp"
#include "alsrec/recommend.hpp"
#include "alsrec/service.hpp"

namespace fs = std::filesystem;
using namespace alsrec;

namespace {

std::vector<std::pair<RawId, double>> parse_rate_list(const std::string& spec) {
  std::vector<std::pair<RawId, double>> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    RawId id = 0;
    double stars = 0;
    if (colon == std::string::npos || !csv::parse_number(item.substr(0, colon), id) ||
        !csv::parse_number(item.substr(colon + 1), stars)) {
      throw Error("--rate: expected movieId:stars, got '" + item + "'");
    }
    out.emplace_back(id, stars);
  }
  return out;
}

void check_model_matches(const TrainedModel& m, const LoadedSplit& data) {
  if (m.user_ids != data.index.user_rev || m.item_ids != data.index.item_rev) {
    throw Error("model was not trained on this split (index maps differ)");
  }
}

int run_ingest(const std::string& ratings, const std::string& movies, const fs::path& out,
               double ratio, std::uint64_t seed) {
  const auto table = parse_ratings(ratings);
  const auto stats = dataset_stats(table);
  const auto split = stratified_split(table, ratio, seed);
  write_split_dir(out, split, stats);
  if (!movies.empty()) {
    parse_movies(movies);  // validate before copying
    fs::copy_file(movies, out / "movies.csv", fs::copy_options::overwrite_existing);
  }
  std::printf("ratings=%zu users=%zu items=%zu mean=%.4f train=%zu test=%zu\n", stats.n_ratings,
              stats.n_users, stats.n_items, stats.global_mean, split.train.size(),
              split.test.size());
  return 0;
}

int run_train(const fs::path& data_dir, const Hyperparams& h, std::size_t threads,
              const std::string& out, std::string history) {
  const auto data = load_split_dir(data_dir);
  TrainOptions opts;
  opts.workers = threads;
  const auto result = train(data.train, &data.test, h, opts);
  for (const auto& r : result.history) {
    std::printf("epoch %2zu  objective %.6g  train_rmse %.4f  test_rmse %.4f  %.2fs\n", r.epoch,
                r.objective, r.train_rmse, r.test_rmse, r.seconds);
  }
  TrainedModel model{result.params, h, data.index.user_rev, data.index.item_rev,
                     data.item_train_counts};
  save_model(out, model);
  if (history.empty()) history = out + ".history.csv";
  std::ofstream hist(history);
  write_history_csv(hist, result.history);
  return 0;
}

int run_evaluate(const std::string& model_path, const fs::path& data_dir, const EvalConfig& cfg) {
  const auto model = load_model(model_path);
  const auto data = load_split_dir(data_dir);
  check_model_matches(model, data);
  const auto r = evaluate(model.params, data.train.by_user, data.test, cfg);
  nlohmann::ordered_json j;
  j["rmse_train"] = r.rmse_train;
  j["rmse_test"] = r.rmse_test;
  j["precision_at_k"] = r.precision_at_k;
  j["recall_at_k"] = r.recall_at_k;
  j["users_evaluated"] = r.users_evaluated;
  j["k"] = cfg.k;
  j["threshold"] = cfg.relevance_threshold;
  std::cout << j.dump(2) << '\n';
  return 0;
}

int run_grid_cmd(const fs::path& data_dir, const std::string& config, const fs::path& out,
                 std::size_t threads, bool timing) {
  nlohmann::json cfg = nlohmann::json::object();
  if (!config.empty()) {
    std::ifstream in(config);
    if (!in) throw Error("cannot open " + config);
    cfg = nlohmann::json::parse(in);
  }
  auto spec = grid_spec_from_json(cfg);
  spec.workers = threads;
  spec.record_timing = timing;
  const auto data = load_split_dir(data_dir);
  const auto rows = run_grid(spec, data, out);
  for (const auto& r : rows) std::cout << format_grid_row(r) << '\n';
  const auto best = select_best(rows, SelectBy::TestRmse);
  std::printf("best by test RMSE: k=%zu lambda=%g tau=%g test_rmse=%.4f\n", best.k, best.lambda,
              best.tau, best.test_rmse);
  return 0;
}

int run_project(const std::string& model_path, const std::string& movies_path,
                const std::string& titles_path, const std::string& out_path) {
  const auto model = load_model(model_path);
  const auto movies = parse_movies(movies_path);
  const auto index = model.index();
  std::vector<Index> items;
  std::vector<const Movie*> chosen;
  if (titles_path.empty()) {
    for (const auto& m : movies) {
      if (index.item_fwd.count(m.id)) {
        items.push_back(index.item(m.id));
        chosen.push_back(&m);
      }
    }
  } else {
    std::ifstream in(titles_path);
    if (!in) throw Error("cannot open " + titles_path);
    std::string title;
    while (std::getline(in, title)) {
      if (!title.empty() && title.back() == '\r') title.pop_back();
      if (title.empty()) continue;
      const auto it = std::find_if(movies.begin(), movies.end(),
                                   [&](const Movie& m) { return m.title == title; });
      if (it == movies.end()) throw Error("title not in catalog: " + title);
      if (!index.item_fwd.count(it->id)) throw Error("title not in model: " + title);
      items.push_back(index.item(it->id));
      chosen.push_back(&*it);
    }
  }
  const auto proj = pca_project(model.params.V, std::span<const Index>(items));
  std::ofstream out(out_path);
  if (!out) throw Error("cannot write " + out_path);
  out << "movieId,title,x,y\n";
  char buf[64];
  for (std::size_t j = 0; j < items.size(); ++j) {
    const auto r = static_cast<Eigen::Index>(j);
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", proj.coords(r, 0), proj.coords(r, 1));
    out << chosen[j]->id << ',' << csv::quote(chosen[j]->title) << ',' << buf << '\n';
  }
  std::printf("explained variance ratio: %.4f %.4f\n", proj.explained_variance_ratio[0],
              proj.explained_variance_ratio[1]);
  return 0;
}

int run_recommend(const std::string& model_path, const std::string& movies_path,
                  const std::string& rate, double alpha, std::size_t top, std::uint64_t min_count,
                  bool as_json) {
  auto model = load_model(model_path);
  std::vector<Movie> movies;
  if (!movies_path.empty()) movies = parse_movies(movies_path);
  const RecommenderService service(std::move(model), std::move(movies), {});
  RecommendInput in;
  in.ratings = parse_rate_list(rate);
  in.alpha = alpha;
  in.top_k = top;
  in.min_count = min_count;
  const auto res = service.recommend(in);
  if (as_json || res.status != 200) {
    std::cout << res.body << '\n';
    return res.status == 200 ? 0 : 1;
  }
  const auto j = nlohmann::json::parse(res.body);
  std::printf("%-4s %-50s %10s %12s %12s\n", "rank", "title", "score", "popularity", "affinity");
  int rank = 1;
  for (const auto& e : j["items"]) {
    std::string title = e["title"].get<std::string>();
    if (title.empty()) title = "movieId " + std::to_string(e["movieId"].get<RawId>());
    std::printf("%-4d %-50.50s %10.4f %12.4f %12.4f\n", rank++, title.c_str(),
                e["score"].get<double>(), e["popularityPart"].get<double>(),
                e["affinityPart"].get<double>());
  }
  return 0;
}

int run_serve(const std::string& model_path, const std::string& movies_path,
              const std::string& counts_path, const std::string& host, int port) {
  std::optional<TrainedModel> model;
  if (!model_path.empty()) model = load_model(model_path);
  std::vector<Movie> movies;
  if (!movies_path.empty()) movies = parse_movies(movies_path);
  std::vector<ItemCount> counts;
  if (!counts_path.empty()) counts = read_counts_csv(counts_path);
  const RecommenderService service(std::move(model), std::move(movies), std::move(counts));
  httplib::Server server;
  service.mount(server);
  std::printf("listening on %s:%d\n", host.c_str(), port);
  std::fflush(stdout);
  return server.listen(host, port) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Alternating least squares recommender"};
  app.require_subcommand(1);

  // ingest
  std::string ratings_path, movies_path, out_dir;
  double ratio = 0.8;
  std::uint64_t seed = 0;
  auto* ingest = app.add_subcommand("ingest", "Parse ratings, split per user, write a data dir");
  ingest->add_option("--ratings", ratings_path, "ratings.csv")->required()->check(CLI::ExistingFile);
  ingest->add_option("--movies", movies_path, "movies.csv")->check(CLI::ExistingFile);
  ingest->add_option("--out", out_dir, "Output directory")->required();
  ingest->add_option("--split", ratio, "Per-user training fraction")->capture_default_str();
  ingest->add_option("--seed", seed, "Split seed")->capture_default_str();

  // train
  std::string data_dir, model_out = "model.alsm", history_out;
  Hyperparams hp;
  std::size_t threads = default_workers();
  auto* train_cmd = app.add_subcommand("train", "Train a model on a data dir");
  train_cmd->add_option("--data", data_dir, "Data dir from ingest")->required();
  train_cmd->add_option("--k", hp.k, "Latent dimension (0 = bias only)")->capture_default_str();
  train_cmd->add_option("--lambda", hp.lambda, "Rating-error weight")->capture_default_str();
  train_cmd->add_option("--tau", hp.tau, "L2 regularization")->capture_default_str();
  train_cmd->add_option("--epochs", hp.epochs)->capture_default_str();
  train_cmd->add_option("--seed", hp.seed)->capture_default_str();
  train_cmd->add_option("--threads", threads)->capture_default_str();
  train_cmd->add_option("--out", model_out)->capture_default_str();
  train_cmd->add_option("--history", history_out, "History CSV (default <out>.history.csv)");

  // evaluate
  std::string model_path;
  EvalConfig eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "RMSE and Precision/Recall@K as JSON");
  eval_cmd->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", data_dir)->required();
  eval_cmd->add_option("--k", eval.k)->capture_default_str();
  eval_cmd->add_option("--threshold", eval.relevance_threshold)->capture_default_str();
  eval_cmd->add_option("--sample", eval.sample_users)->capture_default_str();
  eval_cmd->add_option("--seed", eval.seed)->capture_default_str();
  eval_cmd->add_option("--threads", eval.workers)->capture_default_str();

  // grid
  std::string grid_config;
  bool no_timing = false;
  auto* grid_cmd = app.add_subcommand("grid", "Hyperparameter grid search");
  grid_cmd->add_option("--data", data_dir)->required();
  grid_cmd->add_option("--config", grid_config, "grid.json (defaults if omitted)");
  grid_cmd->add_option("--out", out_dir)->required();
  grid_cmd->add_option("--threads", threads)->capture_default_str();
  grid_cmd->add_flag("--no-timing", no_timing, "Write 0 for wall-clock columns");

  // project
  std::string titles_path, coords_out;
  auto* project_cmd = app.add_subcommand("project", "PCA projection of item vectors to 2D");
  project_cmd->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  project_cmd->add_option("--movies", movies_path)->required()->check(CLI::ExistingFile);
  project_cmd->add_option("--titles", titles_path, "One title per line (all items if omitted)");
  project_cmd->add_option("--out", coords_out)->required();

  // recommend
  std::string rate;
  double alpha = 0.05;
  std::size_t top = 10;
  std::uint64_t min_count = 100;
  bool as_json = false;
  auto* rec_cmd = app.add_subcommand("recommend", "Fold in a new user and rank items");
  rec_cmd->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  rec_cmd->add_option("--movies", movies_path, "movies.csv for titles")->check(CLI::ExistingFile);
  rec_cmd->add_option("--rate", rate, "movieId:stars,...")->required();
  rec_cmd->add_option("--alpha", alpha)->capture_default_str();
  rec_cmd->add_option("--top", top)->capture_default_str();
  rec_cmd->add_option("--min-count", min_count)->capture_default_str();
  rec_cmd->add_flag("--json", as_json, "Print the same JSON body the service returns");

  // serve
  std::string counts_path, host = "0.0.0.0";
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP API over a loaded model");
  serve_cmd->add_option("--model", model_path)->check(CLI::ExistingFile);
  serve_cmd->add_option("--movies", movies_path)->check(CLI::ExistingFile);
  serve_cmd->add_option("--counts", counts_path)->check(CLI::ExistingFile);
  serve_cmd->add_option("--host", host)->capture_default_str();
  serve_cmd->add_option("--port", port)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return run_ingest(ratings_path, movies_path, out_dir, ratio, seed);
    if (*train_cmd) return run_train(data_dir, hp, threads, model_out, history_out);
    if (*eval_cmd) return run_evaluate(model_path, data_dir, eval);
    if (*grid_cmd) return run_grid_cmd(data_dir, grid_config, out_dir, threads, !no_timing);
    if (*project_cmd) return run_project(model_path, movies_path, titles_path, coords_out);
    if (*rec_cmd) return run_recommend(model_path, movies_path, rate, alpha, top, min_count, as_json);
    if (*serve_cmd) return run_serve(model_path, movies_path, counts_path, host, port);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

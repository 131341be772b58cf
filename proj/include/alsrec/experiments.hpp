#pragma once

// Hyperparameter grid over (k, lambda, tau). Cells run one after another, each
// with the same initialization seed; parallelism lives inside the trainer.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "alsrec/csv.hpp"
#include "alsrec/dataset.hpp"
#include "alsrec/engine.hpp"
#include "alsrec/error.hpp"
#include "alsrec/evaluation.hpp"

namespace alsrec {

struct GridSpec {
  std::vector<std::size_t> k_values{2, 10, 50, 100};
  std::vector<double> lambda_values{0.1, 0.5};
  std::vector<double> tau_values{0.05, 0.1, 0.25};
  std::size_t epochs = 20;
  EvalConfig eval;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  // When false, the seconds column is written as 0 so reruns are byte-identical.
  bool record_timing = true;

  void validate() const {
    if (k_values.empty() || lambda_values.empty() || tau_values.empty()) {
      throw Error("grid: every value list must be non-empty");
    }
    if (epochs < 1) throw Error("grid: epochs must be >= 1");
    eval.validate();
  }

  std::size_t cell_count() const {
    return k_values.size() * lambda_values.size() * tau_values.size();
  }
};

// Fields not present in the JSON keep their defaults.
inline GridSpec grid_spec_from_json(const nlohmann::json& j) {
  GridSpec s;
  try {
    if (j.contains("k")) s.k_values = j.at("k").get<std::vector<std::size_t>>();
    if (j.contains("lambda")) s.lambda_values = j.at("lambda").get<std::vector<double>>();
    if (j.contains("tau")) s.tau_values = j.at("tau").get<std::vector<double>>();
    if (j.contains("epochs")) s.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("top_k")) s.eval.k = j.at("top_k").get<std::size_t>();
    if (j.contains("threshold")) s.eval.relevance_threshold = j.at("threshold").get<double>();
    if (j.contains("sample_users")) s.eval.sample_users = j.at("sample_users").get<std::size_t>();
    if (j.contains("eval_seed")) s.eval.seed = j.at("eval_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("grid config: ") + e.what());
  }
  s.validate();
  return s;
}

struct GridResultRow {
  std::size_t k = 0;
  double lambda = 0.0;
  double tau = 0.0;
  double precision = std::numeric_limits<double>::quiet_NaN();
  double recall = std::numeric_limits<double>::quiet_NaN();
  double train_rmse = std::numeric_limits<double>::quiet_NaN();
  double test_rmse = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
  std::string status = "ok";

  bool ok() const noexcept { return status == "ok"; }
  auto key() const { return std::make_tuple(k, lambda, tau); }
};

inline constexpr const char* kGridHeader =
    "k,lambda,tau,precision,recall,train_rmse,test_rmse,seconds,status";

// Shortest text that parses back to the same double, so resumed runs find
// their cells again.
inline std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string format_grid_row(const GridResultRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.3f,", r.precision, r.recall,
                r.train_rmse, r.test_rmse, r.seconds);
  return std::to_string(r.k) + ',' + shortest(r.lambda) + ',' + shortest(r.tau) + ',' + buf +
         csv::quote(r.status);
}

inline void write_grid_csv(const std::string& path, const std::vector<GridResultRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << kGridHeader << '\n';
  for (const auto& r : rows) out << format_grid_row(r) << '\n';
}

inline std::vector<GridResultRow> read_grid_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kGridHeader) throw Error(path + ": unexpected header");
  std::vector<GridResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = csv::split_line(line);
    GridResultRow r;
    // strtod accepts "nan", which failed cells carry.
    auto num = [&](const std::string& s, double& out) {
      char* end = nullptr;
      out = std::strtod(s.c_str(), &end);
      return end != s.c_str() && *end == '\0';
    };
    if (f.size() != 9 || !csv::parse_number(f[0], r.k) || !num(f[1], r.lambda) ||
        !num(f[2], r.tau) || !num(f[3], r.precision) || !num(f[4], r.recall) ||
        !num(f[5], r.train_rmse) || !num(f[6], r.test_rmse) || !num(f[7], r.seconds)) {
      throw Error(path + ":" + std::to_string(line_no) + ": malformed grid row");
    }
    r.status = f[8];
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::string history_file_name(std::size_t k, double lambda, double tau) {
  return "history_k" + std::to_string(k) + "_lambda" + shortest(lambda) + "_tau" + shortest(tau) +
         ".csv";
}

inline GridResultRow run_cell(const LoadedSplit& data, const GridSpec& spec, std::size_t k,
                              double lambda, double tau, const fs::path& out_dir) {
  GridResultRow row;
  row.k = k;
  row.lambda = lambda;
  row.tau = tau;
  const auto start = std::chrono::steady_clock::now();
  try {
    Hyperparams h{k, lambda, tau, spec.epochs, spec.seed};
    TrainOptions opts;
    opts.workers = spec.workers;
    const auto result = train(data.train, &data.test, h, opts);
    EvalConfig cfg = spec.eval;
    cfg.workers = spec.workers;
    const auto report = evaluate(result.params, data.train.by_user, data.test, cfg);
    row.precision = report.precision_at_k;
    row.recall = report.recall_at_k;
    row.train_rmse = report.rmse_train;
    row.test_rmse = report.rmse_test;
    std::ofstream hist((out_dir / history_file_name(k, lambda, tau)).string());
    write_history_csv(hist, result.history, spec.record_timing);
  } catch (const std::exception& e) {
    row.status = std::string("failed: ") + e.what();
  }
  if (spec.record_timing) {
    row.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return row;
}

// Trains and evaluates every cell, writing results.csv (rows sorted by
// k, lambda, tau) and one history CSV per cell into `out_dir`. Cells that
// already have an "ok" row in an existing results.csv are not rerun.
inline std::vector<GridResultRow> run_grid(const GridSpec& spec, const LoadedSplit& data,
                                           const fs::path& out_dir) {
  spec.validate();
  fs::create_directories(out_dir);
  const auto results_path = (out_dir / "results.csv").string();

  std::map<std::tuple<std::size_t, double, double>, GridResultRow> done;
  if (fs::exists(results_path)) {
    for (auto& r : read_grid_csv(results_path)) {
      if (r.ok()) done.emplace(r.key(), std::move(r));
    }
  }

  auto ks = spec.k_values;
  auto ls = spec.lambda_values;
  auto ts = spec.tau_values;
  std::sort(ks.begin(), ks.end());
  std::sort(ls.begin(), ls.end());
  std::sort(ts.begin(), ts.end());

  std::vector<GridResultRow> rows;
  for (auto k : ks) {
    for (auto l : ls) {
      for (auto t : ts) {
        const auto it = done.find({k, l, t});
        if (it != done.end()) {
          rows.push_back(it->second);
        } else {
          rows.push_back(run_cell(data, spec, k, l, t, out_dir));
        }
        // Rewritten after every cell so an interrupted run can resume.
        write_grid_csv(results_path, rows);
      }
    }
  }
  return rows;
}

enum class SelectBy { TestRmse, Precision };

// Best successful row; ties prefer smaller k, then larger tau, then smaller lambda.
inline GridResultRow select_best(const std::vector<GridResultRow>& rows, SelectBy criterion) {
  const GridResultRow* best = nullptr;
  auto better = [&](const GridResultRow& a, const GridResultRow& b) {
    const double va = criterion == SelectBy::TestRmse ? a.test_rmse : -a.precision;
    const double vb = criterion == SelectBy::TestRmse ? b.test_rmse : -b.precision;
    if (va != vb) return va < vb;
    if (a.k != b.k) return a.k < b.k;
    if (a.tau != b.tau) return a.tau > b.tau;
    return a.lambda < b.lambda;
  };
  for (const auto& r : rows) {
    if (!r.ok() || std::isnan(r.test_rmse) || std::isnan(r.precision)) continue;
    if (best == nullptr || better(r, *best)) best = &r;
  }
  if (best == nullptr) throw Error("select_best: no successful grid rows");
  return *best;
}

}  // namespace alsrec

#pragma once

#include <fstream>
#include <istream>
#include <string>
#include <vector>

#include "alsrec/csv.hpp"
#include "alsrec/error.hpp"
#include "alsrec/ratings.hpp"

namespace alsrec {

struct Movie {
  RawId id = 0;
  std::string title;
  std::vector<std::string> genres;
};

inline std::vector<std::string> split_genres(const std::string& field) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= field.size()) {
    const auto bar = field.find('|', start);
    const auto end = bar == std::string::npos ? field.size() : bar;
    if (end > start) out.push_back(field.substr(start, end - start));
    if (bar == std::string::npos) break;
    start = bar + 1;
  }
  return out;
}

// Reads `movieId,title,genres`; titles may be quoted and contain commas.
inline std::vector<Movie> parse_movies(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw Error(source + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "movieId,title,genres") throw Error(source + ": unexpected header '" + line + "'");
  std::vector<Movie> movies;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = csv::split_line(line);
    Movie m;
    if (f.size() != 3 || !csv::parse_number(f[0], m.id)) {
      throw Error(source + ":" + std::to_string(line_no) + ": malformed row");
    }
    m.title = f[1];
    m.genres = split_genres(f[2]);
    movies.push_back(std::move(m));
  }
  return movies;
}

inline std::vector<Movie> parse_movies(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return parse_movies(in, path);
}

}  // namespace alsrec

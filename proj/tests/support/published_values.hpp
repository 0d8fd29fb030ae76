#pragma once

// Reads the published figures the acceptance suite reproduces straight from
// the reference text, so targets are never retyped by hand.

#include <filesystem>
#include <fstream>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

namespace catchrel::testing {

struct PublishedValues {
  std::vector<double> top1_error_by_model;  // Bali-26 top-1 column, table order
  std::vector<double> context_top1;         // snake fruit, dragon fruit, bamboo
  std::vector<double> context_top3;
  std::size_t balance_min = 0;
  std::size_t balance_max = 0;
  int split_train = 0;
  int split_eval = 0;
};

inline std::vector<std::string> tab_fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, '\t');) out.push_back(f);
  return out;
}

/// Throws std::runtime_error when a value cannot be located.
inline PublishedValues read_published_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream all;
  all << in.rdbuf();
  const auto text = all.str();
  PublishedValues v;

  std::istringstream lines(text);
  std::optional<std::size_t> column;
  for (std::string line; std::getline(lines, line);) {
    const auto f = tab_fields(line);
    if (f.size() >= 3 && f[0] == "CNN model") {
      for (std::size_t i = 1; i < f.size(); ++i) {
        if (f[i].rfind("top-1 error on Bali-26", 0) == 0) column = i;
      }
      continue;
    }
    if (column && f.size() > *column) {
      try {
        std::size_t used = 0;
        const double x = std::stod(f[*column], &used);
        if (used == f[*column].size()) {
          v.top1_error_by_model.push_back(x);
          continue;
        }
      } catch (const std::exception&) {
      }
    }
    if (column && !v.top1_error_by_model.empty() && f.size() <= *column) column.reset();
    if (f.size() == 4 && (f[0] == "top-1 error" || f[0] == "top-3 error")) {
      auto& dst = f[0] == "top-1 error" ? v.context_top1 : v.context_top3;
      for (std::size_t i = 1; i < 4; ++i) dst.push_back(std::stod(f[i]));
    }
  }

  std::smatch m;
  static const std::regex bounds("at least (\\d+) and no more than (\\d+) examples");
  if (std::regex_search(text, m, bounds)) {
    v.balance_min = std::stoul(m[1]);
    v.balance_max = std::stoul(m[2]);
  }
  static const std::regex ratio("divided equally \\((\\d+):(\\d+)\\)");
  if (std::regex_search(text, m, ratio)) {
    v.split_train = std::stoi(m[1]);
    v.split_eval = std::stoi(m[2]);
  }
  if (v.top1_error_by_model.empty() || v.context_top1.size() != 3 || v.context_top3.size() != 3 ||
      v.balance_min == 0 || v.split_train == 0) {
    throw std::runtime_error("published values not found in " + path.string());
  }
  return v;
}

}  // namespace catchrel::testing

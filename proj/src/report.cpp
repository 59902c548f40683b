#include "lso/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "lso/errors.hpp"
#include "lso/looper.hpp"

namespace lso {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw GuardError(where + ": not a number: \"" + s + "\"");
  }
}

}  // namespace

std::vector<IterationRow> parse_iterations_csv(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kIterationsHeader) {
    throw GuardError(origin + ": missing or unexpected iterations header");
  }
  std::vector<IterationRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    const auto f = split_fields(line);
    if (f.size() != 10) throw GuardError(where + ": expected 10 fields");
    IterationRow r;
    r.iter = static_cast<std::size_t>(to_double(f[0], where));
    r.k = f[1];
    r.variant = f[2];
    r.min = to_double(f[3], where);
    r.median = to_double(f[4], where);
    r.mean = to_double(f[5], where);
    r.p90 = to_double(f[6], where);
    r.max = to_double(f[7], where);
    r.unique_count = to_double(f[8], where);
    r.train_size = to_double(f[9], where);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<IterationRow> collect_iteration_rows(const std::filesystem::path& run_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(run_dir)) throw GuardError("report: not a directory: " + run_dir.string());
  std::vector<fs::path> files;
  if (fs::exists(run_dir / "iterations.csv")) files.push_back(run_dir / "iterations.csv");
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(run_dir)) {
    if (e.is_directory() && fs::exists(e.path() / "iterations.csv")) subdirs.push_back(e.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& d : subdirs) files.push_back(d / "iterations.csv");
  if (files.empty()) throw GuardError("report: no iterations.csv under " + run_dir.string());

  std::vector<IterationRow> rows;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::stringstream ss;
    ss << in.rdbuf();
    auto part = parse_iterations_csv(ss.str(), f.string());
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

std::string comparison_table(const std::vector<IterationRow>& rows) {
  struct Acc {
    std::size_t runs = 0;
    double median = 0, mean = 0, p90 = 0, max = 0, unique = 0;
  };
  // Key: variant, numeric k, k text, iteration.
  std::map<std::tuple<std::string, double, std::string, std::size_t>, Acc> groups;
  for (const auto& r : rows) {
    auto& a = groups[{r.variant, std::stod(r.k), r.k, r.iter}];
    ++a.runs;
    a.median += r.median;
    a.mean += r.mean;
    a.p90 += r.p90;
    a.max += r.max;
    a.unique += r.unique_count;
  }
  std::string out = "variant,k,iter,runs,median,mean,p90,max,unique_count\n";
  char buf[256];
  for (const auto& [key, a] : groups) {
    const double n = static_cast<double>(a.runs);
    std::snprintf(buf, sizeof buf, "%s,%s,%zu,%zu,%.6g,%.6g,%.6g,%.6g,%.6g\n",
                  std::get<0>(key).c_str(), std::get<2>(key).c_str(), std::get<3>(key), a.runs,
                  a.median / n, a.mean / n, a.p90 / n, a.max / n, a.unique / n);
    out += buf;
  }
  return out;
}

}  // namespace lso

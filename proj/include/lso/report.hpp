#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace lso {

/// One parsed row of an iterations.csv file.
struct IterationRow {
  std::size_t iter = 0;
  std::string k;
  std::string variant;
  double min = 0, median = 0, mean = 0, p90 = 0, max = 0;
  double unique_count = 0;
  double train_size = 0;
};

std::vector<IterationRow> parse_iterations_csv(const std::string& text, const std::string& origin);

/// Collects iterations.csv from `run_dir` and from its immediate
/// subdirectories (in name order). Throws if none is found.
std::vector<IterationRow> collect_iteration_rows(const std::filesystem::path& run_dir);

/// Averages the rows across runs per (variant, k, iteration):
/// header `variant,k,iter,runs,median,mean,p90,max,unique_count`.
std::string comparison_table(const std::vector<IterationRow>& rows);

}  // namespace lso

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace svt {

struct SessionMetrics {
  int session_index = 0;
  double top1 = 0.0;  // percent
  int n_test = 0;
  int n_classes_seen = 0;
};

struct RunResult {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<SessionMetrics> per_session;
  double avg = 0.0;
  std::string label;           // table row name, e.g. "SV-WinT"
  std::string loss_log_ref;    // paths, informational
  std::string checkpoint_ref;
};

double top1_accuracy(const std::vector<int>& predictions,
                     const std::vector<int>& labels);
double average_accuracy(const std::vector<double>& session_accs);
// percentage-point difference
double relative_improvement(double ours_avg, double baseline_avg);

double mean_session_accuracy(const RunResult& r);

enum class TableFormat { Markdown, Csv };

// One row per run: label, per-session accuracy to 2 decimals
// (half-away-from-zero), Avg. from unrounded values, improvement against the
// baseline row.
std::string emit_results_table(const std::vector<RunResult>& results,
                               const std::vector<std::string>& labels,
                               TableFormat format,
                               std::size_t baseline_index = 0);

std::string run_result_to_json(const RunResult& r);
RunResult run_result_from_json(const std::string& text);
RunResult load_run_result(const std::filesystem::path& path);

double round_half_away(double value, int decimals);

}  // namespace svt

#include "svt/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "svt/error.hpp"
#include "svt/fsutil.hpp"

namespace svt {

double top1_accuracy(const std::vector<int>& predictions,
                     const std::vector<int>& labels) {
  if (predictions.empty())
    fail(ErrorKind::Input, "top1_accuracy: empty input");
  if (predictions.size() != labels.size())
    fail(ErrorKind::Shape, "top1_accuracy: length mismatch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == labels[i]) ++correct;
  return 100.0 * static_cast<double>(correct) /
         static_cast<double>(predictions.size());
}

double average_accuracy(const std::vector<double>& session_accs) {
  if (session_accs.empty())
    fail(ErrorKind::Input, "average_accuracy: empty input");
  double sum = 0.0;
  for (double a : session_accs) sum += a;
  return sum / static_cast<double>(session_accs.size());
}

double relative_improvement(double ours_avg, double baseline_avg) {
  return ours_avg - baseline_avg;
}

double mean_session_accuracy(const RunResult& r) {
  std::vector<double> accs;
  accs.reserve(r.per_session.size());
  for (const SessionMetrics& m : r.per_session) accs.push_back(m.top1);
  return average_accuracy(accs);
}

double round_half_away(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::copysign(std::floor(std::abs(value) * scale + 0.5) / scale,
                       value);
}

namespace {
std::string cell2(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", round_half_away(v, 2));
  return buf;
}
}  // namespace

std::string emit_results_table(const std::vector<RunResult>& results,
                               const std::vector<std::string>& labels,
                               TableFormat format,
                               std::size_t baseline_index) {
  if (results.empty()) fail(ErrorKind::Input, "results table: no runs");
  if (labels.size() != results.size())
    fail(ErrorKind::Layout, "results table: labels/results size mismatch");
  if (baseline_index >= results.size())
    fail(ErrorKind::Layout, "results table: baseline index out of range");
  const std::size_t sessions = results[0].per_session.size();
  for (const RunResult& r : results)
    if (r.per_session.size() != sessions)
      fail(ErrorKind::Layout,
           "results table: runs have different session counts");

  const double baseline_avg = mean_session_accuracy(results[baseline_index]);
  std::ostringstream out;
  const bool md = format == TableFormat::Markdown;
  if (md) {
    out << "| Method |";
    for (std::size_t s = 0; s < sessions; ++s) out << " " << s << " |";
    out << " Avg. | Improvement |\n";
    out << "|---|";
    for (std::size_t s = 0; s < sessions; ++s) out << "---|";
    out << "---|---|\n";
  } else {
    out << "method";
    for (std::size_t s = 0; s < sessions; ++s) out << ",s" << s;
    out << ",avg,improvement\n";
  }
  for (std::size_t i = 0; i < results.size(); ++i) {
    const RunResult& r = results[i];
    const double avg = mean_session_accuracy(r);
    const double imp = relative_improvement(avg, baseline_avg);
    if (md) {
      out << "| " << labels[i] << " |";
      for (const SessionMetrics& m : r.per_session)
        out << " " << cell2(m.top1) << " |";
      out << " " << cell2(avg) << " | " << cell2(imp) << " |\n";
    } else {
      out << labels[i];
      for (const SessionMetrics& m : r.per_session) out << "," << cell2(m.top1);
      out << "," << cell2(avg) << "," << cell2(imp) << "\n";
    }
  }
  return out.str();
}

std::string run_result_to_json(const RunResult& r) {
  nlohmann::json doc;
  doc["config_hash"] = r.config_hash;
  doc["seed"] = r.seed;
  doc["sessions"] = nlohmann::json::array();
  for (const SessionMetrics& m : r.per_session)
    doc["sessions"].push_back({{"i", m.session_index},
                               {"top1", m.top1},
                               {"n_test", m.n_test},
                               {"n_classes", m.n_classes_seen}});
  doc["avg"] = r.avg;
  return doc.dump(2) + "\n";
}

RunResult run_result_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Validation, std::string("bad results JSON: ") + e.what());
  }
  RunResult r;
  r.config_hash = doc.value("config_hash", "");
  r.seed = doc.value("seed", std::uint64_t{0});
  for (const auto& s : doc.at("sessions")) {
    SessionMetrics m;
    m.session_index = s.at("i").get<int>();
    m.top1 = s.at("top1").get<double>();
    m.n_test = s.at("n_test").get<int>();
    m.n_classes_seen = s.at("n_classes").get<int>();
    r.per_session.push_back(m);
  }
  r.avg = doc.value("avg", 0.0);
  return r;
}

RunResult load_run_result(const std::filesystem::path& path) {
  return run_result_from_json(read_file(path));
}

}  // namespace svt

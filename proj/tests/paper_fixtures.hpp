#pragma once

// Published FSCIL benchmark rows used as arithmetic fixtures: per-session
// Top-1 accuracies with the table's average and improvement-over-row
// columns. Improvement is measured against the last (reference) row of each
// table.

#include <string>
#include <vector>

namespace fixtures {

struct MethodRow {
  std::string name;
  std::vector<double> sessions;
  double printed_avg;
  double printed_improvement;  // NaN marks the reference row
  bool has_improvement;
};

struct BenchmarkTable {
  std::string name;
  double reference_avg;  // printed Avg. of the reference (SV) row
  std::vector<MethodRow> rows;
};

inline std::vector<BenchmarkTable> benchmark_tables() {
  return {
      {"CUB200",
       78.65,
       {
           {"CEC", {75.85, 71.94, 68.50, 63.50, 62.43, 58.27, 57.73, 55.81,
                    54.83, 53.52, 52.28}, 61.33, 17.32, true},
           {"MetaFSCIL", {75.90, 72.41, 68.78, 64.78, 62.96, 59.99, 58.30,
                          56.85, 54.78, 53.82, 52.64}, 61.93, 16.72, true},
           {"FeSSSS", {79.60, 73.46, 70.32, 66.38, 63.97, 59.63, 58.19,
                       57.56, 55.01, 54.31, 52.98}, 62.85, 15.80, true},
           {"ALICE", {77.40, 72.70, 70.60, 67.20, 65.90, 63.40, 62.90, 61.90,
                      60.50, 60.60, 60.10}, 65.75, 12.90, true},
           {"LIMIT", {75.89, 73.55, 71.99, 68.14, 67.42, 63.61, 62.40, 61.35,
                      59.91, 58.66, 57.41}, 65.48, 13.17, true},
           {"MCNet", {77.57, 73.96, 70.47, 65.81, 66.16, 63.81, 62.09, 61.82,
                      60.41, 60.09, 59.08}, 65.57, 13.08, true},
           {"NC-FSCIL", {80.45, 75.98, 72.30, 70.28, 68.17, 65.16, 64.43,
                         63.25, 60.66, 60.01, 59.44}, 67.28, 11.37, true},
           {"SoftNet", {78.07, 74.58, 71.37, 67.54, 65.37, 62.60, 61.07,
                        59.37, 57.53, 57.21, 56.75}, 64.68, 13.97, true},
           {"LIMIT+V-Swin-T", {82.59, 81.09, 79.46, 76.68, 76.94, 75.12,
                               74.59, 73.14, 73.40, 73.17, 73.34}, 76.32,
            2.33, true},
           {"LIMIT+SV-Swin-T", {84.19, 82.63, 81.21, 78.97, 79.38, 77.64,
                                77.55, 75.71, 75.91, 75.77, 76.17}, 78.65,
            0.0, false},
       }},
      {"Mini-ImageNet",
       85.07,
       {
           {"CEC", {72.00, 66.83, 62.97, 59.43, 56.70, 53.73, 51.19, 49.24,
                    47.63}, 57.75, 27.32, true},
           {"MetaFSCIL", {72.04, 67.94, 63.77, 60.29, 57.58, 55.16, 52.90,
                          50.79, 49.19}, 58.85, 26.22, true},
           {"FeSSSS", {81.50, 77.04, 72.92, 69.56, 67.27, 64.34, 62.07,
                       60.55, 58.87}, 68.23, 16.84, true},
           {"ALICE", {80.60, 70.60, 67.40, 64.50, 62.50, 60.00, 57.80, 56.80,
                      55.70}, 63.99, 21.08, true},
           {"LIMIT", {72.32, 68.47, 64.30, 60.78, 57.95, 55.07, 52.70, 50.72,
                      49.19}, 59.06, 26.01, true},
           {"MCNet", {72.33, 67.70, 63.50, 60.34, 57.59, 54.70, 52.13, 50.41,
                      49.08}, 58.64, 26.43, true},
           {"NC-FSCIL", {84.02, 76.80, 72.00, 67.83, 66.35, 64.04, 61.46,
                         59.54, 58.31}, 67.82, 17.25, true},
           {"SoftNet", {79.77, 75.08, 70.59, 66.93, 64.00, 61.00, 57.81,
                        55.81, 54.68}, 65.07, 20.00, true},
           {"LIMIT+V-Swin-T", {89.17, 87.39, 84.83, 83.41, 82.66, 81.20,
                               79.81, 79.36, 79.23}, 83.01, 2.06, true},
           {"LIMIT+SV-Swin-T", {90.55, 89.20, 86.80, 85.44, 84.78, 83.38,
                                81.91, 81.90, 81.65}, 85.07, 0.0, false},
       }},
      {"CIFAR100",
       76.84,
       {
           {"CEC", {73.07, 68.88, 65.26, 61.19, 58.09, 55.57, 53.22, 51.34,
                    49.14}, 59.53, 17.31, true},
           {"MetaFSCIL", {74.50, 70.10, 66.84, 62.77, 59.48, 56.52, 54.36,
                          52.56, 49.97}, 60.79, 16.05, true},
           {"FeSSSS", {75.35, 70.81, 66.70, 62.73, 59.62, 56.45, 54.33,
                       52.10, 50.23}, 60.92, 15.92, true},
           {"ALICE", {79.00, 70.50, 67.10, 63.40, 61.20, 59.20, 58.10, 56.30,
                      54.10}, 63.21, 13.63, true},
           {"LIMIT", {73.81, 72.09, 67.87, 63.89, 60.70, 57.77, 55.67, 53.52,
                      51.23}, 61.84, 15.00, true},
           {"MCNet", {73.30, 69.34, 65.72, 61.70, 58.75, 56.44, 54.59, 53.01,
                      50.72}, 60.40, 16.44, true},
           {"SoftNet", {80.33, 76.23, 72.19, 67.83, 64.64, 61.39, 59.32,
                        57.37, 54.94}, 66.03, 10.81, true},
           {"NC-FSCIL", {82.52, 76.82, 73.34, 69.68, 66.19, 62.85, 60.96,
                         59.02, 56.11}, 67.50, 9.34, true},
           {"LIMIT+V-Swin-T", {82.07, 78.49, 75.90, 73.27, 72.36, 71.20,
                               70.60, 69.39, 67.69}, 73.44, 3.40, true},
           {"LIMIT+SV-Swin-T", {86.77, 82.82, 80.36, 77.20, 76.06, 74.00,
                                72.92, 71.68, 69.75}, 76.84, 0.0, false},
       }},
  };
}

}  // namespace fixtures

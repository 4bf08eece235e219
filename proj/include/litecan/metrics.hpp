#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace litecan {

// One-vs-rest evaluation summary. Rows of the confusion matrix are true
// labels, columns are predictions.
struct MetricsReport {
    std::vector<std::vector<int64_t>> confusion;
    std::vector<double> precision, recall, f1, class_accuracy;
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0, macro_accuracy = 0.0;
    double overall_accuracy = 0.0;
    int64_t total = 0;
};

// Zero-denominator conventions: precision/recall are 0 when undefined, F1 is
// 0 when precision + recall is 0.
MetricsReport compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels,
                              int n_classes);

// Fraction of samples where (prediction != Normal) agrees with
// (label != Normal); the cross-profile detection figure of merit.
double binary_detection_accuracy(const std::vector<int>& predictions,
                                 const std::vector<int>& labels);

std::string format_metrics(const MetricsReport& report, const std::vector<std::string>& class_names);

// Machine-readable `key = value` form of the same report.
void write_metrics_kv(std::ostream& out, const MetricsReport& report,
                      const std::vector<std::string>& class_names);

}  // namespace litecan

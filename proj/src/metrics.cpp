#include "litecan/metrics.hpp"

#include <cstdio>

#include "litecan/errors.hpp"

namespace litecan {

MetricsReport compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels,
                              int n_classes) {
    if (n_classes < 1) throw ConfigError("metrics: class count must be positive");
    if (predictions.empty()) throw DataError("cannot compute metrics on empty input");
    if (predictions.size() != labels.size())
        throw DataError("metrics: " + std::to_string(predictions.size()) + " predictions vs " +
                        std::to_string(labels.size()) + " labels");
    MetricsReport r;
    r.total = static_cast<int64_t>(predictions.size());
    r.confusion.assign(static_cast<size_t>(n_classes),
                       std::vector<int64_t>(static_cast<size_t>(n_classes), 0));
    for (size_t i = 0; i < predictions.size(); ++i) {
        const int p = predictions[i], l = labels[i];
        if (p < 0 || p >= n_classes || l < 0 || l >= n_classes)
            throw DataError("metrics: class index out of range at sample " + std::to_string(i));
        ++r.confusion[static_cast<size_t>(l)][static_cast<size_t>(p)];
    }
    int64_t trace = 0;
    for (int c = 0; c < n_classes; ++c) {
        const size_t cc = static_cast<size_t>(c);
        const int64_t tp = r.confusion[cc][cc];
        int64_t fp = 0, fn = 0;
        for (int o = 0; o < n_classes; ++o) {
            if (o == c) continue;
            fp += r.confusion[static_cast<size_t>(o)][cc];
            fn += r.confusion[cc][static_cast<size_t>(o)];
        }
        const int64_t tn = r.total - tp - fp - fn;
        const double prec = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        const double rec = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        const double f1 = prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
        r.precision.push_back(prec);
        r.recall.push_back(rec);
        r.f1.push_back(f1);
        r.class_accuracy.push_back(static_cast<double>(tp + tn) / static_cast<double>(r.total));
        r.macro_precision += prec;
        r.macro_recall += rec;
        r.macro_f1 += f1;
        r.macro_accuracy += r.class_accuracy.back();
        trace += tp;
    }
    r.macro_precision /= n_classes;
    r.macro_recall /= n_classes;
    r.macro_f1 /= n_classes;
    r.macro_accuracy /= n_classes;
    r.overall_accuracy = static_cast<double>(trace) / static_cast<double>(r.total);
    return r;
}

double binary_detection_accuracy(const std::vector<int>& predictions,
                                 const std::vector<int>& labels) {
    if (predictions.empty()) throw DataError("cannot compute detection accuracy on empty input");
    if (predictions.size() != labels.size())
        throw DataError("detection accuracy: prediction/label count mismatch");
    int64_t agree = 0;
    for (size_t i = 0; i < predictions.size(); ++i)
        if ((predictions[i] != 0) == (labels[i] != 0)) ++agree;
    return static_cast<double>(agree) / static_cast<double>(predictions.size());
}

std::string format_metrics(const MetricsReport& r, const std::vector<std::string>& class_names) {
    const int n = static_cast<int>(r.precision.size());
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-14s %9s %9s %9s %9s %10s\n", "class", "precision", "recall",
                  "f1", "accuracy", "support");
    out += buf;
    for (int c = 0; c < n; ++c) {
        int64_t support = 0;
        for (int64_t v : r.confusion[static_cast<size_t>(c)]) support += v;
        const std::string name = c < static_cast<int>(class_names.size())
                                     ? class_names[static_cast<size_t>(c)]
                                     : "class" + std::to_string(c);
        std::snprintf(buf, sizeof buf, "%-14s %9.4f %9.4f %9.4f %9.4f %10lld\n", name.c_str(),
                      r.precision[static_cast<size_t>(c)], r.recall[static_cast<size_t>(c)],
                      r.f1[static_cast<size_t>(c)], r.class_accuracy[static_cast<size_t>(c)],
                      static_cast<long long>(support));
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "%-14s %9.4f %9.4f %9.4f %9.4f %10lld\n", "macro",
                  r.macro_precision, r.macro_recall, r.macro_f1, r.macro_accuracy,
                  static_cast<long long>(r.total));
    out += buf;
    std::snprintf(buf, sizeof buf, "overall accuracy %.6f\n", r.overall_accuracy);
    out += buf;
    return out;
}

void write_metrics_kv(std::ostream& out, const MetricsReport& r,
                      const std::vector<std::string>& class_names) {
    auto name_of = [&](int c) {
        return c < static_cast<int>(class_names.size()) ? class_names[static_cast<size_t>(c)]
                                                        : "class" + std::to_string(c);
    };
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.9g", v);
        return std::string(buf);
    };
    out << "samples = " << r.total << "\n";
    out << "overall_accuracy = " << num(r.overall_accuracy) << "\n";
    out << "macro_precision = " << num(r.macro_precision) << "\n";
    out << "macro_recall = " << num(r.macro_recall) << "\n";
    out << "macro_f1 = " << num(r.macro_f1) << "\n";
    out << "macro_accuracy = " << num(r.macro_accuracy) << "\n";
    const int n = static_cast<int>(r.precision.size());
    for (int c = 0; c < n; ++c) {
        out << "precision." << name_of(c) << " = " << num(r.precision[static_cast<size_t>(c)])
            << "\n";
        out << "recall." << name_of(c) << " = " << num(r.recall[static_cast<size_t>(c)]) << "\n";
        out << "f1." << name_of(c) << " = " << num(r.f1[static_cast<size_t>(c)]) << "\n";
        out << "accuracy." << name_of(c) << " = " << num(r.class_accuracy[static_cast<size_t>(c)])
            << "\n";
    }
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            out << "confusion." << name_of(a) << "." << name_of(b) << " = "
                << r.confusion[static_cast<size_t>(a)][static_cast<size_t>(b)] << "\n";
}

}  // namespace litecan

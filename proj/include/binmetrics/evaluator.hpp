#pragma once

#include "binmetrics/metrics.hpp"
#include "binmetrics/util.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace binmetrics {

// ── PR scoring ───────────────────────────────────────────────────────────

// Competition rank of the vulnerable routine among descending metric values:
// frang = 1 + |{routines with strictly greater value}|. PR = 1 - frang/TF.
inline double pr_score(const std::map<std::string, double>& values,
                       const std::string& vulnerable) {
    auto it = values.find(vulnerable);
    if (it == values.end())
        throw ParseError("routine '" + vulnerable + "' not present in metric values");
    const double own = it->second;
    int64_t greater = 0;
    for (const auto& [_, v] : values)
        if (v > own)
            ++greater;
    const double frang = static_cast<double>(1 + greater);
    const double tf = static_cast<double>(values.size());
    return 1.0 - frang / tf;
}

// ── Corpus aggregation ───────────────────────────────────────────────────

struct PrSample {
    std::string module;
    std::string routine;
    double pr = 0;
};

struct MetricSummary {
    std::string metric;
    double mean_pr_percent = 0;
    std::optional<double> cv_percent; // absent when mean is 0 or only one sample
};

struct EvaluationReport {
    std::vector<std::string> metrics;                  // canonical order
    std::map<std::string, std::vector<PrSample>> samples; // metric -> PR values
    std::vector<MetricSummary> summaries;
};

// Mean in percent; CV = sample standard deviation / mean, in percent.
inline MetricSummary summarize(const std::string& metric, const std::vector<PrSample>& samples) {
    MetricSummary s;
    s.metric = metric;
    if (samples.empty())
        return s;
    double sum = 0;
    for (const PrSample& p : samples)
        sum += p.pr;
    const double mean = sum / static_cast<double>(samples.size());
    s.mean_pr_percent = mean * 100.0;
    if (samples.size() > 1 && mean != 0.0) {
        double var = 0;
        for (const PrSample& p : samples)
            var += (p.pr - mean) * (p.pr - mean);
        var /= static_cast<double>(samples.size() - 1);
        s.cv_percent = std::sqrt(var) / mean * 100.0;
    }
    return s;
}

inline EvaluationReport aggregate(const std::map<std::string, std::vector<PrSample>>& by_metric) {
    EvaluationReport report;
    report.metrics = metric_names();
    report.samples = by_metric;
    for (const std::string& metric : report.metrics) {
        auto it = by_metric.find(metric);
        report.summaries.push_back(
            summarize(metric, it == by_metric.end() ? std::vector<PrSample>{} : it->second));
    }
    return report;
}

// One PR sample per vulnerable routine per metric. TF spans all routines
// that received a metric vector (every routine with at least 1 instruction).
inline void score_application(const std::string& module_name,
                              const std::map<std::string, MetricVector>& metrics,
                              const std::vector<std::string>& vulnerable_routines,
                              std::map<std::string, std::vector<PrSample>>& by_metric) {
    for (const std::string& metric : metric_names()) {
        std::map<std::string, double> values;
        for (const auto& [routine, mv] : metrics)
            values[routine] = metric_value(mv, metric);
        for (const std::string& vuln : vulnerable_routines)
            by_metric[metric].push_back({module_name, vuln, pr_score(values, vuln)});
    }
}

// ── Ground truth ─────────────────────────────────────────────────────────
//
//   <module> <routine>
// per line, '#' comments.

struct GroundTruth {
    std::map<std::string, std::vector<std::string>> vulnerable; // module -> routines
};

inline GroundTruth parse_ground_truth(const std::string& content, const std::string& source) {
    GroundTruth gt;
    std::istringstream in(content);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#')
            continue;
        auto fields = split_fields(line);
        if (fields.size() != 2)
            throw ParseError(source + ":" + std::to_string(line_no) +
                             ": expected '<module> <routine>'");
        gt.vulnerable[fields[0]].push_back(fields[1]);
    }
    return gt;
}

inline GroundTruth load_ground_truth(const std::string& path) {
    return parse_ground_truth(read_file(path), path);
}

// ── Report emission ──────────────────────────────────────────────────────

inline std::string report_csv(const EvaluationReport& report, char sep = ',') {
    std::ostringstream out;
    out << "# TF includes every routine with >=1 instruction (import thunks excluded)\n";
    out << "metric" << sep << "mean_pr_percent" << sep << "cv_percent\n";
    for (const MetricSummary& s : report.summaries) {
        out << s.metric << sep << format_g6(s.mean_pr_percent) << sep;
        if (s.cv_percent)
            out << format_g6(*s.cv_percent);
        out << "\n";
    }
    return out.str();
}

inline std::string pr_values_csv(const EvaluationReport& report, char sep = ',') {
    std::ostringstream out;
    out << "metric" << sep << "module" << sep << "routine" << sep << "pr\n";
    for (const std::string& metric : report.metrics) {
        auto it = report.samples.find(metric);
        if (it == report.samples.end())
            continue;
        for (const PrSample& p : it->second)
            out << metric << sep << p.module << sep << p.routine << sep << format_g6(p.pr)
                << "\n";
    }
    return out.str();
}

} // namespace binmetrics

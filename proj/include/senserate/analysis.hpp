#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "senserate/core.hpp"

namespace senserate::analysis {

struct Bucket {
  std::string label;
  double lo = 0.0;
  double hi = 0.0;
  bool inclusive_hi = false;
  std::optional<double> mae;  // absent when the bucket is empty
  std::size_t n = 0;
};

/// Buckets from ascending edges spanning [1, 5]: [e0,e1), [e1,e2), ...,
/// with only the last bucket closed on the right.
std::vector<Bucket> buckets_from_edges(std::span<const double> edges);
std::vector<double> default_bucket_edges();  // 1.0, 2.5, 3.5, 4.5, 5.0
/// Parses "1,2.5,3.5,4.5,5".
std::vector<double> parse_bucket_edges(const std::string& csv);

/// Throws ValidationError unless the buckets partition [1, 5].
void check_partition(std::span<const Bucket> buckets);

std::vector<Bucket> bucketed_mae(std::span<const Prediction> preds, std::span<const Sample> samples,
                                 std::vector<Bucket> buckets);

struct DisagreementSplit {
  double threshold = 1.0;
  std::optional<double> high_mae;  // gold_std >= threshold
  std::size_t high_n = 0;
  std::optional<double> low_mae;   // gold_std < threshold
  std::size_t low_n = 0;
};

DisagreementSplit disagreement_split(std::span<const Prediction> preds,
                                     std::span<const Sample> samples, double threshold = 1.0);

struct HistogramRow {
  double bin_lo;
  double bin_hi;
  std::size_t gold_count;
  std::size_t pred_count;
};

/// Bins of `width` over [1, 5]; the last bin is closed on the right.
std::vector<HistogramRow> distributions(std::span<const Prediction> preds,
                                        std::span<const Sample> samples, double width = 0.25);
std::string distributions_csv(std::span<const HistogramRow> rows, const ArtifactStamp& stamp);
void export_distributions(std::span<const Prediction> preds, std::span<const Sample> samples,
                          const std::filesystem::path& out_path, const ArtifactStamp& stamp);

struct WorstCase {
  Sample sample;
  Prediction prediction;
  double abs_err;
};

/// Top-k by |score - gold_mean| descending, ties by id ascending.
std::vector<WorstCase> worst_cases(std::span<const Prediction> preds,
                                   std::span<const Sample> samples, std::size_t k);
std::string worst_cases_to_json(std::span<const WorstCase> cases, const ArtifactStamp& stamp);

struct EvalReport {
  std::string system_id;
  std::size_t n = 0;
  std::optional<double> spearman;
  std::optional<std::string> spearman_error;
  double accuracy = 0.0;
  double mae = 0.0;
  std::vector<Bucket> buckets;
  DisagreementSplit disagreement;
  std::size_t parse_failure_count = 0;
};

struct ReportOptions {
  std::vector<double> bucket_edges = default_bucket_edges();
  double disagreement_threshold = 1.0;
};

/// Requires exactly one prediction per sample (missing ids are listed in
/// the error). An undefined Spearman (constant scores or golds) is recorded
/// in `spearman_error` rather than thrown.
EvalReport build_report(std::span<const Prediction> preds, std::span<const Sample> samples,
                        const std::string& system_id, const ReportOptions& opts = {});

std::string report_to_json(const EvalReport& report, const ArtifactStamp& stamp);

}  // namespace senserate::analysis

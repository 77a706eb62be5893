#pragma once

#include <span>
#include <string>
#include <vector>

#include "senserate/core.hpp"

namespace senserate::metrics {

struct MetricValue {
  std::string name;
  double value = 0.0;
  std::size_t n = 0;
};

/// Average ranks (1-based); tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation. Throws MetricError if either side is constant.
double pearson(std::span<const double> x, std::span<const double> y);

/// Spearman rank correlation with tie-averaged ranks.
double spearman(std::span<const double> pred, std::span<const double> gold);

/// A prediction joined to its gold sample.
struct ScoredPair {
  double score;
  double gold_mean;
  double gold_std;
};

/// Joins predictions to samples by id. Throws on unknown or duplicate ids.
/// Samples without a prediction are simply not included.
std::vector<ScoredPair> join(std::span<const Prediction> preds, std::span<const Sample> samples);

/// Fraction of predictions with |score - gold_mean| <= gold_std.
double within_std_accuracy(std::span<const Prediction> preds, std::span<const Sample> samples);
double within_std_accuracy(std::span<const ScoredPair> pairs);

double mae(std::span<const Prediction> preds, std::span<const Sample> samples);
double mae(std::span<const ScoredPair> pairs);

}  // namespace senserate::metrics

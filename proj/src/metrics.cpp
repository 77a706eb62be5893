#include "senserate/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "senserate/error.hpp"

namespace senserate::metrics {

namespace {
// Absorbs decimal representation error so |err| == sigma counts as within.
constexpr double kBoundarySlack = 1e-9;
}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // Positions i..j-1 (0-based) share rank mean((i+1)..j).
    const double rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw MetricError("length mismatch: " + std::to_string(x.size()) + " vs " +
                      std::to_string(y.size()));
  }
  if (x.empty()) throw MetricError("correlation of empty vectors");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw MetricError("correlation undefined for a constant vector");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> pred, std::span<const double> gold) {
  if (pred.size() != gold.size()) {
    throw MetricError("length mismatch: " + std::to_string(pred.size()) + " vs " +
                      std::to_string(gold.size()));
  }
  if (pred.empty()) throw MetricError("spearman of empty vectors");
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(pred.begin(), pred.end(), finite) ||
      !std::all_of(gold.begin(), gold.end(), finite)) {
    throw MetricError("spearman requires finite values");
  }
  const auto rp = average_ranks(pred);
  const auto rg = average_ranks(gold);
  return pearson(rp, rg);
}

std::vector<ScoredPair> join(std::span<const Prediction> preds, std::span<const Sample> samples) {
  std::unordered_map<std::string, const Sample*> by_id;
  by_id.reserve(samples.size());
  for (const auto& s : samples) by_id.emplace(s.id, &s);
  std::unordered_set<std::string> seen;
  std::vector<ScoredPair> out;
  out.reserve(preds.size());
  for (const auto& p : preds) {
    auto it = by_id.find(p.sample_id);
    if (it == by_id.end()) throw ValidationError("prediction for unknown id '" + p.sample_id + "'");
    if (!seen.insert(p.sample_id).second) {
      throw ValidationError("duplicate prediction for id '" + p.sample_id + "'");
    }
    out.push_back({p.score, it->second->gold_mean, it->second->gold_std});
  }
  return out;
}

double within_std_accuracy(std::span<const ScoredPair> pairs) {
  if (pairs.empty()) throw MetricError("accuracy over zero predictions");
  std::size_t hits = 0;
  for (const auto& p : pairs) {
    if (std::abs(p.score - p.gold_mean) <= p.gold_std + kBoundarySlack) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

double within_std_accuracy(std::span<const Prediction> preds, std::span<const Sample> samples) {
  return within_std_accuracy(join(preds, samples));
}

double mae(std::span<const ScoredPair> pairs) {
  if (pairs.empty()) throw MetricError("MAE over zero predictions");
  // Summed in sorted order so the result does not depend on input order.
  std::vector<double> errors;
  errors.reserve(pairs.size());
  for (const auto& p : pairs) errors.push_back(std::abs(p.score - p.gold_mean));
  std::sort(errors.begin(), errors.end());
  const double total = std::accumulate(errors.begin(), errors.end(), 0.0);
  return total / static_cast<double>(pairs.size());
}

double mae(std::span<const Prediction> preds, std::span<const Sample> samples) {
  return mae(join(preds, samples));
}

}  // namespace senserate::metrics

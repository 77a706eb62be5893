#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "senserate/core.hpp"
#include "senserate/features.hpp"

namespace senserate::regress {

enum class RegKind { kMse, kHuber };
enum class LabelSpace {
  kUnit,  // trained on (y - 1) / 4
  kRaw,   // trained on the 1..5 scale directly
};

/// Weights of the composite objective reg + lambda_r * rank + lambda_u * unc.
struct LossConfig {
  RegKind reg_kind = RegKind::kMse;
  double delta = 1.0;  // Huber threshold
  double lambda_r = 0.25;
  double lambda_u = 0.5;
  std::size_t pair_cap = 256;
  std::uint64_t seed = 0;
};

void validate(const LossConfig& cfg);

struct LinearModel {
  features::Schema schema = features::Schema::kF8;
  std::vector<double> weights;
  double bias = 0.0;
  LabelSpace label_space = LabelSpace::kUnit;

  bool operator==(const LinearModel&) const = default;
};

/// Row-major design matrix with per-row gold and annotator spread.
struct Batch {
  std::size_t width = 0;
  std::vector<double> x;
  std::vector<double> gold;
  std::vector<double> sigma;

  std::size_t size() const noexcept { return gold.size(); }
  std::span<const double> row(std::size_t i) const noexcept {
    return {x.data() + i * width, width};
  }
};

/// Joins feature rows to samples by id, in `samples` order. Golds and
/// sigmas are on the raw 1..5 scale.
Batch make_batch(std::span<const features::FeatureVector> rows, std::span<const Sample> samples);

double normalize_label(double y);
std::vector<double> normalize_labels(std::span<const double> gold);
/// 1 + 4y, clipped to [1, 5].
double denormalize_label(double y);
/// Maps golds to (y - 1) / 4 and sigmas to sigma / 4.
Batch to_unit_space(const Batch& raw);

/// Closed-form ridge on centered features with an unpenalized intercept.
/// Fits raw labels. Throws ValidationError for a singular system at alpha 0.
LinearModel ridge_fit(const Batch& data, double alpha,
                      features::Schema schema = features::Schema::kF8);

double huber_loss(double residual, double delta);
double huber_derivative(double residual, double delta);
/// log(1 + e^x) without overflow.
double softplus(double x);
/// -log(logistic(score_hi - score_lo)).
double ranknet_loss(double score_hi, double score_lo);
/// max(0, |pred - gold| - sigma). Throws on negative sigma.
double uncertainty_loss(double pred, double gold, double sigma);

using IndexPair = std::pair<std::size_t, std::size_t>;

/// Pairs (i, j) with gold[i] > gold[j]. All of them, in (i, j) order, if
/// there are at most `cap`; otherwise a seeded uniform subset of size `cap`,
/// returned in the same order.
std::vector<IndexPair> sample_pairs(std::span<const double> gold, std::size_t cap,
                                    std::uint64_t seed);

struct LossBreakdown {
  double total = 0.0;
  double reg = 0.0;
  double rank = 0.0;
  double unc = 0.0;
  /// d total / d weights, then d total / d bias as the last entry.
  std::vector<double> gradient;
};

/// Mean-reduced composite loss and its (sub)gradient over the affine,
/// unclipped scores. Golds and sigmas must share one label space.
LossBreakdown composite_loss(const LinearModel& model, const Batch& batch, const LossConfig& cfg,
                             std::span<const IndexPair> pairs);
/// Same, with pairs from sample_pairs(batch.gold, cfg.pair_cap, cfg.seed).
LossBreakdown composite_loss(const LinearModel& model, const Batch& batch, const LossConfig& cfg);

struct TrainOptions {
  double learning_rate = 0.1;
  std::size_t max_epochs = 500;
  std::size_t patience = 3;
  /// Descend on z-scored columns (train statistics); the returned model is
  /// mapped back so it scores raw feature rows.
  bool standardize = false;
};

struct TrainReport {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_val_spearman = 0.0;
  bool stopped_early = false;
  std::vector<double> loss_trace;          // training loss per epoch
  std::vector<double> val_spearman_trace;  // NaN where undefined
};

struct TrainResult {
  LinearModel model;
  TrainReport report;
};

/// Full-batch gradient descent in unit label space with early stopping on
/// validation Spearman. Returns the best-validation model. Inputs are raw.
TrainResult train_gd(const Batch& train, const Batch& val, const LossConfig& cfg,
                     const TrainOptions& opts, features::Schema schema = features::Schema::kF8);

/// Affine score before denormalization and clipping.
double raw_score(const LinearModel& model, std::span<const double> x);
/// Score on the 1..5 scale, clipped.
double predict(const LinearModel& model, std::span<const double> x);
double predict(const LinearModel& model, const features::FeatureVector& fv);

std::string model_to_json(const LinearModel& model, const ArtifactStamp& stamp,
                          const std::string& method);
LinearModel model_from_json(const std::string& text);
/// Traces and stopping point; undefined Spearman values serialize as null.
std::string train_report_to_json(const TrainReport& report, const ArtifactStamp& stamp);
LinearModel load_model(const std::filesystem::path& path);

}  // namespace senserate::regress

#include "senserate/regress.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "json.hpp"
#include "senserate/error.hpp"
#include "senserate/metrics.hpp"

namespace senserate::regress {

void validate(const LossConfig& cfg) {
  if (!(cfg.delta > 0.0)) throw ValidationError("Huber delta must be > 0");
  if (cfg.lambda_r < 0.0 || cfg.lambda_u < 0.0) {
    throw ValidationError("loss weights must be >= 0");
  }
  if (cfg.pair_cap == 0) throw ValidationError("pair cap must be > 0");
}

Batch make_batch(std::span<const features::FeatureVector> rows, std::span<const Sample> samples) {
  std::unordered_map<std::string, const features::FeatureVector*> by_id;
  for (const auto& r : rows) by_id.emplace(r.sample_id, &r);
  Batch b;
  for (const auto& s : samples) {
    auto it = by_id.find(s.id);
    if (it == by_id.end()) throw ValidationError("no feature vector for sample '" + s.id + "'");
    const auto& values = it->second->values;
    if (b.width == 0) b.width = values.size();
    if (values.size() != b.width) throw ValidationError("mixed feature widths");
    b.x.insert(b.x.end(), values.begin(), values.end());
    b.gold.push_back(s.gold_mean);
    b.sigma.push_back(s.gold_std);
  }
  return b;
}

double normalize_label(double y) {
  if (!(y >= 1.0 && y <= 5.0)) {
    throw ValidationError("label " + std::to_string(y) + " outside [1, 5]");
  }
  return (y - 1.0) / 4.0;
}

std::vector<double> normalize_labels(std::span<const double> gold) {
  std::vector<double> out;
  out.reserve(gold.size());
  for (double y : gold) out.push_back(normalize_label(y));
  return out;
}

double denormalize_label(double y) { return std::clamp(1.0 + 4.0 * y, 1.0, 5.0); }

Batch to_unit_space(const Batch& raw) {
  Batch out = raw;
  out.gold = normalize_labels(raw.gold);
  for (auto& s : out.sigma) {
    if (s < 0.0) throw ValidationError("negative annotator spread");
    s /= 4.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ridge

LinearModel ridge_fit(const Batch& data, double alpha, features::Schema schema) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ValidationError("alpha must be >= 0");
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto d = static_cast<Eigen::Index>(data.width);
  if (n == 0 || d == 0) throw ValidationError("ridge_fit: empty design matrix");
  if (data.x.size() != static_cast<std::size_t>(n * d)) {
    throw ValidationError("ridge_fit: design matrix shape mismatch");
  }
  for (double v : data.x) {
    if (!std::isfinite(v)) throw ValidationError("ridge_fit: non-finite feature");
  }

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMajor> X(data.x.data(), n, d);
  const Eigen::Map<const Eigen::VectorXd> y(data.gold.data(), n);
  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;

  Eigen::MatrixXd A = Xc.transpose() * Xc;
  A.diagonal().array() += alpha;
  const Eigen::VectorXd rhs = Xc.transpose() * yc;

  Eigen::VectorXd w;
  if (alpha == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-12);
    if (qr.rank() < d) {
      throw ValidationError("ridge_fit: normal equations are singular at alpha = 0; use alpha > 0");
    }
    w = qr.solve(rhs);
  } else {
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) {
      throw ValidationError("ridge_fit: normal equations are not positive definite");
    }
    w = llt.solve(rhs);
  }

  LinearModel m;
  m.schema = schema;
  m.label_space = LabelSpace::kRaw;
  m.weights.assign(w.data(), w.data() + w.size());
  m.bias = y_mean - x_mean.dot(w);
  return m;
}

// ---------------------------------------------------------------------------
// Losses

double huber_loss(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

double huber_derivative(double r, double delta) {
  if (std::abs(r) <= delta) return r;
  return r > 0.0 ? delta : -delta;
}

double softplus(double x) {
  // log1p(exp(x)) = max(x, 0) + log1p(exp(-|x|))
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double ranknet_loss(double score_hi, double score_lo) { return softplus(-(score_hi - score_lo)); }

double uncertainty_loss(double pred, double gold, double sigma) {
  if (sigma < 0.0) throw ValidationError("uncertainty_loss: negative sigma");
  return std::max(0.0, std::abs(pred - gold) - sigma);
}

namespace {

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double sign_or_zero(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  SplitMix64 mix(seed ^ (0xA24BAED4963EE407ULL * (static_cast<std::uint64_t>(epoch) + 1)));
  return mix.next();
}

}  // namespace

std::vector<IndexPair> sample_pairs(std::span<const double> gold, std::size_t cap,
                                    std::uint64_t seed) {
  std::vector<IndexPair> all;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t j = 0; j < gold.size(); ++j) {
      if (gold[i] > gold[j]) all.emplace_back(i, j);
    }
  }
  if (all.size() <= cap) return all;
  // Partial Fisher-Yates over indices, then restore canonical order.
  SplitMix64 rng(seed);
  std::vector<std::size_t> idx(all.size());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  for (std::size_t k = 0; k < cap; ++k) {
    const auto pick = k + static_cast<std::size_t>(rng.below(idx.size() - k));
    std::swap(idx[k], idx[pick]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  std::vector<IndexPair> out;
  out.reserve(cap);
  for (auto k : idx) out.push_back(all[k]);
  return out;
}

double raw_score(const LinearModel& model, std::span<const double> x) {
  if (x.size() != model.weights.size()) {
    throw ValidationError("feature width " + std::to_string(x.size()) + " does not match model (" +
                          std::to_string(model.weights.size()) + ")");
  }
  double s = model.bias;
  for (std::size_t k = 0; k < x.size(); ++k) s += model.weights[k] * x[k];
  return s;
}

LossBreakdown composite_loss(const LinearModel& model, const Batch& batch, const LossConfig& cfg,
                             std::span<const IndexPair> pairs) {
  validate(cfg);
  const std::size_t n = batch.size();
  if (n == 0) throw ValidationError("composite_loss: empty batch");
  if (batch.width != model.weights.size()) throw ValidationError("composite_loss: width mismatch");

  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = raw_score(model, batch.row(i));

  // dL/dscore_i, accumulated per term.
  std::vector<double> dscore(n, 0.0);
  LossBreakdown out;
  const double inv_n = 1.0 / static_cast<double>(n);

  for (std::size_t i = 0; i < n; ++i) {
    const double r = scores[i] - batch.gold[i];
    if (cfg.reg_kind == RegKind::kMse) {
      out.reg += r * r;
      dscore[i] += 2.0 * r * inv_n;
    } else {
      out.reg += huber_loss(r, cfg.delta);
      dscore[i] += huber_derivative(r, cfg.delta) * inv_n;
    }
    if (cfg.lambda_u > 0.0) {
      out.unc += uncertainty_loss(scores[i], batch.gold[i], batch.sigma[i]);
      if (std::abs(r) > batch.sigma[i]) dscore[i] += cfg.lambda_u * sign_or_zero(r) * inv_n;
    }
  }
  out.reg *= inv_n;
  out.unc *= inv_n;

  if (cfg.lambda_r > 0.0 && !pairs.empty()) {
    const double inv_p = 1.0 / static_cast<double>(pairs.size());
    for (const auto& [hi, lo] : pairs) {
      const double margin = scores[hi] - scores[lo];
      out.rank += softplus(-margin);
      // d/dmargin softplus(-margin) = -logistic(-margin)
      const double g = cfg.lambda_r * logistic(-margin) * inv_p;
      dscore[hi] -= g;
      dscore[lo] += g;
    }
    out.rank *= inv_p;
  }

  out.total = out.reg + cfg.lambda_r * out.rank + cfg.lambda_u * out.unc;
  out.gradient.assign(batch.width + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = batch.row(i);
    for (std::size_t k = 0; k < batch.width; ++k) out.gradient[k] += dscore[i] * x[k];
    out.gradient[batch.width] += dscore[i];
  }
  return out;
}

LossBreakdown composite_loss(const LinearModel& model, const Batch& batch, const LossConfig& cfg) {
  const auto pairs = sample_pairs(batch.gold, cfg.pair_cap, cfg.seed);
  return composite_loss(model, batch, cfg, pairs);
}

// ---------------------------------------------------------------------------
// Training

TrainResult train_gd(const Batch& train_raw, const Batch& val_raw, const LossConfig& cfg,
                     const TrainOptions& opts, features::Schema schema) {
  validate(cfg);
  if (train_raw.size() == 0) throw ValidationError("train_gd: empty training set");
  if (val_raw.size() == 0) throw ValidationError("train_gd: empty validation set");
  if (!(opts.learning_rate > 0.0)) throw ValidationError("learning rate must be > 0");
  if (opts.max_epochs == 0) throw ValidationError("max_epochs must be >= 1");
  if (train_raw.width != val_raw.width) throw ValidationError("train/validation width mismatch");

  Batch train = to_unit_space(train_raw);
  Batch val = to_unit_space(val_raw);

  // Column z-scoring from the training rows, undone on the returned weights.
  std::vector<double> center(train.width, 0.0);
  std::vector<double> scale(train.width, 1.0);
  if (opts.standardize) {
    const double n = static_cast<double>(train.size());
    for (std::size_t k = 0; k < train.width; ++k) {
      double m = 0.0;
      for (std::size_t i = 0; i < train.size(); ++i) m += train.x[i * train.width + k];
      m /= n;
      double v = 0.0;
      for (std::size_t i = 0; i < train.size(); ++i) {
        const double d = train.x[i * train.width + k] - m;
        v += d * d;
      }
      const double sd = std::sqrt(v / n);
      center[k] = m;
      scale[k] = sd > 1e-12 ? sd : 1.0;
    }
    for (Batch* b : {&train, &val}) {
      for (std::size_t i = 0; i < b->size(); ++i) {
        for (std::size_t k = 0; k < b->width; ++k) {
          auto& x = b->x[i * b->width + k];
          x = (x - center[k]) / scale[k];
        }
      }
    }
  }

  LinearModel model;
  model.schema = schema;
  model.label_space = LabelSpace::kUnit;
  model.weights.assign(train.width, 0.0);
  double mean = 0.0;
  for (double g : train.gold) mean += g;
  model.bias = mean / static_cast<double>(train.size());

  TrainResult result;
  result.model = model;
  auto& report = result.report;
  report.best_val_spearman = -std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  std::vector<double> val_scores(val.size());

  for (std::size_t epoch = 1; epoch <= opts.max_epochs; ++epoch) {
    const auto pairs = sample_pairs(train.gold, cfg.pair_cap, epoch_seed(cfg.seed, epoch));
    const auto lg = composite_loss(model, train, cfg, pairs);
    if (!std::isfinite(lg.total) ||
        !std::all_of(lg.gradient.begin(), lg.gradient.end(),
                     [](double g) { return std::isfinite(g); })) {
      throw Error("training diverged at epoch " + std::to_string(epoch) +
                  " (non-finite loss); lower the learning rate");
    }
    report.loss_trace.push_back(lg.total);
    for (std::size_t k = 0; k < model.weights.size(); ++k) {
      model.weights[k] -= opts.learning_rate * lg.gradient[k];
    }
    model.bias -= opts.learning_rate * lg.gradient.back();
    report.epochs_run = epoch;

    for (std::size_t i = 0; i < val.size(); ++i) val_scores[i] = raw_score(model, val.row(i));
    double rho = std::numeric_limits<double>::quiet_NaN();
    try {
      rho = metrics::spearman(val_scores, val.gold);
    } catch (const MetricError&) {
      // Constant scores: no ranking information this epoch.
    }
    report.val_spearman_trace.push_back(rho);

    if (std::isfinite(rho) && rho > report.best_val_spearman) {
      report.best_val_spearman = rho;
      report.best_epoch = epoch;
      result.model = model;
      stale = 0;
    } else if (++stale >= opts.patience) {
      report.stopped_early = true;
      break;
    }
  }
  if (report.best_epoch == 0) {
    // Validation Spearman was undefined throughout; keep the final model.
    result.model = model;
    report.best_val_spearman = std::numeric_limits<double>::quiet_NaN();
  }
  if (opts.standardize) {
    auto& m = result.model;
    for (std::size_t k = 0; k < m.weights.size(); ++k) {
      m.weights[k] /= scale[k];
      m.bias -= m.weights[k] * center[k];
    }
  }
  return result;
}

double predict(const LinearModel& model, std::span<const double> x) {
  const double s = raw_score(model, x);
  if (model.label_space == LabelSpace::kUnit) return denormalize_label(s);
  return std::clamp(s, 1.0, 5.0);
}

double predict(const LinearModel& model, const features::FeatureVector& fv) {
  if (fv.schema != model.schema) {
    throw ValidationError("feature schema " + std::string(features::schema_name(fv.schema)) +
                          " does not match model schema " +
                          std::string(features::schema_name(model.schema)));
  }
  return predict(model, std::span<const double>(fv.values));
}

// ---------------------------------------------------------------------------
// Model files

std::string model_to_json(const LinearModel& model, const ArtifactStamp& stamp,
                          const std::string& method) {
  nlohmann::ordered_json j;
  j["schema_id"] = features::schema_name(model.schema);
  j["weights"] = model.weights;
  j["bias"] = model.bias;
  j["label_space"] = model.label_space == LabelSpace::kUnit ? "unit" : "raw";
  // The uncertainty margin was applied on the same scale as the labels.
  j["sigma_space"] = model.label_space == LabelSpace::kUnit ? "unit" : "raw";
  j["method"] = method;
  j["config_hash"] = stamp.config_hash;
  j["seed"] = stamp.seed;
  return j.dump(2) + "\n";
}

std::string train_report_to_json(const TrainReport& report, const ArtifactStamp& stamp) {
  auto finite_or_null = [](double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["epochs_run"] = report.epochs_run;
  j["best_epoch"] = report.best_epoch;
  j["best_val_spearman"] = finite_or_null(report.best_val_spearman);
  j["stopped_early"] = report.stopped_early;
  j["loss_trace"] = nlohmann::ordered_json::array();
  for (double v : report.loss_trace) j["loss_trace"].push_back(finite_or_null(v));
  j["val_spearman_trace"] = nlohmann::ordered_json::array();
  for (double v : report.val_spearman_trace) j["val_spearman_trace"].push_back(finite_or_null(v));
  j["config_hash"] = stamp.config_hash;
  j["seed"] = stamp.seed;
  return j.dump(2) + "\n";
}

LinearModel model_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    LinearModel m;
    m.schema = features::parse_schema(j.at("schema_id").get<std::string>());
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    const auto space = j.at("label_space").get<std::string>();
    if (space == "unit") {
      m.label_space = LabelSpace::kUnit;
    } else if (space == "raw") {
      m.label_space = LabelSpace::kRaw;
    } else {
      throw ValidationError("model: unknown label_space '" + space + "'");
    }
    if (m.weights.size() != features::schema_width(m.schema)) {
      throw ValidationError("model: weight count does not match schema width");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model: ") + e.what());
  }
}

LinearModel load_model(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ValidationError("model file not found: " + path.string());
  }
  return model_from_json(read_file(path));
}

}  // namespace senserate::regress

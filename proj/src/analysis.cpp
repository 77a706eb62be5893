#include "senserate/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "senserate/error.hpp"
#include "senserate/metrics.hpp"

namespace senserate::analysis {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string format_edge(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  auto s = os.str();
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

// Pairs each sample with its prediction, in sample order.
struct Joined {
  const Sample* sample;
  const Prediction* pred;
  double abs_err;
};

std::vector<Joined> join_by_sample(std::span<const Prediction> preds,
                                   std::span<const Sample> samples, bool require_complete) {
  std::unordered_map<std::string, const Prediction*> by_id;
  for (const auto& p : preds) {
    if (!by_id.emplace(p.sample_id, &p).second) {
      throw ValidationError("duplicate prediction for id '" + p.sample_id + "'");
    }
  }
  std::unordered_set<std::string> sample_ids;
  std::vector<Joined> out;
  std::vector<std::string> missing;
  for (const auto& s : samples) {
    sample_ids.insert(s.id);
    auto it = by_id.find(s.id);
    if (it == by_id.end()) {
      missing.push_back(s.id);
      continue;
    }
    out.push_back({&s, it->second, std::abs(it->second->score - s.gold_mean)});
  }
  std::vector<std::string> unknown;
  for (const auto& p : preds) {
    if (!sample_ids.count(p.sample_id)) unknown.push_back(p.sample_id);
  }
  auto list = [](const std::vector<std::string>& ids) {
    std::string s;
    for (const auto& id : ids) s += (s.empty() ? "" : ", ") + id;
    return s;
  };
  std::string problems;
  if (!unknown.empty()) problems = "predictions for unknown ids: " + list(unknown);
  if (require_complete && !missing.empty()) {
    if (!problems.empty()) problems += "; ";
    problems += "missing predictions for ids: " + list(missing);
  }
  if (!problems.empty()) throw ValidationError(problems);
  return out;
}

std::optional<double> mean_abs(std::vector<double> errors) {
  if (errors.empty()) return std::nullopt;
  std::sort(errors.begin(), errors.end());
  double total = 0.0;
  for (double e : errors) total += e;
  return total / static_cast<double>(errors.size());
}

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

std::vector<double> default_bucket_edges() { return {1.0, 2.5, 3.5, 4.5, 5.0}; }

std::vector<double> parse_bucket_edges(const std::string& csv) {
  std::vector<double> edges;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      edges.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("bad bucket edge '" + item + "'");
    }
  }
  return edges;
}

std::vector<Bucket> buckets_from_edges(std::span<const double> edges) {
  if (edges.size() < 2) throw ValidationError("need at least two bucket edges");
  std::vector<Bucket> out;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    Bucket b;
    b.lo = edges[i];
    b.hi = edges[i + 1];
    b.inclusive_hi = i + 2 == edges.size();
    b.label = "[" + format_edge(b.lo) + "," + format_edge(b.hi) + (b.inclusive_hi ? "]" : ")");
    out.push_back(std::move(b));
  }
  check_partition(out);
  return out;
}

void check_partition(std::span<const Bucket> buckets) {
  if (buckets.empty()) throw ValidationError("no buckets");
  if (buckets.front().lo != 1.0 || buckets.back().hi != 5.0) {
    throw ValidationError("buckets must span [1, 5]");
  }
  if (!buckets.back().inclusive_hi) {
    throw ValidationError("last bucket must include 5.0");
  }
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    if (!(buckets[i].lo < buckets[i].hi)) throw ValidationError("bucket edges must ascend");
    if (i + 1 < buckets.size()) {
      if (buckets[i].hi != buckets[i + 1].lo) throw ValidationError("buckets leave a gap or overlap");
      if (buckets[i].inclusive_hi) throw ValidationError("only the last bucket may include its upper edge");
    }
  }
}

std::vector<Bucket> bucketed_mae(std::span<const Prediction> preds, std::span<const Sample> samples,
                                 std::vector<Bucket> buckets) {
  check_partition(buckets);
  const auto joined = join_by_sample(preds, samples, false);
  std::vector<std::vector<double>> errors(buckets.size());
  for (const auto& j : joined) {
    const double g = j.sample->gold_mean;
    for (std::size_t b = 0; b < buckets.size(); ++b) {
      const bool inside = g >= buckets[b].lo && (g < buckets[b].hi ||
                                                 (buckets[b].inclusive_hi && g == buckets[b].hi));
      if (inside) {
        errors[b].push_back(j.abs_err);
        break;
      }
    }
  }
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    buckets[b].n = errors[b].size();
    buckets[b].mae = mean_abs(std::move(errors[b]));
  }
  return buckets;
}

DisagreementSplit disagreement_split(std::span<const Prediction> preds,
                                     std::span<const Sample> samples, double threshold) {
  if (!(threshold > 0.0)) throw ValidationError("disagreement threshold must be > 0");
  const auto joined = join_by_sample(preds, samples, false);
  std::vector<double> high, low;
  for (const auto& j : joined) (j.sample->gold_std >= threshold ? high : low).push_back(j.abs_err);
  DisagreementSplit out;
  out.threshold = threshold;
  out.high_n = high.size();
  out.low_n = low.size();
  out.high_mae = mean_abs(std::move(high));
  out.low_mae = mean_abs(std::move(low));
  return out;
}

std::vector<HistogramRow> distributions(std::span<const Prediction> preds,
                                        std::span<const Sample> samples, double width) {
  if (!(width > 0.0)) throw ValidationError("bin width must be > 0");
  const double bins_exact = 4.0 / width;
  const auto n_bins = static_cast<std::size_t>(std::llround(bins_exact));
  if (n_bins == 0 || std::abs(bins_exact - static_cast<double>(n_bins)) > 1e-9) {
    throw ValidationError("bin width must divide the [1, 5] range evenly");
  }
  const auto joined = join_by_sample(preds, samples, false);
  std::vector<HistogramRow> rows(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    rows[b] = {1.0 + width * static_cast<double>(b), 1.0 + width * static_cast<double>(b + 1), 0, 0};
  }
  auto bin_of = [&](double v) {
    const auto b = static_cast<std::size_t>(std::floor((std::clamp(v, 1.0, 5.0) - 1.0) / width));
    return std::min(b, n_bins - 1);
  };
  for (const auto& j : joined) {
    ++rows[bin_of(j.sample->gold_mean)].gold_count;
    ++rows[bin_of(j.pred->score)].pred_count;
  }
  return rows;
}

std::string distributions_csv(std::span<const HistogramRow> rows, const ArtifactStamp& stamp) {
  std::ostringstream os;
  os << "# config_hash=" << stamp.config_hash << " seed=" << stamp.seed << "\n";
  os << "bin_lo,bin_hi,gold_count,pred_count\n";
  for (const auto& r : rows) {
    os << format_edge(r.bin_lo) << ',' << format_edge(r.bin_hi) << ',' << r.gold_count << ','
       << r.pred_count << '\n';
  }
  return os.str();
}

void export_distributions(std::span<const Prediction> preds, std::span<const Sample> samples,
                          const std::filesystem::path& out_path, const ArtifactStamp& stamp) {
  const auto rows = distributions(preds, samples);
  write_file_atomic(out_path, distributions_csv(rows, stamp));
}

std::vector<WorstCase> worst_cases(std::span<const Prediction> preds,
                                   std::span<const Sample> samples, std::size_t k) {
  if (k == 0) throw ValidationError("top-k must be >= 1");
  auto joined = join_by_sample(preds, samples, false);
  std::sort(joined.begin(), joined.end(), [](const Joined& a, const Joined& b) {
    if (a.abs_err != b.abs_err) return a.abs_err > b.abs_err;
    return a.sample->id < b.sample->id;
  });
  std::vector<WorstCase> out;
  for (std::size_t i = 0; i < std::min(k, joined.size()); ++i) {
    out.push_back({*joined[i].sample, *joined[i].pred, joined[i].abs_err});
  }
  return out;
}

std::string worst_cases_to_json(std::span<const WorstCase> cases, const ArtifactStamp& stamp) {
  ordered_json j;
  j["config_hash"] = stamp.config_hash;
  j["seed"] = stamp.seed;
  auto& arr = j["cases"] = ordered_json::array();
  for (const auto& c : cases) {
    ordered_json e;
    e["id"] = c.sample.id;
    e["abs_err"] = c.abs_err;
    e["score"] = c.prediction.score;
    e["gold_mean"] = c.sample.gold_mean;
    e["gold_std"] = c.sample.gold_std;
    e["homonym"] = c.sample.homonym;
    e["judged_meaning"] = c.sample.judged_meaning;
    e["precontext"] = c.sample.precontext;
    e["sentence"] = c.sample.sentence;
    e["ending"] = c.sample.ending ? ordered_json(*c.sample.ending) : ordered_json(nullptr);
    e["raw"] = c.prediction.raw_response ? ordered_json(*c.prediction.raw_response)
                                         : ordered_json(nullptr);
    arr.push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

EvalReport build_report(std::span<const Prediction> preds, std::span<const Sample> samples,
                        const std::string& system_id, const ReportOptions& opts) {
  const auto joined = join_by_sample(preds, samples, true);
  if (joined.empty()) throw ValidationError("cannot build a report over zero samples");

  std::vector<double> scores, golds;
  std::vector<metrics::ScoredPair> pairs;
  std::vector<Prediction> ordered;
  for (const auto& j : joined) {
    scores.push_back(j.pred->score);
    golds.push_back(j.sample->gold_mean);
    pairs.push_back({j.pred->score, j.sample->gold_mean, j.sample->gold_std});
    ordered.push_back(*j.pred);
  }

  EvalReport r;
  r.system_id = system_id;
  r.n = joined.size();
  try {
    r.spearman = metrics::spearman(scores, golds);
  } catch (const MetricError& e) {
    r.spearman_error = e.what();
  }
  r.accuracy = metrics::within_std_accuracy(pairs);
  r.mae = metrics::mae(pairs);
  r.buckets = bucketed_mae(ordered, samples, buckets_from_edges(opts.bucket_edges));
  r.disagreement = disagreement_split(ordered, samples, opts.disagreement_threshold);
  r.parse_failure_count = static_cast<std::size_t>(
      std::count_if(ordered.begin(), ordered.end(), [](const Prediction& p) { return p.flagged; }));
  return r;
}

std::string report_to_json(const EvalReport& r, const ArtifactStamp& stamp) {
  ordered_json j;
  j["system_id"] = r.system_id;
  j["config_hash"] = stamp.config_hash;
  j["seed"] = stamp.seed;
  j["n"] = r.n;
  j["spearman"] = optional_number(r.spearman);
  if (r.spearman_error) j["spearman_error"] = *r.spearman_error;
  j["accuracy"] = r.accuracy;
  j["mae"] = r.mae;
  auto& buckets = j["buckets"] = ordered_json::array();
  for (const auto& b : r.buckets) {
    buckets.push_back({{"label", b.label},
                       {"lo", b.lo},
                       {"hi", b.hi},
                       {"inclusive_hi", b.inclusive_hi},
                       {"mae", optional_number(b.mae)},
                       {"n", b.n}});
  }
  j["disagreement"] = {{"threshold", r.disagreement.threshold},
                       {"high_mae", optional_number(r.disagreement.high_mae)},
                       {"high_n", r.disagreement.high_n},
                       {"low_mae", optional_number(r.disagreement.low_mae)},
                       {"low_n", r.disagreement.low_n}};
  j["parse_failure_count"] = r.parse_failure_count;
  return j.dump(2) + "\n";
}

}  // namespace senserate::analysis

#include "senserate/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "senserate/error.hpp"

namespace senserate {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kStatTolerance = 1e-6;

std::string at_line(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

// Iterates non-blank lines, tracking 1-based line numbers.
template <typename F>
void for_each_line(const std::string& text, F&& fn) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    fn(number, line);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// SchemaMap

SchemaMap SchemaMap::canonical() {
  std::map<std::string, std::string> m;
  for (const char* f : kRequired) m[f] = f;
  for (const char* f : kOptional) m[f] = f;
  return SchemaMap(std::move(m));
}

SchemaMap::SchemaMap(std::map<std::string, std::string> fields, SigmaConvention sigma)
    : fields_(std::move(fields)), sigma_(sigma) {
  std::set<std::string> known;
  for (const char* f : kRequired) known.insert(f);
  for (const char* f : kOptional) known.insert(f);
  for (const auto& [canonical, source] : fields_) {
    if (!known.count(canonical)) {
      throw ValidationError("schema map: unknown canonical field '" + canonical + "'");
    }
    if (source.empty()) {
      throw ValidationError("schema map: empty source name for '" + canonical + "'");
    }
  }
  for (const char* f : kRequired) {
    if (!fields_.count(f)) {
      throw ValidationError(std::string("schema map: required field '") + f + "' is not mapped");
    }
  }
  std::set<std::string> targets;
  for (const auto& [canonical, source] : fields_) {
    if (!targets.insert(source).second) {
      throw ValidationError("schema map: source field '" + source + "' mapped twice");
    }
  }
}

SchemaMap SchemaMap::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("schema map: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("schema map: expected a JSON object");
  std::map<std::string, std::string> fields;
  SigmaConvention sigma = SigmaConvention::kPopulation;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_string()) {
      throw ValidationError("schema map: value for '" + key + "' must be a string");
    }
    if (key == "sigma_convention") {
      const auto v = value.get<std::string>();
      if (v == "population") {
        sigma = SigmaConvention::kPopulation;
      } else if (v == "sample") {
        sigma = SigmaConvention::kSample;
      } else {
        throw ValidationError("schema map: sigma_convention must be 'population' or 'sample'");
      }
      continue;
    }
    fields[key] = value.get<std::string>();
  }
  return SchemaMap(std::move(fields), sigma);
}

SchemaMap SchemaMap::from_json_file(const std::filesystem::path& path) {
  return from_json_text(read_file(path));
}

std::optional<std::string> SchemaMap::source_for(const std::string& canonical) const {
  auto it = fields_.find(canonical);
  if (it == fields_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Validation

double population_std(std::span<const int> ratings) {
  if (ratings.empty()) return 0.0;
  const double n = static_cast<double>(ratings.size());
  const double mean = std::accumulate(ratings.begin(), ratings.end(), 0.0) / n;
  double ss = 0.0;
  for (int r : ratings) ss += (r - mean) * (r - mean);
  return std::sqrt(ss / n);
}

double sample_std(std::span<const int> ratings) {
  if (ratings.size() < 2) return 0.0;
  const double n = static_cast<double>(ratings.size());
  const double mean = std::accumulate(ratings.begin(), ratings.end(), 0.0) / n;
  double ss = 0.0;
  for (int r : ratings) ss += (r - mean) * (r - mean);
  return std::sqrt(ss / (n - 1.0));
}

void validate_sample(const Sample& s) {
  auto fail = [&](const std::string& msg) {
    throw ValidationError("sample '" + s.id + "': " + msg);
  };
  if (s.id.empty()) throw ValidationError("sample with empty id");
  if (s.homonym.empty()) fail("homonym is empty");
  if (s.judged_meaning.empty()) fail("judged_meaning is empty");
  if (s.sentence.empty()) fail("sentence is empty");
  if (!std::isfinite(s.gold_mean) || s.gold_mean < 1.0 || s.gold_mean > 5.0) {
    fail("gold_mean " + std::to_string(s.gold_mean) + " outside [1, 5]");
  }
  if (!std::isfinite(s.gold_std) || s.gold_std < 0.0) {
    fail("gold_std " + std::to_string(s.gold_std) + " is negative");
  }
  if (s.ratings) {
    const auto& r = *s.ratings;
    if (r.size() < 5) fail("fewer than five ratings");
    for (int v : r) {
      if (v < 1 || v > 5) fail("rating " + std::to_string(v) + " outside [1, 5]");
    }
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
    if (std::abs(mean - s.gold_mean) > kStatTolerance) {
      fail("gold_mean does not match mean of ratings");
    }
    const double sd = s.sigma_convention == SigmaConvention::kPopulation ? population_std(r) : sample_std(r);
    if (std::abs(sd - s.gold_std) > kStatTolerance) {
      fail("gold_std does not match the standard deviation of ratings");
    }
  }
}

// ---------------------------------------------------------------------------
// Loading

namespace {

std::string string_field(const json& obj, const std::string& name, const std::string& where) {
  const auto& v = obj.at(name);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw ValidationError(where + "field '" + name + "' must be a string");
}

double number_field(const json& obj, const std::string& name, const std::string& where) {
  const auto& v = obj.at(name);
  if (!v.is_number()) throw ValidationError(where + "field '" + name + "' must be a number");
  return v.get<double>();
}

Sample sample_from_json(const json& obj, const SchemaMap& map, const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + "expected a JSON object");
  auto required = [&](const char* canonical) -> std::string {
    auto source = *map.source_for(canonical);
    if (!obj.contains(source) || obj.at(source).is_null()) {
      throw ValidationError(where + "missing field '" + source + "' (" + canonical + ")");
    }
    return source;
  };
  Sample s;
  s.id = string_field(obj, required("id"), where);
  s.homonym = string_field(obj, required("homonym"), where);
  s.judged_meaning = string_field(obj, required("judged_meaning"), where);
  s.precontext = string_field(obj, required("precontext"), where);
  s.sentence = string_field(obj, required("sentence"), where);
  s.gold_mean = number_field(obj, required("gold_mean"), where);
  s.gold_std = number_field(obj, required("gold_std"), where);

  if (auto src = map.source_for("ending"); src && obj.contains(*src) && !obj.at(*src).is_null()) {
    auto text = string_field(obj, *src, where);
    if (!std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) {
      s.ending = std::move(text);
    }
  }
  if (auto src = map.source_for("ratings"); src && obj.contains(*src) && !obj.at(*src).is_null()) {
    const auto& arr = obj.at(*src);
    if (!arr.is_array()) throw ValidationError(where + "field '" + *src + "' must be an array");
    std::vector<int> ratings;
    for (const auto& v : arr) {
      if (!v.is_number_integer()) {
        throw ValidationError(where + "field '" + *src + "' must contain integers");
      }
      ratings.push_back(v.get<int>());
    }
    s.ratings = std::move(ratings);
  }
  s.sigma_convention = map.sigma_convention();
  if (obj.contains("sigma_convention") && obj.at("sigma_convention").is_string()) {
    const auto c = obj.at("sigma_convention").get<std::string>();
    if (c == "sample") {
      s.sigma_convention = SigmaConvention::kSample;
    } else if (c == "population") {
      s.sigma_convention = SigmaConvention::kPopulation;
    } else {
      throw ValidationError(where + "sigma_convention must be population or sample");
    }
  }
  return s;
}

}  // namespace

std::vector<Sample> parse_samples(const std::string& jsonl, const SchemaMap& map,
                                  const std::string& source_name) {
  std::vector<Sample> out;
  std::set<std::string> seen;
  for_each_line(jsonl, [&](std::size_t number, const std::string& line) {
    const auto where = at_line(source_name, number);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError(where + "malformed JSON: " + e.what());
    }
    Sample s = sample_from_json(obj, map, where);
    try {
      validate_sample(s);
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
    if (!seen.insert(s.id).second) throw ValidationError(where + "duplicate id '" + s.id + "'");
    out.push_back(std::move(s));
  });
  return out;
}

std::vector<Sample> load_samples(const std::filesystem::path& path, const SchemaMap& map) {
  if (!std::filesystem::exists(path)) {
    throw ValidationError("data file not found: " + path.string());
  }
  return parse_samples(read_file(path), map, path.string());
}

std::string samples_to_jsonl(std::span<const Sample> samples,
                             const std::optional<ArtifactStamp>& stamp) {
  std::string out;
  for (const auto& s : samples) {
    ordered_json j;
    j["id"] = s.id;
    j["homonym"] = s.homonym;
    j["judged_meaning"] = s.judged_meaning;
    j["precontext"] = s.precontext;
    j["sentence"] = s.sentence;
    j["ending"] = s.ending ? ordered_json(*s.ending) : ordered_json(nullptr);
    j["gold_mean"] = s.gold_mean;
    j["gold_std"] = s.gold_std;
    if (s.ratings) j["ratings"] = *s.ratings;
    if (s.sigma_convention == SigmaConvention::kSample) j["sigma_convention"] = "sample";
    if (stamp) {
      j["config_hash"] = stamp->config_hash;
      j["seed"] = stamp->seed;
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_samples(const std::filesystem::path& path, std::span<const Sample> samples,
                   const std::optional<ArtifactStamp>& stamp) {
  write_file_atomic(path, samples_to_jsonl(samples, stamp));
}

// ---------------------------------------------------------------------------
// Splitting

std::uint64_t SplitMix64::next() noexcept {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t SplitMix64::below(std::uint64_t bound) noexcept {
  // Reject draws at or above the largest multiple of bound.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return x % bound;
}

double SplitMix64::unit() noexcept {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

TrainValSplit split_train_internal(std::span<const Sample> samples, double holdout_fraction,
                                   std::uint64_t seed) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 0.5)) {
    throw ValidationError("holdout fraction must lie in (0, 0.5), got " +
                          std::to_string(holdout_fraction));
  }
  if (samples.size() < 10) {
    throw ValidationError("need at least 10 samples to carve a validation split");
  }
  const std::size_t n = samples.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(order[i], order[rng.below(i + 1)]);
  }
  const auto n_val = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(n)));
  std::vector<bool> is_val(n, false);
  for (std::size_t k = 0; k < n_val; ++k) is_val[order[k]] = true;

  TrainValSplit split;
  split.train.reserve(n - n_val);
  split.validation.reserve(n_val);
  for (std::size_t i = 0; i < n; ++i) {
    (is_val[i] ? split.validation : split.train).push_back(samples[i]);
  }
  return split;
}

// ---------------------------------------------------------------------------
// Predictions

std::vector<Prediction> parse_predictions(const std::string& jsonl) {
  std::vector<Prediction> out;
  for_each_line(jsonl, [&](std::size_t number, const std::string& line) {
    const auto where = "predictions:" + std::to_string(number) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError(where + "malformed JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("score")) {
      throw ValidationError(where + "prediction needs 'id' and 'score'");
    }
    Prediction p;
    p.sample_id = string_field(j, "id", where);
    p.score = number_field(j, "score", where);
    if (!std::isfinite(p.score) || p.score < 1.0 || p.score > 5.0) {
      throw ValidationError(where + "score outside [1, 5]");
    }
    if (j.contains("system") && j["system"].is_string()) p.system_id = j["system"];
    if (j.contains("raw") && j["raw"].is_string()) p.raw_response = j["raw"].get<std::string>();
    if (j.contains("flagged") && j["flagged"].is_boolean()) p.flagged = j["flagged"];
    out.push_back(std::move(p));
  });
  return out;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ValidationError("predictions file not found: " + path.string());
  }
  return parse_predictions(read_file(path));
}

std::string predictions_to_jsonl(std::span<const Prediction> preds, const ArtifactStamp& stamp) {
  std::string out;
  for (const auto& p : preds) {
    ordered_json j;
    j["id"] = p.sample_id;
    j["score"] = p.score;
    j["system"] = p.system_id;
    j["raw"] = p.raw_response ? ordered_json(*p.raw_response) : ordered_json(nullptr);
    j["flagged"] = p.flagged;
    j["config_hash"] = stamp.config_hash;
    j["seed"] = stamp.seed;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_predictions(const std::filesystem::path& path, std::span<const Prediction> preds,
                       const ArtifactStamp& stamp) {
  write_file_atomic(path, predictions_to_jsonl(preds, stamp));
}

}  // namespace senserate

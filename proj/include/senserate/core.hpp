#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "senserate/io.hpp"

namespace senserate {

/// How `gold_std` was computed from the ratings: divide by n or by n - 1.
enum class SigmaConvention { kPopulation, kSample };

/// One narrative item with a candidate sense and its gold statistics.
///
/// `gold_std` is used as given; `sigma_convention` records how it relates to
/// `ratings`. All downstream code treats a Sample as an immutable value.
struct Sample {
  std::string id;
  std::string homonym;
  std::string judged_meaning;
  std::string precontext;
  std::string sentence;
  std::optional<std::string> ending;
  double gold_mean = 0.0;
  double gold_std = 0.0;
  std::optional<std::vector<int>> ratings;
  SigmaConvention sigma_convention = SigmaConvention::kPopulation;

  bool operator==(const Sample&) const = default;
};

/// One system's score for one sample.
struct Prediction {
  std::string sample_id;
  double score = 0.0;
  std::string system_id;
  std::optional<std::string> raw_response;
  /// Set when the score is a fallback (unparseable or failed response).
  bool flagged = false;

  bool operator==(const Prediction&) const = default;
};

/// Canonical field name -> source field name.
class SchemaMap {
 public:
  static constexpr const char* kRequired[] = {"id",       "homonym",   "judged_meaning",
                                              "precontext", "sentence", "gold_mean",
                                              "gold_std"};
  static constexpr const char* kOptional[] = {"ending", "ratings"};

  /// Identity mapping onto the canonical on-disk schema.
  static SchemaMap canonical();
  /// Reads a JSON object `{canonical: source, ...}`; the reserved key
  /// `"sigma_convention"` selects "population" (default) or "sample".
  static SchemaMap from_json_file(const std::filesystem::path& path);
  static SchemaMap from_json_text(const std::string& text);

  explicit SchemaMap(std::map<std::string, std::string> fields,
                     SigmaConvention sigma = SigmaConvention::kPopulation);

  /// Source name for a canonical field, or nullopt if the field is unmapped.
  std::optional<std::string> source_for(const std::string& canonical) const;
  SigmaConvention sigma_convention() const noexcept { return sigma_; }

 private:
  std::map<std::string, std::string> fields_;
  SigmaConvention sigma_;
};

/// Throws ValidationError describing the first violated invariant. Ratings
/// are checked against gold_std under the sample's own sigma convention.
void validate_sample(const Sample& s);

double population_std(std::span<const int> ratings);
double sample_std(std::span<const int> ratings);

/// Loads a JSONL file through `map`. Errors name the 1-based line number.
std::vector<Sample> load_samples(const std::filesystem::path& path, const SchemaMap& map);
std::vector<Sample> parse_samples(const std::string& jsonl, const SchemaMap& map,
                                  const std::string& source_name = "<memory>");

/// Canonical JSONL. A stamp, when given, adds config_hash/seed to each line;
/// loaders ignore those fields. A sample-convention sigma is written as
/// `"sigma_convention": "sample"` and read back on load.
std::string samples_to_jsonl(std::span<const Sample> samples,
                             const std::optional<ArtifactStamp>& stamp = std::nullopt);
void write_samples(const std::filesystem::path& path, std::span<const Sample> samples,
                   const std::optional<ArtifactStamp>& stamp = std::nullopt);

struct TrainValSplit {
  std::vector<Sample> train;
  std::vector<Sample> validation;
};

/// Seeded partition; validation size is round(fraction * n). Both parts keep
/// the input order.
TrainValSplit split_train_internal(std::span<const Sample> samples, double holdout_fraction,
                                   std::uint64_t seed);

std::vector<Prediction> load_predictions(const std::filesystem::path& path);
std::vector<Prediction> parse_predictions(const std::string& jsonl);
std::string predictions_to_jsonl(std::span<const Prediction> preds, const ArtifactStamp& stamp);
void write_predictions(const std::filesystem::path& path, std::span<const Prediction> preds,
                       const ArtifactStamp& stamp);

/// Portable seeded generator; results are identical across standard
/// libraries, unlike std::uniform_int_distribution.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
  std::uint64_t next() noexcept;
  /// Uniform integer in [0, bound), bound > 0, via rejection.
  std::uint64_t below(std::uint64_t bound) noexcept;
  /// Uniform double in [0, 1) with 53 random bits.
  double unit() noexcept;

 private:
  std::uint64_t state_;
};

}  // namespace senserate

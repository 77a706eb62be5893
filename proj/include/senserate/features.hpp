#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "senserate/core.hpp"

namespace senserate::features {

struct EmbeddingVector {
  std::string id;
  std::vector<double> values;
};

enum class Schema { kF8, kF23 };

std::string_view schema_name(Schema s) noexcept;  // "F8" / "F23"
Schema parse_schema(std::string_view text);        // accepts f8/F8/f23/F23
std::size_t schema_width(Schema s) noexcept;
/// Slot names in order; stable across versions.
std::span<const std::string_view> schema_slot_names(Schema s) noexcept;

struct FeatureVector {
  std::string sample_id;
  Schema schema = Schema::kF8;
  std::vector<double> values;

  bool operator==(const FeatureVector&) const = default;
};

struct SimilarityFeatures {
  double cosine;
  double euclidean;
  double manhattan;
  double dot;
};

/// Throws ValidationError on dimension mismatch or a zero-norm input.
SimilarityFeatures similarity_features(std::span<const double> a, std::span<const double> b);

/// Lowercased ASCII-alphanumeric runs; bytes >= 0x80 count as word bytes so
/// UTF-8 words stay intact.
std::vector<std::string> tokenize(std::string_view text);

struct LexicalOverlap {
  double word_overlap;  // |A ∩ B| over token sets
  double jaccard;       // |A ∩ B| / |A ∪ B|
  double char_overlap;  // Jaccard over lowercase character 3-gram sets
};

LexicalOverlap lexical_overlap(std::string_view story_text, std::string_view meaning_text);

struct StructuralFeatures {
  double sentence_count;     // runs of . ! ? count once
  double punctuation_count;  // characters in . , ; : ! ? ' " -
};

StructuralFeatures structural_features(std::string_view text);

/// Number of Unicode code points in a UTF-8 string.
std::size_t char_length(std::string_view utf8);

/// precontext + sentence (+ ending), single-space joined.
std::string story_text(const Sample& s);

/// Non-overlapping occurrences of the homonym's token sequence in the
/// target sentence.
std::size_t homonym_occurrences(const Sample& s);

FeatureVector assemble_f8(const Sample& s, const EmbeddingVector& story,
                          const EmbeddingVector& meaning);
FeatureVector assemble_f23(const Sample& s, const EmbeddingVector& story,
                           const EmbeddingVector& meaning);
FeatureVector assemble(Schema schema, const Sample& s, const EmbeddingVector& story,
                       const EmbeddingVector& meaning);

/// Embedding ids used per sample: "<id>:story" and "<id>:meaning".
std::string story_embedding_id(const Sample& s);
std::string meaning_embedding_id(const Sample& s);

std::string features_to_jsonl(std::span<const FeatureVector> rows, const ArtifactStamp& stamp);
std::vector<FeatureVector> parse_features(const std::string& jsonl);
std::vector<FeatureVector> load_features(const std::filesystem::path& path);

}  // namespace senserate::features

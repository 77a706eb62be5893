#include "senserate/features.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"
#include "senserate/error.hpp"
#include "senserate/simd/kernels.hpp"

namespace senserate::features {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, 8> kF8Slots = {
    "cosine",          "euclidean",          "dot",
    "story_chars_k",   "meaning_chars_k",    "ending_present",
    "cosine_x_ending", "cosine_x_story_chars_k",
};

constexpr std::array<std::string_view, 23> kF23Slots = {
    "cosine",
    "euclidean",
    "manhattan",
    "dot",
    "word_overlap",
    "jaccard",
    "char_overlap",
    "story_sentences",
    "story_punctuation",
    "sentence_sentences",
    "sentence_punctuation",
    "story_chars_k",
    "story_tokens_h",
    "meaning_chars_k",
    "meaning_tokens_h",
    "ending_present",
    "homonym_count",
    "cosine_x_jaccard",
    "cosine_x_ending",
    "dot_x_jaccard",
    "euclidean_x_ending",
    "cosine_x_story_tokens_h",
    "jaccard_x_meaning_tokens_h",
};

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

template <typename T>
double set_jaccard(const std::set<T>& a, const std::set<T>& b, std::size_t* inter_out = nullptr) {
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  if (inter_out) *inter_out = inter;
  const std::size_t uni = a.size() + b.size() - inter;
  if (uni == 0) return 1.0;  // both empty
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::set<std::string> char_trigrams(std::string_view text) {
  std::string lower(text);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::set<std::string> grams;
  if (lower.size() < 3) {
    if (!lower.empty()) grams.insert(lower);
    return grams;
  }
  for (std::size_t i = 0; i + 3 <= lower.size(); ++i) grams.insert(lower.substr(i, 3));
  return grams;
}

void require_keyed(const EmbeddingVector& e, const std::string& expected) {
  if (e.id != expected) {
    throw ValidationError("embedding '" + e.id + "' does not belong to '" + expected + "'");
  }
}

}  // namespace

std::string_view schema_name(Schema s) noexcept { return s == Schema::kF8 ? "F8" : "F23"; }

Schema parse_schema(std::string_view text) {
  if (text == "f8" || text == "F8") return Schema::kF8;
  if (text == "f23" || text == "F23") return Schema::kF23;
  throw ValidationError("unknown feature schema '" + std::string(text) + "' (expected f8 or f23)");
}

std::size_t schema_width(Schema s) noexcept { return s == Schema::kF8 ? 8 : 23; }

std::span<const std::string_view> schema_slot_names(Schema s) noexcept {
  if (s == Schema::kF8) return kF8Slots;
  return kF23Slots;
}

SimilarityFeatures similarity_features(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ValidationError("embedding dimensionality mismatch: " + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()));
  }
  if (a.empty()) throw ValidationError("empty embedding");
  const auto m = simd::moments(a, b);
  if (m.norm_a_sq == 0.0 || m.norm_b_sq == 0.0) {
    throw ValidationError("cosine undefined for a zero-norm embedding");
  }
  const double cosine = std::clamp(m.dot / std::sqrt(m.norm_a_sq * m.norm_b_sq), -1.0, 1.0);
  return {cosine, std::sqrt(m.dist_sq), m.dist_l1, m.dot};
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (is_word_byte(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

LexicalOverlap lexical_overlap(std::string_view story, std::string_view meaning) {
  if (story.empty() || meaning.empty()) throw ValidationError("lexical_overlap: empty text");
  const auto st = tokenize(story);
  const auto mt = tokenize(meaning);
  const std::set<std::string> a(st.begin(), st.end());
  const std::set<std::string> b(mt.begin(), mt.end());
  std::size_t inter = 0;
  const double jaccard = set_jaccard(a, b, &inter);
  const double chars = set_jaccard(char_trigrams(story), char_trigrams(meaning));
  return {static_cast<double>(inter), jaccard, chars};
}

StructuralFeatures structural_features(std::string_view text) {
  if (text.empty()) throw ValidationError("structural_features: empty text");
  static constexpr std::string_view kPunct = ".,;:!?'\"-";
  static constexpr std::string_view kTerminators = ".!?";
  std::size_t sentences = 0, punct = 0;
  bool in_run = false;
  for (char c : text) {
    if (kPunct.find(c) != std::string_view::npos) ++punct;
    const bool term = kTerminators.find(c) != std::string_view::npos;
    if (term && !in_run) ++sentences;
    in_run = term;
  }
  return {static_cast<double>(sentences), static_cast<double>(punct)};
}

std::size_t char_length(std::string_view utf8) {
  return static_cast<std::size_t>(std::count_if(utf8.begin(), utf8.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

std::string story_text(const Sample& s) {
  std::string out = s.precontext;
  auto append = [&out](const std::string& part) {
    if (part.empty()) return;
    if (!out.empty()) out += ' ';
    out += part;
  };
  append(s.sentence);
  if (s.ending) append(*s.ending);
  return out;
}

std::size_t homonym_occurrences(const Sample& s) {
  const auto needle = tokenize(s.homonym);
  const auto hay = tokenize(s.sentence);
  if (needle.empty() || hay.size() < needle.size()) return 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i + needle.size() <= hay.size();) {
    if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i))) {
      ++count;
      i += needle.size();
    } else {
      ++i;
    }
  }
  return count;
}

std::string story_embedding_id(const Sample& s) { return s.id + ":story"; }
std::string meaning_embedding_id(const Sample& s) { return s.id + ":meaning"; }

FeatureVector assemble_f8(const Sample& s, const EmbeddingVector& story,
                          const EmbeddingVector& meaning) {
  require_keyed(story, story_embedding_id(s));
  require_keyed(meaning, meaning_embedding_id(s));
  const auto sim = similarity_features(story.values, meaning.values);
  const auto text = story_text(s);
  const double story_k = static_cast<double>(char_length(text)) / 1000.0;
  const double meaning_k = static_cast<double>(char_length(s.judged_meaning)) / 1000.0;
  const double ending = s.ending ? 1.0 : 0.0;
  return {s.id,
          Schema::kF8,
          {sim.cosine, sim.euclidean, sim.dot, story_k, meaning_k, ending, sim.cosine * ending,
           sim.cosine * story_k}};
}

FeatureVector assemble_f23(const Sample& s, const EmbeddingVector& story,
                           const EmbeddingVector& meaning) {
  require_keyed(story, story_embedding_id(s));
  require_keyed(meaning, meaning_embedding_id(s));
  const auto sim = similarity_features(story.values, meaning.values);
  const auto text = story_text(s);
  const auto lex = lexical_overlap(text, s.judged_meaning);
  const auto story_struct = structural_features(text);
  const auto sentence_struct = structural_features(s.sentence);
  const double story_k = static_cast<double>(char_length(text)) / 1000.0;
  const double story_tok = static_cast<double>(tokenize(text).size()) / 100.0;
  const double meaning_k = static_cast<double>(char_length(s.judged_meaning)) / 1000.0;
  const double meaning_tok = static_cast<double>(tokenize(s.judged_meaning).size()) / 100.0;
  const double ending = s.ending ? 1.0 : 0.0;
  const double homonyms = static_cast<double>(homonym_occurrences(s));
  return {s.id,
          Schema::kF23,
          {
              sim.cosine,
              sim.euclidean,
              sim.manhattan,
              sim.dot,
              lex.word_overlap,
              lex.jaccard,
              lex.char_overlap,
              story_struct.sentence_count,
              story_struct.punctuation_count,
              sentence_struct.sentence_count,
              sentence_struct.punctuation_count,
              story_k,
              story_tok,
              meaning_k,
              meaning_tok,
              ending,
              homonyms,
              sim.cosine * lex.jaccard,
              sim.cosine * ending,
              sim.dot * lex.jaccard,
              sim.euclidean * ending,
              sim.cosine * story_tok,
              lex.jaccard * meaning_tok,
          }};
}

FeatureVector assemble(Schema schema, const Sample& s, const EmbeddingVector& story,
                       const EmbeddingVector& meaning) {
  return schema == Schema::kF8 ? assemble_f8(s, story, meaning) : assemble_f23(s, story, meaning);
}

std::string features_to_jsonl(std::span<const FeatureVector> rows, const ArtifactStamp& stamp) {
  std::string out;
  for (const auto& r : rows) {
    ordered_json j;
    j["id"] = r.sample_id;
    j["schema"] = schema_name(r.schema);
    j["values"] = r.values;
    j["config_hash"] = stamp.config_hash;
    j["seed"] = stamp.seed;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<FeatureVector> parse_features(const std::string& jsonl) {
  std::vector<FeatureVector> out;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = "features:" + std::to_string(number) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      FeatureVector fv;
      fv.sample_id = j.at("id").get<std::string>();
      fv.schema = parse_schema(j.at("schema").get<std::string>());
      fv.values = j.at("values").get<std::vector<double>>();
      if (fv.values.size() != schema_width(fv.schema)) {
        throw ValidationError(where + "expected " + std::to_string(schema_width(fv.schema)) +
                              " values");
      }
      if (!std::all_of(fv.values.begin(), fv.values.end(),
                       [](double v) { return std::isfinite(v); })) {
        throw ValidationError(where + "non-finite feature value");
      }
      out.push_back(std::move(fv));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(where + e.what());
    }
  }
  return out;
}

std::vector<FeatureVector> load_features(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ValidationError("features file not found: " + path.string());
  }
  return parse_features(read_file(path));
}

}  // namespace senserate::features

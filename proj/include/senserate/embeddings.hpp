#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "senserate/features.hpp"
#include "senserate/llm_client.hpp"

namespace senserate::features {

/// Precomputed vectors, JSONL `{"id": ..., "vector": [...]}`.
struct EmbeddingFile {
  std::filesystem::path path;
};

/// OpenAI-compatible `POST {base_url}/embeddings`.
struct EmbeddingEndpoint {
  llm::ProviderConfig provider;  // model names the embedding model
  std::size_t batch_size = 64;   // texts per request
};

using EmbeddingSource = std::variant<EmbeddingFile, EmbeddingEndpoint>;

/// `source` is either an http(s) URL or a file path.
EmbeddingSource parse_embedding_source(const std::string& source, const std::string& model = {});

struct TextItem {
  std::string id;
  std::string text;
};

/// One vector per item, in item order. A file source must cover every id;
/// dimensionality must be uniform.
std::vector<EmbeddingVector> acquire_embeddings(std::span<const TextItem> items,
                                                const EmbeddingSource& source);

/// Two items per sample: the story text and the judged meaning, keyed by
/// story_embedding_id / meaning_embedding_id.
std::vector<TextItem> embedding_items(std::span<const Sample> samples);

/// Embeds every sample and assembles one row per sample, in sample order.
std::vector<FeatureVector> featurize(std::span<const Sample> samples, Schema schema,
                                     const EmbeddingSource& source);

/// Reads every vector in an embeddings file.
std::vector<EmbeddingVector> load_embedding_file(const std::filesystem::path& path);

}  // namespace senserate::features

#include "senserate/embeddings.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "json.hpp"
#include "senserate/error.hpp"

namespace senserate::features {

using json = nlohmann::json;

EmbeddingSource parse_embedding_source(const std::string& source, const std::string& model) {
  if (source.rfind("http://", 0) == 0 || source.rfind("https://", 0) == 0) {
    EmbeddingEndpoint ep;
    ep.provider.base_url = source;
    ep.provider.model = model;
    return ep;
  }
  return EmbeddingFile{source};
}

namespace {

void check_vector(const EmbeddingVector& v, std::size_t expected_dim, const std::string& where) {
  if (v.values.empty()) throw ValidationError(where + "empty vector for '" + v.id + "'");
  if (expected_dim != 0 && v.values.size() != expected_dim) {
    throw ValidationError(where + "vector for '" + v.id + "' has dimension " +
                          std::to_string(v.values.size()) + ", expected " +
                          std::to_string(expected_dim));
  }
  if (!std::all_of(v.values.begin(), v.values.end(), [](double x) { return std::isfinite(x); })) {
    throw ValidationError(where + "non-finite value in vector for '" + v.id + "'");
  }
}

std::vector<EmbeddingVector> from_file(std::span<const TextItem> items, const EmbeddingFile& src) {
  const auto all = load_embedding_file(src.path);
  std::unordered_map<std::string, const EmbeddingVector*> by_id;
  for (const auto& v : all) by_id.emplace(v.id, &v);
  std::vector<EmbeddingVector> out;
  std::vector<std::string> missing;
  for (const auto& item : items) {
    auto it = by_id.find(item.id);
    if (it == by_id.end()) {
      missing.push_back(item.id);
    } else {
      out.push_back(*it->second);
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw ValidationError("embeddings file " + src.path.string() + " is missing ids: " + list);
  }
  return out;
}

std::vector<EmbeddingVector> from_endpoint(std::span<const TextItem> items,
                                           const EmbeddingEndpoint& src) {
  llm::validate(src.provider);
  const std::size_t batch = std::max<std::size_t>(1, src.batch_size);
  const std::size_t n_batches = (items.size() + batch - 1) / batch;
  std::vector<EmbeddingVector> out(items.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mu;
  std::exception_ptr first_error;

  auto work = [&] {
    for (;;) {
      {
        std::lock_guard lock(error_mu);
        if (first_error) return;
      }
      const std::size_t b = next.fetch_add(1);
      if (b >= n_batches) return;
      const std::size_t lo = b * batch;
      const std::size_t hi = std::min(items.size(), lo + batch);
      try {
        json body;
        body["model"] = src.provider.model;
        body["input"] = json::array();
        for (std::size_t i = lo; i < hi; ++i) body["input"].push_back(items[i].text);
        const auto raw = llm::post_json(src.provider, "/embeddings", body.dump());
        const auto j = json::parse(raw);
        const auto& data = j.at("data");
        if (!data.is_array() || data.size() != hi - lo) {
          throw TransportError("embeddings endpoint returned " + std::to_string(data.size()) +
                               " vectors for " + std::to_string(hi - lo) + " inputs");
        }
        for (std::size_t k = 0; k < data.size(); ++k) {
          // Pair by "index" when present, else by position in the reply.
          const std::size_t slot =
              data[k].contains("index") ? data[k]["index"].get<std::size_t>() : k;
          if (slot >= hi - lo) throw TransportError("embeddings reply index out of range");
          out[lo + slot] = {items[lo + slot].id, data[k].at("embedding").get<std::vector<double>>()};
        }
      } catch (const json::exception& e) {
        std::lock_guard lock(error_mu);
        if (!first_error) {
          first_error = std::make_exception_ptr(
              TransportError(std::string("malformed embeddings response: ") + e.what()));
        }
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  {
    const auto workers = std::max<std::size_t>(
        1, std::min<std::size_t>(static_cast<std::size_t>(src.provider.parallelism), n_batches));
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

}  // namespace

std::vector<EmbeddingVector> load_embedding_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ValidationError("embeddings file not found: " + path.string());
  }
  std::istringstream in(read_file(path));
  std::vector<EmbeddingVector> out;
  std::string line;
  std::size_t number = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(number) + ": ";
    EmbeddingVector v;
    try {
      const auto j = json::parse(line);
      v.id = j.at("id").get<std::string>();
      v.values = j.at("vector").get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw ValidationError(where + e.what());
    }
    check_vector(v, dim, where);
    dim = v.values.size();
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<EmbeddingVector> acquire_embeddings(std::span<const TextItem> items,
                                                const EmbeddingSource& source) {
  auto out = std::visit(
      [&](const auto& src) {
        using T = std::decay_t<decltype(src)>;
        if constexpr (std::is_same_v<T, EmbeddingFile>) {
          return from_file(items, src);
        } else {
          return from_endpoint(items, src);
        }
      },
      source);
  std::size_t dim = 0;
  for (const auto& v : out) {
    check_vector(v, dim, "embeddings: ");
    dim = v.values.size();
  }
  return out;
}

std::vector<TextItem> embedding_items(std::span<const Sample> samples) {
  std::vector<TextItem> items;
  items.reserve(2 * samples.size());
  for (const auto& s : samples) {
    items.push_back({story_embedding_id(s), story_text(s)});
    items.push_back({meaning_embedding_id(s), s.judged_meaning});
  }
  return items;
}

std::vector<FeatureVector> featurize(std::span<const Sample> samples, Schema schema,
                                     const EmbeddingSource& source) {
  const auto items = embedding_items(samples);
  const auto vectors = acquire_embeddings(items, source);
  std::vector<FeatureVector> rows;
  rows.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    rows.push_back(assemble(schema, samples[i], vectors[2 * i], vectors[2 * i + 1]));
  }
  return rows;
}

}  // namespace senserate::features

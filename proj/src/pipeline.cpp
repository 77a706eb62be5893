#include "senserate/pipeline.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <set>
#include <unordered_map>

#include "senserate/analysis.hpp"
#include "senserate/batch.hpp"
#include "senserate/embeddings.hpp"
#include "senserate/error.hpp"

namespace senserate::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::string config_hash(const json& config) {
  json stripped = config;
  if (stripped.is_object()) {
    for (const char* key : {"parallelism", "cache_dir", "output_dir"}) stripped.erase(key);
  }
  // nlohmann::json keeps object keys sorted, so dump() is canonical.
  return sha256_hex(stripped.dump());
}

llm::ProviderConfig provider_from_json(const json& j) {
  llm::ProviderConfig cfg;
  try {
    if (j.contains("base_url")) cfg.base_url = j.at("base_url").get<std::string>();
    if (j.contains("model")) cfg.model = j.at("model").get<std::string>();
    if (j.contains("temperature")) cfg.temperature = j.at("temperature").get<double>();
    if (j.contains("max_retries")) cfg.max_retries = j.at("max_retries").get<int>();
    if (j.contains("timeout_ms")) {
      cfg.timeout = std::chrono::milliseconds(j.at("timeout_ms").get<long>());
    }
    if (j.contains("parallelism")) cfg.parallelism = j.at("parallelism").get<int>();
    if (j.contains("api_key_env")) cfg.api_key_env = j.at("api_key_env").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("provider config: ") + e.what());
  }
  return cfg;
}

regress::LossConfig loss_from_json(const json& j, regress::LossConfig base) {
  try {
    if (j.contains("loss")) {
      const auto kind = j.at("loss").get<std::string>();
      if (kind == "mse") {
        base.reg_kind = regress::RegKind::kMse;
      } else if (kind == "huber") {
        base.reg_kind = regress::RegKind::kHuber;
      } else {
        throw ValidationError("loss must be mse or huber, got '" + kind + "'");
      }
    }
    if (j.contains("delta")) base.delta = j.at("delta").get<double>();
    if (j.contains("lambda_r")) base.lambda_r = j.at("lambda_r").get<double>();
    if (j.contains("lambda_u")) base.lambda_u = j.at("lambda_u").get<double>();
    if (j.contains("pair_cap")) base.pair_cap = j.at("pair_cap").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("loss config: ") + e.what());
  }
  regress::validate(base);
  return base;
}

RetrainResult retrain_protocol(std::span<const Sample> train, std::span<const Sample> dev,
                               std::span<const features::FeatureVector> rows, double holdout,
                               std::uint64_t seed, const regress::LossConfig& loss,
                               const regress::TrainOptions& opts, features::Schema schema) {
  if (train.empty() || dev.empty()) {
    throw ValidationError("retraining needs both a train and a dev split");
  }
  std::vector<Sample> pooled(train.begin(), train.end());
  pooled.insert(pooled.end(), dev.begin(), dev.end());
  const auto split = split_train_internal(pooled, holdout, seed);
  const auto tr = regress::make_batch(rows, split.train);
  const auto val = regress::make_batch(rows, split.validation);
  RetrainResult out;
  out.train_size = split.train.size();
  out.validation_size = split.validation.size();
  out.trained = regress::train_gd(tr, val, loss, opts, schema);
  return out;
}

namespace {

struct SystemEntry {
  std::string id;
  std::string kind;  // prompt | ridge | composite
  json raw;
};

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config key '") + key + "': " + e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

bool is_url(const std::string& s) {
  return s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0;
}

void require_exists(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw ValidationError(what + " not found: " + p.string());
}

std::vector<Sample> concat(std::span<const Sample> a, std::span<const Sample> b) {
  std::vector<Sample> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

void check_disjoint(const std::vector<std::pair<std::string, const std::vector<Sample>*>>& splits) {
  std::set<std::string> seen;
  for (const auto& [name, samples] : splits) {
    for (const auto& s : *samples) {
      if (!seen.insert(s.id).second) {
        throw ValidationError("sample id '" + s.id + "' appears in more than one split (" + name +
                              ")");
      }
    }
  }
}

class Writer {
 public:
  explicit Writer(fs::path root) : root_(std::move(root)) {}
  void put(const fs::path& rel, std::string_view content) {
    write_file_atomic(root_ / rel, content);
    files_.push_back(rel);
  }
  const fs::path& root() const { return root_; }
  std::vector<fs::path> files() const { return files_; }

 private:
  fs::path root_;
  std::vector<fs::path> files_;
};

std::unique_ptr<llm::ChatProvider> make_provider(const json& provider, const fs::path& base,
                                                 const llm::ProviderConfig& cfg) {
  const auto kind = get_or<std::string>(provider, "kind", "openai");
  if (kind == "mock") {
    const auto script = get_or<std::string>(provider, "script", "");
    if (script.empty()) throw ValidationError("mock provider needs a 'script' path");
    return std::make_unique<llm::MockProvider>(
        llm::MockProvider::parse_script(read_file(resolve(base, script))));
  }
  if (kind == "openai") return std::make_unique<llm::OpenAiChatProvider>(cfg);
  throw ValidationError("provider kind must be mock or openai, got '" + kind + "'");
}

}  // namespace

PipelineSummary run_pipeline(const fs::path& config_path, const Overrides& overrides,
                             std::ostream& log) {
  require_exists(config_path, "config file");
  json cfg;
  try {
    cfg = json::parse(read_file(config_path));
  } catch (const json::exception& e) {
    throw ValidationError(config_path.string() + ": " + e.what());
  }
  if (!cfg.is_object()) throw ValidationError(config_path.string() + ": expected a JSON object");
  if (overrides.seed) cfg["seed"] = *overrides.seed;
  const fs::path base = config_path.has_parent_path() ? config_path.parent_path() : fs::path(".");

  const ArtifactStamp stamp{config_hash(cfg), get_or<std::uint64_t>(cfg, "seed", 0)};

  // Execution-only settings; flags win over the file.
  const int parallelism = overrides.parallelism.value_or(get_or<int>(cfg, "parallelism", 1));
  const fs::path out_dir = overrides.output_dir.value_or(
      resolve(base, get_or<std::string>(cfg, "output_dir", "out")));
  fs::path cache_dir;
  if (overrides.cache_dir) {
    cache_dir = *overrides.cache_dir;
  } else if (const auto c = get_or<std::string>(cfg, "cache_dir", ""); !c.empty()) {
    cache_dir = resolve(base, c);
  }

  // Every referenced path is checked before any work starts.
  const json data = get_or<json>(cfg, "data", json::object());
  const auto train_path = get_or<std::string>(data, "train", "");
  const auto dev_path = get_or<std::string>(data, "dev", "");
  const auto test_path = get_or<std::string>(data, "test", "");
  if (train_path.empty() || test_path.empty()) {
    throw ValidationError("config needs data.train and data.test");
  }
  require_exists(resolve(base, train_path), "train data");
  if (!dev_path.empty()) require_exists(resolve(base, dev_path), "dev data");
  require_exists(resolve(base, test_path), "test data");
  const auto map_path = get_or<std::string>(cfg, "schema_map", "");
  if (!map_path.empty()) require_exists(resolve(base, map_path), "schema map");

  std::vector<SystemEntry> systems;
  for (const auto& s : get_or<json>(cfg, "systems", json::array())) {
    SystemEntry entry{get_or<std::string>(s, "id", ""), get_or<std::string>(s, "kind", ""), s};
    if (entry.id.empty()) throw ValidationError("every system needs an id");
    if (entry.kind != "prompt" && entry.kind != "ridge" && entry.kind != "composite") {
      throw ValidationError("system '" + entry.id + "': kind must be prompt, ridge or composite");
    }
    if (std::any_of(systems.begin(), systems.end(),
                    [&](const SystemEntry& o) { return o.id == entry.id; })) {
      throw ValidationError("duplicate system id '" + entry.id + "'");
    }
    systems.push_back(std::move(entry));
  }
  if (systems.empty()) throw ValidationError("config lists no systems");

  const bool needs_features = std::any_of(systems.begin(), systems.end(),
                                          [](const SystemEntry& s) { return s.kind != "prompt"; });
  features::EmbeddingSource embedding_source;
  if (needs_features) {
    const json emb = get_or<json>(cfg, "embeddings", json());
    std::string where;
    std::string model;
    if (emb.is_string()) {
      where = emb.get<std::string>();
    } else if (emb.is_object()) {
      where = get_or<std::string>(emb, "source", "");
      model = get_or<std::string>(emb, "model", "");
    }
    if (where.empty()) throw ValidationError("feature systems need an 'embeddings' source");
    if (is_url(where)) {
      embedding_source = features::parse_embedding_source(where, model);
      auto& ep = std::get<features::EmbeddingEndpoint>(embedding_source);
      ep.provider.parallelism = parallelism;
      if (emb.is_object()) ep.batch_size = get_or<std::size_t>(emb, "batch_size", ep.batch_size);
    } else {
      const auto p = resolve(base, where);
      require_exists(p, "embeddings file");
      embedding_source = features::EmbeddingFile{p};
    }
  }

  const json provider_json = get_or<json>(cfg, "provider", json::object());
  const bool has_prompt = std::any_of(systems.begin(), systems.end(),
                                      [](const SystemEntry& s) { return s.kind == "prompt"; });
  if (has_prompt && get_or<std::string>(provider_json, "kind", "openai") == "mock") {
    require_exists(resolve(base, get_or<std::string>(provider_json, "script", "")),
                   "mock script");
  }

  const SchemaMap map =
      map_path.empty() ? SchemaMap::canonical() : SchemaMap::from_json_file(resolve(base, map_path));
  const auto train = load_samples(resolve(base, train_path), map);
  const auto dev = dev_path.empty() ? std::vector<Sample>{} : load_samples(resolve(base, dev_path), map);
  const auto test = load_samples(resolve(base, test_path), map);
  check_disjoint({{"train", &train}, {"dev", &dev}, {"test", &test}});
  log << "loaded " << train.size() << " train, " << dev.size() << " dev, " << test.size()
      << " test samples\n";

  Writer out(out_dir);
  out.put("ingested/train.jsonl", samples_to_jsonl(train, stamp));
  if (!dev.empty()) out.put("ingested/dev.jsonl", samples_to_jsonl(dev, stamp));
  out.put("ingested/test.jsonl", samples_to_jsonl(test, stamp));

  const json analysis_cfg = get_or<json>(cfg, "analysis", json::object());
  analysis::ReportOptions report_opts;
  if (analysis_cfg.contains("bucket_edges")) {
    report_opts.bucket_edges = get_or<std::vector<double>>(analysis_cfg, "bucket_edges", {});
  }
  report_opts.disagreement_threshold =
      get_or<double>(analysis_cfg, "disagreement_threshold", report_opts.disagreement_threshold);
  const auto top_k = get_or<std::size_t>(analysis_cfg, "top_k", 10);
  const auto bin_width = get_or<double>(analysis_cfg, "bin_width", 0.25);

  const json training = get_or<json>(cfg, "training", json::object());
  regress::TrainOptions train_opts;
  train_opts.learning_rate = get_or<double>(training, "learning_rate", train_opts.learning_rate);
  train_opts.max_epochs = get_or<std::size_t>(training, "max_epochs", train_opts.max_epochs);
  train_opts.patience = get_or<std::size_t>(training, "patience", train_opts.patience);
  train_opts.standardize = get_or<bool>(training, "standardize", true);
  const double holdout = get_or<double>(training, "holdout", 0.15);

  // Feature rows per schema, computed once over every split.
  const auto all_samples = concat(concat(train, dev), test);
  std::map<features::Schema, std::vector<features::FeatureVector>> rows_by_schema;
  auto rows_for = [&](features::Schema schema) -> const std::vector<features::FeatureVector>& {
    auto it = rows_by_schema.find(schema);
    if (it != rows_by_schema.end()) return it->second;
    auto rows = features::featurize(all_samples, schema, embedding_source);
    const std::string dir = "features/" + std::string(features::schema_name(schema)) + "/";
    const auto n_train = train.size();
    const auto n_dev = dev.size();
    std::span<const features::FeatureVector> all(rows);
    out.put(dir + "train.jsonl", features::features_to_jsonl(all.subspan(0, n_train), stamp));
    if (n_dev > 0) {
      out.put(dir + "dev.jsonl", features::features_to_jsonl(all.subspan(n_train, n_dev), stamp));
    }
    out.put(dir + "test.jsonl",
            features::features_to_jsonl(all.subspan(n_train + n_dev), stamp));
    return rows_by_schema.emplace(schema, std::move(rows)).first->second;
  };

  json summary_systems = json::array();
  PipelineSummary summary;
  summary.output_dir = out_dir;

  for (const auto& sys : systems) {
    log << "system " << sys.id << " (" << sys.kind << ")\n";
    const fs::path dir = fs::path("systems") / sys.id;
    std::vector<Prediction> preds;

    if (sys.kind == "prompt") {
      auto pcfg = provider_from_json(provider_json);
      pcfg.parallelism = parallelism;
      if (sys.raw.contains("model")) pcfg.model = get_or<std::string>(sys.raw, "model", "");
      auto provider = make_provider(provider_json, base, pcfg);

      llm::BatchOptions opts;
      opts.strategy = prompting::parse_strategy(get_or<std::string>(sys.raw, "strategy", "p2"));
      opts.parse_mode = prompting::parse_parse_mode(get_or<std::string>(sys.raw, "parse", "lenient"));
      const auto layout = get_or<std::string>(sys.raw, "layout", "turns");
      if (layout == "turns") {
        opts.layout = llm::MessageLayout::kTurns;
      } else if (layout == "single") {
        opts.layout = llm::MessageLayout::kSingleMessage;
      } else {
        throw ValidationError("system '" + sys.id + "': layout must be turns or single");
      }
      opts.provider = pcfg;
      opts.cache_dir = cache_dir;
      opts.system_id = sys.id;
      std::vector<std::string> shot_warnings;
      if (opts.strategy == prompting::Strategy::kP1) {
        auto sel = prompting::select_fewshot(train);
        opts.shots = std::move(sel.shots);
        shot_warnings = std::move(sel.warnings);
        for (const auto& w : shot_warnings) log << "warning: " << w << "\n";
      }
      auto result = llm::run_batch(test, opts, *provider);
      result.log.warnings.insert(result.log.warnings.begin(), shot_warnings.begin(),
                                 shot_warnings.end());
      for (const auto& w : result.log.cache_warnings) log << "warning: " << w << "\n";
      log << "  " << result.log.provider_calls << " provider calls, " << result.log.cache_hits
          << " cache hits, " << result.log.parse_failures << " parse failures\n";
      out.put(dir / "run_log.json", llm::run_log_to_json(result.log, stamp, false));
      preds = std::move(result.predictions);
    } else {
      const auto schema = features::parse_schema(get_or<std::string>(sys.raw, "schema", "f8"));
      const auto& rows = rows_for(schema);
      regress::LinearModel model;
      if (sys.kind == "ridge") {
        const auto pooled = concat(train, dev);
        model = regress::ridge_fit(regress::make_batch(rows, pooled),
                                   get_or<double>(sys.raw, "alpha", 1.0), schema);
        out.put(dir / "model.json", regress::model_to_json(model, stamp, "ridge"));
      } else {
        auto loss = loss_from_json(get_or<json>(cfg, "loss", json::object()));
        loss = loss_from_json(get_or<json>(sys.raw, "loss", json::object()), loss);
        loss.seed = stamp.seed;
        regress::TrainResult trained;
        if (dev.empty()) {
          const auto split = split_train_internal(train, holdout, stamp.seed);
          trained = regress::train_gd(regress::make_batch(rows, split.train),
                                      regress::make_batch(rows, split.validation), loss,
                                      train_opts, schema);
          log << "  internal split " << split.train.size() << "/" << split.validation.size()
              << "\n";
        } else {
          const auto r = retrain_protocol(train, dev, rows, holdout, stamp.seed, loss, train_opts,
                                          schema);
          log << "  internal split " << r.train_size << "/" << r.validation_size << "\n";
          trained = r.trained;
        }
        log << "  stopped after " << trained.report.epochs_run << " epochs (best "
            << trained.report.best_epoch << ")\n";
        model = trained.model;
        out.put(dir / "model.json", regress::model_to_json(model, stamp, "composite"));
        out.put(dir / "train_report.json", regress::train_report_to_json(trained.report, stamp));
      }
      std::unordered_map<std::string, const features::FeatureVector*> by_id;
      for (const auto& r : rows) by_id.emplace(r.sample_id, &r);
      for (const auto& s : test) {
        preds.push_back({s.id, regress::predict(model, *by_id.at(s.id)), sys.id, std::nullopt,
                         false});
      }
    }

    out.put(dir / "predictions.jsonl", predictions_to_jsonl(preds, stamp));
    const auto report = analysis::build_report(preds, test, sys.id, report_opts);
    out.put(dir / "report.json", analysis::report_to_json(report, stamp));
    out.put(dir / "distributions.csv",
            analysis::distributions_csv(analysis::distributions(preds, test, bin_width), stamp));
    out.put(dir / "worst_cases.json",
            analysis::worst_cases_to_json(analysis::worst_cases(preds, test, top_k), stamp));

    json entry;
    entry["id"] = sys.id;
    entry["kind"] = sys.kind;
    entry["spearman"] = report.spearman ? json(*report.spearman) : json(nullptr);
    entry["accuracy"] = report.accuracy;
    entry["mae"] = report.mae;
    entry["parse_failures"] = report.parse_failure_count;
    summary_systems.push_back(std::move(entry));
    summary.systems.push_back(sys.id);
  }

  json files = json::array();
  for (const auto& f : out.files()) files.push_back(f.generic_string());
  nlohmann::ordered_json sj;
  sj["config_hash"] = stamp.config_hash;
  sj["seed"] = stamp.seed;
  sj["systems"] = summary_systems;
  sj["files"] = files;
  out.put("summary.json", sj.dump(2) + "\n");

  summary.files = out.files();
  return summary;
}

}  // namespace senserate::pipeline

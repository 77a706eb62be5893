#include "senserate/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <memory>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "CLI11.hpp"
#include "json.hpp"
#include "senserate/analysis.hpp"
#include "senserate/batch.hpp"
#include "senserate/core.hpp"
#include "senserate/embeddings.hpp"
#include "senserate/error.hpp"
#include "senserate/features.hpp"
#include "senserate/llm_client.hpp"
#include "senserate/pipeline.hpp"
#include "senserate/prompting.hpp"
#include "senserate/regress.hpp"
#include "senserate/simd/kernels.hpp"

#ifndef SENSERATE_VERSION
#define SENSERATE_VERSION "dev"
#endif

namespace senserate::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string build_info() {
  std::string avail;
  for (const auto* k : simd::available_kernels()) {
    avail += (avail.empty() ? "" : ", ") + std::string(k->name);
  }
  return std::string("senserate ") + SENSERATE_VERSION + "\nkernels: " +
         std::string(simd::active_kernels().name) + " (available: " + avail + ")";
}

namespace {

// Content-relevant options of one invocation; execution-only settings
// (parallelism, cache and output locations) are left out.
ArtifactStamp stamp_of(const std::string& command, json options, std::uint64_t seed) {
  options["command"] = command;
  options["seed"] = seed;
  return {pipeline::config_hash(options), seed};
}

void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path == "-") {
    out << content;
  } else {
    write_file_atomic(path, content);
  }
}

SchemaMap schema_map_from(const std::string& path) {
  if (path.empty()) return SchemaMap::canonical();
  if (!fs::exists(path)) throw ValidationError("schema map not found: " + path);
  return SchemaMap::from_json_file(path);
}

std::vector<Sample> load_data(const std::string& path, const SchemaMap& map) {
  if (!fs::exists(path)) throw ValidationError("data file not found: " + path);
  return load_samples(path, map);
}

struct DataArgs {
  std::string data;
  std::string schema_map;
};

void add_data_options(CLI::App* sub, DataArgs& d, bool required = true) {
  auto* opt = sub->add_option("--data", d.data, "Dataset JSONL");
  if (required) opt->required();
  sub->add_option("--schema-map", d.schema_map, "JSON map from canonical to source field names");
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  DataArgs d;
  std::string out;
  std::uint64_t seed = 0;
};

int cmd_ingest(const IngestArgs& a, std::ostream& out, std::ostream& err) {
  const auto map = schema_map_from(a.d.schema_map);
  const auto samples = load_data(a.d.data, map);
  const auto stamp =
      stamp_of("ingest", {{"data", a.d.data}, {"schema_map", a.d.schema_map}}, a.seed);
  emit(a.out, samples_to_jsonl(samples, stamp), out);
  err << "ingested " << samples.size() << " samples\n";
  return 0;
}

struct FeaturizeArgs {
  DataArgs d;
  std::string schema = "f8";
  std::string embeddings;
  std::string embedding_model;
  std::size_t batch_size = 64;
  int parallelism = 1;
  std::string out;
  std::uint64_t seed = 0;
};

int cmd_featurize(const FeaturizeArgs& a, std::ostream& out, std::ostream& err) {
  const auto map = schema_map_from(a.d.schema_map);
  const auto samples = load_data(a.d.data, map);
  const auto schema = features::parse_schema(a.schema);
  auto source = features::parse_embedding_source(a.embeddings, a.embedding_model);
  if (auto* ep = std::get_if<features::EmbeddingEndpoint>(&source)) {
    ep->batch_size = a.batch_size;
    ep->provider.parallelism = a.parallelism;
  } else if (!fs::exists(a.embeddings)) {
    throw ValidationError("embeddings file not found: " + a.embeddings);
  }
  const auto rows = features::featurize(samples, schema, source);
  const auto stamp = stamp_of("featurize",
                              {{"data", a.d.data},
                               {"schema_map", a.d.schema_map},
                               {"schema", features::schema_name(schema)},
                               {"embeddings", a.embeddings},
                               {"embedding_model", a.embedding_model}},
                              a.seed);
  emit(a.out, features::features_to_jsonl(rows, stamp), out);
  err << "wrote " << rows.size() << " " << features::schema_name(schema) << " rows\n";
  return 0;
}

struct TrainArgs {
  DataArgs d;
  std::string dev;
  std::vector<std::string> features;
  std::string schema = "f8";
  std::string method = "composite";
  std::string loss = "mse";
  double delta = 1.0;
  double lambda_r = 0.25;
  double lambda_u = 0.5;
  std::size_t pair_cap = 256;
  double alpha = 1.0;
  double holdout = 0.15;
  double lr = 0.1;
  std::size_t max_epochs = 500;
  std::size_t patience = 3;
  bool raw_features = false;
  std::uint64_t seed = 0;
  std::string out;
  std::string report;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const auto map = schema_map_from(a.d.schema_map);
  const auto train = load_data(a.d.data, map);
  const auto dev = a.dev.empty() ? std::vector<Sample>{} : load_data(a.dev, map);
  const auto schema = features::parse_schema(a.schema);
  std::vector<features::FeatureVector> rows;
  for (const auto& f : a.features) {
    if (!fs::exists(f)) throw ValidationError("features file not found: " + f);
    auto part = features::load_features(f);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  for (const auto& r : rows) {
    if (r.schema != schema) {
      throw ValidationError("feature row '" + r.sample_id + "' uses schema " +
                            std::string(features::schema_name(r.schema)) + ", expected " +
                            std::string(features::schema_name(schema)));
    }
  }

  json opts = {{"data", a.d.data},     {"dev", a.dev},       {"schema_map", a.d.schema_map},
               {"features", a.features}, {"schema", a.schema}, {"method", a.method}};
  regress::LinearModel model;
  std::optional<regress::TrainReport> report;
  if (a.method == "ridge") {
    opts["alpha"] = a.alpha;
    std::vector<Sample> pooled = train;
    pooled.insert(pooled.end(), dev.begin(), dev.end());
    model = regress::ridge_fit(regress::make_batch(rows, pooled), a.alpha, schema);
  } else if (a.method == "composite") {
    regress::LossConfig loss;
    loss = pipeline::loss_from_json({{"loss", a.loss},
                                     {"delta", a.delta},
                                     {"lambda_r", a.lambda_r},
                                     {"lambda_u", a.lambda_u},
                                     {"pair_cap", a.pair_cap}});
    loss.seed = a.seed;
    regress::TrainOptions topts{a.lr, a.max_epochs, a.patience, !a.raw_features};
    opts.update(json{{"loss", a.loss},
                     {"delta", a.delta},
                     {"lambda_r", a.lambda_r},
                     {"lambda_u", a.lambda_u},
                     {"pair_cap", a.pair_cap},
                     {"holdout", a.holdout},
                     {"learning_rate", a.lr},
                     {"max_epochs", a.max_epochs},
                     {"patience", a.patience},
                     {"standardize", !a.raw_features}});
    regress::TrainResult trained;
    if (dev.empty()) {
      const auto split = split_train_internal(train, a.holdout, a.seed);
      trained = regress::train_gd(regress::make_batch(rows, split.train),
                                  regress::make_batch(rows, split.validation), loss, topts, schema);
      err << "internal split " << split.train.size() << "/" << split.validation.size() << "\n";
    } else {
      const auto r =
          pipeline::retrain_protocol(train, dev, rows, a.holdout, a.seed, loss, topts, schema);
      err << "internal split " << r.train_size << "/" << r.validation_size << "\n";
      trained = r.trained;
    }
    err << "epochs " << trained.report.epochs_run << ", best " << trained.report.best_epoch
        << "\n";
    model = trained.model;
    report = trained.report;
  } else {
    throw ValidationError("--method must be ridge or composite, got '" + a.method + "'");
  }
  const auto stamp = stamp_of("train", opts, a.seed);
  emit(a.out, regress::model_to_json(model, stamp, a.method), out);
  if (report && !a.report.empty()) {
    emit(a.report, regress::train_report_to_json(*report, stamp), out);
  }
  return 0;
}

struct PredictArgs {
  std::string model;
  std::string features;
  std::string system_id = "model";
  std::string out = "-";
  std::uint64_t seed = 0;
};

int cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream&) {
  if (!fs::exists(a.model)) throw ValidationError("model file not found: " + a.model);
  if (!fs::exists(a.features)) throw ValidationError("features file not found: " + a.features);
  const auto model = regress::load_model(a.model);
  const auto rows = features::load_features(a.features);
  std::vector<Prediction> preds;
  preds.reserve(rows.size());
  for (const auto& r : rows) {
    preds.push_back({r.sample_id, regress::predict(model, r), a.system_id, std::nullopt, false});
  }
  const auto stamp = stamp_of(
      "predict", {{"model", a.model}, {"features", a.features}, {"system", a.system_id}}, a.seed);
  emit(a.out, predictions_to_jsonl(preds, stamp), out);
  return 0;
}

struct PromptRenderArgs {
  DataArgs d;
  std::string train;
  std::string strategy = "p2";
  std::string sample_id;
  std::string out = "-";
};

std::vector<Sample> resolve_shots(prompting::Strategy strategy, const std::string& train_path,
                                  const std::vector<Sample>& fallback_pool, const SchemaMap& map,
                                  std::vector<std::string>* warnings) {
  if (strategy != prompting::Strategy::kP1) return {};
  const auto pool = train_path.empty() ? fallback_pool : load_data(train_path, map);
  auto sel = prompting::select_fewshot(pool);
  if (warnings) *warnings = std::move(sel.warnings);
  return sel.shots;
}

int cmd_prompt_render(const PromptRenderArgs& a, std::ostream& out, std::ostream& err) {
  const auto map = schema_map_from(a.d.schema_map);
  const auto samples = load_data(a.d.data, map);
  const auto strategy = prompting::parse_strategy(a.strategy);
  auto it = std::find_if(samples.begin(), samples.end(),
                         [&](const Sample& s) { return s.id == a.sample_id; });
  if (it == samples.end()) throw ValidationError("no sample with id '" + a.sample_id + "'");
  std::vector<std::string> warnings;
  const auto shots = resolve_shots(strategy, a.train, samples, map, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  const auto bundle = strategy == prompting::Strategy::kP1 ? prompting::build_p1(*it, shots)
                                                           : prompting::build_p2(*it);
  emit(a.out, prompting::transcript(bundle), out);
  return 0;
}

struct PromptRunArgs {
  DataArgs d;
  std::string train;
  std::string strategy = "p2";
  std::string model;
  std::string base_url = "https://api.openai.com/v1";
  double temperature = 0.0;
  int parallelism = 1;
  int max_retries = 4;
  long timeout_ms = 60'000;
  std::string api_key_env = "OPENAI_API_KEY";
  std::string cache_dir;
  std::string parse = "lenient";
  std::string layout = "turns";
  std::string mock_script;
  std::string system_id;
  std::string out;
  std::string run_log;
  std::uint64_t seed = 0;
};

int cmd_prompt_run(const PromptRunArgs& a, std::ostream& out, std::ostream& err) {
  const auto map = schema_map_from(a.d.schema_map);
  const auto samples = load_data(a.d.data, map);

  llm::BatchOptions opts;
  opts.strategy = prompting::parse_strategy(a.strategy);
  opts.parse_mode = prompting::parse_parse_mode(a.parse);
  if (a.layout == "turns") {
    opts.layout = llm::MessageLayout::kTurns;
  } else if (a.layout == "single") {
    opts.layout = llm::MessageLayout::kSingleMessage;
  } else {
    throw ValidationError("--layout must be turns or single");
  }
  opts.provider.base_url = a.base_url;
  opts.provider.model = a.model;
  opts.provider.temperature = a.temperature;
  opts.provider.parallelism = a.parallelism;
  opts.provider.max_retries = a.max_retries;
  opts.provider.timeout = std::chrono::milliseconds(a.timeout_ms);
  opts.provider.api_key_env = a.api_key_env;
  opts.cache_dir = a.cache_dir;
  opts.system_id = a.system_id.empty() ? std::string(prompting::strategy_name(opts.strategy))
                                       : a.system_id;
  std::vector<std::string> shot_warnings;
  opts.shots = resolve_shots(opts.strategy, a.train, samples, map, &shot_warnings);
  for (const auto& w : shot_warnings) err << "warning: " << w << "\n";

  std::unique_ptr<llm::ChatProvider> provider;
  if (!a.mock_script.empty()) {
    if (!fs::exists(a.mock_script)) throw ValidationError("mock script not found: " + a.mock_script);
    provider = std::make_unique<llm::MockProvider>(
        llm::MockProvider::parse_script(read_file(a.mock_script)));
  } else {
    if (a.model.empty()) throw ValidationError("--model is required without --mock-script");
    provider = std::make_unique<llm::OpenAiChatProvider>(opts.provider);
  }

  const auto stamp = stamp_of("prompt-run",
                              {{"data", a.d.data},
                               {"schema_map", a.d.schema_map},
                               {"train", a.train},
                               {"strategy", a.strategy},
                               {"model", a.model},
                               {"base_url", a.base_url},
                               {"temperature", a.temperature},
                               {"parse", a.parse},
                               {"layout", a.layout},
                               {"mock_script", a.mock_script},
                               {"system", opts.system_id}},
                              a.seed);

  auto report_log = [&](llm::RunLog log) {
    log.warnings.insert(log.warnings.begin(), shot_warnings.begin(), shot_warnings.end());
    for (const auto& w : log.warnings) err << "warning: " << w << "\n";
    for (const auto& w : log.cache_warnings) err << "warning: " << w << "\n";
    err << log.provider_calls << " provider calls, " << log.cache_hits << " cache hits, "
        << log.parse_failures << " parse failures, " << log.transport_failures
        << " transport failures\n";
    if (!a.run_log.empty()) write_file_atomic(a.run_log, llm::run_log_to_json(log, stamp));
  };
  try {
    auto result = llm::run_batch(samples, opts, *provider);
    report_log(result.log);
    emit(a.out, predictions_to_jsonl(result.predictions, stamp), out);
  } catch (const llm::BatchAborted& e) {
    report_log(e.partial().log);
    throw;
  }
  return 0;
}

struct EvaluateArgs {
  DataArgs d;
  std::string preds;
  std::string system_id;
  std::string buckets;
  double disagreement_threshold = 1.0;
  std::string out = "-";
  std::uint64_t seed = 0;
};

std::string system_of(const std::vector<Prediction>& preds, const std::string& requested) {
  if (!requested.empty()) return requested;
  std::string id;
  for (const auto& p : preds) {
    if (id.empty()) {
      id = p.system_id;
    } else if (p.system_id != id) {
      throw ValidationError("predictions mix systems '" + id + "' and '" + p.system_id +
                            "'; pass --system-id");
    }
  }
  return id;
}

analysis::ReportOptions report_options(const std::string& buckets, double threshold) {
  analysis::ReportOptions opts;
  if (!buckets.empty()) opts.bucket_edges = analysis::parse_bucket_edges(buckets);
  opts.disagreement_threshold = threshold;
  return opts;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream&) {
  const auto map = schema_map_from(a.d.schema_map);
  const auto samples = load_data(a.d.data, map);
  if (!fs::exists(a.preds)) throw ValidationError("predictions file not found: " + a.preds);
  const auto preds = load_predictions(a.preds);
  const auto system = system_of(preds, a.system_id);
  const auto report = analysis::build_report(
      preds, samples, system, report_options(a.buckets, a.disagreement_threshold));
  const auto stamp = stamp_of("evaluate",
                              {{"data", a.d.data},
                               {"schema_map", a.d.schema_map},
                               {"preds", a.preds},
                               {"system", system},
                               {"buckets", a.buckets},
                               {"disagreement_threshold", a.disagreement_threshold}},
                              a.seed);
  emit(a.out, analysis::report_to_json(report, stamp), out);
  return 0;
}

struct AnalyzeArgs {
  EvaluateArgs e;
  std::size_t top_k = 10;
  double bin_width = 0.25;
  std::string dist_out;
  std::string worst_out;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream&) {
  const auto map = schema_map_from(a.e.d.schema_map);
  const auto samples = load_data(a.e.d.data, map);
  if (!fs::exists(a.e.preds)) throw ValidationError("predictions file not found: " + a.e.preds);
  const auto preds = load_predictions(a.e.preds);
  const auto system = system_of(preds, a.e.system_id);
  const auto report = analysis::build_report(
      preds, samples, system, report_options(a.e.buckets, a.e.disagreement_threshold));
  const auto stamp = stamp_of("analyze",
                              {{"data", a.e.d.data},
                               {"schema_map", a.e.d.schema_map},
                               {"preds", a.e.preds},
                               {"system", system},
                               {"buckets", a.e.buckets},
                               {"disagreement_threshold", a.e.disagreement_threshold},
                               {"top_k", a.top_k},
                               {"bin_width", a.bin_width}},
                              a.e.seed);
  if (!a.dist_out.empty()) {
    emit(a.dist_out,
         analysis::distributions_csv(analysis::distributions(preds, samples, a.bin_width), stamp),
         out);
  }
  if (!a.worst_out.empty()) {
    emit(a.worst_out,
         analysis::worst_cases_to_json(analysis::worst_cases(preds, samples, a.top_k), stamp),
         out);
  }
  emit(a.e.out, analysis::report_to_json(report, stamp), out);
  return 0;
}

struct PipelineArgs {
  std::string config;
  std::optional<int> parallelism;
  std::optional<std::string> output_dir;
  std::optional<std::string> cache_dir;
  std::optional<std::uint64_t> seed;
};

int cmd_pipeline(const PipelineArgs& a, std::ostream& out, std::ostream& err) {
  pipeline::Overrides o;
  o.parallelism = a.parallelism;
  if (a.output_dir) o.output_dir = fs::path(*a.output_dir);
  if (a.cache_dir) o.cache_dir = fs::path(*a.cache_dir);
  o.seed = a.seed;
  const auto summary = pipeline::run_pipeline(a.config, o, err);
  out << "wrote " << summary.files.size() << " files under " << summary.output_dir.string()
      << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rates word-sense plausibility in short narratives.", "senserate"};
  app.require_subcommand(1);
  app.set_version_flag("--version", build_info());

  IngestArgs ingest;
  auto* s_ingest = app.add_subcommand("ingest", "Validate a dataset and write canonical JSONL");
  add_data_options(s_ingest, ingest.d);
  s_ingest->add_option("--out", ingest.out, "Output path, - for stdout")->required();
  s_ingest->add_option("--seed", ingest.seed);

  FeaturizeArgs feat;
  auto* s_feat = app.add_subcommand("featurize", "Compute F8 or F23 feature rows");
  add_data_options(s_feat, feat.d);
  s_feat->add_option("--schema", feat.schema, "f8 or f23");
  s_feat->add_option("--embeddings", feat.embeddings, "Embeddings JSONL or endpoint URL")
      ->required();
  s_feat->add_option("--embedding-model", feat.embedding_model);
  s_feat->add_option("--batch-size", feat.batch_size);
  s_feat->add_option("--parallelism", feat.parallelism);
  s_feat->add_option("--out", feat.out)->required();
  s_feat->add_option("--seed", feat.seed);

  TrainArgs train;
  auto* s_train = app.add_subcommand("train", "Fit a ridge or composite-loss model");
  add_data_options(s_train, train.d);
  s_train->add_option("--dev", train.dev, "Dev split; pooled with --data before training");
  s_train->add_option("--features", train.features, "Feature JSONL (repeatable)")->required();
  s_train->add_option("--schema", train.schema, "f8 or f23");
  s_train->add_option("--method", train.method, "ridge or composite");
  s_train->add_option("--loss", train.loss, "mse or huber");
  s_train->add_option("--delta", train.delta, "Huber threshold");
  s_train->add_option("--lambda-r", train.lambda_r);
  s_train->add_option("--lambda-u", train.lambda_u);
  s_train->add_option("--pair-cap", train.pair_cap);
  s_train->add_option("--alpha", train.alpha, "Ridge penalty");
  s_train->add_option("--holdout", train.holdout, "Internal validation fraction");
  s_train->add_option("--lr", train.lr);
  s_train->add_option("--max-epochs", train.max_epochs);
  s_train->add_option("--patience", train.patience);
  s_train->add_flag("--raw-features", train.raw_features,
                    "Descend on unscaled features instead of z-scored ones");
  s_train->add_option("--seed", train.seed);
  s_train->add_option("--out", train.out, "Model JSON")->required();
  s_train->add_option("--report", train.report, "Training report JSON");

  PredictArgs predict;
  auto* s_predict = app.add_subcommand("predict", "Score feature rows with a saved model");
  s_predict->add_option("--model", predict.model)->required();
  s_predict->add_option("--features", predict.features)->required();
  s_predict->add_option("--system-id", predict.system_id);
  s_predict->add_option("--out", predict.out);
  s_predict->add_option("--seed", predict.seed);

  PromptRenderArgs render;
  auto* s_render = app.add_subcommand("prompt-render", "Print the prompt for one sample");
  add_data_options(s_render, render.d);
  s_render->add_option("--train", render.train, "Few-shot pool for p1 (default: --data)");
  s_render->add_option("--strategy", render.strategy, "p1 or p2");
  s_render->add_option("--sample-id", render.sample_id)->required();
  s_render->add_option("--out", render.out);

  PromptRunArgs prun;
  auto* s_prun = app.add_subcommand("prompt-run", "Rate a dataset with an LLM");
  add_data_options(s_prun, prun.d);
  s_prun->add_option("--train", prun.train, "Few-shot pool for p1 (default: --data)");
  s_prun->add_option("--strategy", prun.strategy, "p1 or p2");
  s_prun->add_option("--model", prun.model);
  s_prun->add_option("--base-url", prun.base_url);
  s_prun->add_option("--temperature", prun.temperature);
  s_prun->add_option("--parallelism", prun.parallelism);
  s_prun->add_option("--max-retries", prun.max_retries);
  s_prun->add_option("--timeout-ms", prun.timeout_ms);
  s_prun->add_option("--api-key-env", prun.api_key_env);
  s_prun->add_option("--cache-dir", prun.cache_dir);
  s_prun->add_option("--parse", prun.parse, "strict or lenient");
  s_prun->add_option("--layout", prun.layout, "turns or single");
  s_prun->add_option("--mock-script", prun.mock_script, "Scripted responses instead of HTTP");
  s_prun->add_option("--system-id", prun.system_id);
  s_prun->add_option("--run-log", prun.run_log);
  s_prun->add_option("--seed", prun.seed);
  s_prun->add_option("--out", prun.out, "Predictions JSONL")->required();

  EvaluateArgs eval;
  auto* s_eval = app.add_subcommand("evaluate", "Score predictions against gold");
  add_data_options(s_eval, eval.d);
  s_eval->add_option("--preds", eval.preds)->required();
  s_eval->add_option("--system-id", eval.system_id);
  s_eval->add_option("--buckets", eval.buckets, "Bucket edges, e.g. 1,2.5,3.5,4.5,5");
  s_eval->add_option("--disagreement-threshold", eval.disagreement_threshold);
  s_eval->add_option("--seed", eval.seed);
  s_eval->add_option("--out", eval.out);

  AnalyzeArgs an;
  auto* s_an = app.add_subcommand("analyze", "Error analysis exports");
  add_data_options(s_an, an.e.d);
  s_an->add_option("--preds", an.e.preds)->required();
  s_an->add_option("--system-id", an.e.system_id);
  s_an->add_option("--buckets", an.e.buckets);
  s_an->add_option("--disagreement-threshold", an.e.disagreement_threshold);
  s_an->add_option("--top-k", an.top_k);
  s_an->add_option("--bin-width", an.bin_width);
  s_an->add_option("--dist-out", an.dist_out, "Distribution CSV");
  s_an->add_option("--worst-out", an.worst_out, "Worst cases JSON");
  s_an->add_option("--seed", an.e.seed);
  s_an->add_option("--out", an.e.out, "Report JSON");

  PipelineArgs pipe;
  auto* s_pipe = app.add_subcommand("pipeline", "Run every configured system end to end");
  s_pipe->add_option("--config", pipe.config)->required();
  s_pipe->add_option("--parallelism", pipe.parallelism);
  s_pipe->add_option("--output-dir", pipe.output_dir);
  s_pipe->add_option("--cache-dir", pipe.cache_dir);
  s_pipe->add_option("--seed", pipe.seed);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.back()->help());
    return 1;
  }

  try {
    if (s_ingest->parsed()) return cmd_ingest(ingest, out, err);
    if (s_feat->parsed()) return cmd_featurize(feat, out, err);
    if (s_train->parsed()) return cmd_train(train, out, err);
    if (s_predict->parsed()) return cmd_predict(predict, out, err);
    if (s_render->parsed()) return cmd_prompt_render(render, out, err);
    if (s_prun->parsed()) return cmd_prompt_run(prun, out, err);
    if (s_eval->parsed()) return cmd_evaluate(eval, out, err);
    if (s_an->parsed()) return cmd_analyze(an, out, err);
    if (s_pipe->parsed()) return cmd_pipeline(pipe, out, err);
  } catch (const TransportError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace senserate::cli

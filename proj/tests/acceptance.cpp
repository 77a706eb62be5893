// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures (0 when everything passes). The integration tier is
// skipped unless SENSERATE_IT_DATA, SENSERATE_IT_BASE_URL and
// SENSERATE_IT_MODEL are set.

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "senserate/analysis.hpp"
#include "senserate/batch.hpp"
#include "senserate/cli.hpp"
#include "senserate/error.hpp"
#include "senserate/metrics.hpp"
#include "senserate/prompting.hpp"
#include "senserate/regress.hpp"
#include "support.hpp"

using namespace senserate;
namespace rg = senserate::regress;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::ostringstream line;
  line << (o.pass ? "PASS" : "FAIL") << "  " << name << "  (" << o.detail;
  line.precision(3);
  line << "; " << std::fixed << secs << " s)";
  std::cout << line.str() << std::endl;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Outcome metric_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20260214);
  std::uniform_int_distribution<int> len(50, 500);
  double worst = 0;
  double min_tied = 1;
  for (int v = 0; v < 200; ++v) {
    const int n = len(rng);
    // Few distinct levels force ties.
    std::uniform_int_distribution<int> grid(0, std::max(4, n / 6));
    std::normal_distribution<double> g;
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = grid(rng) * 0.5;
      b[i] = i % 3 == 0 ? std::round(g(rng) * 4) : a[i] + g(rng);
    }
    std::map<double, int> counts;
    for (double x : a) ++counts[x];
    int tied = 0;
    for (double x : a) tied += counts[x] > 1;
    min_tied = std::min(min_tied, static_cast<double>(tied) / n);
    worst = std::max(worst, std::abs(metrics::spearman(a, b) - testing::naive_spearman(a, b)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && min_tied >= 0.3 && secs < 1.0,
          "max |diff| " + fmt(worst) + ", min tied fraction " + std::to_string(min_tied)};
}

Outcome within_sigma() {
  using testing::prediction;
  using testing::sample;
  // gold 3 sigma 0.5: errors 0.25 (<), 0.5 (=), 1.0 (>); gold 2 sigma 0:
  // exact and 0.25 off.
  std::vector<Sample> s{sample("a", 3, 0.5), sample("b", 3, 0.5), sample("c", 3, 0.5),
                        sample("d", 2, 0), sample("e", 2, 0)};
  std::vector<Prediction> p{prediction("a", 3.25), prediction("b", 3.5), prediction("c", 4.0),
                            prediction("d", 2.0), prediction("e", 2.25)};
  const double all = metrics::within_std_accuracy(p, s);
  const double lt = metrics::within_std_accuracy(std::vector<Prediction>{p[0]}, std::vector<Sample>{s[0]});
  const double eq = metrics::within_std_accuracy(std::vector<Prediction>{p[1]}, std::vector<Sample>{s[1]});
  const double gt = metrics::within_std_accuracy(std::vector<Prediction>{p[2]}, std::vector<Sample>{s[2]});
  const double z_in = metrics::within_std_accuracy(std::vector<Prediction>{p[3]}, std::vector<Sample>{s[3]});
  const double z_out = metrics::within_std_accuracy(std::vector<Prediction>{p[4]}, std::vector<Sample>{s[4]});
  const bool ok = all == 3.0 / 5.0 && lt == 1.0 && eq == 1.0 && gt == 0.0 && z_in == 1.0 && z_out == 0.0;
  return {ok, "combined " + std::to_string(all) + " (expected 0.6)"};
}

Outcome losses() {
  const auto t0 = std::chrono::steady_clock::now();
  const double ln2 = std::abs(rg::ranknet_loss(0, 0) - std::log(2.0));
  const bool hinge = rg::uncertainty_loss(3.0, 4.5, 1.0) == 0.5 && rg::uncertainty_loss(3.0, 3.5, 1.0) == 0.0 &&
                     rg::uncertainty_loss(3.0, 4.0, 1.0) == 0.0 && rg::uncertainty_loss(2.0, 4.5, 0.0) == 2.5 &&
                     rg::uncertainty_loss(4.5, 2.0, 0.0) == 2.5;
  double huber_gap = 0;
  for (double d : {0.25, 1.0, 3.0}) {
    huber_gap = std::max(huber_gap, std::abs(rg::huber_loss(d, d) - 0.5 * d * d));
    huber_gap = std::max(huber_gap, std::abs(rg::huber_loss(-d, d) - 0.5 * d * d));
    // linear branch evaluated at the threshold
    huber_gap = std::max(huber_gap, std::abs(d * (d - 0.5 * d) - rg::huber_loss(d, d)));
  }
  const double fd = testing::fd_gradient_sweep(20260214, 20);
  const double secs = seconds_since(t0);
  const bool ok = ln2 <= 1e-12 && hinge && huber_gap <= 1e-12 && fd < 1e-5 && secs < 5.0;
  return {ok, "ln2 err " + fmt(ln2) + ", hinge " + (hinge ? "exact" : "WRONG") + ", huber gap " +
                  fmt(huber_gap) + ", fd rel err " + fmt(fd) + " over 20 configs"};
}

Outcome ridge() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> dim(1, 20);
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = dim(rng);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(d + 20, 200)(rng);
    const auto b = testing::random_batch(rng, n, d);
    for (double alpha : {0.0, 0.1, 1.0, 10.0}) {
      const auto m = rg::ridge_fit(b, alpha);
      std::vector<long double> mx(d, 0), r(d, 0), rhs(d, 0);
      long double my = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < d; ++k) mx[k] += b.x[i * d + k];
        my += b.gold[i];
      }
      for (auto& v : mx) v /= n;
      my /= n;
      for (std::size_t i = 0; i < n; ++i) {
        long double xw = 0;
        for (std::size_t k = 0; k < d; ++k) xw += (b.x[i * d + k] - mx[k]) * m.weights[k];
        for (std::size_t k = 0; k < d; ++k) {
          const long double xk = b.x[i * d + k] - mx[k];
          r[k] += xk * xw;
          rhs[k] += xk * (b.gold[i] - my);
        }
      }
      long double num = 0, den = 0;
      for (std::size_t k = 0; k < d; ++k) {
        const long double e = r[k] + alpha * m.weights[k] - rhs[k];
        num += e * e;
        den += rhs[k] * rhs[k];
      }
      worst = std::max(worst, static_cast<double>(std::sqrt(num / den)));
    }
  }
  const auto b = testing::random_batch(rng, 120, 10);
  double prev = INFINITY;
  bool monotone = true;
  for (double alpha : {0.01, 0.1, 1.0, 10.0, 1e4}) {
    const auto w = rg::ridge_fit(b, alpha).weights;
    double nrm = 0;
    for (double x : w) nrm += x * x;
    nrm = std::sqrt(nrm);
    monotone = monotone && nrm <= prev;
    prev = nrm;
  }
  return {worst <= 1e-8 && monotone,
          "max relative residual " + fmt(worst) + ", shrinkage " + (monotone ? "monotone" : "NOT monotone")};
}

Outcome trainer() {
  const auto t0 = std::chrono::steady_clock::now();
  // 600 draws from one planted model: 500 train, 100 validation.
  const auto all = testing::planted_logistic(20260214, 600, 8);
  rg::Batch train, val;
  train.width = val.width = 8;
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto& dst = i < 500 ? train : val;
    dst.x.insert(dst.x.end(), all.x.begin() + i * 8, all.x.begin() + (i + 1) * 8);
    dst.gold.push_back(all.gold[i]);
    dst.sigma.push_back(all.sigma[i]);
  }
  const auto a = rg::train_gd(train, val, rg::LossConfig{}, rg::TrainOptions{});
  const auto b = rg::train_gd(train, val, rg::LossConfig{}, rg::TrainOptions{});
  std::vector<double> pred;
  for (std::size_t i = 0; i < train.size(); ++i) pred.push_back(rg::predict(a.model, train.row(i)));
  const double rho = metrics::spearman(pred, train.gold);
  const bool same = a.report.loss_trace == b.report.loss_trace && a.model == b.model;
  const double secs = seconds_since(t0);
  const bool ok = rho >= 0.99 && a.report.epochs_run <= 500 && same && secs < 10.0;
  return {ok, "train spearman " + std::to_string(rho) + " after " + std::to_string(a.report.epochs_run) +
                  " epochs, " + (same ? "deterministic" : "NOT deterministic")};
}

Outcome prompt_fidelity() {
  using namespace prompting;
  const auto g = [](const std::string& f) { return testing::read_text(testing::golden_dir() / f); };
  int bad = 0;
  bad += std::string(p1_system_template()) + "\n" != g("p1_system.txt");
  bad += std::string(p1_example_template()) + "\n" != g("p1_example_template.txt");
  bad += std::string(p1_user_template()) + "\n" != g("p1_user_template.txt");
  bad += std::string(p2_template()) + "\n" != g("p2_template.txt");

  Sample drive;
  drive.id = "drive";
  drive.homonym = "drive";
  drive.judged_meaning = "hitting a golf ball off of a tee with a driver";
  drive.precontext =
      "Lisa had always been competitive. Every weekend, she dedicated herself to her passion. She "
      "believed that her relentless practice would pay off someday.";
  drive.sentence = "Her drive was what ultimately got her into the top university.";
  drive.ending =
      "She made that long trip to show the course coordinators her dedication to going to that "
      "university, and they said that was one of the reasons why they accepted her.";
  drive.gold_mean = 1;
  bad += render_example_block(drive) + "\n" != g("p1_example_drive.txt");

  const auto map = SchemaMap::from_json_file(testing::mini_dir() / "schema_map.json");
  const auto train = load_samples(testing::mini_dir() / "train.jsonl", map);
  const auto eval = load_samples(testing::mini_dir() / "eval.jsonl", map);
  bad += transcript(build_p1(eval[0], select_fewshot(train).shots)) != g("p1_ring.txt");
  const auto p2 = build_p2(eval[0]);
  bad += transcript(p2) != g("p2_ring.txt");
  for (const char* rule :
       {"If the ending clearly contradicts the proposed meaning, the rating must be 1 or 2.",
        "If evidence is mixed or unclear, choose the lower plausible rating.",
        "A rating of 5 requires explicit confirmation in the ending and no contradictions elsewhere."}) {
    bad += p2.system_text.find(rule) == std::string::npos;
  }
  return {bad == 0, std::to_string(10 - bad) + "/10 byte and rule checks"};
}

Outcome parser_table() {
  const auto cases = nlohmann::json::parse(
      testing::read_text(testing::source_dir() / "tests" / "fixtures" / "rating_cases.json"));
  int deviations = 0;
  for (const auto& c : cases) {
    const std::string text = c.at("text");
    const auto mode = prompting::parse_parse_mode(c.at("mode").get<std::string>());
    const auto& want = c.at("expect");
    std::string got;
    try {
      got = std::to_string(prompting::parse_rating(text, mode).value);
    } catch (const RatingRangeError&) {
      got = "range_error";
    } catch (const RatingParseError&) {
      got = "parse_error";
    }
    const std::string expect = want.is_number() ? std::to_string(want.get<int>()) : want.get<std::string>();
    deviations += got != expect;
  }
  return {cases.size() == 12 && deviations == 0,
          std::to_string(cases.size()) + " cases, " + std::to_string(deviations) + " deviations"};
}

Outcome end_to_end() {
  testing::TempDir a("acc-a"), b("acc-b"), c("acc-c");
  const auto cfg = (testing::mini_dir() / "mini.json").string();
  double slowest = 0;
  auto pipe = [&](const testing::TempDir& d, const char* par) {
    std::ostringstream out, err;
    const auto t0 = std::chrono::steady_clock::now();
    const int code = cli::run({"pipeline", "--config", cfg, "--output-dir", d.path().string(),
                               "--parallelism", par},
                              out, err);
    slowest = std::max(slowest, seconds_since(t0));
    if (code != 0) throw Error("pipeline exited " + std::to_string(code) + ": " + err.str());
  };
  pipe(a, "1");
  pipe(b, "1");
  pipe(c, "8");
  const auto sa = testing::snapshot(a.path());
  const bool repeat = sa == testing::snapshot(b.path());
  const bool parallel = sa == testing::snapshot(c.path());

  // Prompt-system reports must match byte for byte. Feature-system reports
  // are compared at 1e-9 because vectorized and scalar kernels sum in a
  // different order.
  int golden_bad = 0;
  int byte_equal = 0;
  for (const std::string sys : {"p1-strict", "p2-lenient", "ridge-f8", "composite-f23"}) {
    const auto got = sa.at("systems/" + sys + "/report.json");
    const auto want = testing::read_text(testing::golden_dir() / "mini" / (sys + ".report.json"));
    byte_equal += got == want;
    if (sys[0] == 'p') {
      golden_bad += got != want;
    } else {
      golden_bad += !testing::json_close(nlohmann::json::parse(got), nlohmann::json::parse(want),
                                         1e-9, nullptr);
    }
  }
  const bool ok = repeat && parallel && golden_bad == 0 && slowest < 5.0;
  return {ok, std::string("repeat ") + (repeat ? "identical" : "DIFFERENT") + ", p1 vs p8 " +
                  (parallel ? "identical" : "DIFFERENT") + ", golden reports " +
                  std::to_string(4 - golden_bad) + "/4 (" + std::to_string(byte_equal) +
                  " byte-equal), slowest run " + std::to_string(slowest) + " s"};
}

Outcome cache_resume() {
  const auto map = SchemaMap::from_json_file(testing::mini_dir() / "schema_map.json");
  const auto eval = load_samples(testing::mini_dir() / "eval.jsonl", map);
  const auto script = testing::read_text(testing::mini_dir() / "mock_script.json");
  testing::TempDir dir("acc-cache");
  llm::BatchOptions opts;
  opts.provider.model = "mock-chat";
  opts.cache_dir = dir.path();
  auto j = nlohmann::json::parse(script);
  for (std::size_t i = 8; i < 14; ++i) j[eval[i].sentence] = {{"error", "transport"}};
  llm::MockProvider flaky = llm::MockProvider::from_json_text(j.dump());
  bool aborted = false;
  try {
    llm::run_batch(eval, opts, flaky);
  } catch (const llm::BatchAborted&) {
    aborted = true;
  }
  std::size_t cached = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path())) cached += e.is_regular_file();

  llm::MockProvider resume = llm::MockProvider::from_json_text(script);
  const auto r = llm::run_batch(eval, opts, resume);
  llm::MockProvider again = llm::MockProvider::from_json_text(script);
  llm::run_batch(eval, opts, again);
  const bool ok = aborted && cached > 0 && resume.call_count() == eval.size() - cached &&
                  r.log.cache_hits == cached && again.call_count() == 0;
  return {ok, "interrupted run cached " + std::to_string(cached) + ", resume made " +
                  std::to_string(resume.call_count()) + " calls, warm re-run " +
                  std::to_string(again.call_count())};
}

void integration() {
  const char* data = std::getenv("SENSERATE_IT_DATA");
  const char* base = std::getenv("SENSERATE_IT_BASE_URL");
  const char* model = std::getenv("SENSERATE_IT_MODEL");
  const std::string name = "optional integration: prompt-run p2 + evaluate on a real endpoint";
  if (!data || !base || !model) {
    std::cout << "SKIP  " << name << "  (set SENSERATE_IT_DATA, SENSERATE_IT_BASE_URL, SENSERATE_IT_MODEL)"
              << std::endl;
    return;
  }
  report(name, [&]() -> Outcome {
    testing::TempDir dir("acc-it");
    const char* map = std::getenv("SENSERATE_IT_SCHEMA_MAP");
    std::vector<std::string> run_args{"prompt-run", "--data", data, "--strategy", "p2", "--model", model,
                                      "--base-url", base, "--out", (dir / "preds.jsonl").string()};
    std::vector<std::string> eval_args{"evaluate", "--data", data, "--preds", (dir / "preds.jsonl").string(),
                                       "--out", (dir / "report.json").string()};
    if (map) {
      for (auto* v : {&run_args, &eval_args}) {
        v->push_back("--schema-map");
        v->push_back(map);
      }
    }
    std::ostringstream out, err;
    if (cli::run(run_args, out, err) != 0) return {false, "prompt-run failed: " + err.str()};
    if (cli::run(eval_args, out, err) != 0) return {false, "evaluate failed: " + err.str()};
    const auto rep = nlohmann::json::parse(testing::read_text(dir / "report.json"));
    return {rep.contains("spearman") && rep.contains("accuracy"),
            "spearman " + rep.at("spearman").dump() + ", accuracy " + rep.at("accuracy").dump()};
  });
}

}  // namespace

int main() {
  report("metric oracle equivalence", metric_oracle);
  report("within-sigma accuracy", within_sigma);
  report("loss correctness", losses);
  report("ridge normal equations and shrinkage", ridge);
  report("trainer on planted model", trainer);
  report("prompt fidelity", prompt_fidelity);
  report("parser table", parser_table);
  report("hermetic end-to-end", end_to_end);
  report("cache discipline", cache_resume);
  integration();
  return failures;
}

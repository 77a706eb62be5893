#pragma once

// Shared fixtures and independent reference implementations for the tests.
// Nothing here calls into the library's numeric code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "json.hpp"

#include "senserate/core.hpp"
#include "senserate/regress.hpp"

namespace testing {

inline std::filesystem::path source_dir() { return SENSERATE_SOURCE_DIR; }
inline std::filesystem::path mini_dir() { return source_dir() / "data" / "mini"; }
inline std::filesystem::path golden_dir() { return source_dir() / "goldens"; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("senserate-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline senserate::Sample sample(const std::string& id, double mean, double sd) {
  senserate::Sample s;
  s.id = id;
  s.homonym = "ring";
  s.judged_meaning = "a characteristic sound";
  s.precontext = "John looked at his savings and smiled.";
  s.sentence = "He told his girlfriend he would give her a ring.";
  s.ending = "John was excited to finally buy the special piece of jewelry.";
  s.gold_mean = mean;
  s.gold_std = sd;
  return s;
}

inline senserate::Prediction prediction(const std::string& id, double score) {
  return {id, score, "test", std::nullopt, false};
}

// Rank of each element as 1 + (#smaller) + (#equal - 1) / 2, by counting.
inline std::vector<double> naive_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0.0;
    double equal = 0.0;
    for (double x : v) {
      if (x < v[i]) less += 1.0;
      if (x == v[i]) equal += 1.0;
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

inline double naive_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  long double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  long double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double da = a[i] - ma;
    const long double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  return static_cast<double>(sab / std::sqrt(saa * sbb));
}

inline double naive_spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return naive_pearson(naive_ranks(a), naive_ranks(b));
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    }
    std::swap(a[c], a[p]);
    std::swap(b[c], b[p]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

/// Batch with standard normal features, golds in [1, 5] and sigmas in [0.1, 1].
inline senserate::regress::Batch random_batch(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> gold(1, 5);
  std::uniform_real_distribution<double> sd(0.1, 1.0);
  senserate::regress::Batch b;
  b.width = d;
  for (std::size_t i = 0; i < n * d; ++i) b.x.push_back(g(rng));
  for (std::size_t i = 0; i < n; ++i) {
    b.gold.push_back(gold(rng));
    b.sigma.push_back(sd(rng));
  }
  return b;
}

/// Composite loss written directly from its definition, in long double.
inline double naive_composite(const std::vector<double>& w, double bias,
                              const senserate::regress::Batch& b,
                              const senserate::regress::LossConfig& cfg,
                              const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  const std::size_t n = b.gold.size();
  std::vector<long double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    long double v = bias;
    for (std::size_t k = 0; k < b.width; ++k) v += w[k] * b.x[i * b.width + k];
    s[i] = v;
  }
  long double reg = 0, unc = 0, rank = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double r = s[i] - b.gold[i];
    const long double a = std::abs(r);
    if (cfg.reg_kind == senserate::regress::RegKind::kMse) {
      reg += r * r;
    } else {
      reg += a <= cfg.delta ? 0.5L * r * r : cfg.delta * (a - 0.5L * cfg.delta);
    }
    unc += std::max<long double>(0, a - b.sigma[i]);
  }
  for (const auto& [i, j] : pairs) rank += std::log1p(std::exp(-(s[i] - s[j])));
  long double total = reg / n + cfg.lambda_u * unc / n;
  if (!pairs.empty()) total += cfg.lambda_r * rank / pairs.size();
  return static_cast<double>(total);
}

/// n x d standard normal design with y = 1 + 4 logistic(w* . x), noise free.
inline senserate::regress::Batch planted_logistic(std::uint64_t seed, std::size_t n, std::size_t d,
                                                  std::vector<double>* w_star = nullptr) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> w(d);
  for (auto& v : w) v = g(rng);
  senserate::regress::Batch b;
  b.width = d;
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0;
    for (std::size_t k = 0; k < d; ++k) {
      const double x = g(rng);
      b.x.push_back(x);
      z += w[k] * x;
    }
    b.gold.push_back(std::clamp(1.0 + 4.0 / (1.0 + std::exp(-z)), 1.0, 5.0));
    b.sigma.push_back(0.0);
  }
  if (w_star) *w_star = w;
  return b;
}

/// Largest per-component relative error between the analytic gradient and
/// central differences (step 1e-6) of the loss value. Returns -1 when a draw
/// sits within 1e-4 of a Huber or hinge kink.
inline double fd_gradient_error(const senserate::regress::LinearModel& m,
                                const senserate::regress::Batch& b,
                                const senserate::regress::LossConfig& cfg) {
  namespace rg = senserate::regress;
  const auto pairs = rg::sample_pairs(b.gold, cfg.pair_cap, cfg.seed);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double r = std::abs(rg::raw_score(m, b.row(i)) - b.gold[i]);
    if (cfg.reg_kind == rg::RegKind::kHuber && std::abs(r - cfg.delta) < 1e-4) return -1;
    if (cfg.lambda_u > 0 && std::abs(r - b.sigma[i]) < 1e-4) return -1;
  }
  const auto analytic = rg::composite_loss(m, b, cfg, pairs).gradient;
  const double h = 1e-6;
  double worst = 0;
  for (std::size_t k = 0; k <= b.width; ++k) {
    auto up = m;
    auto down = m;
    if (k < b.width) {
      up.weights[k] += h;
      down.weights[k] -= h;
    } else {
      up.bias += h;
      down.bias -= h;
    }
    const double fd = (rg::composite_loss(up, b, cfg, pairs).total -
                       rg::composite_loss(down, b, cfg, pairs).total) /
                      (2 * h);
    const double denom = std::max({std::abs(fd), std::abs(analytic[k]), 1e-8});
    worst = std::max(worst, std::abs(fd - analytic[k]) / denom);
  }
  return worst;
}

/// Twenty draws over both regression kinds and every on/off combination of
/// the two auxiliary weights. Kink draws are resampled.
inline double fd_gradient_sweep(std::uint64_t seed, int draws = 20) {
  namespace rg = senserate::regress;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  double worst = 0;
  int done = 0;
  while (done < draws) {
    rg::LossConfig cfg;
    cfg.reg_kind = done % 2 ? rg::RegKind::kHuber : rg::RegKind::kMse;
    cfg.delta = 0.5 + (done % 3) * 0.5;
    cfg.lambda_r = (done / 2) % 2 ? 0.25 : 0.0;
    cfg.lambda_u = (done / 4) % 2 ? 0.5 : 0.0;
    if (done >= 8) {
      cfg.lambda_r = 0.1 * (done % 5 + 1);
      cfg.lambda_u = 0.2 * (done % 4 + 1);
    }
    cfg.pair_cap = 64;
    cfg.seed = static_cast<std::uint64_t>(done);
    const std::size_t d = 3 + done % 6;
    const auto b = random_batch(rng, 40, d);
    rg::LinearModel m;
    m.weights.resize(d);
    for (auto& w : m.weights) w = 0.5 * g(rng);
    m.bias = 3 + g(rng);
    m.label_space = rg::LabelSpace::kRaw;
    const double e = fd_gradient_error(m, b, cfg);
    if (e < 0) continue;
    worst = std::max(worst, e);
    ++done;
  }
  return worst;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

/// Structural JSON equality with numbers compared to an absolute-or-relative
/// tolerance. On mismatch `where` names the first differing path.
inline bool json_close(const nlohmann::json& a, const nlohmann::json& b, double tol,
                       std::string* where, const std::string& path = "$") {
  if (a.is_number() && b.is_number()) {
    const double x = a.get<double>();
    const double y = b.get<double>();
    const bool ok = std::abs(x - y) <= tol * std::max(1.0, std::max(std::abs(x), std::abs(y)));
    if (!ok && where) *where = path;
    return ok;
  }
  if (a.type() != b.type()) {
    if (where) *where = path;
    return false;
  }
  if (a.is_object()) {
    if (a.size() != b.size()) {
      if (where) *where = path;
      return false;
    }
    for (auto it = a.begin(); it != a.end(); ++it) {
      if (!b.contains(it.key()) || !json_close(*it, b[it.key()], tol, where, path + "." + it.key())) {
        if (where && where->empty()) *where = path + "." + it.key();
        return false;
      }
    }
    return true;
  }
  if (a.is_array()) {
    if (a.size() != b.size()) {
      if (where) *where = path;
      return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!json_close(a[i], b[i], tol, where, path + "[" + std::to_string(i) + "]")) return false;
    }
    return true;
  }
  const bool ok = a == b;
  if (!ok && where) *where = path;
  return ok;
}

/// Relative path -> contents for every regular file under `root`.
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      out[std::filesystem::relative(e.path(), root).generic_string()] = read_text(e.path());
    }
  }
  return out;
}

}  // namespace testing

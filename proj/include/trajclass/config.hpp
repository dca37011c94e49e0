#pragma once

// Run configuration as a flat key = value file. Lines starting with '#' are
// comments. Unknown keys are errors. to_text() writes every key, so
// parse(to_text(c)) == c.
//
// List values are comma separated. Per-family keys are prefixed with the
// family name, e.g. "lstm.hidden = 32" or "dense.epochs = 600".

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "trajclass/eval.hpp"

namespace trajclass {

struct RunConfig {
  std::uint64_t master_seed = 0;
  std::string output_dir = "out";
  std::size_t n_per_class = 100;
  SimConfig sim{};
  SplitSpec split{};
  EntropyConfig entropy{};
  bool normalize_inputs = true;
  std::size_t jobs = 0;  // 0 = hardware concurrency

  std::vector<nn::Family> families{std::begin(nn::kAllFamilies), std::end(nn::kAllFamilies)};
  std::vector<ThresholdMethod> baselines{std::begin(kAllThresholdMethods), std::end(kAllThresholdMethods)};
  std::vector<std::size_t> timesteps = default_timesteps();
  std::vector<Condition> conditions{Condition::Plain, Condition::Rotated};
  std::map<nn::Family, FamilySetup> models = default_models();

  static std::vector<std::size_t> default_timesteps() {
    std::vector<std::size_t> out;
    for (auto g : TimestepGroup::all()) out.push_back(g.value());
    return out;
  }

  static std::map<nn::Family, FamilySetup> default_models() {
    std::map<nn::Family, FamilySetup> out;
    for (auto f : nn::kAllFamilies) out[f] = FamilySetup::defaults(f);
    return out;
  }

  SeedPlan seeds() const { return {master_seed}; }

  std::size_t effective_jobs() const {
    if (jobs) return jobs;
    const auto hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
  }

  ExperimentPlan plan() const {
    ExperimentPlan p;
    for (auto f : families) p.families.push_back(models.at(f));
    p.baselines = baselines;
    p.timesteps = timesteps;
    p.conditions = conditions;
    p.entropy = entropy;
    p.folds = split.k_folds;
    p.normalize_inputs = normalize_inputs;
    p.seeds = seeds();
    p.jobs = effective_jobs();
    return p;
  }

  void apply(std::string_view key, std::string_view value);
  std::string to_text() const;

  friend bool operator==(const RunConfig&, const RunConfig&);
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T number(std::string_view key, std::string_view v) {
  T out{};
  const auto s = trim(v);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw std::invalid_argument("config: bad value '" + s + "' for " + std::string(key));
  }
  return out;
}

inline bool boolean(std::string_view key, std::string_view v) {
  const auto s = trim(v);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("config: bad boolean '" + s + "' for " + std::string(key));
}

inline std::vector<std::string> items(std::string_view v) {
  std::vector<std::string> out;
  const auto s = trim(v);
  if (s.empty() || s == "none") return out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = s.find(',', start);
    out.push_back(trim(std::string_view(s).substr(start, comma == std::string::npos ? comma : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  if (xs.empty()) return "none";
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) os << ',';
    if constexpr (std::is_arithmetic_v<T>) {
      os << xs[i];
    } else {
      os << to_string(xs[i]);
    }
  }
  return os.str();
}

// Shortest text that parses back to the same double.
inline std::string real(double v) {
  char buf[32];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace config_detail

inline void RunConfig::apply(std::string_view key_in, std::string_view value) {
  using namespace config_detail;
  const auto key = trim(key_in);
  auto sz = [&] { return number<std::size_t>(key, value); };
  auto i64 = [&] { return number<std::int64_t>(key, value); };

  if (key == "master_seed") { master_seed = number<std::uint64_t>(key, value); return; }
  if (key == "output_dir") { output_dir = trim(value); return; }
  if (key == "n_per_class") { n_per_class = sz(); return; }
  if (key == "sim.grid_size") { sim.grid_size = i64(); return; }
  if (key == "sim.max_steps") { sim.max_steps = sz(); return; }
  if (key == "sim.catch_radius") { sim.catch_radius = i64(); return; }
  if (key == "sim.max_wait") { sim.max_wait = i64(); return; }
  if (key == "sim.min_start_separation") { sim.min_start_separation = i64(); return; }
  if (key == "split.test_per_class") { split.test_per_class = sz(); return; }
  if (key == "split.k_folds") { split.k_folds = sz(); return; }
  if (key == "entropy.buffer_size") { entropy.buffer_size = sz(); return; }
  if (key == "entropy.symbol_lag") { entropy.symbol_lag = sz(); return; }
  if (key == "entropy.exclude_padding") { entropy.exclude_padding = boolean(key, value); return; }
  if (key == "normalize_inputs") { normalize_inputs = boolean(key, value); return; }
  if (key == "jobs") { jobs = sz(); return; }
  if (key == "families") {
    families.clear();
    for (const auto& s : items(value)) families.push_back(nn::parse_family(s));
    return;
  }
  if (key == "baselines") {
    baselines.clear();
    for (const auto& s : items(value)) baselines.push_back(parse_threshold_method(s));
    return;
  }
  if (key == "timesteps") {
    timesteps.clear();
    for (const auto& s : items(value)) timesteps.push_back(TimestepGroup(number<std::size_t>(key, s)).value());
    std::sort(timesteps.begin(), timesteps.end());
    timesteps.erase(std::unique(timesteps.begin(), timesteps.end()), timesteps.end());
    return;
  }
  if (key == "conditions") {
    conditions.clear();
    for (const auto& s : items(value)) conditions.push_back(parse_condition(s));
    return;
  }

  const auto dot = key.find('.');
  if (dot != std::string::npos) {
    nn::Family fam;
    try {
      fam = nn::parse_family(std::string_view(key).substr(0, dot));
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    auto& m = models[fam];
    const auto field = std::string_view(key).substr(dot + 1);
    if (field == "stride") { m.spec.input_stride = sz(); return; }
    if (field == "hidden") {
      m.spec.hidden_sizes.clear();
      for (const auto& s : items(value)) m.spec.hidden_sizes.push_back(number<std::size_t>(key, s));
      return;
    }
    if (field == "epochs") { m.train.epochs = sz(); return; }
    if (field == "batch_size") { m.train.batch_size = sz(); return; }
    if (field == "learning_rate") { m.train.optimizer.learning_rate = number<double>(key, value); return; }
    if (field == "clip_norm") { m.train.clip_norm = number<double>(key, value); return; }
    if (field == "optimizer") {
      const auto s = trim(value);
      if (s == "adam") {
        m.train.optimizer.kind = nn::OptimizerKind::Adam;
      } else if (s == "sgd") {
        m.train.optimizer.kind = nn::OptimizerKind::SGD;
      } else {
        throw std::invalid_argument("config: unknown optimizer '" + s + "'");
      }
      return;
    }
  }
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

inline std::string RunConfig::to_text() const {
  using namespace config_detail;
  std::ostringstream os;
  os << "master_seed = " << master_seed << '\n';
  os << "output_dir = " << output_dir << '\n';
  os << "n_per_class = " << n_per_class << '\n';
  os << "sim.grid_size = " << sim.grid_size << '\n';
  os << "sim.max_steps = " << sim.max_steps << '\n';
  os << "sim.catch_radius = " << sim.catch_radius << '\n';
  os << "sim.max_wait = " << sim.max_wait << '\n';
  os << "sim.min_start_separation = " << sim.min_start_separation << '\n';
  os << "split.test_per_class = " << split.test_per_class << '\n';
  os << "split.k_folds = " << split.k_folds << '\n';
  os << "entropy.buffer_size = " << entropy.buffer_size << '\n';
  os << "entropy.symbol_lag = " << entropy.symbol_lag << '\n';
  os << "entropy.exclude_padding = " << (entropy.exclude_padding ? "true" : "false") << '\n';
  os << "normalize_inputs = " << (normalize_inputs ? "true" : "false") << '\n';
  os << "jobs = " << jobs << '\n';
  os << "families = " << join(families) << '\n';
  os << "baselines = " << join(baselines) << '\n';
  os << "timesteps = " << join(timesteps) << '\n';
  os << "conditions = " << join(conditions) << '\n';
  for (const auto& [fam, m] : models) {
    const auto name = std::string(nn::to_string(fam));
    os << name << ".stride = " << m.spec.input_stride << '\n';
    os << name << ".hidden = " << join(m.spec.hidden_sizes) << '\n';
    os << name << ".epochs = " << m.train.epochs << '\n';
    os << name << ".batch_size = " << m.train.batch_size << '\n';
    os << name << ".learning_rate = " << real(m.train.optimizer.learning_rate) << '\n';
    os << name << ".clip_norm = " << real(m.train.clip_norm) << '\n';
    os << name << ".optimizer = " << (m.train.optimizer.kind == nn::OptimizerKind::Adam ? "adam" : "sgd") << '\n';
  }
  return os.str();
}

inline bool operator==(const RunConfig& a, const RunConfig& b) { return a.to_text() == b.to_text(); }

/// Applies every "key = value" line of `text` on top of `cfg`.
inline void apply_text(RunConfig& cfg, std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto t = config_detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("config line " + std::to_string(n) + ": missing '='");
    try {
      cfg.apply(std::string_view(t).substr(0, eq), std::string_view(t).substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(n) + ": " + e.what());
    }
  }
}

inline RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  apply_text(cfg, text);
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

}  // namespace trajclass

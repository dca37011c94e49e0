// trajclass: simulate -> preprocess -> run -> report.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "trajclass/config.hpp"

namespace fs = std::filesystem;
using namespace trajclass;
using json = nlohmann::json;

namespace {

constexpr const char* kOutDirEnv = "TRAJCLASS_OUT_DIR";

struct Flags {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::size_t> n_per_class;
  std::optional<std::string> families, baselines, timesteps, conditions;
  std::vector<std::string> sets;  // raw key=value overrides
};

// defaults < config file < environment < flags
RunConfig resolve(const Flags& f) {
  RunConfig cfg;
  if (!f.config_path.empty()) cfg = load_config(f.config_path);
  if (const char* env = std::getenv(kOutDirEnv); env && *env) cfg.output_dir = env;
  if (f.out_dir) cfg.output_dir = *f.out_dir;
  if (f.seed) cfg.master_seed = *f.seed;
  if (f.jobs) cfg.jobs = *f.jobs;
  if (f.n_per_class) cfg.n_per_class = *f.n_per_class;
  if (f.families) cfg.apply("families", *f.families);
  if (f.baselines) cfg.apply("baselines", *f.baselines);
  if (f.timesteps) cfg.apply("timesteps", *f.timesteps);
  if (f.conditions) cfg.apply("conditions", *f.conditions);
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void append_manifest(const RunConfig& cfg, json entry) {
  const auto seeds = cfg.seeds();
  entry["master_seed"] = cfg.master_seed;
  entry["config_hash"] = hex64(fnv1a64(cfg.to_text()));
  entry["seeds"] = {{"sim", seeds.sim()},         {"split", seeds.split()}, {"rotation", seeds.rotation()},
                    {"folds", seeds.folds()},     {"init0", seeds.init(0)}, {"shuffle0", seeds.shuffle(0)}};
  const auto path = fs::path(cfg.output_dir) / "manifest.jsonl";
  std::ofstream os(path, std::ios::app);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << entry.dump() << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path ensure_out_dir(const RunConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

int cmd_simulate(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = ensure_out_dir(cfg);
  const auto raw = simulate_raw(cfg.sim, cfg.n_per_class, cfg.seeds());
  export_csv(raw, (dir / "raw.csv").string());
  write_text(dir / "config.txt", cfg.to_text());
  std::cout << "wrote " << raw.size() << " trajectories to " << (dir / "raw.csv").string() << '\n';
  append_manifest(cfg, {{"command", "simulate"}, {"trajectories", raw.size()}, {"wall_seconds", seconds_since(t0)}});
  return 0;
}

int cmd_preprocess(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = ensure_out_dir(cfg);
  const auto raw_path = dir / "raw.csv";
  if (!fs::exists(raw_path)) throw std::runtime_error("missing " + raw_path.string() + "; run 'simulate' first");
  const auto data = preprocess(import_csv(raw_path.string()), cfg.split, cfg.seeds());
  export_csv(data.train_plain, (dir / "train_plain.csv").string());
  export_csv(data.test_plain, (dir / "test_plain.csv").string());
  export_csv(data.train_rotated, (dir / "train_rotated.csv").string());
  export_csv(data.test_rotated, (dir / "test_rotated.csv").string());
  std::cout << "train " << data.train_plain.size() << ", test " << data.test_plain.size() << " per condition\n";
  append_manifest(cfg, {{"command", "preprocess"},
                        {"train", data.train_plain.size()},
                        {"test", data.test_plain.size()},
                        {"wall_seconds", seconds_since(t0)}});
  return 0;
}

ExperimentData load_experiment_data(const fs::path& dir, const std::vector<Condition>& conditions) {
  ExperimentData d;
  for (auto c : conditions) {
    const auto name = std::string(to_string(c));
    for (const char* part : {"train", "test"}) {
      const auto path = dir / (std::string(part) + "_" + name + ".csv");
      if (!fs::exists(path)) throw std::runtime_error("missing " + path.string() + "; run 'preprocess' first");
      auto set = import_csv(path.string());
      auto& slot = c == Condition::Plain ? (part[1] == 'r' ? d.train_plain : d.test_plain)
                                         : (part[1] == 'r' ? d.train_rotated : d.test_rotated);
      slot = std::move(set);
    }
  }
  return d;
}

int cmd_run(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto plan = cfg.plan();
  plan.validate();
  const auto dir = ensure_out_dir(cfg);
  const auto data = load_experiment_data(dir, plan.conditions);
  const auto report = run_experiment(plan, data);
  const auto files = emit_report(report, dir);
  write_text(dir / "config.txt", cfg.to_text());

  json cells = json::array();
  std::size_t k = 0;
  for (const auto& row : report.rows) {
    if (row.is_baseline()) continue;
    cells.push_back({{"method", row.method},
                     {"condition", to_string(row.condition)},
                     {"T", row.timesteps},
                     {"seconds", report.cell_seconds[k++]}});
  }
  json names = json::array();
  for (const auto& f : files) names.push_back(f.filename().string());
  append_manifest(cfg, {{"command", "run"},
                        {"rows", report.rows.size()},
                        {"jobs", plan.jobs},
                        {"files", names},
                        {"cells", cells},
                        {"wall_seconds", seconds_since(t0)}});
  std::cout << "wrote " << report.rows.size() << " rows to " << dir.string() << '\n';
  return 0;
}

int cmd_report(const RunConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  const auto path = dir / "report.csv";
  std::ifstream is(path);
  if (!is) throw std::runtime_error("missing " + path.string() + "; run 'run' first");
  const auto rows = read_report_csv(is);

  std::ifstream pis(dir / "predictions.csv");
  std::map<std::tuple<std::string, std::string, std::size_t>, double> recomputed;
  if (pis) recomputed = accuracy_from_predictions(pis);

  int mismatches = 0;
  for (auto c : kAllConditions) {
    std::vector<std::string> methods;
    std::vector<std::size_t> ts;
    for (const auto& r : rows) {
      if (r.condition != c) continue;
      if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
      if (std::find(ts.begin(), ts.end(), r.timesteps) == ts.end()) ts.push_back(r.timesteps);
    }
    if (methods.empty()) continue;
    std::sort(ts.begin(), ts.end());
    std::printf("\n%s test accuracy\n%-20s", std::string(to_string(c)).c_str(), "method");
    for (auto t : ts) std::printf(" %6zu", t);
    std::printf("\n");
    for (const auto& m : methods) {
      std::printf("%-20s", m.c_str());
      for (auto t : ts) {
        const ReportRow* hit = nullptr;
        for (const auto& r : rows) {
          if (r.method == m && r.condition == c && r.timesteps == t) hit = &r;
        }
        if (!hit) {
          std::printf(" %6s", "-");
          continue;
        }
        std::printf(" %6.3f", hit->accuracy);
        const auto it = recomputed.find({m, std::string(to_string(c)), t});
        if (!recomputed.empty() && (it == recomputed.end() || std::fabs(it->second - hit->accuracy) > 5e-5)) {
          ++mismatches;
        }
      }
      std::printf("\n");
    }
  }
  if (mismatches) {
    std::fprintf(stderr, "%d report rows disagree with predictions.csv\n", mismatches);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory classification workbench"};
  app.require_subcommand(1);
  Flags flags;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config_path, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out-dir", flags.out_dir, std::string("output directory (env ") + kOutDirEnv + ")");
    sub->add_option("--seed", flags.seed, "master seed");
    sub->add_option("--set", flags.sets, "extra key=value override, repeatable");
  };

  auto* sim = app.add_subcommand("simulate", "generate raw.csv");
  common(sim);
  sim->add_option("--n-per-class", flags.n_per_class, "trajectories per class");

  auto* pre = app.add_subcommand("preprocess", "split and rotate raw.csv into train/test files");
  common(pre);

  auto* run = app.add_subcommand("run", "k-fold training and baselines over the experiment grid");
  common(run);
  run->add_option("--families", flags.families, "comma list of dense,conv1d,lstm,gru or none");
  run->add_option("--baselines", flags.baselines,
                  "comma list of supervised_weighted,supervised_voronoi,kmeans_weighted,kmeans_voronoi or none");
  run->add_option("--timesteps", flags.timesteps, "comma list of multiples of 500 up to 6000");
  run->add_option("--conditions", flags.conditions, "comma list of plain,rotated");
  run->add_option("--jobs", flags.jobs, "worker threads (0 = all cores)");

  auto* rep = app.add_subcommand("report", "print report.csv as tables and cross-check predictions");
  common(rep);

  CLI11_PARSE(app, argc, argv);

  RunConfig cfg;
  try {
    cfg = resolve(flags);
    if (run->parsed()) cfg.plan().validate();
  } catch (const std::exception& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(cfg);
    if (pre->parsed()) return cmd_preprocess(cfg);
    if (run->parsed()) return cmd_run(cfg);
    if (rep->parsed()) return cmd_report(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

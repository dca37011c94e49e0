#pragma once

// Experiment protocol: per (family x condition x T) a fresh k-fold model
// selection, per (baseline x condition x T) threshold evaluation, collected
// into one report.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "trajclass/data.hpp"
#include "trajclass/entropy.hpp"
#include "trajclass/nn/train.hpp"
#include "trajclass/rng.hpp"
#include "trajclass/sim.hpp"

namespace trajclass {

enum class Condition { Plain, Rotated };

inline constexpr Condition kAllConditions[] = {Condition::Plain, Condition::Rotated};

inline std::string_view to_string(Condition c) { return c == Condition::Plain ? "plain" : "rotated"; }

inline Condition parse_condition(std::string_view s) {
  if (s == "plain") return Condition::Plain;
  if (s == "rotated") return Condition::Rotated;
  throw std::invalid_argument("unknown condition '" + std::string(s) + "'");
}

/// Train/test sets for both conditions. Rotated sets are the plain sets with
/// one random rotation per trajectory, in the same order.
struct ExperimentData {
  Dataset train_plain, test_plain, train_rotated, test_rotated;

  const Dataset& train(Condition c) const { return c == Condition::Plain ? train_plain : train_rotated; }
  const Dataset& test(Condition c) const { return c == Condition::Plain ? test_plain : test_rotated; }
};

/// Sub-stream seeds, all derived from one master seed.
struct SeedPlan {
  std::uint64_t master = 0;

  std::uint64_t sim() const { return derive_seed(master, "sim"); }
  std::uint64_t split() const { return derive_seed(master, "split"); }
  std::uint64_t rotation() const { return derive_seed(master, "rotation"); }
  std::uint64_t folds() const { return derive_seed(master, "folds"); }
  std::uint64_t init(std::size_t fold) const { return derive_seed(master, "init", fold); }
  std::uint64_t shuffle(std::size_t fold) const { return derive_seed(master, "shuffle", fold); }
};

/// Test split then rotation of a raw dataset.
inline ExperimentData preprocess(const Dataset& raw, const SplitSpec& split, const SeedPlan& seeds) {
  ExperimentData d;
  Rng split_rng(seeds.split());
  std::tie(d.train_plain, d.test_plain) = split_test(raw, split, split_rng);
  Rng rot_rng(seeds.rotation());
  d.train_rotated = augment_rotations(d.train_plain, rot_rng);
  d.test_rotated = augment_rotations(d.test_plain, rot_rng);
  return d;
}

inline Dataset simulate_raw(SimConfig cfg, std::size_t n_per_class, const SeedPlan& seeds) {
  cfg.seed = seeds.sim();
  return to_dataset(generate_dataset(cfg, n_per_class));
}

struct FamilySetup {
  nn::ModelSpec spec;
  nn::TrainConfig train;

  static FamilySetup defaults(nn::Family f) { return {nn::ModelSpec::defaults(f), nn::TrainConfig::defaults(f)}; }
};

struct ExperimentPlan {
  std::vector<FamilySetup> families;
  std::vector<ThresholdMethod> baselines;
  std::vector<std::size_t> timesteps;
  std::vector<Condition> conditions{Condition::Plain, Condition::Rotated};
  EntropyConfig entropy{};
  std::size_t folds = 5;
  bool normalize_inputs = true;  // false feeds raw grid coordinates to the networks
  SeedPlan seeds{};
  std::size_t jobs = 1;

  static ExperimentPlan full() {
    ExperimentPlan p;
    for (auto f : nn::kAllFamilies) p.families.push_back(FamilySetup::defaults(f));
    p.baselines.assign(std::begin(kAllThresholdMethods), std::end(kAllThresholdMethods));
    for (auto g : TimestepGroup::all()) p.timesteps.push_back(g.value());
    return p;
  }

  void validate() const {
    if (families.empty() && baselines.empty()) throw std::invalid_argument("plan has no families and no baselines");
    if (timesteps.empty()) throw std::invalid_argument("plan has no timestep groups");
    if (conditions.empty()) throw std::invalid_argument("plan has no conditions");
    if (!std::is_sorted(timesteps.begin(), timesteps.end()) ||
        std::adjacent_find(timesteps.begin(), timesteps.end()) != timesteps.end()) {
      throw std::invalid_argument("timestep groups must be strictly ascending");
    }
    for (auto t : timesteps) (void)TimestepGroup(t);
    if (folds < 2) throw std::invalid_argument("need at least 2 folds");
    entropy.validate();
  }
};

struct ReportRow {
  std::string method;
  Condition condition = Condition::Plain;
  std::size_t timesteps = 0;
  double accuracy = 0.0;
  std::vector<double> fold_val_accuracies;  // empty for baselines
  int chosen_fold = -1;                     // -1 for baselines
  std::vector<std::size_t> test_ids;
  std::vector<int> test_labels;
  std::vector<int> predictions;

  bool is_baseline() const { return chosen_fold < 0; }
};

struct ThresholdRow {
  Condition condition = Condition::Plain;
  EntropyThresholds thresholds;
};

struct AccuracyReport {
  std::vector<ReportRow> rows;
  std::vector<ThresholdRow> thresholds;
  std::vector<double> cell_seconds;  // wall time per neural cell, row order

  const ReportRow* find(std::string_view method, Condition c, std::size_t t) const {
    for (const auto& r : rows) {
      if (r.method == method && r.condition == c && r.timesteps == t) return &r;
    }
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// k-fold selection

struct FoldOutcome {
  double val_accuracy = 0.0;
  std::vector<int> test_predictions;
};

/// Index of the best validation accuracy; ties go to the lowest fold.
inline std::size_t select_fold(std::span<const double> val_accuracies) {
  if (val_accuracies.empty()) throw std::invalid_argument("select_fold: no folds");
  std::size_t best = 0;
  for (std::size_t i = 1; i < val_accuracies.size(); ++i) {
    if (val_accuracies[i] > val_accuracies[best]) best = i;
  }
  return best;
}

namespace detail {

inline Dataset prepare_prefix(const Dataset& data, std::size_t t, bool normalize_inputs) {
  Dataset out;
  out.reserve(data.size());
  for (const auto& traj : data) {
    auto cut = truncate(traj, t);
    out.push_back(normalize_inputs ? normalize(std::move(cut)) : std::move(cut));
  }
  return out;
}

inline void check_disjoint(const Dataset& train, const Dataset& test) {
  std::set<std::size_t> ids;
  for (const auto& t : train) ids.insert(t.id);
  for (const auto& t : test) {
    if (ids.count(t.id)) throw std::logic_error("trajectory " + std::to_string(t.id) + " is in both train and test");
  }
}

/// Runs `n` independent tasks on at most `jobs` threads.
template <typename Task>
void parallel_for(std::size_t n, std::size_t jobs, Task task) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t j = 0; j < jobs; ++j) {
    pool.emplace_back([&] {
      for (;;) {
        const auto i = next.fetch_add(1);
        if (i >= n) return;
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

struct KFoldResult {
  nn::Model model;
  std::vector<double> fold_val_accuracies;
  std::size_t chosen_fold = 0;
};

/// Trains one model per fold and keeps the best on validation accuracy.
/// `train_set` must already be truncated to T (and normalised).
inline KFoldResult run_kfold(const Dataset& train_set, const FamilySetup& setup, std::size_t t,
                             std::size_t folds, const SeedPlan& seeds) {
  Rng fold_rng(seeds.folds());
  const auto parts = kfold_split(train_set, folds, fold_rng);
  std::vector<double> accs;
  std::vector<nn::Model> models;
  for (std::size_t f = 0; f < parts.size(); ++f) {
    auto spec = setup.spec;
    spec.seed = seeds.init(f);
    auto cfg = setup.train;
    cfg.seed = seeds.shuffle(f);
    auto res = nn::train(nn::build_model(spec, t), select(train_set, parts[f].train),
                         select(train_set, parts[f].val), cfg);
    accs.push_back(res.history.empty() ? nn::evaluate_accuracy(res.model, select(train_set, parts[f].val))
                                       : res.history.back().val_accuracy);
    models.push_back(std::move(res.model));
  }
  const auto best = select_fold(accs);
  return {std::move(models[best]), accs, best};
}

// ---------------------------------------------------------------------------
// Full experiment

inline AccuracyReport run_experiment(const ExperimentPlan& plan, const ExperimentData& data) {
  plan.validate();
  for (auto c : plan.conditions) {
    if (data.train(c).empty() || data.test(c).empty()) {
      throw std::invalid_argument("missing dataset for condition " + std::string(to_string(c)));
    }
    detail::check_disjoint(data.train(c), data.test(c));
  }

  // Neural cells: one task per (family, condition, T, fold).
  struct Cell {
    std::size_t family, cond, t;
  };
  std::vector<Cell> cells;
  for (std::size_t c = 0; c < plan.conditions.size(); ++c) {
    for (std::size_t f = 0; f < plan.families.size(); ++f) {
      for (std::size_t t = 0; t < plan.timesteps.size(); ++t) cells.push_back({f, c, t});
    }
  }
  Rng fold_rng(plan.seeds.folds());
  const std::size_t n_train = plan.conditions.empty() ? 0 : data.train(plan.conditions[0]).size();
  for (auto c : plan.conditions) {
    if (data.train(c).size() != n_train) throw std::invalid_argument("train sets differ in size across conditions");
  }
  const auto parts = cells.empty() ? std::vector<Fold>{} : kfold_split(n_train, plan.folds, fold_rng);

  std::vector<FoldOutcome> outcomes(cells.size() * plan.folds);
  std::vector<double> seconds(outcomes.size(), 0.0);
  detail::parallel_for(outcomes.size(), plan.jobs, [&](std::size_t task) {
    const auto& cell = cells[task / plan.folds];
    const std::size_t f = task % plan.folds;
    const auto cond = plan.conditions[cell.cond];
    const auto t = plan.timesteps[cell.t];
    const auto& setup = plan.families[cell.family];
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto train_t = detail::prepare_prefix(data.train(cond), t, plan.normalize_inputs);
      const auto test_t = detail::prepare_prefix(data.test(cond), t, plan.normalize_inputs);
      auto spec = setup.spec;
      spec.seed = plan.seeds.init(f);
      auto cfg = setup.train;
      cfg.seed = plan.seeds.shuffle(f);
      const auto val_set = select(train_t, parts[f].val);
      auto res = nn::train(nn::build_model(spec, t), select(train_t, parts[f].train), val_set, cfg);
      FoldOutcome out;
      out.val_accuracy =
          res.history.empty() ? nn::evaluate_accuracy(res.model, val_set) : res.history.back().val_accuracy;
      const auto inputs = nn::prepare_inputs(test_t, t, spec.input_stride);
      out.test_predictions = nn::predict_all(res.model, inputs);
      outcomes[task] = std::move(out);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("training ") + std::string(nn::to_string(setup.spec.family)) + " " +
                               std::string(to_string(cond)) + " T=" + std::to_string(t) + " fold " +
                               std::to_string(f) + ": " + e.what());
    }
    seconds[task] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });

  AccuracyReport report;
  for (std::size_t c = 0; c < plan.conditions.size(); ++c) {
    const auto cond = plan.conditions[c];
    const auto& test = data.test(cond);
    std::vector<std::size_t> ids;
    std::vector<int> labels;
    for (const auto& tr : test) {
      ids.push_back(tr.id);
      labels.push_back(tr.label);
    }

    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (cells[k].cond != c) continue;
      ReportRow row;
      row.method = std::string(nn::to_string(plan.families[cells[k].family].spec.family));
      row.condition = cond;
      row.timesteps = plan.timesteps[cells[k].t];
      double secs = 0.0;
      for (std::size_t f = 0; f < plan.folds; ++f) {
        row.fold_val_accuracies.push_back(outcomes[k * plan.folds + f].val_accuracy);
        secs += seconds[k * plan.folds + f];
      }
      const auto best = select_fold(row.fold_val_accuracies);
      row.chosen_fold = static_cast<int>(best);
      row.predictions = outcomes[k * plan.folds + best].test_predictions;
      row.test_ids = ids;
      row.test_labels = labels;
      row.accuracy = nn::accuracy(row.predictions, labels);
      report.rows.push_back(std::move(row));
      report.cell_seconds.push_back(secs);
    }

    if (plan.baselines.empty()) continue;
    // Thresholds come from full-length train trajectories of this condition.
    const auto& train = data.train(cond);
    const auto full = train.front().size();
    const auto entropies = dataset_entropies(train, plan.entropy, full);
    std::vector<int> train_labels;
    for (const auto& tr : train) train_labels.push_back(tr.label);
    std::vector<std::vector<double>> test_entropies;
    for (auto t : plan.timesteps) test_entropies.push_back(dataset_entropies(test, plan.entropy, t));

    for (auto method : plan.baselines) {
      const auto thr = fit_thresholds(method, entropies, train_labels);
      report.thresholds.push_back({cond, thr});
      for (std::size_t ti = 0; ti < plan.timesteps.size(); ++ti) {
        ReportRow row;
        row.method = std::string(to_string(method));
        row.condition = cond;
        row.timesteps = plan.timesteps[ti];
        row.test_ids = ids;
        row.test_labels = labels;
        for (double h : test_entropies[ti]) row.predictions.push_back(classify(h, thr));
        row.accuracy = nn::accuracy(row.predictions, labels);
        report.rows.push_back(std::move(row));
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Report files
//
//   accuracy_plain.csv, accuracy_rotated.csv   method,T,accuracy
//   report.csv      method,condition,T,accuracy,chosen_fold,fold_val_accuracies
//   plot_<condition>.tsv   T then one column per method
//   predictions.csv method,condition,T,traj_id,label,predicted
//   thresholds.csv  condition,method,t1,t2,t3,sigma1,sigma2,sigma3

inline std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline void write_accuracy_csv(const AccuracyReport& r, Condition c, std::ostream& os) {
  os << "method,T,accuracy\n";
  for (const auto& row : r.rows) {
    if (row.condition == c) os << row.method << ',' << row.timesteps << ',' << fmt4(row.accuracy) << '\n';
  }
}

inline void write_report_csv(const AccuracyReport& r, std::ostream& os) {
  os << "method,condition,T,accuracy,chosen_fold,fold_val_accuracies\n";
  for (const auto& row : r.rows) {
    os << row.method << ',' << to_string(row.condition) << ',' << row.timesteps << ',' << fmt4(row.accuracy) << ','
       << row.chosen_fold << ',';
    for (std::size_t i = 0; i < row.fold_val_accuracies.size(); ++i) {
      os << (i ? ";" : "") << fmt4(row.fold_val_accuracies[i]);
    }
    os << '\n';
  }
}

inline void write_plot_table(const AccuracyReport& r, Condition c, std::ostream& os) {
  std::vector<std::string> methods;
  std::vector<std::size_t> ts;
  for (const auto& row : r.rows) {
    if (row.condition != c) continue;
    if (std::find(methods.begin(), methods.end(), row.method) == methods.end()) methods.push_back(row.method);
    if (std::find(ts.begin(), ts.end(), row.timesteps) == ts.end()) ts.push_back(row.timesteps);
  }
  std::sort(ts.begin(), ts.end());
  os << "T";
  for (const auto& m : methods) os << '\t' << m;
  os << '\n';
  for (auto t : ts) {
    os << t;
    for (const auto& m : methods) {
      const auto* row = r.find(m, c, t);
      os << '\t' << (row ? fmt4(row->accuracy) : "NA");
    }
    os << '\n';
  }
}

inline void write_predictions_csv(const AccuracyReport& r, std::ostream& os) {
  os << "method,condition,T,traj_id,label,predicted\n";
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.predictions.size(); ++i) {
      os << row.method << ',' << to_string(row.condition) << ',' << row.timesteps << ',' << row.test_ids[i] << ','
         << row.test_labels[i] << ',' << row.predictions[i] << '\n';
    }
  }
}

inline void write_thresholds_table(const AccuracyReport& r, std::ostream& os) {
  os << "condition,method,t1,t2,t3,sigma1,sigma2,sigma3\n";
  char buf[256];
  for (const auto& tr : r.thresholds) {
    const auto& t = tr.thresholds;
    std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", std::string(to_string(tr.condition)).c_str(),
                  std::string(to_string(t.method)).c_str(), t.t[0], t.t[1], t.t[2], t.sigma[0], t.sigma[1],
                  t.sigma[2]);
    os << buf;
  }
}

namespace detail {

template <typename Writer>
void write_file(const std::filesystem::path& path, Writer w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  w(os);
  os.flush();
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace detail

/// Writes every report file into `dir` (created if needed). Returns the
/// paths written.
inline std::vector<std::filesystem::path> emit_report(const AccuracyReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::string& name, auto writer) {
    detail::write_file(dir / name, writer);
    written.push_back(dir / name);
  };
  for (auto c : kAllConditions) {
    put("accuracy_" + std::string(to_string(c)) + ".csv", [&](std::ostream& os) { write_accuracy_csv(r, c, os); });
  }
  put("report.csv", [&](std::ostream& os) { write_report_csv(r, os); });
  for (auto c : kAllConditions) {
    put("plot_" + std::string(to_string(c)) + ".tsv", [&](std::ostream& os) { write_plot_table(r, c, os); });
  }
  put("predictions.csv", [&](std::ostream& os) { write_predictions_csv(r, os); });
  put("thresholds.csv", [&](std::ostream& os) { write_thresholds_table(r, os); });
  return written;
}

/// Reads report.csv back. Accuracies carry the 4 decimals that were written.
inline std::vector<ReportRow> read_report_csv(std::istream& is) {
  std::string line;
  std::size_t row_no = 1;
  if (!std::getline(is, line) || line != "method,condition,T,accuracy,chosen_fold,fold_val_accuracies") {
    throw ParseError(row_no, "unexpected report header");
  }
  std::vector<ReportRow> rows;
  while (std::getline(is, line)) {
    ++row_no;
    if (line.empty()) continue;
    const auto f = detail::split_fields(line);
    if (f.size() != 6) throw ParseError(row_no, "expected 6 fields");
    ReportRow r;
    r.method = std::string(f[0]);
    try {
      r.condition = parse_condition(f[1]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(row_no, e.what());
    }
    r.timesteps = detail::parse_field<std::size_t>(f[2], row_no, "T");
    r.accuracy = detail::parse_field<double>(f[3], row_no, "accuracy");
    r.chosen_fold = detail::parse_field<int>(f[4], row_no, "chosen_fold");
    std::string_view folds = f[5];
    while (!folds.empty()) {
      const auto semi = folds.find(';');
      r.fold_val_accuracies.push_back(detail::parse_field<double>(folds.substr(0, semi), row_no, "fold accuracy"));
      if (semi == std::string_view::npos) break;
      folds.remove_prefix(semi + 1);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Accuracy per (method, condition, T) recomputed from predictions.csv.
inline std::map<std::tuple<std::string, std::string, std::size_t>, double> accuracy_from_predictions(
    std::istream& is) {
  std::string line;
  std::getline(is, line);
  std::map<std::tuple<std::string, std::string, std::size_t>, std::pair<std::size_t, std::size_t>> counts;
  std::size_t row_no = 1;
  while (std::getline(is, line)) {
    ++row_no;
    if (line.empty()) continue;
    const auto f = detail::split_fields(line);
    if (f.size() != 6) throw ParseError(row_no, "expected 6 fields");
    auto& c = counts[{std::string(f[0]), std::string(f[1]), detail::parse_field<std::size_t>(f[2], row_no, "T")}];
    ++c.second;
    c.first += detail::parse_field<int>(f[4], row_no, "label") == detail::parse_field<int>(f[5], row_no, "predicted");
  }
  std::map<std::tuple<std::string, std::string, std::size_t>, double> out;
  for (const auto& [k, c] : counts) out[k] = static_cast<double>(c.first) / static_cast<double>(c.second);
  return out;
}

}  // namespace trajclass

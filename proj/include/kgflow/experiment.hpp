#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kgflow/clinical.hpp"
#include "kgflow/datagen.hpp"
#include "kgflow/evaluation.hpp"
#include "kgflow/training.hpp"

namespace kgflow {

enum class ExperimentKind { Connectivity, EmbeddingSweep, LayerSweep, NegativeAblation };

inline std::string_view experiment_kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Connectivity: return "connectivity";
    case ExperimentKind::EmbeddingSweep: return "embedding_sweep";
    case ExperimentKind::LayerSweep: return "layer_sweep";
    case ExperimentKind::NegativeAblation: return "negative_ablation";
  }
  return "unknown";
}

inline ExperimentKind parse_experiment_kind(std::string_view name) {
  for (auto k : {ExperimentKind::Connectivity, ExperimentKind::EmbeddingSweep, ExperimentKind::LayerSweep,
                 ExperimentKind::NegativeAblation}) {
    if (experiment_kind_name(k) == name) return k;
  }
  throw Error("unknown experiment kind '" + std::string(name) +
              "' (expected connectivity, embedding_sweep, layer_sweep or negative_ablation)");
}

// One configuration of a sweep. `series` and `x` locate it in plot data.
struct ExperimentCell {
  std::string label;
  std::string series;
  std::string x;
  TrainConfig train;
  bool negatives = true;
  std::size_t index = 0;  // position in the experiment's full cell list
};

inline std::vector<ExperimentCell> experiment_cells(ExperimentKind kind, const TrainConfig& base) {
  std::vector<ExperimentCell> cells;
  switch (kind) {
    case ExperimentKind::Connectivity:
      for (const char* p : {"C1", "C2", "C3", "C4"}) {
        TrainConfig t = base;
        t.policy = p;
        t.policy_text.clear();
        cells.push_back({p, "connectivity", p, t, true});
      }
      break;
    case ExperimentKind::EmbeddingSweep:
      for (std::size_t layers : {2, 3}) {
        for (std::size_t dim : {1, 2, 3, 5, 8, 10}) {
          TrainConfig t = base;
          t.dim = dim;
          t.layers = layers;
          cells.push_back({"d=" + std::to_string(dim) + ";L=" + std::to_string(layers),
                           "L=" + std::to_string(layers), std::to_string(dim), t, true});
        }
      }
      break;
    case ExperimentKind::LayerSweep:
      for (std::size_t dim : {5, 10}) {
        for (std::size_t layers = 1; layers <= 8; ++layers) {
          TrainConfig t = base;
          t.dim = dim;
          t.layers = layers;
          cells.push_back({"L=" + std::to_string(layers) + ";d=" + std::to_string(dim),
                           "d=" + std::to_string(dim), std::to_string(layers), t, true});
        }
      }
      break;
    case ExperimentKind::NegativeAblation:
      cells.push_back({"with_negatives", "negatives", "with", base, true});
      cells.push_back({"without_negatives", "negatives", "without", base, false});
      break;
  }
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i].index = i;
  return cells;
}

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::Connectivity;
  TrainConfig train;
  GenConfig gen;
  std::size_t realizations = 1;
  std::uint64_t seed = 1;
  std::size_t train_patients = 50;
  std::size_t test_patients = 10;
  // When set, realizations resample this graph instead of generating data.
  const KnowledgeGraph* dataset = nullptr;
  std::size_t threads = 1;
  // Restricts the run to cells with these labels (all cells when empty).
  std::vector<std::string> only_cells;
};

inline std::vector<ExperimentCell> selected_cells(const ExperimentSpec& spec) {
  auto cells = experiment_cells(spec.kind, spec.train);
  if (spec.only_cells.empty()) return cells;
  std::vector<ExperimentCell> out;
  for (const auto& label : spec.only_cells) {
    auto it = std::find_if(cells.begin(), cells.end(), [&](const auto& c) { return c.label == label; });
    if (it == cells.end()) throw Error("experiment has no cell '" + label + "'");
    out.push_back(*it);
  }
  return out;
}

inline std::string config_fingerprint(const ExperimentCell& cell, const GenConfig& gen) {
  std::ostringstream s;
  const auto& t = cell.train;
  s << cell.label << '|' << t.dim << '|' << t.layers << '|' << t.epochs << '|' << t.adam.weight_decay << '|' << t.adam.decay_embeddings << '|'
    << t.policy << '|' << t.policy_text << '|' << cell.negatives << '|' << gen.patients << '|'
    << gen.encounters_per_patient << '|' << gen.p_sig << '|' << gen.items_min << '|' << gen.items_max;
  for (const auto& [e, lr] : t.schedule.phases) s << '|' << e << ':' << lr;
  for (const auto& r : t.loss_relations) s << "|l:" << r;
  for (const auto& r : t.frozen_types) s << "|f:" << r;
  for (double p : gen.prior) s << "|p:" << p;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(s.str())));
  return buf;
}

struct RealizationResult {
  std::size_t cell = 0;
  std::size_t realization = 0;
  EvalReport report;
  double final_loss = 0.0;
};

// Seeds: the data sample and split depend on (master, realization) only, so
// every cell of one realization sees the same patients; the model seed also
// depends on the cell.
inline RealizationResult run_realization(const ExperimentSpec& spec, const std::vector<ExperimentCell>& cells,
                                         std::size_t cell_index, std::size_t realization) {
  const ExperimentCell& cell = cells.at(cell_index);
  KnowledgeGraph kg;
  if (spec.dataset) {
    kg = *spec.dataset;
  } else {
    GenConfig gen = spec.gen;
    gen.patients = std::max(gen.patients, spec.train_patients + spec.test_patients);
    gen.seed = derive_seed(spec.seed, realization, 0xda7aULL);
    kg = from_rows(generate_dataset(gen));
  }
  ensure_care_action_nodes(kg);
  if (cell.negatives) {
    synthesize_negative_careaction_edges(kg);
  } else {
    kg = drop_negative_edges(kg);
  }
  const PatientSplit split = split_by_patients(kg, spec.train_patients, spec.test_patients,
                                               derive_seed(spec.seed, realization, 0x5b1170ULL));
  TrainConfig cfg = cell.train;
  cfg.seed = derive_seed(spec.seed, realization, cell.index);
  const TrainResult trained = train(split.train, cfg);
  const auto preds = predict_care_action(trained.params, split.train, split.test, cfg);
  RealizationResult r{cell_index, realization, evaluate_predictions(preds), trained.history.losses.back()};
  r.report.fingerprint = config_fingerprint(cell, spec.gen);
  return r;
}

// ---------------------------------------------------------------------------
// Aggregated report
// ---------------------------------------------------------------------------

// One CSV row: a (cell, class) pair, class being a care action or "average".
struct ReportRow {
  std::string cell;
  std::string series;
  std::string x;
  std::string cls;
  std::size_t realizations = 0;
  std::size_t correct = 0;
  std::size_t total = 0;
  double mean = 0.0;
  double stddev = 0.0;
  std::string fingerprint;

  bool operator==(const ReportRow& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return cell == o.cell && series == o.series && x == o.x && cls == o.cls &&
           realizations == o.realizations && correct == o.correct && total == o.total &&
           same(mean, o.mean) && same(stddev, o.stddev) && fingerprint == o.fingerprint;
  }
};

struct ExperimentReport {
  std::string kind;
  std::vector<ReportRow> rows;
  std::vector<RealizationResult> realizations;

  // Row of `cell` for `cls` ("average" for the micro accuracy).
  const ReportRow& row(const std::string& cell, const std::string& cls = "average") const {
    for (const auto& r : rows) {
      if (r.cell == cell && r.cls == cls) return r;
    }
    throw Error("report has no row for " + cell + "/" + cls);
  }
};

namespace detail {

// Mean and sample standard deviation of the finite values.
inline std::pair<double, double> mean_stddev(const std::vector<double>& xs) {
  std::vector<double> v;
  for (double x : xs) {
    if (!std::isnan(x)) v.push_back(x);
  }
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace detail

inline ExperimentReport aggregate(const ExperimentSpec& spec, const std::vector<ExperimentCell>& cells,
                                  std::vector<RealizationResult> results) {
  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) {
    return std::tie(a.cell, a.realization) < std::tie(b.cell, b.realization);
  });
  ExperimentReport report{std::string(experiment_kind_name(spec.kind)), {}, std::move(results)};
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<const RealizationResult*> mine;
    for (const auto& r : report.realizations) {
      if (r.cell == c) mine.push_back(&r);
    }
    const std::string fp = config_fingerprint(cells[c], spec.gen);
    auto emit = [&](const std::string& cls, auto&& value, auto&& counts) {
      std::vector<double> xs;
      std::size_t correct = 0, total = 0;
      for (const auto* r : mine) {
        xs.push_back(value(r->report));
        const auto [cc, tt] = counts(r->report);
        correct += cc;
        total += tt;
      }
      const auto [mean, sd] = detail::mean_stddev(xs);
      report.rows.push_back({cells[c].label, cells[c].series, cells[c].x, cls, mine.size(), correct, total,
                             mean, sd, fp});
    };
    for (CareAction a : kCareActions) {
      const auto k = index_of(a);
      emit(std::string(care_action_name(a)), [a](const EvalReport& e) { return e.accuracy(a); },
           [k](const EvalReport& e) { return std::pair{e.correct[k], e.total[k]}; });
    }
    emit("average", [](const EvalReport& e) { return e.micro(); },
         [](const EvalReport& e) { return std::pair{e.correct_sum(), e.total_sum()}; });
  }
  return report;
}

// Runs every (cell, realization) job, optionally on several threads. Results
// are stored by job index, so the report does not depend on scheduling.
inline ExperimentReport run_experiment(const ExperimentSpec& spec) {
  if (spec.realizations < 1) throw Error("experiment needs at least one realization");
  const auto cells = selected_cells(spec);
  const std::size_t jobs = cells.size() * spec.realizations;
  std::vector<RealizationResult> results(jobs);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs;) {
      try {
        results[j] = run_realization(spec, cells, j / spec.realizations, j % spec.realizations);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = jobs;
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(spec.threads, jobs));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return aggregate(spec, cells, std::move(results));
}

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

inline constexpr std::string_view kReportHeader =
    "cell,series,x,class,realizations,correct,total,mean,stddev,fingerprint";

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << kReportHeader << '\n';
  for (const auto& r : rows) {
    csv::write_row(out, {r.cell, r.series, r.x, r.cls, std::to_string(r.realizations), std::to_string(r.correct),
                         std::to_string(r.total), format_double(r.mean), format_double(r.stddev), r.fingerprint});
  }
}

// Plot data: one row per cell with its average accuracy.
inline void write_plot_data(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << "series,x,mean,stddev\n";
  for (const auto& r : rows) {
    if (r.cls != "average") continue;
    csv::write_row(out, {r.series, r.x, format_double(r.mean), format_double(r.stddev)});
  }
}

inline std::filesystem::path plot_data_path(const std::filesystem::path& report_path) {
  auto p = report_path;
  p.replace_extension(".plot.csv");
  return p;
}

// Writes `path` and its companion plot-data file.
inline void write_report(const ExperimentReport& report, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write report '" + path.string() + "'");
    write_report_csv(out, report.rows);
    if (!out) throw Error("write failed for '" + path.string() + "'");
  }
  const auto plot = plot_data_path(path);
  std::ofstream out(plot, std::ios::binary);
  if (!out) throw Error("cannot write plot data '" + plot.string() + "'");
  write_plot_data(out, report.rows);
  if (!out) throw Error("write failed for '" + plot.string() + "'");
}

inline std::vector<ReportRow> read_report_csv(std::istream& in) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) throw Error("report: missing header");
  std::vector<ReportRow> rows;
  while (auto f = reader.next()) {
    if (f->size() != 10) throw Error("report line " + std::to_string(reader.line()) + ": expected 10 fields");
    auto to_size = [](const std::string& s) { return static_cast<std::size_t>(std::stoull(s)); };
    rows.push_back({(*f)[0], (*f)[1], (*f)[2], (*f)[3], to_size((*f)[4]), to_size((*f)[5]), to_size((*f)[6]),
                    std::strtod((*f)[7].c_str(), nullptr), std::strtod((*f)[8].c_str(), nullptr), (*f)[9]});
  }
  return rows;
}

inline std::vector<ReportRow> read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read report '" + path.string() + "'");
  return read_report_csv(in);
}

}  // namespace kgflow

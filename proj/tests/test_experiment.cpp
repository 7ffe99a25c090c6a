#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "test_support.hpp"

using namespace kgflow;

namespace {

std::vector<Prediction> predictions_from_counts(const std::array<std::size_t, kCareActionCount>& correct,
                                                const std::array<std::size_t, kCareActionCount>& total) {
  std::vector<Prediction> out;
  for (std::size_t k = 0; k < kCareActionCount; ++k) {
    for (std::size_t i = 0; i < total[k]; ++i) {
      Prediction p;
      p.encounter = "e" + std::to_string(k) + "_" + std::to_string(i);
      p.truth = kCareActions[k];
      p.predicted = i < correct[k] ? kCareActions[k] : kCareActions[(k + 1) % kCareActionCount];
      out.push_back(p);
    }
  }
  return out;
}

ExperimentSpec small_spec(ExperimentKind kind) {
  ExperimentSpec spec;
  spec.kind = kind;
  spec.gen.patients = 8;
  spec.gen.encounters_per_patient = 4;
  spec.train_patients = 6;
  spec.test_patients = 2;
  spec.train.epochs = 30;
  spec.seed = 77;
  return spec;
}

std::string csv_of(const ExperimentReport& r) {
  std::ostringstream out;
  write_report_csv(out, r.rows);
  return out.str();
}

}  // namespace

TEST(Evaluate, AllCorrect) {
  const auto preds = predictions_from_counts({3, 2, 4, 1, 5}, {3, 2, 4, 1, 5});
  const EvalReport r = evaluate_predictions(preds);
  EXPECT_EQ(r.micro(), 1.0);
  for (CareAction a : kCareActions) EXPECT_EQ(r.accuracy(a), 1.0);
}

// Per-class accuracies of the C1 row with skewed supports (wellness 200,
// inpatient 40, outpatient 50, ambulatory 100, emergency 12).
TEST(Evaluate, SkewedSupportsGiveMicroAverage) {
  const auto preds = predictions_from_counts({146, 0, 0, 27, 0}, {200, 40, 50, 100, 12});
  const EvalReport r = evaluate_predictions(preds);
  EXPECT_NEAR(r.accuracy(CareAction::Wellness), 0.73, 1e-12);
  EXPECT_NEAR(r.accuracy(CareAction::Ambulatory), 0.27, 1e-12);
  EXPECT_EQ(r.correct_sum(), 173u);
  EXPECT_EQ(r.total_sum(), 402u);
  EXPECT_NEAR(r.micro(), 0.43, 0.005);
}

TEST(Evaluate, RandomConfusionsMatchCounting) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    std::array<std::size_t, kCareActionCount> total{}, correct{};
    for (std::size_t k = 0; k < kCareActionCount; ++k) {
      total[k] = rng.below(30);
      correct[k] = total[k] ? rng.below(total[k] + 1) : 0;
    }
    const EvalReport r = evaluate_predictions(predictions_from_counts(correct, total));
    std::size_t sc = 0, st = 0;
    double weighted = 0.0;
    for (std::size_t k = 0; k < kCareActionCount; ++k) {
      sc += correct[k];
      st += total[k];
      if (total[k]) weighted += r.accuracy(kCareActions[k]) * static_cast<double>(total[k]);
    }
    EXPECT_EQ(r.correct, correct);
    EXPECT_EQ(r.total, total);
    if (st == 0) {
      EXPECT_TRUE(std::isnan(r.micro()));
    } else {
      EXPECT_EQ(r.micro(), static_cast<double>(sc) / static_cast<double>(st));
      EXPECT_NEAR(r.micro(), weighted / static_cast<double>(st), 1e-12);
    }
  }
}

TEST(Evaluate, MissingTruth) {
  Prediction p;
  p.encounter = "x";
  EXPECT_THROW(evaluate_predictions(std::vector<Prediction>{p}, std::map<std::string, CareAction>{}), Error);
}

TEST(Experiment, CellLists) {
  const TrainConfig base;
  EXPECT_EQ(experiment_cells(ExperimentKind::Connectivity, base).size(), 4u);
  EXPECT_EQ(experiment_cells(ExperimentKind::EmbeddingSweep, base).size(), 12u);
  EXPECT_EQ(experiment_cells(ExperimentKind::LayerSweep, base).size(), 16u);
  EXPECT_EQ(experiment_cells(ExperimentKind::NegativeAblation, base).size(), 2u);
  EXPECT_EQ(parse_experiment_kind("layer_sweep"), ExperimentKind::LayerSweep);
  EXPECT_THROW(parse_experiment_kind("bogus"), Error);
  ExperimentSpec spec;
  spec.only_cells = {"C9"};
  EXPECT_THROW(selected_cells(spec), Error);
  spec.realizations = 0;
  EXPECT_THROW(run_experiment(spec), Error);
}

TEST(Experiment, SeparableC4IsPerfect) {
  ExperimentSpec spec;
  spec.gen.p_sig = 1.0;
  spec.gen.signature_observations = 1;
  spec.gen.signature_conditions = 0;
  spec.only_cells = {"C4"};
  const ExperimentReport r = run_experiment(spec);
  ASSERT_EQ(r.rows.size(), kCareActionCount + 1);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.cell, "C4");
    EXPECT_EQ(row.mean, 1.0) << row.cls;
    EXPECT_GT(row.total, 0u) << row.cls;
  }
}

TEST(Experiment, RealizationsConcatenate) {
  ExperimentSpec two = small_spec(ExperimentKind::NegativeAblation);
  two.realizations = 2;
  const ExperimentReport both = run_experiment(two);
  const auto cells = selected_cells(two);
  ASSERT_EQ(both.realizations.size(), 4u);
  for (const auto& r : both.realizations) {
    const RealizationResult single = run_realization(two, cells, r.cell, r.realization);
    EXPECT_EQ(single.report.correct, r.report.correct);
    EXPECT_EQ(single.report.total, r.report.total);
    EXPECT_EQ(single.final_loss, r.final_loss);
  }
  ExperimentSpec one = two;
  one.realizations = 1;
  const ExperimentReport first = run_experiment(one);
  for (const auto& r : first.realizations) {
    const auto it = std::find_if(both.realizations.begin(), both.realizations.end(), [&](const auto& b) {
      return b.cell == r.cell && b.realization == r.realization;
    });
    ASSERT_NE(it, both.realizations.end());
    EXPECT_EQ(it->report.correct, r.report.correct);
  }

  // A cell keeps its seed when run on its own.
  ExperimentSpec only = two;
  only.only_cells = {"without_negatives"};
  const ExperimentReport alone = run_experiment(only);
  EXPECT_EQ(alone.row("without_negatives").mean, both.row("without_negatives").mean);
}

TEST(Experiment, ThreadCountDoesNotChangeReport) {
  ExperimentSpec spec = small_spec(ExperimentKind::Connectivity);
  spec.realizations = 2;
  spec.threads = 1;
  const std::string serial = csv_of(run_experiment(spec));
  spec.threads = 3;
  EXPECT_EQ(csv_of(run_experiment(spec)), serial);
}

TEST(Experiment, AggregateMeanAndSampleStddev) {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::NegativeAblation;
  const auto cells = experiment_cells(spec.kind, spec.train);
  std::vector<RealizationResult> results;
  const double micro[3] = {0.5, 0.75, 1.0};
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      EvalReport e;
      e.total[0] = 4;
      e.correct[0] = static_cast<std::size_t>(micro[r] * 4);
      results.push_back({c, r, e, 0.0});
    }
  }
  const ExperimentReport rep = aggregate(spec, cells, results);
  const auto& avg = rep.row("with_negatives");
  EXPECT_DOUBLE_EQ(avg.mean, 0.75);
  EXPECT_DOUBLE_EQ(avg.stddev, 0.25);
  EXPECT_EQ(avg.correct, 9u);
  EXPECT_EQ(avg.total, 12u);
  EXPECT_TRUE(std::isnan(rep.row("with_negatives", "emergency").mean));
  EXPECT_EQ(rep.rows.size(), cells.size() * (kCareActionCount + 1));
}

TEST(Report, EmptyIsHeaderOnly) {
  std::ostringstream out;
  write_report_csv(out, {});
  EXPECT_EQ(out.str(), std::string(kReportHeader) + "\n");
}

TEST(Report, RoundTripAndPlotRows) {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::EmbeddingSweep;
  const auto cells = experiment_cells(spec.kind, spec.train);
  std::vector<RealizationResult> results;
  Rng rng(4);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t r = 0; r < 2; ++r) {
      EvalReport e;
      for (std::size_t k = 0; k < kCareActionCount; ++k) {
        e.total[k] = rng.below(20);
        e.correct[k] = e.total[k] ? rng.below(e.total[k] + 1) : 0;
      }
      results.push_back({c, r, e, 0.0});
    }
  }
  const ExperimentReport rep = aggregate(spec, cells, results);

  const auto dir = std::filesystem::temp_directory_path() / "kgflow_report_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "sweep.csv";
  write_report(rep, path);
  EXPECT_EQ(read_report(path), rep.rows);

  std::ifstream plot(plot_data_path(path));
  std::size_t lines = 0;
  for (std::string line; std::getline(plot, line);) ++lines;
  EXPECT_EQ(lines - 1, cells.size());
  std::filesystem::remove_all(dir);
}

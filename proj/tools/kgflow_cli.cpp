// kgflow command-line driver.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include "kgflow/kgflow.hpp"

namespace {

using namespace kgflow;

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return in;
}

// Creates missing parent directories.
std::ofstream open_out(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  return out;
}

KeyValueConfig read_config(const std::string& path) {
  if (path.empty()) return {};
  auto in = open_in(path);
  return KeyValueConfig::parse(in);
}

KnowledgeGraph load_graph(const std::string& path) {
  auto in = open_in(path);
  return load_triple_table(in);
}

void print_report(const EvalReport& r) {
  for (CareAction a : kCareActions) {
    const auto k = index_of(a);
    std::printf("%-11s %5zu / %-5zu %.4f\n", std::string(care_action_name(a)).c_str(), r.correct[k], r.total[k],
                r.accuracy(a));
  }
  std::printf("%-11s %5zu / %-5zu %.4f\n", "micro", r.correct_sum(), r.total_sum(), r.micro());
}

// Flags shared by the commands that train a model. Flags override the
// config file.
struct TrainFlags {
  std::string config;
  std::string policy;
  std::string policy_file;
  std::size_t dim = 0;
  std::size_t layers = 0;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config, "key=value file with training (and data) settings");
    cmd->add_option("--policy", policy, "connectivity preset: C1, C2, C3 or C4");
    cmd->add_option("--policy-file", policy_file, "custom connectivity rules, one per line");
    cmd->add_option("--dim", dim, "embedding size");
    cmd->add_option("--layers", layers, "number of graph layers");
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--seed", seed, "model seed");
  }

  void apply(TrainConfig& cfg, KeyValueConfig& kv) const {
    if (!policy.empty()) kv.set("policy", policy);
    if (!policy_file.empty()) kv.set("policy_file", policy_file);
    cfg.read(kv);
    if (dim) cfg.dim = dim;
    if (layers) cfg.layers = layers;
    if (epochs) cfg.epochs = epochs;
    if (seed) cfg.seed = seed;
  }
};

int generate_data(const std::string& config, const std::string& out_path, std::size_t patients, double p_sig,
                  std::uint64_t seed) {
  auto kv = read_config(config);
  GenConfig gen;
  gen.read(kv);
  kv.reject_unused();
  if (patients) gen.patients = patients;
  if (p_sig >= 0.0) gen.p_sig = p_sig;
  if (seed) gen.seed = seed;
  const auto rows = generate_dataset(gen);
  auto out = open_out(out_path);
  write_triple_rows(out, rows);
  std::printf("wrote %zu triples to %s\n", rows.size(), out_path.c_str());
  return 0;
}

int ingest(const std::string& dir, const std::string& out_path, bool negatives) {
  auto patients = open_in(dir + "/patients.csv");
  auto encounters = open_in(dir + "/encounters.csv");
  auto conditions = open_in(dir + "/conditions.csv");
  auto observations = open_in(dir + "/observations.csv");
  KnowledgeGraph kg = ingest_clinical_csv(patients, encounters, conditions, observations);
  if (negatives) {
    ensure_care_action_nodes(kg);
    synthesize_negative_careaction_edges(kg);
  }
  const auto report = validate_kg(kg);
  for (const auto& f : report.findings) {
    std::fprintf(stderr, "%s: %s\n", std::string(finding_kind_name(f.kind)).c_str(), f.message.c_str());
  }
  auto out = open_out(out_path);
  write_triple_table(out, kg);
  std::printf("%zu nodes, %zu edges, %zu findings\n", kg.node_count(), kg.edge_count(), report.findings.size());
  return report.ok() ? 0 : 1;
}

int split(const std::string& data, std::size_t n_train, std::size_t n_test, std::uint64_t seed,
          const std::string& train_out, const std::string& test_out) {
  const KnowledgeGraph kg = load_graph(data);
  const PatientSplit s = split_by_patients(kg, n_train, n_test, seed);
  auto a = open_out(train_out);
  write_triple_table(a, s.train);
  auto b = open_out(test_out);
  write_triple_table(b, s.test);
  std::printf("train: %zu nodes, %zu edges; test: %zu nodes, %zu edges\n", s.train.node_count(),
              s.train.edge_count(), s.test.node_count(), s.test.edge_count());
  return 0;
}

// Care-action nodes and negatives are added the same way at training and
// prediction time, so node ids line up with the checkpoint.
KnowledgeGraph prepare_training_graph(const std::string& path, bool negatives) {
  KnowledgeGraph kg = load_graph(path);
  ensure_care_action_nodes(kg);
  if (negatives) synthesize_negative_careaction_edges(kg);
  const auto report = validate_kg(kg);
  if (!report.ok()) throw Error(path + ": " + report.findings.front().message);
  return kg;
}

int train_cmd(const std::string& data, const TrainFlags& flags, bool negatives, const std::string& out_path,
              const std::string& history_path) {
  auto kv = read_config(flags.config);
  TrainConfig cfg;
  flags.apply(cfg, kv);
  kv.reject_unused();
  const KnowledgeGraph kg = prepare_training_graph(data, negatives);
  const TrainResult result = train(kg, cfg);
  const auto policy = resolve_policy(cfg, kg.schema());
  auto out = open_out(out_path);
  save_checkpoint(out, make_checkpoint(result.params, kg, cfg.frozen_types, format_policy(policy, kg.schema())));
  if (!history_path.empty()) {
    auto h = open_out(history_path);
    h << "epoch,loss\n";
    for (std::size_t e = 0; e < result.history.losses.size(); ++e) {
      h << e + 1 << ',' << format_double(result.history.losses[e]) << '\n';
    }
  }
  std::printf("trained %zu epochs in %.2fs, final loss %.6f, checksum %016llx\n", result.history.losses.size(),
              result.history.seconds, result.history.losses.back(),
              static_cast<unsigned long long>(result.history.checksum));
  return 0;
}

int predict_cmd(const std::string& checkpoint_path, const std::string& train_data, const std::string& test_data,
                const std::string& out_path) {
  auto in = open_in(checkpoint_path);
  const Checkpoint ckpt = load_checkpoint(in);
  const KnowledgeGraph train_kg = prepare_training_graph(train_data, false);
  if (train_kg.node_names() != ckpt.node_names) {
    throw Error("training graph '" + train_data + "' does not match the checkpoint's node vocabulary");
  }
  const KnowledgeGraph test_kg = load_graph(test_data);

  TrainConfig cfg;
  cfg.dim = ckpt.params.dims().dim;
  cfg.layers = ckpt.params.dims().layers;
  cfg.policy_text = ckpt.policy;
  cfg.frozen_types = ckpt.frozen_types;
  const auto preds = predict_care_action(ckpt.params, train_kg, test_kg, cfg);
  auto out = open_out(out_path);
  write_predictions(out, preds);

  const auto fallback = std::count_if(preds.begin(), preds.end(), [](const auto& p) { return p.no_evidence; });
  if (fallback) {
    std::fprintf(stderr, "%zu encounter(s) without observations or conditions were given the prior care action\n",
                 static_cast<std::size_t>(fallback));
  }
  const bool labelled = std::all_of(preds.begin(), preds.end(), [](const auto& p) { return p.truth.has_value(); });
  if (labelled && !preds.empty()) print_report(evaluate_predictions(preds));
  return 0;
}

struct ExperimentFlags {
  std::string kind = "connectivity";
  std::size_t realizations = 10;
  std::uint64_t seed = 1;
  std::string config;
  std::string out = "report.csv";
  std::string data;
  std::size_t threads = 0;
  std::vector<std::string> cells;
};

int experiment_cmd(const ExperimentFlags& f) {
  ExperimentSpec spec;
  spec.kind = parse_experiment_kind(f.kind);
  spec.realizations = f.realizations;
  spec.seed = f.seed;
  spec.only_cells = f.cells;
  spec.threads = f.threads ? f.threads : std::max(1u, std::thread::hardware_concurrency());
  auto kv = read_config(f.config);
  spec.train.read(kv);
  spec.gen.read(kv);
  kv.read("train_patients", spec.train_patients);
  kv.read("test_patients", spec.test_patients);
  kv.reject_unused();
  KnowledgeGraph dataset;
  if (!f.data.empty()) {
    dataset = load_graph(f.data);
    spec.dataset = &dataset;
  }
  const ExperimentReport report = run_experiment(spec);
  write_report(report, f.out);
  for (const auto& r : report.rows) {
    if (r.cls == "average") std::printf("%-14s %.4f +- %.4f\n", r.cell.c_str(), r.mean, r.stddev);
  }
  std::printf("wrote %s and %s\n", f.out.c_str(), plot_data_path(f.out).string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-graph GNN toolkit for care-action prediction"};
  app.require_subcommand(1);

  std::string config, out, data, train_data, test_data, checkpoint, history, dir;
  std::size_t patients = 0, n_train = 50, n_test = 10;
  double p_sig = -1.0;
  std::uint64_t seed = 0;
  bool no_negatives = false;

  auto* gen = app.add_subcommand("generate-data", "Write a synthetic clinical triple table");
  gen->add_option("--config", config, "key=value file with generator settings");
  gen->add_option("--out", out, "output triple table")->required();
  gen->add_option("--patients", patients, "number of patients");
  gen->add_option("--p-sig", p_sig, "probability an item comes from the care action's signature set");
  gen->add_option("--seed", seed, "generator seed");

  auto* ing = app.add_subcommand("ingest-synthea", "Convert Synthea-style CSV exports into a triple table");
  ing->add_option("--dir", dir, "directory with patients.csv, encounters.csv, conditions.csv, observations.csv")
      ->required();
  ing->add_option("--out", out, "output triple table")->required();
  ing->add_flag("--no-negatives", no_negatives, "do not add negative encounter-careaction edges");

  auto* spl = app.add_subcommand("split", "Split a triple table by patients into train and test tables");
  spl->add_option("--data", data, "input triple table")->required();
  spl->add_option("--train-patients", n_train, "patients in the training table")->capture_default_str();
  spl->add_option("--test-patients", n_test, "patients in the test table")->capture_default_str();
  spl->add_option("--seed", seed, "sampling seed");
  spl->add_option("--train-out", train_data, "training table output")->required();
  spl->add_option("--test-out", test_data, "test table output")->required();

  TrainFlags tflags;
  auto* trn = app.add_subcommand("train", "Train a model on a triple table and write a checkpoint");
  trn->add_option("--data", data, "training triple table")->required();
  tflags.add(trn);
  trn->add_flag("--no-negatives", no_negatives, "train without negative encounter-careaction edges");
  trn->add_option("--out", out, "checkpoint file")->required();
  trn->add_option("--history", history, "optional per-epoch loss CSV");

  auto* prd = app.add_subcommand("predict", "Predict care actions for the encounters of a test table");
  prd->add_option("--checkpoint", checkpoint, "checkpoint written by train")->required();
  prd->add_option("--train-data", train_data, "the triple table the checkpoint was trained on")->required();
  prd->add_option("--test-data", test_data, "triple table with the new patients")->required();
  prd->add_option("--out", out, "predictions CSV")->required();

  ExperimentFlags eflags;
  auto* exp = app.add_subcommand("experiment", "Run a batch experiment and write a report");
  exp->add_option("--kind", eflags.kind, "connectivity, embedding_sweep, layer_sweep or negative_ablation")
      ->capture_default_str();
  exp->add_option("--realizations", eflags.realizations, "independent data samples per cell")
      ->capture_default_str();
  exp->add_option("--seed", eflags.seed, "master seed")->capture_default_str();
  exp->add_option("--config", eflags.config, "key=value file with training and generator settings");
  exp->add_option("--out", eflags.out, "report CSV; plot data goes next to it")->capture_default_str();
  exp->add_option("--data", eflags.data, "resample this triple table instead of generating data");
  exp->add_option("--threads", eflags.threads, "worker threads (default: hardware concurrency)");
  exp->add_option("--cells", eflags.cells, "only run these cells, e.g. C4 or 'd=5;L=2'");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return generate_data(config, out, patients, p_sig, seed);
    if (*ing) return ingest(dir, out, !no_negatives);
    if (*spl) return split(data, n_train, n_test, seed ? seed : 1, train_data, test_data);
    if (*trn) return train_cmd(data, tflags, !no_negatives, out, history);
    if (*prd) return predict_cmd(checkpoint, train_data, test_data, out);
    if (*exp) return experiment_cmd(eflags);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

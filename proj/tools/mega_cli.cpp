// Copyright 2026 The megagraph Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mega/check.hpp"
#include "mega/data.hpp"
#include "mega/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

// A configuration problem the user can fix by changing flags.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const std::vector<std::string> kTasks{"max-of-sums", "out-neighbor-count", "max_of_sums",
                                      "out_neighbor_count"};
const std::vector<std::string> kAggs{"sum", "mean", "max", "min", "std", "pna"};

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return json::parse(in);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
}

struct GenArgs {
  std::string task;
  std::int64_t nodes = 500;
  std::uint64_t seed = 0;
  std::int64_t senders = 2;
  std::int64_t payments = 3;
  double positive_rate = 0.25;
  double margin = 10.0;
  std::string out = ".";
};

int run_gen(const GenArgs& a) {
  mega::PlantedConfig cfg;
  cfg.task = mega::parse_planted_task(a.task);
  cfg.num_nodes = a.nodes;
  cfg.seed = a.seed;
  cfg.senders_per_node = a.senders;
  cfg.payments_per_sender = a.payments;
  cfg.positive_rate = a.positive_rate;
  cfg.margin = a.margin;
  try {
    cfg.validate();
  } catch (const mega::PreconditionError& e) {
    throw UsageError(e.what());
  }
  const mega::PlantedDataset d = mega::generate_planted_task(cfg);
  ensure_dir(a.out);
  const fs::path edges = fs::path(a.out) / "edges.csv";
  const fs::path nodes = fs::path(a.out) / "nodes.csv";
  mega::write_transactions(edges.string(), mega::planted_to_table(d), nodes.string());
  std::int64_t positives = 0;
  for (int l : d.labels) positives += l;
  std::cout << edges.string() << ": " << d.graph.num_edges() << " rows\n"
            << nodes.string() << ": " << d.graph.num_nodes << " rows (" << positives
            << " positive)\n";
  return kOk;
}

struct DataArgs {
  std::string edges;
  std::string node_labels;
  std::string schema = "eth";
  std::uint64_t split_seed = 0;
};

void add_data_options(CLI::App* cmd, DataArgs& d) {
  cmd->add_option("--edges", d.edges, "Transaction CSV")->required()->check(CLI::ExistingFile);
  cmd->add_option("--node-labels", d.node_labels, "node,label sidecar (selects a node task)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--schema", d.schema, "Column preset")
      ->check(CLI::IsMember({"aml", "eth"}))
      ->capture_default_str();
  cmd->add_option("--split-seed", d.split_seed, "Seed of the random node split")
      ->capture_default_str();
}

mega::Dataset load_dataset(const DataArgs& d) {
  mega::TransactionTable t = mega::load_transactions(d.edges, mega::TransactionSchema::preset(d.schema));
  if (!d.node_labels.empty()) mega::load_node_labels(d.node_labels, t);
  return mega::make_dataset(t, mega::SplitSpec{}, d.split_seed);
}

json data_to_json(const DataArgs& d) {
  return {{"edges", d.edges},
          {"node_labels", d.node_labels},
          {"schema", d.schema},
          {"split_seed", d.split_seed}};
}

struct TrainArgs {
  DataArgs data;
  std::string model = "mega";
  std::string bidirectional = "on";
  std::string ego_ids = "off";
  std::string edge_agg = "sum";
  std::string node_agg = "sum";
  std::string edge_agg_mlp = "on";
  std::string activation = "relu";
  std::int64_t layers = 2;
  std::int64_t hidden = 64;
  double dropout = 0.1;
  mega::TrainConfig train;
  std::int64_t seeds = 5;
  std::uint64_t seed_base = 0;
  std::string out = "run";
};

bool on_off(const std::string& v) { return v == "on"; }

mega::ModelConfig model_config(const TrainArgs& a) {
  mega::ModelConfig m;
  m.kind = a.model == "mega" ? mega::ModelKind::kMega : mega::ModelKind::kSingleStage;
  m.bidirectional = on_off(a.bidirectional);
  m.ego_ids = on_off(a.ego_ids);
  m.edge_agg = mega::AggSpec::parse(a.edge_agg);
  m.node_agg = mega::AggSpec::parse(a.node_agg);
  m.edge_agg_mlp = on_off(a.edge_agg_mlp);
  m.activation = mega::parse_activation(a.activation);
  m.num_layers = a.layers;
  m.hidden = a.hidden;
  m.dropout = a.dropout;
  if (m.kind == mega::ModelKind::kSingleStage && m.edge_agg.kind != mega::AggKind::kSum) {
    throw UsageError("--edge-agg only applies to --model mega");
  }
  return m;
}

int run_train(const TrainArgs& a) {
  mega::ModelConfig model = model_config(a);
  try {
    a.train.validate();
    model.validate();
  } catch (const mega::PreconditionError& e) {
    throw UsageError(e.what());
  }
  if (a.seeds < 1) throw UsageError("--seeds must be positive");
  const mega::Dataset data = load_dataset(a.data);
  model = mega::fit_to_dataset(model, data);
  ensure_dir(a.out);
  const fs::path out(a.out);
  const json effective = {{"data", data_to_json(a.data)},
                          {"model", model.to_json()},
                          {"train", a.train.to_json()},
                          {"seeds", a.seeds},
                          {"seed_base", a.seed_base}};
  write_json(out / "config.json", effective);
  std::cout << "config: " << effective.dump() << '\n';

  std::vector<mega::ExperimentRecord> records;
  bool all_ok = true;
  for (std::int64_t k = 0; k < a.seeds; ++k) {
    const std::uint64_t seed = a.seed_base + static_cast<std::uint64_t>(k);
    mega::TrainResult r = mega::train_model(model, a.train, data, seed);
    json rec = r.record.to_json();
    rec["config"] = effective;
    write_json(out / ("seed_" + std::to_string(seed) + ".json"), rec);
    if (r.record.ok()) {
      write_json(out / ("checkpoint_seed_" + std::to_string(seed) + ".json"),
                 mega::make_checkpoint(model, a.train, r.params, seed));
      std::cout << "seed " << seed << ": best epoch " << r.record.best_epoch << ", val F1 "
                << r.record.val.f1 << ", test F1 " << r.record.test.f1 << '\n';
    } else {
      all_ok = false;
      std::cout << "seed " << seed << ": " << r.record.status << " (" << r.record.diagnostic
                << ")\n";
    }
    records.push_back(std::move(r.record));
  }
  json summary = mega::summarize(records);
  summary["config"] = effective;
  write_json(out / "summary.json", summary);
  std::cout << "summary: " << summary["test"].dump() << '\n';
  return all_ok ? kOk : kFailure;
}

struct EvalArgs {
  DataArgs data;
  std::string checkpoint;
  std::string split = "test";
  std::string out_json;
  std::string out_csv;
};

int run_eval(const EvalArgs& a) {
  const mega::Checkpoint ck = mega::load_checkpoint(read_json(a.checkpoint));
  const mega::Dataset data = load_dataset(a.data);
  const mega::SplitPart part = a.split == "train" ? mega::SplitPart::kTrain
                               : a.split == "val" ? mega::SplitPart::kVal
                                                  : mega::SplitPart::kTest;
  const mega::Evaluation ev = mega::evaluate(ck.model, ck.params, data, part, ck.train, ck.seed);
  const mega::BinaryMetrics& m = ev.metrics;
  const json report = {{"checkpoint", a.checkpoint},
                       {"data", data_to_json(a.data)},
                       {"split", a.split},
                       {"items", ev.labels.size()},
                       {"loss", ev.loss},
                       {"f1", m.f1},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"pr_auc", m.pr_auc},
                       {"tp", m.tp},
                       {"fp", m.fp},
                       {"fn", m.fn},
                       {"tn", m.tn}};
  std::cout << report.dump(2) << '\n';
  if (!a.out_json.empty()) write_json(a.out_json, report);
  if (!a.out_csv.empty()) {
    std::ofstream csv(a.out_csv);
    if (!csv) throw std::runtime_error("cannot write " + a.out_csv);
    csv.precision(17);
    csv << "item,label,score\n";
    const auto& items = data.part(part);
    for (std::size_t i = 0; i < ev.labels.size(); ++i) {
      csv << items[i] << ',' << ev.labels[i] << ',' << ev.scores[i] << '\n';
    }
  }
  return kOk;
}

struct CheckArgs {
  std::string suite = "all";
  mega::CheckOptions options;
  std::optional<std::int64_t> trials;
  std::optional<std::int64_t> n;
  std::string out;
};

int run_check(const CheckArgs& a) {
  mega::CheckOptions o = a.options;
  if (a.trials) o.trials = o.witness_trials = *a.trials;
  if (a.n) o.n_min = o.n_max = *a.n;
  std::vector<std::string> suites = a.suite == "all" ? mega::suite_names()
                                                     : std::vector<std::string>{a.suite};
  json reports = json::array();
  bool passed = true;
  for (const std::string& s : suites) {
    mega::SuiteReport r;
    try {
      r = mega::run_suite(s, o);
    } catch (const mega::PreconditionError& e) {
      throw UsageError(e.what());
    }
    passed = passed && r.passed;
    reports.push_back(r.to_json());
  }
  const json out = {{"passed", passed}, {"suites", reports}};
  std::cout << out.dump(2) << '\n';
  if (!a.out.empty()) write_json(a.out, out);
  return passed ? kOk : kFailure;
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

// Inserts the entries of a subcommand's --config file as flags that the
// command line does not already set, so flags win over the file.
void expand_config(std::vector<std::string>& args) {
  if (args.empty() || args[0] != "train") return;
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw CLI::FileError::Missing(path);
  std::vector<std::string> extra;
  for (const CLI::ConfigItem& item : CLI::ConfigTOML().from_config(in)) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (!item.parents.empty()) throw CLI::ConversionError("config sections are not supported: " + item.fullname());
    std::string name = item.name;
    while (!name.empty() && name.front() == '-') name.erase(0, 1);
    const std::string flag = "--" + name;
    if (name == "config" || has_flag(args, flag)) continue;
    for (const std::string& value : item.inputs) {
      extra.push_back(flag);
      extra.push_back(value);
    }
  }
  args.insert(args.begin() + 1, extra.begin(), extra.end());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage multigraph message passing: data, training, evaluation and checks"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a planted synthetic dataset");
  gen_cmd->add_option("--task", gen.task, "Planted task")->required()->check(CLI::IsMember(kTasks));
  gen_cmd->add_option("--nodes", gen.nodes, "Receiver nodes")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--senders", gen.senders, "Senders per receiver")->capture_default_str();
  gen_cmd->add_option("--payments", gen.payments, "Payments per sender")->capture_default_str();
  gen_cmd->add_option("--positive-rate", gen.positive_rate)->capture_default_str();
  gen_cmd->add_option("--margin", gen.margin, "Decision margin (max-of-sums)")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->capture_default_str();

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train over several seeds");
  std::string config_file;
  train_cmd->add_option("--config", config_file, "key=value file; flags take precedence")
      ->check(CLI::ExistingFile);
  add_data_options(train_cmd, train.data);
  train_cmd->add_option("--model", train.model)
      ->check(CLI::IsMember({"mega", "single-stage-gin"}))
      ->capture_default_str();
  train_cmd->add_option("--bidirectional", train.bidirectional)
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  train_cmd->add_option("--ego-ids", train.ego_ids)
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  train_cmd->add_option("--edge-agg", train.edge_agg)->check(CLI::IsMember(kAggs))->capture_default_str();
  train_cmd->add_option("--node-agg", train.node_agg)->check(CLI::IsMember(kAggs))->capture_default_str();
  train_cmd->add_option("--edge-agg-mlp", train.edge_agg_mlp)
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  train_cmd->add_option("--activation", train.activation)
      ->check(CLI::IsMember({"relu", "gelu", "identity"}))
      ->capture_default_str();
  train_cmd->add_option("--layers", train.layers)->capture_default_str();
  train_cmd->add_option("--hidden", train.hidden)->capture_default_str();
  train_cmd->add_option("--dropout", train.dropout)->capture_default_str();
  train_cmd->add_option("--lr", train.train.learning_rate)->capture_default_str();
  train_cmd->add_option("--batch-size", train.train.batch_size)->capture_default_str();
  train_cmd->add_option("--epochs", train.train.epochs)->capture_default_str();
  train_cmd->add_option("--patience", train.train.patience)->capture_default_str();
  train_cmd->add_option("--weight-negative", train.train.class_weights.negative)->capture_default_str();
  train_cmd->add_option("--weight-positive", train.train.class_weights.positive)->capture_default_str();
  train_cmd->add_option("--hops", train.train.hops)->capture_default_str();
  train_cmd->add_option("--per-hop", train.train.per_hop)->capture_default_str();
  train_cmd->add_option("--seeds", train.seeds, "Number of seeds")->capture_default_str();
  train_cmd->add_option("--seed-base", train.seed_base, "First seed")->capture_default_str();
  train_cmd->add_option("--out", train.out, "Output directory")->capture_default_str();

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_data_options(eval_cmd, eval.data);
  eval_cmd->add_option("--checkpoint", eval.checkpoint)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--split", eval.split)
      ->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  eval_cmd->add_option("--out", eval.out_json, "Metrics JSON");
  eval_cmd->add_option("--csv", eval.out_csv, "Per-item scores CSV");

  CheckArgs check;
  std::vector<std::string> suites = mega::suite_names();
  suites.push_back("all");
  CLI::App* check_cmd = app.add_subcommand("check", "Run property suites");
  check_cmd->add_option("--suite", check.suite)->check(CLI::IsMember(suites))->capture_default_str();
  check_cmd->add_option("--trials", check.trials, "Equivariance graphs / witness seeds");
  check_cmd->add_option("--graphs", check.options.graphs, "Node-id graphs")->capture_default_str();
  check_cmd->add_option("--gradient-graphs", check.options.gradient_graphs)->capture_default_str();
  check_cmd->add_option("--n", check.n, "Star order for the port witness (default 4..10)");
  check_cmd->add_option("--sizes", check.options.sizes, "Edge counts for the complexity suite");
  check_cmd->add_option("--seed", check.options.seed)->capture_default_str();
  check_cmd->add_option("--out", check.out, "Report JSON");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    expand_config(args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*train_cmd) return run_train(train);
    if (*eval_cmd) return run_eval(eval);
    return run_check(check);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}

#include "canids/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "canids/checkpoint.hpp"
#include "canids/detect_eval.hpp"
#include "canids/kernels.hpp"
#include "canids/pipeline.hpp"
#include "canids/traffic_synth.hpp"

namespace canids::cli {
namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::uint64_t seed = 7;
  int scenario = 0;
  double horizon = kDefaultHorizon;
  double damping = 0.85;
  double tolerance = 1e-9;
  std::size_t max_iter = 100;
  std::string pagerank_mode = "inverse";
  std::size_t window_size = kDefaultWindowSize;
  std::size_t lookback = kDefaultLookback;
  std::string kernels = "auto";
  std::string model = "sage";
  std::vector<std::string> models{"gcn", "gat", "sage", "transformer"};
  std::vector<int> scenarios{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  HyperParams hyper;
  double train_fraction = kDefaultTrainFraction;
  std::string split = "all";

  std::string log;
  std::string out;
  std::string spec;
  std::string graphs;
  std::string features;
  std::string checkpoint;
  std::string predictions;
  std::string truth;
  std::string report;
  std::string table;
};

PipelineOptions pipeline_options(const RunConfig& c) {
  PipelineOptions p;
  p.window_size = c.window_size;
  p.features.lookback = c.lookback;
  p.features.pagerank.damping = c.damping;
  p.features.pagerank.tolerance = c.tolerance;
  p.features.pagerank.max_iter = c.max_iter;
  p.features.pagerank.mode =
      c.pagerank_mode == "literal" ? PageRankMode::literal_division : PageRankMode::inverse_weight_share;
  return p;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

// Writes to `path`, or to `fallback` when no path was given.
template <typename Fn>
void with_output(const std::string& path, std::ostream& fallback, Fn&& fn) {
  if (path.empty()) {
    fn(fallback);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  fn(out);
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<GraphBatch> load_batches(const RunConfig& c) {
  if (!c.log.empty()) return process_log(read_log(c.log), pipeline_options(c)).batches;
  if (c.features.empty() || c.graphs.empty()) throw UsageError("give --log, or both --features and --graphs");
  auto fin = open_input(c.features);
  const auto table = read_feature_csv(fin);
  auto gin = open_input(c.graphs);
  const auto graphs = read_graph_dump(gin);
  return batches_from_tables(table, graphs);
}

std::span<const GraphBatch> select_split(const std::vector<GraphBatch>& batches, const RunConfig& c) {
  if (c.split == "all") return batches;
  const std::size_t train = train_count(batches.size(), c.train_fraction);
  const std::span<const GraphBatch> all(batches);
  return c.split == "train" ? all.first(train) : all.subspan(train);
}

int cmd_synth(const RunConfig& c, std::ostream& out) {
  ScenarioSpec spec;
  if (!c.spec.empty()) {
    spec = load_scenario_config(c.spec);
  } else if (c.scenario != 0) {
    spec = table_scenario(c.scenario, c.seed, c.horizon);
  } else {
    throw UsageError("synth needs --scenario N or --spec FILE");
  }
  const auto log = build_scenario(spec);
  with_output(c.out, out, [&](std::ostream& o) { write_log(log, o); });
  return kExitOk;
}

int cmd_decode(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto decoded = decode_log(read_log(c.log));
  with_output(c.out, out, [&](std::ostream& o) { write_decoded_dump(decoded, o); });
  if (decoded.warnings > 0) err << "canids: " << decoded.warnings << " frame(s) with codec warnings\n";
  return kExitOk;
}

int cmd_graph(const RunConfig& c, std::ostream& out) {
  const auto decoded = decode_log(read_log(c.log));
  std::vector<WindowFrame> frames;
  frames.reserve(decoded.messages.size());
  for (const auto& m : decoded.messages) frames.push_back(to_window_frame(m));
  const auto windows = build_windows(frames, c.window_size);
  with_output(c.out, out, [&](std::ostream& o) { write_graph_dump(windows, o); });
  return kExitOk;
}

int cmd_features(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto data = process_log(read_log(c.log), pipeline_options(c));
  with_output(c.out, out, [&](std::ostream& o) { write_feature_csv(data.features, o); });
  if (!c.graphs.empty()) {
    with_output(c.graphs, out, [&](std::ostream& o) { write_graph_dump(data.windows, o); });
  }
  if (data.features.unconverged_windows > 0) {
    err << "canids: PageRank did not converge in " << data.features.unconverged_windows << " window(s)\n";
  }
  return kExitOk;
}

int cmd_train(const RunConfig& c, std::ostream& out) {
  const auto kind = parse_model_kind(c.model);
  const auto batches = load_batches(c);
  const std::size_t n_train = train_count(batches.size(), c.train_fraction);
  if (n_train == 0) throw DataError("no training windows (" + std::to_string(batches.size()) + " windows in input)");
  auto report = train(kind, std::span(batches).first(n_train), c.hyper);
  report.split = describe_split(batches.size(), n_train);
  write_checkpoint(report.params, std::filesystem::path(c.checkpoint));
  if (!c.report.empty()) {
    with_output(c.report, out, [&](std::ostream& o) {
      o << "# model=" << to_string(kind) << "\n# seed=" << report.seed << "\n# split=" << report.split
        << "\nepoch,loss\n";
      char buf[64];
      for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e, report.epoch_loss[e]);
        o << buf;
      }
    });
  }
  out << to_string(kind) << ": " << report.split << ", " << report.epoch_loss.size() << " epochs";
  if (!report.epoch_loss.empty()) out << ", final loss " << report.epoch_loss.back();
  out << '\n';
  return kExitOk;
}

int cmd_detect(const RunConfig& c, std::ostream& out) {
  const auto params = read_checkpoint(std::filesystem::path(c.checkpoint));
  const auto batches = load_batches(c);
  const auto predictions = detect(params, select_split(batches, c));
  with_output(c.out, out, [&](std::ostream& o) { write_predictions_csv(predictions, o); });
  return kExitOk;
}

std::vector<NodeLabel> read_truth(const std::string& path) {
  auto in = open_input(path);
  std::string first;
  std::getline(in, first);
  in.clear();
  in.seekg(0);
  if (first.rfind("window,can_id_hex,pagerank", 0) == 0) {
    std::vector<NodeLabel> out;
    for (const auto& r : read_feature_csv(in).rows) out.push_back({r.window, r.can_id, r.label});
    return out;
  }
  return read_predictions_csv(in);
}

int cmd_eval(const RunConfig& c, std::ostream& out) {
  auto pin = open_input(c.predictions);
  const auto predicted = read_predictions_csv(pin);
  auto truth = read_truth(c.truth);
  if (c.split != "all") {
    std::size_t windows = 0;
    for (const auto& t : truth) windows = std::max(windows, t.window + 1);
    const std::size_t train = train_count(windows, c.train_fraction);
    std::erase_if(truth, [&](const NodeLabel& t) { return (t.window < train) != (c.split == "train"); });
  }
  auto report = metrics(predicted, truth);
  report.scenario = c.scenario;
  report.model = c.model;
  const std::vector<DetectionReport> reports{report};
  out << format_report_table(reports);
  if (!c.out.empty()) with_output(c.out, out, [&](std::ostream& o) { o << format_report_csv(reports); });
  return kExitOk;
}

int cmd_bench(const RunConfig& c, std::ostream& out) {
  BenchConfig bc;
  bc.scenarios = c.scenarios;
  bc.models.clear();
  for (const auto& m : c.models) bc.models.push_back(parse_model_kind(m));
  bc.seed = c.seed;
  bc.horizon = c.horizon;
  bc.train_fraction = c.train_fraction;
  bc.pipeline = pipeline_options(c);
  bc.hyper = c.hyper;
  const auto result = run_bench(bc);
  if (!c.out.empty()) with_output(c.out, out, [&](std::ostream& o) { o << result.csv; });
  if (!c.table.empty()) with_output(c.table, out, [&](std::ostream& o) { o << result.table; });
  out << result.table;
  return kExitOk;
}

void select_kernels(const std::string& name) {
  if (name == "auto") kernels::select(kernels::detect_best());
  else if (name == "scalar") kernels::select(kernels::Backend::scalar);
  else if (name == "avx2") kernels::select(kernels::Backend::avx2);
  else kernels::select(kernels::Backend::neon);
}

const CLI::Validator kOpenUnit(
    [](std::string& s) {
      double v = 0.0;
      if (!CLI::detail::lexical_cast(s, v) || !(v > 0.0 && v < 1.0)) return std::string("must be in (0, 1)");
      return std::string();
    },
    "(0,1)");

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"Graph-based intrusion detection for UAVCAN CAN bus logs", "canids"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key=value file with option defaults; flags override it");

  app.add_option("--seed", c.seed, "Seed for synthesis and training")->capture_default_str();
  app.add_option("--scenario", c.scenario, "Scenario number 1-10")->check(CLI::Range(1, kScenarioCount));
  app.add_option("--horizon", c.horizon, "Synthetic log length, seconds")->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--damping", c.damping, "PageRank damping factor")->check(kOpenUnit)->capture_default_str();
  app.add_option("--tolerance", c.tolerance, "PageRank L1 convergence tolerance")->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--max-iter", c.max_iter, "PageRank iteration cap")->check(CLI::Range(1, 100000))
      ->capture_default_str();
  app.add_option("--pagerank-mode", c.pagerank_mode, "Edge weight handling in PageRank")
      ->check(CLI::IsMember({"inverse", "literal"}))->capture_default_str();
  app.add_option("--window-size", c.window_size, "Messages per window graph")->check(CLI::Range(2, 1000000))
      ->capture_default_str();
  app.add_option("--lookback", c.lookback, "Preceding frames counted by density")->check(CLI::Range(0, 1000000))
      ->capture_default_str();
  app.add_option("--kernels", c.kernels, "Dense kernel backend")
      ->check(CLI::IsMember({"auto", "scalar", "avx2", "neon"}))->capture_default_str();
  app.add_option("--model", c.model, "Model kind: gcn, sage, gat, transformer")->capture_default_str();
  app.add_option("--hidden", c.hyper.hidden, "Hidden width")->check(CLI::Range(1, 4096))->capture_default_str();
  app.add_flag("!--raw-features", c.hyper.standardize_inputs, "Feed features to the model unstandardized");
  app.add_option("--layers", c.hyper.layers, "Message-passing layers")->check(CLI::Range(1, 64))
      ->capture_default_str();
  app.add_option("--heads", c.hyper.heads, "Attention heads")->check(CLI::Range(1, 64))->capture_default_str();
  app.add_option("--lr", c.hyper.learning_rate, "Adam learning rate")->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--epochs", c.hyper.epochs, "Training epochs")->check(CLI::Range(0, 1000000))
      ->capture_default_str();
  app.add_option("--train-fraction", c.train_fraction, "Leading share of windows used for training")
      ->check(CLI::Range(0.0, 1.0))->capture_default_str();
  app.add_option("--split", c.split, "Windows to use in detect/eval")->check(CLI::IsMember({"all", "train", "test"}))
      ->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Generate a labeled scenario log");
  synth->add_option("--spec", c.spec, "Scenario description file");
  synth->add_option("--out", c.out, "Output log (stdout if omitted)");

  auto* decode = app.add_subcommand("decode", "Decode UAVCAN fields of every frame");
  decode->add_option("--log", c.log, "Input log")->required();
  decode->add_option("--out", c.out, "Output CSV (stdout if omitted)");

  auto* graph = app.add_subcommand("graph", "Dump window graphs");
  graph->add_option("--log", c.log, "Input log")->required();
  graph->add_option("--out", c.out, "Output dump (stdout if omitted)");

  auto* features = app.add_subcommand("features", "Compute PageRank and density per window node");
  features->add_option("--log", c.log, "Input log")->required();
  features->add_option("--out", c.out, "Feature CSV (stdout if omitted)");
  features->add_option("--graphs", c.graphs, "Also write the graph dump here");

  auto* train_cmd = app.add_subcommand("train", "Train a model on the leading windows");
  train_cmd->add_option("--log", c.log, "Input log");
  train_cmd->add_option("--features", c.features, "Feature CSV (with --graphs)");
  train_cmd->add_option("--graphs", c.graphs, "Graph dump (with --features)");
  train_cmd->add_option("--out", c.checkpoint, "Checkpoint to write")->required();
  train_cmd->add_option("--report", c.report, "Per-epoch loss CSV");

  auto* detect_cmd = app.add_subcommand("detect", "Label every window node with a trained model");
  detect_cmd->add_option("--checkpoint", c.checkpoint, "Model checkpoint")->required();
  detect_cmd->add_option("--log", c.log, "Input log");
  detect_cmd->add_option("--features", c.features, "Feature CSV (with --graphs)");
  detect_cmd->add_option("--graphs", c.graphs, "Graph dump (with --features)");
  detect_cmd->add_option("--out", c.out, "Predictions CSV (stdout if omitted)");

  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  eval->add_option("--predictions", c.predictions, "Predictions CSV")->required();
  eval->add_option("--truth", c.truth, "Feature CSV or labeled predictions-format CSV")->required();
  eval->add_option("--out", c.out, "Report CSV");

  auto* bench = app.add_subcommand("bench", "Train and evaluate every model over the scenario grid");
  bench->add_option("--models", c.models, "Comma-separated model kinds")->delimiter(',');
  bench->add_option("--scenarios", c.scenarios, "Comma-separated scenario numbers")->delimiter(',')
      ->check(CLI::Range(1, kScenarioCount));
  bench->add_option("--out", c.out, "Report CSV");
  bench->add_option("--table", c.table, "Aligned text report");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    select_kernels(c.kernels);
    if (app.got_subcommand(synth)) return cmd_synth(c, out);
    if (app.got_subcommand(decode)) return cmd_decode(c, out, err);
    if (app.got_subcommand(graph)) return cmd_graph(c, out);
    if (app.got_subcommand(features)) return cmd_features(c, out, err);
    if (app.got_subcommand(train_cmd)) return cmd_train(c, out);
    if (app.got_subcommand(detect_cmd)) return cmd_detect(c, out);
    if (app.got_subcommand(eval)) return cmd_eval(c, out);
    if (app.got_subcommand(bench)) return cmd_bench(c, out);
  } catch (const UsageError& e) {
    err << "canids: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "canids: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "canids: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "canids: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace canids::cli

// armgraph: ARM ELF call-graph extraction and graph classification.

#include <CLI11.hpp>

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <map>

#include "armgraph/commands.hpp"

namespace {

using namespace armgraph;
namespace fs = std::filesystem;

struct Options {
  cli::RunConfig config;
  std::string mode = "cpu";
  std::string gm = "mean_field";
  std::string optimizer = "adam";
  std::string graph_source = "call_graph";
  std::string log_level = "info";
};

void add_common_options(CLI::App& app, Options& o) {
  auto& hp = o.config.hp;
  app.add_option("--mode", o.mode, "Compute mode; only the CPU is used")
      ->check(CLI::IsMember({"cpu", "gpu"}));
  app.add_option("--gm", o.gm, "Graph embedding model (mean_field)");
  app.add_option("--batch-size", hp.batch_size, "Minibatch size")->capture_default_str();
  app.add_option("--seed", hp.seed, "Random seed")->capture_default_str();
  app.add_option("--feat-dim", hp.feat_dim, "Node tag dimension (0 infers it)")
      ->capture_default_str();
  app.add_option("--num-class", hp.num_class, "Number of classes (0 infers it)")
      ->capture_default_str();
  app.add_option("--num-epochs", hp.num_epochs, "Training epochs")->capture_default_str();
  app.add_option("--latent-dim", hp.latent_dim, "Node embedding size")->capture_default_str();
  app.add_option("--out-dim", hp.out_dim, "Graph embedding size")->capture_default_str();
  app.add_option("--hidden", hp.hidden, "Classifier hidden layer size")->capture_default_str();
  app.add_option("--max-lv", hp.max_lv, "Message passing rounds")->capture_default_str();
  app.add_option("--learning-rate", hp.learning_rate, "Optimizer step size")
      ->capture_default_str();
  app.add_option("--train-fraction", hp.train_fraction, "Share of each class used for training")
      ->capture_default_str();
  app.add_option("--optimizer", o.optimizer, "adam or sgd")
      ->check(CLI::IsMember({"adam", "sgd"}))
      ->capture_default_str();
  app.add_option("--ld-path", o.config.ld_paths, "Shared library search directory");
  app.add_option("--lib-root", o.config.lib_root,
                 "Directory holding per-sample library folders named by sha256");
  app.add_flag("--strict-libs", o.config.strict_libs, "Fail when a needed library is missing");
  app.add_option("--graph-source", o.graph_source, "call_graph or cfg")
      ->check(CLI::IsMember({"call_graph", "cfg"}))
      ->capture_default_str();
  app.add_flag("--include-library-nodes", o.config.include_library_nodes,
               "Keep library functions in prepared graphs");
  app.add_option("--jobs", o.config.jobs, "Worker threads (0 uses every core)")
      ->capture_default_str();
  app.add_option("--log-level", o.log_level, "error, warn, info or debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}))
      ->capture_default_str();
}

void finish_options(Options& o) {
  if (o.gm == "loopy_bp") {
    throw cli::CliError(cli::CliErrc::kUsage, "--gm loopy_bp is not implemented; use mean_field");
  }
  if (o.gm != "mean_field") throw cli::CliError(cli::CliErrc::kUsage, "unknown --gm " + o.gm);
  o.config.hp.gm = s2v::GraphModel::kMeanField;
  o.config.hp.optimizer = o.optimizer == "sgd" ? s2v::Optimizer::kSgd : s2v::Optimizer::kAdam;
  o.config.graph_source =
      o.graph_source == "cfg" ? cli::GraphSource::kCfg : cli::GraphSource::kCallGraph;
  static const std::map<std::string, cli::LogLevel> levels = {
      {"error", cli::LogLevel::kError},
      {"warn", cli::LogLevel::kWarn},
      {"info", cli::LogLevel::kInfo},
      {"debug", cli::LogLevel::kDebug}};
  o.config.log_level = levels.at(o.log_level);
  o.config.hp.validate();
}

void print_prediction(const s2v::Prediction& p) {
  std::cout << "class=" << p.label << " probs=";
  std::cout << std::fixed << std::setprecision(6);
  for (std::size_t k = 0; k < p.probs.size(); ++k) std::cout << (k ? "," : "") << p.probs[k];
  std::cout << std::defaultfloat << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ARM ELF call-graph extraction and structure2vec classification"};
  app.set_config("--config", "", "Config file of `key = value` lines; flags override it");
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  add_common_options(app, o);

  std::vector<fs::path> binaries;
  fs::path out_dir;
  fs::path manifest;
  fs::path data;
  fs::path model;
  std::optional<fs::path> report;
  bool coverage = false;
  std::string format = "table";

  auto* extract = app.add_subcommand("extract", "Recover CFGs and call graphs from binaries");
  extract->add_option("binaries", binaries, "ELF files")->required()->check(CLI::ExistingFile);
  extract->add_option("-o,--out", out_dir, "Output directory")->required();

  auto* stats = app.add_subcommand("stats", "Print graph statistics per binary");
  stats->add_option("binaries", binaries, "ELF files")->required()->check(CLI::ExistingFile);
  stats->add_flag("--coverage", coverage,
                  "Compare against recovery from the entry point alone");

  auto* prepare = app.add_subcommand("prepare", "Tag graphs and write train/test datasets");
  prepare->add_option("manifest", manifest, "Manifest TSV")->required()->check(CLI::ExistingFile);
  prepare->add_option("-o,--out", out_dir, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train a model on a dataset file");
  train->add_option("data", data, "Dataset file")->required()->check(CLI::ExistingFile);
  train->add_option("-m,--model", model, "Checkpoint to write")->required();
  train->add_option("--report", report, "Per-epoch loss and accuracy TSV");

  auto* evaluate = app.add_subcommand("evaluate", "Score a model on a dataset file");
  evaluate->add_option("model", model, "Checkpoint")->required()->check(CLI::ExistingFile);
  evaluate->add_option("data", data, "Dataset file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--format", format, "table or kv")
      ->check(CLI::IsMember({"table", "kv"}))
      ->capture_default_str();

  auto* predict = app.add_subcommand("predict", "Classify the graphs in a file");
  predict->add_option("model", model, "Checkpoint")->required()->check(CLI::ExistingFile);
  predict->add_option("graphs", data, "Graph file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    finish_options(o);
    const cli::Logger log(std::cerr, o.config.log_level);
    if (o.mode == "gpu") log.warn("no GPU backend; running on the CPU");

    if (extract->parsed()) {
      const auto s = cli::cmd_extract(binaries, out_dir, o.config, log);
      std::cout << cli::format_stats_table(s.succeeded);
    } else if (stats->parsed()) {
      std::cout << cli::format_stats_table(cli::cmd_stats(binaries, coverage, o.config, log));
    } else if (prepare->parsed()) {
      const auto s = cli::cmd_prepare(manifest, out_dir, o.config, log);
      std::cout << "train_graphs=" << s.train_graphs << "\ntest_graphs=" << s.test_graphs
                << "\ntags=" << s.tags << '\n';
    } else if (train->parsed()) {
      const auto s = cli::cmd_train(data, model, report, o.config, log);
      std::cout << "feat_dim=" << s.hp.feat_dim << "\nnum_class=" << s.hp.num_class << '\n';
      if (!s.report.epoch_loss.empty()) {
        std::cout << "final_loss=" << s.report.epoch_loss.back()
                  << "\ntrain_accuracy=" << s.report.epoch_accuracy.back() << '\n';
      }
    } else if (evaluate->parsed()) {
      const auto s = cli::cmd_evaluate(model, data, o.config, log);
      std::cout << (format == "kv" ? eval::format_key_values(s.confusion, s.metrics)
                                   : eval::format_report(s.confusion, s.metrics));
    } else if (predict->parsed()) {
      for (const auto& p : cli::cmd_predict(model, data, o.config, log)) print_prediction(p);
    }
  } catch (const cli::CliError& e) {
    std::cerr << "armgraph: " << e.what() << '\n';
    return e.kind() == cli::CliErrc::kUsage ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "armgraph: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "armgraph/cfg_recovery.hpp"
#include "armgraph/error.hpp"
#include "armgraph/evaluation.hpp"
#include "armgraph/s2v_model.hpp"

namespace armgraph::cli {

namespace fs = std::filesystem;

enum class CliErrc { kUsage, kNoSamples, kDatasetMismatch, kIoError };
using CliError = Error<CliErrc>;

enum class GraphSource { kCallGraph, kCfg };
enum class LogLevel { kError, kWarn, kInfo, kDebug };

struct RunConfig {
  s2v::Hyperparams hp;
  std::vector<fs::path> ld_paths;
  // Per-sample library folders live at <lib_root>/<sha256 of the sample>.
  std::optional<fs::path> lib_root;
  bool strict_libs = false;
  GraphSource graph_source = GraphSource::kCallGraph;
  bool include_library_nodes = false;
  std::size_t jobs = 0;  // 0: one per hardware thread
  LogLevel log_level = LogLevel::kInfo;
};

// Leveled logging to a stream (standard error in the tool).
class Logger {
 public:
  Logger(std::ostream& out, LogLevel level) : out_(out), level_(level) {}
  void error(const std::string& msg) const { write(LogLevel::kError, "error", msg); }
  void warn(const std::string& msg) const { write(LogLevel::kWarn, "warn", msg); }
  void info(const std::string& msg) const { write(LogLevel::kInfo, "info", msg); }
  void debug(const std::string& msg) const { write(LogLevel::kDebug, "debug", msg); }

 private:
  void write(LogLevel level, const char* tag, const std::string& msg) const;
  std::ostream& out_;
  LogLevel level_;
};

struct SampleStats {
  std::string sample;
  cfg::GraphStats cfg;
  std::size_t functions = 0;
  std::size_t call_graph_nodes = 0;
  std::size_t call_graph_edges = 0;
  std::size_t libraries = 0;
  std::optional<cfg::CoverageQuadrants> coverage;
};

std::string format_stats_table(const std::vector<SampleStats>& rows);

// Library search paths for one sample: the configured paths, then every
// directory holding a shared library below <lib_root>/<sha256>.
std::vector<fs::path> library_search_paths(const fs::path& binary, const RunConfig& config);

struct ExtractSummary {
  std::vector<SampleStats> succeeded;
  std::vector<std::string> failed;
};

// Writes <sample>.cfg.edges, <sample>.callgraph.edges and stats.tsv into
// out_dir. Per-sample failures are logged; throws kNoSamples if none succeed.
ExtractSummary cmd_extract(const std::vector<fs::path>& binaries, const fs::path& out_dir,
                           const RunConfig& config, const Logger& log);

// Stats table for each binary; with `coverage`, also compares recovery seeded
// from symbols and prologues against recovery from the entry point alone.
std::vector<SampleStats> cmd_stats(const std::vector<fs::path>& binaries, bool coverage,
                                   const RunConfig& config, const Logger& log);

struct PrepareSummary {
  std::size_t train_graphs = 0;
  std::size_t test_graphs = 0;
  std::size_t tags = 0;
};

// Writes train.txt, test.txt, tags.tsv, train_manifest.tsv, test_manifest.tsv.
PrepareSummary cmd_prepare(const fs::path& manifest, const fs::path& out_dir,
                           const RunConfig& config, const Logger& log);

struct TrainSummary {
  s2v::Hyperparams hp;
  s2v::TrainReport report;
};

TrainSummary cmd_train(const fs::path& data, const fs::path& model_out,
                       const std::optional<fs::path>& report_out, const RunConfig& config,
                       const Logger& log);

struct EvaluateSummary {
  eval::ConfusionMatrix confusion;
  eval::MetricsReport metrics;
};

EvaluateSummary cmd_evaluate(const fs::path& model, const fs::path& data, const RunConfig& config,
                             const Logger& log);

std::vector<s2v::Prediction> cmd_predict(const fs::path& model, const fs::path& graph_file,
                                         const RunConfig& config, const Logger& log);

}  // namespace armgraph::cli

#include "armgraph/commands.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "armgraph/checkpoint.hpp"
#include "armgraph/dataset_format.hpp"
#include "armgraph/elf_loader.hpp"
#include "armgraph/graph_prep.hpp"

namespace armgraph::cli {
namespace {

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw CliError(CliErrc::kIoError, "cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size()))) {
    throw CliError(CliErrc::kIoError, "cannot write " + file.string());
  }
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError(CliErrc::kIoError, "cannot create " + dir.string() + ": " + ec.message());
}

std::size_t worker_count(const RunConfig& config, std::size_t tasks) {
  std::size_t n = config.jobs != 0 ? config.jobs : std::thread::hardware_concurrency();
  return std::clamp<std::size_t>(n, 1, std::max<std::size_t>(tasks, 1));
}

// Runs fn(i) for i in [0, count) on a pool of threads. fn must not throw.
template <typename F>
void parallel_for(std::size_t count, std::size_t workers, F fn) {
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i = next++; i < count; i = next++) fn(i);
  };
  std::vector<std::jthread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
}

struct Recovered {
  cfg::RecoveryResult recovery;
  std::size_t libraries = 0;
};

Recovered recover_binary(const fs::path& binary, const RunConfig& config,
                         const cfg::RecoveryOptions& options = {}) {
  const auto image = elf::load_executable(binary);
  const auto libs =
      elf::resolve_dependencies(image, library_search_paths(binary, config), config.strict_libs);
  return {cfg::recover_cfg(image, libs, options), libs.size()};
}

SampleStats stats_of(const std::string& sample, const Recovered& r) {
  SampleStats s;
  s.sample = sample;
  s.cfg = cfg::compute_stats(r.recovery.cfg);
  s.functions = r.recovery.functions.size();
  s.call_graph_nodes = r.recovery.call_graph.nodes.size();
  s.call_graph_edges = r.recovery.call_graph.edges.size();
  s.libraries = r.libraries;
  return s;
}

// Unique, filesystem-friendly sample names derived from file names.
std::vector<std::string> sample_names(const std::vector<fs::path>& binaries) {
  std::vector<std::string> names;
  std::set<std::string> used;
  for (const auto& b : binaries) {
    std::string base = b.filename().string();
    std::string name = base;
    for (int k = 2; !used.insert(name).second; ++k) name = base + "-" + std::to_string(k);
    names.push_back(name);
  }
  return names;
}

// Rethrows the active exception with `context` prefixed, keeping its type.
template <typename E>
[[noreturn]] void rethrow_with(const E& e, const std::string& context) {
  throw E(e.kind(), context + ": " + e.what());
}

[[noreturn]] void rethrow_current_with(const std::string& context) {
  try {
    throw;
  } catch (const elf::ElfError& e) {
    rethrow_with(e, context);
  } catch (const cfg::CfgError& e) {
    rethrow_with(e, context);
  } catch (const prep::PrepError& e) {
    rethrow_with(e, context);
  }
}

s2v::Checkpoint load_model(const fs::path& model, const RunConfig& config) {
  auto ckpt = s2v::load_checkpoint(model);
  const auto& want = config.hp;
  if (want.feat_dim != 0 && want.feat_dim != ckpt.hp.feat_dim) {
    throw CliError(CliErrc::kDatasetMismatch,
                   "feat_dim " + std::to_string(want.feat_dim) + " requested but the checkpoint has " +
                       std::to_string(ckpt.hp.feat_dim));
  }
  if (want.num_class != 0 && want.num_class != ckpt.hp.num_class) {
    throw CliError(CliErrc::kDatasetMismatch,
                   "num_class " + std::to_string(want.num_class) +
                       " requested but the checkpoint has " + std::to_string(ckpt.hp.num_class));
  }
  return ckpt;
}

}  // namespace

void Logger::write(LogLevel level, const char* tag, const std::string& msg) const {
  if (level > level_) return;
  static std::mutex mu;
  std::lock_guard lock(mu);
  out_ << '[' << tag << "] " << msg << '\n';
}

std::string format_stats_table(const std::vector<SampleStats>& rows) {
  std::ostringstream os;
  os << "sample\tnodes\tedges\tweak_components\tsyscall_nodes\tfunctions\tcg_nodes\tcg_edges"
        "\tlibraries";
  for (auto k : {cfg::JumpKind::kFallthrough, cfg::JumpKind::kJump, cfg::JumpKind::kCondJump,
                 cfg::JumpKind::kCall, cfg::JumpKind::kCallReturn}) {
    os << "\tedges_" << cfg::to_string(k);
  }
  const bool coverage = std::any_of(rows.begin(), rows.end(),
                                    [](const SampleStats& s) { return s.coverage.has_value(); });
  if (coverage) os << "\tonly_full\tonly_entry\tboth\tneither";
  os << '\n';
  for (const auto& r : rows) {
    os << r.sample << '\t' << r.cfg.node_count << '\t' << r.cfg.edge_count << '\t'
       << r.cfg.weak_component_count << '\t' << r.cfg.syscall_node_count << '\t' << r.functions
       << '\t' << r.call_graph_nodes << '\t' << r.call_graph_edges << '\t' << r.libraries;
    for (auto k : {cfg::JumpKind::kFallthrough, cfg::JumpKind::kJump, cfg::JumpKind::kCondJump,
                   cfg::JumpKind::kCall, cfg::JumpKind::kCallReturn}) {
      auto it = r.cfg.edges_by_kind.find(k);
      os << '\t' << (it == r.cfg.edges_by_kind.end() ? 0 : it->second);
    }
    if (coverage) {
      const auto q = r.coverage.value_or(cfg::CoverageQuadrants{});
      os << '\t' << q.only_a << '\t' << q.only_b << '\t' << q.both << '\t' << q.neither;
    }
    os << '\n';
  }
  return os.str();
}

std::vector<fs::path> library_search_paths(const fs::path& binary, const RunConfig& config) {
  std::vector<fs::path> paths = config.ld_paths;
  if (!config.lib_root) return paths;
  const fs::path dir = *config.lib_root / prep::compute_sha256(binary);
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return paths;
  for (const auto& lib : prep::collect_shared_libraries(dir)) {
    const fs::path parent = lib.parent_path();
    if (std::find(paths.begin(), paths.end(), parent) == paths.end()) paths.push_back(parent);
  }
  return paths;
}

ExtractSummary cmd_extract(const std::vector<fs::path>& binaries, const fs::path& out_dir,
                           const RunConfig& config, const Logger& log) {
  if (binaries.empty()) throw CliError(CliErrc::kUsage, "no input binaries given");
  ensure_directory(out_dir);
  const auto names = sample_names(binaries);

  std::vector<std::optional<SampleStats>> stats(binaries.size());
  std::vector<std::string> errors(binaries.size());
  parallel_for(binaries.size(), worker_count(config, binaries.size()), [&](std::size_t i) {
    try {
      const Recovered r = recover_binary(binaries[i], config);
      for (const auto& d : r.recovery.diagnostics) log.debug(names[i] + ": " + d);
      write_text(out_dir / (names[i] + ".cfg.edges"), cfg::write_edge_list(r.recovery.cfg));
      write_text(out_dir / (names[i] + ".callgraph.edges"),
                 cfg::write_edge_list(r.recovery.call_graph));
      stats[i] = stats_of(names[i], r);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  ExtractSummary summary;
  for (std::size_t i = 0; i < binaries.size(); ++i) {
    if (stats[i]) {
      summary.succeeded.push_back(std::move(*stats[i]));
    } else {
      log.error(binaries[i].string() + ": " + errors[i]);
      summary.failed.push_back(binaries[i].string());
    }
  }
  write_text(out_dir / "stats.tsv", format_stats_table(summary.succeeded));
  log.info("extracted " + std::to_string(summary.succeeded.size()) + " of " +
           std::to_string(binaries.size()) + " samples");
  if (summary.succeeded.empty()) throw CliError(CliErrc::kNoSamples, "no sample could be extracted");
  return summary;
}

std::vector<SampleStats> cmd_stats(const std::vector<fs::path>& binaries, bool coverage,
                                   const RunConfig& config, const Logger& log) {
  if (binaries.empty()) throw CliError(CliErrc::kUsage, "no input binaries given");
  const auto names = sample_names(binaries);
  std::vector<SampleStats> rows;
  for (std::size_t i = 0; i < binaries.size(); ++i) {
    try {
      const Recovered full = recover_binary(binaries[i], config);
      SampleStats s = stats_of(names[i], full);
      if (coverage) {
        const Recovered bare = recover_binary(binaries[i], config, {false, false});
        const auto image = elf::load_executable(binaries[i]);
        const auto universe = cfg::instruction_universe(image);
        // Library code lies outside the image universe.
        auto restrict = [&universe](cfg::GraphStats g) {
          std::erase_if(g.covered_addresses,
                        [&universe](cfg::Address a) { return !universe.contains(a); });
          return g;
        };
        s.coverage = cfg::coverage_compare(restrict(s.cfg), restrict(cfg::compute_stats(bare.recovery.cfg)),
                                           universe);
      }
      rows.push_back(std::move(s));
    } catch (const std::exception& e) {
      log.error(binaries[i].string() + ": " + e.what());
    }
  }
  if (rows.empty()) throw CliError(CliErrc::kNoSamples, "no sample could be analysed");
  return rows;
}

PrepareSummary cmd_prepare(const fs::path& manifest_path, const fs::path& out_dir,
                           const RunConfig& config, const Logger& log) {
  // Tags are assigned in manifest order.
  const auto manifest = prep::load_manifest(manifest_path);
  // Fail fast on class balance before the expensive recovery.
  const auto split = prep::balance_and_split(manifest, config.hp.seed, config.hp.train_fraction);

  const auto& records = manifest.records;
  std::vector<std::optional<cfg::RecoveryResult>> recovered(records.size());
  std::vector<std::exception_ptr> failures(records.size());
  parallel_for(records.size(), worker_count(config, records.size()), [&](std::size_t i) {
    try {
      const auto digest = prep::compute_sha256(records[i].path);
      if (digest != records[i].sha256) {
        throw prep::PrepError(prep::PrepErrc::kInvalidManifest,
                              "sha256 mismatch (file has " + digest + ")");
      }
      recovered[i] = recover_binary(records[i].path, config).recovery;
    } catch (...) {
      failures[i] = std::current_exception();
    }
  });

  prep::TagDictionary dict;
  std::map<std::string, LabeledGraph> graphs;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string context = "sample " + records[i].sample_id;
    try {
      if (failures[i]) std::rethrow_exception(failures[i]);
      const auto& r = *recovered[i];
      const auto blocks = prep::taggable_blocks(r, config.include_library_nodes);
      dict = prep::extend_tag_dictionary(blocks, std::move(dict));

      LabeledGraph g;
      if (config.graph_source == GraphSource::kCfg) {
        cfg::ControlFlowGraph cfg = r.cfg;
        if (!config.include_library_nodes) {
          std::erase_if(cfg.nodes, [&r](const auto& kv) {
            auto it = r.block_origin.find(kv.first);
            return it != r.block_origin.end() && it->second != cfg::FunctionOrigin::kImage;
          });
          std::erase_if(cfg.edges, [&cfg](const cfg::Edge& e) {
            return !cfg.nodes.contains(e.src) || !cfg.nodes.contains(e.dst);
          });
        }
        g = prep::cfg_to_labeled_graph(cfg, dict);
      } else {
        const auto cg = config.include_library_nodes
                            ? r.call_graph
                            : prep::drop_library_functions(r.call_graph, r.functions);
        g = prep::select_call_graph_nodes(r.cfg, cg, dict);
      }
      g = to_undirected(std::move(g));
      g.label = records[i].label;
      graphs.emplace(records[i].sample_id, std::move(g));
      log.debug(context + ": " + std::to_string(graphs.at(records[i].sample_id).node_count()) +
                " nodes");
    } catch (const std::exception&) {
      rethrow_current_with(context);
    }
  }

  auto collect = [&graphs](const prep::DatasetManifest& part) {
    std::vector<LabeledGraph> out;
    for (const auto& r : part.records) out.push_back(graphs.at(r.sample_id));
    return out;
  };
  const auto train = collect(split.train);
  const auto test = collect(split.test);

  ensure_directory(out_dir);
  write_text(out_dir / "train.txt", format::write_dataset(train));
  write_text(out_dir / "test.txt", format::write_dataset(test));
  write_text(out_dir / "tags.tsv", prep::write_tag_dictionary(dict));
  write_text(out_dir / "train_manifest.tsv", prep::write_manifest(split.train));
  write_text(out_dir / "test_manifest.tsv", prep::write_manifest(split.test));
  log.info("prepared " + std::to_string(train.size()) + " training and " +
           std::to_string(test.size()) + " test graphs with " + std::to_string(dict.size()) +
           " tags");
  return {train.size(), test.size(), dict.size()};
}

TrainSummary cmd_train(const fs::path& data, const fs::path& model_out,
                       const std::optional<fs::path>& report_out, const RunConfig& config,
                       const Logger& log) {
  const auto dataset = format::read_dataset(read_text(data));
  auto result = s2v::train<double>(dataset.graphs, config.hp);
  s2v::save_checkpoint({result.hp, result.params}, model_out);

  if (report_out) {
    std::ostringstream os;
    os << "epoch\tmean_loss\ttrain_accuracy\n" << std::setprecision(17);
    for (std::size_t e = 0; e < result.report.epoch_loss.size(); ++e) {
      os << e + 1 << '\t' << result.report.epoch_loss[e] << '\t' << result.report.epoch_accuracy[e]
         << '\n';
    }
    os << "# wall_seconds\t" << result.report.wall_seconds << '\n';
    write_text(*report_out, os.str());
  }
  if (!result.report.epoch_loss.empty()) {
    log.info("trained " + std::to_string(result.report.epoch_loss.size()) + " epochs, final loss " +
             std::to_string(result.report.epoch_loss.back()) + ", training accuracy " +
             std::to_string(result.report.epoch_accuracy.back()));
  }
  return {result.hp, std::move(result.report)};
}

EvaluateSummary cmd_evaluate(const fs::path& model, const fs::path& data, const RunConfig& config,
                             const Logger& log) {
  const auto ckpt = load_model(model, config);
  const auto dataset = format::read_dataset(read_text(data));
  std::vector<int> predicted;
  std::vector<int> truth;
  for (const auto& g : dataset.graphs) {
    if (static_cast<std::size_t>(g.label) >= ckpt.hp.num_class) {
      throw CliError(CliErrc::kDatasetMismatch,
                     "label " + std::to_string(g.label) + " outside the model's " +
                         std::to_string(ckpt.hp.num_class) + " classes");
    }
    const auto p = s2v::predict(s2v::clamp_unknown_tags(g, ckpt.hp.feat_dim), ckpt.params, ckpt.hp);
    predicted.push_back(static_cast<int>(p.label));
    truth.push_back(g.label);
  }
  EvaluateSummary s;
  s.confusion = eval::confusion(predicted, truth);
  s.metrics = eval::metrics(s.confusion);
  log.info("evaluated " + std::to_string(truth.size()) + " graphs");
  return s;
}

std::vector<s2v::Prediction> cmd_predict(const fs::path& model, const fs::path& graph_file,
                                         const RunConfig& config, const Logger& log) {
  const auto ckpt = load_model(model, config);
  const auto dataset = format::read_dataset(read_text(graph_file));
  std::vector<s2v::Prediction> out;
  for (const auto& g : dataset.graphs) {
    out.push_back(s2v::predict(s2v::clamp_unknown_tags(g, ckpt.hp.feat_dim), ckpt.params, ckpt.hp));
  }
  log.debug("predicted " + std::to_string(out.size()) + " graphs");
  return out;
}

}  // namespace armgraph::cli

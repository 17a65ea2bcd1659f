#include <doctest.h>

#include <fstream>
#include <sstream>

#include "armgraph/checkpoint.hpp"
#include "armgraph/commands.hpp"
#include "armgraph/dataset_format.hpp"
#include "armgraph/graph_prep.hpp"
#include "synthetic.hpp"

using namespace armgraph;
using namespace armgraph::cli;
namespace t = armgraph::testing;

namespace {

const std::string kData = ARMGRAPH_TEST_DATA_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Fixture {
  fs::path dir = t::scratch_dir("cmd");
  std::ostringstream log_text;
  Logger log{log_text, LogLevel::kDebug};
  RunConfig config;

  Fixture() {
    config.hp.latent_dim = 16;
    config.hp.out_dim = 32;
    config.hp.hidden = 16;
    config.hp.num_epochs = 200;
    config.hp.train_fraction = 0.5;
  }
  ~Fixture() { fs::remove_all(dir); }
};

template <typename F>
CliErrc cli_error_of(F f) {
  try {
    f();
  } catch (const CliError& e) {
    return e.kind();
  }
  FAIL("no CliError");
  return CliErrc::kIoError;
}

}  // namespace

TEST_CASE_FIXTURE(Fixture, "extract") {
  const auto s = cmd_extract({kData + "/three_func.elf"}, dir / "out", config, log);
  REQUIRE(s.succeeded.size() == 1);
  CHECK(s.succeeded[0].cfg.node_count >= 3);
  CHECK(s.succeeded[0].call_graph_edges == 3);
  CHECK(slurp(dir / "out/three_func.elf.callgraph.edges") ==
        "0x1004 0x1000 call\n0x100c 0x1000 call\n0x100c 0x1004 call\n");
  CHECK(fs::exists(dir / "out/three_func.elf.cfg.edges"));
  CHECK(slurp(dir / "out/stats.tsv").find("three_func.elf\t6\t6\t1\t0") != std::string::npos);
}

TEST_CASE_FIXTURE(Fixture, "extract keeps going past a bad sample") {
  t::write_file(dir / "junk.elf", {1, 2, 3});
  const auto s = cmd_extract({kData + "/three_func.elf", dir / "junk.elf", kData + "/minimal.elf"},
                             dir / "out", config, log);
  CHECK(s.succeeded.size() == 2);
  REQUIRE(s.failed.size() == 1);
  CHECK(s.failed[0] == (dir / "junk.elf").string());
  CHECK(log_text.str().find("junk.elf") != std::string::npos);
  CHECK(fs::exists(dir / "out/minimal.elf.cfg.edges"));
  CHECK_FALSE(fs::exists(dir / "out/junk.elf.cfg.edges"));

  CHECK(cli_error_of([&] { cmd_extract({}, dir / "out", config, log); }) == CliErrc::kUsage);
  CHECK(cli_error_of([&] { cmd_extract({dir / "junk.elf"}, dir / "out", config, log); }) ==
        CliErrc::kNoSamples);
}

TEST_CASE_FIXTURE(Fixture, "duplicate file names get distinct outputs") {
  fs::create_directories(dir / "x");
  fs::copy_file(kData + "/minimal.elf", dir / "x/minimal.elf");
  const auto s = cmd_extract({kData + "/minimal.elf", dir / "x/minimal.elf"}, dir / "out", config, log);
  REQUIRE(s.succeeded.size() == 2);
  CHECK(s.succeeded[0].sample != s.succeeded[1].sample);
}

TEST_CASE_FIXTURE(Fixture, "libraries come from search paths and the per-sample root") {
  config.ld_paths = {kData + "/libs"};
  auto rows = cmd_stats({kData + "/dynamic.elf"}, false, config, log);
  CHECK(rows[0].libraries == 1);

  config.ld_paths.clear();
  rows = cmd_stats({kData + "/dynamic.elf"}, false, config, log);
  CHECK(rows[0].libraries == 0);

  const auto digest = prep::compute_sha256(kData + "/dynamic.elf");
  fs::create_directories(dir / "root" / digest / "lib");
  fs::copy_file(kData + "/libs/libc.so", dir / "root" / digest / "lib/libc.so");
  config.lib_root = dir / "root";
  CHECK(library_search_paths(kData + "/dynamic.elf", config) ==
        std::vector<fs::path>{dir / "root" / digest / "lib"});
  rows = cmd_stats({kData + "/dynamic.elf"}, false, config, log);
  CHECK(rows[0].libraries == 1);

  config.lib_root.reset();
  config.strict_libs = true;
  CHECK(cli_error_of([&] { cmd_stats({kData + "/dynamic.elf"}, false, config, log); }) ==
        CliErrc::kNoSamples);
}

TEST_CASE_FIXTURE(Fixture, "stats with coverage") {
  // The unreachable prologue function is only found with the heuristic.
  t::ElfSpec spec;
  spec.entry = 0x1000;
  spec.sections.push_back(
      {".text", 0x1000, t::a32::bytes({t::a32::kBxLr, t::a32::kPushLr, t::a32::kPopPc})});
  t::write_file(dir / "p.elf", t::build_elf(spec));
  const auto rows = cmd_stats({dir / "p.elf"}, true, config, log);
  REQUIRE(rows[0].coverage.has_value());
  CHECK(*rows[0].coverage == cfg::CoverageQuadrants{2, 0, 1, 0});
  CHECK(format_stats_table(rows).find("\t2\t0\t1\t0\n") != std::string::npos);
}

TEST_CASE_FIXTURE(Fixture, "prepare, train, evaluate, predict") {
  const auto manifest = t::write_corpus(dir / "corpus");
  const auto before = slurp(manifest);
  const auto prepared = cmd_prepare(manifest, dir / "data", config, log);
  CHECK(prepared.train_graphs == 2);
  CHECK(prepared.test_graphs == 2);
  CHECK(slurp(manifest) == before);

  const auto train = format::read_dataset(slurp(dir / "data/train.txt"));
  CHECK(train.graphs.size() == 2);
  CHECK(format::read_dataset(slurp(dir / "data/test.txt")).graphs.size() == 2);
  CHECK(prep::read_tag_dictionary(slurp(dir / "data/tags.tsv")).size() == prepared.tags);
  CHECK(prep::read_manifest(slurp(dir / "data/train_manifest.tsv")).records.size() == 2);

  const auto trained = cmd_train(dir / "data/train.txt", dir / "model.bin", dir / "report.tsv", config, log);
  CHECK(trained.report.epoch_loss.size() == 200);
  CHECK(slurp(dir / "report.tsv").rfind("epoch\tmean_loss\ttrain_accuracy\n", 0) == 0);

  const auto eval = cmd_evaluate(dir / "model.bin", dir / "data/test.txt", config, log);
  CHECK(eval.metrics.accuracy == 1.0);
  const auto preds = cmd_predict(dir / "model.bin", dir / "data/test.txt", config, log);
  CHECK(preds.size() == 2);

  auto mismatch = config;
  mismatch.hp.feat_dim = trained.hp.feat_dim + 1;
  CHECK(cli_error_of([&] { cmd_evaluate(dir / "model.bin", dir / "data/test.txt", mismatch, log); }) ==
        CliErrc::kDatasetMismatch);
  mismatch = config;
  mismatch.hp.num_class = 3;
  CHECK(cli_error_of([&] { cmd_predict(dir / "model.bin", dir / "data/test.txt", mismatch, log); }) ==
        CliErrc::kDatasetMismatch);
}

TEST_CASE_FIXTURE(Fixture, "prepare over whole CFGs") {
  const auto manifest = t::write_corpus(dir / "corpus");
  config.graph_source = GraphSource::kCfg;
  cmd_prepare(manifest, dir / "data", config, log);
  const auto train = format::read_dataset(slurp(dir / "data/train.txt"));
  // Call blocks split every function, so CFGs outgrow call graphs.
  for (const auto& g : train.graphs) CHECK(g.node_count() > 3);
}

TEST_CASE_FIXTURE(Fixture, "prepare is deterministic across job counts") {
  const auto manifest = t::write_corpus(dir / "corpus");
  config.jobs = 4;
  cmd_prepare(manifest, dir / "a", config, log);
  config.jobs = 1;
  cmd_prepare(manifest, dir / "b", config, log);
  for (const char* f : {"train.txt", "test.txt", "tags.tsv", "train_manifest.tsv", "test_manifest.tsv"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
}

TEST_CASE_FIXTURE(Fixture, "prepare errors carry the sample") {
  const auto manifest = t::write_corpus(dir / "corpus");
  {
    std::ofstream m(dir / "one_class.tsv");
    for (const auto& r : prep::load_manifest(manifest).records) {
      if (r.label == kMalwareLabel) m << r.sample_id << '\t' << r.path.string() << "\t0\t" << r.sha256 << '\n';
    }
  }
  try {
    cmd_prepare(dir / "one_class.tsv", dir / "out", config, log);
    FAIL("expected EmptyClass");
  } catch (const prep::PrepError& e) {
    CHECK(e.kind() == prep::PrepErrc::kEmptyClass);
  }

  t::write_file(dir / "corpus/mal1.elf", {0x7f, 'E', 'L', 'F'});
  try {
    cmd_prepare(manifest, dir / "out", config, log);
    FAIL("expected a digest mismatch");
  } catch (const prep::PrepError& e) {
    CHECK(e.kind() == prep::PrepErrc::kInvalidManifest);
    CHECK(std::string(e.what()).find("mal1") != std::string::npos);
  }
}

TEST_CASE_FIXTURE(Fixture, "zero checkpoint predicts class 0 at even odds") {
  s2v::Hyperparams hp;
  hp.feat_dim = 3;
  hp.num_class = 2;
  hp.latent_dim = 2;
  hp.out_dim = 2;
  hp.hidden = 2;
  s2v::save_checkpoint({hp, s2v::ModelParams<double>::zeros(hp)}, dir / "zero.bin");
  std::ofstream(dir / "g.txt") << format::write_dataset({{{1, 2, 9}, {{0, 1}, {1, 2}}, 0}});
  const auto preds = cmd_predict(dir / "zero.bin", dir / "g.txt", config, log);
  REQUIRE(preds.size() == 1);
  CHECK(preds[0].label == 0);
  CHECK(preds[0].probs == std::vector<double>{0.5, 0.5});
}

TEST_CASE_FIXTURE(Fixture, "evaluate rejects labels outside the model") {
  s2v::Hyperparams hp;
  hp.feat_dim = 1;
  hp.num_class = 2;
  hp.latent_dim = hp.out_dim = hp.hidden = 1;
  s2v::save_checkpoint({hp, s2v::ModelParams<double>::zeros(hp)}, dir / "zero.bin");
  std::ofstream(dir / "g.txt") << "1\n1 5\n1 0\n";
  CHECK(cli_error_of([&] { cmd_evaluate(dir / "zero.bin", dir / "g.txt", config, log); }) ==
        CliErrc::kDatasetMismatch);
}

TEST_CASE("logger filters by level") {
  std::ostringstream out;
  const Logger log(out, LogLevel::kWarn);
  log.info("hidden");
  log.debug("hidden");
  log.warn("shown");
  log.error("shown too");
  CHECK(out.str() == "[warn] shown\n[error] shown too\n");
}

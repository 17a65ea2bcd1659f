#include <doctest.h>

#include "armgraph/checkpoint.hpp"
#include "synthetic.hpp"

using namespace armgraph;
using namespace armgraph::s2v;

namespace {

Checkpoint sample_checkpoint() {
  Hyperparams hp;
  hp.feat_dim = 3;
  hp.num_class = 2;
  hp.latent_dim = 4;
  hp.out_dim = 5;
  hp.hidden = 2;
  hp.learning_rate = 0.00123;
  hp.optimizer = Optimizer::kSgd;
  Rng rng(99);
  return {hp, initialize<double>(hp, rng)};
}

CheckpointErrc error_of(const std::string& bytes) {
  try {
    deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  FAIL("deserialize succeeded");
  return CheckpointErrc::kIoError;
}

}  // namespace

TEST_CASE("round trip is bit exact") {
  const auto ckpt = sample_checkpoint();
  const auto bytes = serialize_checkpoint(ckpt);
  CHECK(bytes.substr(0, 8) == "S2VMODEL");
  CHECK(deserialize_checkpoint(bytes) == ckpt);
  CHECK(serialize_checkpoint(deserialize_checkpoint(bytes)) == bytes);
}

TEST_CASE("file round trip") {
  const auto dir = testing::scratch_dir("ckpt");
  const auto ckpt = sample_checkpoint();
  save_checkpoint(ckpt, dir / "m.bin");
  CHECK(load_checkpoint(dir / "m.bin") == ckpt);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.bin"), CheckpointError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed checkpoints") {
  const auto bytes = serialize_checkpoint(sample_checkpoint());
  CHECK(error_of("NOTMODEL" + bytes.substr(8)) == CheckpointErrc::kBadMagic);
  CHECK(error_of("S2V") == CheckpointErrc::kTruncated);
  CHECK(error_of(bytes.substr(0, bytes.size() - 1)) == CheckpointErrc::kTruncated);
  CHECK(error_of(bytes + "x") == CheckpointErrc::kInvalid);
  auto bumped = bytes;
  bumped[8] = 2;
  CHECK(error_of(bumped) == CheckpointErrc::kUnsupportedVersion);
  auto bad_gm = bytes;
  bad_gm[12] = 7;
  CHECK(error_of(bad_gm) == CheckpointErrc::kInvalid);
}

TEST_CASE("tensor shapes must match the header") {
  auto ckpt = sample_checkpoint();
  ckpt.hp.hidden = 3;
  CHECK_THROWS_AS(serialize_checkpoint(ckpt), CheckpointError);
}

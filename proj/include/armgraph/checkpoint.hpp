#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "armgraph/error.hpp"
#include "armgraph/s2v_model.hpp"

namespace armgraph::s2v {

enum class CheckpointErrc { kBadMagic, kUnsupportedVersion, kTruncated, kInvalid, kIoError };
using CheckpointError = Error<CheckpointErrc>;

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Hyperparams hp;
  ModelParams<double> params;

  bool operator==(const Checkpoint&) const = default;
};

// Layout, all little-endian:
//   "S2VMODEL" | u32 version
//   u32 gm | u32 optimizer | u64 batch_size | u64 seed | u64 feat_dim |
//   u64 num_class | u64 num_epochs | u64 latent_dim | u64 out_dim |
//   u64 hidden | u64 max_lv | f64 learning_rate | f64 train_fraction
//   8 tensors (w_node, w_msg, w_out, b_out, w_h, b_h, w_c, b_c), each as
//   u64 rows | u64 cols | rows*cols f64 in row-major order.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& file);
Checkpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace armgraph::s2v

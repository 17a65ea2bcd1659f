#include "armgraph/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace armgraph::s2v {
namespace {

constexpr char kMagic[8] = {'S', '2', 'V', 'M', 'O', 'D', 'E', 'L'};

class Writer {
 public:
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  template <typename M>
  void tensor(const M& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
  }

  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw CheckpointError(CheckpointErrc::kTruncated, "checkpoint is truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<std::uint8_t>(in_[pos_ + i])} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<std::uint8_t>(in_[pos_ + i])} << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }

  template <typename M>
  void tensor(M& m, std::uint64_t rows, std::uint64_t cols, const char* name) {
    const std::uint64_t r = u64();
    const std::uint64_t c = u64();
    if (r != rows || c != cols) {
      throw CheckpointError(CheckpointErrc::kInvalid,
                            std::string("tensor ") + name + " has shape " + std::to_string(r) + "x" +
                                std::to_string(c) + ", expected " + std::to_string(rows) + "x" +
                                std::to_string(cols));
    }
    need(r * c * 8);
    m.resize(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = f64();
    }
  }

  bool at_end() const { return pos_ == in_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const Hyperparams& hp = ckpt.hp;
  if (!ckpt.params.matches(hp)) {
    throw CheckpointError(CheckpointErrc::kInvalid, "parameters do not match hyperparameters");
  }
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(hp.gm));
  w.u32(static_cast<std::uint32_t>(hp.optimizer));
  for (std::uint64_t v : {std::uint64_t{hp.batch_size}, hp.seed, std::uint64_t{hp.feat_dim},
                          std::uint64_t{hp.num_class}, std::uint64_t{hp.num_epochs},
                          std::uint64_t{hp.latent_dim}, std::uint64_t{hp.out_dim},
                          std::uint64_t{hp.hidden}, std::uint64_t{hp.max_lv}}) {
    w.u64(v);
  }
  w.f64(hp.learning_rate);
  w.f64(hp.train_fraction);
  const auto& p = ckpt.params;
  for_each_tensor([&w](const auto& t) { w.tensor(t); }, p);
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  const std::size_t head = std::min(bytes.size(), sizeof kMagic);
  if (std::memcmp(bytes.data(), kMagic, head) != 0) {
    throw CheckpointError(CheckpointErrc::kBadMagic, "not a model checkpoint");
  }
  if (head < sizeof kMagic) throw CheckpointError(CheckpointErrc::kTruncated, "checkpoint is truncated");
  Reader r(bytes);
  r.u64();  // magic
  Checkpoint ck;
  Hyperparams& hp = ck.hp;
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointErrc::kUnsupportedVersion,
                          "checkpoint version " + std::to_string(version) + " is not supported");
  }
  const std::uint32_t gm = r.u32();
  const std::uint32_t opt = r.u32();
  if (gm != static_cast<std::uint32_t>(GraphModel::kMeanField) || opt > 1) {
    throw CheckpointError(CheckpointErrc::kInvalid, "unknown model or optimizer id");
  }
  hp.gm = GraphModel::kMeanField;
  hp.optimizer = static_cast<Optimizer>(opt);
  hp.batch_size = r.u64();
  hp.seed = r.u64();
  hp.feat_dim = r.u64();
  hp.num_class = r.u64();
  hp.num_epochs = r.u64();
  hp.latent_dim = r.u64();
  hp.out_dim = r.u64();
  hp.hidden = r.u64();
  hp.max_lv = r.u64();
  hp.learning_rate = r.f64();
  hp.train_fraction = r.f64();

  auto& p = ck.params;
  r.tensor(p.w_node, hp.latent_dim, hp.feat_dim, "w_node");
  r.tensor(p.w_msg, hp.latent_dim, hp.latent_dim, "w_msg");
  r.tensor(p.w_out, hp.out_dim, hp.latent_dim, "w_out");
  r.tensor(p.b_out, hp.out_dim, 1, "b_out");
  r.tensor(p.w_h, hp.hidden, hp.out_dim, "w_h");
  r.tensor(p.b_h, hp.hidden, 1, "b_h");
  r.tensor(p.w_c, hp.num_class, hp.hidden, "w_c");
  r.tensor(p.b_c, hp.num_class, 1, "b_c");
  if (!r.at_end()) throw CheckpointError(CheckpointErrc::kInvalid, "trailing bytes after checkpoint");
  return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& file) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out || !out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
    throw CheckpointError(CheckpointErrc::kIoError, "cannot write " + file.string());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrc::kIoError, "cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace armgraph::s2v

#include "dkrg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

namespace dkrg {

namespace {

constexpr char kMagic[4] = {'D', 'K', 'R', 'G'};
constexpr std::uint32_t kRank = 4;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void array(const nn::Array4<float>& a) {
    u32(kRank);
    for (int d : a.dims()) u32(static_cast<std::uint32_t>(d));
    for (float v : a.storage()) f32(v);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  nn::Array4<float> array(const std::array<int, 4>& expected, const std::string& what) {
    const std::uint32_t rank = u32();
    if (rank != kRank) {
      throw CorruptCheckpointError("checkpoint: " + what + " has rank " + std::to_string(rank));
    }
    std::array<int, 4> dims{};
    for (int& d : dims) d = static_cast<int>(u32());
    if (dims != expected) {
      throw CorruptCheckpointError("checkpoint: shape mismatch for " + what);
    }
    nn::Array4<float> a(dims);
    need(a.size() * 4);
    for (float& v : a.storage()) v = f32();
    return a;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw CorruptCheckpointError("checkpoint: truncated file");
  }

  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kCheckpointVersion);
  const NetworkConfig& cfg = ck.params.config;
  w.i32(cfg.radius);
  w.i32(cfg.feature_depth);
  w.i32(cfg.residual_units);
  w.f64(cfg.dropout);
  w.u64(ck.iteration);
  w.bytes(ck.rng_state);

  w.u32(static_cast<std::uint32_t>(ck.params.entries.size()));
  for (const auto& p : ck.params.entries) {
    w.bytes(p.name);
    w.u8(p.trainable ? 1 : 0);
    w.array(p.value);
  }

  const nn::AdamState& opt = ck.optimizer;
  if (opt.m.size() != ck.params.entries.size() || opt.v.size() != ck.params.entries.size()) {
    throw std::invalid_argument("encode_checkpoint: optimizer state does not match parameters");
  }
  w.u64(opt.step);
  w.f32(opt.learning_rate);
  w.f32(opt.beta1);
  w.f32(opt.beta2);
  w.f32(opt.epsilon);
  w.u32(static_cast<std::uint32_t>(opt.m.size()));
  for (std::size_t k = 0; k < opt.m.size(); ++k) {
    w.array(opt.m[k]);
    w.array(opt.v[k]);
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointFormatError("checkpoint: bad magic (not a DKRG checkpoint)");
  }
  Reader r(bytes);
  for (int i = 0; i < 4; ++i) r.u8();
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointFormatError("checkpoint: unsupported version " + std::to_string(version));
  }

  NetworkConfig cfg;
  cfg.radius = r.i32();
  cfg.feature_depth = r.i32();
  cfg.residual_units = r.i32();
  cfg.dropout = r.f64();
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw CorruptCheckpointError(std::string("checkpoint: invalid config: ") + e.what());
  }

  Checkpoint ck;
  ck.iteration = r.u64();
  ck.rng_state = r.bytes();

  // The stored records must match the layout build_network produces.
  const NetworkParams<float> layout = build_network<float>(cfg, 0);
  const std::uint32_t count = r.u32();
  if (count != layout.entries.size()) {
    throw CorruptCheckpointError("checkpoint: expected " + std::to_string(layout.entries.size()) +
                                 " parameters, found " + std::to_string(count));
  }
  ck.params.config = cfg;
  for (const auto& expected : layout.entries) {
    nn::Parameter<float> p;
    p.name = r.bytes();
    if (p.name != expected.name) {
      throw CorruptCheckpointError("checkpoint: expected parameter " + expected.name +
                                   ", found " + p.name);
    }
    p.trainable = r.u8() != 0;
    p.value = r.array(expected.value.dims(), p.name);
    ck.params.entries.push_back(std::move(p));
  }

  nn::AdamState& opt = ck.optimizer;
  opt.step = r.u64();
  opt.learning_rate = r.f32();
  opt.beta1 = r.f32();
  opt.beta2 = r.f32();
  opt.epsilon = r.f32();
  if (r.u32() != count) throw CorruptCheckpointError("checkpoint: optimizer state size mismatch");
  for (const auto& p : ck.params.entries) {
    opt.m.push_back(r.array(p.value.dims(), p.name + " (m)"));
    opt.v.push_back(r.array(p.value.dims(), p.name + " (v)"));
  }
  if (!r.done()) throw CorruptCheckpointError("checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(checkpoint);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("save_checkpoint: cannot open " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("save_checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("load_checkpoint: cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

Checkpoint initial_checkpoint(const NetworkConfig& config, std::uint64_t seed,
                              float learning_rate) {
  Checkpoint ck;
  ck.params = build_network<float>(config, seed);
  ck.optimizer = nn::AdamState::for_parameters(ck.params.all(), learning_rate);
  // Separate stream from the one used for parameter initialization.
  std::mt19937_64 rng(seed ^ 0xD1B54A32D192ED03ULL);
  std::ostringstream state;
  state << rng;
  ck.rng_state = state.str();
  return ck;
}

}  // namespace dkrg

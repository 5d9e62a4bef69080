#include "vqwave/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "vqwave/error.hpp"

namespace vqwave::nn {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  void values(const Tensor& t) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.data());
    bytes.insert(bytes.end(), p, p + t.size() * sizeof(Scalar));
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}
  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void values(Tensor& t) {
    need(t.size() * sizeof(Scalar));
    std::memcpy(t.data(), bytes_.data() + pos_, t.size() * sizeof(Scalar));
    pos_ += t.size() * sizeof(Scalar);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw invalid_input("checkpoint is truncated");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Checkpoint Checkpoint::capture(const StateRegistry& reg, std::string config_text, std::int64_t optimizer_step) {
  Checkpoint c;
  c.config_text = std::move(config_text);
  c.optimizer_step = optimizer_step;
  for (const Parameter* p : reg.params) {
    CheckpointEntry e;
    e.is_parameter = true;
    e.value = p->value;
    e.adam_m = p->adam_m.same_shape(p->value) ? p->adam_m : Tensor(p->value.shape());
    e.adam_v = p->adam_v.same_shape(p->value) ? p->adam_v : Tensor(p->value.shape());
    if (!c.entries.emplace(p->name, std::move(e)).second) throw invalid_input("duplicate state name " + p->name);
  }
  for (const auto& b : reg.buffers) {
    CheckpointEntry e;
    e.value = *b.tensor;
    if (!c.entries.emplace(b.name, std::move(e)).second) throw invalid_input("duplicate state name " + b.name);
  }
  return c;
}

void Checkpoint::restore(const StateRegistry& reg) const {
  auto lookup = [&](const std::string& name, const Tensor& like, bool want_param) -> const CheckpointEntry& {
    const auto it = entries.find(name);
    if (it == entries.end()) throw incompatible("checkpoint is missing tensor '" + name + "'");
    if (it->second.is_parameter != want_param) throw incompatible("checkpoint tensor '" + name + "' has the wrong kind");
    if (it->second.value.shape() != like.shape()) {
      throw incompatible("checkpoint tensor '" + name + "' has shape " + it->second.value.shape_string() +
                         " but the configured model expects " + like.shape_string());
    }
    return it->second;
  };
  const std::size_t expected = reg.params.size() + reg.buffers.size();
  if (entries.size() != expected) {
    throw incompatible("checkpoint holds " + std::to_string(entries.size()) + " tensors but the model has " +
                       std::to_string(expected));
  }
  for (Parameter* p : reg.params) {
    const auto& e = lookup(p->name, p->value, true);
    p->value = e.value;
    p->adam_m = e.adam_m;
    p->adam_v = e.adam_v;
    p->grad = Tensor(p->value.shape());
  }
  for (const auto& b : reg.buffers) *b.tensor = lookup(b.name, *b.tensor, false).value;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes.insert(w.bytes.end(), {'V', 'Q', 'W', 'K'});
  w.pod(kCheckpointVersion);
  w.str(ckpt.config_text);
  w.pod(ckpt.optimizer_step);
  w.pod(static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& [name, e] : ckpt.entries) {
    w.str(name);
    w.pod(static_cast<std::uint8_t>(e.is_parameter ? 0 : 1));
    w.pod(static_cast<std::uint32_t>(e.value.shape().size()));
    for (auto d : e.value.shape()) w.pod(static_cast<std::uint64_t>(d));
    w.values(e.value);
    if (e.is_parameter) {
      w.values(e.adam_m);
      w.values(e.adam_v);
    }
  }
  return std::move(w.bytes);
}

Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), "VQWK", 4) != 0) throw invalid_input("not a checkpoint (bad magic)");
  Reader r(bytes);
  r.pod<std::uint32_t>();
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) throw invalid_input("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.config_text = r.str();
  c.optimizer_step = r.pod<std::int64_t>();
  const auto count = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    CheckpointEntry e;
    const auto kind = r.pod<std::uint8_t>();
    if (kind > 1) throw invalid_input("checkpoint entry '" + name + "' has unknown kind");
    e.is_parameter = kind == 0;
    const auto ndim = r.pod<std::uint32_t>();
    if (ndim > 8) throw invalid_input("checkpoint entry '" + name + "' has too many dimensions");
    Shape shape;
    for (std::uint32_t d = 0; d < ndim; ++d) shape.push_back(static_cast<std::int64_t>(r.pod<std::uint64_t>()));
    e.value = Tensor(shape);
    r.values(e.value);
    if (e.is_parameter) {
      e.adam_m = Tensor(shape);
      e.adam_v = Tensor(shape);
      r.values(e.adam_m);
      r.values(e.adam_v);
    }
    c.entries.emplace(std::move(name), std::move(e));
  }
  if (!r.done()) throw invalid_input("checkpoint has trailing bytes");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw invalid_input("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw invalid_input("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

}  // namespace vqwave::nn

#include "mtiqa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "mtiqa/errors.hpp"

namespace mtiqa {

namespace {

constexpr char kMagic[10] = {'M', 'T', 'I', 'Q', 'A', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& buf) : buf_(buf) {}

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (buf_.size() - pos_ < n) {
      throw DataError(std::string("checkpoint truncated reading ") + what + " at byte offset " + std::to_string(pos_));
    }
  }

  const std::string& buf_;
  std::size_t pos_ = 0;
};

}  // namespace

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw DataError("checkpoint has no tensor named '" + name + "'");
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string buf(kMagic, sizeof(kMagic));
  put<std::uint32_t>(buf, ckpt.version);
  put<std::uint64_t>(buf, ckpt.label_hash);
  put<std::uint64_t>(buf, ckpt.epoch);
  put<double>(buf, ckpt.val_metric);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(name.size()));
    buf += name;
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint64_t>(buf, d);
    for (double x : t.data()) put<double>(buf, x);
  }
  put<std::uint64_t>(buf, ckpt.config_text.size());
  buf += ckpt.config_text;
  return buf;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a checkpoint (bad magic)");
  }
  Reader r(bytes);
  r.bytes(sizeof(kMagic), "magic");
  Checkpoint c;
  c.version = r.get<std::uint32_t>("version");
  if (c.version != Checkpoint::kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(c.version));
  }
  c.label_hash = r.get<std::uint64_t>("label hash");
  c.epoch = r.get<std::uint64_t>("epoch");
  c.val_metric = r.get<double>("validation metric");
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint32_t>("tensor name length");
    std::string name = r.bytes(len, "tensor name");
    const auto rank = r.get<std::uint32_t>("tensor rank");
    if (rank > 8) throw DataError("tensor '" + name + "' has implausible rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint64_t>("tensor shape");
    const std::size_t n = numel(shape);
    if (n > r.remaining() / 8) throw DataError("tensor '" + name + "' larger than the remaining file");
    std::vector<double> data(n);
    for (auto& x : data) x = r.get<double>("tensor data");
    c.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  const auto text_len = r.get<std::uint64_t>("config length");
  c.config_text = r.bytes(text_len, "config text");
  if (r.remaining() != 0) throw DataError("trailing bytes after checkpoint at byte offset " + std::to_string(r.pos()));
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string buf = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(buf);
  } catch (const DataError& e) {
    throw DataError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace mtiqa

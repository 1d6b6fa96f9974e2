#include "fcppn/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace fcppn {

static_assert(std::endian::native == std::endian::little,
              "FCWT I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'F', 'C', 'W', 'T'};
constexpr std::uint8_t kFloat32 = 0;

class Writer {
 public:
  template <typename U>
  void put(U v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out_.insert(out_.end(), p, p + sizeof(U));
  }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  template <typename U>
  U get(const std::string& what) {
    U v;
    need(sizeof(U), what);
    std::memcpy(&v, in_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  void read(void* dst, std::size_t n, const std::string& what) {
    need(n, what);
    std::memcpy(dst, in_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n, const std::string& what) const {
    if (in_.size() - pos_ < n) {
      throw ParseError("truncated container while reading " + what, pos_);
    }
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

const ContainerTensor* Container::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::vector<std::uint8_t> encode_container(const Container& container) {
  if (container.tensors.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw Error("container holds too many tensors");
  }
  Writer w;
  w.bytes(kMagic, 4);
  w.put<std::uint16_t>(kContainerVersion);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(container.tensors.size()));
  for (const auto& t : container.tensors) {
    if (t.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw Error("tensor name too long: " + t.name.substr(0, 32) + "...");
    }
    if (t.value.rank() > std::numeric_limits<std::uint8_t>::max()) {
      throw Error("tensor '" + t.name + "' has too many dimensions");
    }
    w.put<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.put<std::uint8_t>(kFloat32);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(t.value.rank()));
    for (std::size_t d : t.value.shape()) {
      if (d > std::numeric_limits<std::uint32_t>::max()) {
        throw Error("tensor '" + t.name + "' dimension exceeds u32");
      }
      w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    }
    w.bytes(t.value.data(), t.value.size() * sizeof(float));
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(container.header.size()));
  w.bytes(container.header.data(), container.header.size());
  return w.take();
}

Container decode_container(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  char magic[4];
  r.read(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw ParseError("bad magic: not an FCWT container", 0);
  }
  const std::size_t version_at = r.pos();
  const auto version = r.get<std::uint16_t>("version");
  if (version != kContainerVersion) {
    throw ParseError("unsupported FCWT version " + std::to_string(version) +
                         " (expected " + std::to_string(kContainerVersion) +
                         ")",
                     version_at);
  }
  const auto count = r.get<std::uint16_t>("tensor count");

  Container out;
  out.tensors.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string label = "tensor #" + std::to_string(i);
    const auto name_len = r.get<std::uint16_t>(label + " name length");
    std::string name(name_len, '\0');
    r.read(name.data(), name_len, label + " name");
    const std::string tag = "tensor '" + name + "'";

    const std::size_t dtype_at = r.pos();
    const auto dtype = r.get<std::uint8_t>(tag + " dtype");
    if (dtype != kFloat32) {
      throw ParseError(tag + " has unsupported dtype code " +
                           std::to_string(dtype),
                       dtype_at);
    }
    const auto rank = r.get<std::uint8_t>(tag + " rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint32_t>(tag + " dims");

    const std::size_t n = numel(shape);
    if (n > r.remaining() / sizeof(float)) {
      throw ParseError("truncated container: payload of " + tag + " needs " +
                           std::to_string(n * sizeof(float)) + " bytes, " +
                           std::to_string(r.remaining()) + " remain",
                       r.pos());
    }
    std::vector<float> data(n);
    r.read(data.data(), n * sizeof(float), tag + " payload");
    out.tensors.push_back({std::move(name), Tensor<float>(shape, std::move(data))});
  }

  const auto header_len = r.get<std::uint32_t>("header length");
  if (header_len > r.remaining()) {
    throw ParseError("truncated container: header needs " +
                         std::to_string(header_len) + " bytes, " +
                         std::to_string(r.remaining()) + " remain",
                     r.pos());
  }
  out.header.resize(header_len);
  r.read(out.header.data(), header_len, "header");
  if (r.remaining() != 0) {
    throw ParseError(std::to_string(r.remaining()) +
                         " unexpected trailing bytes after header",
                     r.pos());
  }
  return out;
}

void write_container(const std::filesystem::path& path,
                     const Container& container) {
  const std::vector<std::uint8_t> bytes = encode_container(container);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes(
      (std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_container(bytes);
}

}  // namespace fcppn

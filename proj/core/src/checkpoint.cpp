#include "ganfp/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "ganfp/error.hpp"

namespace ganfp::nn {

namespace {

constexpr char kMagic[8] = {'G', 'A', 'N', 'F', 'P', 'C', 'K', 'P'};

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!in) throw FormatError("checkpoint: unexpected end of file");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

std::string get_string(std::istream& in, std::size_t len) {
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError("checkpoint: unexpected end of file");
  return s;
}

}  // namespace

const Matrix* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return &m;
  }
  return nullptr;
}

const Matrix& Checkpoint::at(const std::string& name) const {
  const Matrix* m = find(name);
  if (!m) throw FormatError("checkpoint: no tensor named " + name);
  return *m;
}

Checkpoint make_checkpoint(const ParamStore& store, std::string metadata) {
  Checkpoint ckpt{std::move(metadata), {}};
  for (const auto& e : store.entries()) ckpt.tensors.emplace_back(e.name, *e.value);
  return ckpt;
}

void restore_checkpoint(const Checkpoint& ckpt, const ParamStore& store) {
  for (const auto& e : store.entries()) {
    const Matrix* m = ckpt.find(e.name);
    if (!m) throw FormatError("checkpoint: missing tensor " + e.name);
    if (!m->same_shape(*e.value)) {
      throw FormatError("checkpoint: tensor " + e.name + " is " + m->shape_string() +
                        ", expected " + e.value->shape_string());
    }
    *e.value = *m;
  }
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.metadata.size()));
  out.write(ckpt.metadata.data(), static_cast<std::streamsize>(ckpt.metadata.size()));
  put_le<std::uint64_t>(out, ckpt.tensors.size());
  for (const auto& [name, m] : ckpt.tensors) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint64_t>(out, m.rows());
    put_le<std::uint64_t>(out, m.cols());
  }
  for (const auto& [name, m] : ckpt.tensors) {
    for (double v : m.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw FormatError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw FormatError("checkpoint: bad magic");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.metadata = get_string(in, get_le<std::uint32_t>(in));
  const auto count = get_le<std::uint64_t>(in);
  struct Entry {
    std::string name;
    std::uint64_t rows, cols;
  };
  std::vector<Entry> manifest;
  for (std::uint64_t i = 0; i < count; ++i) {
    Entry e;
    e.name = get_string(in, get_le<std::uint32_t>(in));
    e.rows = get_le<std::uint64_t>(in);
    e.cols = get_le<std::uint64_t>(in);
    manifest.push_back(std::move(e));
  }
  for (const auto& e : manifest) {
    Matrix m(e.rows, e.cols);
    for (double& v : m.data()) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
    ckpt.tensors.emplace_back(e.name, std::move(m));
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("checkpoint: cannot open " + path + " for writing");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace ganfp::nn

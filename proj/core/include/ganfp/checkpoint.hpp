#pragma once

// Binary parameter checkpoint, format version 1. All integers and doubles are
// little-endian.
//
//   magic     8 bytes   "GANFPCKP"
//   version   u32       1
//   meta_len  u32       length of the metadata blob
//   meta      bytes     free-form UTF-8 (JSON by convention)
//   count     u64       number of tensors
//   manifest  count x { name_len u32, name bytes, rows u64, cols u64 }
//   payload   for each manifest entry in order, rows*cols f64 row-major
//
// Values are stored as raw IEEE-754 bits, so a round trip is bit-exact.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ganfp/matrix.hpp"
#include "ganfp/nn.hpp"

namespace ganfp::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string metadata;
  std::vector<std::pair<std::string, Matrix>> tensors;

  const Matrix* find(const std::string& name) const;
  const Matrix& at(const std::string& name) const;
};

Checkpoint make_checkpoint(const ParamStore& store, std::string metadata);
/// Copies tensors into the store's storage by name. Throws FormatError when a
/// name is missing or a shape differs.
void restore_checkpoint(const Checkpoint& ckpt, const ParamStore& store);

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ganfp::nn

// SPDX-License-Identifier: Apache-2.0
#include "seqdesc/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "seqdesc/errors.hpp"
#include "seqdesc/version.hpp"

namespace seqdesc {

namespace {

constexpr char kMagic[4] = {'C', 'L', 'V', 'D'};

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
               static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(b, 4);
}

bool get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

void put_f32(std::ostream& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

bool get_f32(std::istream& in, float& f) {
  std::uint32_t bits;
  if (!get_u32(in, bits)) return false;
  std::memcpy(&f, &bits, 4);
  return true;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor<float>*>>& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, 4);
  put_u32(out, kCheckpointFormatVersion);
  for (const auto& [name, tensor] : params) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(tensor->rank()));
    for (std::size_t d : tensor->shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (std::size_t i = 0; i < tensor->numel(); ++i) put_f32(out, (*tensor)[i]);
  }
  if (!out) throw IoError("write failed for checkpoint: " + path);
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint: " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw InputError("not a checkpoint file (bad magic): " + path);
  std::uint32_t version;
  if (!get_u32(in, version) || version != kCheckpointFormatVersion)
    throw InputError("unsupported checkpoint format version in " + path);
  std::vector<NamedTensor> records;
  std::uint32_t name_len;
  while (get_u32(in, name_len)) {
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len))
      throw InputError("truncated checkpoint (name): " + path);
    std::uint32_t rank;
    if (!get_u32(in, rank)) throw InputError("truncated checkpoint (rank): " + path);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) {
      std::uint32_t dim;
      if (!get_u32(in, dim)) throw InputError("truncated checkpoint (dims): " + path);
      d = dim;
    }
    Tensor<float> t{shape};
    for (std::size_t i = 0; i < t.numel(); ++i)
      if (!get_f32(in, t[i])) throw InputError("truncated checkpoint (data): " + path);
    records.push_back({std::move(name), std::move(t)});
  }
  return records;
}

}  // namespace seqdesc

// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdiff/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "stdiff/errors.hpp"

namespace stdiff {

namespace {

constexpr char kMagic[] = {'S', 'T', 'D', 'F', '1'};

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get_le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint truncated");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(std::span<const NamedTensor> tensors) {
  std::string out(kMagic, sizeof kMagic);
  put_le(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_le(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put_le(out, static_cast<std::uint32_t>(t.value.rank()));
    for (auto d : t.value.shape()) put_le(out, static_cast<std::uint64_t>(d));
    for (double v : t.value.values()) put_le(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.get_bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
    throw FormatError("not a checkpoint (bad magic)");
  }
  const auto count = in.get_le<std::uint32_t>();
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = in.get_bytes(in.get_le<std::uint32_t>());
    const auto rank = in.get_le<std::uint32_t>();
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(in.get_le<std::uint64_t>());
    std::vector<double> values(shape_size(shape));
    for (auto& v : values) v = std::bit_cast<double>(in.get_le<std::uint64_t>());
    t.value = DenseTensor(std::move(shape), std::move(values));
    out.push_back(std::move(t));
  }
  if (!in.done()) throw FormatError("trailing bytes after checkpoint");
  return out;
}

void write_checkpoint(const std::string& path, std::span<const NamedTensor> tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  const std::string bytes = encode_checkpoint(tensors);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing " + path);
}

std::vector<NamedTensor> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

std::vector<NamedTensor> snapshot(std::span<ParamArray* const> params) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (const ParamArray* p : params) out.push_back({p->name, p->value});
  return out;
}

void restore(std::span<ParamArray* const> params, std::span<const NamedTensor> tensors) {
  if (tensors.size() != params.size()) {
    throw ShapeError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, model has " +
                     std::to_string(params.size()) + " parameters");
  }
  std::vector<const NamedTensor*> matched;
  for (ParamArray* p : params) {
    const NamedTensor* found = nullptr;
    for (const auto& t : tensors) {
      if (t.name == p->name) {
        found = &t;
        break;
      }
    }
    if (!found) throw ShapeError("checkpoint has no parameter '" + p->name + "'");
    if (found->value.shape() != p->value.shape()) {
      throw ShapeError("parameter '" + p->name + "' is " + shape_to_string(p->value.shape()) +
                       " but checkpoint holds " + shape_to_string(found->value.shape()));
    }
    matched.push_back(found);
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = matched[i]->value;
}

}  // namespace stdiff

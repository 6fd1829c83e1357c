// Copyright 2026 The vidmamba Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vidmamba/serialize.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace vidmamba {
namespace {

constexpr std::array<char, 4> kTensorMagic = {'V', 'M', 'T', '1'};
constexpr std::array<char, 8> kArchiveMagic = {'V', 'M', 'A', 'R', 'C', 'H', '0', '1'};
constexpr std::uint64_t kMaxRank = 16;

void put_u64(std::ostream& os, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(buf, 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) {
    throw Error("truncated stream while reading u64");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

template <std::size_t N>
void expect_magic(std::istream& is, const std::array<char, N>& magic, const char* what) {
  std::array<char, N> got{};
  if (!is.read(got.data(), N) || got != magic) {
    throw Error(std::string("bad magic for ") + what);
  }
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write(kTensorMagic.data(), kTensorMagic.size());
  put_u64(os, t.rank());
  for (std::size_t e : t.shape()) put_u64(os, e);
  for (double v : t.data()) put_u64(os, std::bit_cast<std::uint64_t>(v));
}

Tensor read_tensor(std::istream& is) {
  expect_magic(is, kTensorMagic, "tensor");
  const std::uint64_t rank = get_u64(is);
  if (rank > kMaxRank) throw Error("tensor rank " + std::to_string(rank) + " too large");
  Shape shape(rank);
  for (auto& e : shape) e = get_u64(is);
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = std::bit_cast<double>(get_u64(is));
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ostringstream os(std::ios::binary);
  write_tensor(os, t);
  write_file_atomic(path, os.str());
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  return read_tensor(is);
}

void write_archive(std::ostream& os, const TensorArchive& archive) {
  os.write(kArchiveMagic.data(), kArchiveMagic.size());
  put_u64(os, archive.size());
  for (const auto& [name, t] : archive) {
    put_u64(os, name.size());
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(os, t);
  }
}

TensorArchive read_archive(std::istream& is) {
  expect_magic(is, kArchiveMagic, "archive");
  const std::uint64_t count = get_u64(is);
  TensorArchive out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t len = get_u64(is);
    if (len > 4096) throw Error("archive entry name too long");
    std::string name(len, '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(len))) {
      throw Error("truncated archive entry name");
    }
    out.emplace(std::move(name), read_tensor(is));
  }
  return out;
}

void save_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  std::ostringstream os(std::ios::binary);
  write_archive(os, archive);
  write_file_atomic(path, os.str());
}

TensorArchive load_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  return read_archive(is);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write " + tmp.string());
    os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!os) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace vidmamba

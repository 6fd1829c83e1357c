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

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "vidmamba/tensor.hpp"

namespace vidmamba {

// Tensor blob, all integers little-endian:
//   4 bytes  magic "VMT1"
//   u64      rank
//   u64      extent, repeated rank times
//   f64      payload, product(extents) values, row-major
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

// Named-tensor archive:
//   8 bytes  magic "VMARCH01"
//   u64      entry count
//   per entry (sorted by name): u64 name length, name bytes (UTF-8),
//   tensor blob as above
using TensorArchive = std::map<std::string, Tensor>;

void write_archive(std::ostream& os, const TensorArchive& archive);
TensorArchive read_archive(std::istream& is);
void save_archive(const std::filesystem::path& path, const TensorArchive& archive);
TensorArchive load_archive(const std::filesystem::path& path);

// Writes `contents` to a sibling temp file then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace vidmamba

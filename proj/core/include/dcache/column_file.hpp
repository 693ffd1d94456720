/*
 * Copyright 2026 The dcache Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Self-describing columnar data file (".dcol").
//
//   magic    "DCOL1\0\0\0"
//   u32      header length H
//   header   u64 rows, u32 ncols, then per column:
//              u16 name length, name bytes, u8 type,
//              u64 chunk offset, u64 chunk length, u32 crc32
//   chunks   one per column, in header order
//
// Fixed-width chunks hold 8 little-endian bytes per value. String chunks hold
// a u32 length per value followed by the concatenated bytes. Chunk lengths
// are exactly EncodedColumnBytes of the column.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dcache/columnar.hpp"

namespace dcache {

struct ColumnChunkInfo {
  std::string name;
  ColumnType type;
  uint64_t offset = 0;
  uint64_t length = 0;
  uint32_t crc32 = 0;
};

struct ColumnFileLayout {
  uint64_t rows = 0;
  uint64_t file_bytes = 0;
  std::vector<ColumnChunkInfo> columns;

  const ColumnChunkInfo* Find(std::string_view name) const;
};

inline constexpr std::string_view kColumnFileExtension = ".dcol";

ColumnFileLayout WriteColumnFile(const std::filesystem::path& path, const ColumnarBatch& batch);
// Writes bytes produced by EncodeColumnFile.
ColumnFileLayout WriteEncodedColumnFile(const std::filesystem::path& path, std::string_view bytes);

ColumnFileLayout ReadColumnFileLayout(const std::filesystem::path& path);

// Reads only the named column chunks, verifying each checksum. The returned
// batch carries the columns in the requested order.
ColumnarBatch ReadColumnFile(const std::filesystem::path& path,
                             std::span<const std::string> columns);

// Serialized form of a whole file, used for content hashing.
std::string EncodeColumnFile(const ColumnarBatch& batch);

uint32_t Crc32(std::string_view bytes);

}  // namespace dcache

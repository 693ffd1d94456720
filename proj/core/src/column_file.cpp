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

#include "dcache/column_file.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "dcache/errors.hpp"

namespace dcache {
namespace {

static_assert(std::endian::native == std::endian::little, "column files assume little-endian");

constexpr char kMagic[8] = {'D', 'C', 'O', 'L', '1', '\0', '\0', '\0'};

template <typename T>
void Put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  Reader(std::string_view data, std::string context) : data_(data), context_(std::move(context)) {}

  template <typename T>
  T Get() {
    Need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view Bytes(size_t n) {
    Need(n);
    std::string_view out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  void Need(size_t n) const {
    if (data_.size() - pos_ < n) throw CorruptionError(context_ + ": truncated");
  }

  std::string_view data_;
  std::string context_;
  size_t pos_ = 0;
};

std::string EncodeChunk(const ColumnData& data) {
  std::string out;
  out.reserve(EncodedColumnBytes(data));
  std::visit(
      [&](const auto& values) {
        using T = typename std::decay_t<decltype(values)>::value_type;
        if constexpr (std::is_same_v<T, std::string>) {
          for (const auto& s : values) Put<uint32_t>(out, static_cast<uint32_t>(s.size()));
          for (const auto& s : values) out += s;
        } else {
          out.resize(values.size() * sizeof(T));
          if (!values.empty()) std::memcpy(out.data(), values.data(), out.size());
        }
      },
      data);
  return out;
}

ColumnData DecodeChunk(std::string_view bytes, ColumnType type, uint64_t rows,
                       const std::string& context) {
  ColumnData data = MakeColumnData(type);
  std::visit(
      [&](auto& values) {
        using T = typename std::decay_t<decltype(values)>::value_type;
        if constexpr (std::is_same_v<T, std::string>) {
          Reader r(bytes, context);
          std::vector<uint32_t> lengths(rows);
          for (auto& len : lengths) len = r.Get<uint32_t>();
          values.reserve(rows);
          for (uint32_t len : lengths) values.emplace_back(r.Bytes(len));
          if (!r.done()) throw CorruptionError(context + ": trailing bytes");
        } else {
          if (bytes.size() != rows * sizeof(T)) throw CorruptionError(context + ": bad length");
          values.resize(rows);
          if (rows) std::memcpy(values.data(), bytes.data(), bytes.size());
        }
      },
      data);
  return data;
}

std::string ReadRange(std::ifstream& in, uint64_t offset, uint64_t length,
                      const std::filesystem::path& path) {
  std::string buf(length, '\0');
  in.seekg(static_cast<std::streamoff>(offset));
  in.read(buf.data(), static_cast<std::streamsize>(length));
  if (static_cast<uint64_t>(in.gcount()) != length) {
    throw CorruptionError(path.string() + ": truncated");
  }
  return buf;
}

ColumnFileLayout ParseHeader(std::ifstream& in, const std::filesystem::path& path) {
  const std::string ctx = path.string();
  std::string prefix = ReadRange(in, 0, sizeof(kMagic) + 4, path);
  if (std::memcmp(prefix.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CorruptionError(ctx + ": not a column file");
  }
  uint32_t header_len;
  std::memcpy(&header_len, prefix.data() + sizeof(kMagic), 4);
  const std::string header = ReadRange(in, prefix.size(), header_len, path);
  Reader r(header, ctx);
  ColumnFileLayout layout;
  layout.rows = r.Get<uint64_t>();
  const uint32_t ncols = r.Get<uint32_t>();
  for (uint32_t i = 0; i < ncols; ++i) {
    ColumnChunkInfo info;
    info.name = std::string(r.Bytes(r.Get<uint16_t>()));
    const uint8_t t = r.Get<uint8_t>();
    if (t > static_cast<uint8_t>(ColumnType::kTimestamp)) throw CorruptionError(ctx + ": bad type");
    info.type = static_cast<ColumnType>(t);
    info.offset = r.Get<uint64_t>();
    info.length = r.Get<uint64_t>();
    info.crc32 = r.Get<uint32_t>();
    layout.columns.push_back(std::move(info));
  }
  in.seekg(0, std::ios::end);
  layout.file_bytes = static_cast<uint64_t>(in.tellg());
  for (const auto& c : layout.columns) {
    if (c.offset + c.length > layout.file_bytes) throw CorruptionError(ctx + ": chunk out of range");
  }
  return layout;
}

std::ifstream Open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

}  // namespace

uint32_t Crc32(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (!bytes.empty()) {
    const uInt n = static_cast<uInt>(std::min<size_t>(bytes.size(), 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), n);
    bytes.remove_prefix(n);
  }
  return static_cast<uint32_t>(crc);
}

const ColumnChunkInfo* ColumnFileLayout::Find(std::string_view name) const {
  for (const auto& c : columns) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::string EncodeColumnFile(const ColumnarBatch& batch) {
  std::vector<std::string> chunks;
  for (size_t c = 0; c < batch.num_columns(); ++c) chunks.push_back(EncodeChunk(batch.column(c)));

  size_t header_len = 8 + 4;
  for (const Field& f : batch.schema()) header_len += 2 + f.name.size() + 1 + 8 + 8 + 4;

  std::string header;
  Put<uint64_t>(header, batch.num_rows());
  Put<uint32_t>(header, static_cast<uint32_t>(batch.num_columns()));
  uint64_t offset = sizeof(kMagic) + 4 + header_len;
  for (size_t c = 0; c < chunks.size(); ++c) {
    const Field& f = batch.schema()[c];
    if (f.name.size() > 0xffff) throw InvalidArgument("column name too long: " + f.name);
    Put<uint16_t>(header, static_cast<uint16_t>(f.name.size()));
    header += f.name;
    Put<uint8_t>(header, static_cast<uint8_t>(f.type));
    Put<uint64_t>(header, offset);
    Put<uint64_t>(header, chunks[c].size());
    Put<uint32_t>(header, Crc32(chunks[c]));
    offset += chunks[c].size();
  }

  std::string out(kMagic, sizeof(kMagic));
  Put<uint32_t>(out, static_cast<uint32_t>(header.size()));
  out += header;
  for (const auto& chunk : chunks) out += chunk;
  return out;
}

ColumnFileLayout WriteColumnFile(const std::filesystem::path& path, const ColumnarBatch& batch) {
  return WriteEncodedColumnFile(path, EncodeColumnFile(batch));
}

ColumnFileLayout WriteEncodedColumnFile(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
  return ReadColumnFileLayout(path);
}

ColumnFileLayout ReadColumnFileLayout(const std::filesystem::path& path) {
  std::ifstream in = Open(path);
  return ParseHeader(in, path);
}

ColumnarBatch ReadColumnFile(const std::filesystem::path& path,
                             std::span<const std::string> columns) {
  std::ifstream in = Open(path);
  const ColumnFileLayout layout = ParseHeader(in, path);
  Schema schema;
  std::vector<ColumnData> data;
  for (const std::string& name : columns) {
    const ColumnChunkInfo* info = layout.Find(name);
    if (!info) throw NotFoundError(path.string() + " has no column '" + name + "'");
    const std::string bytes = ReadRange(in, info->offset, info->length, path);
    if (Crc32(bytes) != info->crc32) {
      throw CorruptionError(path.string() + ": checksum mismatch in column '" + name + "'");
    }
    schema.push_back({info->name, info->type});
    data.push_back(DecodeChunk(bytes, info->type, layout.rows, path.string() + ":" + name));
  }
  return ColumnarBatch(std::move(schema), std::move(data));
}

}  // namespace dcache

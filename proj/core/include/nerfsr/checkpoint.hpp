// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nerfsr/common.hpp"

namespace nerfsr {

/// Current on-disk checkpoint layout. Loading any other value is an error.
inline constexpr int kCheckpointFormatVersion = 1;

struct ArchiveArray {
  std::string name;
  std::vector<std::int64_t> shape;
  Buffer data;
};

/// A checkpoint archive: named float64 arrays plus a JSON metadata object.
///
/// File layout: the 8-byte magic "NERFSRCK", a little-endian uint64 header
/// length, a UTF-8 JSON header {"format_version", "kind", "meta", "arrays":
/// [{"name", "shape", "offset"}]}, then the raw little-endian float64 payload.
struct Archive {
  std::string kind;
  /// Serialized JSON object; owners define its schema.
  std::string meta_json = "{}";
  std::vector<ArchiveArray> arrays;

  const ArchiveArray* find(const std::string& name) const;
  const ArchiveArray& at(const std::string& name) const;
  void add(std::string name, std::vector<std::int64_t> shape, Buffer data);
  void add(const Param& p, const std::string& prefix = "");
};

/// Writes atomically: the payload goes to a sibling temporary file which is
/// renamed over `path` only after a successful flush, so a failed write never
/// clobbers an existing checkpoint.
void save_archive(const std::filesystem::path& path, const Archive& archive);

/// Throws FormatError on a missing file, bad magic, truncated payload, or a
/// format version other than kCheckpointFormatVersion.
Archive load_archive(const std::filesystem::path& path);

/// Minimal NumPy .npy support (C order, little-endian f4/f8).
struct NpyArray {
  std::vector<std::int64_t> shape;
  Buffer data;
};

NpyArray read_npy(const std::filesystem::path& path);
void write_npy(const std::filesystem::path& path, const NpyArray& array, bool float32 = false);

}  // namespace nerfsr

// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#include "nerfsr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace nerfsr {
namespace {

using json = nlohmann::json;

constexpr char kMagic[8] = {'N', 'E', 'R', 'F', 'S', 'R', 'C', 'K'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written in native little-endian order");

}  // namespace

const ArchiveArray* Archive::find(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

const ArchiveArray& Archive::at(const std::string& name) const {
  const ArchiveArray* a = find(name);
  if (!a) throw FormatError("checkpoint has no array named '" + name + "'");
  return *a;
}

void Archive::add(std::string name, std::vector<std::int64_t> shape, Buffer data) {
  if (shape_numel(shape) != data.size())
    throw ShapeError("array '" + name + "' data does not match shape " + shape_string(shape));
  arrays.push_back(ArchiveArray{std::move(name), std::move(shape), std::move(data)});
}

void Archive::add(const Param& p, const std::string& prefix) {
  add(prefix + p.name, p.shape, p.value);
}

void save_archive(const std::filesystem::path& path, const Archive& archive) {
  json header;
  header["format_version"] = kCheckpointFormatVersion;
  header["kind"] = archive.kind;
  header["meta"] = json::parse(archive.meta_json);
  json entries = json::array();
  std::uint64_t offset = 0;
  for (const auto& a : archive.arrays) {
    entries.push_back({{"name", a.name}, {"shape", a.shape}, {"offset", offset}});
    offset += a.data.size();
  }
  header["arrays"] = entries;
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open checkpoint for writing: " + tmp.string());
    const std::uint64_t len = text.size();
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& a : archive.arrays)
      out.write(reinterpret_cast<const char*>(a.data.data()),
                static_cast<std::streamsize>(a.data.size() * sizeof(double)));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw FormatError("checkpoint write failed (disk full?): " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

Archive load_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint not found: " + path.string());
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError("not a checkpoint archive: " + path.string());
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError("truncated checkpoint header: " + path.string());
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError("malformed checkpoint header in " + path.string() + ": " + e.what());
  }
  const int version = header.value("format_version", -1);
  if (version != kCheckpointFormatVersion)
    throw FormatError("checkpoint " + path.string() + " has format version " +
                      std::to_string(version) + ", expected " +
                      std::to_string(kCheckpointFormatVersion));
  Archive archive;
  archive.kind = header.value("kind", "");
  archive.meta_json = header.contains("meta") ? header["meta"].dump() : "{}";
  for (const auto& entry : header.at("arrays")) {
    ArchiveArray a;
    a.name = entry.at("name").get<std::string>();
    a.shape = entry.at("shape").get<std::vector<std::int64_t>>();
    a.data.resize(shape_numel(a.shape));
    in.read(reinterpret_cast<char*>(a.data.data()),
            static_cast<std::streamsize>(a.data.size() * sizeof(double)));
    if (!in) throw FormatError("truncated checkpoint payload for '" + a.name + "' in " + path.string());
    archive.arrays.push_back(std::move(a));
  }
  return archive;
}

NpyArray read_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("npy file not found: " + path.string());
  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, "\x93NUMPY", 6) != 0)
    throw FormatError("not an npy file: " + path.string());
  unsigned char version[2];
  in.read(reinterpret_cast<char*>(version), 2);
  std::uint32_t header_len = 0;
  if (version[0] == 1) {
    std::uint16_t l16 = 0;
    in.read(reinterpret_cast<char*>(&l16), 2);
    header_len = l16;
  } else {
    in.read(reinterpret_cast<char*>(&header_len), 4);
  }
  std::string header(header_len, '\0');
  in.read(header.data(), header_len);
  if (!in) throw FormatError("truncated npy header: " + path.string());

  auto field = [&](const std::string& key) {
    const auto pos = header.find("'" + key + "'");
    if (pos == std::string::npos) throw FormatError("npy header lacks '" + key + "': " + path.string());
    return header.substr(header.find(':', pos) + 1);
  };
  std::string descr = field("descr");
  descr = descr.substr(descr.find('\'') + 1);
  descr = descr.substr(0, descr.find('\''));
  std::string order = field("fortran_order");
  order = order.substr(0, order.find(','));
  if (order.find("True") != std::string::npos)
    throw FormatError("fortran-ordered npy arrays are not supported: " + path.string());
  std::string shape_text = field("shape");
  shape_text = shape_text.substr(shape_text.find('(') + 1);
  shape_text = shape_text.substr(0, shape_text.find(')'));
  NpyArray out;
  std::size_t pos = 0;
  while (pos < shape_text.size()) {
    const auto next = shape_text.find(',', pos);
    const std::string tok = shape_text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    if (tok.find_first_of("0123456789") != std::string::npos) out.shape.push_back(std::stoll(tok));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  const std::size_t count = shape_numel(out.shape);
  out.data.resize(count);
  if (descr == "<f8") {
    in.read(reinterpret_cast<char*>(out.data.data()), static_cast<std::streamsize>(count * 8));
  } else if (descr == "<f4") {
    std::vector<float> tmp(count);
    in.read(reinterpret_cast<char*>(tmp.data()), static_cast<std::streamsize>(count * 4));
    for (std::size_t i = 0; i < count; ++i) out.data[i] = tmp[i];
  } else {
    throw FormatError("unsupported npy dtype '" + descr + "' in " + path.string());
  }
  if (!in) throw FormatError("truncated npy payload: " + path.string());
  return out;
}

void write_npy(const std::filesystem::path& path, const NpyArray& array, bool float32) {
  if (shape_numel(array.shape) != array.data.size()) throw ShapeError("write_npy: data/shape mismatch");
  std::string shape = "(";
  for (std::size_t i = 0; i < array.shape.size(); ++i)
    shape += std::to_string(array.shape[i]) + (array.shape.size() == 1 || i + 1 < array.shape.size() ? "," : "");
  shape += ")";
  std::string header = std::string("{'descr': '") + (float32 ? "<f4" : "<f8") +
                       "', 'fortran_order': False, 'shape': " + shape + ", }";
  const std::size_t total = 10 + header.size() + 1;
  header.append((64 - total % 64) % 64, ' ');
  header.push_back('\n');
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write npy file: " + path.string());
  out.write("\x93NUMPY\x01\x00", 8);
  const std::uint16_t len = static_cast<std::uint16_t>(header.size());
  out.write(reinterpret_cast<const char*>(&len), 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  if (float32) {
    std::vector<float> tmp(array.data.begin(), array.data.end());
    out.write(reinterpret_cast<const char*>(tmp.data()), static_cast<std::streamsize>(tmp.size() * 4));
  } else {
    out.write(reinterpret_cast<const char*>(array.data.data()),
              static_cast<std::streamsize>(array.data.size() * 8));
  }
  if (!out) throw FormatError("npy write failed: " + path.string());
}

}  // namespace nerfsr

#include "rmp/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace rmp {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'B', 'C', 'K', 'P', 'T', '0', '0', '1'};

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_f32_le(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

float get_f32_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

void storage_round_tensor(Tensor& t) {
  for (auto& v : t.vec()) v = storage_round(v);
}

void save_checkpoint(const std::string& path, const NamedTensorList& tensors, const json& meta) {
  json header;
  header["meta"] = meta;
  json tlist = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, tensor] : tensors) {
    json entry;
    entry["name"] = name;
    std::vector<int> dims;
    for (int i = 0; i < tensor.shape().ndim(); ++i) dims.push_back(tensor.shape()[i]);
    entry["shape"] = dims;
    entry["offset"] = offset;
    offset += static_cast<std::uint64_t>(tensor.numel()) * 4;
    tlist.push_back(entry);
  }
  header["tensors"] = tlist;
  const std::string htext = header.dump();

  std::string blob;
  blob.reserve(16 + htext.size() + offset);
  blob.append(kMagic, 8);
  put_u64_le(blob, htext.size());
  blob += htext;
  for (const auto& [name, tensor] : tensors)
    for (std::int64_t i = 0; i < tensor.numel(); ++i)
      put_f32_le(blob, static_cast<float>(tensor[i]));

  // Atomic write: temp file in the same directory, then rename.
  const std::filesystem::path target(path);
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("save_checkpoint: cannot write " + tmp.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw DataError("save_checkpoint: short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

NamedTensorList load_checkpoint(const std::string& path, json* meta_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_checkpoint: cannot open " + path);
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (blob.size() < 16 || std::memcmp(blob.data(), kMagic, 8) != 0)
    throw DataError("load_checkpoint: " + path + " is not a checkpoint file");
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  const std::uint64_t hlen = get_u64_le(bytes + 8);
  if (16 + hlen > blob.size()) throw DataError("load_checkpoint: truncated header in " + path);
  json header = json::parse(blob.substr(16, hlen));
  if (meta_out) *meta_out = header.value("meta", json::object());

  const std::size_t data_start = 16 + hlen;
  NamedTensorList out;
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const std::vector<int> dims = entry.at("shape").get<std::vector<int>>();
    const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
    Shape shape;
    switch (dims.size()) {
      case 1: shape = Shape{dims[0]}; break;
      case 2: shape = Shape{dims[0], dims[1]}; break;
      case 3: shape = Shape{dims[0], dims[1], dims[2]}; break;
      case 4: shape = Shape{dims[0], dims[1], dims[2], dims[3]}; break;
      default: throw DataError("load_checkpoint: bad tensor rank in " + path);
    }
    Tensor t(shape);
    const std::size_t need = data_start + offset + static_cast<std::size_t>(t.numel()) * 4;
    if (need > blob.size()) throw DataError("load_checkpoint: truncated data in " + path);
    for (std::int64_t i = 0; i < t.numel(); ++i)
      t[i] = static_cast<scalar>(get_f32_le(bytes + data_start + offset + 4 * i));
    out.emplace_back(name, std::move(t));
  }
  return out;
}

}  // namespace rmp

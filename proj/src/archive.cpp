#include "mustan/archive.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "mustan/error.hpp"

namespace mustan {

namespace {

constexpr char kMagic[8] = {'M', 'U', 'S', 'T', 'A', 'N', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

std::uint64_t fnv1a(const std::vector<char>& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (char b : bytes) {
    h ^= static_cast<unsigned char>(b);
    h *= 1099511628211ull;
  }
  return h;
}

template <typename T>
void put(std::vector<char>& out, T value) {
  char raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T get(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

}  // namespace

const NamedArray* Archive::find(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

void write_archive(const std::string& path, const nlohmann::json& header_in,
                   const std::vector<NamedArray>& arrays, ArchiveDtype dtype) {
  static_assert(sizeof(float) == 4 && sizeof(double) == 8);
  std::vector<char> payload;
  nlohmann::json table = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& a : arrays) {
    if (a.values.size() != a.shape.size())
      throw CheckpointError("array '" + a.name + "' size does not match shape " + a.shape.str());
    table.push_back({{"name", a.name},
                     {"shape", {a.shape.n, a.shape.c, a.shape.h, a.shape.w}},
                     {"offset", offset},
                     {"count", a.values.size()}});
    for (Eigen::Index i = 0; i < a.values.size(); ++i) {
      if (dtype == ArchiveDtype::float32)
        put(payload, static_cast<float>(a.values[i]));
      else
        put(payload, a.values[i]);
    }
    offset += static_cast<std::uint64_t>(a.values.size());
  }

  nlohmann::json header = header_in;
  header["dtype"] = dtype == ArchiveDtype::float32 ? "float32" : "float64";
  header["arrays"] = std::move(table);
  header["payload_bytes"] = payload.size();
  header["payload_fnv1a64"] = fnv1a(payload);
  const std::string text = header.dump();

  std::vector<char> head(kMagic, kMagic + sizeof(kMagic));
  put(head, kFormatVersion);
  put(head, static_cast<std::uint64_t>(text.size()));

  const std::string tmp = path + ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + tmp + " for writing");
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    out.flush();
    if (!out) throw CheckpointError("write failed for " + path + " (disk full?)");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError("cannot move " + tmp + " to " + path + ": " + ec.message());
}

Archive read_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  constexpr std::size_t kPrefix = sizeof(kMagic) + 4 + 8;
  if (bytes.size() < kPrefix) throw CheckpointError(path + ": truncated header");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError(path + ": not a mustan archive (bad magic)");
  const auto version = get<std::uint32_t>(bytes.data() + 8);
  if (version != kFormatVersion)
    throw CheckpointError(path + ": unsupported archive version " + std::to_string(version));
  const auto header_len = get<std::uint64_t>(bytes.data() + 12);
  if (bytes.size() < kPrefix + header_len) throw CheckpointError(path + ": truncated header");

  Archive archive;
  try {
    archive.header = nlohmann::json::parse(bytes.begin() + kPrefix,
                                           bytes.begin() + static_cast<std::ptrdiff_t>(kPrefix + header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path + ": malformed header: " + e.what());
  }

  const std::string dtype = archive.header.value("dtype", "");
  std::size_t elem = 0;
  if (dtype == "float32")
    elem = 4;
  else if (dtype == "float64")
    elem = 8;
  else
    throw CheckpointError(path + ": unknown dtype '" + dtype + "'");

  const std::size_t payload_start = kPrefix + header_len;
  const auto payload_bytes = archive.header.value("payload_bytes", std::uint64_t{0});
  if (bytes.size() != payload_start + payload_bytes)
    throw CheckpointError(path + ": truncated payload (" + std::to_string(bytes.size() - payload_start) +
                          " of " + std::to_string(payload_bytes) + " bytes)");
  std::vector<char> payload(bytes.begin() + static_cast<std::ptrdiff_t>(payload_start), bytes.end());
  if (fnv1a(payload) != archive.header.value("payload_fnv1a64", std::uint64_t{0}))
    throw CheckpointError(path + ": payload checksum mismatch");

  for (const auto& entry : archive.header.at("arrays")) {
    NamedArray a;
    a.name = entry.at("name").get<std::string>();
    const auto& s = entry.at("shape");
    a.shape = Shape{s[0].get<int>(), s[1].get<int>(), s[2].get<int>(), s[3].get<int>()};
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const auto count = entry.at("count").get<std::uint64_t>();
    if (static_cast<std::uint64_t>(a.shape.size()) != count || (offset + count) * elem > payload.size())
      throw CheckpointError(path + ": array '" + a.name + "' out of bounds");
    a.values.resize(static_cast<Eigen::Index>(count));
    const char* p = payload.data() + offset * elem;
    for (std::uint64_t i = 0; i < count; ++i)
      a.values[static_cast<Eigen::Index>(i)] =
          elem == 4 ? static_cast<double>(get<float>(p + i * 4)) : get<double>(p + i * 8);
    archive.arrays.push_back(std::move(a));
  }
  return archive;
}

}  // namespace mustan

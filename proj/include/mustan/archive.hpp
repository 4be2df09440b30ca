#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "mustan/tensor.hpp"

namespace mustan {

// Flat named-array archive used for checkpoints and imported weights.
//
//   offset  size  field
//   0       8     magic "MUSTANCK"
//   8       4     format version (uint32 LE, currently 1)
//   12      8     header length L (uint64 LE)
//   20      L     UTF-8 JSON header
//   20+L    ...   payload: arrays back to back, little-endian IEEE-754
//
// The header holds {"dtype": "float32"|"float64", "payload_bytes",
// "payload_fnv1a64", "arrays": [{"name", "shape": [n,c,h,w], "offset",
// "count"}], ...caller fields}. Offsets are in elements from payload start.
struct NamedArray {
  std::string name;
  Shape shape;
  Eigen::ArrayXd values;
};

struct Archive {
  nlohmann::json header;
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
};

enum class ArchiveDtype { float32, float64 };

void write_archive(const std::string& path, const nlohmann::json& header,
                   const std::vector<NamedArray>& arrays, ArchiveDtype dtype);

// Throws CheckpointError on bad magic, truncation, or checksum mismatch.
Archive read_archive(const std::string& path);

}  // namespace mustan

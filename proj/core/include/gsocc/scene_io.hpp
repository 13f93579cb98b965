#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "gsocc/gaussian.hpp"
#include "gsocc/grid.hpp"

namespace gsocc {

// SGAU: "SGAU" | u16 version | u16 class_count | u64 gaussian_count, then
// per gaussian (10 + class_count) little-endian f32: mean[3] scale[3]
// rotation[4] (w, x, y, z) logits[class_count].
inline constexpr std::uint16_t kSceneFormatVersion = 1;
inline constexpr std::size_t kSceneHeaderSize = 16;

// SVOX: "SVOX" | u16 version | u16 class_count | u32 dims[3] | f32 origin[3] |
// f32 cell_size[3] | u8 payload_kind, then X*Y*Z u8 labels and, for
// payload_kind 1, X*Y*Z*class_count f32 scores (voxel-major).
inline constexpr std::uint16_t kGridFormatVersion = 1;
inline constexpr std::size_t kGridHeaderSize = 45;

enum class PayloadKind : std::uint8_t { labels = 0, labels_and_scores = 1 };

struct SceneFileHeader {
  std::uint16_t version = kSceneFormatVersion;
  std::uint16_t class_count = 0;
  std::uint64_t gaussian_count = 0;
};

struct GridFileHeader {
  std::uint16_t version = kGridFormatVersion;
  std::uint16_t class_count = 0;
  GridSpec spec;
  PayloadKind payload = PayloadKind::labels;
};

// Decoding throws FormatError (with the byte offset of the fault) for a bad
// magic, version, field value, truncated or oversized payload, and
// CapacityError when the declared sizes cannot be addressed.
std::vector<std::uint8_t> encode_scene(const GaussianScene& scene);
GaussianScene decode_scene(std::span<const std::uint8_t> bytes);
SceneFileHeader decode_scene_header(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_grid(const OccupancyGrid& grid);
OccupancyGrid decode_grid(std::span<const std::uint8_t> bytes);
GridFileHeader decode_grid_header(std::span<const std::uint8_t> bytes);

// File wrappers; I/O failures raise IoError.
void write_scene(const GaussianScene& scene, const std::filesystem::path& path);
GaussianScene read_scene(const std::filesystem::path& path);
void write_grid(const OccupancyGrid& grid, const std::filesystem::path& path);
OccupancyGrid read_grid(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

using FileHeader = std::variant<SceneFileHeader, GridFileHeader>;

// Header of either format, selected by magic.
FileHeader read_header(const std::filesystem::path& path);

}  // namespace gsocc

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "glossalign/matrix.hpp"

namespace glossalign {

// Binary embedding containers, little-endian throughout, f32 payloads.
//   GEM1: id-keyed vectors     header {magic, version u32, count u64, dim u32}
//   CEM1: id-keyed matrices    same header; each record carries n_rows u32
// Records: id-length u16, id UTF-8, [n_rows u32], f32 data.

inline constexpr std::uint32_t kEmbFormatVersion = 1;

struct VectorTable {
  std::uint32_t dim = 0;
  std::vector<std::pair<std::string, Vec>> entries;
};

struct MatrixTable {
  std::uint32_t dim = 0;  // columns
  std::vector<std::pair<std::string, Matrix>> entries;
};

void write_vector_table(const std::filesystem::path& path, const VectorTable& table);
VectorTable read_vector_table(const std::filesystem::path& path);

void write_matrix_table(const std::filesystem::path& path, const MatrixTable& table);
MatrixTable read_matrix_table(const std::filesystem::path& path);

/// Peeks the 4-byte magic; "GEM1"/"CEM1" or BadMagic.
std::string sniff_magic(const std::filesystem::path& path);

/// Writes `contents` to `path` via a temp file + rename so an interrupted
/// run never leaves a partial file at the final path.
void atomic_write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace glossalign

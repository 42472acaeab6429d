#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "artrecon/geom.hpp"

namespace artrecon {

/// Wavefront OBJ: only `v` and `f` records are read; polygons are fan
/// triangulated, `v/vt/vn` references and negative indices are accepted.
TriMesh parse_obj(std::string_view text);
TriMesh read_obj(const std::filesystem::path& path);
/// Emits `v` and `f` lines only, with shortest round-trip reals.
std::string format_obj(const TriMesh& mesh);
void write_obj(const std::filesystem::path& path, const TriMesh& mesh);

enum class PlyEncoding { Ascii, BinaryLittleEndian };

/// PLY vertex element with x/y/z and an optional integer `label` property.
/// Other elements and properties are skipped.
PointCloud read_ply(const std::filesystem::path& path);
PointCloud parse_ply(std::string_view bytes);
void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
               PlyEncoding encoding = PlyEncoding::BinaryLittleEndian);
std::string format_ply(const PointCloud& cloud, PlyEncoding encoding);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace artrecon

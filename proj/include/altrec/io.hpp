#pragma once

#include <filesystem>
#include <string_view>

#include "altrec/core.hpp"

namespace altrec::io {

enum class Format { Xyz, Ply, Obj };

/// Parses "xyz", "ply" or "obj" (case-insensitive). Throws UnsupportedFormat.
Format parse_format(std::string_view name);

/// Format from the file extension. Throws UnsupportedFormat.
Format format_of(const std::filesystem::path& path);

enum class PlyEncoding { Ascii, BinaryLittleEndian };

PointCloud read_points(const std::filesystem::path& path, Format format);
PointCloud read_points(const std::filesystem::path& path);

/// Positions and normals are written as float32. XYZ writes six columns when
/// normals are present; OBJ writes `vn` records.
void write_points(const std::filesystem::path& path, Format format, const PointCloud& cloud,
                  PlyEncoding encoding = PlyEncoding::Ascii);
void write_points(const std::filesystem::path& path, const PointCloud& cloud);

TriangleMesh read_mesh(const std::filesystem::path& path, Format format);
TriangleMesh read_mesh(const std::filesystem::path& path);

/// XYZ cannot carry faces; writing a mesh as XYZ throws UnsupportedFormat.
void write_mesh(const std::filesystem::path& path, Format format, const TriangleMesh& mesh,
                PlyEncoding encoding = PlyEncoding::Ascii);
void write_mesh(const std::filesystem::path& path, const TriangleMesh& mesh);

} // namespace altrec::io

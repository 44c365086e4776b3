#include "altrec/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace altrec::io {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

[[noreturn]] void parse_fail(const fs::path& path, std::size_t line, const std::string& what) {
  throw Error(ErrorKind::ParseError, path.string() + ":" + std::to_string(line) + ": " + what,
              line);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i])))
      ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i])))
      ++i;
    if (i > start)
      out.push_back(s.substr(start, i - start));
  }
  return out;
}

bool to_double(std::string_view tok, double& out) {
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool to_long(std::string_view tok, long& out) {
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in)
    throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out)
    throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out << std::setprecision(9);
  return out;
}

UnitVector3 file_normal(const fs::path& path, std::size_t line, const Vec3& n) {
  auto u = UnitVector3::try_from(n);
  if (!u)
    parse_fail(path, line, "zero-length normal");
  return *u;
}

// ---------------------------------------------------------------- XYZ

PointCloud read_xyz(const fs::path& path) {
  auto in = open_in(path);
  PointCloud cloud;
  std::string line;
  std::size_t lineno = 0;
  int columns = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.resize(hash);
    const auto tok = split_ws(line);
    if (tok.empty())
      continue;
    if (tok.size() != 3 && tok.size() != 6)
      parse_fail(path, lineno, "expected 3 or 6 values, found " + std::to_string(tok.size()));
    if (columns == 0)
      columns = static_cast<int>(tok.size());
    else if (columns != static_cast<int>(tok.size()))
      parse_fail(path, lineno, "inconsistent column count");
    double v[6];
    for (std::size_t i = 0; i < tok.size(); ++i)
      if (!to_double(tok[i], v[i]))
        parse_fail(path, lineno, "bad number '" + std::string(tok[i]) + "'");
    cloud.points.emplace_back(v[0], v[1], v[2]);
    if (columns == 6)
      cloud.normals.push_back(file_normal(path, lineno, Vec3(v[3], v[4], v[5])));
  }
  return cloud;
}

void write_xyz(const fs::path& path, const PointCloud& cloud) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    out << static_cast<float>(p.x()) << ' ' << static_cast<float>(p.y()) << ' '
        << static_cast<float>(p.z());
    if (cloud.has_normals()) {
      const auto& n = cloud.normals[i];
      out << ' ' << static_cast<float>(n.x()) << ' ' << static_cast<float>(n.y()) << ' '
          << static_cast<float>(n.z());
    }
    out << '\n';
  }
  if (!out)
    throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

// ---------------------------------------------------------------- OBJ

struct ObjData {
  std::vector<Point3> v;
  std::vector<Vec3> vn;
  std::vector<Face> faces;
};

ObjData read_obj(const fs::path& path) {
  auto in = open_in(path);
  ObjData data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.resize(hash);
    const auto tok = split_ws(line);
    if (tok.empty())
      continue;
    if (tok[0] == "v" || tok[0] == "vn") {
      if (tok.size() < 4)
        parse_fail(path, lineno, "expected three coordinates");
      double c[3];
      for (int i = 0; i < 3; ++i)
        if (!to_double(tok[i + 1], c[i]))
          parse_fail(path, lineno, "bad number '" + std::string(tok[i + 1]) + "'");
      (tok[0] == "v" ? data.v : data.vn).emplace_back(c[0], c[1], c[2]);
    } else if (tok[0] == "f") {
      if (tok.size() < 4)
        parse_fail(path, lineno, "face needs at least three vertices");
      std::vector<std::int32_t> poly;
      for (std::size_t i = 1; i < tok.size(); ++i) {
        const auto ref = tok[i].substr(0, tok[i].find('/'));
        long idx = 0;
        if (!to_long(ref, idx) || idx == 0)
          parse_fail(path, lineno, "malformed face index '" + std::string(tok[i]) + "'");
        const long nv = static_cast<long>(data.v.size());
        const long resolved = idx > 0 ? idx - 1 : nv + idx;
        if (resolved < 0 || resolved >= nv)
          parse_fail(path, lineno, "face index " + std::to_string(idx) + " out of range");
        poly.push_back(static_cast<std::int32_t>(resolved));
      }
      for (std::size_t i = 1; i + 1 < poly.size(); ++i)
        data.faces.push_back(Face{poly[0], poly[i], poly[i + 1]});
    }
  }
  return data;
}

void write_obj_vertices(std::ofstream& out, const std::vector<Point3>& v) {
  for (const auto& p : v)
    out << "v " << static_cast<float>(p.x()) << ' ' << static_cast<float>(p.y()) << ' '
        << static_cast<float>(p.z()) << '\n';
}

// ---------------------------------------------------------------- PLY

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::optional<PlyType> ply_type(std::string_view name) {
  const std::string n = lower(name);
  if (n == "char" || n == "int8") return PlyType::Int8;
  if (n == "uchar" || n == "uint8") return PlyType::UInt8;
  if (n == "short" || n == "int16") return PlyType::Int16;
  if (n == "ushort" || n == "uint16") return PlyType::UInt16;
  if (n == "int" || n == "int32") return PlyType::Int32;
  if (n == "uint" || n == "uint32") return PlyType::UInt32;
  if (n == "float" || n == "float32") return PlyType::Float32;
  if (n == "double" || n == "float64") return PlyType::Float64;
  return std::nullopt;
}

std::size_t ply_size(PlyType t) {
  switch (t) {
  case PlyType::Int8:
  case PlyType::UInt8: return 1;
  case PlyType::Int16:
  case PlyType::UInt16: return 2;
  case PlyType::Int32:
  case PlyType::UInt32:
  case PlyType::Float32: return 4;
  case PlyType::Float64: return 8;
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  PlyType type;
  bool is_list = false;
  PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

struct PlyData {
  std::vector<Point3> positions;
  std::vector<Vec3> normals;
  std::vector<Face> faces;
};

template <class T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <class T>
void store_le(std::string& buf, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1)
    std::reverse(b, b + sizeof(T));
  buf.append(b, sizeof(T));
}

double decode(PlyType t, const char* p) {
  switch (t) {
  case PlyType::Int8: return load_le<std::int8_t>(p);
  case PlyType::UInt8: return load_le<std::uint8_t>(p);
  case PlyType::Int16: return load_le<std::int16_t>(p);
  case PlyType::UInt16: return load_le<std::uint16_t>(p);
  case PlyType::Int32: return load_le<std::int32_t>(p);
  case PlyType::UInt32: return load_le<std::uint32_t>(p);
  case PlyType::Float32: return load_le<float>(p);
  case PlyType::Float64: return load_le<double>(p);
  }
  return 0.0;
}

/// Sink for one parsed element instance: scalar values by property and the
/// list values of the (single) list property.
struct PlyRecord {
  std::vector<double> scalars;
  std::vector<double> list;
};

class PlyConsumer {
public:
  PlyConsumer(const fs::path& path, const PlyElement& el, PlyData& data)
      : path_(path), data_(data) {
    for (std::size_t i = 0; i < el.props.size(); ++i) {
      const auto& name = el.props[i].name;
      for (int a = 0; a < 3; ++a) {
        if (name == std::string(1, "xyz"[a]))
          pos_[a] = static_cast<int>(i);
        if (name == "n" + std::string(1, "xyz"[a]))
          nrm_[a] = static_cast<int>(i);
      }
    }
    is_vertex_ = el.name == "vertex";
    is_face_ = el.name == "face";
    if (is_vertex_ && (pos_[0] < 0 || pos_[1] < 0 || pos_[2] < 0))
      parse_fail(path, 0, "vertex element lacks x/y/z");
    has_normals_ = nrm_[0] >= 0 && nrm_[1] >= 0 && nrm_[2] >= 0;
  }

  void consume(const PlyRecord& r, std::size_t where) {
    if (is_vertex_) {
      data_.positions.emplace_back(r.scalars[pos_[0]], r.scalars[pos_[1]], r.scalars[pos_[2]]);
      if (has_normals_)
        data_.normals.emplace_back(r.scalars[nrm_[0]], r.scalars[nrm_[1]], r.scalars[nrm_[2]]);
    } else if (is_face_) {
      if (r.list.size() < 3)
        parse_fail(path_, where, "face with fewer than three vertices");
      std::vector<std::int32_t> poly;
      for (double v : r.list) {
        if (v < 0 || v != std::floor(v))
          parse_fail(path_, where, "invalid face index");
        poly.push_back(static_cast<std::int32_t>(v));
      }
      for (std::size_t i = 1; i + 1 < poly.size(); ++i)
        data_.faces.push_back(Face{poly[0], poly[i], poly[i + 1]});
    }
  }

private:
  const fs::path& path_;
  PlyData& data_;
  int pos_[3] = {-1, -1, -1};
  int nrm_[3] = {-1, -1, -1};
  bool is_vertex_ = false, is_face_ = false, has_normals_ = false;
};

PlyData read_ply(const fs::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line))
      return false;
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    return true;
  };
  if (!next_line() || line != "ply")
    parse_fail(path, 1, "missing 'ply' magic");
  bool binary = false;
  std::vector<PlyElement> elements;
  for (;;) {
    if (!next_line())
      parse_fail(path, lineno, "unterminated header");
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info")
      continue;
    if (tok[0] == "end_header")
      break;
    if (tok[0] == "format") {
      if (tok.size() < 2)
        parse_fail(path, lineno, "malformed format line");
      if (tok[1] == "ascii")
        binary = false;
      else if (tok[1] == "binary_little_endian")
        binary = true;
      else
        throw Error(ErrorKind::UnsupportedFormat, "PLY encoding " + std::string(tok[1]));
    } else if (tok[0] == "element") {
      long count = 0;
      if (tok.size() != 3 || !to_long(tok[2], count) || count < 0)
        parse_fail(path, lineno, "malformed element line");
      elements.push_back(PlyElement{std::string(tok[1]), static_cast<std::size_t>(count), {}});
    } else if (tok[0] == "property") {
      if (elements.empty())
        parse_fail(path, lineno, "property before element");
      PlyProperty prop;
      if (tok.size() == 5 && tok[1] == "list") {
        auto ct = ply_type(tok[2]);
        auto vt = ply_type(tok[3]);
        if (!ct || !vt)
          parse_fail(path, lineno, "unknown property type");
        prop = PlyProperty{std::string(tok[4]), *vt, true, *ct};
      } else if (tok.size() == 3) {
        auto t = ply_type(tok[1]);
        if (!t)
          parse_fail(path, lineno, "unknown property type '" + std::string(tok[1]) + "'");
        prop = PlyProperty{std::string(tok[2]), *t, false, PlyType::UInt8};
      } else {
        parse_fail(path, lineno, "malformed property line");
      }
      elements.back().props.push_back(prop);
    } else {
      parse_fail(path, lineno, "unexpected header keyword '" + std::string(tok[0]) + "'");
    }
  }

  PlyData data;
  PlyRecord rec;
  if (!binary) {
    for (const auto& el : elements) {
      PlyConsumer sink(path, el, data);
      for (std::size_t i = 0; i < el.count; ++i) {
        if (!next_line())
          parse_fail(path, lineno + 1, "unexpected end of file in element " + el.name);
        const auto tok = split_ws(line);
        std::size_t t = 0;
        rec.scalars.assign(el.props.size(), 0.0);
        rec.list.clear();
        for (std::size_t p = 0; p < el.props.size(); ++p) {
          if (t >= tok.size())
            parse_fail(path, lineno, "too few values");
          double v = 0.0;
          if (!to_double(tok[t++], v))
            parse_fail(path, lineno, "bad number");
          if (!el.props[p].is_list) {
            rec.scalars[p] = v;
            continue;
          }
          if (v < 0 || v != std::floor(v))
            parse_fail(path, lineno, "bad list count");
          for (long k = 0; k < static_cast<long>(v); ++k) {
            double item = 0.0;
            if (t >= tok.size() || !to_double(tok[t++], item))
              parse_fail(path, lineno, "bad list entry");
            rec.list.push_back(item);
          }
        }
        sink.consume(rec, lineno);
      }
    }
  } else {
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t off = 0;
    auto need = [&](std::size_t n) {
      if (off + n > body.size())
        throw Error(ErrorKind::ParseError,
                    path.string() + ": truncated binary body at byte " + std::to_string(off), off);
    };
    for (const auto& el : elements) {
      PlyConsumer sink(path, el, data);
      for (std::size_t i = 0; i < el.count; ++i) {
        rec.scalars.assign(el.props.size(), 0.0);
        rec.list.clear();
        for (std::size_t p = 0; p < el.props.size(); ++p) {
          const auto& prop = el.props[p];
          if (!prop.is_list) {
            need(ply_size(prop.type));
            rec.scalars[p] = decode(prop.type, body.data() + off);
            off += ply_size(prop.type);
            continue;
          }
          need(ply_size(prop.count_type));
          const double count = decode(prop.count_type, body.data() + off);
          off += ply_size(prop.count_type);
          if (count < 0)
            throw Error(ErrorKind::ParseError,
                        path.string() + ": negative list count at byte " + std::to_string(off),
                        off);
          for (long k = 0; k < static_cast<long>(count); ++k) {
            need(ply_size(prop.type));
            rec.list.push_back(decode(prop.type, body.data() + off));
            off += ply_size(prop.type);
          }
        }
        sink.consume(rec, off);
      }
    }
  }
  return data;
}

void write_ply(const fs::path& path, const std::vector<Point3>& positions,
               const std::vector<UnitVector3>* normals, const std::vector<Face>* faces,
               PlyEncoding encoding) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  const bool binary = encoding == PlyEncoding::BinaryLittleEndian;
  const bool with_normals = normals && !normals->empty();
  out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
  out << "element vertex " << positions.size() << '\n';
  out << "property float x\nproperty float y\nproperty float z\n";
  if (with_normals)
    out << "property float nx\nproperty float ny\nproperty float nz\n";
  if (faces) {
    out << "element face " << faces->size() << '\n';
    out << "property list uchar int vertex_indices\n";
  }
  out << "end_header\n";
  if (!binary) {
    for (std::size_t i = 0; i < positions.size(); ++i) {
      const auto& p = positions[i];
      out << static_cast<float>(p.x()) << ' ' << static_cast<float>(p.y()) << ' '
          << static_cast<float>(p.z());
      if (with_normals) {
        const auto& n = (*normals)[i];
        out << ' ' << static_cast<float>(n.x()) << ' ' << static_cast<float>(n.y()) << ' '
            << static_cast<float>(n.z());
      }
      out << '\n';
    }
    if (faces)
      for (const auto& f : *faces)
        out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  } else {
    std::string buf;
    buf.reserve(positions.size() * (with_normals ? 24 : 12) + (faces ? faces->size() * 13 : 0));
    for (std::size_t i = 0; i < positions.size(); ++i) {
      for (int a = 0; a < 3; ++a)
        store_le(buf, static_cast<float>(positions[i][a]));
      if (with_normals)
        for (int a = 0; a < 3; ++a)
          store_le(buf, static_cast<float>((*normals)[i].vec()[a]));
    }
    if (faces)
      for (const auto& f : *faces) {
        store_le(buf, static_cast<std::uint8_t>(3));
        for (auto v : f)
          store_le(buf, static_cast<std::int32_t>(v));
      }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out)
    throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

std::vector<UnitVector3> checked_normals(const fs::path& path, const std::vector<Vec3>& raw) {
  std::vector<UnitVector3> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto u = UnitVector3::try_from(raw[i]);
    if (!u)
      throw Error(ErrorKind::ParseError, path.string() + ": zero-length normal at vertex " +
                                             std::to_string(i), i);
    out.push_back(*u);
  }
  return out;
}

} // namespace

Format parse_format(std::string_view name) {
  std::string n = lower(name);
  if (!n.empty() && n.front() == '.')
    n.erase(0, 1);
  if (n == "xyz")
    return Format::Xyz;
  if (n == "ply")
    return Format::Ply;
  if (n == "obj")
    return Format::Obj;
  throw Error(ErrorKind::UnsupportedFormat, "unsupported format '" + std::string(name) + "'");
}

Format format_of(const fs::path& path) { return parse_format(path.extension().string()); }

PointCloud read_points(const fs::path& path, Format format) {
  PointCloud cloud;
  switch (format) {
  case Format::Xyz:
    cloud = read_xyz(path);
    break;
  case Format::Ply: {
    PlyData d = read_ply(path);
    cloud.points = std::move(d.positions);
    cloud.normals = checked_normals(path, d.normals);
    break;
  }
  case Format::Obj: {
    ObjData d = read_obj(path);
    cloud.points = std::move(d.v);
    if (d.vn.size() == cloud.points.size())
      cloud.normals = checked_normals(path, d.vn);
    break;
  }
  }
  return cloud;
}

PointCloud read_points(const fs::path& path) { return read_points(path, format_of(path)); }

void write_points(const fs::path& path, Format format, const PointCloud& cloud,
                  PlyEncoding encoding) {
  cloud.validate();
  switch (format) {
  case Format::Xyz:
    write_xyz(path, cloud);
    break;
  case Format::Ply:
    write_ply(path, cloud.points, &cloud.normals, nullptr, encoding);
    break;
  case Format::Obj: {
    auto out = open_out(path);
    write_obj_vertices(out, cloud.points);
    for (const auto& n : cloud.normals)
      out << "vn " << static_cast<float>(n.x()) << ' ' << static_cast<float>(n.y()) << ' '
          << static_cast<float>(n.z()) << '\n';
    if (!out)
      throw Error(ErrorKind::IoError, "write failed: " + path.string());
    break;
  }
  }
}

void write_points(const fs::path& path, const PointCloud& cloud) {
  write_points(path, format_of(path), cloud);
}

TriangleMesh read_mesh(const fs::path& path, Format format) {
  TriangleMesh mesh;
  switch (format) {
  case Format::Xyz:
    throw Error(ErrorKind::UnsupportedFormat, "XYZ files carry no faces");
  case Format::Ply: {
    PlyData d = read_ply(path);
    mesh.vertices = std::move(d.positions);
    mesh.faces = std::move(d.faces);
    break;
  }
  case Format::Obj: {
    ObjData d = read_obj(path);
    mesh.vertices = std::move(d.v);
    mesh.faces = std::move(d.faces);
    break;
  }
  }
  for (std::size_t f = 0; f < mesh.faces.size(); ++f)
    for (auto v : mesh.faces[f])
      if (v < 0 || static_cast<std::size_t>(v) >= mesh.vertices.size())
        throw Error(ErrorKind::ParseError,
                    path.string() + ": face " + std::to_string(f) + " index out of range", f);
  return mesh;
}

TriangleMesh read_mesh(const fs::path& path) { return read_mesh(path, format_of(path)); }

void write_mesh(const fs::path& path, Format format, const TriangleMesh& mesh,
                PlyEncoding encoding) {
  switch (format) {
  case Format::Xyz:
    throw Error(ErrorKind::UnsupportedFormat, "XYZ files carry no faces");
  case Format::Ply:
    write_ply(path, mesh.vertices, nullptr, &mesh.faces, encoding);
    break;
  case Format::Obj: {
    auto out = open_out(path);
    write_obj_vertices(out, mesh.vertices);
    for (const auto& f : mesh.faces)
      out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    if (!out)
      throw Error(ErrorKind::IoError, "write failed: " + path.string());
    break;
  }
  }
}

void write_mesh(const fs::path& path, const TriangleMesh& mesh) {
  write_mesh(path, format_of(path), mesh);
}

} // namespace altrec::io

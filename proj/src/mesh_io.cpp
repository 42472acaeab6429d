#include "artrecon/mesh_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "artrecon/error.hpp"
#include "artrecon/numfmt.hpp"

namespace artrecon {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

TriMesh parse_obj(std::string_view text) {
  TriMesh mesh;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) throw SyntaxError(line_no, 1, "malformed vertex");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string ref;
      while (ls >> ref) {
        const std::string head = ref.substr(0, ref.find('/'));
        int idx = 0;
        try {
          idx = std::stoi(head);
        } catch (const std::exception&) {
          throw SyntaxError(line_no, 1, "malformed face reference '" + ref + "'");
        }
        if (idx < 0) idx = static_cast<int>(mesh.vertices.size()) + idx + 1;
        poly.push_back(idx - 1);
      }
      if (poly.size() < 3) throw SyntaxError(line_no, 1, "face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) mesh.faces.push_back({poly[0], poly[k], poly[k + 1]});
    }
  }
  mesh.validate();
  return mesh;
}

TriMesh read_obj(const std::filesystem::path& path) { return parse_obj(read_text_file(path)); }

std::string format_obj(const TriMesh& mesh) {
  std::string out;
  for (const Vec3& v : mesh.vertices) {
    out += "v " + format_real(v.x()) + ' ' + format_real(v.y()) + ' ' + format_real(v.z()) + '\n';
  }
  for (const Face& f : mesh.faces) {
    out += "f " + std::to_string(f[0] + 1) + ' ' + std::to_string(f[1] + 1) + ' ' + std::to_string(f[2] + 1) + '\n';
  }
  return out;
}

void write_obj(const std::filesystem::path& path, const TriMesh& mesh) { write_text_file(path, format_obj(mesh)); }

namespace {

struct PlyProperty {
  std::string name;
  std::string type;
  bool is_list = false;
  std::string count_type;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

std::size_t type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" || t == "float32") return 4;
  if (t == "double" || t == "float64") return 8;
  throw Error(ErrorCode::ExternalFormatError, "unknown PLY type '" + t + "'");
}

template <typename T>
T load(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double read_binary_scalar(const char* p, const std::string& t) {
  if (t == "char" || t == "int8") return load<std::int8_t>(p);
  if (t == "uchar" || t == "uint8") return load<std::uint8_t>(p);
  if (t == "short" || t == "int16") return load<std::int16_t>(p);
  if (t == "ushort" || t == "uint16") return load<std::uint16_t>(p);
  if (t == "int" || t == "int32") return load<std::int32_t>(p);
  if (t == "uint" || t == "uint32") return load<std::uint32_t>(p);
  if (t == "float" || t == "float32") return load<float>(p);
  return load<double>(p);
}

}  // namespace

PointCloud parse_ply(std::string_view bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() {
    const std::size_t end = bytes.find('\n', pos);
    if (end == std::string_view::npos) throw Error(ErrorCode::ExternalFormatError, "truncated PLY header");
    std::string line(bytes.substr(pos, end - pos));
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  if (next_line() != "ply") throw Error(ErrorCode::ExternalFormatError, "missing 'ply' magic");
  std::string format;
  std::vector<PlyElement> elements;
  for (;;) {
    const std::string line = next_line();
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "end_header") break;
    if (tag == "format") {
      ls >> format;
    } else if (tag == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (tag == "property") {
      if (elements.empty()) throw Error(ErrorCode::ExternalFormatError, "property before element");
      PlyProperty p;
      std::string type;
      ls >> type;
      if (type == "list") {
        p.is_list = true;
        ls >> p.count_type >> p.type >> p.name;
      } else {
        p.type = type;
        ls >> p.name;
      }
      elements.back().properties.push_back(p);
    }
  }
  if (format != "ascii" && format != "binary_little_endian") {
    throw Error(ErrorCode::ExternalFormatError, "unsupported PLY format '" + format + "'");
  }

  PointCloud cloud;
  const bool binary = format == "binary_little_endian";
  std::istringstream ascii_body;
  if (!binary) ascii_body.str(std::string(bytes.substr(pos)));

  for (const PlyElement& e : elements) {
    const bool is_vertex = e.name == "vertex";
    int ix = -1, iy = -1, iz = -1, il = -1;
    for (std::size_t k = 0; k < e.properties.size(); ++k) {
      const auto& n = e.properties[k].name;
      if (n == "x") ix = static_cast<int>(k);
      if (n == "y") iy = static_cast<int>(k);
      if (n == "z") iz = static_cast<int>(k);
      if (n == "label") il = static_cast<int>(k);
    }
    if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) throw Error(ErrorCode::ExternalFormatError, "vertex lacks x/y/z");
    std::vector<double> values(e.properties.size());
    for (std::size_t row = 0; row < e.count; ++row) {
      for (std::size_t k = 0; k < e.properties.size(); ++k) {
        const PlyProperty& p = e.properties[k];
        if (binary) {
          if (p.is_list) {
            const std::size_t cs = type_size(p.count_type);
            if (pos + cs > bytes.size()) throw Error(ErrorCode::ExternalFormatError, "truncated PLY body");
            const auto count = static_cast<std::size_t>(read_binary_scalar(bytes.data() + pos, p.count_type));
            pos += cs + count * type_size(p.type);
            continue;
          }
          const std::size_t sz = type_size(p.type);
          if (pos + sz > bytes.size()) throw Error(ErrorCode::ExternalFormatError, "truncated PLY body");
          values[k] = read_binary_scalar(bytes.data() + pos, p.type);
          pos += sz;
        } else {
          if (p.is_list) {
            std::size_t count = 0;
            ascii_body >> count;
            double skip;
            for (std::size_t c = 0; c < count; ++c) ascii_body >> skip;
          } else {
            ascii_body >> values[k];
          }
          if (!ascii_body) throw Error(ErrorCode::ExternalFormatError, "truncated PLY body");
        }
      }
      if (is_vertex) {
        cloud.points.emplace_back(values[ix], values[iy], values[iz]);
        if (il >= 0) cloud.labels.push_back(static_cast<int>(values[il]));
      }
    }
  }
  return cloud;
}

PointCloud read_ply(const std::filesystem::path& path) { return parse_ply(read_text_file(path)); }

std::string format_ply(const PointCloud& cloud, PlyEncoding encoding) {
  if (cloud.has_labels() && cloud.labels.size() != cloud.points.size()) {
    throw Error(ErrorCode::InvalidArgument, "label count does not match point count");
  }
  std::string out = "ply\nformat ";
  out += encoding == PlyEncoding::Ascii ? "ascii" : "binary_little_endian";
  out += " 1.0\nelement vertex " + std::to_string(cloud.points.size()) +
         "\nproperty double x\nproperty double y\nproperty double z\n";
  if (cloud.has_labels()) out += "property int label\n";
  out += "end_header\n";
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    if (encoding == PlyEncoding::Ascii) {
      out += format_real(p.x()) + ' ' + format_real(p.y()) + ' ' + format_real(p.z());
      if (cloud.has_labels()) out += ' ' + std::to_string(cloud.labels[i]);
      out += '\n';
    } else {
      for (int k = 0; k < 3; ++k) {
        const double v = p[k];
        out.append(reinterpret_cast<const char*>(&v), sizeof(v));
      }
      if (cloud.has_labels()) {
        const std::int32_t l = cloud.labels[i];
        out.append(reinterpret_cast<const char*>(&l), sizeof(l));
      }
    }
  }
  return out;
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud, PlyEncoding encoding) {
  write_text_file(path, format_ply(cloud, encoding));
}

}  // namespace artrecon

#ifndef DTREG_IO_HPP
#define DTREG_IO_HPP

#include <bit>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "dtreg/errors.hpp"
#include "dtreg/metrics_types.hpp"
#include "dtreg/volume.hpp"

namespace dtreg::io {

static_assert(std::endian::native == std::endian::little,
              "raw payloads are little-endian; big-endian hosts are unsupported");

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline std::vector<double> parse_numbers(const std::string& s) {
    std::vector<double> out;
    std::istringstream is(s);
    double v;
    while (is >> v) out.push_back(v);
    std::string rest;
    if (is.clear(), is >> rest) out.clear(); // trailing garbage invalidates
    return out;
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FileError("cannot open for writing: " + path.string());
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw FileError("write failed: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FileError("cannot open: " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace detail

// --- MetaImage volumes ------------------------------------------------------
//
// Text header (key = value per line) plus a raw little-endian payload in the
// sibling file named by ElementDataFile. Scalar volumes are MET_FLOAT, masks
// MET_UCHAR. TransformMatrix lists the direction-cosine matrix with one row
// per voxel axis.

inline void write_volume_header(const Grid& g, const std::string& element_type,
                                const std::string& data_file, const std::filesystem::path& path) {
    std::string h;
    h += "ObjectType = Image\n";
    h += "NDims = 3\n";
    h += "DimSize = " + std::to_string(g.dims[0]) + " " + std::to_string(g.dims[1]) + " " +
         std::to_string(g.dims[2]) + "\n";
    h += "ElementSpacing = " + detail::format_double(g.spacing.x) + " " +
         detail::format_double(g.spacing.y) + " " + detail::format_double(g.spacing.z) + "\n";
    h += "Offset = " + detail::format_double(g.origin.x) + " " + detail::format_double(g.origin.y) +
         " " + detail::format_double(g.origin.z) + "\n";
    h += "TransformMatrix =";
    const Mat3 rows = g.direction.transposed(); // row i = direction of axis i
    for (double v : rows.m) h += " " + detail::format_double(v);
    h += "\n";
    h += "ElementType = " + element_type + "\n";
    h += "ElementDataFile = " + data_file + "\n";
    detail::write_file(path, h);
}

inline void write_volume(const Volume3D& v, const std::filesystem::path& path) {
    const std::string raw_name = path.stem().string() + ".raw";
    write_volume_header(v.grid, "MET_FLOAT", raw_name, path);
    std::ofstream raw(path.parent_path() / raw_name, std::ios::binary);
    if (!raw) throw FileError("cannot open for writing: " + (path.parent_path() / raw_name).string());
    raw.write(reinterpret_cast<const char*>(v.data.data()),
              static_cast<std::streamsize>(v.data.size() * sizeof(float)));
    if (!raw) throw FileError("write failed: " + raw_name);
}

inline void write_mask(const Mask3D& m, const std::filesystem::path& path) {
    const std::string raw_name = path.stem().string() + ".raw";
    write_volume_header(m.grid, "MET_UCHAR", raw_name, path);
    std::ofstream raw(path.parent_path() / raw_name, std::ios::binary);
    if (!raw) throw FileError("cannot open for writing: " + (path.parent_path() / raw_name).string());
    raw.write(reinterpret_cast<const char*>(m.data.data()),
              static_cast<std::streamsize>(m.data.size()));
    if (!raw) throw FileError("write failed: " + raw_name);
}

using LoadedVolume = std::variant<Volume3D, Mask3D>;

inline LoadedVolume read_volume(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw FileError("cannot open: " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(f, line)) {
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
    }
    auto require = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw MissingKey(key + " in " + path.string());
        return it->second;
    };
    if (require("ObjectType") != "Image")
        throw DataError("read_volume: ObjectType must be Image: " + path.string());
    if (require("NDims") != "3") throw DataError("read_volume: NDims must be 3: " + path.string());

    Grid g;
    {
        const auto dims = detail::parse_numbers(require("DimSize"));
        if (dims.size() != 3) throw DataError("read_volume: DimSize needs 3 values");
        for (int a = 0; a < 3; ++a) g.dims[a] = static_cast<int>(dims[static_cast<std::size_t>(a)]);
        const auto sp = detail::parse_numbers(require("ElementSpacing"));
        if (sp.size() != 3) throw DataError("read_volume: ElementSpacing needs 3 values");
        g.spacing = {sp[0], sp[1], sp[2]};
        const auto off = detail::parse_numbers(require("Offset"));
        if (off.size() != 3) throw DataError("read_volume: Offset needs 3 values");
        g.origin = {off[0], off[1], off[2]};
        const auto tm = detail::parse_numbers(require("TransformMatrix"));
        if (tm.size() != 9) throw DataError("read_volume: TransformMatrix needs 9 values");
        Mat3 rows;
        for (std::size_t i = 0; i < 9; ++i) rows.m[i] = tm[i];
        g.direction = rows.transposed();
    }
    validate_grid(g, "read_volume(" + path.string() + ")");

    const std::string& etype = require("ElementType");
    if (etype != "MET_FLOAT" && etype != "MET_UCHAR")
        throw UnsupportedElementType(etype + " in " + path.string());
    const std::string& data_file = require("ElementDataFile");
    if (data_file == "LOCAL" || data_file == "LIST")
        throw UnsupportedElementType("ElementDataFile " + data_file + " is not supported");

    const std::string raw = detail::read_file(path.parent_path() / data_file);
    const std::size_t count = g.voxel_count();
    const std::size_t elem = etype == "MET_FLOAT" ? sizeof(float) : 1;
    if (raw.size() != count * elem)
        throw PayloadSizeMismatch("expected " + std::to_string(count * elem) + " bytes, found " +
                                  std::to_string(raw.size()) + " in " + data_file);

    if (etype == "MET_FLOAT") {
        Volume3D v;
        v.grid = g;
        v.data.resize(count);
        std::memcpy(v.data.data(), raw.data(), raw.size());
        for (float x : v.data)
            if (!std::isfinite(x)) throw DataError("read_volume: non-finite payload value");
        return v;
    }
    Mask3D m;
    m.grid = g;
    m.data.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        m.data[i] = raw[i] ? 1 : 0;
    return m;
}

inline Volume3D read_scalar_volume(const std::filesystem::path& path) {
    LoadedVolume v = read_volume(path);
    if (auto* p = std::get_if<Volume3D>(&v)) return std::move(*p);
    throw DataError("expected a MET_FLOAT scalar volume: " + path.string());
}

inline Mask3D read_mask(const std::filesystem::path& path) {
    LoadedVolume v = read_volume(path);
    if (auto* p = std::get_if<Mask3D>(&v)) return std::move(*p);
    throw DataError("expected a MET_UCHAR mask: " + path.string());
}

// Deformation fields are stored as three scalar volumes sharing one
// geometry, suffixed _ux/_uy/_uz.
inline void write_field(const VectorField3& f, const std::filesystem::path& base) {
    const char* suffix[3] = {"_ux", "_uy", "_uz"};
    for (int d = 0; d < 3; ++d) {
        Volume3D v = make_volume(f.grid);
        for (std::size_t i = 0; i < v.data.size(); ++i)
            v.data[i] = static_cast<float>(f.comp[d][i]);
        write_volume(v, base.parent_path() / (base.filename().string() + suffix[d] + ".mhd"));
    }
}

inline VectorField3 read_field(const std::filesystem::path& base) {
    const char* suffix[3] = {"_ux", "_uy", "_uz"};
    VectorField3 f;
    for (int d = 0; d < 3; ++d) {
        Volume3D v = read_scalar_volume(base.parent_path() /
                                        (base.filename().string() + suffix[d] + ".mhd"));
        if (d == 0) f.resize_zero(v.grid);
        else if (!v.grid.same_geometry(f.grid))
            throw DataError("read_field: component grids disagree");
        for (std::size_t i = 0; i < v.data.size(); ++i) f.comp[d][i] = v.data[i];
    }
    return f;
}

// --- landmark lists ---------------------------------------------------------
//
// CSV with the fixed header line "id,x,y,z"; world coordinates in mm.

inline void write_landmarks(const LandmarkSet& ls, const std::filesystem::path& path) {
    std::string text = "id,x,y,z\n";
    char buf[160];
    for (const Landmark& lm : ls.entries) {
        std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f\n", lm.id.c_str(), lm.position.x,
                      lm.position.y, lm.position.z);
        text += buf;
    }
    detail::write_file(path, text);
}

inline LandmarkSet read_landmarks(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw FileError("cannot open: " + path.string());
    std::string line;
    if (!std::getline(f, line) || detail::trim(line) != "id,x,y,z")
        throw MalformedLine("line 1: expected header \"id,x,y,z\" in " + path.string());
    LandmarkSet ls;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        std::vector<std::string> fields;
        std::size_t pos = 0;
        while (true) {
            const std::size_t c = t.find(',', pos);
            fields.push_back(t.substr(pos, c - pos));
            if (c == std::string::npos) break;
            pos = c + 1;
        }
        if (fields.size() != 4)
            throw MalformedLine("line " + std::to_string(lineno) + ": expected 4 fields");
        const std::string id = detail::trim(fields[0]);
        if (id.empty())
            throw MalformedLine("line " + std::to_string(lineno) + ": empty id");
        Vec3 p;
        for (int a = 0; a < 3; ++a) {
            const std::string tok = detail::trim(fields[static_cast<std::size_t>(a) + 1]);
            char* end = nullptr;
            const double v = std::strtod(tok.c_str(), &end);
            if (tok.empty() || end != tok.c_str() + tok.size() || !std::isfinite(v))
                throw MalformedLine("line " + std::to_string(lineno) + ": bad number \"" + tok + "\"");
            p[a] = v;
        }
        if (ls.find(id)) throw DuplicateId(id + " at line " + std::to_string(lineno));
        ls.entries.push_back({id, p});
    }
    return ls;
}

// --- 4x4 transform matrices ---------------------------------------------------

inline Mat44 read_matrix(const std::filesystem::path& path) {
    const std::vector<double> nums = detail::parse_numbers(detail::read_file(path));
    if (nums.size() != 16)
        throw WrongCount("expected 16 numbers, found " + std::to_string(nums.size()) + " in " +
                         path.string());
    Mat44 m;
    for (std::size_t i = 0; i < 16; ++i) m.m[i] = nums[i];
    const double bad = std::abs(m(3, 0)) + std::abs(m(3, 1)) + std::abs(m(3, 2)) +
                       std::abs(m(3, 3) - 1.0);
    if (bad > 1e-9) throw BadBottomRow("last row must be 0 0 0 1 in " + path.string());
    return m;
}

inline void write_matrix(const Mat44& m, const std::filesystem::path& path) {
    std::string text;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            text += detail::format_double(m(r, c));
            text += c == 3 ? '\n' : ' ';
        }
    }
    detail::write_file(path, text);
}

} // namespace dtreg::io

#endif

#include "logsaw/point_cloud.hpp"
#include "logsaw/error.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace logsaw {

void validate(const PointCloud& cloud) {
    if (!cloud.labels.empty() && cloud.labels.size() != cloud.points.size())
        fail("InvalidInput", "label count does not match point count");
    for (const Vec3& p : cloud.points)
        if (!p.allFinite())
            fail("InvalidInput", "non-finite point coordinate");
}

PointCloud load_xyz(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IOError", "cannot open " + path);
    PointCloud cloud;
    bool any_label = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        double x, y, z;
        if (!(ss >> x >> y >> z))
            fail("IOError", path + ": malformed XYZ line " + std::to_string(lineno));
        int label = kNoLabel;
        if (ss >> label) any_label = true;
        cloud.points.emplace_back(x, y, z);
        cloud.labels.push_back(label);
    }
    if (!any_label) cloud.labels.clear();
    validate(cloud);
    return cloud;
}

void save_xyz(const PointCloud& cloud, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) fail("IOError", "cannot write " + path);
    const bool labels = cloud.has_labels();
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        const Vec3& p = cloud.points[i];
        if (labels)
            std::fprintf(f, "%.6f %.6f %.6f %d\n", p.x(), p.y(), p.z(), cloud.labels[i]);
        else
            std::fprintf(f, "%.6f %.6f %.6f\n", p.x(), p.y(), p.z());
    }
    std::fclose(f);
}

namespace {

struct PlyProperty {
    std::string type;
    std::string name;
};

std::size_t ply_type_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32") return 4;
    if (t == "double" || t == "float64" || t == "int64" || t == "uint64") return 8;
    fail("IOError", "unsupported PLY property type " + t);
}

} // namespace

PointCloud load_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IOError", "cannot open " + path);

    std::string line;
    if (!std::getline(in, line) || line.rfind("ply", 0) != 0)
        fail("IOError", path + ": not a PLY file");

    std::size_t vertex_count = 0;
    std::vector<PlyProperty> props;
    bool in_vertex_element = false;
    bool little_endian = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        if (tok == "format") {
            std::string fmt;
            ss >> fmt;
            little_endian = (fmt == "binary_little_endian");
            if (!little_endian)
                fail("IOError", path + ": only binary_little_endian PLY is supported");
        } else if (tok == "element") {
            std::string name;
            std::size_t count;
            ss >> name >> count;
            in_vertex_element = (name == "vertex");
            if (in_vertex_element) vertex_count = count;
            else if (vertex_count > 0) break; // vertex props are complete
        } else if (tok == "property" && in_vertex_element) {
            PlyProperty p;
            ss >> p.type >> p.name;
            if (p.type == "list")
                fail("IOError", path + ": list property in vertex element unsupported");
            props.push_back(p);
        } else if (tok == "end_header") {
            break;
        }
    }

    std::size_t stride = 0, off_x = SIZE_MAX, off_y = SIZE_MAX, off_z = SIZE_MAX;
    for (const PlyProperty& p : props) {
        if (p.name == "x") off_x = stride;
        if (p.name == "y") off_y = stride;
        if (p.name == "z") off_z = stride;
        stride += ply_type_size(p.type);
    }
    if (off_x == SIZE_MAX || off_y == SIZE_MAX || off_z == SIZE_MAX)
        fail("IOError", path + ": PLY vertex element lacks x/y/z");

    std::vector<char> rec(stride);
    PointCloud cloud;
    cloud.points.reserve(vertex_count);
    for (std::size_t i = 0; i < vertex_count; ++i) {
        if (!in.read(rec.data(), static_cast<std::streamsize>(stride)))
            fail("IOError", path + ": truncated PLY vertex data");
        float x, y, z;
        std::memcpy(&x, rec.data() + off_x, 4);
        std::memcpy(&y, rec.data() + off_y, 4);
        std::memcpy(&z, rec.data() + off_z, 4);
        cloud.points.emplace_back(x, y, z);
    }
    validate(cloud);
    return cloud;
}

PointCloud load_cloud(const std::string& path) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".ply") == 0)
        return load_ply(path);
    return load_xyz(path);
}

} // namespace logsaw

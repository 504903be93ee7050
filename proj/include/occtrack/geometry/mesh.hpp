#pragma once

#include "occtrack/error.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace occtrack
{
class MeshError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct TriangleMesh
{
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<int, 3>> triangles;

    /// Mean of the vertices; rotation noise and twists act about this point.
    Eigen::Vector3d centroid() const
    {
        Eigen::Vector3d c = Eigen::Vector3d::Zero();
        if (vertices.empty()) return c;
        for (const auto& v : vertices) c += v;
        return c / static_cast<double>(vertices.size());
    }

    double triangle_area(const std::array<int, 3>& t) const
    {
        const Eigen::Vector3d& a = vertices[t[0]];
        return 0.5 * (vertices[t[1]] - a).cross(vertices[t[2]] - a).norm();
    }

    void validate() const
    {
        for (const auto& v : vertices)
            if (!v.allFinite()) throw MeshError("mesh: non-finite vertex coordinate");
        const int n = static_cast<int>(vertices.size());
        for (const auto& t : triangles)
        {
            for (int idx : t)
                if (idx < 0 || idx >= n) throw MeshError("mesh: triangle index out of range");
            if (!(triangle_area(t) > 0.0)) throw MeshError("mesh: degenerate triangle");
        }
    }

    /// Appends \p other, offsetting its indices.
    void append(const TriangleMesh& other)
    {
        const int offset = static_cast<int>(vertices.size());
        vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
        for (auto t : other.triangles)
        {
            for (int& idx : t) idx += offset;
            triangles.push_back(t);
        }
    }
};

namespace detail
{
// Resolves an OBJ face token ("7", "7/1", "7//3", "-1") to a 0-based index.
inline int parse_obj_index(const std::string& token, int vertex_count, int line_no)
{
    const std::string head = token.substr(0, token.find('/'));
    int idx = 0;
    try
    {
        std::size_t used = 0;
        idx = std::stoi(head, &used);
        if (used != head.size()) throw std::invalid_argument(head);
    }
    catch (const std::exception&)
    {
        throw MeshError("obj line " + std::to_string(line_no) + ": bad face index '" + token + "'");
    }
    if (idx > 0) return idx - 1;
    if (idx < 0) return vertex_count + idx;
    throw MeshError("obj line " + std::to_string(line_no) + ": face index 0");
}
}  // namespace detail

/// Reads the "v" and "f" records of an ASCII OBJ stream. Polygons are fan
/// triangulated and zero-area triangles are dropped.
inline TriangleMesh parse_obj(std::istream& in)
{
    TriangleMesh mesh;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        if (tag == "v")
        {
            Eigen::Vector3d v;
            if (!(ls >> v.x() >> v.y() >> v.z()))
                throw MeshError("obj line " + std::to_string(line_no) + ": malformed vertex");
            if (!v.allFinite())
                throw MeshError("obj line " + std::to_string(line_no) + ": non-finite vertex");
            mesh.vertices.push_back(v);
        }
        else if (tag == "f")
        {
            std::vector<int> poly;
            std::string tok;
            const int n = static_cast<int>(mesh.vertices.size());
            while (ls >> tok)
            {
                const int idx = detail::parse_obj_index(tok, n, line_no);
                if (idx < 0 || idx >= n)
                    throw MeshError("obj line " + std::to_string(line_no) + ": face index out of range");
                poly.push_back(idx);
            }
            if (poly.size() < 3)
                throw MeshError("obj line " + std::to_string(line_no) + ": face with fewer than 3 vertices");
            for (std::size_t k = 1; k + 1 < poly.size(); ++k)
            {
                const std::array<int, 3> t{poly[0], poly[k], poly[k + 1]};
                if (mesh.triangle_area(t) > 0.0) mesh.triangles.push_back(t);
            }
        }
    }
    mesh.validate();
    return mesh;
}

inline TriangleMesh load_obj(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mesh file '" + path + "'");
    return parse_obj(in);
}

inline void write_obj(std::ostream& out, const TriangleMesh& mesh)
{
    out.precision(17);
    for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& t : mesh.triangles)
        out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

inline void save_obj(const std::string& path, const TriangleMesh& mesh)
{
    std::ofstream out(path);
    if (!out) throw IoError("cannot write mesh file '" + path + "'");
    write_obj(out, mesh);
}

/// Axis-aligned box with outward-facing triangles.
inline TriangleMesh make_box(const Eigen::Vector3d& size,
                             const Eigen::Vector3d& center = Eigen::Vector3d::Zero())
{
    TriangleMesh m;
    const Eigen::Vector3d h = 0.5 * size;
    for (int i = 0; i < 8; ++i)
    {
        m.vertices.emplace_back(center.x() + ((i & 1) ? h.x() : -h.x()),
                                center.y() + ((i & 2) ? h.y() : -h.y()),
                                center.z() + ((i & 4) ? h.z() : -h.z()));
    }
    const int quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4},
                             {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
    for (const auto& q : quads)
    {
        m.triangles.push_back({q[0], q[1], q[2]});
        m.triangles.push_back({q[0], q[2], q[3]});
    }
    return m;
}

/// Rectangle in the z = 0 plane of its own frame, two triangles.
inline TriangleMesh make_plane(double width, double height)
{
    TriangleMesh m;
    m.vertices = {{-0.5 * width, -0.5 * height, 0.0},
                  {0.5 * width, -0.5 * height, 0.0},
                  {0.5 * width, 0.5 * height, 0.0},
                  {-0.5 * width, 0.5 * height, 0.0}};
    m.triangles = {{0, 1, 2}, {0, 2, 3}};
    return m;
}

/// Drill-like tool: a long body with a handle and a short nose. The shape
/// has no rotational symmetry, so its pose is observable from depth alone.
inline TriangleMesh make_tool()
{
    TriangleMesh m = make_box({0.18, 0.07, 0.07}, {0.0, 0.0, 0.0});
    m.append(make_box({0.05, 0.12, 0.05}, {-0.04, 0.095, 0.0}));
    m.append(make_box({0.05, 0.035, 0.035}, {0.115, 0.0, 0.0}));
    return m;
}

}  // namespace occtrack

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "nsmpb/core.hpp"
#include "nsmpb/molecule.hpp"

namespace nsmpb {

enum class RegionLabel : std::uint8_t { Protein = 1, Solvent = 2 };

struct Tet {
    std::array<int, 4> v;
    RegionLabel region;
};

/// Interface triangle between a Protein and a Solvent tetrahedron. The
/// stored winding and normal point outward from the Protein region.
struct InterfaceTri {
    std::array<int, 3> v;
    Vec3 normal;       ///< unit, Protein -> Solvent
    int protein_tet;
    int solvent_tet;
};

struct BoundingBox {
    Vec3 lo, hi;
};

/// Interface-fitted tetrahedral partition of the box domain. Derived
/// connectivity (interface triangles, boundary vertex set) is built once at
/// construction; instances are immutable afterwards.
struct TetMesh {
    std::vector<Vec3> vertices;
    std::vector<Tet> tets;
    std::vector<InterfaceTri> interface_tris;
    std::vector<int> boundary_vertices;       // sorted
    std::vector<bool> is_boundary;            // size n_vertices
    BoundingBox box;
    int orientation_repairs = 0;

    int n_vertices() const { return static_cast<int>(vertices.size()); }
    int n_tets() const { return static_cast<int>(tets.size()); }

    Vec3 tet_centroid(int t) const {
        const auto& k = tets[t].v;
        return (vertices[k[0]] + vertices[k[1]] + vertices[k[2]] + vertices[k[3]]) * 0.25;
    }

    double tet_volume(int t) const {
        const auto& k = tets[t].v;
        const Vec3 a = vertices[k[1]] - vertices[k[0]];
        const Vec3 b = vertices[k[2]] - vertices[k[0]];
        const Vec3 c = vertices[k[3]] - vertices[k[0]];
        return a.cross(b).dot(c) / 6.0;
    }

    double tri_area(const std::array<int, 3>& t) const {
        const Vec3 a = vertices[t[1]] - vertices[t[0]];
        const Vec3 b = vertices[t[2]] - vertices[t[0]];
        return 0.5 * a.cross(b).norm();
    }
};

struct ValidationReport {
    int n_vertices = 0;
    int n_vertices_solvent = 0;   // vertices touching a Solvent tet
    int n_vertices_protein = 0;   // vertices touching a Protein tet
    int n_vertices_interface = 0; // vertices on interface triangles
    int n_vertices_boundary = 0;
    int n_tets = 0;
    int n_tets_solvent = 0;
    int n_tets_protein = 0;
    int n_interface_tris = 0;
    double min_volume = 0;
    double max_volume = 0;
    double min_dihedral_deg = 0;
    bool interface_closed = false;     // every interface edge on exactly 2 triangles
    bool interface_oriented = false;   // consistent outward winding
    int orientation_repairs = 0;

    std::string to_text() const;
    std::string to_key_values() const;
};

namespace detail {

struct FaceKey {
    std::array<int, 3> v;  // sorted
    bool operator<(const FaceKey& o) const { return v < o.v; }
};

inline FaceKey face_of(const Tet& t, int skip) {
    std::array<int, 3> f;
    int k = 0;
    for (int i = 0; i < 4; ++i)
        if (i != skip) f[k++] = t.v[i];
    std::sort(f.begin(), f.end());
    return {f};
}

}  // namespace detail

/// Derives interface triangles and the boundary vertex set from face
/// adjacency, repairing inverted tetrahedra by a vertex swap.
inline void finalize_mesh(TetMesh& mesh) {
    const int nv = mesh.n_vertices();
    for (auto& t : mesh.tets)
        for (int k : t.v)
            if (k < 0 || k >= nv)
                throw MeshError("mesh: tetrahedron references vertex " + std::to_string(k) +
                                " outside [0, " + std::to_string(nv) + ")");

    mesh.orientation_repairs = 0;
    for (int t = 0; t < mesh.n_tets(); ++t) {
        if (mesh.tet_volume(t) < 0) {
            std::swap(mesh.tets[t].v[2], mesh.tets[t].v[3]);
            ++mesh.orientation_repairs;
        }
        if (!(mesh.tet_volume(t) > 0))
            throw MeshError("mesh: tetrahedron " + std::to_string(t) + " is degenerate");
    }

    // face -> (tet, opposite-vertex) owners
    std::map<detail::FaceKey, std::vector<std::pair<int, int>>> faces;
    for (int t = 0; t < mesh.n_tets(); ++t)
        for (int s = 0; s < 4; ++s) faces[detail::face_of(mesh.tets[t], s)].push_back({t, s});

    mesh.interface_tris.clear();
    mesh.is_boundary.assign(nv, false);
    for (const auto& [key, owners] : faces) {
        if (owners.size() > 2)
            throw MeshError("mesh: face shared by more than two tetrahedra");
        if (owners.size() == 1) {
            for (int v : key.v) mesh.is_boundary[v] = true;
            continue;
        }
        const auto [t0, s0] = owners[0];
        const auto [t1, s1] = owners[1];
        if (mesh.tets[t0].region == mesh.tets[t1].region) continue;
        const int tp = mesh.tets[t0].region == RegionLabel::Protein ? t0 : t1;
        const int ts = tp == t0 ? t1 : t0;
        InterfaceTri tri;
        tri.v = key.v;
        tri.protein_tet = tp;
        tri.solvent_tet = ts;
        const Vec3 a = mesh.vertices[tri.v[1]] - mesh.vertices[tri.v[0]];
        const Vec3 b = mesh.vertices[tri.v[2]] - mesh.vertices[tri.v[0]];
        Vec3 n = a.cross(b);
        const double len = n.norm();
        if (!(len > 0)) throw MeshError("mesh: degenerate interface triangle");
        n = n / len;
        // orient outward from the Protein tet
        if (n.dot(mesh.tet_centroid(ts) - mesh.tet_centroid(tp)) < 0) {
            std::swap(tri.v[1], tri.v[2]);
            n = n * -1.0;
        }
        tri.normal = n;
        mesh.interface_tris.push_back(tri);
    }

    mesh.boundary_vertices.clear();
    for (int i = 0; i < nv; ++i)
        if (mesh.is_boundary[i]) mesh.boundary_vertices.push_back(i);

    if (nv > 0) {
        mesh.box.lo = mesh.box.hi = mesh.vertices[0];
        for (const auto& p : mesh.vertices) {
            mesh.box.lo.x = std::min(mesh.box.lo.x, p.x);
            mesh.box.lo.y = std::min(mesh.box.lo.y, p.y);
            mesh.box.lo.z = std::min(mesh.box.lo.z, p.z);
            mesh.box.hi.x = std::max(mesh.box.hi.x, p.x);
            mesh.box.hi.y = std::max(mesh.box.hi.y, p.y);
            mesh.box.hi.z = std::max(mesh.box.hi.z, p.z);
        }
    }
}

// ---------------------------------------------------------------------------
// TetGen-format ingestion (.node / .ele ASCII pair)
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> data_lines(std::istream& in) {
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        auto pos = line.find('#');
        if (pos != std::string::npos) line.erase(pos);
        bool blank = true;
        for (char c : line)
            if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
        if (!blank) lines.push_back(line);
    }
    return lines;
}

}  // namespace detail

/// Load a TetGen mesh. Node header "N 3 0 B"; ele header "M 4 1" with a
/// region attribute per tetrahedron (1 = Protein, 2 = Solvent). Index base
/// (0 or 1) is detected from the first listed node index.
inline TetMesh load_tetgen(std::istream& node_in, std::istream& ele_in) {
    auto nlines = detail::data_lines(node_in);
    if (nlines.empty()) throw ParseError("tetgen node file: empty");
    std::istringstream hh(nlines[0]);
    long n = 0, dim = 0, nattr = 0, nmark = 0;
    if (!(hh >> n >> dim >> nattr >> nmark) || dim != 3 || nattr != 0 || n <= 0)
        throw ParseError("tetgen node file: expected header 'N 3 0 B', got '" + nlines[0] + "'");
    if (static_cast<long>(nlines.size()) != n + 1)
        throw ParseError("tetgen node file: expected " + std::to_string(n) + " vertex lines");

    TetMesh mesh;
    mesh.vertices.resize(n);
    long base = -1;
    for (long i = 0; i < n; ++i) {
        std::istringstream ls(nlines[i + 1]);
        long idx;
        Vec3 p;
        if (!(ls >> idx >> p.x >> p.y >> p.z))
            throw ParseError("tetgen node file line " + std::to_string(i + 2) + ": malformed");
        if (base < 0) {
            base = idx;
            if (base != 0 && base != 1)
                throw ParseError("tetgen node file: first index must be 0 or 1");
        }
        const long at = idx - base;
        if (at < 0 || at >= n)
            throw ParseError("tetgen node file line " + std::to_string(i + 2) +
                             ": index out of range");
        mesh.vertices[at] = p;
    }

    auto elines = detail::data_lines(ele_in);
    if (elines.empty()) throw ParseError("tetgen ele file: empty");
    std::istringstream eh(elines[0]);
    long m = 0, nper = 0, nregattr = 0;
    if (!(eh >> m >> nper >> nregattr) || nper != 4 || nregattr != 1 || m <= 0)
        throw ParseError("tetgen ele file: expected header 'M 4 1', got '" + elines[0] + "'");
    if (static_cast<long>(elines.size()) != m + 1)
        throw ParseError("tetgen ele file: expected " + std::to_string(m) + " element lines");

    mesh.tets.resize(m);
    for (long i = 0; i < m; ++i) {
        std::istringstream ls(elines[i + 1]);
        long idx, a, b, c, d;
        int attr;
        if (!(ls >> idx >> a >> b >> c >> d >> attr))
            throw ParseError("tetgen ele file line " + std::to_string(i + 2) + ": malformed");
        for (long* q : {&a, &b, &c, &d}) {
            *q -= base;
            if (*q < 0 || *q >= n)
                throw ParseError("tetgen ele file line " + std::to_string(i + 2) +
                                 ": vertex index " + std::to_string(*q + base) + " out of range");
        }
        if (attr != 1 && attr != 2)
            throw ParseError("tetgen ele file line " + std::to_string(i + 2) +
                             ": region attribute must be 1 (protein) or 2 (solvent), got " +
                             std::to_string(attr));
        mesh.tets[i] = Tet{{static_cast<int>(a), static_cast<int>(b), static_cast<int>(c),
                            static_cast<int>(d)},
                           attr == 1 ? RegionLabel::Protein : RegionLabel::Solvent};
    }
    finalize_mesh(mesh);
    return mesh;
}

inline TetMesh load_tetgen_files(const std::string& node_path, const std::string& ele_path) {
    std::ifstream nf(node_path), ef(ele_path);
    if (!nf) throw ParseError("cannot open node file: " + node_path);
    if (!ef) throw ParseError("cannot open ele file: " + ele_path);
    return load_tetgen(nf, ef);
}

/// Write the pair back out, 1-based, full-precision coordinates.
inline void save_tetgen(const TetMesh& mesh, std::ostream& node_out, std::ostream& ele_out) {
    node_out << mesh.n_vertices() << " 3 0 1\n";
    for (int i = 0; i < mesh.n_vertices(); ++i) {
        const Vec3& p = mesh.vertices[i];
        node_out << (i + 1) << ' ' << format_g17(p.x) << ' ' << format_g17(p.y) << ' '
                 << format_g17(p.z) << ' ' << (mesh.is_boundary[i] ? 1 : 0) << '\n';
    }
    ele_out << mesh.n_tets() << " 4 1\n";
    for (int t = 0; t < mesh.n_tets(); ++t) {
        const Tet& tet = mesh.tets[t];
        ele_out << (t + 1);
        for (int k : tet.v) ele_out << ' ' << (k + 1);
        ele_out << ' ' << (tet.region == RegionLabel::Protein ? 1 : 2) << '\n';
    }
}

inline void save_tetgen_files(const TetMesh& mesh, const std::string& node_path,
                              const std::string& ele_path) {
    std::ofstream nf(node_path), ef(ele_path);
    if (!nf) throw Error("cannot write node file: " + node_path);
    if (!ef) throw Error("cannot write ele file: " + ele_path);
    save_tetgen(mesh, nf, ef);
}

// ---------------------------------------------------------------------------
// Synthetic sphere-interface mesh
// ---------------------------------------------------------------------------

/// Uniform box [-L, L]^3 cut into 6 n^3 tetrahedra (Kuhn split per cell).
/// Vertices within snap_fraction of a cell width of the sphere |x| = a are
/// projected onto it, so the interface triangles track the sphere. Tets are
/// labeled Protein iff their centroid lies inside the sphere.
inline TetMesh gen_born_mesh(double box_halfwidth, double sphere_radius, int divisions,
                             double snap_fraction) {
    const double L = box_halfwidth, a = sphere_radius;
    const int n = divisions;
    if (!(a > 0) || !(a < L))
        throw MeshError("born mesh: need 0 < sphere radius < box halfwidth");
    if (n < 2) throw MeshError("born mesh: need at least 2 divisions");
    if (snap_fraction < 0 || snap_fraction > 0.5)
        throw MeshError("born mesh: snap fraction must be in [0, 0.5]");
    if (a < L / n)
        throw MeshError("born mesh: interface empty (sphere radius below mesh resolution)");

    const double h = 2.0 * L / n;
    TetMesh mesh;
    mesh.vertices.reserve(static_cast<std::size_t>(n + 1) * (n + 1) * (n + 1));
    auto vid = [n](int i, int j, int k) { return (i * (n + 1) + j) * (n + 1) + k; };
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            for (int k = 0; k <= n; ++k)
                mesh.vertices.push_back({-L + i * h, -L + j * h, -L + k * h});

    if (snap_fraction > 0) {
        const double band = snap_fraction * h;
        for (auto& p : mesh.vertices) {
            const double r = p.norm();
            if (r > 0 && std::abs(r - a) < band) p = p * (a / r);
        }
    }

    // Kuhn split: six tets around the main diagonal of each cell, one per
    // permutation of the axis traversal order. Neighboring cells agree on
    // shared faces; odd permutations are listed with two vertices swapped so
    // every tet comes out positively oriented.
    static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                    {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    static const bool odd[6] = {false, true, true, false, false, true};
    mesh.tets.reserve(static_cast<std::size_t>(6) * n * n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const int c[3] = {i, j, k};
                for (int p = 0; p < 6; ++p) {
                    std::array<int, 4> vs;
                    int at[3] = {c[0], c[1], c[2]};
                    vs[0] = vid(at[0], at[1], at[2]);
                    for (int s = 0; s < 3; ++s) {
                        ++at[perms[p][s]];
                        vs[s + 1] = vid(at[0], at[1], at[2]);
                    }
                    if (odd[p]) std::swap(vs[1], vs[2]);
                    mesh.tets.push_back(Tet{vs, RegionLabel::Solvent});
                }
            }

    const double cell_volume = h * h * h;
    for (int t = 0; t < mesh.n_tets(); ++t) {
        const double vol = std::abs(mesh.tet_volume(t));
        if (vol < 1e-12 * cell_volume)
            throw MeshError("born mesh: snapping produced a degenerate tetrahedron; "
                            "use a smaller snap fraction");
        if (mesh.tet_centroid(t).norm() < a) mesh.tets[t].region = RegionLabel::Protein;
    }

    finalize_mesh(mesh);
    return mesh;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

inline double min_dihedral_angle_deg(const TetMesh& mesh) {
    double best = 180.0;
    for (const Tet& t : mesh.tets) {
        // dihedral along each of the 6 edges = angle between the two faces
        // not containing... computed from inward face normals
        Vec3 fn[4];
        for (int s = 0; s < 4; ++s) {
            int f[3], k = 0;
            for (int i = 0; i < 4; ++i)
                if (i != s) f[k++] = t.v[i];
            const Vec3 a = mesh.vertices[f[1]] - mesh.vertices[f[0]];
            const Vec3 b = mesh.vertices[f[2]] - mesh.vertices[f[0]];
            Vec3 nrm = a.cross(b);
            nrm = nrm / nrm.norm();
            // orient away from the opposite vertex
            if (nrm.dot(mesh.vertices[t.v[s]] - mesh.vertices[f[0]]) > 0) nrm = nrm * -1.0;
            fn[s] = nrm;
        }
        for (int s = 0; s < 4; ++s)
            for (int r = s + 1; r < 4; ++r) {
                const double c = std::clamp(-fn[s].dot(fn[r]), -1.0, 1.0);
                best = std::min(best, std::acos(c) * 180.0 / std::numbers::pi);
            }
    }
    return best;
}

inline ValidationReport validate(const TetMesh& mesh) {
    ValidationReport rep;
    rep.n_vertices = mesh.n_vertices();
    rep.n_tets = mesh.n_tets();
    rep.orientation_repairs = mesh.orientation_repairs;

    std::vector<bool> in_s(mesh.n_vertices(), false), in_p(mesh.n_vertices(), false),
        on_if(mesh.n_vertices(), false);
    rep.min_volume = mesh.n_tets() ? mesh.tet_volume(0) : 0;
    rep.max_volume = rep.min_volume;
    for (int t = 0; t < mesh.n_tets(); ++t) {
        const Tet& tet = mesh.tets[t];
        const double vol = mesh.tet_volume(t);
        rep.min_volume = std::min(rep.min_volume, vol);
        rep.max_volume = std::max(rep.max_volume, vol);
        if (tet.region == RegionLabel::Solvent) {
            ++rep.n_tets_solvent;
            for (int v : tet.v) in_s[v] = true;
        } else {
            ++rep.n_tets_protein;
            for (int v : tet.v) in_p[v] = true;
        }
    }
    for (const auto& tri : mesh.interface_tris)
        for (int v : tri.v) on_if[v] = true;
    for (int v = 0; v < mesh.n_vertices(); ++v) {
        rep.n_vertices_solvent += in_s[v];
        rep.n_vertices_protein += in_p[v];
        rep.n_vertices_interface += on_if[v];
    }
    rep.n_vertices_boundary = static_cast<int>(mesh.boundary_vertices.size());
    rep.n_interface_tris = static_cast<int>(mesh.interface_tris.size());
    rep.min_dihedral_deg = mesh.n_tets() ? min_dihedral_angle_deg(mesh) : 0;

    // closed + oriented: each interface edge appears on exactly two
    // triangles, once per direction
    std::map<std::pair<int, int>, int> directed;
    for (const auto& tri : mesh.interface_tris)
        for (int e = 0; e < 3; ++e) {
            const int u = tri.v[e], w = tri.v[(e + 1) % 3];
            ++directed[{u, w}];
        }
    rep.interface_closed = !mesh.interface_tris.empty();
    rep.interface_oriented = !mesh.interface_tris.empty();
    for (const auto& [edge, cnt] : directed) {
        auto rev = directed.find({edge.second, edge.first});
        const int back = rev == directed.end() ? 0 : rev->second;
        if (cnt + back != 2) rep.interface_closed = false;
        if (cnt != 1 || back != 1) rep.interface_oriented = false;
    }
    return rep;
}

inline std::string ValidationReport::to_text() const {
    std::ostringstream os;
    os << "Mesh summary\n"
       << "  vertices: total " << n_vertices << ", solvent " << n_vertices_solvent
       << ", protein " << n_vertices_protein << ", interface " << n_vertices_interface
       << ", boundary " << n_vertices_boundary << "\n"
       << "  tetrahedra: total " << n_tets << ", solvent " << n_tets_solvent << ", protein "
       << n_tets_protein << "\n"
       << "  interface triangles: " << n_interface_tris << " (closed "
       << (interface_closed ? "yes" : "no") << ", oriented "
       << (interface_oriented ? "yes" : "no") << ")\n"
       << "  tet volume range: [" << format_g17(min_volume) << ", " << format_g17(max_volume)
       << "]\n"
       << "  min dihedral angle: " << format_g17(min_dihedral_deg) << " deg\n"
       << "  orientation repairs: " << orientation_repairs << "\n";
    return os.str();
}

inline std::string ValidationReport::to_key_values() const {
    std::ostringstream os;
    os << "vertices.total=" << n_vertices << "\nvertices.solvent=" << n_vertices_solvent
       << "\nvertices.protein=" << n_vertices_protein
       << "\nvertices.interface=" << n_vertices_interface
       << "\nvertices.boundary=" << n_vertices_boundary << "\ntets.total=" << n_tets
       << "\ntets.solvent=" << n_tets_solvent << "\ntets.protein=" << n_tets_protein
       << "\ninterface.triangles=" << n_interface_tris
       << "\ninterface.closed=" << (interface_closed ? 1 : 0)
       << "\ninterface.oriented=" << (interface_oriented ? 1 : 0)
       << "\nvolume.min=" << format_g17(min_volume) << "\nvolume.max=" << format_g17(max_volume)
       << "\ndihedral.min_deg=" << format_g17(min_dihedral_deg)
       << "\norientation.repairs=" << orientation_repairs << "\n";
    return os.str();
}

}  // namespace nsmpb

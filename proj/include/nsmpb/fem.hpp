#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "nsmpb/core.hpp"
#include "nsmpb/csr.hpp"
#include "nsmpb/mesh.hpp"

namespace nsmpb {

enum class RegionFilter { Protein, Solvent, All };

inline bool region_selected(RegionFilter f, RegionLabel r) {
    return f == RegionFilter::All || (f == RegionFilter::Protein && r == RegionLabel::Protein) ||
           (f == RegionFilter::Solvent && r == RegionLabel::Solvent);
}

/// Degree-2 rules: 4 points on the tetrahedron, 3 on the triangle.
/// Barycentric coordinates; weights sum to 1 and scale by |T|.
struct QuadratureRule {
    static constexpr int n_tet = 4;
    static constexpr double tet_a = 0.58541019662496845446;
    static constexpr double tet_b = 0.13819660112501051518;
    static constexpr double tet_w = 0.25;

    static std::array<std::array<double, 4>, 4> tet_points() {
        std::array<std::array<double, 4>, 4> p{};
        for (int q = 0; q < 4; ++q)
            for (int a = 0; a < 4; ++a) p[q][a] = (q == a) ? tet_a : tet_b;
        return p;
    }

    static constexpr int n_tri = 3;
    static constexpr double tri_w = 1.0 / 3.0;

    static std::array<std::array<double, 3>, 3> tri_points() {
        // edge midpoints
        return {{{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}}};
    }
};

/// Linear Lagrange space on a TetMesh with its interior (zero-trace) dof set.
struct P1Space {
    const TetMesh* mesh = nullptr;
    int n_vertices = 0;
    std::vector<int> interior_dofs;     // sorted vertex indices not on the boundary
    std::vector<int> full_to_interior;  // -1 for boundary vertices

    bool is_interior(int v) const { return full_to_interior[v] >= 0; }
};

inline P1Space make_p1_space(const TetMesh& mesh) {
    P1Space s;
    s.mesh = &mesh;
    s.n_vertices = mesh.n_vertices();
    s.full_to_interior.assign(s.n_vertices, -1);
    for (int v = 0; v < s.n_vertices; ++v) {
        if (!mesh.is_boundary[v]) {
            s.full_to_interior[v] = static_cast<int>(s.interior_dofs.size());
            s.interior_dofs.push_back(v);
        }
    }
    return s;
}

/// Per-tet geometry: constant barycentric gradients and volume.
struct TetGeometry {
    std::array<Vec3, 4> grad;
    double volume = 0;
};

inline TetGeometry tet_geometry(const TetMesh& mesh, int t) {
    const auto& k = mesh.tets[t].v;
    const Vec3 e1 = mesh.vertices[k[1]] - mesh.vertices[k[0]];
    const Vec3 e2 = mesh.vertices[k[2]] - mesh.vertices[k[0]];
    const Vec3 e3 = mesh.vertices[k[3]] - mesh.vertices[k[0]];
    const double det = e1.cross(e2).dot(e3);
    TetGeometry g;
    g.volume = det / 6.0;
    // rows of the inverse edge matrix are the gradients of lambda_1..3
    const Vec3 r1 = e2.cross(e3) / det;
    const Vec3 r2 = e3.cross(e1) / det;
    const Vec3 r3 = e1.cross(e2) / det;
    g.grad = {Vec3{-r1.x - r2.x - r3.x, -r1.y - r2.y - r3.y, -r1.z - r2.z - r3.z}, r1, r2, r3};
    return g;
}

/// K[i][j] = coeff sum_{T in region} |T| grad(phi_i) . grad(phi_j)
/// (exact for P1: gradients are constant per tet).
inline CsrMatrix assemble_stiffness(const P1Space& space, RegionFilter filter,
                                    double coefficient = 1.0) {
    if (!std::isfinite(coefficient)) throw Error("assemble_stiffness: non-finite coefficient");
    const TetMesh& mesh = *space.mesh;
    CooBuilder coo(space.n_vertices, space.n_vertices);
    for (int t = 0; t < mesh.n_tets(); ++t) {
        if (!region_selected(filter, mesh.tets[t].region)) continue;
        const TetGeometry g = tet_geometry(mesh, t);
        const auto& k = mesh.tets[t].v;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                coo.add(k[a], k[b], coefficient * g.volume * g.grad[a].dot(g.grad[b]));
    }
    return coo.compress();
}

/// Exact P1 mass: per tet V/10 on the diagonal, V/20 off it.
inline CsrMatrix assemble_mass(const P1Space& space, RegionFilter filter) {
    const TetMesh& mesh = *space.mesh;
    CooBuilder coo(space.n_vertices, space.n_vertices);
    for (int t = 0; t < mesh.n_tets(); ++t) {
        if (!region_selected(filter, mesh.tets[t].region)) continue;
        const double v = mesh.tet_volume(t);
        const auto& k = mesh.tets[t].v;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) coo.add(k[a], k[b], a == b ? v / 10.0 : v / 20.0);
    }
    return coo.compress();
}

/// b[i] = sum_T |T| sum_q w_q f(x_q) phi_i(x_q) with the 4-point tet rule.
inline std::vector<double> assemble_load(const P1Space& space, RegionFilter filter,
                                         const std::function<double(const Vec3&)>& fn) {
    const TetMesh& mesh = *space.mesh;
    std::vector<double> b(space.n_vertices, 0.0);
    const auto qp = QuadratureRule::tet_points();
    for (int t = 0; t < mesh.n_tets(); ++t) {
        if (!region_selected(filter, mesh.tets[t].region)) continue;
        const double vol = mesh.tet_volume(t);
        const auto& k = mesh.tets[t].v;
        for (int q = 0; q < QuadratureRule::n_tet; ++q) {
            Vec3 x{};
            for (int a = 0; a < 4; ++a) x += mesh.vertices[k[a]] * qp[q][a];
            const double fv = fn(x) * QuadratureRule::tet_w * vol;
            for (int a = 0; a < 4; ++a) b[k[a]] += fv * qp[q][a];
        }
    }
    return b;
}

/// Surface load over the interface triangulation with the 3-point rule;
/// sampler sees the quadrature point and the outward (protein -> solvent)
/// unit normal.
inline std::vector<double> assemble_interface_load(
    const P1Space& space, const std::function<double(const Vec3&, const Vec3&)>& g_sampler) {
    const TetMesh& mesh = *space.mesh;
    if (mesh.interface_tris.empty())
        throw MeshError("assemble_interface_load: mesh has no interface triangles");
    std::vector<double> b(space.n_vertices, 0.0);
    const auto qp = QuadratureRule::tri_points();
    for (const auto& tri : mesh.interface_tris) {
        const double area = mesh.tri_area(tri.v);
        for (int q = 0; q < QuadratureRule::n_tri; ++q) {
            Vec3 x{};
            for (int a = 0; a < 3; ++a) x += mesh.vertices[tri.v[a]] * qp[q][a];
            const double gv = g_sampler(x, tri.normal) * QuadratureRule::tri_w * area;
            for (int a = 0; a < 3; ++a) b[tri.v[a]] += gv * qp[q][a];
        }
    }
    return b;
}

/// Sparse system plus its dof layout; two-field systems use the blocked
/// ordering [all field-0 dofs | all field-1 dofs].
struct AssembledSystem {
    CsrMatrix matrix;
    std::vector<double> rhs;
    int n_fields = 1;
    int field_size = 0;
    std::vector<int> required_dirichlet;  // dofs that must receive a value

    int dof(int field, int vertex) const { return field * field_size + vertex; }
};

/// Symmetric elimination: constrained columns move to the rhs, constrained
/// rows become identity rows carrying the boundary value.
inline void apply_dirichlet(AssembledSystem& sys, const std::map<int, double>& values) {
    for (int d : sys.required_dirichlet)
        if (!values.count(d))
            throw Error("apply_dirichlet: missing boundary value for dof " + std::to_string(d));
    std::vector<char> constrained(sys.matrix.rows, 0);
    std::vector<double> bv(sys.matrix.rows, 0.0);
    for (const auto& [d, v] : values) {
        if (d < 0 || d >= sys.matrix.rows)
            throw Error("apply_dirichlet: dof out of range: " + std::to_string(d));
        constrained[d] = 1;
        bv[d] = v;
    }
    CsrMatrix& m = sys.matrix;
    for (int i = 0; i < m.rows; ++i) {
        if (constrained[i]) {
            bool has_diag = false;
            for (int k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) {
                m.val[k] = (m.col[k] == i) ? 1.0 : 0.0;
                has_diag |= (m.col[k] == i);
            }
            if (!has_diag)
                throw Error("apply_dirichlet: constrained dof " + std::to_string(i) +
                            " has no diagonal entry");
            sys.rhs[i] = bv[i];
        } else {
            for (int k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) {
                if (constrained[m.col[k]]) {
                    sys.rhs[i] -= m.val[k] * bv[m.col[k]];
                    m.val[k] = 0.0;
                }
            }
        }
    }
}

}  // namespace nsmpb

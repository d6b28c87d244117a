#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "nsmpb/core.hpp"
#include "nsmpb/fem.hpp"
#include "nsmpb/mesh.hpp"
#include "nsmpb/solver.hpp"

namespace nsmpb {

// ---------------------------------------------------------------------------
// Legacy ASCII VTK unstructured grid
// ---------------------------------------------------------------------------

/// Writes POINTS / CELLS (type 10) / CELL_DATA region labels / POINT_DATA
/// scalars, every number with 17 significant digits so output is
/// byte-deterministic.
inline void write_vtk(const TetMesh& mesh,
                      const std::vector<std::pair<std::string, const std::vector<double>*>>& fields,
                      std::ostream& out) {
    for (const auto& [name, f] : fields)
        if (static_cast<int>(f->size()) != mesh.n_vertices())
            throw Error("write_vtk: field '" + name + "' has length " +
                        std::to_string(f->size()) + ", mesh has " +
                        std::to_string(mesh.n_vertices()) + " vertices");
    out << "# vtk DataFile Version 3.0\n";
    out << "nsmpb output\n";
    out << "ASCII\n";
    out << "DATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.n_vertices() << " double\n";
    for (const auto& p : mesh.vertices)
        out << format_g17(p.x) << ' ' << format_g17(p.y) << ' ' << format_g17(p.z) << '\n';
    out << "CELLS " << mesh.n_tets() << ' ' << mesh.n_tets() * 5 << '\n';
    for (const auto& t : mesh.tets)
        out << "4 " << t.v[0] << ' ' << t.v[1] << ' ' << t.v[2] << ' ' << t.v[3] << '\n';
    out << "CELL_TYPES " << mesh.n_tets() << '\n';
    for (int t = 0; t < mesh.n_tets(); ++t) out << "10\n";
    out << "CELL_DATA " << mesh.n_tets() << '\n';
    out << "SCALARS region int 1\nLOOKUP_TABLE default\n";
    for (const auto& t : mesh.tets) out << (t.region == RegionLabel::Protein ? 1 : 2) << '\n';
    if (!fields.empty()) {
        out << "POINT_DATA " << mesh.n_vertices() << '\n';
        for (const auto& [name, f] : fields) {
            out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
            for (double v : *f) out << format_g17(v) << '\n';
        }
    }
}

inline void write_vtk_file(const TetMesh& mesh,
                           const std::vector<std::pair<std::string, const std::vector<double>*>>&
                               fields,
                           const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("write_vtk: cannot open " + path);
    write_vtk(mesh, fields, out);
}

// ---------------------------------------------------------------------------
// Point location and P1 interpolation
// ---------------------------------------------------------------------------

/// Uniform spatial hash over tet bounding boxes. Queries do an exact
/// barycentric containment test; points outside every tet fall back to the
/// nearest candidate tet (barycentric extrapolation) and are flagged.
class PointLocator {
  public:
    explicit PointLocator(const TetMesh& mesh) : mesh_(&mesh) {
        const int nt = mesh.n_tets();
        lo_ = mesh.box.lo;
        const Vec3 ext = mesh.box.hi - mesh.box.lo;
        const int target = std::max(1, static_cast<int>(std::cbrt(static_cast<double>(nt) / 4.0)));
        nx_ = std::max(1, target);
        hx_ = ext.x / nx_;
        hy_ = ext.y / nx_;
        hz_ = ext.z / nx_;
        if (hx_ <= 0) hx_ = 1;
        if (hy_ <= 0) hy_ = 1;
        if (hz_ <= 0) hz_ = 1;
        cells_.resize(static_cast<std::size_t>(nx_) * nx_ * nx_);
        for (int t = 0; t < nt; ++t) {
            Vec3 tlo = mesh.vertices[mesh.tets[t].v[0]], thi = tlo;
            for (int a = 1; a < 4; ++a) {
                const Vec3& p = mesh.vertices[mesh.tets[t].v[a]];
                tlo.x = std::min(tlo.x, p.x);
                tlo.y = std::min(tlo.y, p.y);
                tlo.z = std::min(tlo.z, p.z);
                thi.x = std::max(thi.x, p.x);
                thi.y = std::max(thi.y, p.y);
                thi.z = std::max(thi.z, p.z);
            }
            int i0, j0, k0, i1, j1, k1;
            cell_of(tlo, i0, j0, k0);
            cell_of(thi, i1, j1, k1);
            for (int i = i0; i <= i1; ++i)
                for (int j = j0; j <= j1; ++j)
                    for (int k = k0; k <= k1; ++k) cells_[idx(i, j, k)].push_back(t);
        }
    }

    /// Barycentric coordinates of p in tet t (sum to 1, any sign).
    std::array<double, 4> barycentric(int t, const Vec3& p) const {
        const auto& k = mesh_->tets[t].v;
        const Vec3 e1 = mesh_->vertices[k[1]] - mesh_->vertices[k[0]];
        const Vec3 e2 = mesh_->vertices[k[2]] - mesh_->vertices[k[0]];
        const Vec3 e3 = mesh_->vertices[k[3]] - mesh_->vertices[k[0]];
        const Vec3 d = p - mesh_->vertices[k[0]];
        const double det = e1.cross(e2).dot(e3);
        const double l1 = d.cross(e2).dot(e3) / det;
        const double l2 = e1.cross(d).dot(e3) / det;
        const double l3 = e1.cross(e2).dot(d) / det;
        return {1.0 - l1 - l2 - l3, l1, l2, l3};
    }

    /// Containing tet (or nearest candidate when extrapolating). A tet
    /// containing p is always binned into p's own cell, so only the
    /// extrapolation fallback ever widens the search.
    int locate(const Vec3& p, std::array<double, 4>& lambda, bool& extrapolated) const {
        int ci, cj, ck;
        cell_of(p, ci, cj, ck);
        int best_tet = -1;
        double best_neg = -1e300;
        std::array<double, 4> best_lambda{};
        auto scan = [&](int ring) {
            for (int i = std::max(0, ci - ring); i <= std::min(nx_ - 1, ci + ring); ++i)
                for (int j = std::max(0, cj - ring); j <= std::min(nx_ - 1, cj + ring); ++j)
                    for (int k = std::max(0, ck - ring); k <= std::min(nx_ - 1, ck + ring); ++k)
                        for (int t : cells_[idx(i, j, k)]) {
                            auto lam = barycentric(t, p);
                            const double neg = std::min({lam[0], lam[1], lam[2], lam[3]});
                            if (neg > best_neg) {
                                best_neg = neg;
                                best_tet = t;
                                best_lambda = lam;
                            }
                        }
        };
        for (int ring = 0; ring <= nx_ && best_neg < -1e-12; ++ring) {
            scan(ring);
            if (ring >= 2 && best_tet >= 0) break;
        }
        lambda = best_lambda;
        extrapolated = best_neg < -1e-12;
        return best_tet;
    }

  private:
    const TetMesh* mesh_;
    Vec3 lo_;
    int nx_ = 1;
    double hx_ = 1, hy_ = 1, hz_ = 1;
    std::vector<std::vector<int>> cells_;

    std::size_t idx(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * nx_ + j) * nx_ + k;
    }
    void cell_of(const Vec3& p, int& i, int& j, int& k) const {
        i = std::clamp(static_cast<int>((p.x - lo_.x) / hx_), 0, nx_ - 1);
        j = std::clamp(static_cast<int>((p.y - lo_.y) / hy_), 0, nx_ - 1);
        k = std::clamp(static_cast<int>((p.z - lo_.z) / hz_), 0, nx_ - 1);
    }
};

struct InterpolationResult {
    std::vector<double> values;
    std::vector<bool> extrapolated;
    int n_extrapolated = 0;
};

/// P1 evaluation of a nodal field at arbitrary points.
inline InterpolationResult interpolate(const TetMesh& src_mesh, std::span<const double> field,
                                       std::span<const Vec3> query_points) {
    if (static_cast<int>(field.size()) != src_mesh.n_vertices())
        throw Error("interpolate: field length does not match mesh");
    PointLocator loc(src_mesh);
    InterpolationResult res;
    res.values.resize(query_points.size());
    res.extrapolated.resize(query_points.size());
    for (std::size_t i = 0; i < query_points.size(); ++i) {
        std::array<double, 4> lam;
        bool ex = false;
        const int t = loc.locate(query_points[i], lam, ex);
        const auto& k = src_mesh.tets[t].v;
        res.values[i] = lam[0] * field[k[0]] + lam[1] * field[k[1]] + lam[2] * field[k[2]] +
                        lam[3] * field[k[3]];
        res.extrapolated[i] = ex;
        if (ex) ++res.n_extrapolated;
    }
    return res;
}

// ---------------------------------------------------------------------------
// Mesh-convergence metric
// ---------------------------------------------------------------------------

/// |u_coarse - u_ref|_{L2(Omega)} / N_coarse: the coarse field is
/// interpolated onto the reference mesh, the L2 norm taken with the
/// reference mass matrix, and the result divided by the coarse vertex count.
inline double average_error(const TetMesh& coarse_mesh, std::span<const double> u_coarse,
                            const TetMesh& ref_mesh, std::span<const double> u_ref) {
    if (static_cast<int>(u_ref.size()) != ref_mesh.n_vertices())
        throw Error("average_error: reference field length mismatch");
    const Vec3 margin = (coarse_mesh.box.hi - coarse_mesh.box.lo) * 1e-9;
    if (coarse_mesh.box.hi.x + margin.x < ref_mesh.box.lo.x ||
        ref_mesh.box.hi.x + margin.x < coarse_mesh.box.lo.x)
        throw Error("average_error: meshes cover disjoint domains");
    InterpolationResult interp = interpolate(coarse_mesh, u_coarse, ref_mesh.vertices);
    std::vector<double> d(ref_mesh.n_vertices());
    for (int i = 0; i < ref_mesh.n_vertices(); ++i) d[i] = interp.values[i] - u_ref[i];
    P1Space space = make_p1_space(ref_mesh);
    CsrMatrix M = assemble_mass(space, RegionFilter::All);
    std::vector<double> Md = M.multiply(d);
    const double l2 = std::sqrt(std::max(0.0, dot(d, Md)));
    return l2 / static_cast<double>(coarse_mesh.n_vertices());
}

// ---------------------------------------------------------------------------
// Trace export
// ---------------------------------------------------------------------------

/// The three plotted convergence series plus the damping parameter, one row
/// per iteration (k = 0 rows carry the initial residual of each attempt).
inline void write_trace_csv(const NewtonTrace& trace, std::ostream& out) {
    out << "iteration,abs_residual,rel_residual,diff_norm,omega\n";
    for (const auto& it : trace.iterations)
        out << it.k << ',' << format_g17(it.abs_residual) << ',' << format_g17(it.rel_residual)
            << ',' << format_g17(it.diff_norm) << ',' << format_g17(it.omega) << '\n';
}

inline void write_trace_csv_file(const NewtonTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("write_trace_csv: cannot open " + path);
    write_trace_csv(trace, out);
}

}  // namespace nsmpb

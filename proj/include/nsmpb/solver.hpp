#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nsmpb/core.hpp"
#include "nsmpb/csr.hpp"
#include "nsmpb/fem.hpp"
#include "nsmpb/gmres.hpp"
#include "nsmpb/ilu.hpp"
#include "nsmpb/kernels.hpp"
#include "nsmpb/mesh.hpp"
#include "nsmpb/molecule.hpp"
#include "nsmpb/solvent.hpp"

namespace nsmpb {

enum class ModelKind { NSMPB, NMPB, SMPB, LinearNSMPB };

inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::NSMPB: return "nsmpb";
        case ModelKind::NMPB: return "nmpb";
        case ModelKind::SMPB: return "smpb";
        case ModelKind::LinearNSMPB: return "linear-nsmpb";
    }
    return "?";
}

struct LinearConfig {
    double rel_tol = 1e-8;
    double abs_tol = 1e-8;
    int restart = 100;
    int max_iter = 1000;
};

struct NewtonConfig {
    double tau = 40.0;   ///< Boltzmann exponent cap
    double eta = 0.01;   ///< smallest admissible damping parameter
    double eps_r = 1e-8; ///< relative residual tolerance
    double eps_a = 1e-8; ///< absolute residual tolerance
    int max_newton = 60; ///< iteration budget per initial-iterate attempt
    std::vector<int> selection_order = {2, 1, 3, 4};
    LinearConfig linear;
};

struct NewtonIteration {
    int k = 0;
    double abs_residual = 0;
    double rel_residual = 0;  ///< vs the attempt's initial residual
    double diff_norm = 0;     ///< |phi^k - phi^{k-1}|
    double omega = 0;         ///< accepted damping parameter (0 on the k=0 row)
    int halvings = 0;
    int linear_iterations = 0;
    double linear_residual = 0;
};

struct RestartEvent {
    int failed_selection = 0;
    int next_selection = 0;
    int iterations_spent = 0;
};

struct NewtonTrace {
    std::vector<NewtonIteration> iterations;  // all attempts concatenated; k restarts at 0
    std::vector<RestartEvent> restarts;
    int selection_used = 0;
    bool converged = false;

    double final_residual() const {
        return iterations.empty() ? 0.0 : iterations.back().abs_residual;
    }

    /// Index of the k = 0 row of the last (successful) attempt.
    std::size_t last_attempt_begin() const {
        for (std::size_t i = iterations.size(); i-- > 0;)
            if (iterations[i].k == 0) return i;
        return 0;
    }
};

struct NewtonFailure : SolverError {
    NewtonFailure(const std::string& msg, NewtonTrace t)
        : SolverError(msg), trace(std::move(t)) {}
    NewtonTrace trace;
};

/// Nodal coefficient vectors of the decomposition plus the sampled kernel
/// data the nonlinear terms are built from.
struct FieldSet {
    std::vector<double> phi_t;     // nonlinear component, in M0
    std::vector<double> zeta;      // its convolution surrogate, in M0
    std::vector<double> psi;       // harmonic/nonlocal correction
    std::vector<double> zeta_psi;  // psi convolution surrogate
    std::vector<double> g_nodes, ghat_nodes;
    std::vector<double> g_quad, ghat_quad;  // per solvent tet x 4 quadrature points
};

// ---------------------------------------------------------------------------
// Assembly context
// ---------------------------------------------------------------------------

/// Everything fixed for a (mesh, molecule, solvent) triple: the region
/// matrices, kernel samples at quadrature points, and boundary data.
struct SolverContext {
    std::shared_ptr<const TetMesh> mesh;
    P1Space space;
    SolventModel solvent;
    KernelContext kctx;

    CsrMatrix K_p, K_s, K_all, M_all, M_s;
    CsrMatrix K_diff;    // eps_p K_p + eps_inf K_s
    CsrMatrix K_couple;  // (eps_s - eps_inf) K_s
    CsrMatrix A22;       // lambda^2 K_all + M_all (the convolution-surrogate row)

    std::vector<int> solvent_tets;
    std::vector<Vec3> solvent_qpoints;        // 4 per solvent tet
    std::vector<double> g_quad, ghat_quad;    // kernels at those points
    std::vector<double> g_nodes, ghat_nodes;  // nodal samples, singular atoms skipped
    std::size_t atom_coincident_nodes = 0;

    std::vector<double> boundary_g;  // nodal Dirichlet data g (zero by default)
    std::vector<bool> solvent_vertex;            // touches a solvent tet
    std::vector<bool> solvent_exclusive_vertex;  // solvent side, off the interface

    double kernel_seconds = 0;

    int n() const { return space.n_vertices; }

    double interior_norm(std::span<const double> full) const {
        double s = 0;
        for (int v : space.interior_dofs) s += full[v] * full[v];
        return std::sqrt(s);
    }
};

inline SolverContext build_solver_context(
    std::shared_ptr<const TetMesh> mesh_ptr, const Molecule& molecule,
    const SolventModel& solvent,
    const std::function<double(const Vec3&)>& boundary_g = nullptr) {
    const TetMesh& mesh = *mesh_ptr;
    check_distinct_atoms(molecule);
    SolverContext ctx;
    ctx.mesh = mesh_ptr;
    ctx.space = make_p1_space(mesh);
    ctx.solvent = solvent;
    ctx.kctx.molecule = molecule;
    ctx.kctx.alpha = solvent.constants.alpha;
    ctx.kctx.eps_p = solvent.eps_p;
    ctx.kctx.lambda = solvent.lambda;

    ctx.K_p = assemble_stiffness(ctx.space, RegionFilter::Protein);
    ctx.K_s = assemble_stiffness(ctx.space, RegionFilter::Solvent);
    ctx.K_all = csr_add(ctx.K_p, ctx.K_s);
    ctx.M_all = assemble_mass(ctx.space, RegionFilter::All);
    ctx.M_s = assemble_mass(ctx.space, RegionFilter::Solvent);
    ctx.K_diff = csr_add(ctx.K_p, ctx.K_s, solvent.eps_p, solvent.eps_inf);
    ctx.K_couple = csr_scale(ctx.K_s, solvent.eps_s - solvent.eps_inf);
    ctx.A22 = csr_add(ctx.K_all, ctx.M_all, solvent.lambda * solvent.lambda, 1.0);

    const auto t0 = std::chrono::steady_clock::now();
    const auto qp = QuadratureRule::tet_points();
    for (int t = 0; t < mesh.n_tets(); ++t) {
        if (mesh.tets[t].region != RegionLabel::Solvent) continue;
        ctx.solvent_tets.push_back(t);
        const auto& k = mesh.tets[t].v;
        for (int q = 0; q < QuadratureRule::n_tet; ++q) {
            Vec3 x{};
            for (int a = 0; a < 4; ++a) x += mesh.vertices[k[a]] * qp[q][a];
            ctx.solvent_qpoints.push_back(x);
        }
    }
    ctx.g_quad = eval_G(ctx.kctx, ctx.solvent_qpoints);
    ctx.ghat_quad = eval_Ghat(ctx.kctx, ctx.solvent_qpoints);
    ctx.g_nodes = eval_G_skip_singular(ctx.kctx, mesh.vertices, &ctx.atom_coincident_nodes);
    ctx.ghat_nodes = eval_Ghat(ctx.kctx, mesh.vertices);
    ctx.kernel_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    ctx.boundary_g.assign(ctx.n(), 0.0);
    if (boundary_g)
        for (int v : mesh.boundary_vertices) ctx.boundary_g[v] = boundary_g(mesh.vertices[v]);

    ctx.solvent_vertex.assign(ctx.n(), false);
    for (int t : ctx.solvent_tets)
        for (int v : mesh.tets[t].v) ctx.solvent_vertex[v] = true;
    ctx.solvent_exclusive_vertex = ctx.solvent_vertex;
    for (const auto& tri : mesh.interface_tris)
        for (int v : tri.v) ctx.solvent_exclusive_vertex[v] = false;
    return ctx;
}

/// Copy of the context with a different eps_inf (rebuilds the two dielectric
/// matrices; kernel samples are unaffected).
inline SolverContext with_eps_inf(const SolverContext& ctx, double eps_inf) {
    SolverContext c = ctx;
    c.solvent.eps_inf = eps_inf;
    c.K_diff = csr_add(c.K_p, c.K_s, c.solvent.eps_p, eps_inf);
    c.K_couple = csr_scale(c.K_s, c.solvent.eps_s - eps_inf);
    return c;
}

// ---------------------------------------------------------------------------
// Nonlinear terms
// ---------------------------------------------------------------------------

namespace detail {

/// Capped Boltzmann factors at one point: E_i = exp(min(-Z_i val, tau)).
/// One combined exponent per species, so capping inside w_i or on the
/// combined exponent is the same operation.
struct BoltzmannPoint {
    double a1 = 1, a2 = 0, a3 = 0;
};

inline BoltzmannPoint boltzmann_point(const SolventModel& sv, double val, double tau) {
    BoltzmannPoint r;
    const double sc = sv.size_coeff();
    double csum = 0;
    for (const auto& s : sv.species) {
        const double z = s.charge_number;
        const double e = std::exp(std::min(-z * val, tau));
        const double ce = s.bulk_concentration * e;
        csum += ce;
        r.a2 += z * ce;
        r.a3 += z * z * ce;
    }
    r.a1 = 1.0 + sc * csum;
    return r;
}

}  // namespace detail

/// Load vector of the Boltzmann quotient over the solvent region:
/// out[i] = int_{D_s} A2(source)/A1(source) phi_i, with source = G + psi +
/// field evaluated per quadrature point (psi and field P1-interpolated,
/// G from the exact kernel samples).
inline std::vector<double> boltzmann_load(const SolverContext& ctx, std::span<const double> psi,
                                          std::span<const double> field, double tau) {
    const TetMesh& mesh = *ctx.mesh;
    std::vector<double> out(ctx.n(), 0.0);
    const auto qp = QuadratureRule::tet_points();
    std::size_t qi = 0;
    for (int t : ctx.solvent_tets) {
        const double vol = mesh.tet_volume(t);
        const auto& k = mesh.tets[t].v;
        for (int q = 0; q < QuadratureRule::n_tet; ++q, ++qi) {
            double val = ctx.g_quad[qi];
            for (int a = 0; a < 4; ++a) val += qp[q][a] * (psi[k[a]] + field[k[a]]);
            const auto bp = detail::boltzmann_point(ctx.solvent, val, tau);
            if (!std::isfinite(bp.a1) || !std::isfinite(bp.a2))
                throw SolverError("boltzmann term: non-finite integrand in tet " +
                                  std::to_string(t));
            const double w = QuadratureRule::tet_w * vol * (bp.a2 / bp.a1);
            for (int a = 0; a < 4; ++a) out[k[a]] += w * qp[q][a];
        }
    }
    return out;
}

/// Zero-order Jacobian block of the Boltzmann quotient:
/// W[i][j] = beta int_{D_s} (A1 A3 - gamma vbar^2/v0 A2^2)/A1^2 phi_i phi_j.
inline CsrMatrix boltzmann_jacobian_weight(const SolverContext& ctx, std::span<const double> psi,
                                           std::span<const double> phi, double tau) {
    const TetMesh& mesh = *ctx.mesh;
    const double beta = ctx.solvent.constants.beta;
    const double sc = ctx.solvent.size_coeff();
    CooBuilder coo(ctx.n(), ctx.n());
    const auto qp = QuadratureRule::tet_points();
    std::size_t qi = 0;
    for (int t : ctx.solvent_tets) {
        const double vol = mesh.tet_volume(t);
        const auto& k = mesh.tets[t].v;
        for (int q = 0; q < QuadratureRule::n_tet; ++q, ++qi) {
            double val = ctx.g_quad[qi];
            for (int a = 0; a < 4; ++a) val += qp[q][a] * (psi[k[a]] + phi[k[a]]);
            const auto bp = detail::boltzmann_point(ctx.solvent, val, tau);
            const double wgt = (bp.a1 * bp.a3 - sc * bp.a2 * bp.a2) / (bp.a1 * bp.a1);
            if (!std::isfinite(wgt))
                throw SolverError("boltzmann jacobian: non-finite integrand in tet " +
                                  std::to_string(t));
            const double s = beta * QuadratureRule::tet_w * vol * wgt;
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) coo.add(k[a], k[b], s * qp[q][a] * qp[q][b]);
        }
    }
    return coo.compress();
}

/// Residual of the nonlinear variational problem with the convolution term
/// replaced by the current zeta field:
/// F = (eps_p K_p + eps_inf K_s) phi + (eps_s - eps_inf) K_s zeta
///     - beta * boltzmann_load(phi).
/// Full-length vector; only interior entries are meaningful.
inline std::vector<double> assemble_residual(const SolverContext& ctx,
                                             std::span<const double> phi,
                                             std::span<const double> zeta,
                                             std::span<const double> psi, double tau) {
    std::vector<double> F = ctx.K_diff.multiply(phi);
    std::vector<double> t2 = ctx.K_couple.multiply(zeta);
    std::vector<double> bl = boltzmann_load(ctx, psi, phi, tau);
    const double beta = ctx.solvent.constants.beta;
    for (int i = 0; i < ctx.n(); ++i) F[i] += t2[i] - beta * bl[i];
    for (int v : ctx.mesh->boundary_vertices) F[v] = 0.0;
    return F;
}

// ---------------------------------------------------------------------------
// Two-field linear solves
// ---------------------------------------------------------------------------

/// Assembles [A11 K_couple; -M A22] with the given field-0 right side and
/// Dirichlet data (field 1 is always zero on the boundary).
inline AssembledSystem assemble_two_field(const SolverContext& ctx, const CsrMatrix& a11,
                                          const std::vector<double>& rhs1,
                                          const std::map<int, double>& bc0) {
    const int n = ctx.n();
    AssembledSystem sys;
    sys.n_fields = 2;
    sys.field_size = n;
    sys.matrix = csr_block2x2(a11, ctx.K_couple, csr_scale(ctx.M_all, -1.0), ctx.A22);
    sys.rhs.assign(2 * static_cast<std::size_t>(n), 0.0);
    std::copy(rhs1.begin(), rhs1.end(), sys.rhs.begin());
    for (int v : ctx.mesh->boundary_vertices) {
        sys.required_dirichlet.push_back(v);
        sys.required_dirichlet.push_back(v + n);
    }
    std::map<int, double> bc;
    for (int v : ctx.mesh->boundary_vertices) {
        auto it = bc0.find(v);
        bc[v] = it == bc0.end() ? 0.0 : it->second;
        bc[v + n] = 0.0;
    }
    apply_dirichlet(sys, bc);
    return sys;
}

struct TwoFieldSolution {
    std::vector<double> f0, f1;
    KrylovReport report;
};

inline TwoFieldSolution solve_system(const AssembledSystem& sys, const LinearConfig& lc,
                                     const std::string& what) {
    IluFactors ilu = ilu0(sys.matrix);
    auto [x, rep] = gmres(sys.matrix, sys.rhs, ilu_preconditioner(ilu), lc.rel_tol, lc.abs_tol,
                          lc.restart, lc.max_iter);
    if (!rep.converged)
        throw SolverError(what + ": linear solve did not converge (" +
                          std::to_string(rep.iterations) + " iterations, residual " +
                          format_g17(rep.residual) + ")");
    TwoFieldSolution out;
    out.report = rep;
    if (sys.n_fields == 2) {
        const int n = sys.field_size;
        out.f0.assign(x.begin(), x.begin() + n);
        out.f1.assign(x.begin() + n, x.end());
    } else {
        out.f0 = std::move(x);
    }
    return out;
}

/// FEM surrogate of the convolution p * Q_lambda: find q in M0 with
/// lambda^2 (grad q, grad v) + (q - p, v) = 0 for all v in M0.
inline std::vector<double> yukawa_project(const SolverContext& ctx, std::span<const double> p,
                                          const LinearConfig& lc = {}) {
    AssembledSystem sys;
    sys.n_fields = 1;
    sys.field_size = ctx.n();
    sys.matrix = ctx.A22;
    sys.rhs = ctx.M_all.multiply(p);
    std::map<int, double> bc;
    for (int v : ctx.mesh->boundary_vertices) {
        sys.required_dirichlet.push_back(v);
        bc[v] = 0.0;
    }
    apply_dirichlet(sys, bc);
    return solve_system(sys, lc, "yukawa projection").f0;
}

/// Linear nonlocal interface problem for the singularity-free correction:
/// returns (psi, zeta_psi) with Dirichlet psi = g - G on the box boundary.
inline TwoFieldSolution solve_psi(const SolverContext& ctx, const LinearConfig& lc = {}) {
    const SolventModel& sv = ctx.solvent;
    const TetMesh& mesh = *ctx.mesh;
    const int n = ctx.n();

    // volume source -((eps_s - eps_inf)/lambda^2) (G - Ghat) over D_s
    std::vector<double> rhs1(n, 0.0);
    {
        const double c = -(sv.eps_s - sv.eps_inf) / (sv.lambda * sv.lambda);
        const auto qp = QuadratureRule::tet_points();
        std::size_t qi = 0;
        for (int t : ctx.solvent_tets) {
            const double vol = mesh.tet_volume(t);
            const auto& k = mesh.tets[t].v;
            for (int q = 0; q < QuadratureRule::n_tet; ++q, ++qi) {
                const double f = c * (ctx.g_quad[qi] - ctx.ghat_quad[qi]);
                const double w = QuadratureRule::tet_w * vol * f;
                for (int a = 0; a < 4; ++a) rhs1[k[a]] += w * qp[q][a];
            }
        }
    }
    // interface flux source + int_Gamma g_Gamma v
    {
        if (mesh.interface_tris.empty())
            throw MeshError("solve_psi: mesh has no interface triangles");
        const auto qp = QuadratureRule::tri_points();
        std::vector<Vec3> pts, nrm;
        pts.reserve(mesh.interface_tris.size() * 3);
        for (const auto& tri : mesh.interface_tris)
            for (int q = 0; q < QuadratureRule::n_tri; ++q) {
                Vec3 x{};
                for (int a = 0; a < 3; ++a) x += mesh.vertices[tri.v[a]] * qp[q][a];
                pts.push_back(x);
                nrm.push_back(tri.normal);
            }
        auto gg = eval_g_gamma(ctx.kctx, sv.eps_s, sv.eps_inf, pts, nrm);
        std::size_t qi = 0;
        for (const auto& tri : mesh.interface_tris) {
            const double area = mesh.tri_area(tri.v);
            for (int q = 0; q < QuadratureRule::n_tri; ++q, ++qi) {
                const double w = QuadratureRule::tri_w * area * gg[qi];
                for (int a = 0; a < 3; ++a) rhs1[tri.v[a]] += w * qp[q][a];
            }
        }
    }

    std::map<int, double> bc0;
    for (int v : mesh.boundary_vertices) bc0[v] = ctx.boundary_g[v] - ctx.g_nodes[v];
    AssembledSystem sys = assemble_two_field(ctx, ctx.K_diff, rhs1, bc0);
    return solve_system(sys, lc, "psi solve");
}

/// -Upsilon (psi + G) load over the solvent region.
inline std::vector<double> upsilon_source(const SolverContext& ctx, std::span<const double> psi) {
    const TetMesh& mesh = *ctx.mesh;
    std::vector<double> rhs(ctx.n(), 0.0);
    const auto qp = QuadratureRule::tet_points();
    std::size_t qi = 0;
    for (int t : ctx.solvent_tets) {
        const double vol = mesh.tet_volume(t);
        const auto& k = mesh.tets[t].v;
        for (int q = 0; q < QuadratureRule::n_tet; ++q, ++qi) {
            double val = ctx.g_quad[qi];
            for (int a = 0; a < 4; ++a) val += qp[q][a] * psi[k[a]];
            const double w = -ctx.solvent.upsilon * QuadratureRule::tet_w * vol * val;
            for (int a = 0; a < 4; ++a) rhs[k[a]] += w * qp[q][a];
        }
    }
    return rhs;
}

/// Linearized model: two-field solve with the Upsilon zero-order term and
/// source -Upsilon (psi + G); zero Dirichlet on both fields.
inline TwoFieldSolution solve_linear_nsmpb(const SolverContext& ctx, std::span<const double> psi,
                                           const LinearConfig& lc = {}) {
    CsrMatrix a11 = csr_add(ctx.K_diff, ctx.M_s, 1.0, ctx.solvent.upsilon);
    AssembledSystem sys = assemble_two_field(ctx, a11, upsilon_source(ctx, psi), {});
    return solve_system(sys, lc, "linear model solve");
}

/// Frozen-source linearization: the Boltzmann quotient is evaluated at the
/// given field and moved to the right side.
inline TwoFieldSolution solve_fixed_source(const SolverContext& ctx, std::span<const double> psi,
                                           std::span<const double> frozen_field, double tau,
                                           const LinearConfig& lc = {}) {
    std::vector<double> rhs = boltzmann_load(ctx, psi, frozen_field, tau);
    const double beta = ctx.solvent.constants.beta;
    for (auto& v : rhs) v *= beta;
    AssembledSystem sys = assemble_two_field(ctx, ctx.K_diff, rhs, {});
    return solve_system(sys, lc, "fixed-source solve");
}

/// Local (eps_inf = eps_s) single-field linearized problem; used by
/// initial-iterate Selection 4.
inline std::vector<double> solve_local_linear(const SolverContext& ctx,
                                              std::span<const double> psi,
                                              const LinearConfig& lc = {}) {
    CsrMatrix a = csr_add(ctx.K_p, ctx.K_s, ctx.solvent.eps_p, ctx.solvent.eps_s);
    a = csr_add(a, ctx.M_s, 1.0, ctx.solvent.upsilon);
    AssembledSystem sys;
    sys.n_fields = 1;
    sys.field_size = ctx.n();
    sys.matrix = std::move(a);
    sys.rhs = upsilon_source(ctx, psi);
    std::map<int, double> bc;
    for (int v : ctx.mesh->boundary_vertices) {
        sys.required_dirichlet.push_back(v);
        bc[v] = 0.0;
    }
    apply_dirichlet(sys, bc);
    return solve_system(sys, lc, "local linear solve").f0;
}

// ---------------------------------------------------------------------------
// Newton iteration
// ---------------------------------------------------------------------------

/// One Newton step's linear system at the current iterate: the 2N block
/// system over the correction pair (p, q), right side (-F, 0), zero
/// Dirichlet on both fields.
inline AssembledSystem assemble_newton_system(const SolverContext& ctx,
                                              std::span<const double> phi,
                                              std::span<const double> zeta,
                                              std::span<const double> psi, double tau) {
    std::vector<double> F = assemble_residual(ctx, phi, zeta, psi, tau);
    for (auto& v : F) v = -v;
    CsrMatrix a11 = csr_add(ctx.K_diff, boltzmann_jacobian_weight(ctx, psi, phi, tau));
    return assemble_two_field(ctx, a11, F, {});
}

struct NewtonResult {
    std::vector<double> phi, zeta;
    NewtonTrace trace;
};

/// Damped modified Newton driver. initial_provider(selection) supplies the
/// initial pair (phi^0, zeta^0); on damping failure (omega < eta) the next
/// selection in config.selection_order is tried.
inline NewtonResult damped_newton(const SolverContext& ctx, std::span<const double> psi,
                                  const NewtonConfig& config,
                                  const std::function<std::pair<std::vector<double>,
                                                                std::vector<double>>(int)>&
                                      initial_provider) {
    NewtonTrace trace;
    for (std::size_t attempt = 0; attempt < config.selection_order.size(); ++attempt) {
        const int selection = config.selection_order[attempt];
        auto [phi, zeta] = initial_provider(selection);
        trace.selection_used = selection;
        const std::size_t attempt_start = trace.iterations.size();

        std::vector<double> F = assemble_residual(ctx, phi, zeta, psi, config.tau);
        double fnorm = ctx.interior_norm(F);
        const double f0 = fnorm;
        const double threshold = config.eps_r * f0 + config.eps_a;
        trace.iterations.push_back({0, fnorm, 1.0, 0.0, 0.0, 0, 0, 0.0});

        bool restart = false;
        while (!restart) {
            if (fnorm < threshold) {
                trace.converged = true;
                return {std::move(phi), std::move(zeta), std::move(trace)};
            }
            const int k = static_cast<int>(trace.iterations.size() - attempt_start);
            if (k > config.max_newton)
                throw NewtonFailure("newton: iteration budget (" +
                                        std::to_string(config.max_newton) +
                                        ") exceeded on selection " + std::to_string(selection),
                                    trace);

            AssembledSystem sys = assemble_newton_system(ctx, phi, zeta, psi, config.tau);
            TwoFieldSolution step = solve_system(sys, config.linear, "newton step");

            double omega = 1.0;
            int halvings = 0;
            std::vector<double> phi_try(ctx.n()), zeta_try(ctx.n());
            while (true) {
                for (int i = 0; i < ctx.n(); ++i) {
                    phi_try[i] = phi[i] + omega * step.f0[i];
                    zeta_try[i] = zeta[i] + omega * step.f1[i];
                }
                std::vector<double> F_try = assemble_residual(ctx, phi_try, zeta_try, psi,
                                                              config.tau);
                const double f_try = ctx.interior_norm(F_try);
                if (f_try <= fnorm) {
                    phi.swap(phi_try);
                    zeta.swap(zeta_try);
                    fnorm = f_try;
                    trace.iterations.push_back({k, fnorm, f0 > 0 ? fnorm / f0 : 0.0,
                                                omega * ctx.interior_norm(step.f0), omega,
                                                halvings, step.report.iterations,
                                                step.report.residual});
                    break;
                }
                omega *= 0.5;
                ++halvings;
                if (omega < config.eta) {
                    restart = true;
                    break;
                }
            }
        }
        if (attempt + 1 < config.selection_order.size())
            trace.restarts.push_back(
                {selection, config.selection_order[attempt + 1],
                 static_cast<int>(trace.iterations.size() - attempt_start) - 1});
        else
            throw NewtonFailure("newton: damping underflow on selection " +
                                    std::to_string(selection) +
                                    " and the selection ladder is exhausted",
                                trace);
    }
    throw NewtonFailure("newton: empty selection order", trace);
}

// ---------------------------------------------------------------------------
// Initial-iterate selections and the full pipeline
// ---------------------------------------------------------------------------

struct StageTimings {
    double mesh = 0, kernels = 0, psi = 0, initial = 0, newton = 0, recompose = 0;
    double total() const { return mesh + kernels + psi + initial + newton + recompose; }
};

struct SolutionBundle {
    std::shared_ptr<const TetMesh> mesh;
    ModelKind kind = ModelKind::NSMPB;
    SolventModel solvent;  // after any model-kind forcing
    std::vector<double> u;
    FieldSet fields;  // phi_t, zeta, psi, zeta_psi and the kernel samples
    std::vector<std::vector<double>> concentrations;  // per species; -1 off the solvent side
    std::vector<bool> solvent_vertex;                 // concentration support
    NewtonTrace trace;
    StageTimings timings;
    std::size_t atom_coincident_nodes = 0;
};

namespace detail {
inline double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}
}  // namespace detail

inline SolutionBundle solve(ModelKind kind, std::shared_ptr<const TetMesh> mesh,
                            const Molecule& molecule, const SolventModel& solvent_in,
                            const NewtonConfig& config = {},
                            const std::function<double(const Vec3&)>& boundary_g = nullptr);

/// Selections 1-4. Needs the psi fields of the enclosing run; Selection 1
/// additionally runs the local (eps_inf = eps_s) model end to end.
inline std::pair<std::vector<double>, std::vector<double>> initial_iterate(
    int selection, const SolverContext& ctx, std::span<const double> psi,
    const NewtonConfig& config) {
    switch (selection) {
        case 1: {
            // local-model run provides (psi_local, phi_local); combine and
            // project the convolution surrogate
            SolverContext local = with_eps_inf(ctx, ctx.solvent.eps_s);
            NewtonConfig sub = config;
            sub.selection_order = {2, 3, 4};  // selection 1 would recurse
            TwoFieldSolution psi_local = solve_psi(local, config.linear);
            NewtonResult local_run = damped_newton(
                local, psi_local.f0, sub, [&](int sel) {
                    return initial_iterate(sel, local, psi_local.f0, sub);
                });
            std::vector<double> phi0(ctx.n());
            for (int i = 0; i < ctx.n(); ++i)
                phi0[i] = local_run.phi[i] + psi_local.f0[i] - psi[i];
            std::vector<double> zeta0 = yukawa_project(ctx, phi0, config.linear);
            return {std::move(phi0), std::move(zeta0)};
        }
        case 2: {
            TwoFieldSolution s = solve_linear_nsmpb(ctx, psi, config.linear);
            return {std::move(s.f0), std::move(s.f1)};
        }
        case 3: {
            TwoFieldSolution lin = solve_linear_nsmpb(ctx, psi, config.linear);
            TwoFieldSolution s = solve_fixed_source(ctx, psi, lin.f0, config.tau, config.linear);
            return {std::move(s.f0), std::move(s.f1)};
        }
        case 4: {
            std::vector<double> sigma = solve_local_linear(ctx, psi, config.linear);
            TwoFieldSolution s = solve_fixed_source(ctx, psi, sigma, config.tau, config.linear);
            return {std::move(s.f0), std::move(s.f1)};
        }
        default:
            throw SolverError("initial_iterate: unknown selection " + std::to_string(selection));
    }
}

/// Algorithm pipeline: kernel samples, psi solve, initial iterate, Newton
/// iteration (or the linear solve for LinearNSMPB), recomposition
/// u = G + psi + phi, and the concentration fields.
inline SolutionBundle solve(ModelKind kind, std::shared_ptr<const TetMesh> mesh,
                            const Molecule& molecule, const SolventModel& solvent_in,
                            const NewtonConfig& config,
                            const std::function<double(const Vec3&)>& boundary_g) {
    SolventModel solvent = solvent_in;
    if (kind == ModelKind::NMPB) solvent = solvent.with_zero_volumes();
    if (kind == ModelKind::SMPB) solvent = solvent.with_local_dielectric();

    SolutionBundle out;
    out.kind = kind;
    out.mesh = mesh;
    out.solvent = solvent;

    auto t0 = std::chrono::steady_clock::now();
    SolverContext ctx = build_solver_context(mesh, molecule, solvent, boundary_g);
    out.timings.kernels = ctx.kernel_seconds;
    out.atom_coincident_nodes = ctx.atom_coincident_nodes;

    out.fields.g_nodes = ctx.g_nodes;
    out.fields.ghat_nodes = ctx.ghat_nodes;
    out.fields.g_quad = ctx.g_quad;
    out.fields.ghat_quad = ctx.ghat_quad;

    t0 = std::chrono::steady_clock::now();
    TwoFieldSolution psi_sol = [&] {
        try {
            return solve_psi(ctx, config.linear);
        } catch (const Error& e) {
            throw SolverError(std::string("pipeline step 2 (psi solve): ") + e.what());
        }
    }();
    out.fields.psi = psi_sol.f0;
    out.fields.zeta_psi = psi_sol.f1;
    out.timings.psi = detail::seconds_since(t0);

    if (kind == ModelKind::LinearNSMPB) {
        t0 = std::chrono::steady_clock::now();
        TwoFieldSolution lin = solve_linear_nsmpb(ctx, out.fields.psi, config.linear);
        out.fields.phi_t = lin.f0;
        out.fields.zeta = lin.f1;
        out.timings.newton = detail::seconds_since(t0);
        out.trace.converged = true;
    } else {
        t0 = std::chrono::steady_clock::now();
        const int first = config.selection_order.empty() ? 2 : config.selection_order.front();
        std::pair<std::vector<double>, std::vector<double>> init;
        try {
            init = initial_iterate(first, ctx, out.fields.psi, config);
        } catch (const Error& e) {
            throw SolverError(std::string("pipeline step 3 (initial iterate, selection ") +
                              std::to_string(first) + "): " + e.what());
        }
        out.timings.initial = detail::seconds_since(t0);

        t0 = std::chrono::steady_clock::now();
        NewtonResult nr = damped_newton(ctx, out.fields.psi, config, [&](int sel) {
            if (sel == first && !init.first.empty()) {
                auto taken = std::move(init);
                init = {};
                return taken;
            }
            return initial_iterate(sel, ctx, out.fields.psi, config);
        });
        out.fields.phi_t = std::move(nr.phi);
        out.fields.zeta = std::move(nr.zeta);
        out.trace = std::move(nr.trace);
        out.timings.newton = detail::seconds_since(t0);
    }

    t0 = std::chrono::steady_clock::now();
    out.u.resize(ctx.n());
    for (int i = 0; i < ctx.n(); ++i)
        out.u[i] = ctx.g_nodes[i] + out.fields.psi[i] + out.fields.phi_t[i];
    out.solvent_vertex = ctx.solvent_exclusive_vertex;
    out.concentrations = concentrations(out.u, solvent, out.solvent_vertex, config.tau);
    out.timings.recompose = detail::seconds_since(t0);
    return out;
}

}  // namespace nsmpb

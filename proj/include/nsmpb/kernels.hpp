#pragma once

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "nsmpb/core.hpp"
#include "nsmpb/molecule.hpp"

namespace nsmpb {

/// Inputs of the closed-form singular component and its convolution:
/// the molecule, the charge scaling alpha, the protein permittivity and the
/// correlation length. All four kernel sums share the prefactor
/// alpha / (4 pi eps_p).
struct KernelContext {
    Molecule molecule;
    double alpha = 7042.93990033;
    double eps_p = 2.0;
    double lambda = 15.0;
    double singular_guard = 1e-10;  ///< A; points closer than this to an atom raise

    double prefactor() const { return alpha / (4.0 * std::numbers::pi * eps_p); }
};

namespace detail {

inline unsigned kernel_threads() {
    if (const char* env = std::getenv("NSMPB_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return static_cast<unsigned>(n);
    }
    return 1;
}

// Splits [0, n) across the configured thread count. Each point is
// independent, so results do not depend on the partition.
template <class Fn>
void for_each_point(std::size_t n, Fn&& fn) {
    const unsigned nt = kernel_threads();
    if (nt <= 1 || n < 256) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> ws;
    ws.reserve(nt);
    const std::size_t chunk = (n + nt - 1) / nt;
    for (unsigned t = 0; t < nt; ++t) {
        const std::size_t b = t * chunk, e = std::min(n, b + chunk);
        if (b >= e) break;
        ws.emplace_back([&fn, b, e] {
            for (std::size_t i = b; i < e; ++i) fn(i);
        });
    }
    for (auto& w : ws) w.join();
}

[[noreturn]] inline void throw_singular(std::size_t point, std::size_t atom, double dist) {
    throw SingularityError("kernel evaluation: point " + std::to_string(point) +
                           " lies within the singular guard of atom " + std::to_string(atom) +
                           " (distance " + format_g17(dist) + " A)");
}

}  // namespace detail

/// G(r) = alpha/(4 pi eps_p) sum_j z_j / |r - r_j|, in k_B T / e_c units.
inline std::vector<double> eval_G(const KernelContext& ctx, std::span<const Vec3> points) {
    std::vector<double> out(points.size());
    const double pref = ctx.prefactor();
    detail::for_each_point(points.size(), [&](std::size_t i) {
        double acc = 0;
        for (std::size_t j = 0; j < ctx.molecule.atoms.size(); ++j) {
            const Atom& a = ctx.molecule.atoms[j];
            const double d = (points[i] - a.position).norm();
            if (d < ctx.singular_guard) detail::throw_singular(i, j, d);
            acc += a.charge_number / d;
        }
        out[i] = pref * acc;
    });
    return out;
}

/// G with contributions of atoms inside the guard radius skipped; for
/// reporting potentials at mesh vertices that coincide with atom centers.
inline std::vector<double> eval_G_skip_singular(const KernelContext& ctx,
                                                std::span<const Vec3> points,
                                                std::size_t* skipped = nullptr) {
    std::vector<double> out(points.size());
    const double pref = ctx.prefactor();
    std::size_t nskip = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        double acc = 0;
        for (const Atom& a : ctx.molecule.atoms) {
            const double d = (points[i] - a.position).norm();
            if (d < ctx.singular_guard) {
                ++nskip;
                continue;
            }
            acc += a.charge_number / d;
        }
        out[i] = pref * acc;
    }
    if (skipped) *skipped = nskip;
    return out;
}

/// grad G(r) = -alpha/(4 pi eps_p) sum_j z_j (r - r_j)/|r - r_j|^3, 1/A units.
inline std::vector<Vec3> eval_gradG(const KernelContext& ctx, std::span<const Vec3> points) {
    std::vector<Vec3> out(points.size());
    const double pref = ctx.prefactor();
    detail::for_each_point(points.size(), [&](std::size_t i) {
        Vec3 acc{};
        for (std::size_t j = 0; j < ctx.molecule.atoms.size(); ++j) {
            const Atom& a = ctx.molecule.atoms[j];
            const Vec3 rv = points[i] - a.position;
            const double d = rv.norm();
            if (d < ctx.singular_guard) detail::throw_singular(i, j, d);
            acc += rv * (a.charge_number / (d * d * d));
        }
        out[i] = acc * (-pref);
    });
    return out;
}

/// Ghat = G * Q_lambda, finite everywhere;
/// per-atom series limit z_j/lambda inside |r - r_j| < 1e-6 lambda.
inline std::vector<double> eval_Ghat(const KernelContext& ctx, std::span<const Vec3> points) {
    std::vector<double> out(points.size());
    const double pref = ctx.prefactor();
    const double lim = 1e-6 * ctx.lambda;
    detail::for_each_point(points.size(), [&](std::size_t i) {
        double acc = 0;
        for (const Atom& a : ctx.molecule.atoms) {
            const double d = (points[i] - a.position).norm();
            if (d < lim) {
                acc += a.charge_number / ctx.lambda;
            } else {
                // 1 - e^{-d/lambda} via expm1 keeps small-x accuracy
                acc += a.charge_number * (-std::expm1(-d / ctx.lambda)) / d;
            }
        }
        out[i] = pref * acc;
    });
    return out;
}

/// grad Ghat; zero vector inside the series-limit radius.
inline std::vector<Vec3> eval_gradGhat(const KernelContext& ctx, std::span<const Vec3> points) {
    std::vector<Vec3> out(points.size());
    const double pref = ctx.prefactor();
    const double lim = 1e-6 * ctx.lambda;
    detail::for_each_point(points.size(), [&](std::size_t i) {
        Vec3 acc{};
        for (const Atom& a : ctx.molecule.atoms) {
            const Vec3 rv = points[i] - a.position;
            const double d = rv.norm();
            if (d < lim) continue;
            const double x = d / ctx.lambda;
            const double num = (1.0 + x) * std::exp(-x) - 1.0;
            acc += rv * (a.charge_number * num / (d * d * d));
        }
        out[i] = acc * pref;
    });
    return out;
}

/// Interface flux datum
/// g_Gamma = (eps_s - eps_inf) dGhat/dn + (eps_inf - eps_p) dG/dn.
inline std::vector<double> eval_g_gamma(const KernelContext& ctx, double eps_s, double eps_inf,
                                        std::span<const Vec3> surface_points,
                                        std::span<const Vec3> normals) {
    if (surface_points.size() != normals.size())
        throw Error("eval_g_gamma: points/normals size mismatch");
    auto gG = eval_gradG(ctx, surface_points);
    auto gGh = eval_gradGhat(ctx, surface_points);
    std::vector<double> out(surface_points.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = (eps_s - eps_inf) * gGh[i].dot(normals[i]) +
                 (eps_inf - ctx.eps_p) * gG[i].dot(normals[i]);
    return out;
}

}  // namespace nsmpb

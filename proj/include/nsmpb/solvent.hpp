#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "nsmpb/constants.hpp"
#include "nsmpb/core.hpp"

namespace nsmpb {

/// One ionic species of the solution.
struct IonSpecies {
    int charge_number = 0;          ///< Z_i, signed
    double bulk_concentration = 0;  ///< c_i^b in mol/L
    double radius = 0;              ///< hydrated radius in A
    double volume = 0;              ///< v_i = (4/3) pi r^3 in A^3
};

inline IonSpecies make_ion(int charge_number, double bulk_concentration, double radius) {
    if (bulk_concentration < 0)
        throw Error("ion species: bulk concentration must be >= 0");
    if (!(radius > 0)) throw Error("ion species: radius must be > 0");
    IonSpecies s;
    s.charge_number = charge_number;
    s.bulk_concentration = bulk_concentration;
    s.radius = radius;
    s.volume = 4.0 / 3.0 * std::numbers::pi * radius * radius * radius;
    return s;
}

/// Solution-side constants: species, permittivities, correlation length, and
/// the derived screening coefficients.
struct SolventModel {
    std::vector<IonSpecies> species;
    double v_bar = 0;   ///< mean ionic volume, A^3
    double v0 = 0;      ///< size-scaling parameter, A^3 (default min_i v_i)
    double eps_p = 2.0;
    double eps_s = 80.0;
    double eps_inf = 1.8;
    double lambda = 15.0;      ///< correlation length, A
    double ionic_strength = 0; ///< I_s, mol/L
    double kappa_sq = 0;       ///< 2 beta I_s, 1/A^2 scale
    double upsilon = 0;        ///< kappa^2 / (1 + gamma vbar^2/v0 sum c^b)
    double net_charge = 0;     ///< sum Z_i c_i^b; nonzero means non-neutral input
    PhysicalConstants constants;

    /// gamma * vbar^2 / v0, the size-saturation coefficient; 0 when all
    /// ionic volumes are zero (the NMPB reduction).
    double size_coeff() const {
        if (v_bar <= 0.0 || v0 <= 0.0) return 0.0;
        return constants.gamma * v_bar * v_bar / v0;
    }

    bool is_neutral(double tol = 1e-12) const { return std::abs(net_charge) <= tol; }

    /// Copy with all ionic volumes forced to zero (NMPB reduction, where the
    /// Boltzmann denominator collapses to 1 and upsilon to kappa^2).
    SolventModel with_zero_volumes() const {
        SolventModel m = *this;
        for (auto& s : m.species) s.volume = 0.0;
        m.v_bar = 0.0;
        m.v0 = 0.0;
        m.upsilon = m.kappa_sq;
        return m;
    }

    /// Copy with eps_inf := eps_s (SMPB / local reduction).
    SolventModel with_local_dielectric() const {
        SolventModel m = *this;
        m.eps_inf = m.eps_s;
        return m;
    }
};

inline SolventModel build_solvent_model(std::vector<IonSpecies> species, double eps_p,
                                        double eps_s, double eps_inf, double lambda,
                                        std::optional<double> v0_override = std::nullopt,
                                        PhysicalConstants constants = {}) {
    if (species.empty()) throw Error("solvent model: species list is empty");
    if (!(lambda > 0)) throw Error("solvent model: lambda must be positive");
    if (!(eps_p > 0)) throw Error("solvent model: eps_p must be positive");
    if (!(eps_inf > 0) || eps_inf > eps_s)
        throw Error("solvent model: permittivities must satisfy 0 < eps_inf <= eps_s");

    SolventModel m;
    m.species = std::move(species);
    m.eps_p = eps_p;
    m.eps_s = eps_s;
    m.eps_inf = eps_inf;
    m.lambda = lambda;
    m.constants = constants;

    double vsum = 0, vmin = m.species.front().volume;
    for (const auto& s : m.species) {
        vsum += s.volume;
        vmin = std::min(vmin, s.volume);
        m.ionic_strength += 0.5 * s.charge_number * s.charge_number * s.bulk_concentration;
        m.net_charge += s.charge_number * s.bulk_concentration;
    }
    m.v_bar = vsum / static_cast<double>(m.species.size());
    m.v0 = v0_override.value_or(vmin);
    if (m.v_bar > 0 && !(m.v0 > 0))
        throw Error("solvent model: v0 must be positive when ionic volumes are nonzero");

    m.kappa_sq = 2.0 * constants.beta * m.ionic_strength;
    double cb_sum = 0;
    for (const auto& s : m.species) cb_sum += s.bulk_concentration;
    m.upsilon = m.kappa_sq / (1.0 + m.size_coeff() * cb_sum);
    return m;
}

/// Size-saturated concentration fields
/// c_i = c_i^b e^{-Z_i u} / (1 + gamma vbar^2/v0 sum_j c_j^b e^{-Z_j u}),
/// exponents capped at tau. Vertices outside the support mask carry the
/// sentinel -1 (concentrations are defined on the solvent side only).
inline std::vector<std::vector<double>> concentrations(std::span<const double> u,
                                                       const SolventModel& sv,
                                                       const std::vector<bool>& support,
                                                       double tau = 40.0) {
    const std::size_t ns = sv.species.size();
    std::vector<std::vector<double>> out(ns);
    for (auto& f : out) f.assign(u.size(), -1.0);
    const double sc = sv.size_coeff();
    std::vector<double> e(ns);
    for (std::size_t v = 0; v < u.size(); ++v) {
        if (v < support.size() && !support[v]) continue;
        double csum = 0;
        for (std::size_t i = 0; i < ns; ++i) {
            const auto& s = sv.species[i];
            e[i] = std::exp(std::min(-s.charge_number * u[v], tau));
            csum += s.bulk_concentration * e[i];
        }
        const double denom = 1.0 + sc * csum;
        for (std::size_t i = 0; i < ns; ++i)
            out[i][v] = sv.species[i].bulk_concentration * e[i] / denom;
    }
    return out;
}

/// The four-species KNO3 + NaCl mixture used throughout the reference runs
/// (Cl-, NO3-, K+, Na+ at 0.1 mol/L each).
inline SolventModel reference_solvent(double concentration_scale = 1.0) {
    std::vector<IonSpecies> sp = {
        make_ion(-1, 0.1 * concentration_scale, 3.32),
        make_ion(-1, 0.1 * concentration_scale, 3.35),
        make_ion(+1, 0.1 * concentration_scale, 3.58),
        make_ion(+1, 0.1 * concentration_scale, 3.31),
    };
    return build_solvent_model(std::move(sp), 2.0, 80.0, 1.8, 15.0);
}

}  // namespace nsmpb

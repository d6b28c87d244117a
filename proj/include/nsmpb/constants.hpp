#pragma once

#include <cmath>

#include "nsmpb/core.hpp"

namespace nsmpb {

/// Dimensionless model constants plus the SI values they derive from.
///
/// alpha scales the singular charge source, beta the ionic charge density,
/// gamma converts mol/L to 1/A^3. Default-constructed objects carry the
/// frozen reference values at T = 298.15 K so results are bit-stable;
/// derive_constants() recomputes them for another temperature.
struct PhysicalConstants {
    double alpha = 7042.93990033;
    double beta = 4.24135792;
    double gamma = 6.02214129e-4;
    double temperature = 298.15;

    // SI values
    double boltzmann = 1.380648813e-23;          // J/K
    double avogadro = 6.02214129e23;             // 1/mol
    double elem_charge = 1.602176565e-19;        // C
    double vacuum_permittivity = 8.854187817e-12;  // F/m
};

/// Recompute alpha, beta, gamma from the SI values at the given temperature.
inline PhysicalConstants derive_constants(double temperature_kelvin) {
    if (!(temperature_kelvin > 0.0))
        throw Error("derive_constants: temperature must be positive, got " +
                    std::to_string(temperature_kelvin));
    PhysicalConstants c;
    c.temperature = temperature_kelvin;
    const double kT = c.boltzmann * temperature_kelvin;
    const double e2 = c.elem_charge * c.elem_charge;
    c.alpha = 1e10 * e2 / (c.vacuum_permittivity * kT);
    c.beta = c.avogadro * e2 / (1e17 * c.vacuum_permittivity * kT);
    c.gamma = 1e-27 * c.avogadro;
    return c;
}

}  // namespace nsmpb

// Library usage demo: solve the Born ion problem and print the radial
// potential profile along +x together with the iteration trace.

#include <cstdio>
#include <memory>

#include "nsmpb/nsmpb.hpp"

int main() {
    using namespace nsmpb;

    auto mesh = std::make_shared<TetMesh>(gen_born_mesh(10.0, 5.0, 12, 0.3));
    SolventModel solvent = reference_solvent();  // KNO3 + NaCl at 0.1 mol/L
    Molecule ion = single_charge({0, 0, 0}, 1.0);

    SolutionBundle run = solve(ModelKind::NSMPB, mesh, ion, solvent);

    std::printf("converged: %s, selection %d, %zu iterations\n",
                run.trace.converged ? "yes" : "no", run.trace.selection_used,
                run.trace.iterations.size() - 1);
    for (const auto& it : run.trace.iterations)
        std::printf("  k=%d  |F| = %.3e  omega = %g\n", it.k, it.abs_residual, it.omega);

    std::printf("\npotential along +x (kT/e units):\n");
    PointLocator locator(*mesh);
    for (double x = 5.0; x < 10.0; x += 1.0) {
        auto res = interpolate(*mesh, run.u, std::vector<Vec3>{{x, 0, 0}});
        std::printf("  r = %4.1f A: u = %9.5f\n", x, res.values[0]);
    }

    write_vtk_file(*mesh, {{"u", &run.u}, {"psi", &run.fields.psi}}, "born_ion.vtk");
    std::printf("\nwrote born_ion.vtk\n");
    return run.trace.converged ? 0 : 1;
}

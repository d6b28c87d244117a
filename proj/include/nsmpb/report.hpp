#pragma once

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include "nsmpb/config.hpp"
#include "nsmpb/mesh.hpp"
#include "nsmpb/solver.hpp"

namespace nsmpb {

namespace detail {

inline void echo_key(std::ostream& os, const RunConfig& cfg, const std::string& key,
                     const std::string& value) {
    os << "  " << key << " = " << value;
    if (cfg.was_set(key)) os << "   (override)";
    os << '\n';
}

}  // namespace detail

/// Run report: resolved configuration (overrides marked), mesh counts in the
/// vertex/tet-per-region layout, Newton summary, and per-stage timings.
inline void write_report(const RunConfig& cfg, const SolutionBundle& bundle,
                         const ValidationReport& mesh_report, std::ostream& os) {
    os << "nsmpb solve report\n";
    os << "==================\n\n";
    os << "configuration\n";
    detail::echo_key(os, cfg, "model", to_string(bundle.kind));
    detail::echo_key(os, cfg, "solvent.eps_p", format_g17(cfg.eps_p));
    detail::echo_key(os, cfg, "solvent.eps_s", format_g17(cfg.eps_s));
    detail::echo_key(os, cfg, "solvent.eps_inf", format_g17(cfg.eps_inf));
    detail::echo_key(os, cfg, "solvent.lambda", format_g17(cfg.lambda));
    detail::echo_key(os, cfg, "newton.tau", format_g17(cfg.newton.tau));
    detail::echo_key(os, cfg, "newton.eta", format_g17(cfg.newton.eta));
    detail::echo_key(os, cfg, "newton.eps_r", format_g17(cfg.newton.eps_r));
    detail::echo_key(os, cfg, "newton.eps_a", format_g17(cfg.newton.eps_a));
    detail::echo_key(os, cfg, "newton.max_iter", std::to_string(cfg.newton.max_newton));
    detail::echo_key(os, cfg, "linear.rel_tol", format_g17(cfg.newton.linear.rel_tol));
    detail::echo_key(os, cfg, "linear.abs_tol", format_g17(cfg.newton.linear.abs_tol));
    detail::echo_key(os, cfg, "linear.restart", std::to_string(cfg.newton.linear.restart));
    detail::echo_key(os, cfg, "linear.max_iter", std::to_string(cfg.newton.linear.max_iter));
    {
        std::ostringstream sel;
        for (std::size_t i = 0; i < cfg.newton.selection_order.size(); ++i)
            sel << (i ? "," : "") << cfg.newton.selection_order[i];
        detail::echo_key(os, cfg, "newton.selections", sel.str());
    }
    // every key given in the file, echoed verbatim
    os << "configuration file keys\n";
    for (const auto& [key, value] : cfg.raw) os << "  " << key << " = " << value << '\n';
    os << '\n';

    const SolventModel& sv = bundle.solvent;
    os << "solvent model\n";
    os << "  species (Z, c^b mol/L, v A^3):";
    for (const auto& s : sv.species)
        os << "  (" << s.charge_number << ", " << format_g17(s.bulk_concentration) << ", "
           << format_g17(s.volume) << ")";
    os << '\n';
    os << "  v_bar = " << format_g17(sv.v_bar) << " A^3, v0 = " << format_g17(sv.v0)
       << " A^3\n";
    os << "  ionic strength = " << format_g17(sv.ionic_strength)
       << " mol/L, kappa^2 = " << format_g17(sv.kappa_sq)
       << ", upsilon = " << format_g17(sv.upsilon) << '\n';
    if (!sv.is_neutral())
        os << "  WARNING: species are not electro-neutral (sum Z_i c_i^b = "
           << format_g17(sv.net_charge) << " mol/L); the linearized model assumes neutrality\n";
    os << '\n';

    os << mesh_report.to_text() << '\n';

    os << "newton iteration\n";
    os << "  converged: " << (bundle.trace.converged ? "yes" : "no") << '\n';
    if (bundle.kind != ModelKind::LinearNSMPB && !bundle.trace.iterations.empty()) {
        const auto begin = bundle.trace.last_attempt_begin();
        os << "  selection used: " << bundle.trace.selection_used << '\n';
        os << "  iterations: " << bundle.trace.iterations.size() - begin - 1 << '\n';
        os << "  initial |F| = " << format_g17(bundle.trace.iterations[begin].abs_residual)
           << ", final |F| = " << format_g17(bundle.trace.final_residual()) << '\n';
        for (const auto& r : bundle.trace.restarts)
            os << "  restart: selection " << r.failed_selection << " -> " << r.next_selection
               << " after " << r.iterations_spent << " iterations\n";
    }
    if (bundle.atom_coincident_nodes > 0)
        os << "  note: " << bundle.atom_coincident_nodes
           << " mesh vertices coincide with atom centers; their u omits the singular "
              "self-term\n";
    os << '\n';

    os << "timings (seconds)\n";
    os << "  mesh:        " << format_g17(bundle.timings.mesh) << '\n';
    os << "  kernels:     " << format_g17(bundle.timings.kernels) << '\n';
    os << "  psi:         " << format_g17(bundle.timings.psi) << '\n';
    os << "  initial:     " << format_g17(bundle.timings.initial) << '\n';
    os << "  newton:      " << format_g17(bundle.timings.newton) << '\n';
    os << "  recompose:   " << format_g17(bundle.timings.recompose) << '\n';
    os << "  total:       " << format_g17(bundle.timings.total()) << '\n';
}

inline void write_report_file(const RunConfig& cfg, const SolutionBundle& bundle,
                              const ValidationReport& mesh_report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("write_report: cannot open " + path);
    write_report(cfg, bundle, mesh_report, out);
}

}  // namespace nsmpb

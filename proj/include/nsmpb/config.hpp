#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nsmpb/core.hpp"
#include "nsmpb/molecule.hpp"
#include "nsmpb/solver.hpp"
#include "nsmpb/solvent.hpp"

namespace nsmpb {

/// Resolved run configuration. Defaults are the reference parameter set
/// (eps_p = 2, eps_s = 80, eps_inf = 1.8, lambda = 15, g = 0, the four-species
/// 0.1 mol/L mixture); every key is overridable and overrides are echoed in
/// the run report.
struct RunConfig {
    ModelKind model = ModelKind::NSMPB;

    std::string mesh_source;  // "born" | "tetgen"
    double born_halfwidth = 20.0;
    double born_radius = 5.0;
    int born_divisions = 12;
    double born_snap = 0.3;
    std::string tetgen_node, tetgen_ele;

    std::string molecule_source;  // "pqr" | "synthetic"
    std::string pqr_path;
    Molecule synthetic;

    std::vector<IonSpecies> species;  // empty -> reference mixture
    double eps_p = 2.0, eps_s = 80.0, eps_inf = 1.8, lambda = 15.0;
    std::optional<double> v0_override;

    NewtonConfig newton;

    std::string output_prefix = "nsmpb_out";

    std::map<std::string, std::string> raw;  // keys as given in the file

    bool was_set(const std::string& key) const { return raw.count(key) != 0; }

    SolventModel build_solvent() const {
        std::vector<IonSpecies> sp = species;
        if (sp.empty()) {
            sp = {make_ion(-1, 0.1, 3.32), make_ion(-1, 0.1, 3.35), make_ion(1, 0.1, 3.58),
                  make_ion(1, 0.1, 3.31)};
        }
        return build_solvent_model(std::move(sp), eps_p, eps_s, eps_inf, lambda, v0_override);
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

struct ConfigErrors {
    std::vector<std::string> errors;
    void add(const std::string& key, const std::string& what) {
        errors.push_back(key + ": " + what);
    }
    void raise_if_any() const {
        if (errors.empty()) return;
        std::string msg = "config errors:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw ConfigError(msg);
    }
};

inline bool to_double(const std::string& s, double& out) {
    try {
        std::size_t pos = 0;
        out = std::stod(s, &pos);
        return pos == s.size();
    } catch (...) {
        return false;
    }
}

inline bool to_int(const std::string& s, int& out) {
    try {
        std::size_t pos = 0;
        out = std::stoi(s, &pos);
        return pos == s.size();
    } catch (...) {
        return false;
    }
}

/// "Z:conc:radius; Z:conc:radius; ..." ; radius 0 is accepted and yields a
/// zero ionic volume (the NMPB reduction expressed in configuration).
inline std::vector<IonSpecies> parse_species(const std::string& text, ConfigErrors& errs) {
    std::vector<IonSpecies> out;
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
        item = trim(item);
        if (item.empty()) continue;
        std::istringstream fs(item);
        std::string zt, ct, rt;
        if (!std::getline(fs, zt, ':') || !std::getline(fs, ct, ':') || !std::getline(fs, rt)) {
            errs.add("solvent.species", "expected Z:conc:radius, got '" + item + "'");
            continue;
        }
        int z;
        double c, r;
        if (!to_int(trim(zt), z) || !to_double(trim(ct), c) || !to_double(trim(rt), r)) {
            errs.add("solvent.species", "non-numeric entry '" + item + "'");
            continue;
        }
        if (c < 0 || r < 0) {
            errs.add("solvent.species", "concentration and radius must be >= 0 in '" + item + "'");
            continue;
        }
        if (r > 0) {
            out.push_back(make_ion(z, c, r));
        } else {
            IonSpecies s;
            s.charge_number = z;
            s.bulk_concentration = c;
            s.radius = 0;
            s.volume = 0;
            out.push_back(s);
        }
    }
    return out;
}

/// "x y z charge radius; x y z charge radius; ..."
inline Molecule parse_synthetic_atoms(const std::string& text, ConfigErrors& errs) {
    Molecule mol;
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
        item = trim(item);
        if (item.empty()) continue;
        std::istringstream fs(item);
        Atom a;
        if (!(fs >> a.position.x >> a.position.y >> a.position.z >> a.charge_number >>
              a.radius)) {
            errs.add("molecule.synthetic.atoms", "expected 'x y z charge radius', got '" + item +
                                                     "'");
            continue;
        }
        mol.atoms.push_back(a);
    }
    return mol;
}

}  // namespace detail

/// Parse the flat "key = value" format ('#' comments). Every offending key
/// is collected before the error is raised.
inline RunConfig parse_run_config(std::istream& in) {
    RunConfig cfg;
    detail::ConfigErrors errs;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            errs.add("line " + std::to_string(lineno), "expected 'key = value'");
            continue;
        }
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) {
            errs.add("line " + std::to_string(lineno), "empty key");
            continue;
        }
        if (cfg.raw.count(key)) errs.add(key, "duplicate key");
        cfg.raw[key] = value;
    }

    auto dbl = [&](const std::string& key, double& target) {
        auto it = cfg.raw.find(key);
        if (it == cfg.raw.end()) return;
        if (!detail::to_double(it->second, target)) errs.add(key, "expected a number");
    };
    auto integer = [&](const std::string& key, int& target) {
        auto it = cfg.raw.find(key);
        if (it == cfg.raw.end()) return;
        if (!detail::to_int(it->second, target)) errs.add(key, "expected an integer");
    };
    auto str = [&](const std::string& key, std::string& target) {
        auto it = cfg.raw.find(key);
        if (it != cfg.raw.end()) target = it->second;
    };

    if (auto it = cfg.raw.find("model"); it != cfg.raw.end()) {
        const std::string& m = it->second;
        if (m == "nsmpb") cfg.model = ModelKind::NSMPB;
        else if (m == "nmpb") cfg.model = ModelKind::NMPB;
        else if (m == "smpb") cfg.model = ModelKind::SMPB;
        else if (m == "linear-nsmpb" || m == "linear") cfg.model = ModelKind::LinearNSMPB;
        else errs.add("model", "must be nsmpb | nmpb | smpb | linear-nsmpb, got '" + m + "'");
    }

    str("mesh.source", cfg.mesh_source);
    dbl("mesh.born.halfwidth", cfg.born_halfwidth);
    dbl("mesh.born.radius", cfg.born_radius);
    integer("mesh.born.divisions", cfg.born_divisions);
    dbl("mesh.born.snap", cfg.born_snap);
    str("mesh.tetgen.node", cfg.tetgen_node);
    str("mesh.tetgen.ele", cfg.tetgen_ele);

    str("molecule.source", cfg.molecule_source);
    str("molecule.pqr", cfg.pqr_path);
    if (auto it = cfg.raw.find("molecule.synthetic.atoms"); it != cfg.raw.end())
        cfg.synthetic = detail::parse_synthetic_atoms(it->second, errs);

    if (auto it = cfg.raw.find("solvent.species"); it != cfg.raw.end())
        cfg.species = detail::parse_species(it->second, errs);
    dbl("solvent.eps_p", cfg.eps_p);
    dbl("solvent.eps_s", cfg.eps_s);
    dbl("solvent.eps_inf", cfg.eps_inf);
    dbl("solvent.lambda", cfg.lambda);
    if (auto it = cfg.raw.find("solvent.v0"); it != cfg.raw.end()) {
        double v;
        if (detail::to_double(it->second, v)) cfg.v0_override = v;
        else errs.add("solvent.v0", "expected a number");
    }

    dbl("newton.tau", cfg.newton.tau);
    dbl("newton.eta", cfg.newton.eta);
    dbl("newton.eps_r", cfg.newton.eps_r);
    dbl("newton.eps_a", cfg.newton.eps_a);
    integer("newton.max_iter", cfg.newton.max_newton);
    if (auto it = cfg.raw.find("newton.selections"); it != cfg.raw.end()) {
        std::vector<int> order;
        std::istringstream ss(it->second);
        std::string tok;
        bool ok = true;
        while (std::getline(ss, tok, ',')) {
            int s;
            if (!detail::to_int(detail::trim(tok), s) || s < 1 || s > 4) ok = false;
            else order.push_back(s);
        }
        if (!ok || order.empty())
            errs.add("newton.selections", "expected a comma list of selections 1-4");
        else cfg.newton.selection_order = order;
    }

    dbl("linear.rel_tol", cfg.newton.linear.rel_tol);
    dbl("linear.abs_tol", cfg.newton.linear.abs_tol);
    integer("linear.restart", cfg.newton.linear.restart);
    integer("linear.max_iter", cfg.newton.linear.max_iter);

    str("output.prefix", cfg.output_prefix);

    // cross-field validation; all violations reported together
    const bool born = cfg.mesh_source == "born";
    const bool tetgen = cfg.mesh_source == "tetgen";
    if (!born && !tetgen)
        errs.add("mesh.source", "must be 'born' or 'tetgen'");
    if (tetgen) {
        if (cfg.tetgen_node.empty()) errs.add("mesh.tetgen.node", "required for tetgen source");
        if (cfg.tetgen_ele.empty()) errs.add("mesh.tetgen.ele", "required for tetgen source");
        if (born) errs.add("mesh.source", "exactly one mesh source must be configured");
    }
    const bool pqr = cfg.molecule_source == "pqr";
    const bool synth = cfg.molecule_source == "synthetic";
    if (!pqr && !synth)
        errs.add("molecule.source", "must be 'pqr' or 'synthetic'");
    if (pqr && cfg.pqr_path.empty()) errs.add("molecule.pqr", "required for pqr source");
    if (synth && cfg.synthetic.atoms.empty())
        errs.add("molecule.synthetic.atoms", "required for synthetic source");
    if (cfg.eps_inf > cfg.eps_s)
        errs.add("solvent.eps_inf", "violates the constraint eps_inf <= eps_s (" +
                                        format_g17(cfg.eps_inf) + " > " + format_g17(cfg.eps_s) +
                                        ")");
    if (!(cfg.eps_inf > 0)) errs.add("solvent.eps_inf", "must be positive");
    if (!(cfg.eps_p > 0)) errs.add("solvent.eps_p", "must be positive");
    if (!(cfg.lambda > 0)) errs.add("solvent.lambda", "must be positive");

    errs.raise_if_any();
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    RunConfig cfg = parse_run_config(in);
    detail::ConfigErrors errs;
    if (cfg.molecule_source == "pqr" && !std::filesystem::exists(cfg.pqr_path))
        errs.add("molecule.pqr", "file does not exist: " + cfg.pqr_path);
    if (cfg.mesh_source == "tetgen") {
        if (!std::filesystem::exists(cfg.tetgen_node))
            errs.add("mesh.tetgen.node", "file does not exist: " + cfg.tetgen_node);
        if (!std::filesystem::exists(cfg.tetgen_ele))
            errs.add("mesh.tetgen.ele", "file does not exist: " + cfg.tetgen_ele);
    }
    errs.raise_if_any();
    return cfg;
}

}  // namespace nsmpb

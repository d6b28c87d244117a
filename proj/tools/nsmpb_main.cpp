// Command-line front end: solve <config>, gen-mesh, validate <node> <ele>.

#include <chrono>
#include <exception>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "nsmpb/nsmpb.hpp"

namespace {

using namespace nsmpb;

int cmd_solve(const std::string& config_path) {
    RunConfig cfg;
    try {
        cfg = load_run_config(config_path);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }

    Molecule molecule;
    try {
        if (cfg.molecule_source == "pqr") {
            std::ifstream in(cfg.pqr_path);
            molecule = parse_pqr(in);
        } else {
            molecule = cfg.synthetic;
        }
    } catch (const Error& e) {
        std::cerr << "molecule input: " << e.what() << '\n';
        return 2;
    }

    auto mesh = std::make_shared<TetMesh>();
    const auto t_mesh = std::chrono::steady_clock::now();
    try {
        if (cfg.mesh_source == "born")
            *mesh = gen_born_mesh(cfg.born_halfwidth, cfg.born_radius, cfg.born_divisions,
                                  cfg.born_snap);
        else
            *mesh = load_tetgen_files(cfg.tetgen_node, cfg.tetgen_ele);
    } catch (const Error& e) {
        std::cerr << "pipeline step 1 (mesh): " << e.what() << '\n';
        return 2;
    }
    const double mesh_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_mesh).count();

    SolventModel solvent;
    try {
        solvent = cfg.build_solvent();
    } catch (const Error& e) {
        std::cerr << "solvent model: " << e.what() << '\n';
        return 2;
    }
    if (!solvent.is_neutral())
        std::cerr << "warning: species are not electro-neutral (sum Z_i c_i^b = "
                  << format_g17(solvent.net_charge) << " mol/L)\n";

    SolutionBundle bundle;
    try {
        bundle = solve(cfg.model, mesh, molecule, solvent, cfg.newton);
    } catch (const NewtonFailure& e) {
        std::cerr << "pipeline step 4 (newton): " << e.what() << '\n';
        write_trace_csv_file(e.trace, cfg.output_prefix + ".trace.csv");
        return 3;
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return 3;
    }
    bundle.timings.mesh = mesh_seconds;

    ValidationReport mesh_report = validate(*mesh);

    std::vector<std::pair<std::string, const std::vector<double>*>> fields = {
        {"u", &bundle.u},
        {"phi_t", &bundle.fields.phi_t},
        {"zeta", &bundle.fields.zeta},
        {"psi", &bundle.fields.psi},
    };
    std::vector<std::vector<double>> conc = bundle.concentrations;
    std::vector<std::string> conc_names(conc.size());
    for (std::size_t i = 0; i < conc.size(); ++i) {
        conc_names[i] = "c" + std::to_string(i + 1);
        fields.push_back({conc_names[i], &conc[i]});
    }
    try {
        write_vtk_file(*mesh, fields, cfg.output_prefix + ".vtk");
        write_trace_csv_file(bundle.trace, cfg.output_prefix + ".trace.csv");
        write_report_file(cfg, bundle, mesh_report, cfg.output_prefix + ".report.txt");
    } catch (const Error& e) {
        std::cerr << "output: " << e.what() << '\n';
        return 4;
    }

    std::cout << "converged: " << (bundle.trace.converged ? "yes" : "no")
              << ", final |F| = " << format_g17(bundle.trace.final_residual()) << '\n'
              << "wrote " << cfg.output_prefix << ".vtk, .trace.csv, .report.txt\n";
    return 0;
}

int cmd_gen_mesh(double halfwidth, double radius, int divisions, double snap,
                 const std::string& out_prefix) {
    try {
        TetMesh mesh = gen_born_mesh(halfwidth, radius, divisions, snap);
        save_tetgen_files(mesh, out_prefix + ".node", out_prefix + ".ele");
        std::cout << "wrote " << out_prefix << ".node / .ele: " << mesh.n_vertices()
                  << " vertices, " << mesh.n_tets() << " tets, "
                  << mesh.interface_tris.size() << " interface triangles\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "gen-mesh: " << e.what() << '\n';
        return 2;
    }
}

int cmd_validate(const std::string& node_path, const std::string& ele_path) {
    try {
        TetMesh mesh = load_tetgen_files(node_path, ele_path);
        ValidationReport rep = validate(mesh);
        std::cout << rep.to_text();
        if (mesh.interface_tris.empty()) {
            std::cerr << "validate: mesh has no interface triangles\n";
            return 1;
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "validate: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"finite element solver for nonlocal size-modified Poisson-Boltzmann models"};
    app.require_subcommand(1);

    std::string config_path;
    auto* solve_cmd = app.add_subcommand("solve", "run the full pipeline from a config file");
    solve_cmd->add_option("config", config_path, "key-value config file")->required();

    double halfwidth = 20.0, radius = 5.0, snap = 0.3;
    int divisions = 12;
    std::string out_prefix = "born";
    auto* gen_cmd = app.add_subcommand("gen-mesh", "generate a synthetic sphere-interface mesh");
    gen_cmd->add_option("-L,--halfwidth", halfwidth, "box halfwidth (A)");
    gen_cmd->add_option("-a,--radius", radius, "sphere radius (A)");
    gen_cmd->add_option("-n,--divisions", divisions, "cells per axis");
    gen_cmd->add_option("-s,--snap", snap, "interface snap fraction in [0, 0.5]");
    gen_cmd->add_option("-o,--out", out_prefix, "output prefix for .node/.ele");

    std::string node_path, ele_path;
    auto* val_cmd = app.add_subcommand("validate", "check a TetGen mesh pair and print counts");
    val_cmd->add_option("node", node_path, ".node file")->required();
    val_cmd->add_option("ele", ele_path, ".ele file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve_cmd->parsed()) return cmd_solve(config_path);
        if (gen_cmd->parsed()) return cmd_gen_mesh(halfwidth, radius, divisions, snap, out_prefix);
        if (val_cmd->parsed()) return cmd_validate(node_path, ele_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 5;
    }
    return 1;
}

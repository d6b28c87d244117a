#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "nsmpb/config.hpp"

using namespace nsmpb;

namespace {

RunConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_run_config(in);
}

const char* minimal =
    "model = nsmpb\n"
    "mesh.source = born\n"
    "molecule.source = synthetic\n"
    "molecule.synthetic.atoms = 0 0 0 1.0 1.0\n"
    "output.prefix = run\n";

}  // namespace

TEST_CASE("minimal config parses with reference defaults") {
    RunConfig cfg = parse(minimal);
    CHECK(cfg.model == ModelKind::NSMPB);
    CHECK(cfg.mesh_source == "born");
    CHECK(cfg.born_halfwidth == 20.0);
    CHECK(cfg.born_divisions == 12);
    CHECK(cfg.eps_p == 2.0);
    CHECK(cfg.eps_s == 80.0);
    CHECK(cfg.eps_inf == 1.8);
    CHECK(cfg.lambda == 15.0);
    CHECK(cfg.newton.tau == 40.0);
    CHECK(cfg.newton.eta == 0.01);
    CHECK(cfg.newton.selection_order == std::vector<int>{2, 1, 3, 4});
    CHECK(cfg.output_prefix == "run");
    REQUIRE(cfg.synthetic.atoms.size() == 1);
    CHECK(cfg.synthetic.atoms[0].charge_number == 1.0);
    SolventModel sv = cfg.build_solvent();
    CHECK(sv.species.size() == 4);
    CHECK(sv.v_bar == Catch::Approx(163.715876).margin(1e-5));
}

TEST_CASE("overrides are tracked") {
    RunConfig cfg = parse(std::string(minimal) + "solvent.lambda = 10\nnewton.tau = 30\n");
    CHECK(cfg.lambda == 10.0);
    CHECK(cfg.newton.tau == 30.0);
    CHECK(cfg.was_set("solvent.lambda"));
    CHECK(cfg.was_set("newton.tau"));
    CHECK_FALSE(cfg.was_set("solvent.eps_s"));
}

TEST_CASE("eps_inf above eps_s is rejected naming the constraint") {
    try {
        parse(std::string(minimal) + "solvent.eps_inf = 90\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("solvent.eps_inf") != std::string::npos);
        CHECK(msg.find("eps_inf <= eps_s") != std::string::npos);
    }
}

TEST_CASE("all offending keys are listed together") {
    try {
        parse(
            "model = bogus\n"
            "mesh.source = neither\n"
            "molecule.source = nothing\n"
            "solvent.lambda = abc\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("model") != std::string::npos);
        CHECK(msg.find("mesh.source") != std::string::npos);
        CHECK(msg.find("molecule.source") != std::string::npos);
        CHECK(msg.find("solvent.lambda") != std::string::npos);
    }
}

TEST_CASE("species list parses and zero radius encodes zero volume") {
    RunConfig cfg = parse(std::string(minimal) +
                          "solvent.species = -1:0.1:3.32; 1:0.1:0\n");
    REQUIRE(cfg.species.size() == 2);
    CHECK(cfg.species[0].charge_number == -1);
    CHECK(cfg.species[0].volume > 0.0);
    CHECK(cfg.species[1].volume == 0.0);
}

TEST_CASE("selection order parses and validates") {
    RunConfig cfg = parse(std::string(minimal) + "newton.selections = 4,3\n");
    CHECK(cfg.newton.selection_order == std::vector<int>{4, 3});
    CHECK_THROWS_AS(parse(std::string(minimal) + "newton.selections = 9\n"), ConfigError);
}

TEST_CASE("tetgen source requires both paths") {
    try {
        parse(
            "mesh.source = tetgen\n"
            "molecule.source = synthetic\n"
            "molecule.synthetic.atoms = 0 0 0 1 1\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("mesh.tetgen.node") != std::string::npos);
        CHECK(msg.find("mesh.tetgen.ele") != std::string::npos);
    }
}

TEST_CASE("duplicate keys are flagged") {
    CHECK_THROWS_AS(parse(std::string(minimal) + "solvent.lambda = 10\nsolvent.lambda = 11\n"),
                    ConfigError);
}

TEST_CASE("missing files are reported at load time") {
    CHECK_THROWS_AS(load_run_config("/nonexistent/config.txt"), ConfigError);
}

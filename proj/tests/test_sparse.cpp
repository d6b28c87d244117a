#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "nsmpb/csr.hpp"
#include "nsmpb/gmres.hpp"
#include "nsmpb/ilu.hpp"

using namespace nsmpb;

namespace {

CsrMatrix dense2x2(double a, double b, double c, double d) {
    CooBuilder coo(2, 2);
    coo.add(0, 0, a);
    coo.add(0, 1, b);
    coo.add(1, 0, c);
    coo.add(1, 1, d);
    return coo.compress();
}

/// 1D Laplacian + identity: SPD M-matrix, handy desk-scale test system.
CsrMatrix laplacian1d(int n) {
    CooBuilder coo(n, n);
    for (int i = 0; i < n; ++i) {
        coo.add(i, i, 3.0);
        if (i > 0) coo.add(i, i - 1, -1.0);
        if (i + 1 < n) coo.add(i, i + 1, -1.0);
    }
    return coo.compress();
}

}  // namespace

TEST_CASE("coo assembly merges duplicates and sorts columns") {
    CooBuilder coo(3, 3);
    coo.add(1, 2, 1.0);
    coo.add(1, 0, 2.0);
    coo.add(1, 2, 0.5);
    coo.add(0, 0, 4.0);
    coo.add(2, 2, 9.0);
    CsrMatrix m = coo.compress();
    CHECK(m.nnz() == 4);
    CHECK(*m.find(1, 2) == 1.5);
    CHECK(*m.find(1, 0) == 2.0);
    CHECK(m.find(0, 1) == nullptr);
    // row 1 columns sorted
    CHECK(m.col[m.row_ptr[1]] == 0);
    CHECK(m.col[m.row_ptr[1] + 1] == 2);
}

TEST_CASE("csr matvec") {
    CsrMatrix m = dense2x2(4, 1, 1, 3);
    std::vector<double> x{1.0, 2.0};
    auto y = m.multiply(x);
    CHECK(y[0] == 6.0);
    CHECK(y[1] == 7.0);
}

TEST_CASE("block composition places entries in the right quadrants") {
    CsrMatrix a = dense2x2(1, 0, 0, 1);
    CsrMatrix b = dense2x2(2, 0, 0, 2);
    CsrMatrix c = dense2x2(3, 0, 0, 3);
    CsrMatrix d = dense2x2(4, 0, 0, 4);
    CsrMatrix m = csr_block2x2(a, b, c, d);
    CHECK(m.rows == 4);
    CHECK(*m.find(0, 0) == 1.0);
    CHECK(*m.find(0, 2) == 2.0);
    CHECK(*m.find(2, 0) == 3.0);
    CHECK(*m.find(2, 2) == 4.0);
    CHECK(*m.find(3, 3) == 4.0);
}

TEST_CASE("ilu0 of a diagonal matrix is trivial") {
    CooBuilder coo(3, 3);
    coo.add(0, 0, 2.0);
    coo.add(1, 1, 5.0);
    coo.add(2, 2, -4.0);
    CsrMatrix a = coo.compress();
    IluFactors f = ilu0(a);
    CHECK_FALSE(f.shifted);
    // L = I, U = A: applying the factors inverts A exactly
    std::vector<double> x{2.0, 5.0, -4.0}, y(3);
    f.solve(x, y);
    CHECK(y[0] == Catch::Approx(1.0));
    CHECK(y[1] == Catch::Approx(1.0));
    CHECK(y[2] == Catch::Approx(1.0));
}

TEST_CASE("ilu0 of a dense 2x2 is the exact LU") {
    CsrMatrix a = dense2x2(4, 1, 1, 3);
    IluFactors f = ilu0(a);
    // hand LU: L21 = 0.25, U22 = 2.75
    CHECK(*f.lu.find(1, 0) == Catch::Approx(0.25));
    CHECK(*f.lu.find(1, 1) == Catch::Approx(2.75));
    CHECK(*f.lu.find(0, 0) == Catch::Approx(4.0));
    CHECK(*f.lu.find(0, 1) == Catch::Approx(1.0));
}

TEST_CASE("ilu0 rejects a structurally zero diagonal") {
    CooBuilder coo(2, 2);
    coo.add(0, 1, 1.0);
    coo.add(1, 0, 1.0);
    coo.add(1, 1, 1.0);
    CHECK_THROWS_AS(ilu0(coo.compress()), SolverError);
}

TEST_CASE("ilu0 retries with a diagonal shift on a zero pivot") {
    // a11 = 0 numerically but present structurally
    CooBuilder coo(2, 2);
    coo.add(0, 0, 0.0);
    coo.add(0, 1, 1.0);
    coo.add(1, 0, 1.0);
    coo.add(1, 1, 1.0);
    IluFactors f = ilu0(coo.compress());
    CHECK(f.shifted);
}

TEST_CASE("gmres solves the identity in one iteration") {
    CooBuilder coo(4, 4);
    for (int i = 0; i < 4; ++i) coo.add(i, i, 1.0);
    CsrMatrix a = coo.compress();
    std::vector<double> b{1, 2, 3, 4};
    auto [x, rep] = gmres(a, b, identity_preconditioner());
    CHECK(rep.converged);
    CHECK(rep.iterations <= 1);
    for (int i = 0; i < 4; ++i) CHECK(x[i] == Catch::Approx(b[i]).margin(1e-10));
}

TEST_CASE("gmres hand-solve of a 2x2 system") {
    CsrMatrix a = dense2x2(4, 1, 1, 3);
    std::vector<double> b{1, 2};
    auto [x, rep] = gmres(a, b, identity_preconditioner());
    CHECK(rep.converged);
    CHECK(x[0] == Catch::Approx(1.0 / 11.0).margin(1e-10));
    CHECK(x[1] == Catch::Approx(7.0 / 11.0).margin(1e-10));
}

TEST_CASE("gmres on a zero right side returns zero without iterating") {
    CsrMatrix a = dense2x2(4, 1, 1, 3);
    std::vector<double> b{0, 0};
    auto [x, rep] = gmres(a, b, identity_preconditioner());
    CHECK(rep.converged);
    CHECK(rep.iterations == 0);
    CHECK(x[0] == 0.0);
    CHECK(x[1] == 0.0);
}

TEST_CASE("gmres residual estimates are monotone within a cycle") {
    CsrMatrix a = laplacian1d(60);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> dist(-1, 1);
    std::vector<double> b(60);
    for (auto& v : b) v = dist(rng);
    auto [x, rep] = gmres(a, b, identity_preconditioner(), 1e-10, 1e-12, 100, 500);
    CHECK(rep.converged);
    for (std::size_t i = 1; i < rep.residual_history.size(); ++i)
        CHECK(rep.residual_history[i] <= rep.residual_history[i - 1] * (1 + 1e-12));
}

TEST_CASE("identity and ilu0 preconditioning agree to the tolerance") {
    CsrMatrix a = laplacian1d(80);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> dist(-1, 1);
    std::vector<double> b(80);
    for (auto& v : b) v = dist(rng);
    auto [x1, r1] = gmres(a, b, identity_preconditioner(), 1e-10, 1e-12);
    IluFactors f = ilu0(a);
    auto [x2, r2] = gmres(a, b, ilu_preconditioner(f), 1e-10, 1e-12);
    REQUIRE(r1.converged);
    REQUIRE(r2.converged);
    CHECK(r2.iterations <= r1.iterations);
    for (int i = 0; i < 80; ++i) CHECK(x1[i] == Catch::Approx(x2[i]).margin(1e-7));
}

TEST_CASE("gmres reports non-convergence instead of throwing") {
    CsrMatrix a = laplacian1d(200);
    std::vector<double> b(200, 1.0);
    auto [x, rep] = gmres(a, b, identity_preconditioner(), 1e-14, 1e-14, 5, 6);
    CHECK_FALSE(rep.converged);
    CHECK(rep.iterations <= 6);
}

TEST_CASE("restarted gmres still reaches the solution") {
    CsrMatrix a = laplacian1d(120);
    std::vector<double> b(120, 1.0);
    auto [x, rep] = gmres(a, b, identity_preconditioner(), 1e-9, 1e-10, 10, 1000);
    REQUIRE(rep.converged);
    auto r = a.multiply(x);
    for (int i = 0; i < 120; ++i) r[i] -= b[i];
    CHECK(norm2(r) <= std::max(1e-9 * norm2(b), 1e-10) * 1.0001);
}

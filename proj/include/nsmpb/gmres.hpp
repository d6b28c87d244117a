#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "nsmpb/core.hpp"
#include "nsmpb/csr.hpp"
#include "nsmpb/ilu.hpp"

namespace nsmpb {

struct KrylovReport {
    int iterations = 0;
    double residual = 0;       ///< true residual |b - Ax| at exit
    bool converged = false;
    bool breakdown = false;
    std::vector<double> residual_history;  // one estimate per inner iteration
};

using Preconditioner = std::function<void(std::span<const double>, std::span<double>)>;

inline Preconditioner identity_preconditioner() {
    return [](std::span<const double> x, std::span<double> y) {
        std::copy(x.begin(), x.end(), y.begin());
    };
}

inline Preconditioner ilu_preconditioner(const IluFactors& f) {
    return [&f](std::span<const double> x, std::span<double> y) { f.solve(x, y); };
}

/// Restarted GMRES, right-preconditioned so the termination test sees the
/// true residual: stops when |b - Ax| <= max(rel_tol |b|, abs_tol).
/// Non-convergence is reported, not thrown.
inline std::pair<std::vector<double>, KrylovReport> gmres(const CsrMatrix& a,
                                                          std::span<const double> b,
                                                          const Preconditioner& precond,
                                                          double rel_tol = 1e-8,
                                                          double abs_tol = 1e-8,
                                                          int restart = 100,
                                                          int max_iter = 1000) {
    const int n = a.rows;
    if (a.cols != n || static_cast<int>(b.size()) != n)
        throw SolverError("gmres: shape mismatch");
    std::vector<double> x(n, 0.0);
    KrylovReport rep;

    const double bnorm = norm2(b);
    const double target = std::max(rel_tol * bnorm, abs_tol);
    if (bnorm == 0.0) {
        rep.converged = true;
        return {x, rep};
    }

    const int m = std::max(1, restart);
    std::vector<std::vector<double>> V(m + 1), Z(m);
    std::vector<double> H(static_cast<std::size_t>(m + 1) * m, 0.0);  // column-major Hessenberg
    auto h = [&](int i, int j) -> double& { return H[j * (m + 1) + i]; };
    std::vector<double> cs(m), sn(m), g(m + 1);
    std::vector<double> r(n), w(n);

    while (true) {
        a.multiply(x, r);
        for (int i = 0; i < n; ++i) r[i] = b[i] - r[i];
        double beta = norm2(r);
        rep.residual = beta;
        if (beta <= target) {
            rep.converged = true;
            return {x, rep};
        }
        if (rep.iterations >= max_iter) return {x, rep};

        V[0].assign(n, 0.0);
        for (int i = 0; i < n; ++i) V[0][i] = r[i] / beta;
        std::fill(g.begin(), g.end(), 0.0);
        g[0] = beta;

        int j = 0;
        bool lucky = false;
        for (; j < m && rep.iterations < max_iter; ++j) {
            Z[j].assign(n, 0.0);
            precond(V[j], Z[j]);
            a.multiply(Z[j], w);
            // modified Gram-Schmidt
            for (int i = 0; i <= j; ++i) {
                h(i, j) = dot(w, V[i]);
                axpy(-h(i, j), V[i], w);
            }
            h(j + 1, j) = norm2(w);
            const double scale = std::abs(h(0, 0)) + 1.0;
            if (h(j + 1, j) <= 1e-14 * scale) {
                lucky = true;
            } else {
                V[j + 1].assign(n, 0.0);
                for (int i = 0; i < n; ++i) V[j + 1][i] = w[i] / h(j + 1, j);
            }
            // apply accumulated Givens rotations, then form the new one
            for (int i = 0; i < j; ++i) {
                const double t = cs[i] * h(i, j) + sn[i] * h(i + 1, j);
                h(i + 1, j) = -sn[i] * h(i, j) + cs[i] * h(i + 1, j);
                h(i, j) = t;
            }
            const double denom = std::hypot(h(j, j), h(j + 1, j));
            cs[j] = denom == 0 ? 1.0 : h(j, j) / denom;
            sn[j] = denom == 0 ? 0.0 : h(j + 1, j) / denom;
            h(j, j) = denom;
            h(j + 1, j) = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];

            ++rep.iterations;
            rep.residual_history.push_back(std::abs(g[j + 1]));
            if (std::abs(g[j + 1]) <= target || lucky) {
                ++j;
                break;
            }
        }

        // back-substitute y and update x += sum y_k Z[k]
        std::vector<double> y(j);
        for (int i = j - 1; i >= 0; --i) {
            double acc = g[i];
            for (int k = i + 1; k < j; ++k) acc -= h(i, k) * y[k];
            if (h(i, i) == 0.0) {
                rep.breakdown = true;
                acc = 0.0;
            } else {
                acc /= h(i, i);
            }
            y[i] = acc;
        }
        for (int k = 0; k < j; ++k) axpy(y[k], Z[k], x);

        a.multiply(x, r);
        for (int i = 0; i < n; ++i) r[i] = b[i] - r[i];
        rep.residual = norm2(r);
        if (rep.residual <= target) {
            rep.converged = true;
            return {x, rep};
        }
        if (lucky) {
            // exact subspace solution did not reach the target
            rep.breakdown = true;
            return {x, rep};
        }
        if (rep.iterations >= max_iter) return {x, rep};
    }
}

}  // namespace nsmpb

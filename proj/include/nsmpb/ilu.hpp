#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "nsmpb/core.hpp"
#include "nsmpb/csr.hpp"

namespace nsmpb {

/// ILU(0) factors stored on the pattern of A: combined unit-lower L (unit
/// diagonal implicit) and U, sharing A's row/col structure.
struct IluFactors {
    CsrMatrix lu;             // values overwritten with the factorization
    std::vector<int> diag;    // index of the diagonal entry per row
    bool shifted = false;     // a diagonal shift was needed to complete

    /// y = (LU)^{-1} x via forward then backward substitution.
    void solve(std::span<const double> x, std::span<double> y) const {
        const int n = lu.rows;
        for (int i = 0; i < n; ++i) {
            double acc = x[i];
            for (int k = lu.row_ptr[i]; k < diag[i]; ++k) acc -= lu.val[k] * y[lu.col[k]];
            y[i] = acc;
        }
        for (int i = n - 1; i >= 0; --i) {
            double acc = y[i];
            for (int k = diag[i] + 1; k < lu.row_ptr[i + 1]; ++k)
                acc -= lu.val[k] * y[lu.col[k]];
            y[i] = acc / lu.val[diag[i]];
        }
    }
};

namespace detail {

inline IluFactors ilu0_attempt(const CsrMatrix& a, double diag_shift) {
    const int n = a.rows;
    IluFactors f;
    f.lu = a;
    f.diag.assign(n, -1);
    for (int i = 0; i < n; ++i) {
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
            if (a.col[k] == i) f.diag[i] = k;
        if (f.diag[i] < 0)
            throw SolverError("ilu0: structurally zero diagonal in row " + std::to_string(i));
    }
    if (diag_shift != 0)
        for (int i = 0; i < n; ++i) f.lu.val[f.diag[i]] += diag_shift;

    // IKJ variant restricted to the pattern of A
    std::vector<int> pos(n, -1);  // column -> value index within the working row
    for (int i = 0; i < n; ++i) {
        for (int k = f.lu.row_ptr[i]; k < f.lu.row_ptr[i + 1]; ++k) pos[f.lu.col[k]] = k;
        for (int k = f.lu.row_ptr[i]; k < f.diag[i]; ++k) {
            const int j = f.lu.col[k];
            const double piv = f.lu.val[f.diag[j]];
            if (piv == 0.0 || !std::isfinite(piv))
                throw SolverError("ilu0: zero pivot at row " + std::to_string(j));
            const double lij = f.lu.val[k] / piv;
            f.lu.val[k] = lij;
            for (int kk = f.diag[j] + 1; kk < f.lu.row_ptr[j + 1]; ++kk) {
                const int p = pos[f.lu.col[kk]];
                if (p >= 0) f.lu.val[p] -= lij * f.lu.val[kk];
            }
        }
        const double piv = f.lu.val[f.diag[i]];
        if (piv == 0.0 || !std::isfinite(piv))
            throw SolverError("ilu0: zero pivot at row " + std::to_string(i));
        for (int k = f.lu.row_ptr[i]; k < f.lu.row_ptr[i + 1]; ++k) pos[f.lu.col[k]] = -1;
    }
    return f;
}

}  // namespace detail

/// ILU(0): exact LU restricted to A's sparsity pattern. On a zero pivot the
/// factorization is retried once with a diagonal shift of 1e-12 |diag|_inf
/// (reported via the shifted flag); a second failure propagates.
inline IluFactors ilu0(const CsrMatrix& a) {
    if (a.rows != a.cols) throw SolverError("ilu0: matrix must be square");
    try {
        return detail::ilu0_attempt(a, 0.0);
    } catch (const SolverError&) {
        double dmax = 0;
        for (int i = 0; i < a.rows; ++i) {
            const double* d = a.find(i, i);
            if (d) dmax = std::max(dmax, std::abs(*d));
        }
        if (dmax == 0) throw;
        IluFactors f = detail::ilu0_attempt(a, 1e-12 * dmax);
        f.shifted = true;
        return f;
    }
}

}  // namespace nsmpb

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "nsmpb/core.hpp"

namespace nsmpb {

/// Compressed-row sparse matrix; column indices sorted within each row,
/// no duplicate (row, col) pairs.
struct CsrMatrix {
    int rows = 0, cols = 0;
    std::vector<int> row_ptr;  // size rows + 1
    std::vector<int> col;
    std::vector<double> val;

    int nnz() const { return static_cast<int>(col.size()); }

    void multiply(std::span<const double> x, std::span<double> y) const {
        for (int i = 0; i < rows; ++i) {
            double acc = 0;
            for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) acc += val[k] * x[col[k]];
            y[i] = acc;
        }
    }

    std::vector<double> multiply(std::span<const double> x) const {
        std::vector<double> y(rows);
        multiply(x, y);
        return y;
    }

    /// Pointer to the stored (i, j) value, or nullptr if not in the pattern.
    double* find(int i, int j) {
        auto b = col.begin() + row_ptr[i], e = col.begin() + row_ptr[i + 1];
        auto it = std::lower_bound(b, e, j);
        if (it == e || *it != j) return nullptr;
        return &val[it - col.begin()];
    }
    const double* find(int i, int j) const { return const_cast<CsrMatrix*>(this)->find(i, j); }
};

/// Accumulates (i, j, v) triplets; duplicate coordinates sum on compression.
class CooBuilder {
  public:
    CooBuilder(int rows, int cols) : rows_(rows), cols_(cols) {}

    void add(int i, int j, double v) { entries_.push_back({i, j, v}); }

    CsrMatrix compress() const {
        for (const auto& e : entries_)
            if (e.i < 0 || e.i >= rows_ || e.j < 0 || e.j >= cols_)
                throw Error("coo builder: entry outside matrix shape");
        std::vector<std::size_t> order(entries_.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const auto& x = entries_[a];
            const auto& y = entries_[b];
            return x.i != y.i ? x.i < y.i : x.j < y.j;
        });
        CsrMatrix m;
        m.rows = rows_;
        m.cols = cols_;
        std::vector<int> per_row(rows_, 0);
        int prev_i = -1, prev_j = -1;
        for (std::size_t k = 0; k < order.size(); ++k) {
            const auto& e = entries_[order[k]];
            if (e.i == prev_i && e.j == prev_j) {
                m.val.back() += e.v;
                continue;
            }
            m.col.push_back(e.j);
            m.val.push_back(e.v);
            ++per_row[e.i];
            prev_i = e.i;
            prev_j = e.j;
        }
        m.row_ptr.assign(rows_ + 1, 0);
        for (int i = 0; i < rows_; ++i) m.row_ptr[i + 1] = m.row_ptr[i] + per_row[i];
        return m;
    }

  private:
    struct Entry {
        int i, j;
        double v;
    };
    int rows_, cols_;
    std::vector<Entry> entries_;
};

inline CsrMatrix csr_add(const CsrMatrix& a, const CsrMatrix& b, double wa = 1.0,
                         double wb = 1.0) {
    if (a.rows != b.rows || a.cols != b.cols) throw Error("csr_add: shape mismatch");
    CooBuilder out(a.rows, a.cols);
    for (int i = 0; i < a.rows; ++i) {
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) out.add(i, a.col[k], wa * a.val[k]);
        for (int k = b.row_ptr[i]; k < b.row_ptr[i + 1]; ++k) out.add(i, b.col[k], wb * b.val[k]);
    }
    return out.compress();
}

inline CsrMatrix csr_scale(const CsrMatrix& a, double s) {
    CsrMatrix m = a;
    for (auto& v : m.val) v *= s;
    return m;
}

/// [A11 A12; A21 A22] block composition into one 2N-square matrix.
inline CsrMatrix csr_block2x2(const CsrMatrix& a11, const CsrMatrix& a12, const CsrMatrix& a21,
                              const CsrMatrix& a22) {
    const int n = a11.rows;
    if (a11.cols != n || a12.rows != n || a12.cols != n || a21.rows != n || a21.cols != n ||
        a22.rows != n || a22.cols != n)
        throw Error("csr_block2x2: blocks must be square with equal size");
    CsrMatrix m;
    m.rows = m.cols = 2 * n;
    m.row_ptr.assign(2 * n + 1, 0);
    m.col.reserve(a11.nnz() + a12.nnz() + a21.nnz() + a22.nnz());
    m.val.reserve(m.col.capacity());
    for (int i = 0; i < n; ++i) {
        for (int k = a11.row_ptr[i]; k < a11.row_ptr[i + 1]; ++k) {
            m.col.push_back(a11.col[k]);
            m.val.push_back(a11.val[k]);
        }
        for (int k = a12.row_ptr[i]; k < a12.row_ptr[i + 1]; ++k) {
            m.col.push_back(a12.col[k] + n);
            m.val.push_back(a12.val[k]);
        }
        m.row_ptr[i + 1] = static_cast<int>(m.col.size());
    }
    for (int i = 0; i < n; ++i) {
        for (int k = a21.row_ptr[i]; k < a21.row_ptr[i + 1]; ++k) {
            m.col.push_back(a21.col[k]);
            m.val.push_back(a21.val[k]);
        }
        for (int k = a22.row_ptr[i]; k < a22.row_ptr[i + 1]; ++k) {
            m.col.push_back(a22.col[k] + n);
            m.val.push_back(a22.val[k]);
        }
        m.row_ptr[n + i + 1] = static_cast<int>(m.col.size());
    }
    return m;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace nsmpb

#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace mfg::detail {

// Solves A x = b by Gaussian elimination with partial pivoting. A is square,
// row-major; both arguments are consumed. Sizes here are tiny (grid-sized).
inline std::vector<double> solve_linear(std::vector<std::vector<double>> a,
                                        std::vector<double> b) {
    const std::size_t n = a.size();
    if (n == 0 || b.size() != n)
        throw std::invalid_argument("solve_linear: bad dimensions");
    for (const auto& row : a)
        if (row.size() != n) throw std::invalid_argument("solve_linear: not square");

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (std::abs(a[pivot][col]) < 1e-14)
            throw std::runtime_error("solve_linear: singular matrix");
        std::swap(a[pivot], a[col]);
        std::swap(b[pivot], b[col]);
        double inv = 1.0 / a[col][col];
        for (std::size_t r = col + 1; r < n; ++r) {
            double f = a[r][col] * inv;
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t ri = n; ri-- > 0;) {
        double s = b[ri];
        for (std::size_t c = ri + 1; c < n; ++c) s -= a[ri][c] * x[c];
        x[ri] = s / a[ri][ri];
    }
    return x;
}

}  // namespace mfg::detail

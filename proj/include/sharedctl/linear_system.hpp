#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sharedctl {

struct Entry {
    std::size_t row;
    std::size_t col;
    double value;
};

struct LinearSolveOptions {
    /// Systems up to this size are factorized directly; larger ones use Gauss-Seidel.
    std::size_t direct_limit = 50000;
    double tolerance = 1e-10;
    std::size_t max_sweeps = 100000;
};

struct LinearSolveResult {
    std::vector<double> x;
    bool converged = true;
    std::size_t sweeps = 0;
};

/// Solves A x = b for a square sparse A given as (duplicate-summing) entries.
LinearSolveResult solve_sparse(std::size_t n, std::span<const Entry> entries,
                               std::span<const double> rhs,
                               const LinearSolveOptions& options = {});

} // namespace sharedctl

#include "sharedctl/linear_system.hpp"

#include "sharedctl/errors.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>

namespace sharedctl {

namespace {

LinearSolveResult solve_direct(std::size_t n, std::span<const Entry> entries,
                               std::span<const double> rhs) {
    using SpMat = Eigen::SparseMatrix<double>;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(entries.size());
    for (const auto& e : entries)
        trip.emplace_back(static_cast<int>(e.row), static_cast<int>(e.col), e.value);
    SpMat a(static_cast<int>(n), static_cast<int>(n));
    a.setFromTriplets(trip.begin(), trip.end());
    a.makeCompressed();

    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success)
        throw NumericalBreakdown("sparse LU failed: " + lu.lastErrorMessage());

    Eigen::VectorXd b(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) b[static_cast<Eigen::Index>(i)] = rhs[i];
    Eigen::VectorXd x = lu.solve(b);

    LinearSolveResult out;
    out.x.assign(x.data(), x.data() + x.size());
    out.converged = x.allFinite();
    return out;
}

LinearSolveResult solve_gauss_seidel(std::size_t n, std::span<const Entry> entries,
                                     std::span<const double> rhs,
                                     const LinearSolveOptions& options) {
    // CSR with the diagonal kept apart.
    std::vector<double> diag(n, 0.0);
    std::vector<std::size_t> start(n + 1, 0);
    for (const auto& e : entries)
        if (e.row != e.col) ++start[e.row + 1];
    for (std::size_t i = 0; i < n; ++i) start[i + 1] += start[i];
    std::vector<std::size_t> cols(start[n]);
    std::vector<double> vals(start[n]);
    std::vector<std::size_t> fill(start.begin(), start.end() - 1);
    for (const auto& e : entries) {
        if (e.row == e.col) {
            diag[e.row] += e.value;
        } else {
            cols[fill[e.row]] = e.col;
            vals[fill[e.row]++] = e.value;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (diag[i] == 0.0)
            throw NumericalBreakdown("Gauss-Seidel: zero diagonal at row " + std::to_string(i));

    LinearSolveResult out;
    out.x.assign(n, 0.0);
    out.converged = false;
    for (std::size_t sweep = 1; sweep <= options.max_sweeps; ++sweep) {
        double delta = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double acc = rhs[i];
            for (std::size_t k = start[i]; k < start[i + 1]; ++k) acc -= vals[k] * out.x[cols[k]];
            const double next = acc / diag[i];
            delta = std::max(delta, std::abs(next - out.x[i]));
            out.x[i] = next;
        }
        out.sweeps = sweep;
        if (delta < options.tolerance) {
            out.converged = true;
            break;
        }
    }
    return out;
}

} // namespace

LinearSolveResult solve_sparse(std::size_t n, std::span<const Entry> entries,
                               std::span<const double> rhs,
                               const LinearSolveOptions& options) {
    if (n == 0) return {};
    if (n <= options.direct_limit) return solve_direct(n, entries, rhs);
    return solve_gauss_seidel(n, entries, rhs, options);
}

} // namespace sharedctl

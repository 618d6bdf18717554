#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace sharedctl {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Relation { LessEqual, Equal, GreaterEqual };
enum class Sense { Minimize, Maximize };
enum class LpStatus { Optimal, Feasible, Infeasible, Unbounded };

const char* to_string(LpStatus status);

struct Term {
    std::size_t var = 0;
    double coef = 0.0;
};

/**
 * Linear program builder: bounded variables, sparse rows with a relation and
 * a finite right-hand side, and a linear objective.
 */
class LinearProgram {
public:
    struct Variable {
        double lower = 0.0;
        double upper = kInf;
        double cost = 0.0;
        std::string name;
    };
    struct Row {
        std::vector<Term> terms;
        Relation relation = Relation::LessEqual;
        double rhs = 0.0;
        std::string name;
    };

    std::size_t add_variable(double lower = 0.0, double upper = kInf, double cost = 0.0,
                             std::string name = {});
    std::size_t add_row(std::vector<Term> terms, Relation relation, double rhs,
                        std::string name = {});

    void set_cost(std::size_t var, double cost) { vars_.at(var).cost = cost; }
    void set_sense(Sense sense) noexcept { sense_ = sense; }

    Sense sense() const noexcept { return sense_; }
    std::size_t num_variables() const noexcept { return vars_.size(); }
    std::size_t num_rows() const noexcept { return rows_.size(); }
    const Variable& variable(std::size_t j) const { return vars_[j]; }
    const Row& row(std::size_t i) const { return rows_[i]; }
    const std::vector<Variable>& variables() const noexcept { return vars_; }
    const std::vector<Row>& rows() const noexcept { return rows_; }

    /// Throws DomainError on dangling variable references or non-finite data.
    void validate() const;

private:
    std::vector<Variable> vars_;
    std::vector<Row> rows_;
    Sense sense_ = Sense::Minimize;
};

/// Simplex basis in the column space [structural | logical]: column
/// num_variables() + i is the logical of row i.
struct Basis {
    std::vector<std::uint32_t> basic;
    /// Nonbasic columns resting at their upper bound.
    std::vector<std::uint32_t> at_upper;
};

struct LpOptions {
    std::size_t refactor_interval = 100;
    double feasibility_tolerance = 1e-7;
    double bound_tolerance = 1e-9;
    double pivot_tolerance = 1e-12;
    double optimality_tolerance = 1e-9;
    /// 0 picks a limit proportional to the problem size.
    std::size_t max_iterations = 0;
    /// Optional starting basis; ignored when it does not factorize.
    const Basis* warm_start = nullptr;
};

struct LpOutcome {
    LpStatus status = LpStatus::Infeasible;
    std::vector<double> values;
    double objective = 0.0;
    /// Lagrangian bound from the final duals (meaningful for Optimal).
    double dual_bound = 0.0;
    std::size_t iterations = 0;
    /// Largest row or bound violation of `values`.
    double max_violation = 0.0;
    Basis basis;
};

/// Two-phase bounded revised simplex. Deterministic for identical input.
LpOutcome solve(const LinearProgram& lp, const LpOptions& options = {});
/// Phase one only; status is Feasible or Infeasible.
LpOutcome check_feasible(const LinearProgram& lp, const LpOptions& options = {});

/// Pluggable solver: (program, feasibility_only, options) -> outcome.
using LpBackend = std::function<LpOutcome(const LinearProgram&, bool, const LpOptions&)>;
LpBackend default_lp_backend();

/// Largest violation of rows and bounds by `values`.
double max_violation(const LinearProgram& lp, const std::vector<double>& values);

/// Debug dump in the CPLEX LP text style.
void write_lp(const LinearProgram& lp, std::ostream& out);

} // namespace sharedctl

#include "sharedctl/lp.hpp"

#include "sharedctl/errors.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>

namespace sharedctl {

const char* to_string(LpStatus status) {
    switch (status) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Feasible: return "feasible";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    }
    return "?";
}

std::size_t LinearProgram::add_variable(double lower, double upper, double cost, std::string name) {
    vars_.push_back({lower, upper, cost, std::move(name)});
    return vars_.size() - 1;
}

std::size_t LinearProgram::add_row(std::vector<Term> terms, Relation relation, double rhs,
                                   std::string name) {
    rows_.push_back({std::move(terms), relation, rhs, std::move(name)});
    return rows_.size() - 1;
}

void LinearProgram::validate() const {
    for (std::size_t j = 0; j < vars_.size(); ++j) {
        const auto& v = vars_[j];
        if (std::isnan(v.lower) || std::isnan(v.upper) || !std::isfinite(v.cost) ||
            v.lower == kInf || v.upper == -kInf)
            throw DomainError("variable " + std::to_string(j) + ": invalid bounds or cost");
    }
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const auto& r = rows_[i];
        if (!std::isfinite(r.rhs)) throw DomainError("row " + std::to_string(i) + ": rhs not finite");
        for (const auto& t : r.terms) {
            if (t.var >= vars_.size())
                throw DomainError("row " + std::to_string(i) + ": undeclared variable");
            if (!std::isfinite(t.coef))
                throw DomainError("row " + std::to_string(i) + ": coefficient not finite");
        }
    }
}

double max_violation(const LinearProgram& lp, const std::vector<double>& values) {
    double worst = 0;
    for (std::size_t j = 0; j < lp.num_variables(); ++j) {
        const auto& v = lp.variable(j);
        worst = std::max({worst, v.lower - values[j], values[j] - v.upper});
    }
    for (const auto& r : lp.rows()) {
        double act = 0;
        for (const auto& t : r.terms) act += t.coef * values[t.var];
        if (r.relation != Relation::GreaterEqual) worst = std::max(worst, act - r.rhs);
        if (r.relation != Relation::LessEqual) worst = std::max(worst, r.rhs - act);
    }
    return worst;
}

namespace {

enum class Status : unsigned char { Basic, AtLower, AtUpper, Free };

struct Eta {
    std::uint32_t row;
    double pivot;
    std::vector<std::pair<std::uint32_t, double>> entries;
};

using SpMat = Eigen::SparseMatrix<double>;

// Basis inverse as a sparse LU of the last refactorized basis plus an eta file.
class BasisFactor {
public:
    explicit BasisFactor(std::size_t m) : m_(m) {}

    bool factor(const SpMat& basis) {
        etas_.clear();
        lu_ = std::make_unique<Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>>();
        lu_->compute(basis);
        return lu_->info() == Eigen::Success;
    }

    void ftran(std::vector<double>& v) const {
        Eigen::Map<Eigen::VectorXd> b(v.data(), static_cast<Eigen::Index>(m_));
        Eigen::VectorXd x = lu_->solve(b);
        b = x;
        for (const auto& e : etas_) {
            const double xr = v[e.row] / e.pivot;
            v[e.row] = xr;
            if (xr == 0.0) continue;
            for (const auto& [i, a] : e.entries) v[i] -= a * xr;
        }
    }

    void btran(std::vector<double>& v) const {
        for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
            double acc = v[it->row];
            for (const auto& [i, a] : it->entries) acc -= a * v[i];
            v[it->row] = acc / it->pivot;
        }
        Eigen::Map<Eigen::VectorXd> b(v.data(), static_cast<Eigen::Index>(m_));
        Eigen::VectorXd y = lu_->transpose().solve(b);
        b = y;
    }

    void push_eta(std::uint32_t r, const std::vector<double>& alpha) {
        Eta e{r, alpha[r], {}};
        for (std::size_t i = 0; i < alpha.size(); ++i)
            if (i != r && std::abs(alpha[i]) > 1e-14) e.entries.emplace_back(static_cast<std::uint32_t>(i), alpha[i]);
        etas_.push_back(std::move(e));
    }

    std::size_t num_etas() const noexcept { return etas_.size(); }

private:
    std::size_t m_;
    std::unique_ptr<Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>> lu_;
    std::vector<Eta> etas_;
};

// Presolved problem in computational form: [A | -I] z = 0 with bounds on z.
struct Reduced {
    std::size_t m = 0, n = 0;
    std::vector<std::size_t> col_start;
    std::vector<std::uint32_t> row_index;
    std::vector<double> value;
    std::vector<double> lower, upper, cost; // size n + m
    std::vector<std::size_t> original;      // reduced structural -> original variable
    std::vector<double> fixed_value;        // per original variable (removed ones)
    std::vector<char> removed;
    double cost_offset = 0.0;
};

class Simplex {
public:
    Simplex(const Reduced& p, const LpOptions& opt, bool feasibility_only)
        : p_(p), opt_(opt), feasibility_only_(feasibility_only), m_(p.m), n_(p.n), lu_(p.m) {
        const std::size_t cols = n_ + m_;
        x_.assign(cols, 0.0);
        status_.assign(cols, Status::AtLower);
        position_.assign(cols, -1);
        head_.resize(m_);
        max_iter_ = opt.max_iterations ? opt.max_iterations : 50 * (cols + 1) + 10000;
    }

    void set_start(const Basis* warm, std::size_t orig_n) {
        for (std::size_t j = 0; j < n_ + m_; ++j) status_[j] = resting(j, false);
        bool ok = false;
        if (warm && warm->basic.size() == m_) {
            std::vector<std::int64_t> map(orig_n + m_, -1);
            for (std::size_t j = 0; j < n_; ++j) map[p_.original[j]] = static_cast<std::int64_t>(j);
            for (std::size_t i = 0; i < m_; ++i) map[orig_n + i] = static_cast<std::int64_t>(n_ + i);
            std::vector<char> used(n_ + m_, 0);
            std::vector<std::size_t> chosen;
            for (auto c : warm->basic) {
                if (c >= map.size() || map[c] < 0 || used[map[c]]) continue;
                used[map[c]] = 1;
                chosen.push_back(static_cast<std::size_t>(map[c]));
            }
            for (std::size_t i = 0; i < m_ && chosen.size() < m_; ++i)
                if (!used[n_ + i]) {
                    used[n_ + i] = 1;
                    chosen.push_back(n_ + i);
                }
            if (chosen.size() == m_) {
                for (std::size_t i = 0; i < m_; ++i) head_[i] = chosen[i];
                for (auto c : warm->at_upper)
                    if (c < map.size() && map[c] >= 0) status_[map[c]] = resting(map[c], true);
                ok = refactor();
            }
        }
        if (!ok) {
            for (std::size_t j = 0; j < n_ + m_; ++j) status_[j] = resting(j, false);
            for (std::size_t i = 0; i < m_; ++i) head_[i] = n_ + i;
            if (!refactor()) throw NumericalBreakdown("slack basis failed to factorize");
        }
        compute_primal();
    }

    LpStatus run() {
        int phase = 1;
        bool bland = false;
        std::size_t degenerate = 0;
        const std::size_t bland_after = 2 * (m_ + n_);
        std::vector<double> y(m_), alpha(m_), cb(m_);

        while (true) {
            if (iterations_ >= max_iter_) throw NumericalBreakdown("simplex iteration limit reached");
            if (lu_.num_etas() >= opt_.refactor_interval) {
                if (!refactor()) throw NumericalBreakdown("basis became singular");
                compute_primal();
            }

            // Basic costs for the current phase.
            bool infeasible = false;
            if (phase == 1) {
                for (std::size_t i = 0; i < m_; ++i) {
                    const std::size_t j = head_[i];
                    cb[i] = x_[j] < p_.lower[j] - opt_.bound_tolerance   ? -1.0
                            : x_[j] > p_.upper[j] + opt_.bound_tolerance ? 1.0
                                                                          : 0.0;
                    infeasible = infeasible || cb[i] != 0.0;
                }
                if (!infeasible) {
                    if (feasibility_only_) return LpStatus::Feasible;
                    phase = 2;
                    degenerate = 0;
                    bland = false;
                }
            }
            if (phase == 2)
                for (std::size_t i = 0; i < m_; ++i) cb[i] = p_.cost[head_[i]];

            y = cb;
            lu_.btran(y);
            y_ = y;

            // Pricing.
            std::size_t q = kNone;
            double best = 0.0;
            int dir = 0;
            for (std::size_t j = 0; j < n_ + m_; ++j) {
                if (status_[j] == Status::Basic) continue;
                if (p_.upper[j] - p_.lower[j] <= 0.0) continue;
                const double d = reduced_cost(j, y, phase);
                int want = 0;
                if (d < -opt_.optimality_tolerance && status_[j] != Status::AtUpper) want = 1;
                else if (d > opt_.optimality_tolerance && status_[j] != Status::AtLower) want = -1;
                if (!want) continue;
                if (bland) {
                    q = j;
                    dir = want;
                    break;
                }
                if (std::abs(d) > best) {
                    best = std::abs(d);
                    q = j;
                    dir = want;
                }
            }

            if (q == kNone) {
                if (lu_.num_etas() > 0) {
                    // Confirm with a fresh factorization before concluding.
                    if (!refactor()) throw NumericalBreakdown("basis became singular");
                    compute_primal();
                    continue;
                }
                if (phase == 1) {
                    if (max_infeasibility() <= opt_.feasibility_tolerance) {
                        if (feasibility_only_) return LpStatus::Feasible;
                        phase = 2;
                        continue;
                    }
                    return LpStatus::Infeasible;
                }
                return LpStatus::Optimal;
            }

            column(q, alpha);
            lu_.ftran(alpha);

            // Ratio test; basic i moves by -dir * alpha[i] per unit step.
            const double own_range = p_.upper[q] - p_.lower[q];
            std::size_t leave = kNone;
            double theta = kInf;
            bool leave_upper = false;
            if (bland) {
                for (std::size_t i = 0; i < m_; ++i) {
                    double bound;
                    bool to_upper;
                    if (!blocking(i, -dir * alpha[i], phase, 0.0, bound, to_upper)) continue;
                    const double delta = -dir * alpha[i];
                    const double t = std::max(0.0, (bound - x_[head_[i]]) / delta);
                    if (t < theta - 1e-12 || (t <= theta + 1e-12 && leave != kNone && head_[i] < head_[leave])) {
                        theta = t;
                        leave = i;
                        leave_upper = to_upper;
                    }
                }
            } else {
                double limit = kInf;
                for (std::size_t i = 0; i < m_; ++i) {
                    double bound;
                    bool to_upper;
                    const double delta = -dir * alpha[i];
                    if (!blocking(i, delta, phase, opt_.bound_tolerance, bound, to_upper)) continue;
                    const double relaxed = bound + (delta > 0 ? opt_.bound_tolerance : -opt_.bound_tolerance);
                    limit = std::min(limit, (relaxed - x_[head_[i]]) / delta);
                }
                double best_pivot = 0.0;
                if (limit < kInf) {
                    for (std::size_t i = 0; i < m_; ++i) {
                        double bound;
                        bool to_upper;
                        const double delta = -dir * alpha[i];
                        if (!blocking(i, delta, phase, opt_.bound_tolerance, bound, to_upper)) continue;
                        const double t = (bound - x_[head_[i]]) / delta;
                        if (t <= limit && std::abs(alpha[i]) > best_pivot) {
                            best_pivot = std::abs(alpha[i]);
                            leave = i;
                            leave_upper = to_upper;
                            theta = std::max(0.0, t);
                        }
                    }
                }
            }

            if (std::isfinite(own_range) && own_range <= theta) {
                // Bound flip: the entering variable crosses its own range.
                apply_step(q, dir, own_range, alpha);
                status_[q] = status_[q] == Status::AtUpper ? Status::AtLower : Status::AtUpper;
                x_[q] = status_[q] == Status::AtUpper ? p_.upper[q] : p_.lower[q];
                ++iterations_;
                degenerate = 0;
                bland = false;
                continue;
            }
            if (leave == kNone) {
                if (phase == 2) return LpStatus::Unbounded;
                throw NumericalBreakdown("phase one ray without blocking row");
            }
            if (std::abs(alpha[leave]) < opt_.pivot_tolerance) {
                if (lu_.num_etas() == 0) throw NumericalBreakdown("pivot below tolerance");
                if (!refactor()) throw NumericalBreakdown("basis became singular");
                compute_primal();
                continue;
            }

            apply_step(q, dir, theta, alpha);
            const std::size_t out = head_[leave];
            status_[out] = leave_upper ? Status::AtUpper : Status::AtLower;
            x_[out] = leave_upper ? p_.upper[out] : p_.lower[out];
            if (!std::isfinite(x_[out])) {
                status_[out] = Status::Free;
                x_[out] = 0.0;
            }
            position_[out] = -1;
            head_[leave] = q;
            position_[q] = static_cast<std::int64_t>(leave);
            status_[q] = Status::Basic;
            lu_.push_eta(static_cast<std::uint32_t>(leave), alpha);
            ++iterations_;

            if (theta < 1e-12) {
                if (++degenerate > bland_after) bland = true;
            } else {
                degenerate = 0;
                bland = false;
            }
        }
    }

    // Clean up after termination: fresh factorization and primal values.
    void finish() {
        if (refactor()) compute_primal();
    }

    const std::vector<double>& x() const noexcept { return x_; }
    const std::vector<double>& duals() const noexcept { return y_; }
    std::size_t iterations() const noexcept { return iterations_; }
    const std::vector<std::size_t>& head() const noexcept { return head_; }
    const std::vector<Status>& status() const noexcept { return status_; }

    double reduced_cost(std::size_t j, const std::vector<double>& y, int phase) const {
        const double c = phase == 2 ? p_.cost[j] : 0.0;
        if (j >= n_) return c + y[j - n_];
        double dot = 0;
        for (std::size_t k = p_.col_start[j]; k < p_.col_start[j + 1]; ++k)
            dot += y[p_.row_index[k]] * p_.value[k];
        return c - dot;
    }

private:
    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

    Status resting(std::size_t j, bool prefer_upper) const {
        const bool lo = std::isfinite(p_.lower[j]), hi = std::isfinite(p_.upper[j]);
        if (prefer_upper && hi) return Status::AtUpper;
        if (lo) return Status::AtLower;
        if (hi) return Status::AtUpper;
        return Status::Free;
    }

    void column(std::size_t j, std::vector<double>& out) const {
        std::fill(out.begin(), out.end(), 0.0);
        if (j >= n_) {
            out[j - n_] = -1.0;
            return;
        }
        for (std::size_t k = p_.col_start[j]; k < p_.col_start[j + 1]; ++k)
            out[p_.row_index[k]] = p_.value[k];
    }

    bool refactor() {
        std::vector<Eigen::Triplet<double>> trip;
        for (std::size_t i = 0; i < m_; ++i) {
            const std::size_t j = head_[i];
            if (j >= n_) {
                trip.emplace_back(static_cast<int>(j - n_), static_cast<int>(i), -1.0);
            } else {
                for (std::size_t k = p_.col_start[j]; k < p_.col_start[j + 1]; ++k)
                    trip.emplace_back(static_cast<int>(p_.row_index[k]), static_cast<int>(i), p_.value[k]);
            }
        }
        SpMat b(static_cast<int>(m_), static_cast<int>(m_));
        b.setFromTriplets(trip.begin(), trip.end());
        std::fill(position_.begin(), position_.end(), -1);
        for (std::size_t i = 0; i < m_; ++i) {
            position_[head_[i]] = static_cast<std::int64_t>(i);
            status_[head_[i]] = Status::Basic;
        }
        if (m_ == 0) return true;
        b.makeCompressed();
        return lu_.factor(b);
    }

    void compute_primal() {
        for (std::size_t j = 0; j < n_ + m_; ++j) {
            switch (status_[j]) {
            case Status::AtLower: x_[j] = p_.lower[j]; break;
            case Status::AtUpper: x_[j] = p_.upper[j]; break;
            case Status::Free: x_[j] = 0.0; break;
            case Status::Basic: break;
            }
        }
        // B x_B = -N x_N
        std::vector<double> rhs(m_, 0.0);
        for (std::size_t j = 0; j < n_; ++j) {
            if (status_[j] == Status::Basic || x_[j] == 0.0) continue;
            for (std::size_t k = p_.col_start[j]; k < p_.col_start[j + 1]; ++k)
                rhs[p_.row_index[k]] -= p_.value[k] * x_[j];
        }
        for (std::size_t i = 0; i < m_; ++i)
            if (status_[n_ + i] != Status::Basic) rhs[i] += x_[n_ + i];
        if (m_ == 0) return;
        lu_.ftran(rhs);
        for (std::size_t i = 0; i < m_; ++i) x_[head_[i]] = rhs[i];
    }

    double max_infeasibility() const {
        double worst = 0;
        for (std::size_t i = 0; i < m_; ++i) {
            const std::size_t j = head_[i];
            worst = std::max({worst, p_.lower[j] - x_[j], x_[j] - p_.upper[j]});
        }
        return worst;
    }

    // Whether basic i blocks when moving with rate `delta`, and at which bound.
    bool blocking(std::size_t i, double delta, int phase, double tol, double& bound,
                  bool& to_upper) const {
        if (std::abs(delta) <= 1e-9) return false;
        const std::size_t j = head_[i];
        const double v = x_[j], lo = p_.lower[j], hi = p_.upper[j];
        const bool below = phase == 1 && v < lo - tol;
        const bool above = phase == 1 && v > hi + tol;
        if (delta > 0) {
            if (above) return false;
            bound = below ? lo : hi;
            to_upper = !below;
        } else {
            if (below) return false;
            bound = above ? hi : lo;
            to_upper = above;
        }
        return std::isfinite(bound);
    }

    void apply_step(std::size_t q, int dir, double theta, const std::vector<double>& alpha) {
        if (theta == 0.0) return;
        x_[q] += dir * theta;
        for (std::size_t i = 0; i < m_; ++i)
            if (alpha[i] != 0.0) x_[head_[i]] -= dir * theta * alpha[i];
    }

    const Reduced& p_;
    const LpOptions& opt_;
    bool feasibility_only_;
    std::size_t m_, n_;
    BasisFactor lu_;
    std::vector<double> x_;
    std::vector<Status> status_;
    std::vector<std::int64_t> position_;
    std::vector<std::size_t> head_;
    std::vector<double> y_;
    std::size_t iterations_ = 0;
    std::size_t max_iter_ = 0;
};

Reduced presolve(const LinearProgram& lp, bool feasibility_only, LpStatus& early) {
    early = LpStatus::Optimal; // meaning "no early exit"
    const std::size_t n = lp.num_variables(), m = lp.num_rows();
    const double sign = lp.sense() == Sense::Maximize ? -1.0 : 1.0;
    Reduced r;
    r.m = m;
    r.removed.assign(n, 0);
    r.fixed_value.assign(n, 0.0);

    std::vector<std::size_t> count(n, 0);
    for (const auto& row : lp.rows())
        for (const auto& t : row.terms)
            if (t.coef != 0.0) ++count[t.var];

    for (std::size_t j = 0; j < n; ++j) {
        const auto& v = lp.variable(j);
        if (v.lower > v.upper) {
            early = LpStatus::Infeasible;
            return r;
        }
        const double c = feasibility_only ? 0.0 : sign * v.cost;
        if (v.lower == v.upper) {
            r.removed[j] = 1;
            r.fixed_value[j] = v.lower;
        } else if (count[j] == 0) {
            double val;
            if (c > 0) val = v.lower;
            else if (c < 0) val = v.upper;
            else val = std::isfinite(v.lower) ? v.lower : std::isfinite(v.upper) ? v.upper : 0.0;
            if (!std::isfinite(val)) {
                early = LpStatus::Unbounded;
                return r;
            }
            r.removed[j] = 1;
            r.fixed_value[j] = val;
        }
        if (r.removed[j]) r.cost_offset += c * r.fixed_value[j];
    }

    std::vector<std::size_t> reduced_index(n, 0);
    for (std::size_t j = 0; j < n; ++j)
        if (!r.removed[j]) {
            reduced_index[j] = r.original.size();
            r.original.push_back(j);
        }
    r.n = r.original.size();

    // Column-major copy of the kept coefficients; duplicates are summed.
    std::vector<std::vector<std::pair<std::uint32_t, double>>> cols(r.n);
    std::vector<double> shift(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (const auto& t : lp.row(i).terms) {
            if (t.coef == 0.0) continue;
            if (r.removed[t.var]) shift[i] += t.coef * r.fixed_value[t.var];
            else cols[reduced_index[t.var]].emplace_back(static_cast<std::uint32_t>(i), t.coef);
        }
    r.col_start.assign(r.n + 1, 0);
    for (std::size_t j = 0; j < r.n; ++j) {
        auto& c = cols[j];
        std::sort(c.begin(), c.end());
        std::size_t w = 0;
        for (std::size_t k = 0; k < c.size(); ++k) {
            if (w > 0 && c[w - 1].first == c[k].first) c[w - 1].second += c[k].second;
            else c[w++] = c[k];
        }
        c.resize(w);
        for (const auto& [row, val] : c) {
            if (val == 0.0) continue;
            r.row_index.push_back(row);
            r.value.push_back(val);
        }
        r.col_start[j + 1] = r.row_index.size();
    }

    r.lower.resize(r.n + m);
    r.upper.resize(r.n + m);
    r.cost.assign(r.n + m, 0.0);
    for (std::size_t j = 0; j < r.n; ++j) {
        const auto& v = lp.variable(r.original[j]);
        r.lower[j] = v.lower;
        r.upper[j] = v.upper;
        r.cost[j] = feasibility_only ? 0.0 : sign * v.cost;
    }
    // Row i: a_i x - r_i = 0 with r_i carrying the relation; fixed terms move into the bounds.
    for (std::size_t i = 0; i < m; ++i) {
        const auto& row = lp.row(i);
        const double b = row.rhs - shift[i];
        r.lower[r.n + i] = row.relation == Relation::LessEqual ? -kInf : b;
        r.upper[r.n + i] = row.relation == Relation::GreaterEqual ? kInf : b;
    }
    return r;
}

LpOutcome run_simplex(const LinearProgram& lp, const LpOptions& options, bool feasibility_only) {
    lp.validate();
    LpOutcome out;
    LpStatus early;
    Reduced r = presolve(lp, feasibility_only, early);
    const std::size_t n = lp.num_variables(), m = lp.num_rows();
    if (early != LpStatus::Optimal) {
        out.status = early;
        out.values.assign(n, 0.0);
        return out;
    }

    Simplex simplex(r, options, feasibility_only);
    simplex.set_start(options.warm_start, n);
    LpStatus status = simplex.run();
    simplex.finish();
    out.status = status;
    out.iterations = simplex.iterations();

    out.values.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        if (r.removed[j]) out.values[j] = r.fixed_value[j];
    const auto& x = simplex.x();
    for (std::size_t j = 0; j < r.n; ++j) {
        const auto& v = lp.variable(r.original[j]);
        double val = x[j];
        // Basic values may sit a ratio-test tolerance outside their bounds.
        if (val < v.lower && val > v.lower - 1e-6) val = v.lower;
        if (val > v.upper && val < v.upper + 1e-6) val = v.upper;
        out.values[r.original[j]] = val;
    }
    for (std::size_t i = 0; i < m; ++i)
        if (simplex.status()[r.n + i] == Status::AtUpper) out.basis.at_upper.push_back(static_cast<std::uint32_t>(n + i));
    for (std::size_t j = 0; j < r.n; ++j)
        if (simplex.status()[j] == Status::AtUpper) out.basis.at_upper.push_back(static_cast<std::uint32_t>(r.original[j]));
    for (std::size_t h : simplex.head())
        out.basis.basic.push_back(static_cast<std::uint32_t>(h < r.n ? r.original[h] : n + (h - r.n)));

    double obj = 0;
    for (std::size_t j = 0; j < n; ++j) obj += lp.variable(j).cost * out.values[j];
    out.objective = obj;

    if (status == LpStatus::Optimal || status == LpStatus::Feasible) {
        out.max_violation = max_violation(lp, out.values);
        if (out.max_violation > options.feasibility_tolerance)
            throw NumericalBreakdown("solution violates constraints by " +
                                     std::to_string(out.max_violation));
        if (feasibility_only) out.status = LpStatus::Feasible;
    }
    if (status == LpStatus::Optimal && !feasibility_only) {
        // Lagrangian bound: min over the box of (c - [A -I]^T y)^T z.
        const double sign = lp.sense() == Sense::Maximize ? -1.0 : 1.0;
        const auto& y = simplex.duals();
        double bound = r.cost_offset;
        for (std::size_t j = 0; j < r.n + m; ++j) {
            const double d = simplex.reduced_cost(j, y, 2);
            if (std::abs(d) <= 1e-12) continue;
            const double at = d > 0 ? r.lower[j] : r.upper[j];
            bound += d * at;
        }
        out.dual_bound = sign * bound;
    }
    return out;
}

} // namespace

LpOutcome solve(const LinearProgram& lp, const LpOptions& options) {
    return run_simplex(lp, options, false);
}

LpOutcome check_feasible(const LinearProgram& lp, const LpOptions& options) {
    return run_simplex(lp, options, true);
}

LpBackend default_lp_backend() {
    return [](const LinearProgram& lp, bool feasibility_only, const LpOptions& options) {
        return feasibility_only ? check_feasible(lp, options) : solve(lp, options);
    };
}

namespace {

std::string var_name(const LinearProgram& lp, std::size_t j) {
    const auto& name = lp.variable(j).name;
    return name.empty() ? "x" + std::to_string(j) : name;
}

void write_terms(std::ostream& out, const LinearProgram& lp, const std::vector<Term>& terms) {
    bool first = true;
    for (const auto& t : terms) {
        if (t.coef == 0.0) continue;
        out << (t.coef < 0 ? " - " : first ? " " : " + ") << std::abs(t.coef) << ' '
            << var_name(lp, t.var);
        first = false;
    }
    if (first) out << " 0 " << (lp.num_variables() ? var_name(lp, 0) : "x0");
}

} // namespace

void write_lp(const LinearProgram& lp, std::ostream& out) {
    const auto prec = out.precision(17);
    out << (lp.sense() == Sense::Maximize ? "Maximize\n" : "Minimize\n") << " obj:";
    std::vector<Term> obj;
    for (std::size_t j = 0; j < lp.num_variables(); ++j)
        if (lp.variable(j).cost != 0.0) obj.push_back({j, lp.variable(j).cost});
    write_terms(out, lp, obj);
    out << "\nSubject To\n";
    for (std::size_t i = 0; i < lp.num_rows(); ++i) {
        const auto& r = lp.row(i);
        out << ' ' << (r.name.empty() ? "c" + std::to_string(i) : r.name) << ':';
        write_terms(out, lp, r.terms);
        out << (r.relation == Relation::LessEqual ? " <= " : r.relation == Relation::Equal ? " = " : " >= ")
            << r.rhs << '\n';
    }
    out << "Bounds\n";
    for (std::size_t j = 0; j < lp.num_variables(); ++j) {
        const auto& v = lp.variable(j);
        const std::string name = var_name(lp, j);
        if (v.lower == -kInf && v.upper == kInf) out << ' ' << name << " free\n";
        else if (v.lower == v.upper) out << ' ' << name << " = " << v.lower << '\n';
        else if (v.upper == kInf) out << ' ' << name << " >= " << v.lower << '\n';
        else if (v.lower == -kInf) out << " -inf <= " << name << " <= " << v.upper << '\n';
        else out << ' ' << v.lower << " <= " << name << " <= " << v.upper << '\n';
    }
    out << "End\n";
    out.precision(prec);
}

} // namespace sharedctl

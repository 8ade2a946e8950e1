#include "treedist/lp.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <Eigen/SparseQR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "treedist/errors.hpp"

namespace treedist {

double LinearProgram::residual(const std::vector<double>& x) const {
    std::vector<double> ax(num_rows(), 0.0);
    for (const auto& e : entries_) ax[e.row] += e.value * x.at(e.col);
    double worst = 0.0;
    for (std::size_t i = 0; i < num_rows(); ++i) worst = std::max(worst, std::abs(ax[i] - rhs_[i]));
    return worst;
}

std::string to_string(LpStatus s) {
    switch (s) {
        case LpStatus::optimal: return "optimal";
        case LpStatus::infeasible: return "infeasible";
        case LpStatus::unbounded: return "unbounded";
        case LpStatus::iteration_limit: return "iteration_limit";
    }
    return "unknown";
}

namespace {

// Tableau over the structural columns only. Artificial variable i is the
// virtual column n + i; artificials never re-enter once they leave, so their
// columns are not stored.
class Tableau {
public:
    Tableau(const LinearProgram& lp, const std::vector<double>& rhs, const LpOptions& opt)
        : opt_(opt), m_(lp.num_rows()), n_(lp.num_vars()), width_(n_ + 1), cells_(m_ * width_, 0.0),
          z_(width_, 0.0), basis_(m_) {
        std::vector<double> sign(m_, 1.0);
        for (std::size_t i = 0; i < m_; ++i) {
            if (rhs[i] < 0.0) sign[i] = -1.0;
            at(i, n_) = sign[i] * rhs[i];
            basis_[i] = n_ + i;
        }
        for (const auto& e : lp.entries()) {
            if (e.row >= m_ || e.col >= n_) throw ValidationError("LP entry out of range");
            at(e.row, e.col) += sign[e.row] * e.value;
        }
    }

    [[nodiscard]] std::size_t rows() const { return m_; }
    [[nodiscard]] const std::vector<std::size_t>& basis() const { return basis_; }
    [[nodiscard]] double rhs(std::size_t i) const { return cell(i, n_); }
    [[nodiscard]] double objective() const { return -z_[n_]; }
    std::size_t iterations = 0;

    void load_phase1_costs() {
        std::fill(z_.begin(), z_.end(), 0.0);
        for (std::size_t i = 0; i < m_; ++i)
            if (basis_[i] >= n_)
                for (std::size_t j = 0; j <= n_; ++j) z_[j] -= cell(i, j);
    }

    void load_phase2_costs(const std::vector<double>& c) {
        std::fill(z_.begin(), z_.end(), 0.0);
        for (std::size_t j = 0; j < n_; ++j) z_[j] = c[j];
        for (std::size_t i = 0; i < m_; ++i) {
            const std::size_t b = basis_[i];
            if (b >= n_ || c[b] == 0.0) continue;
            for (std::size_t j = 0; j <= n_; ++j) z_[j] -= c[b] * cell(i, j);
        }
    }

    // Runs simplex iterations on the current cost row.
    LpStatus optimize() {
        std::size_t degenerate_streak = 0;
        bool bland = false;
        std::vector<char> is_basic(n_, 0);
        for (auto b : basis_)
            if (b < n_) is_basic[b] = 1;

        while (true) {
            if (iterations >= opt_.max_iterations) return LpStatus::iteration_limit;

            std::size_t q = n_;
            double best = -opt_.optimality_tol;
            for (std::size_t j = 0; j < n_; ++j) {
                if (is_basic[j] || z_[j] >= best) continue;
                q = j;
                if (bland) break;
                best = z_[j];
            }
            if (q == n_) return LpStatus::optimal;

            std::size_t r = m_;
            double min_ratio = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < m_; ++i) {
                const double a = cell(i, q);
                if (a <= opt_.pivot_tol) continue;
                const double ratio = std::max(0.0, rhs(i)) / a;
                if (r == m_ || ratio < min_ratio - 1e-13) {
                    r = i;
                    min_ratio = ratio;
                } else if (ratio <= min_ratio + 1e-13) {
                    const bool better = bland ? basis_[i] < basis_[r] : a > cell(r, q);
                    if (better) {
                        r = i;
                        min_ratio = std::min(min_ratio, ratio);
                    }
                }
            }
            if (r == m_) return LpStatus::unbounded;

            // Once Bland's rule is on it stays on for the rest of the phase.
            if (min_ratio <= 1e-11) {
                if (++degenerate_streak > opt_.bland_after) bland = true;
            } else {
                degenerate_streak = 0;
            }
            if (basis_[r] < n_) is_basic[basis_[r]] = 0;
            pivot(r, q);
            is_basic[q] = 1;
        }
    }

    // Pivots artificials out of the basis where some structural column allows it.
    // Returns the number of rows left covered by an artificial (linearly dependent rows).
    std::size_t expel_artificials() {
        std::size_t redundant = 0;
        std::vector<char> is_basic(n_, 0);
        for (auto b : basis_)
            if (b < n_) is_basic[b] = 1;
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] < n_) continue;
            std::size_t q = n_;
            double best = 1e-9;
            for (std::size_t j = 0; j < n_; ++j) {
                if (is_basic[j]) continue;
                if (std::abs(cell(i, j)) > best) {
                    best = std::abs(cell(i, j));
                    q = j;
                }
            }
            if (q == n_) {
                ++redundant;
                continue;
            }
            pivot(i, q);
            is_basic[q] = 1;
        }
        return redundant;
    }

private:
    double& at(std::size_t i, std::size_t j) { return cells_[i * width_ + j]; }
    [[nodiscard]] double cell(std::size_t i, std::size_t j) const { return cells_[i * width_ + j]; }

    void pivot(std::size_t r, std::size_t q) {
        ++iterations;
        const double inv = 1.0 / cell(r, q);
        nz_.clear();
        for (std::size_t j = 0; j <= n_; ++j) {
            double& v = at(r, j);
            if (v == 0.0) continue;
            v *= inv;
            nz_.push_back(j);
        }
        at(r, q) = 1.0;
        auto eliminate = [&](double* row) {
            const double f = row[q];
            if (f == 0.0) return;
            const double* src = &cells_[r * width_];
            for (auto j : nz_) row[j] -= f * src[j];
            row[q] = 0.0;
        };
        for (std::size_t i = 0; i < m_; ++i)
            if (i != r) eliminate(&cells_[i * width_]);
        eliminate(z_.data());
        basis_[r] = q;
    }

    const LpOptions& opt_;
    std::size_t m_;
    std::size_t n_;
    std::size_t width_;
    std::vector<double> cells_;
    std::vector<double> z_;
    std::vector<std::size_t> basis_;
    std::vector<std::size_t> nz_;
};

// Recomputes the basic solution B x_B = b from the original matrix.
bool polish(const LinearProgram& lp, const std::vector<std::size_t>& basis, std::vector<double>& x) {
    const std::size_t m = lp.num_rows();
    const std::size_t n = lp.num_vars();
    std::vector<std::ptrdiff_t> slot(n, -1);
    for (std::size_t i = 0; i < m; ++i)
        if (basis[i] < n) slot[basis[i]] = static_cast<std::ptrdiff_t>(i);

    std::vector<Eigen::Triplet<double>> triplets;
    for (const auto& e : lp.entries())
        if (slot[e.col] >= 0) triplets.emplace_back(static_cast<int>(e.row), static_cast<int>(slot[e.col]), e.value);
    for (std::size_t i = 0; i < m; ++i)
        if (basis[i] >= n) triplets.emplace_back(static_cast<int>(basis[i] - n), static_cast<int>(i), 1.0);

    Eigen::SparseMatrix<double> B(static_cast<int>(m), static_cast<int>(m));
    B.setFromTriplets(triplets.begin(), triplets.end());
    B.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(B);
    if (lu.info() != Eigen::Success) return false;
    Eigen::VectorXd b(static_cast<int>(m));
    for (std::size_t i = 0; i < m; ++i) b[static_cast<int>(i)] = lp.rhs()[i];
    Eigen::VectorXd xb = lu.solve(b);
    if (lu.info() != Eigen::Success || !xb.allFinite()) return false;

    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const double v = xb[static_cast<int>(i)];
        if (basis[i] >= n) {
            if (std::abs(v) > 1e-9) return false;  // artificial must stay at zero
            continue;
        }
        if (v < -1e-9) return false;
        out[basis[i]] = std::max(0.0, v);
    }
    x = std::move(out);
    return true;
}

}  // namespace

namespace {

// Two phases on the given right-hand side. With `exact_rhs` false the basic
// values come only from the polish against lp.rhs(); a basis that is not
// primal feasible there is reported as iteration_limit so the caller retries.
LpSolution two_phase(const LinearProgram& lp, const std::vector<double>& rhs, bool exact_rhs,
                     const LpOptions& options) {
    LpSolution sol;
    const std::size_t n = lp.num_vars();
    Tableau tab(lp, rhs, options);
    tab.load_phase1_costs();
    auto status = tab.optimize();
    if (status == LpStatus::iteration_limit) {
        sol.status = status;
        sol.iterations = tab.iterations;
        return sol;
    }
    double bnorm = 1.0;
    for (double b : rhs) bnorm = std::max(bnorm, std::abs(b));
    if (tab.objective() > options.feasibility_tol * bnorm) {
        sol.status = LpStatus::infeasible;
        sol.iterations = tab.iterations;
        return sol;
    }
    sol.redundant_rows = tab.expel_artificials();

    tab.load_phase2_costs(lp.objective());
    status = tab.optimize();
    sol.iterations = tab.iterations;
    sol.status = status;
    if (status != LpStatus::optimal) return sol;

    sol.x.assign(n, 0.0);
    for (std::size_t i = 0; i < tab.rows(); ++i)
        if (tab.basis()[i] < n) sol.x[tab.basis()[i]] = std::max(0.0, tab.rhs(i));
    std::vector<double> polished = sol.x;
    const bool ok = polish(lp, tab.basis(), polished);
    if (exact_rhs) {
        if (ok && lp.residual(polished) <= lp.residual(sol.x) + 1e-12) sol.x = std::move(polished);
    } else {
        if (!ok || lp.residual(polished) > options.feasibility_tol * bnorm) {
            sol.status = LpStatus::iteration_limit;
            return sol;
        }
        sol.x = std::move(polished);
    }

    sol.objective = 0.0;
    for (std::size_t j = 0; j < n; ++j) sol.objective += lp.objective()[j] * sol.x[j];
    return sol;
}

}  // namespace

namespace {

// Indices of a maximal linearly independent subset of the rows of A.
std::vector<std::size_t> independent_rows(const LinearProgram& lp) {
    const int m = static_cast<int>(lp.num_rows());
    const int n = static_cast<int>(lp.num_vars());
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(lp.entries().size());
    for (const auto& e : lp.entries())
        triplets.emplace_back(static_cast<int>(e.col), static_cast<int>(e.row), e.value);
    Eigen::SparseMatrix<double> at(n, m);
    at.setFromTriplets(triplets.begin(), triplets.end());
    at.makeCompressed();
    Eigen::SparseQR<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> qr;
    qr.setPivotThreshold(1e-9);
    qr.compute(at);
    std::vector<std::size_t> keep;
    if (qr.info() != Eigen::Success) {
        for (int i = 0; i < m; ++i) keep.push_back(static_cast<std::size_t>(i));
        return keep;
    }
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = 0; k < qr.rank(); ++k) keep.push_back(static_cast<std::size_t>(perm[k]));
    std::sort(keep.begin(), keep.end());
    return keep;
}

LpSolution solve_full_rank(const LinearProgram& lp, const LpOptions& options) {
    // First attempt on b + A*delta with a small positive delta: the shift keeps
    // the system consistent and, with independent rows, makes every vertex
    // nondegenerate in practice.
    double bnorm = 1.0;
    for (double b : lp.rhs()) bnorm = std::max(bnorm, std::abs(b));
    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> u(0.5, 1.0);
    std::vector<double> shifted = lp.rhs();
    std::vector<double> delta(lp.num_vars());
    for (auto& d : delta) d = 1e-7 * bnorm * u(rng);
    for (const auto& e : lp.entries()) shifted[e.row] += e.value * delta[e.col];

    auto sol = two_phase(lp, shifted, false, options);
    if (sol.status == LpStatus::optimal) return sol;
    const std::size_t spent = sol.iterations;
    sol = two_phase(lp, lp.rhs(), true, options);
    sol.iterations += spent;
    return sol;
}

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, const LpOptions& options) {
    const std::size_t n = lp.num_vars();
    const std::size_t m = lp.num_rows();
    if (m == 0) {
        // Only x >= 0: the optimum is x = 0 unless some cost is negative.
        LpSolution sol;
        sol.x.assign(n, 0.0);
        sol.status = LpStatus::optimal;
        for (double c : lp.objective())
            if (c < 0.0) sol.status = LpStatus::unbounded;
        return sol;
    }

    const auto keep = independent_rows(lp);
    if (keep.size() == m) return solve_full_rank(lp, options);

    std::vector<std::ptrdiff_t> row_map(m, -1);
    LinearProgram core(n);
    for (auto i : keep) row_map[i] = static_cast<std::ptrdiff_t>(core.add_row(lp.rhs()[i]));
    for (const auto& e : lp.entries())
        if (row_map[e.row] >= 0) core.add(static_cast<std::size_t>(row_map[e.row]), e.col, e.value);
    for (std::size_t j = 0; j < n; ++j) core.set_cost(j, lp.objective()[j]);

    LpSolution sol;
    if (keep.empty()) {
        sol = solve_lp(core, options);
    } else {
        sol = solve_full_rank(core, options);
    }
    sol.redundant_rows += m - keep.size();
    if (sol.status != LpStatus::optimal) return sol;

    // Dropped rows are combinations of kept ones only if b agrees.
    double bnorm = 1.0;
    for (double b : lp.rhs()) bnorm = std::max(bnorm, std::abs(b));
    if (lp.residual(sol.x) > options.feasibility_tol * bnorm) {
        sol.status = LpStatus::infeasible;
        sol.x.clear();
        sol.objective = 0.0;
    }
    return sol;
}

}  // namespace treedist

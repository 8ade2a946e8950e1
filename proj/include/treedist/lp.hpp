#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace treedist {

/// Equality-form linear program: min c'x  s.t.  A x = b,  x >= 0.
/// The constraint matrix is kept as (row, col, value) triplets; repeated
/// entries for the same cell are summed.
class LinearProgram {
public:
    explicit LinearProgram(std::size_t num_vars) : objective_(num_vars, 0.0) {}

    std::size_t add_row(double rhs) {
        rhs_.push_back(rhs);
        return rhs_.size() - 1;
    }
    void add(std::size_t row, std::size_t col, double value) { entries_.push_back({row, col, value}); }
    void set_cost(std::size_t col, double cost) { objective_.at(col) = cost; }

    struct Entry {
        std::size_t row;
        std::size_t col;
        double value;
    };

    [[nodiscard]] std::size_t num_vars() const { return objective_.size(); }
    [[nodiscard]] std::size_t num_rows() const { return rhs_.size(); }
    [[nodiscard]] const std::vector<double>& objective() const { return objective_; }
    [[nodiscard]] const std::vector<double>& rhs() const { return rhs_; }
    [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }

    /// max_i |(A x - b)_i|
    [[nodiscard]] double residual(const std::vector<double>& x) const;

private:
    std::vector<double> objective_;
    std::vector<double> rhs_;
    std::vector<Entry> entries_;
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

std::string to_string(LpStatus s);

struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    std::vector<double> x;
    double objective = 0.0;
    std::size_t iterations = 0;
    std::size_t redundant_rows = 0;
};

struct LpOptions {
    double feasibility_tol = 1e-9;
    double optimality_tol = 1e-11;
    double pivot_tol = 1e-11;
    std::size_t max_iterations = 2'000'000;
    /// Consecutive degenerate pivots tolerated before switching to Bland's rule
    /// for the rest of the phase.
    std::size_t bland_after = 64;
};

/// Two-phase dense tableau simplex. Phase I uses one artificial per row;
/// rows that stay covered by an artificial after phase I are reported as
/// redundant. The final basis is re-solved from the original data by sparse
/// LU so the returned x does not carry accumulated tableau round-off.
LpSolution solve_lp(const LinearProgram& lp, const LpOptions& options = {});

}  // namespace treedist

#include "treedist/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "treedist/errors.hpp"
#include "treedist/lp.hpp"

namespace treedist {

double TransportPlan::marginal_residual(const std::vector<double>& supply, const std::vector<double>& demand) const {
    double worst = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += at(i, j);
        worst = std::max(worst, std::abs(s - supply.at(i)));
    }
    for (std::size_t j = 0; j < cols; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < rows; ++i) s += at(i, j);
        worst = std::max(worst, std::abs(s - demand.at(j)));
    }
    return worst;
}

namespace {

void check_problem(const TransportProblem& pb) {
    if (pb.supply.size() != pb.rows || pb.demand.size() != pb.cols || pb.cost.size() != pb.rows * pb.cols)
        throw ValidationError("transport problem has inconsistent dimensions");
    if (pb.rows == 0 || pb.cols == 0) throw ValidationError("transport problem is empty");
    for (double s : pb.supply)
        if (!(s >= 0.0) || !std::isfinite(s)) throw ValidationError("transport supply must be nonnegative");
    for (double d : pb.demand)
        if (!(d >= 0.0) || !std::isfinite(d)) throw ValidationError("transport demand must be nonnegative");
    for (double c : pb.cost)
        if (!(c >= 0.0) || !std::isfinite(c)) throw ValidationError("transport costs must be finite and nonnegative");
}

struct Cell {
    std::size_t i;
    std::size_t j;
    double flow;
};

// Primal transportation simplex on strictly positive supplies and demands.
class TransportSimplex {
public:
    TransportSimplex(std::size_t m, std::size_t n, std::vector<double> cost, std::vector<double> supply,
                     std::vector<double> demand)
        : m_(m), n_(n), cost_(std::move(cost)), u_(m), v_(n), row_adj_(m), col_adj_(n) {
        northwest_corner(std::move(supply), std::move(demand));
        double cmax = 0.0;
        for (double c : cost_) cmax = std::max(cmax, c);
        eps_ = 1e-12 * std::max(1.0, cmax);
    }

    std::size_t run() {
        std::size_t pivots = 0;
        std::size_t degenerate_streak = 0;
        bool bland = false;
        while (true) {
            rebuild_adjacency();
            compute_potentials();
            std::size_t ei = m_, ej = n_;
            double best = -eps_;
            for (std::size_t i = 0; i < m_ && !(bland && ei < m_); ++i) {
                for (std::size_t j = 0; j < n_; ++j) {
                    const double rc = cost_[i * n_ + j] - u_[i] - v_[j];
                    if (rc < best) {
                        ei = i;
                        ej = j;
                        if (bland) break;
                        best = rc;
                    }
                }
            }
            if (ei == m_) return pivots;

            // Cycle: entering cell (+), then the tree path from row ei to column ej,
            // whose edges alternate -, +, -, ..., -.
            const auto path = tree_path(ei, m_ + ej);
            std::size_t leave = path.front();
            double theta = basis_[leave].flow;
            for (std::size_t k = 0; k < path.size(); k += 2) {
                const auto& c = basis_[path[k]];
                const bool tie = c.flow == theta;
                if (c.flow < theta || (tie && bland && index(c) < index(basis_[leave]))) {
                    theta = c.flow;
                    leave = path[k];
                }
            }
            for (std::size_t k = 0; k < path.size(); ++k) {
                auto& c = basis_[path[k]];
                c.flow += (k % 2 == 0) ? -theta : theta;
            }
            basis_[leave] = Cell{ei, ej, theta};
            ++pivots;

            if (theta <= 0.0) {
                if (++degenerate_streak > 64) bland = true;
            } else {
                degenerate_streak = 0;
                bland = false;
            }
        }
    }

    [[nodiscard]] const std::vector<Cell>& basis() const { return basis_; }

private:
    [[nodiscard]] std::size_t index(const Cell& c) const { return c.i * n_ + c.j; }

    void northwest_corner(std::vector<double> s, std::vector<double> d) {
        std::size_t i = 0, j = 0;
        basis_.reserve(m_ + n_ - 1);
        while (true) {
            const double x = std::min(s[i], d[j]);
            basis_.push_back(Cell{i, j, x});
            s[i] -= x;
            d[j] -= x;
            if (i == m_ - 1 && j == n_ - 1) break;
            if (i == m_ - 1) {
                ++j;
            } else if (j == n_ - 1) {
                ++i;
            } else if (s[i] <= d[j]) {
                ++i;
            } else {
                ++j;
            }
        }
    }

    void rebuild_adjacency() {
        for (auto& a : row_adj_) a.clear();
        for (auto& a : col_adj_) a.clear();
        for (std::size_t b = 0; b < basis_.size(); ++b) {
            row_adj_[basis_[b].i].push_back(b);
            col_adj_[basis_[b].j].push_back(b);
        }
    }

    void compute_potentials() {
        // Tree nodes: rows 0..m-1, columns m..m+n-1.
        std::vector<char> seen(m_ + n_, 0);
        std::vector<std::size_t> queue{0};
        u_[0] = 0.0;
        seen[0] = 1;
        for (std::size_t h = 0; h < queue.size(); ++h) {
            const std::size_t node = queue[h];
            if (node < m_) {
                for (auto b : row_adj_[node]) {
                    const auto& c = basis_[b];
                    if (seen[m_ + c.j]) continue;
                    v_[c.j] = cost_[index(c)] - u_[c.i];
                    seen[m_ + c.j] = 1;
                    queue.push_back(m_ + c.j);
                }
            } else {
                for (auto b : col_adj_[node - m_]) {
                    const auto& c = basis_[b];
                    if (seen[c.i]) continue;
                    u_[c.i] = cost_[index(c)] - v_[c.j];
                    seen[c.i] = 1;
                    queue.push_back(c.i);
                }
            }
        }
    }

    // Basis cells on the tree path between two nodes, ordered from `from`.
    std::vector<std::size_t> tree_path(std::size_t from, std::size_t to) {
        constexpr auto none = static_cast<std::size_t>(-1);
        std::vector<std::size_t> via(m_ + n_, none);
        std::vector<char> seen(m_ + n_, 0);
        std::vector<std::size_t> queue{from};
        seen[from] = 1;
        for (std::size_t h = 0; h < queue.size() && !seen[to]; ++h) {
            const std::size_t node = queue[h];
            const auto& adj = node < m_ ? row_adj_[node] : col_adj_[node - m_];
            for (auto b : adj) {
                const auto& c = basis_[b];
                const std::size_t other = node < m_ ? m_ + c.j : c.i;
                if (seen[other]) continue;
                seen[other] = 1;
                via[other] = b;
                queue.push_back(other);
            }
        }
        std::vector<std::size_t> path;
        for (std::size_t node = to; node != from;) {
            const auto b = via[node];
            path.push_back(b);
            node = node < m_ ? m_ + basis_[b].j : basis_[b].i;
        }
        std::reverse(path.begin(), path.end());
        return path;
    }

    std::size_t m_, n_;
    std::vector<double> cost_;
    std::vector<double> u_, v_;
    std::vector<Cell> basis_;
    std::vector<std::vector<std::size_t>> row_adj_, col_adj_;
    double eps_ = 0.0;
};

}  // namespace

TransportPlan solve_transport(const TransportProblem& problem) {
    check_problem(problem);
    const double total_supply = std::accumulate(problem.supply.begin(), problem.supply.end(), 0.0);
    const double total_demand = std::accumulate(problem.demand.begin(), problem.demand.end(), 0.0);
    if (std::abs(total_supply - total_demand) > kBalanceTolerance) {
        std::ostringstream os;
        os.precision(17);
        os << "unbalanced transport problem: supply " << total_supply << " vs demand " << total_demand
           << " (residual " << total_supply - total_demand << ")";
        throw InfeasibleError(os.str());
    }

    TransportPlan plan;
    plan.rows = problem.rows;
    plan.cols = problem.cols;
    plan.flow.assign(problem.rows * problem.cols, 0.0);

    std::vector<std::size_t> live_rows, live_cols;
    for (std::size_t i = 0; i < problem.rows; ++i)
        if (problem.supply[i] > 0.0) live_rows.push_back(i);
    for (std::size_t j = 0; j < problem.cols; ++j)
        if (problem.demand[j] > 0.0) live_cols.push_back(j);
    if (live_rows.empty() || live_cols.empty()) return plan;  // no mass to move

    const double scale = total_supply / total_demand;
    const std::size_t m = live_rows.size(), n = live_cols.size();
    std::vector<double> cost(m * n), supply(m), demand(n);
    for (std::size_t a = 0; a < m; ++a) {
        supply[a] = problem.supply[live_rows[a]];
        for (std::size_t b = 0; b < n; ++b) cost[a * n + b] = problem.c(live_rows[a], live_cols[b]);
    }
    for (std::size_t b = 0; b < n; ++b) demand[b] = problem.demand[live_cols[b]] * scale;

    TransportSimplex simplex(m, n, std::move(cost), std::move(supply), std::move(demand));
    plan.pivots = simplex.run();
    for (const auto& c : simplex.basis()) {
        const std::size_t i = live_rows[c.i], j = live_cols[c.j];
        plan.flow[i * plan.cols + j] += std::max(0.0, c.flow);
    }
    for (std::size_t i = 0; i < plan.rows; ++i)
        for (std::size_t j = 0; j < plan.cols; ++j) plan.value += problem.c(i, j) * plan.at(i, j);
    return plan;
}

double solve_transport_as_lp(const TransportProblem& problem, bool with_total_mass_row) {
    check_problem(problem);
    LinearProgram lp(problem.rows * problem.cols);
    for (std::size_t i = 0; i < problem.rows; ++i)
        for (std::size_t j = 0; j < problem.cols; ++j) lp.set_cost(i * problem.cols + j, problem.c(i, j));
    for (std::size_t i = 0; i < problem.rows; ++i) {
        const auto r = lp.add_row(problem.supply[i]);
        for (std::size_t j = 0; j < problem.cols; ++j) lp.add(r, i * problem.cols + j, 1.0);
    }
    for (std::size_t j = 0; j < problem.cols; ++j) {
        const auto r = lp.add_row(problem.demand[j]);
        for (std::size_t i = 0; i < problem.rows; ++i) lp.add(r, i * problem.cols + j, 1.0);
    }
    if (with_total_mass_row) {
        const auto r = lp.add_row(std::accumulate(problem.supply.begin(), problem.supply.end(), 0.0));
        for (std::size_t k = 0; k < problem.rows * problem.cols; ++k) lp.add(r, k, 1.0);
    }
    const auto sol = solve_lp(lp);
    if (sol.status != LpStatus::optimal)
        throw InfeasibleError("transport LP not solved: " + to_string(sol.status));
    return sol.objective;
}

TransportProblem make_transport_problem(const StageMarginal& p, const StageMarginal& q,
                                        const StagewiseMetric& metric, int stage) {
    TransportProblem pb;
    pb.rows = p.size();
    pb.cols = q.size();
    pb.supply = p.probs;
    pb.demand = q.probs;
    pb.cost.resize(pb.rows * pb.cols);
    for (std::size_t i = 0; i < pb.rows; ++i)
        for (std::size_t j = 0; j < pb.cols; ++j)
            pb.cost[i * pb.cols + j] = ground_distance_p(metric, stage, p.points[i], q.points[j]);
    return pb;
}

double wasserstein_p(const StageMarginal& p, const StageMarginal& q, const StagewiseMetric& metric, int stage) {
    check_marginal(p);
    check_marginal(q);
    return solve_transport(make_transport_problem(p, q, metric, stage)).value;
}

}  // namespace treedist

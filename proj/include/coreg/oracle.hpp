#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coreg/circumferential.hpp"
#include "coreg/matrix.hpp"

// Exhaustive reference implementations for the two dynamic programs. They
// enumerate every admissible solution instead of sharing any recurrence
// with the production code, so tests can assert exact agreement. Only tiny
// instances are accepted; anything bigger is a usage error.

namespace coreg {

class InstanceTooLarge : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BruteForceDtwResult {
    double cost = 0.0;
    std::vector<std::pair<int, int>> path;
};

namespace oracle_detail {

struct DtwSearch {
    const Matrix* D;
    int n, m;
    // One char per forward edge: '2' diagonal, '1' down (i+1), '0' right
    // (j+1). The backward step sequence is this buffer reversed.
    std::vector<char> steps;
    std::vector<char> best_steps;
    double best_cost = 0.0;
    bool have_best = false;

    /// Candidate ordering: lower cost wins; equal cost resolves to the
    /// lexicographically greatest BACKWARD step sequence under
    /// diagonal('2') > up('1') > left('0'), which is exactly the path a
    /// cost-matrix backtrace with that tie preference produces.
    void offer(double cost) {
        if (!have_best || cost < best_cost) {
            have_best = true;
            best_cost = cost;
            best_steps.assign(steps.begin(), steps.end());
            return;
        }
        if (cost > best_cost) return;
        const std::size_t len_c = steps.size(), len_b = best_steps.size();
        for (std::size_t k = 0;; ++k) {
            if (k >= len_c || k >= len_b) break;  // never a strict prefix; equal so far
            const char c = steps[len_c - 1 - k];
            const char b = best_steps[len_b - 1 - k];
            if (c == b) continue;
            if (c > b) {
                best_cost = cost;
                best_steps.assign(steps.begin(), steps.end());
            }
            return;
        }
    }

    void visit(int i, int j, double acc) {
        if (have_best && acc > best_cost) return;  // paths only grow (D >= 0)
        if (i == n - 1 && j == m - 1) {
            offer(acc);
            return;
        }
        if (i + 1 < n && j + 1 < m) {
            steps.push_back('2');
            visit(i + 1, j + 1, (*D)(i + 1, j + 1) + acc);
            steps.pop_back();
        }
        if (i + 1 < n) {
            steps.push_back('1');
            visit(i + 1, j, (*D)(i + 1, j) + acc);
            steps.pop_back();
        }
        if (j + 1 < m) {
            steps.push_back('0');
            visit(i, j + 1, (*D)(i, j + 1) + acc);
            steps.pop_back();
        }
    }
};

}  // namespace oracle_detail

/// Enumerates every monotone path from (0,0) to (n-1,m-1) and returns the
/// global minimum cost with one optimal path. Costs accumulate front to
/// back as D[step] + running_sum, mirroring how a cumulative-cost table
/// folds the same additions, so agreement can be asserted bit for bit.
inline BruteForceDtwResult brute_force_dtw(const Matrix& D) {
    const int n = static_cast<int>(D.rows()), m = static_cast<int>(D.cols());
    if (n < 1 || m < 1) throw InstanceTooLarge("empty distance matrix");
    if (n > 8 || m > 8) {
        throw InstanceTooLarge("brute_force_dtw accepts at most 8x8, got " +
                               std::to_string(n) + "x" + std::to_string(m));
    }
    oracle_detail::DtwSearch s;
    s.D = &D;
    s.n = n;
    s.m = m;
    s.visit(0, 0, D(0, 0));

    BruteForceDtwResult r;
    r.cost = s.best_cost;
    int i = 0, j = 0;
    r.path.emplace_back(0, 0);
    for (char c : s.best_steps) {
        if (c == '2') {
            ++i;
            ++j;
        } else if (c == '1') {
            ++i;
        } else {
            ++j;
        }
        r.path.emplace_back(i, j);
    }
    return r;
}

/// Exhaustive rotation search: tries every feasible bin tuple and keeps
/// the best score. The score is accumulated row by row as
/// R[a][bin] + (running - lambda*d*d), the same association the dynamic
/// program uses, so scores match bit for bit. Equal-score tuples are
/// ranked the way a row-by-row backtrace ranks them: the smaller final
/// bin wins, and walking backward from the last row the smaller angular
/// change wins, then the smaller bin index.
inline std::vector<int> brute_force_rotation(const RotationCostMatrix& R,
                                             double lambda,
                                             double delta_max_deg_per_mm,
                                             const std::vector<double>& positions_mm) {
    const int A = static_cast<int>(R.anchors());
    const int bins = static_cast<int>(R.bins());
    if (A < 1) return {};
    if (A > 5 || bins > 12) {
        throw InstanceTooLarge("brute_force_rotation accepts at most 5 anchors x 12 bins");
    }
    const double bin_deg = 360.0 / static_cast<double>(bins);
    std::vector<int> max_d(A, 0);
    for (int a = 1; a < A; ++a) {
        const double cap_deg =
            delta_max_deg_per_mm * std::abs(positions_mm[a] - positions_mm[a - 1]);
        max_d[a] = std::min(static_cast<int>(std::floor(cap_deg / bin_deg + 1e-9)),
                            bins / 2);
    }

    std::vector<int> current(A), best;
    double best_score = 0.0;
    bool have_best = false;

    auto circ_diff = [bins](int a, int b) {
        int d = std::abs(a - b);
        return std::min(d, bins - d);
    };

    // True when `cand` outranks `best` under the backtrace tie order:
    // smaller last bin first; then, scanning from the last row toward the
    // first, the smaller angular change and then the smaller bin. Scanning
    // stops at the first difference, where both tuples still share the
    // later (already compared) bins.
    auto tie_better = [&](const std::vector<int>& cand, const std::vector<int>& ref) {
        if (cand[A - 1] != ref[A - 1]) return cand[A - 1] < ref[A - 1];
        for (int a = A - 1; a >= 1; --a) {
            const int dc = circ_diff(cand[a - 1], cand[a]);
            const int dr = circ_diff(ref[a - 1], ref[a]);
            if (dc != dr) return dc < dr;
            if (cand[a - 1] != ref[a - 1]) return cand[a - 1] < ref[a - 1];
        }
        return false;
    };

    auto rec = [&](auto&& self, int a, double score) -> void {
        if (a == A) {
            if (!have_best || score > best_score ||
                (score == best_score && tie_better(current, best))) {
                have_best = true;
                best_score = score;
                best = current;
            }
            return;
        }
        for (int b = 0; b < bins; ++b) {
            if (a > 0) {
                const int d = circ_diff(b, current[a - 1]);
                if (d > max_d[a]) continue;
                current[a] = b;
                self(self, a + 1,
                     R.values(a, b) + (score - lambda * static_cast<double>(d) * d));
            } else {
                current[a] = b;
                self(self, a + 1, R.values(0, b));
            }
        }
    };
    rec(rec, 0, 0.0);
    return best;
}

}  // namespace coreg

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "coreg/features.hpp"
#include "coreg/matrix.hpp"

namespace coreg {

/// Per-channel weights of the alignment distance. Defaults are the tuned
/// values the engine ships with.
struct LongWeights {
    double w_lumen = 0.3;
    double w_sb = 1.5;
    double w_calc = 0.1;
    double w_pos = 2.5;

    double operator[](std::size_t k) const {
        switch (k) {
            case 0: return w_lumen;
            case 1: return w_sb;
            case 2: return w_calc;
            default: return w_pos;
        }
    }

    friend bool operator==(const LongWeights&, const LongWeights&) = default;
};

/// Monotone warping path plus the interpolated per-ED-frame mapping.
struct CorrespondencePath {
    std::vector<std::pair<int, int>> pairs;  // downsampled (i, j), forward order
    std::vector<double> full_mapping;        // fractional OCT frame index per IVUS ED frame
};

/// D[i][j] = sqrt(sum_k w_k * (X_i[k] - Y_j[k])^2), the feature-weighted
/// Euclidean distance between every pair of frames.
inline Matrix distance_matrix(const LongFeatureSequence& X,
                              const LongFeatureSequence& Y,
                              const LongWeights& w) {
    const std::size_t n = X.size(), m = Y.size();
    Matrix D(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < kLongFeatureCount; ++k) {
                const double d = X.vectors[i][k] - Y.vectors[j][k];
                s += w[k] * d * d;
            }
            D(i, j) = std::sqrt(s);
        }
    }
    return D;
}

/// Cumulative alignment cost: C[i][j] = D[i][j] + min of the three
/// predecessors, computed row-major. The first row and column accumulate
/// along their only available predecessor, C[0][0] = D[0][0].
inline Matrix dtw_cost(const Matrix& D) {
    const std::size_t n = D.rows(), m = D.cols();
    Matrix C(n, m);
    C(0, 0) = D(0, 0);
    for (std::size_t j = 1; j < m; ++j) C(0, j) = D(0, j) + C(0, j - 1);
    for (std::size_t i = 1; i < n; ++i) {
        C(i, 0) = D(i, 0) + C(i - 1, 0);
        for (std::size_t j = 1; j < m; ++j) {
            C(i, j) = D(i, j) +
                      std::min({C(i - 1, j - 1), C(i - 1, j), C(i, j - 1)});
        }
    }
    return C;
}

/// Recovers the minimum-cost warping path from C(n-1,m-1) back to (0,0),
/// returned in forward order. At each step the predecessor with the least
/// cumulative cost wins; exact ties resolve diagonal, then up (i-1,j),
/// then left (i,j-1), so the result is deterministic.
inline std::vector<std::pair<int, int>> backtrace(const Matrix& C) {
    std::size_t i = C.rows() - 1, j = C.cols() - 1;
    std::vector<std::pair<int, int>> path;
    path.emplace_back(static_cast<int>(i), static_cast<int>(j));
    while (i > 0 || j > 0) {
        if (i == 0) {
            --j;
        } else if (j == 0) {
            --i;
        } else {
            const double diag = C(i - 1, j - 1);
            const double up = C(i - 1, j);
            const double left = C(i, j - 1);
            if (diag <= up && diag <= left) {
                --i;
                --j;
            } else if (up <= left) {
                --i;
            } else {
                --j;
            }
        }
        path.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
    std::reverse(path.begin(), path.end());
    return path;
}

/// Converts a warping path on downsampled indices into one fractional OCT
/// frame index per IVUS ED frame:
///   1. every path pair is mapped through the source index lists;
///   2. where one IVUS frame has several OCT partners, they collapse to
///      their mean;
///   3. runs of IVUS frames stuck on the same OCT value become a single
///      knot at the run's center, and the mapping is read off the
///      piecewise-linear curve through the knots (clamped beyond the
///      first and last knot).
/// Step 3 undoes the staircase a 2:1-downsampled OCT grid forces on the
/// path, recovering sub-frame resolution. The result is non-decreasing.
inline std::vector<double> interpolate_path(
    const std::vector<std::pair<int, int>>& P,
    const std::vector<int>& X_src,
    const std::vector<int>& Y_src) {
    const std::size_t n = X_src.size();

    // Mean OCT source index per IVUS position.
    std::vector<double> sum(n, 0.0);
    std::vector<int> cnt(n, 0);
    for (const auto& [i, j] : P) {
        sum[static_cast<std::size_t>(i)] += Y_src[static_cast<std::size_t>(j)];
        cnt[static_cast<std::size_t>(i)] += 1;
    }
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = sum[i] / cnt[i];

    // Knots at the centers of equal-value runs.
    std::vector<double> knot_pos, knot_val;
    std::size_t a = 0;
    while (a < n) {
        std::size_t b = a;
        while (b + 1 < n && v[b + 1] == v[a]) ++b;
        knot_pos.push_back(0.5 * (static_cast<double>(a) + static_cast<double>(b)));
        knot_val.push_back(v[a]);
        a = b + 1;
    }

    std::vector<double> full(n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i);
        if (x <= knot_pos.front()) {
            full[i] = knot_val.front();
            continue;
        }
        if (x >= knot_pos.back()) {
            full[i] = knot_val.back();
            continue;
        }
        while (knot_pos[k + 1] < x) ++k;
        const double t = (x - knot_pos[k]) / (knot_pos[k + 1] - knot_pos[k]);
        full[i] = knot_val[k] + t * (knot_val[k + 1] - knot_val[k]);
    }
    return full;
}

/// Full longitudinal stage: distance matrix, cumulative cost, backtrace,
/// and interpolation, keeping the intermediate matrices for inspection.
struct LongitudinalResult {
    Matrix D;
    Matrix C;
    CorrespondencePath path;
};

inline LongitudinalResult align_longitudinal(const LongFeatureSequence& X,
                                             const LongFeatureSequence& Y,
                                             const LongWeights& w) {
    LongitudinalResult r;
    r.D = distance_matrix(X, Y, w);
    r.C = dtw_cost(r.D);
    r.path.pairs = backtrace(r.C);
    r.path.full_mapping =
        interpolate_path(r.path.pairs, X.source_frame_indices, Y.source_frame_indices);
    return r;
}

}  // namespace coreg

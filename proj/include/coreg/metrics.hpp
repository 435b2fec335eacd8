#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "coreg/circumferential.hpp"  // wrap360 / signed_angle_diff
#include "coreg/prng.hpp"

namespace coreg {

class LengthMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TooFewSamples : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ZeroVariance : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// |a_i - b_i| per frame.
inline std::vector<double> frame_differences(const std::vector<double>& a,
                                             const std::vector<double>& b) {
    if (a.size() != b.size()) throw LengthMismatch("frame mapping lengths differ");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = std::abs(a[i] - b[i]);
    return d;
}

/// Circular per-frame difference, the short way around: always in [0, 180].
inline std::vector<double> angle_differences(const std::vector<double>& a,
                                             const std::vector<double>& b) {
    if (a.size() != b.size()) throw LengthMismatch("rotation lengths differ");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double raw = std::abs(wrap360(a[i]) - wrap360(b[i]));
        d[i] = std::min(raw, 360.0 - raw);
    }
    return d;
}

/// Lin's concordance correlation coefficient with population moments:
///     2*cov(x,y) / (var(x) + var(y) + (mean(x) - mean(y))^2).
/// The denominator vanishes only when both inputs are the same constant,
/// which is perfect concordance, so that case returns 1.
inline double ccc(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw LengthMismatch("ccc inputs differ in length");
    const std::size_t n = x.size();
    if (n < 2) throw TooFewSamples("ccc needs at least 2 samples");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double vx = 0.0, vy = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
        cov += (x[i] - mx) * (y[i] - my);
    }
    vx /= static_cast<double>(n);
    vy /= static_cast<double>(n);
    cov /= static_cast<double>(n);
    const double denom = vx + vy + (mx - my) * (mx - my);
    if (denom == 0.0) return 1.0;
    return 2.0 * cov / denom;
}

namespace detail {

/// 1-based average ranks; tied values share the mean of the rank span
/// they occupy.
inline std::vector<double> midranks(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&x](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t s = 0;
    while (s < n) {
        std::size_t e = s;
        while (e + 1 < n && x[order[e + 1]] == x[order[s]]) ++e;
        const double r = 0.5 * (static_cast<double>(s + 1) + static_cast<double>(e + 1));
        for (std::size_t k = s; k <= e; ++k) ranks[order[k]] = r;
        s = e + 1;
    }
    return ranks;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Quantile with linear interpolation between closest ranks (position
/// p*(n-1) in the sorted values).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double pos = p * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double t = pos - static_cast<double>(lo);
    return sorted[lo] + t * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

/// Spearman rank correlation: Pearson correlation of the midranks.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw LengthMismatch("spearman inputs differ in length");
    if (x.size() < 2) throw TooFewSamples("spearman needs at least 2 samples");
    const std::vector<double> rx = detail::midranks(x);
    const std::vector<double> ry = detail::midranks(y);
    const std::size_t n = x.size();
    const double mean = 0.5 * static_cast<double>(n + 1);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = rx[i] - mean, dy = ry[i] - mean;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw ZeroVariance("spearman undefined when a variable is constant");
    }
    return sxy / std::sqrt(sxx * syy);
}

struct WilcoxonResult {
    double p = 1.0;
    bool all_zero = false;  // every paired difference was exactly 0
    int n_used = 0;         // pairs remaining after dropping zeros
    bool exact = false;     // exact enumeration (vs normal approximation)
};

namespace detail {

/// Exact two-sided p by enumerating all 2^n sign assignments over the
/// doubled ranks r2; w2 is the observed positive-rank sum (doubled).
inline double wilcoxon_exact_p(const std::vector<long long>& r2, long long w2) {
    const std::size_t n = r2.size();
    long long t2 = 0;
    for (long long r : r2) t2 += r;
    const long long lo = std::min(w2, t2 - w2);
    const long long hi = std::max(w2, t2 - w2);
    const std::uint64_t total = std::uint64_t{1} << n;
    std::uint64_t count = 0;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        long long s = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (std::uint64_t{1} << i)) s += r2[i];
        }
        if (s <= lo || s >= hi) ++count;
    }
    return std::min(1.0, static_cast<double>(count) / static_cast<double>(total));
}

/// Normal approximation with tie-aware variance and continuity correction,
/// in the same doubled-rank units as wilcoxon_exact_p.
inline double wilcoxon_approx_p(const std::vector<long long>& r2, long long w2) {
    long long t2 = 0;
    for (long long r : r2) t2 += r;
    const double mu2 = 0.5 * static_cast<double>(t2);
    double var2 = 0.0;
    for (long long r : r2) var2 += static_cast<double>(r) * static_cast<double>(r);
    var2 *= 0.25;
    // Continuity correction: 0.5 in rank units = 1 in doubled-rank units.
    const double z = std::max(0.0, (std::abs(static_cast<double>(w2) - mu2) - 1.0)) /
                     std::sqrt(var2);
    return std::clamp(2.0 * (1.0 - normal_cdf(z)), 0.0, 1.0);
}

}  // namespace detail

/// Two-sided Wilcoxon signed-rank test on the paired differences
/// d1_i - d2_i. Zero differences are dropped; tied magnitudes share
/// midranks. Exact by full sign enumeration up to n = 12, normal
/// approximation (tie-aware variance, continuity correction) beyond.
inline WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& d1,
                                           const std::vector<double>& d2) {
    if (d1.size() != d2.size()) throw LengthMismatch("wilcoxon inputs differ in length");
    if (d1.empty()) throw TooFewSamples("wilcoxon needs at least 1 pair");

    std::vector<double> diff;
    for (std::size_t i = 0; i < d1.size(); ++i) {
        const double d = d1[i] - d2[i];
        if (d != 0.0) diff.push_back(d);
    }
    WilcoxonResult res;
    res.n_used = static_cast<int>(diff.size());
    if (diff.empty()) {
        res.all_zero = true;
        res.p = 1.0;
        return res;
    }

    const std::size_t n = diff.size();
    std::vector<double> mags(n);
    for (std::size_t i = 0; i < n; ++i) mags[i] = std::abs(diff[i]);
    const std::vector<double> ranks = detail::midranks(mags);

    // Doubled ranks are exact integers even with midrank ties.
    std::vector<long long> r2(n);
    long long w2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        r2[i] = std::llround(2.0 * ranks[i]);
        if (diff[i] > 0.0) w2 += r2[i];
    }

    if (n <= 12) {
        res.exact = true;
        res.p = detail::wilcoxon_exact_p(r2, w2);
    } else {
        res.p = detail::wilcoxon_approx_p(r2, w2);
    }
    return res;
}

enum class Disagreement { Mean, Median };

struct WilliamsResult {
    double wi = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool zero_disagreement = false;  // some aggregate disagreement was 0
    int resamples_used = 0;
};

namespace detail {

inline double aggregate(const std::vector<double>& d, Disagreement mode) {
    if (mode == Disagreement::Mean) {
        double s = 0.0;
        for (double v : d) s += v;
        return s / static_cast<double>(d.size());
    }
    std::vector<double> s(d);
    std::sort(s.begin(), s.end());
    return quantile_sorted(s, 0.5);
}

inline double williams_ratio(double d01, double d02, double d12) {
    return 0.5 * (1.0 / d01 + 1.0 / d02) * d12;
}

}  // namespace detail

/// Williams index for one rater (the model) against two reference raters:
///     WI = 0.5 * (1/D01 + 1/D02) / (1/D12)
/// with D01, D02 the model-vs-rater disagreements and D12 the
/// inter-rater disagreement (aggregated per case by mean, or median when
/// requested). The 95% CI is a seeded percentile bootstrap over cases;
/// resamples with a zero aggregate are skipped, and the interval is
/// widened (if needed) to include the point estimate so the reported
/// triple is always ordered. If a full-sample aggregate is 0 the index is
/// undefined: the zero_disagreement flag is set and WI is +infinity.
inline WilliamsResult williams_index(const std::vector<double>& d01,
                                     const std::vector<double>& d02,
                                     const std::vector<double>& d12,
                                     std::uint64_t seed = 1729,
                                     int resamples = 2000,
                                     Disagreement mode = Disagreement::Mean) {
    if (d01.size() != d02.size() || d01.size() != d12.size()) {
        throw LengthMismatch("williams_index lists differ in length");
    }
    if (d01.size() < 2) throw TooFewSamples("williams_index needs at least 2 cases");

    WilliamsResult res;
    const double a01 = detail::aggregate(d01, mode);
    const double a02 = detail::aggregate(d02, mode);
    const double a12 = detail::aggregate(d12, mode);
    if (a01 <= 0.0 || a02 <= 0.0 || a12 <= 0.0) {
        res.zero_disagreement = true;
        res.wi = std::numeric_limits<double>::infinity();
        res.ci_low = res.ci_high = std::numeric_limits<double>::quiet_NaN();
        return res;
    }
    res.wi = detail::williams_ratio(a01, a02, a12);

    const std::size_t n = d01.size();
    SplitMix64 rng(seed);
    std::vector<double> b01(n), b02(n), b12(n), samples;
    samples.reserve(static_cast<std::size_t>(resamples));
    for (int r = 0; r < resamples; ++r) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = static_cast<std::size_t>(rng.uniform_below(n));
            b01[i] = d01[k];
            b02[i] = d02[k];
            b12[i] = d12[k];
        }
        const double m01 = detail::aggregate(b01, mode);
        const double m02 = detail::aggregate(b02, mode);
        const double m12 = detail::aggregate(b12, mode);
        if (m01 <= 0.0 || m02 <= 0.0 || m12 <= 0.0) continue;
        samples.push_back(detail::williams_ratio(m01, m02, m12));
    }
    res.resamples_used = static_cast<int>(samples.size());
    if (samples.empty()) {
        res.ci_low = res.ci_high = res.wi;
        return res;
    }
    std::sort(samples.begin(), samples.end());
    res.ci_low = std::min(detail::quantile_sorted(samples, 0.025), res.wi);
    res.ci_high = std::max(detail::quantile_sorted(samples, 0.975), res.wi);
    return res;
}

struct Summary {
    double median = 0.0;
    double iqr = 0.0;
};

/// Median and interquartile range with linear interpolation between
/// closest ranks (quantile position p*(n-1) on the sorted sample).
inline Summary summarize(const std::vector<double>& xs) {
    if (xs.empty()) throw EmptyInput("summarize needs at least one value");
    std::vector<double> s(xs);
    std::sort(s.begin(), s.end());
    Summary out;
    out.median = detail::quantile_sorted(s, 0.5);
    out.iqr = detail::quantile_sorted(s, 0.75) - detail::quantile_sorted(s, 0.25);
    return out;
}

}  // namespace coreg

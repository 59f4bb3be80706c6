#pragma once

// Nonparametric and paired-sample statistics used by the evaluation report:
// Cliff's delta, Wilcoxon signed-rank, paired t, Holm-Bonferroni.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "scaffold/errors.hpp"

namespace scaffold::stats {

inline double mean(std::span<const double> xs) {
    if (xs.empty()) throw EmptySample("mean of an empty sample");
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Sample standard deviation (n - 1 denominator); 0 for a single value.
inline double sample_sd(std::span<const double> xs) {
    if (xs.empty()) throw EmptySample("sd of an empty sample");
    if (xs.size() < 2) return 0.0;
    double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

// (#{x > y} - #{x < y}) / (|a| |b|), counted with a sorted copy of b.
inline double cliffs_delta(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw EmptySample("Cliff's delta needs two non-empty samples");
    std::vector<double> sorted(b.begin(), b.end());
    std::sort(sorted.begin(), sorted.end());
    std::int64_t dominance = 0;
    for (double x : a) {
        auto below = std::lower_bound(sorted.begin(), sorted.end(), x) - sorted.begin();
        auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), x);
        dominance += below - above;
    }
    return static_cast<double>(dominance) / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

// ---- Wilcoxon signed-rank --------------------------------------------------

struct WilcoxonResult {
    double w_plus = 0.0;
    double w_minus = 0.0;
    double statistic = 0.0;  // min(w_plus, w_minus)
    double p_value = 1.0;    // two-tailed
    std::size_t n = 0;       // after dropping zeros
    bool exact = true;
};

inline constexpr std::size_t kExactWilcoxonMaxN = 12;

// Average ranks of |d| (1-based), ties share the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return values[i] < values[j]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences) {
    std::vector<double> d;
    for (double x : differences)
        if (x != 0.0) d.push_back(x);
    if (d.empty()) throw AllZeroDifferences();

    std::vector<double> mags(d.size());
    std::transform(d.begin(), d.end(), mags.begin(), [](double x) { return std::fabs(x); });
    auto ranks = average_ranks(mags);

    WilcoxonResult r;
    r.n = d.size();
    for (std::size_t i = 0; i < d.size(); ++i) (d[i] > 0 ? r.w_plus : r.w_minus) += ranks[i];
    r.statistic = std::min(r.w_plus, r.w_minus);

    if (r.n <= kExactWilcoxonMaxN) {
        // Null distribution of W+ over all 2^n sign patterns, built as a
        // subset-sum count over doubled (hence integral) ranks.
        std::vector<std::int64_t> twice(ranks.size());
        std::transform(ranks.begin(), ranks.end(), twice.begin(), [](double x) { return std::llround(2.0 * x); });
        std::int64_t total = std::accumulate(twice.begin(), twice.end(), std::int64_t{0});
        std::vector<std::uint64_t> count(static_cast<std::size_t>(total + 1), 0);
        count[0] = 1;
        std::int64_t reach = 0;
        for (auto w : twice) {
            for (std::int64_t s = reach; s >= 0; --s)
                if (count[s]) count[s + w] += count[s];
            reach += w;
        }
        auto observed = std::llround(2.0 * r.w_plus);
        std::uint64_t low = 0, high = 0;
        for (std::int64_t s = 0; s <= total; ++s) {
            if (s <= observed) low += count[s];
            if (s >= observed) high += count[s];
        }
        double patterns = std::ldexp(1.0, static_cast<int>(r.n));
        r.p_value = std::min(1.0, 2.0 * static_cast<double>(std::min(low, high)) / patterns);
        r.exact = true;
    } else {
        double n = static_cast<double>(r.n);
        double mu = n * (n + 1) / 4.0;
        double var = n * (n + 1) * (2 * n + 1) / 24.0;
        // tie correction: sum over tie groups of (t^3 - t) / 48
        std::vector<double> sorted = mags;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size();) {
            std::size_t j = i;
            while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
            double t = static_cast<double>(j - i + 1);
            var -= (t * t * t - t) / 48.0;
            i = j + 1;
        }
        double z = (r.w_plus - mu) / std::sqrt(var);
        r.p_value = std::min(1.0, std::erfc(std::fabs(z) / std::sqrt(2.0)));
        r.exact = false;
    }
    return r;
}

// ---- Student t -------------------------------------------------------------

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x));
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

// P(|T| >= |t|) for Student t with df degrees of freedom.
inline double student_t_two_tailed(double t, double df) {
    if (!std::isfinite(t)) return 0.0;
    return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

struct TTestResult {
    double t = 0.0;
    double p_value = 1.0;
    double df = 0.0;
};

inline TTestResult paired_t(std::span<const double> differences) {
    if (differences.size() < 2) throw InsufficientSample("paired t needs at least two differences");
    double m = mean(differences);
    double sd = sample_sd(differences);
    if (sd == 0.0) throw ZeroVariance();
    double n = static_cast<double>(differences.size());
    TTestResult r;
    r.df = n - 1.0;
    r.t = m / (sd / std::sqrt(n));
    r.p_value = std::min(1.0, student_t_two_tailed(r.t, r.df));
    return r;
}

// ---- multiple comparisons --------------------------------------------------

// Holm step-down; results in the input order.
inline std::vector<double> holm_bonferroni(std::span<const double> p) {
    for (double x : p)
        if (!(x >= 0.0 && x <= 1.0)) throw Error("p-values must lie in [0, 1]");
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return p[i] < p[j]; });
    std::vector<double> adjusted(m);
    double running = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        double scaled = std::min(1.0, static_cast<double>(m - k) * p[order[k]]);
        running = std::max(running, scaled);
        adjusted[order[k]] = running;
    }
    return adjusted;
}

}  // namespace scaffold::stats

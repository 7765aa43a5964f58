#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "cfcast/errors.hpp"

namespace cfcast {

inline double mean(std::span<const double> x) {
    if (x.empty()) throw DataError("mean of empty sequence");
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

/// Unbiased sample variance (n-1 denominator).
inline double sample_variance(std::span<const double> x) {
    if (x.size() < 2) throw DataError("variance needs at least 2 values");
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

inline double sample_sd(std::span<const double> x) { return std::sqrt(sample_variance(x)); }

/// Five-number summary with Tukey hinges (median-inclusive quartiles) and
/// whiskers at the most extreme points within 1.5 IQR of the box.
struct BoxStats {
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double whisker_low = 0.0;
    double whisker_high = 0.0;
    std::vector<double> outliers;
};

namespace detail {
inline double median_sorted(std::span<const double> s) {
    const size_t n = s.size();
    return n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}
} // namespace detail

inline BoxStats box_stats(std::span<const double> x) {
    if (x.empty()) throw DataError("box stats of empty sequence");
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    BoxStats b;
    const size_t n = s.size();
    b.median = detail::median_sorted(s);
    // Tukey hinges: halves share the middle element when n is odd.
    const size_t half = (n + 1) / 2;
    b.q1 = detail::median_sorted(std::span<const double>(s.data(), half));
    b.q3 = detail::median_sorted(std::span<const double>(s.data() + (n - half), half));
    const double iqr = b.q3 - b.q1;
    const double lo_fence = b.q1 - 1.5 * iqr;
    const double hi_fence = b.q3 + 1.5 * iqr;
    b.whisker_low = b.q3;
    b.whisker_high = b.q1;
    for (double v : s) {
        if (v >= lo_fence && v <= hi_fence) {
            b.whisker_low = std::min(b.whisker_low, v);
            b.whisker_high = std::max(b.whisker_high, v);
        } else {
            b.outliers.push_back(v);
        }
    }
    return b;
}

/// Deterministic random source. All draws are derived from raw mt19937_64
/// output with fixed arithmetic, so sequences are reproducible across
/// platforms for a given seed (no reliance on distribution internals).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    int uniform_int(int lo, int hi) { // inclusive bounds
        const auto range = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(engine_() % range);
    }

    /// Standard normal via Box-Muller; caches the spare deviate.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace cfcast

#pragma once

#include <span>
#include <string>
#include <vector>

#include "cfcast/errors.hpp"

namespace cfcast {

namespace detail {

inline std::vector<double> diff_once(std::span<const double> x, int lag) {
    std::vector<double> out;
    out.reserve(x.size() - static_cast<size_t>(lag));
    for (size_t t = static_cast<size_t>(lag); t < x.size(); ++t) {
        out.push_back(x[t] - x[t - static_cast<size_t>(lag)]);
    }
    return out;
}

} // namespace detail

/// Applies (1-B)^d (1-B^s)^D to x. Output length is len(x) - d - D*s.
inline std::vector<double> difference(std::span<const double> x, int d, int D, int s) {
    if (d < 0 || D < 0 || s < 1) throw DataError("difference: d, D must be >= 0 and s >= 1");
    const size_t need = static_cast<size_t>(d) + static_cast<size_t>(D) * static_cast<size_t>(s);
    if (x.size() <= need) {
        throw DataError("difference: sequence of length " + std::to_string(x.size()) +
                        " too short for d=" + std::to_string(d) + ", D=" + std::to_string(D) +
                        ", s=" + std::to_string(s));
    }
    std::vector<double> cur(x.begin(), x.end());
    for (int i = 0; i < d; ++i) cur = detail::diff_once(cur, 1);
    for (int i = 0; i < D; ++i) cur = detail::diff_once(cur, s);
    return cur;
}

/// Inverse of difference(). `head` must hold the first d + D*s values of the
/// original sequence; the round trip
///   integrate(difference(x, d, D, s), x[0 .. d+D*s), d, D, s) == x
/// is exact up to floating-point addition.
inline std::vector<double> integrate(std::span<const double> diffed, std::span<const double> head,
                                     int d, int D, int s) {
    if (d < 0 || D < 0 || s < 1) throw DataError("integrate: d, D must be >= 0 and s >= 1");
    const size_t need = static_cast<size_t>(d) + static_cast<size_t>(D) * static_cast<size_t>(s);
    if (head.size() != need) {
        throw DataError("integrate: head length " + std::to_string(head.size()) +
                        " does not match d + D*s = " + std::to_string(need));
    }

    // Re-difference the head to recover the leading values of every
    // intermediate stage: prefixes[k] is the start of the sequence after k
    // difference steps (ordinary steps first, then seasonal, matching
    // difference()).
    //
    // Repeated integration amplifies the rounding of intermediate sums by
    // O(n^2) per level, so the reconstruction runs in extended precision and
    // converts to double only at the end; that keeps the round trip inside
    // the documented 1e-9 bound even for d = D = 2.
    using wide = long double;
    std::vector<std::vector<wide>> prefixes;
    prefixes.emplace_back(head.begin(), head.end());
    const auto wide_diff = [](const std::vector<wide>& x, int lag) {
        std::vector<wide> out;
        out.reserve(x.size() - static_cast<size_t>(lag));
        for (size_t t = static_cast<size_t>(lag); t < x.size(); ++t) {
            out.push_back(x[t] - x[t - static_cast<size_t>(lag)]);
        }
        return out;
    };
    for (int i = 0; i < d; ++i) prefixes.push_back(wide_diff(prefixes.back(), 1));
    for (int i = 0; i < D; ++i) prefixes.push_back(wide_diff(prefixes.back(), s));

    std::vector<wide> cur(diffed.begin(), diffed.end());
    // Undo the seasonal steps, innermost first. Each residue class mod s is
    // its own running sum.
    for (int i = D - 1; i >= 0; --i) {
        const auto& pre = prefixes[static_cast<size_t>(d + i)];
        std::vector<wide> next(cur.size() + static_cast<size_t>(s));
        for (int k = 0; k < s; ++k) next[static_cast<size_t>(k)] = pre[static_cast<size_t>(k)];
        for (size_t t = static_cast<size_t>(s); t < next.size(); ++t) {
            next[t] = next[t - static_cast<size_t>(s)] + cur[t - static_cast<size_t>(s)];
        }
        cur = std::move(next);
    }
    // Undo the ordinary steps.
    for (int i = d - 1; i >= 0; --i) {
        const auto& pre = prefixes[static_cast<size_t>(i)];
        std::vector<wide> next(cur.size() + 1);
        next[0] = pre[0];
        for (size_t t = 1; t < next.size(); ++t) next[t] = next[t - 1] + cur[t - 1];
        cur = std::move(next);
    }
    return std::vector<double>(cur.begin(), cur.end());
}

} // namespace cfcast

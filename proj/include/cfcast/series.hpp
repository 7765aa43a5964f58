#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cfcast/date.hpp"
#include "cfcast/errors.hpp"

namespace cfcast {

/// The observed variables: six pollutant concentrations plus the composite
/// air quality index.
enum class Variable { so2, no2, co, o3, pm10, pm2_5, aqi };

inline constexpr Variable kAllVariables[] = {Variable::so2,  Variable::no2,  Variable::co,
                                             Variable::o3,   Variable::pm10, Variable::pm2_5,
                                             Variable::aqi};

inline constexpr Variable kPollutants[] = {Variable::so2, Variable::no2,  Variable::co,
                                           Variable::o3,  Variable::pm10, Variable::pm2_5};

inline std::string_view variable_name(Variable v) {
    switch (v) {
        case Variable::so2: return "so2";
        case Variable::no2: return "no2";
        case Variable::co: return "co";
        case Variable::o3: return "o3";
        case Variable::pm10: return "pm10";
        case Variable::pm2_5: return "pm2_5";
        case Variable::aqi: return "aqi";
    }
    return "?";
}

/// Case-insensitive lookup; '.' is treated as '_' so headers like "PM2.5"
/// resolve to pm2_5.
inline std::optional<Variable> variable_from_name(std::string_view name) {
    std::string key;
    key.reserve(name.size());
    for (char c : name) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        if (c == '.') c = '_';
        key.push_back(c);
    }
    for (Variable v : kAllVariables) {
        if (key == variable_name(v)) return v;
    }
    return std::nullopt;
}

struct Observation {
    Date date;
    double value = 0.0; // NaN when missing
    bool missing = false;
};

/// A date-indexed daily series for one variable. Dates are consecutive by
/// construction (one entry per day from start()); gaps are explicit missing
/// entries, stored as NaN. Immutable after construction.
class TimeSeries {
public:
    static constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

    /// `values` holds one entry per day starting at `start`; NaN marks a
    /// missing observation. A series loaded from disk always has at least 2
    /// non-missing values (load_csv enforces it); windows produced by
    /// slicing may be arbitrarily short or sparse.
    TimeSeries(Variable variable, Date start, std::vector<double> values)
        : variable_(variable), start_(start), values_(std::move(values)) {
        if (values_.empty()) throw DataError("empty series");
        for (double v : values_) {
            if (!std::isnan(v) && !std::isfinite(v)) {
                throw DataError("non-finite observation in series");
            }
        }
    }

    Variable variable() const { return variable_; }
    Date start() const { return start_; }
    Date end() const { return start_ + (static_cast<int>(values_.size()) - 1); }
    size_t size() const { return values_.size(); }

    Date date(size_t i) const { return start_ + static_cast<int>(i); }
    double value(size_t i) const { return values_[i]; }
    bool missing(size_t i) const { return std::isnan(values_[i]); }
    Observation observation(size_t i) const { return {date(i), values_[i], missing(i)}; }

    std::span<const double> values() const { return values_; }

    size_t count_missing() const {
        size_t n = 0;
        for (double v : values_) n += std::isnan(v) ? 1 : 0;
        return n;
    }

    bool fully_observed() const { return count_missing() == 0; }

    /// Index of a date within the series, or nullopt when out of range.
    std::optional<size_t> index_of(Date d) const {
        const int off = d - start_;
        if (off < 0 || off >= static_cast<int>(values_.size())) return std::nullopt;
        return static_cast<size_t>(off);
    }

    /// Copy of the [first, last] sub-window (inclusive dates).
    TimeSeries slice(Date first, Date last) const {
        const auto i = index_of(first);
        const auto j = index_of(last);
        if (!i || !j || first > last) {
            throw DataError("slice [" + first.to_string() + ", " + last.to_string() +
                            "] outside series range [" + start().to_string() + ", " +
                            end().to_string() + "]");
        }
        std::vector<double> vals(values_.begin() + static_cast<long>(*i),
                                 values_.begin() + static_cast<long>(*j) + 1);
        return TimeSeries(variable_, first, std::move(vals));
    }

private:
    Variable variable_;
    Date start_;
    std::vector<double> values_;
};

/// Train/predict partition boundaries. The windows are contiguous:
/// predict_start must be the day after train_end.
struct SplitSpec {
    Date train_start;
    Date train_end;
    Date predict_start;
    Date predict_end;

    void validate() const {
        if (!(train_start < train_end && train_end < predict_start &&
              predict_start <= predict_end)) {
            throw DataError("split dates must satisfy train_start < train_end < predict_start <= "
                            "predict_end");
        }
        if (predict_start - train_end != 1) {
            throw DataError("predict_start must be the day after train_end");
        }
    }

    int train_days() const { return train_end - train_start + 1; }
    int predict_days() const { return predict_end - predict_start + 1; }
};

/// Partitions a series at the split boundaries. Both windows must lie inside
/// the series range.
inline std::pair<TimeSeries, TimeSeries> split(const TimeSeries& s, const SplitSpec& spec) {
    spec.validate();
    if (spec.train_start < s.start() || spec.predict_end > s.end()) {
        throw DataError("split window [" + spec.train_start.to_string() + ", " +
                        spec.predict_end.to_string() + "] outside series range [" +
                        s.start().to_string() + ", " + s.end().to_string() + "]");
    }
    return {s.slice(spec.train_start, spec.train_end),
            s.slice(spec.predict_start, spec.predict_end)};
}

struct Gap {
    Date start;
    int length = 0;
};

struct InterpolationResult {
    TimeSeries series;
    std::vector<Gap> unfilled; // gaps longer than max_gap, left as missing
};

/// Linearly fills missing runs of length <= max_gap between observed
/// neighbours. Longer runs are left missing and reported. The first and last
/// observations must be present (there is nothing to anchor an edge gap to).
inline InterpolationResult interpolate_missing(const TimeSeries& s, int max_gap) {
    if (s.missing(0) || s.missing(s.size() - 1)) {
        throw DataError("cannot interpolate: series starts or ends with a missing value");
    }
    std::vector<double> vals(s.values().begin(), s.values().end());
    std::vector<Gap> unfilled;
    size_t i = 0;
    while (i < vals.size()) {
        if (!std::isnan(vals[i])) {
            ++i;
            continue;
        }
        size_t j = i;
        while (j < vals.size() && std::isnan(vals[j])) ++j;
        const int len = static_cast<int>(j - i);
        if (len <= max_gap) {
            const double left = vals[i - 1];
            const double right = vals[j];
            for (size_t k = i; k < j; ++k) {
                const double t = static_cast<double>(k - i + 1) / static_cast<double>(len + 1);
                vals[k] = left + t * (right - left);
            }
        } else {
            unfilled.push_back({s.date(i), len});
        }
        i = j;
    }
    return {TimeSeries(s.variable(), s.start(), std::move(vals)), std::move(unfilled)};
}

struct WeeklyMean {
    Date week_start;
    std::optional<double> mean; // nullopt when the whole block is missing
};

/// Means over consecutive 7-day blocks anchored at the first date. Missing
/// values are skipped; a fully missing block yields a missing mean. The last
/// block may be shorter than 7 days.
inline std::vector<WeeklyMean> weekly_mean(const TimeSeries& s) {
    std::vector<WeeklyMean> out;
    for (size_t block = 0; block * 7 < s.size(); ++block) {
        const size_t lo = block * 7;
        const size_t hi = std::min(lo + 7, s.size());
        double sum = 0.0;
        int n = 0;
        for (size_t i = lo; i < hi; ++i) {
            if (!s.missing(i)) {
                sum += s.value(i);
                ++n;
            }
        }
        WeeklyMean wm{s.date(lo), std::nullopt};
        if (n > 0) wm.mean = sum / n;
        out.push_back(wm);
    }
    return out;
}

} // namespace cfcast

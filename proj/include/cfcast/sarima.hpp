#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "cfcast/csv.hpp"
#include "cfcast/difference.hpp"
#include "cfcast/errors.hpp"
#include "cfcast/nelder_mead.hpp"
#include "cfcast/series.hpp"
#include "cfcast/stats.hpp"

namespace cfcast::sarima {

/// Model orders (p,d,q)(P,D,Q)[s] plus the constant-term switch.
struct SarimaSpec {
    int p = 0, d = 0, q = 0;
    int P = 0, D = 0, Q = 0;
    int s = 1;
    bool include_constant = true;

    int num_coeffs() const { return p + q + P + Q; }
    int num_params() const { return num_coeffs() + (include_constant ? 1 : 0); }
    /// Parameter count for AIC: coefficients, constant, and the residual
    /// variance.
    int k() const { return num_params() + 1; }

    void validate(int max_total_order = 5) const {
        if (p < 0 || d < 0 || q < 0 || P < 0 || D < 0 || Q < 0 || s < 1) {
            throw ConfigError("sarima orders must be non-negative and s >= 1");
        }
        if (P + D + Q > 0 && s < 2) {
            throw ConfigError("seasonal orders require s >= 2");
        }
        if (num_coeffs() > max_total_order) {
            throw ConfigError("sarima spec " + to_string() + " exceeds the maximum of " +
                              std::to_string(max_total_order) + " coefficients");
        }
    }

    std::string to_string() const {
        std::ostringstream out;
        out << "(" << p << "," << d << "," << q << ")(" << P << "," << D << "," << Q << ")[" << s
            << "]";
        if (include_constant) out << "+c";
        return out.str();
    }

    auto order_tuple() const { return std::make_tuple(p, q, P, Q, d, D); }
};

/// Estimated model: coefficients on the constrained (stationary/invertible)
/// scale, residual variance, and fit statistics.
struct SarimaFit {
    SarimaSpec spec;
    std::vector<double> ar, ma, sar, sma;
    double constant = 0.0;
    double sigma2 = 0.0;
    double loglik = 0.0;
    double aic = 0.0;
    int n_effective = 0;
};

struct Forecast {
    Date start;
    std::vector<double> mean;
    std::vector<double> lower95;
    std::vector<double> upper95;
};

/// Thrown when the simplex search exhausts its iteration budget; carries the
/// best point found so far.
class ConvergenceError : public FitError {
public:
    ConvergenceError(const std::string& msg, SarimaFit best)
        : FitError(msg), best_fit(std::move(best)) {}
    SarimaFit best_fit;
};

namespace detail {

/// Durbin-Levinson map from partial autocorrelations in (-1,1) to the
/// coefficients of a stationary AR polynomial.
inline std::vector<double> pacf_to_ar(std::span<const double> pacf) {
    std::vector<double> phi(pacf.size(), 0.0);
    std::vector<double> work(pacf.size(), 0.0);
    for (size_t k = 0; k < pacf.size(); ++k) {
        phi[k] = pacf[k];
        for (size_t j = 0; j < k; ++j) work[j] = phi[j] - pacf[k] * phi[k - 1 - j];
        for (size_t j = 0; j < k; ++j) phi[j] = work[j];
    }
    return phi;
}

inline std::vector<double> constrain_block(std::span<const double> raw, bool negate) {
    std::vector<double> pacf(raw.size());
    for (size_t i = 0; i < raw.size(); ++i) pacf[i] = std::tanh(raw[i]);
    auto coef = pacf_to_ar(pacf);
    if (negate) {
        for (double& c : coef) c = -c;
    }
    return coef;
}

/// Coefficients of (1 - sum phi_i B^i) placed at multiples of `stride`.
inline std::vector<double> char_poly(std::span<const double> coeffs, int stride, double sign) {
    std::vector<double> poly(coeffs.size() * static_cast<size_t>(stride) + 1, 0.0);
    poly[0] = 1.0;
    for (size_t i = 0; i < coeffs.size(); ++i) {
        poly[(i + 1) * static_cast<size_t>(stride)] = sign * coeffs[i];
    }
    return poly;
}

inline std::vector<double> poly_mul(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (size_t i = 0; i < a.size(); ++i) {
        for (size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    }
    return out;
}

} // namespace detail

/// Constrained parameter set: AR/MA blocks plus the mean of the differenced
/// process.
struct SarimaParams {
    std::vector<double> ar, ma, sar, sma;
    double constant = 0.0;

    /// Lag weights a_i of the product AR polynomial: the expectation
    /// recursion reads x_t = sum a_i x_{t-i} + e_t + sum b_j e_{t-j}.
    std::vector<double> expanded_ar(int s) const {
        const auto prod = detail::poly_mul(detail::char_poly(ar, 1, -1.0),
                                           detail::char_poly(sar, s, -1.0));
        std::vector<double> a(prod.size() - 1);
        for (size_t i = 1; i < prod.size(); ++i) a[i - 1] = -prod[i];
        return a;
    }

    /// Lag weights b_j of the product MA polynomial (plus-sign convention).
    std::vector<double> expanded_ma(int s) const {
        const auto prod =
            detail::poly_mul(detail::char_poly(ma, 1, 1.0), detail::char_poly(sma, s, 1.0));
        std::vector<double> b(prod.size() - 1);
        for (size_t i = 1; i < prod.size(); ++i) b[i - 1] = prod[i];
        return b;
    }
};

/// Maps an unconstrained optimizer vector, packed (ar, ma, sar, sma,
/// constant), to constrained coefficients. Each block goes through tanh and
/// the Durbin-Levinson recursion, which guarantees stationary AR and
/// invertible MA polynomials for any real input.
inline SarimaParams constrain(const SarimaSpec& spec, std::span<const double> raw) {
    if (raw.size() != static_cast<size_t>(spec.num_params())) {
        throw ConfigError("parameter vector has size " + std::to_string(raw.size()) +
                          ", spec needs " + std::to_string(spec.num_params()));
    }
    SarimaParams out;
    size_t at = 0;
    out.ar = detail::constrain_block(raw.subspan(at, spec.p), false);
    at += static_cast<size_t>(spec.p);
    out.ma = detail::constrain_block(raw.subspan(at, spec.q), true);
    at += static_cast<size_t>(spec.q);
    out.sar = detail::constrain_block(raw.subspan(at, spec.P), false);
    at += static_cast<size_t>(spec.P);
    out.sma = detail::constrain_block(raw.subspan(at, spec.Q), true);
    at += static_cast<size_t>(spec.Q);
    out.constant = spec.include_constant ? raw[at] : 0.0;
    return out;
}

namespace detail {

/// One-sided innovation recursion with zero pre-sample values: both the
/// demeaned observations and the errors are treated as zero before the
/// start of the sample.
inline std::vector<double> css_residuals(const SarimaParams& params, int s,
                                         std::span<const double> w) {
    const auto a = params.expanded_ar(s);
    const auto b = params.expanded_ma(s);
    const double mu = params.constant;
    std::vector<double> e(w.size());
    for (size_t t = 0; t < w.size(); ++t) {
        double acc = w[t] - mu;
        for (size_t i = 1; i <= a.size() && i <= t; ++i) {
            acc -= a[i - 1] * (w[t - i] - mu);
        }
        for (size_t j = 1; j <= b.size() && j <= t; ++j) {
            acc -= b[j - 1] * e[t - j];
        }
        e[t] = acc;
    }
    return e;
}

struct CssValue {
    double loglik;
    double sigma2;
};

inline CssValue css_eval(const SarimaParams& params, int s, std::span<const double> w) {
    const auto e = css_residuals(params, s, w);
    double sse = 0.0;
    for (double v : e) sse += v * v;
    const double n = static_cast<double>(w.size());
    const double sigma2 = sse / n;
    const double ll = -0.5 * n * (std::log(2.0 * 3.14159265358979323846 * sigma2) + 1.0);
    if (!std::isfinite(ll)) {
        throw FitError("css evaluation failed (non-finite recursion)");
    }
    return {ll, sigma2};
}

} // namespace detail

/// Gaussian conditional log-likelihood of the differenced series `w` at the
/// unconstrained parameter vector `raw`, with the residual variance profiled
/// out as the mean squared recursion error.
inline double css_loglik(const SarimaSpec& spec, std::span<const double> raw,
                         std::span<const double> w) {
    if (w.empty()) throw DataError("css_loglik: empty series");
    return detail::css_eval(constrain(spec, raw), spec.s, w).loglik;
}

/// Estimates the model by conditional sum of squares: simplex maximization
/// of css_loglik from a deterministic start (zero coefficients, constant at
/// the differenced-series mean), followed by one restart pass from the
/// optimum to guard against premature simplex collapse.
inline SarimaFit fit(const SarimaSpec& spec, const TimeSeries& series, int max_total_order = 5) {
    spec.validate(max_total_order);
    if (!series.fully_observed()) {
        throw DataError("sarima fit requires a fully observed series; interpolate first");
    }
    const auto w = difference(series.values(), spec.d, spec.D, spec.s);
    const int n = static_cast<int>(w.size());
    if (n < 10 * spec.k()) {
        throw DataError("series too short: " + std::to_string(n) +
                        " differenced observations for spec " + spec.to_string() + " (need " +
                        std::to_string(10 * spec.k()) + ")");
    }

    const auto finish = [&](std::span<const double> raw, double loglik) {
        const auto params = constrain(spec, raw);
        SarimaFit out;
        out.spec = spec;
        out.ar = params.ar;
        out.ma = params.ma;
        out.sar = params.sar;
        out.sma = params.sma;
        out.constant = params.constant;
        out.sigma2 = detail::css_eval(params, spec.s, w).sigma2;
        out.loglik = loglik;
        out.aic = 2.0 * spec.k() - 2.0 * loglik;
        out.n_effective = n;
        return out;
    };

    if (spec.num_params() == 0) {
        return finish({}, detail::css_eval(constrain(spec, {}), spec.s, w).loglik);
    }

    const auto objective = [&](std::span<const double> raw) {
        try {
            return -css_loglik(spec, raw, w);
        } catch (const FitError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    const double w_mean = mean(w);
    const double w_sd = w.size() > 1 ? sample_sd(w) : 1.0;
    std::vector<double> start(static_cast<size_t>(spec.num_params()), 0.0);
    if (spec.include_constant) start.back() = w_mean;

    std::vector<double> steps(start.size(), 0.25);
    if (spec.include_constant) steps.back() = 0.1 * std::max(w_sd, 1e-3);

    NelderMeadOptions opts;
    auto pass1 = nelder_mead(objective, start, steps, opts);

    std::vector<double> refine_steps(start.size(), 0.05);
    if (spec.include_constant) refine_steps.back() = 0.02 * std::max(w_sd, 1e-3);
    auto pass2 = nelder_mead(objective, pass1.x, refine_steps, opts);

    const auto& best = pass2.value <= pass1.value ? pass2 : pass1;
    if (!std::isfinite(best.value)) {
        throw FitError("sarima fit failed for spec " + spec.to_string() +
                       ": no feasible parameters found");
    }
    if (!pass2.converged) {
        throw ConvergenceError("sarima fit did not converge for spec " + spec.to_string(),
                               finish(best.x, -best.value));
    }
    return finish(best.x, -best.value);
}

/// Iterates the innovation recursion past the end of the sample with future
/// errors at zero, integrates back to the original scale, and attaches
/// Gaussian 95% intervals from the truncated psi-weight expansion of the
/// full (differenced) model.
inline Forecast forecast(const SarimaFit& fit, const TimeSeries& series, int horizon) {
    if (horizon < 1) throw ConfigError("forecast horizon must be >= 1");
    if (!series.fully_observed()) {
        throw DataError("sarima forecast requires a fully observed series");
    }
    const SarimaSpec& spec = fit.spec;
    SarimaParams params{fit.ar, fit.ma, fit.sar, fit.sma, fit.constant};
    const auto w = difference(series.values(), spec.d, spec.D, spec.s);
    const auto e = detail::css_residuals(params, spec.s, w);
    const auto a = params.expanded_ar(spec.s);
    const auto b = params.expanded_ma(spec.s);
    const double mu = params.constant;

    // Mean path on the differenced scale.
    const size_t n = w.size();
    std::vector<double> wtilde(n + static_cast<size_t>(horizon));
    for (size_t t = 0; t < n; ++t) wtilde[t] = w[t] - mu;
    for (size_t t = n; t < wtilde.size(); ++t) {
        double acc = 0.0;
        for (size_t i = 1; i <= a.size() && i <= t; ++i) acc += a[i - 1] * wtilde[t - i];
        for (size_t j = 1; j <= b.size() && j <= t; ++j) {
            if (t - j < n) acc += b[j - 1] * e[t - j];
        }
        wtilde[t] = acc;
    }

    // Integrate the extended differenced sequence back to the original
    // scale; the last `horizon` entries are the forecast means.
    std::vector<double> w_ext(n + static_cast<size_t>(horizon));
    for (size_t t = 0; t < n; ++t) w_ext[t] = w[t];
    for (size_t t = n; t < w_ext.size(); ++t) w_ext[t] = wtilde[t] + mu;
    const size_t head_len = static_cast<size_t>(spec.d + spec.D * spec.s);
    const std::vector<double> head(series.values().begin(),
                                   series.values().begin() + static_cast<long>(head_len));
    const auto x_ext = integrate(w_ext, head, spec.d, spec.D, spec.s);

    Forecast out;
    out.start = series.end() + 1;
    out.mean.assign(x_ext.end() - horizon, x_ext.end());

    // Psi weights of the model including the differencing operators, so the
    // cumulative variance lives on the original scale.
    auto full_poly = detail::poly_mul(detail::char_poly(params.ar, 1, -1.0),
                                      detail::char_poly(params.sar, spec.s, -1.0));
    const std::vector<double> diff1{1.0, -1.0};
    std::vector<double> diffs{1.0, 0.0};
    diffs.resize(static_cast<size_t>(spec.s) + 1, 0.0);
    diffs.back() = -1.0;
    for (int i = 0; i < spec.d; ++i) full_poly = detail::poly_mul(full_poly, diff1);
    for (int i = 0; i < spec.D; ++i) full_poly = detail::poly_mul(full_poly, diffs);

    std::vector<double> psi(static_cast<size_t>(horizon), 0.0);
    psi[0] = 1.0;
    for (int j = 1; j < horizon; ++j) {
        double acc = j <= static_cast<int>(b.size()) ? b[static_cast<size_t>(j - 1)] : 0.0;
        for (int i = 1; i <= j && i < static_cast<int>(full_poly.size()); ++i) {
            acc += -full_poly[static_cast<size_t>(i)] * psi[static_cast<size_t>(j - i)];
        }
        psi[static_cast<size_t>(j)] = acc;
    }
    double cum = 0.0;
    out.lower95.resize(static_cast<size_t>(horizon));
    out.upper95.resize(static_cast<size_t>(horizon));
    for (int h = 0; h < horizon; ++h) {
        cum += psi[static_cast<size_t>(h)] * psi[static_cast<size_t>(h)];
        const double half = 1.96 * std::sqrt(fit.sigma2 * cum);
        out.lower95[static_cast<size_t>(h)] = out.mean[static_cast<size_t>(h)] - half;
        out.upper95[static_cast<size_t>(h)] = out.mean[static_cast<size_t>(h)] + half;
    }
    return out;
}

/// Inclusive order ranges for the AIC search. Candidates whose total
/// coefficient count exceeds max_total_order are not enumerated.
struct SarimaGrid {
    int max_p = 2, max_q = 2;
    int max_P = 1, max_Q = 1;
    std::vector<int> d_values{0, 1};
    std::vector<int> D_values{0, 1};
    int s = 7;
    int max_total_order = 5;
    /// Default: constant only for undifferenced candidates.
    std::optional<bool> include_constant;
};

struct GridCandidate {
    SarimaSpec spec;
    std::optional<SarimaFit> fit;
    std::string error; // set when the candidate failed
};

struct GridSearchResult {
    SarimaFit best;
    std::vector<GridCandidate> table;
};

inline std::vector<SarimaSpec> enumerate_grid(const SarimaGrid& grid) {
    std::vector<SarimaSpec> specs;
    for (int p = 0; p <= grid.max_p; ++p) {
        for (int q = 0; q <= grid.max_q; ++q) {
            for (int P = 0; P <= grid.max_P; ++P) {
                for (int Q = 0; Q <= grid.max_Q; ++Q) {
                    if (p + q + P + Q > grid.max_total_order) continue;
                    if ((P > 0 || Q > 0) && grid.s < 2) continue;
                    for (int d : grid.d_values) {
                        for (int D : grid.D_values) {
                            if (D > 0 && grid.s < 2) continue;
                            SarimaSpec spec;
                            spec.p = p;
                            spec.d = d;
                            spec.q = q;
                            spec.P = P;
                            spec.D = D;
                            spec.Q = Q;
                            spec.s = grid.s;
                            spec.include_constant =
                                grid.include_constant.value_or(d + D == 0);
                            specs.push_back(spec);
                        }
                    }
                }
            }
        }
    }
    return specs;
}

/// Fits every candidate in the grid (concurrently; candidates are
/// independent) and returns the minimum-AIC fit. Ties break toward fewer
/// parameters, then lexicographically on (p,q,P,Q,d,D). Individual failures
/// are recorded in the table; only a fully failed grid throws.
inline GridSearchResult grid_search(const TimeSeries& train, const SarimaGrid& grid) {
    const auto specs = enumerate_grid(grid);
    if (specs.empty()) throw ConfigError("empty sarima grid");

    std::vector<GridCandidate> table(specs.size());
    const unsigned workers =
        std::max(1u, std::min(std::thread::hardware_concurrency(), 8u));
    std::atomic<size_t> next{0};
    const auto run = [&] {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= specs.size()) break;
            table[i].spec = specs[i];
            try {
                table[i].fit = fit(specs[i], train, grid.max_total_order);
            } catch (const std::exception& e) {
                table[i].error = e.what();
            }
        }
    };
    if (workers == 1 || specs.size() == 1) {
        run();
    } else {
        std::vector<std::future<void>> futs;
        for (unsigned t = 0; t < workers; ++t) futs.push_back(std::async(std::launch::async, run));
        for (auto& f : futs) f.get();
    }

    const GridCandidate* best = nullptr;
    for (const auto& cand : table) {
        if (!cand.fit) continue;
        if (!best) {
            best = &cand;
            continue;
        }
        const auto& a = *cand.fit;
        const auto& b = *best->fit;
        const auto key_a = std::make_tuple(a.aic, a.spec.k(), a.spec.order_tuple());
        const auto key_b = std::make_tuple(b.aic, b.spec.k(), b.spec.order_tuple());
        if (key_a < key_b) best = &cand;
    }
    if (!best) {
        std::string msg = "all " + std::to_string(table.size()) + " grid candidates failed:";
        for (const auto& cand : table) {
            msg += "\n  " + cand.spec.to_string() + ": " + cand.error;
        }
        throw FitError(msg);
    }
    return {*best->fit, std::move(table)};
}

/// Flat key-value report of a fitted model.
inline std::string to_report(const SarimaFit& fit) {
    std::ostringstream out;
    out << "spec = " << fit.spec.to_string() << "\n";
    const auto block = [&](const char* name, const std::vector<double>& v) {
        for (size_t i = 0; i < v.size(); ++i) {
            out << name << "." << (i + 1) << " = " << format_double(v[i]) << "\n";
        }
    };
    block("ar", fit.ar);
    block("ma", fit.ma);
    block("sar", fit.sar);
    block("sma", fit.sma);
    if (fit.spec.include_constant) out << "constant = " << format_double(fit.constant) << "\n";
    out << "sigma2 = " << format_double(fit.sigma2) << "\n";
    out << "loglik = " << format_double(fit.loglik) << "\n";
    out << "aic = " << format_double(fit.aic) << "\n";
    out << "n_effective = " << fit.n_effective << "\n";
    return out.str();
}

} // namespace cfcast::sarima

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qdot/correlate.hpp"
#include "qdot/errors.hpp"
#include "qdot/ladder.hpp"
#include "qdot/matrix.hpp"

namespace qdot {

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> estimates;
    std::vector<double> std_errors;
    double residual_norm = 0.0; // sum of squared weighted residuals
    bool converged = false;
    int iterations = 0;
    std::vector<double> cost_trace; // cost after each accepted step
    std::vector<std::string> warnings;

    double estimate(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return estimates[i];
        throw FitError("no fitted parameter named '" + name + "'");
    }
    double std_error(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return std_errors[i];
        throw FitError("no fitted parameter named '" + name + "'");
    }
};

using ModelFn = std::function<double(double, std::span<const double>)>;

struct FitOptions {
    int max_iterations = 500;
    double rel_step_tol = 1e-8;  // relative parameter change
    double grad_tol = 1e-10;     // dimensionless weighted-gradient measure
    std::vector<std::pair<double, double>> bounds; // per-parameter box, empty = unbounded
};

namespace detail {

inline std::vector<double> weighted_residuals(const ModelFn& model,
                                              std::span<const double> x,
                                              std::span<const double> y,
                                              std::span<const double> sigma,
                                              std::span<const double> params) {
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        r[i] = (y[i] - model(x[i], params)) / sigma[i];
    return r;
}

inline double cost_of(const std::vector<double>& r) {
    double c = 0.0;
    for (double v : r) c += v * v;
    return c;
}

// Numerical Jacobian of the weighted residuals, central differences with
// relative steps (keeps the fit exactly equivariant under rescaling of x).
inline std::vector<std::vector<double>> jacobian(const ModelFn& model,
                                                 std::span<const double> x,
                                                 std::span<const double> sigma,
                                                 std::vector<double> params) {
    const std::size_t np = params.size();
    std::vector<std::vector<double>> j(x.size(), std::vector<double>(np, 0.0));
    for (std::size_t p = 0; p < np; ++p) {
        const double saved = params[p];
        const double h = saved != 0.0 ? 1e-6 * std::abs(saved) : 1e-9;
        params[p] = saved + h;
        std::vector<double> fp(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) fp[i] = model(x[i], params);
        params[p] = saved - h;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double fm = model(x[i], params);
            j[i][p] = -(fp[i] - fm) / (2.0 * h * sigma[i]); // d residual / d param
        }
        params[p] = saved;
    }
    return j;
}

inline void apply_bounds(std::vector<double>& params,
                         const std::vector<std::pair<double, double>>& bounds) {
    if (bounds.empty()) return;
    for (std::size_t i = 0; i < params.size(); ++i)
        params[i] = std::clamp(params[i], bounds[i].first, bounds[i].second);
}

} // namespace detail

// Damped Gauss-Newton (Levenberg-Marquardt) least squares with a numeric
// Jacobian. Accepted steps never increase the weighted residual norm;
// non-convergence is reported in the result, not thrown.
inline FitResult fit_least_squares(const ModelFn& model, std::span<const double> x,
                                   std::span<const double> y,
                                   std::span<const double> sigma,
                                   std::vector<double> init,
                                   std::vector<std::string> names,
                                   const FitOptions& options = {}) {
    if (x.size() != y.size() || x.size() != sigma.size())
        throw ConfigError("fit: x, y, sigma lengths differ");
    if (x.size() < init.size())
        throw ConfigError("fit: fewer data points than parameters");
    if (init.size() != names.size()) throw ConfigError("fit: need one name per parameter");
    if (!options.bounds.empty() && options.bounds.size() != init.size())
        throw ConfigError("fit: need one bound pair per parameter");
    for (double s : sigma)
        if (!(s > 0.0)) throw ConfigError("fit: all sigma must be > 0");

    const std::size_t np = init.size();
    FitResult res;
    res.names = std::move(names);

    std::vector<double> params = std::move(init);
    detail::apply_bounds(params, options.bounds);
    auto r = detail::weighted_residuals(model, x, y, sigma, params);
    double cost = detail::cost_of(r);
    res.cost_trace.push_back(cost);

    double lambda = 1e-3;
    bool converged = false;
    int it = 0;
    for (; it < options.max_iterations && !converged; ++it) {
        const auto j = detail::jacobian(model, x, sigma, params);

        Matrix jtj(np);
        std::vector<double> jtr(np, 0.0);
        for (std::size_t i = 0; i < x.size(); ++i)
            for (std::size_t a = 0; a < np; ++a) {
                jtr[a] += j[i][a] * r[i];
                for (std::size_t b = 0; b <= a; ++b) jtj(a, b) += j[i][a] * j[i][b];
            }
        for (std::size_t a = 0; a < np; ++a)
            for (std::size_t b = a + 1; b < np; ++b) jtj(a, b) = jtj(b, a);

        // parameters pinned at a bound with the descent direction pointing
        // outward are frozen for this iteration, so the step in the free
        // subspace is not ruined by the projection
        std::vector<bool> frozen(np, false);
        if (!options.bounds.empty())
            for (std::size_t a = 0; a < np; ++a) {
                const double descent = -jtr[a];
                if ((params[a] <= options.bounds[a].first && descent < 0.0) ||
                    (params[a] >= options.bounds[a].second && descent > 0.0))
                    frozen[a] = true;
            }

        // dimensionless gradient measure: |g_a * theta_a| relative to cost
        double grad_measure = 0.0;
        for (std::size_t a = 0; a < np; ++a)
            if (!frozen[a])
                grad_measure = std::max(grad_measure, std::abs(jtr[a] * params[a]));
        if (grad_measure <= options.grad_tol * std::max(cost, 1e-300)) {
            converged = true;
            break;
        }

        bool accepted = false;
        while (!accepted) {
            Matrix damped = jtj;
            for (std::size_t a = 0; a < np; ++a)
                damped(a, a) += lambda * std::max(jtj(a, a), 1e-300);
            for (std::size_t a = 0; a < np; ++a)
                if (frozen[a]) {
                    for (std::size_t b = 0; b < np; ++b) {
                        damped(a, b) = 0.0;
                        damped(b, a) = 0.0;
                    }
                    damped(a, a) = 1.0;
                }
            std::vector<double> step;
            bool solvable = true;
            try {
                std::vector<double> rhs(np);
                for (std::size_t a = 0; a < np; ++a) rhs[a] = frozen[a] ? 0.0 : -jtr[a];
                step = solve(damped, rhs);
            } catch (const NumericsError&) {
                solvable = false;
            }
            if (solvable) {
                std::vector<double> trial = params;
                for (std::size_t a = 0; a < np; ++a) trial[a] += step[a];
                detail::apply_bounds(trial, options.bounds);
                auto r_trial = detail::weighted_residuals(model, x, y, sigma, trial);
                const double cost_trial = detail::cost_of(r_trial);
                if (cost_trial <= cost) {
                    double dnorm = 0.0, pnorm = 0.0;
                    for (std::size_t a = 0; a < np; ++a) {
                        const double d = trial[a] - params[a];
                        dnorm += d * d;
                        pnorm += params[a] * params[a];
                    }
                    const double rel_change = std::sqrt(dnorm) / (std::sqrt(pnorm) + 1e-300);
                    params = std::move(trial);
                    r = std::move(r_trial);
                    cost = cost_trial;
                    res.cost_trace.push_back(cost);
                    lambda = std::max(lambda / 3.0, 1e-12);
                    accepted = true;
                    if (rel_change < options.rel_step_tol) converged = true;
                    break;
                }
            }
            lambda *= 10.0;
            if (lambda > 1e14) break; // no acceptable step in this direction
        }
        if (!accepted) break;
    }

    res.converged = converged;
    res.iterations = it;
    res.estimates = params;
    res.residual_norm = cost;

    // standard errors from the inverse curvature at the optimum
    const auto j = detail::jacobian(model, x, sigma, params);
    Matrix jtj(np);
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t a = 0; a < np; ++a)
            for (std::size_t b = 0; b < np; ++b) jtj(a, b) += j[i][a] * j[i][b];
    res.std_errors.assign(np, 0.0);
    try {
        Matrix cov = solve(jtj, Matrix::identity(np));
        for (std::size_t a = 0; a < np; ++a)
            res.std_errors[a] = std::sqrt(std::max(cov(a, a), 0.0));
    } catch (const NumericsError&) {
        if (converged) throw FitError("degenerate fit: singular curvature at the optimum");
        res.warnings.push_back("singular curvature, standard errors unavailable");
    }
    return res;
}

// Biexponential decay A exp(-t/T) + A2 exp(-t/T2) + c with T < T2.
// Weights are Poisson (sqrt of counts); seeds come from log-linear fits to
// the early and late thirds of the decay.
inline FitResult fit_biexponential(std::span<const double> t_ps,
                                   std::span<const double> counts) {
    if (t_ps.size() != counts.size()) throw ConfigError("fit: t and counts lengths differ");
    std::size_t populated = 0;
    for (double c : counts)
        if (c > 0.0) ++populated;
    if (populated < 6) throw FitError("biexponential fit needs at least 6 populated bins");

    std::vector<double> sigma(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        sigma[i] = std::sqrt(std::max(counts[i], 1.0));

    const double c0 = *std::min_element(counts.begin(), counts.end());
    const double span_t = t_ps.back() - t_ps.front();

    // log-linear seed over an index range, ignoring empty bins
    auto log_linear = [&](std::size_t lo, std::size_t hi, double base,
                          double fallback_T) -> std::pair<double, double> {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        std::size_t n = 0;
        for (std::size_t i = lo; i < hi; ++i) {
            const double v = counts[i] - base;
            if (v <= 0.0) continue;
            const double ly = std::log(v);
            sx += t_ps[i];
            sy += ly;
            sxx += t_ps[i] * t_ps[i];
            sxy += t_ps[i] * ly;
            ++n;
        }
        if (n < 2) return {1.0, fallback_T};
        const double denom = static_cast<double>(n) * sxx - sx * sx;
        if (denom == 0.0) return {1.0, fallback_T};
        const double slope = (static_cast<double>(n) * sxy - sx * sy) / denom;
        const double icept = (sy - slope * sx) / static_cast<double>(n);
        const double T = slope < 0.0 ? -1.0 / slope : fallback_T;
        return {std::exp(icept), T};
    };

    const std::size_t third = std::max<std::size_t>(counts.size() / 3, 2);
    auto [a2_seed, t2_seed] = log_linear(counts.size() - third, counts.size(), c0, span_t);
    // subtract the slow seed before fitting the early part
    std::vector<double> fast(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        fast[i] = counts[i] - c0 - a2_seed * std::exp(-t_ps[i] / t2_seed);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < third; ++i) {
        if (fast[i] <= 0.0) continue;
        const double ly = std::log(fast[i]);
        sx += t_ps[i];
        sy += ly;
        sxx += t_ps[i] * t_ps[i];
        sxy += t_ps[i] * ly;
        ++n;
    }
    double a_seed = a2_seed, t_seed = t2_seed / 10.0;
    if (n >= 2) {
        const double denom = static_cast<double>(n) * sxx - sx * sx;
        if (denom != 0.0) {
            const double slope = (static_cast<double>(n) * sxy - sx * sy) / denom;
            const double icept = (sy - slope * sx) / static_cast<double>(n);
            if (slope < 0.0) t_seed = -1.0 / slope;
            a_seed = std::exp(icept);
        }
    }
    if (t_seed >= t2_seed) t_seed = t2_seed / 10.0;

    const double t_min = (t_ps.size() > 1 ? t_ps[1] - t_ps[0] : 1.0) / 100.0;
    FitOptions opt;
    opt.bounds = {{0.0, std::numeric_limits<double>::infinity()},
                  {t_min, 1e5 * span_t},
                  {0.0, std::numeric_limits<double>::infinity()},
                  {t_min, 1e5 * span_t},
                  {0.0, std::numeric_limits<double>::infinity()}};

    ModelFn model = [](double t, std::span<const double> p) {
        return p[0] * std::exp(-t / p[1]) + p[2] * std::exp(-t / p[3]) + p[4];
    };
    FitResult res = fit_least_squares(model, t_ps, counts, sigma,
                                      {a_seed, t_seed, a2_seed, t2_seed, std::max(c0, 0.0)},
                                      {"A", "T", "A2", "T2", "c"}, opt);

    if (res.estimates[1] > res.estimates[3]) { // enforce T < T2
        std::swap(res.estimates[0], res.estimates[2]);
        std::swap(res.estimates[1], res.estimates[3]);
        std::swap(res.std_errors[0], res.std_errors[2]);
        std::swap(res.std_errors[1], res.std_errors[3]);
    }
    const double a_hi = std::max(res.estimates[0], res.estimates[2]);
    const double a_lo = std::min(res.estimates[0], res.estimates[2]);
    if (a_lo <= 0.0 || a_hi / a_lo > 1e6)
        res.warnings.push_back("amplitude ratio beyond 1e6: effectively a single exponential");
    return res;
}

inline FitResult fit_biexponential(const DecayHistogram& h, int line) {
    auto it = h.counts.find(line);
    if (it == h.counts.end()) throw FitError("decay histogram has no counts for that line");
    std::vector<double> t(it->second.size()), y(it->second.size());
    for (std::size_t i = 0; i < it->second.size(); ++i) {
        t[i] = h.bin_center_ps(i);
        y[i] = static_cast<double>(it->second[i]);
    }
    return fit_biexponential(t, y);
}

// Pump-power calibration: fit measured line intensity against the ladder
// saturation curve, I(P) = scale * I_line(kappa * P), so that kappa converts
// any pump power into the capture rate r (in 1/ps).
inline FitResult fit_saturation(std::span<const double> power,
                                std::span<const double> intensity,
                                const LadderConfig& ladder, int line = 1) {
    if (power.size() != intensity.size()) throw ConfigError("fit: power/intensity lengths differ");
    if (power.size() < 5) throw FitError("saturation fit needs at least 5 power points");
    const double i_max = *std::max_element(intensity.begin(), intensity.end());
    if (!(i_max > 0.0)) throw FitError("saturation fit: all intensities are zero");

    LadderConfig base = ladder;
    ModelFn model = [base, line](double p, std::span<const double> th) {
        const double r = th[1] * p;
        if (!(r >= 0.0) || !std::isfinite(r)) return 0.0;
        return th[0] * saturation_curve(base, {r}, line)[0];
    };

    // seed kappa from the half-maximum power (two-level behavior: I reaches
    // half of saturation at r = Gamma_1)
    double p_half = power.back();
    for (std::size_t i = 0; i < power.size(); ++i)
        if (intensity[i] >= 0.5 * i_max) {
            p_half = power[i];
            break;
        }
    double kappa0 = p_half > 0.0 ? ladder.gamma1() / p_half : ladder.gamma1();
    double model_at_max = saturation_curve(base, {kappa0 * power.back()}, line)[0];
    double scale0 = model_at_max > 0.0 ? i_max / model_at_max : 1.0;

    std::vector<double> sigma(power.size(), 0.01 * i_max);
    FitOptions opt;
    opt.bounds = {{0.0, std::numeric_limits<double>::infinity()},
                  {0.0, std::numeric_limits<double>::infinity()}};
    FitResult res = fit_least_squares(model, power, intensity, sigma, {scale0, kappa0},
                                      {"scale", "kappa"}, opt);
    if (!(res.estimates[1] > 0.0) || res.std_errors[1] > std::abs(res.estimates[1]))
        throw FitError("pump conversion unidentifiable: data do not leave the linear regime");
    return res;
}

// Width of a dip at half depth. The reference level is the mean of the
// outer 10% of bins on each side (the flat part of a finite histogram
// window), the floor is the minimum sample; crossings are interpolated.
inline double dip_fwhm(std::span<const double> tau_ps, std::span<const double> g2) {
    if (tau_ps.size() != g2.size() || tau_ps.size() < 5)
        throw NumericsError("dip_fwhm: need at least 5 samples");
    const std::size_t edge = std::max<std::size_t>(tau_ps.size() / 10, 1);
    double base = 0.0;
    for (std::size_t i = 0; i < edge; ++i) base += g2[i] + g2[g2.size() - 1 - i];
    base /= static_cast<double>(2 * edge);

    std::size_t imin = 0;
    for (std::size_t i = 1; i < g2.size(); ++i)
        if (g2[i] < g2[imin]) imin = i;
    const double half = 0.5 * (g2[imin] + base);

    double left = 0.0, right = 0.0;
    bool found_left = false, found_right = false;
    for (std::size_t i = imin; i-- > 0;) {
        if (g2[i] >= half) {
            left = tau_ps[i] + (tau_ps[i + 1] - tau_ps[i]) * (half - g2[i]) / (g2[i + 1] - g2[i]);
            found_left = true;
            break;
        }
    }
    for (std::size_t i = imin + 1; i < g2.size(); ++i) {
        if (g2[i] >= half) {
            right = tau_ps[i - 1] +
                    (tau_ps[i] - tau_ps[i - 1]) * (half - g2[i - 1]) / (g2[i] - g2[i - 1]);
            found_right = true;
            break;
        }
    }
    if (!found_left || !found_right)
        throw NumericsError("dip_fwhm: half level not crossed inside the window");
    return right - left;
}

struct G2OverlayReport {
    FitResult fit; // scale parameter only
    double fwhm_measured_ps = 0.0;
    double fwhm_model_ps = 0.0;
    double fwhm_ratio = 0.0; // measured / model
};

// Overlay a model g2 curve (sampled on the same bin centers) onto a
// measured histogram: scale-only fit plus the dip-width comparison used to
// diagnose correlation-time anomalies.
inline G2OverlayReport fit_g2_overlay(const NormalizedCurve& measured,
                                      const std::vector<double>& model_curve) {
    if (measured.g2.size() != model_curve.size())
        throw ConfigError("g2 overlay: model curve must be sampled on the histogram bins");
    const double g_min = *std::min_element(measured.g2.begin(), measured.g2.end());
    if (g_min > 0.9) throw FitError("g2 overlay: no resolved dip (minimum above 0.9)");

    // scale-only weighted least squares has a closed form
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < measured.g2.size(); ++i) {
        const double w = 1.0 / (measured.err[i] * measured.err[i]);
        num += w * measured.g2[i] * model_curve[i];
        den += w * model_curve[i] * model_curve[i];
    }
    if (!(den > 0.0)) throw FitError("g2 overlay: degenerate model curve");
    const double s = num / den;

    G2OverlayReport rep;
    rep.fit.names = {"scale"};
    rep.fit.estimates = {s};
    rep.fit.std_errors = {std::sqrt(1.0 / den)};
    rep.fit.converged = true;
    rep.fit.iterations = 1;
    double cost = 0.0;
    for (std::size_t i = 0; i < measured.g2.size(); ++i) {
        const double r = (measured.g2[i] - s * model_curve[i]) / measured.err[i];
        cost += r * r;
    }
    rep.fit.residual_norm = cost;
    rep.fit.cost_trace = {cost};

    rep.fwhm_measured_ps = dip_fwhm(measured.tau_ps, measured.g2);
    rep.fwhm_model_ps = dip_fwhm(measured.tau_ps, model_curve);
    rep.fwhm_ratio = rep.fwhm_measured_ps / rep.fwhm_model_ps;
    return rep;
}

// Exponential relaxation toward 1: g(tau) = 1 + a exp(-tau/T) over
// [tau_lo, tau_hi]. Used for the decay constant of cross-correlation tails.
inline FitResult fit_tail_relaxation(std::span<const double> tau_ps,
                                     std::span<const double> g2, double tau_lo_ps,
                                     double tau_hi_ps) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < tau_ps.size(); ++i)
        if (tau_ps[i] >= tau_lo_ps && tau_ps[i] <= tau_hi_ps) {
            x.push_back(tau_ps[i]);
            y.push_back(g2[i]);
        }
    if (x.size() < 3) throw FitError("tail fit: fewer than 3 samples in the window");
    std::vector<double> sigma(x.size(), 0.01);
    ModelFn model = [](double t, std::span<const double> p) {
        return 1.0 + p[0] * std::exp(-t / p[1]);
    };
    const double a0 = y.front() - 1.0;
    const double t0 = std::max(x.back() - x.front(), 1.0) / 4.0;
    return fit_least_squares(model, x, y, sigma, {a0 != 0.0 ? a0 : 1.0, t0},
                             {"amplitude", "tau_const"});
}

} // namespace qdot

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qdot/errors.hpp"
#include "qdot/matrix.hpp"

namespace qdot {

// Optional dark-exciton extension: one extra non-emitting state coupled
// to the bright single-exciton level by spin-flip rates. The dark state
// does not absorb a pump pair in place; capture promotes it straight to
// the two-exciton level.
struct DarkConfig {
    double gamma_bd_inv_ps = 0.0; // bright(1) -> dark spin flip
    double gamma_db_inv_ps = 0.0; // dark -> bright(1) spin flip
    double t_dark_ps = std::numeric_limits<double>::infinity(); // dark decay (non-radiative)
};

// Multiexciton ladder: the dot holds 0..n_max electron-hole pairs, climbs
// one level per captured pair at the pump rate and descends one level per
// radiative decay with the level's lifetime. The two lowest lifetimes are
// the measured exciton/biexciton values; the upper two are not critical
// and default to a plausible monotone continuation (overridable).
struct LadderConfig {
    int n_max = 4;
    std::vector<double> lifetimes_ps{251.0, 185.0, 150.0, 120.0}; // T_k, k = 1..n_max
    double pump_rate_inv_ps = 0.0;                                // pair capture rate r
    std::optional<DarkConfig> dark;

    int n_states() const { return n_max + 1 + (dark ? 1 : 0); }
    int dark_index() const { return n_max + 1; }

    double decay_rate(int level) const { return 1.0 / lifetimes_ps[level - 1]; }
    double gamma1() const { return 1.0 / lifetimes_ps[0]; }

    void validate() const {
        if (n_max < 1) throw ConfigError("ladder: n_max must be >= 1");
        if (static_cast<int>(lifetimes_ps.size()) != n_max)
            throw ConfigError("ladder: need exactly n_max lifetimes, got " +
                              std::to_string(lifetimes_ps.size()));
        for (double t : lifetimes_ps)
            if (!(t > 0.0)) throw ConfigError("ladder: lifetimes must be positive");
        if (!(pump_rate_inv_ps >= 0.0) || !std::isfinite(pump_rate_inv_ps))
            throw ConfigError("ladder: pump rate must be finite and >= 0");
        if (dark) {
            if (!(dark->gamma_bd_inv_ps >= 0.0) || !(dark->gamma_db_inv_ps >= 0.0))
                throw ConfigError("ladder: dark spin-flip rates must be >= 0");
            if (!(dark->t_dark_ps > 0.0))
                throw ConfigError("ladder: dark lifetime must be positive");
        }
    }
};

// Occupation probabilities over the ladder states. With the dark variant
// the last entry is the dark state; entries 0..n_max are the exciton levels.
struct StateDistribution {
    std::vector<double> p;

    double sum() const {
        double s = 0.0;
        for (double v : p) s += v;
        return s;
    }
};

// Rate matrix M with dp/dt = M p. Off-diagonals are non-negative transition
// rates; every column sums to zero (probability conservation).
struct GeneratorMatrix {
    Matrix m;

    std::size_t n_states() const { return m.size(); }
};

inline GeneratorMatrix build_generator(const LadderConfig& config) {
    config.validate();
    const int n = config.n_max;
    const double r = config.pump_rate_inv_ps;
    GeneratorMatrix g{Matrix(static_cast<std::size_t>(config.n_states()))};
    Matrix& m = g.m;

    auto add_rate = [&m](int to, int from, double rate) {
        m(to, from) += rate;
        m(from, from) -= rate;
    };

    for (int k = 0; k < n; ++k) add_rate(k + 1, k, r);                 // pair capture
    for (int k = 1; k <= n; ++k) add_rate(k - 1, k, config.decay_rate(k)); // radiative decay

    if (config.dark) {
        const int d = config.dark_index();
        add_rate(d, 1, config.dark->gamma_bd_inv_ps);
        add_rate(1, d, config.dark->gamma_db_inv_ps);
        if (n >= 2) add_rate(2, d, r); // capture on a dark exciton gives two pairs
        if (std::isfinite(config.dark->t_dark_ps))
            add_rate(0, d, 1.0 / config.dark->t_dark_ps);
    }
    return g;
}

namespace detail {

inline void clamp_and_renormalize(std::vector<double>& p) {
    double s = 0.0;
    for (double& v : p) {
        if (v < 0.0) {
            if (v < -1e-12)
                throw NumericsError("state distribution entry below -1e-12: " +
                                    std::to_string(v));
            v = 0.0;
        }
        s += v;
    }
    if (!(s > 0.0)) throw NumericsError("state distribution sums to zero");
    for (double& v : p) v /= s;
}

// Fixed-step RK4 fallback for systems too large for the dense exponential.
inline std::vector<double> rk4_evolve(const Matrix& m, std::vector<double> p,
                                      double tau_ps) {
    double max_rate = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) max_rate = std::max(max_rate, -m(i, i));
    if (max_rate <= 0.0) return p;
    const double h_max = 1.0 / (50.0 * max_rate); // step <= min time constant / 50
    const auto n_steps = static_cast<std::size_t>(std::ceil(tau_ps / h_max));
    const double h = tau_ps / static_cast<double>(n_steps);
    std::vector<double> k1, k2, k3, k4, tmp(p.size());
    for (std::size_t s = 0; s < n_steps; ++s) {
        k1 = m * p;
        for (std::size_t i = 0; i < p.size(); ++i) tmp[i] = p[i] + 0.5 * h * k1[i];
        k2 = m * tmp;
        for (std::size_t i = 0; i < p.size(); ++i) tmp[i] = p[i] + 0.5 * h * k2[i];
        k3 = m * tmp;
        for (std::size_t i = 0; i < p.size(); ++i) tmp[i] = p[i] + h * k3[i];
        k4 = m * tmp;
        for (std::size_t i = 0; i < p.size(); ++i)
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return p;
}

} // namespace detail

// Stationary distribution of the generator: the (single) null vector of M,
// normalized to total probability one.
inline StateDistribution steady_state(const GeneratorMatrix& g) {
    const std::size_t n = g.n_states();
    Matrix a = g.m;
    for (std::size_t j = 0; j < n; ++j) a(0, j) = 1.0; // replace one balance row by sum(p)=1
    std::vector<double> b(n, 0.0);
    b[0] = 1.0;
    std::vector<double> p;
    try {
        p = solve(a, b, 1e-12 * std::max(1.0, g.m.norm_inf()));
    } catch (const NumericsError&) {
        throw NumericsError("steady state is degenerate (generator has more than one null vector)");
    }
    detail::clamp_and_renormalize(p);
    // residual check against the original generator
    const auto res = g.m * p;
    for (double v : res)
        if (std::abs(v) > 1e-10)
            throw NumericsError("steady-state residual above 1e-10");
    return StateDistribution{std::move(p)};
}

// Propagate a distribution by tau under dp/dt = M p. Dense exponential for
// small systems, RK4 otherwise.
inline StateDistribution evolve(const GeneratorMatrix& g, const StateDistribution& p0,
                                double tau_ps) {
    if (!(tau_ps >= 0.0)) throw ConfigError("evolve: tau must be >= 0");
    if (tau_ps == 0.0) return p0;
    std::vector<double> p;
    if (g.n_states() <= 8) {
        Matrix prop = expm(g.m * tau_ps);
        p = prop * p0.p;
    } else {
        p = detail::rk4_evolve(g.m, p0.p, tau_ps);
    }
    detail::clamp_and_renormalize(p);
    return StateDistribution{std::move(p)};
}

namespace detail {

inline StateDistribution reset_after_emission(const LadderConfig& config, int line) {
    StateDistribution d{std::vector<double>(static_cast<std::size_t>(config.n_states()), 0.0)};
    d.p[static_cast<std::size_t>(line - 1)] = 1.0;
    return d;
}

inline void check_line(const LadderConfig& config, int line, const char* what) {
    if (line < 1 || line > config.n_max)
        throw ConfigError(std::string(what) + ": line index " + std::to_string(line) +
                          " outside 1.." + std::to_string(config.n_max));
}

inline double steady_occupation(const StateDistribution& ss, int line) {
    const double pk = ss.p[static_cast<std::size_t>(line)];
    if (!(pk > 0.0))
        throw NumericsError("correlation undefined: zero steady-state occupation of level " +
                            std::to_string(line));
    return pk;
}

// Evaluate p_line(tau)/p_line(ss) for each tau, starting from p0.
// Uses one propagator per step on uniform grids.
inline std::vector<double> occupation_ratio(const GeneratorMatrix& g,
                                            const StateDistribution& p0, int line,
                                            double p_ss,
                                            const std::vector<double>& taus_ps) {
    std::vector<double> out(taus_ps.size());
    const auto idx = static_cast<std::size_t>(line);

    bool uniform = taus_ps.size() >= 3;
    double step = taus_ps.size() >= 2 ? taus_ps[1] - taus_ps[0] : 0.0;
    for (std::size_t i = 1; i + 1 < taus_ps.size() && uniform; ++i)
        if (std::abs((taus_ps[i + 1] - taus_ps[i]) - step) > 1e-9 * std::max(1.0, std::abs(step)))
            uniform = false;

    if (uniform && step > 0.0 && g.n_states() <= 8) {
        const Matrix prop = expm(g.m * step);
        StateDistribution cur = evolve(g, p0, taus_ps[0]);
        for (std::size_t i = 0; i < taus_ps.size(); ++i) {
            out[i] = cur.p[idx] / p_ss;
            if (i + 1 < taus_ps.size()) {
                cur.p = prop * cur.p;
                clamp_and_renormalize(cur.p);
            }
        }
    } else {
        for (std::size_t i = 0; i < taus_ps.size(); ++i)
            out[i] = evolve(g, p0, taus_ps[i]).p[idx] / p_ss;
    }
    return out;
}

} // namespace detail

// Autocorrelation of one emission line. Emitting a line-k photon projects
// the dot onto level k-1; g2_k(tau) is the conditional occupation of level k
// after |tau|, relative to its steady-state value. Symmetric in tau.
inline std::vector<double> g2_auto(const LadderConfig& config, int line,
                                   const std::vector<double>& tau_grid_ps) {
    detail::check_line(config, line, "g2_auto");
    const GeneratorMatrix g = build_generator(config);
    const StateDistribution ss = steady_state(g);
    const double pk = detail::steady_occupation(ss, line);
    const StateDistribution reset = detail::reset_after_emission(config, line);

    std::vector<double> abs_tau(tau_grid_ps.size());
    bool all_nonneg = true;
    for (std::size_t i = 0; i < tau_grid_ps.size(); ++i) {
        abs_tau[i] = std::abs(tau_grid_ps[i]);
        if (tau_grid_ps[i] < 0.0) all_nonneg = false;
    }
    if (all_nonneg)
        return detail::occupation_ratio(g, reset, line, pk, abs_tau);
    std::vector<double> out(abs_tau.size());
    for (std::size_t i = 0; i < abs_tau.size(); ++i)
        out[i] = evolve(g, reset, abs_tau[i]).p[static_cast<std::size_t>(line)] / pk;
    return out;
}

// One-sided limits of the cross-correlation at tau = 0. The curve is
// genuinely discontinuous there: the positive side starts at
// p_stop(0 | reset after start emission) / p_stop(ss).
struct CrossLimits {
    double at_zero_minus = 0.0;
    double at_zero_plus = 0.0;
};

inline CrossLimits g2_cross_limits(const LadderConfig& config, int start_line,
                                   int stop_line) {
    detail::check_line(config, start_line, "g2_cross");
    detail::check_line(config, stop_line, "g2_cross");
    if (start_line == stop_line)
        throw ConfigError("g2_cross: start and stop lines must differ");
    const GeneratorMatrix g = build_generator(config);
    const StateDistribution ss = steady_state(g);
    CrossLimits lim;
    lim.at_zero_plus = (start_line - 1 == stop_line)
                           ? 1.0 / detail::steady_occupation(ss, stop_line)
                           : 0.0;
    lim.at_zero_minus = (stop_line - 1 == start_line)
                            ? 1.0 / detail::steady_occupation(ss, start_line)
                            : 0.0;
    return lim;
}

// Cross-correlation between two lines on a signed delay grid.
// tau > 0: a start-line photon resets the dot to start_line-1, then the
// stop-line occupation is read out after tau. tau < 0: the roles swap
// (a stop photon precedes the start photon by |tau|). tau = 0 evaluates
// the positive-side limit; use g2_cross_limits for both limits.
inline std::vector<double> g2_cross(const LadderConfig& config, int start_line,
                                    int stop_line,
                                    const std::vector<double>& tau_grid_ps) {
    detail::check_line(config, start_line, "g2_cross");
    detail::check_line(config, stop_line, "g2_cross");
    if (start_line == stop_line)
        throw ConfigError("g2_cross: start and stop lines must differ");
    const GeneratorMatrix g = build_generator(config);
    const StateDistribution ss = steady_state(g);
    const double p_stop = detail::steady_occupation(ss, stop_line);
    const double p_start = detail::steady_occupation(ss, start_line);
    const StateDistribution reset_pos = detail::reset_after_emission(config, start_line);
    const StateDistribution reset_neg = detail::reset_after_emission(config, stop_line);

    std::vector<double> pos_tau, neg_tau;
    for (double t : tau_grid_ps) (t >= 0.0 ? pos_tau : neg_tau).push_back(std::abs(t));
    std::reverse(neg_tau.begin(), neg_tau.end()); // ascending |tau|

    const auto pos_vals =
        detail::occupation_ratio(g, reset_pos, stop_line, p_stop, pos_tau);
    const auto neg_vals =
        detail::occupation_ratio(g, reset_neg, start_line, p_start, neg_tau);

    std::vector<double> out(tau_grid_ps.size());
    std::size_t ip = 0, in = neg_tau.size();
    for (std::size_t i = 0; i < tau_grid_ps.size(); ++i) {
        if (tau_grid_ps[i] >= 0.0)
            out[i] = pos_vals[ip++];
        else
            out[i] = neg_vals[--in];
    }
    return out;
}

// Steady-state emission intensity of one line versus pump rate,
// I_k(r) = Gamma_k * p_k(ss at r). Units: photons per ps.
inline std::vector<double> saturation_curve(const LadderConfig& config,
                                            const std::vector<double>& pump_grid_inv_ps,
                                            int line) {
    detail::check_line(config, line, "saturation_curve");
    std::vector<double> out;
    out.reserve(pump_grid_inv_ps.size());
    LadderConfig c = config;
    for (double r : pump_grid_inv_ps) {
        if (!(r >= 0.0)) throw ConfigError("saturation_curve: pump rates must be >= 0");
        c.pump_rate_inv_ps = r;
        if (r == 0.0) {
            out.push_back(0.0); // empty dot emits nothing
            continue;
        }
        const auto ss = steady_state(build_generator(c));
        out.push_back(config.decay_rate(line) * ss.p[static_cast<std::size_t>(line)]);
    }
    return out;
}

} // namespace qdot

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qdot/errors.hpp"
#include "qdot/record.hpp"

namespace qdot {

enum class CorrelationMode { full, start_stop };

// Binned coincidence counts. Bins are anchored so that their centers sit on
// integer multiples of the bin width (tau = 0 is a bin center); the
// requested window is snapped outward to whole bins.
struct CorrelationHistogram {
    double bin_width_ps = 49.0;
    double tau_min_ps = 0.0; // left edge of the first bin
    double tau_max_ps = 0.0; // right edge of the last bin
    std::vector<std::uint64_t> counts;
    std::uint64_t n_c = 0; // total coincidences, == sum(counts)
    double rate_start_cps = 0.0;
    double rate_stop_cps = 0.0;
    double acquisition_s = 0.0;
    CorrelationMode mode = CorrelationMode::full;

    std::int64_t first_bin_index = 0; // bin i is centered at (first_bin_index + i) * width

    std::size_t n_bins() const { return counts.size(); }
    double bin_center_ps(std::size_t i) const {
        return static_cast<double>(first_bin_index + static_cast<std::int64_t>(i)) *
               bin_width_ps;
    }
};

// g2 samples on bin centers with Poisson standard errors.
struct NormalizedCurve {
    std::vector<double> tau_ps;
    std::vector<double> g2;
    std::vector<double> err;
};

// Measured channel rates and their background (dark + stray light) parts.
struct BackgroundRates {
    double start_total_cps = 0.0;
    double start_background_cps = 0.0;
    double stop_total_cps = 0.0;
    double stop_background_cps = 0.0;

    double rho_start() const { return (start_total_cps - start_background_cps) / start_total_cps; }
    double rho_stop() const { return (stop_total_cps - stop_background_cps) / stop_total_cps; }

    void validate() const {
        if (!(start_total_cps > 0.0) || !(stop_total_cps > 0.0))
            throw ConfigError("background rates: total rates must be > 0");
        if (start_background_cps < 0.0 || start_background_cps > start_total_cps ||
            stop_background_cps < 0.0 || stop_background_cps > stop_total_cps)
            throw ConfigError("background rates: need 0 <= background <= total");
    }
};

namespace detail {

inline void require_sorted(std::span<const std::uint64_t> t, const char* which) {
    for (std::size_t i = 1; i < t.size(); ++i)
        if (t[i] < t[i - 1])
            throw InputError(std::string("correlate: ") + which + " stream is not sorted");
}

} // namespace detail

// Coincidence histogram between two sorted timestamp streams.
// full mode: every (start, stop) pair with tau = t_stop - t_start inside
// the window, found with a two-pointer sweep (linear in events plus pairs).
// start_stop mode: only the first stop at or after each start, i.e. the
// behavior of a TCSPC start-stop module; negative-tau bins stay empty.
inline CorrelationHistogram correlate(std::span<const std::uint64_t> start_fs,
                                      std::span<const std::uint64_t> stop_fs,
                                      double bin_width_ps, double window_lo_ps,
                                      double window_hi_ps, double acquisition_s,
                                      CorrelationMode mode = CorrelationMode::full) {
    if (!(bin_width_ps > 0.0)) throw ConfigError("correlate: bin width must be > 0");
    if (!(window_hi_ps > window_lo_ps)) throw ConfigError("correlate: empty tau window");
    detail::require_sorted(start_fs, "start");
    detail::require_sorted(stop_fs, "stop");

    CorrelationHistogram h;
    h.bin_width_ps = bin_width_ps;
    h.mode = mode;
    h.acquisition_s = acquisition_s;
    if (acquisition_s > 0.0) {
        h.rate_start_cps = static_cast<double>(start_fs.size()) / acquisition_s;
        h.rate_stop_cps = static_cast<double>(stop_fs.size()) / acquisition_s;
    }

    // smallest center-anchored bin set covering [lo, hi): left edge at or
    // below lo, right edge at or above hi
    const auto k_min = static_cast<std::int64_t>(std::floor(window_lo_ps / bin_width_ps + 0.5));
    const auto k_max = static_cast<std::int64_t>(std::ceil(window_hi_ps / bin_width_ps - 0.5));
    h.first_bin_index = k_min;
    h.counts.assign(static_cast<std::size_t>(k_max - k_min + 1), 0);
    h.tau_min_ps = (static_cast<double>(k_min) - 0.5) * bin_width_ps;
    h.tau_max_ps = (static_cast<double>(k_max) + 0.5) * bin_width_ps;

    const auto width_fs = static_cast<std::int64_t>(std::llround(bin_width_ps * 1e3));
    if (width_fs < 1) throw ConfigError("correlate: bin width below 1 fs");
    // edges kept in units of fs/2 so half-bin offsets stay exact; timestamps
    // can exceed int64 in fs/2 units, hence the 128-bit delays
    using i128 = __int128;
    const i128 lo2 = i128(2 * k_min - 1) * width_fs;
    const i128 hi2 = i128(2 * k_max + 1) * width_fs;

    auto bin_of = [&](i128 tau2_fs) {
        i128 q = (tau2_fs + width_fs) / (2 * width_fs);
        if ((tau2_fs + width_fs) % (2 * width_fs) != 0 && tau2_fs + width_fs < 0) --q;
        return static_cast<std::size_t>(static_cast<std::int64_t>(q) - k_min);
    };

    if (mode == CorrelationMode::full) {
        std::size_t j_lo = 0, j_hi = 0;
        for (const std::uint64_t t : start_fs) {
            // stop times with 2*(t_stop - t) in [lo2, hi2)
            while (j_lo < stop_fs.size() && 2 * (i128(stop_fs[j_lo]) - i128(t)) < lo2) ++j_lo;
            if (j_hi < j_lo) j_hi = j_lo;
            while (j_hi < stop_fs.size() && 2 * (i128(stop_fs[j_hi]) - i128(t)) < hi2) ++j_hi;
            for (std::size_t j = j_lo; j < j_hi; ++j)
                ++h.counts[bin_of(2 * (i128(stop_fs[j]) - i128(t)))];
        }
    } else {
        std::size_t j = 0;
        for (const std::uint64_t t : start_fs) {
            while (j < stop_fs.size() && stop_fs[j] < t) ++j;
            if (j == stop_fs.size()) break;
            const i128 tau2 = 2 * (i128(stop_fs[j]) - i128(t));
            if (tau2 >= lo2 && tau2 < hi2) ++h.counts[bin_of(tau2)];
        }
    }

    for (const std::uint64_t c : h.counts) h.n_c += c;
    return h;
}

inline std::vector<std::uint64_t> extract_times(std::span<const PhotonRecord> records) {
    std::vector<std::uint64_t> t;
    t.reserve(records.size());
    for (const auto& r : records) t.push_back(r.time_fs);
    return t;
}

inline CorrelationHistogram correlate(std::span<const PhotonRecord> start,
                                      std::span<const PhotonRecord> stop,
                                      double bin_width_ps, double window_lo_ps,
                                      double window_hi_ps, double acquisition_s,
                                      CorrelationMode mode = CorrelationMode::full) {
    return correlate(std::span<const std::uint64_t>(extract_times(start)),
                     std::span<const std::uint64_t>(extract_times(stop)), bin_width_ps,
                     window_lo_ps, window_hi_ps, acquisition_s, mode);
}

// Normalize counts to g2 against the uncorrelated coincidence level
// rate_start * rate_stop * bin_width * acquisition, with sqrt(N) errors.
// Rates are the ones measured from the streams.
inline NormalizedCurve normalize(const CorrelationHistogram& h) {
    if (!(h.rate_start_cps > 0.0) || !(h.rate_stop_cps > 0.0) || !(h.acquisition_s > 0.0))
        throw NumericsError("normalize: zero rate or unknown acquisition time");
    if (h.mode != CorrelationMode::full)
        std::fputs("warning: normalizing a start-stop histogram; "
                   "the flat-background level is only asymptotic\n",
                   stderr);
    const double denom =
        h.rate_start_cps * h.rate_stop_cps * (h.bin_width_ps * 1e-12) * h.acquisition_s;
    NormalizedCurve c;
    c.tau_ps.resize(h.n_bins());
    c.g2.resize(h.n_bins());
    c.err.resize(h.n_bins());
    for (std::size_t i = 0; i < h.n_bins(); ++i) {
        c.tau_ps[i] = h.bin_center_ps(i);
        c.g2[i] = static_cast<double>(h.counts[i]) / denom;
        c.err[i] = std::sqrt(static_cast<double>(std::max<std::uint64_t>(h.counts[i], 1))) / denom;
    }
    return c;
}

namespace detail {

inline double rho_product(const BackgroundRates& b) {
    b.validate();
    const double rr = b.rho_start() * b.rho_stop();
    if (!(rr > 0.0))
        throw NumericsError("background correction impossible: a channel is all background");
    return rr;
}

} // namespace detail

// Undo the flat background: g_true = 1 + (g_meas - 1) / (rho_start*rho_stop).
inline NormalizedCurve background_correct(const NormalizedCurve& measured,
                                          const BackgroundRates& b) {
    const double rr = detail::rho_product(b);
    if (rr == 1.0) return measured; // background-free channels
    NormalizedCurve out = measured;
    for (std::size_t i = 0; i < out.g2.size(); ++i) {
        out.g2[i] = 1.0 + (measured.g2[i] - 1.0) / rr;
        out.err[i] = measured.err[i] / rr;
    }
    return out;
}

// Forward direction: predict the measured curve from a background-free
// model curve, g_meas = 1 + rho_start*rho_stop*(g_true - 1).
inline std::vector<double> background_apply(const std::vector<double>& g_true,
                                            const BackgroundRates& b) {
    const double rr = detail::rho_product(b);
    if (rr == 1.0) return g_true;
    std::vector<double> out(g_true.size());
    for (std::size_t i = 0; i < g_true.size(); ++i) out[i] = 1.0 + rr * (g_true[i] - 1.0);
    return out;
}

// Per-line histogram of timestamps folded modulo the pulse period.
struct DecayHistogram {
    double bin_width_ps = 0.0;
    double period_ps = 0.0;
    std::map<int, std::vector<std::uint64_t>> counts; // line -> per-bin counts

    std::size_t n_bins() const {
        return static_cast<std::size_t>(std::ceil(period_ps / bin_width_ps));
    }
    double bin_center_ps(std::size_t i) const {
        return (static_cast<double>(i) + 0.5) * bin_width_ps;
    }
};

inline DecayHistogram decay_histogram(std::span<const PhotonRecord> records,
                                      double pulse_period_ps, double bin_width_ps) {
    if (!(pulse_period_ps > 0.0) || !(bin_width_ps > 0.0))
        throw ConfigError("decay histogram: period and bin width must be > 0");
    DecayHistogram h;
    h.bin_width_ps = bin_width_ps;
    h.period_ps = pulse_period_ps;
    const std::size_t n_bins = h.n_bins();
    const auto period_fs = static_cast<std::uint64_t>(std::llround(pulse_period_ps * 1e3));
    for (const auto& r : records) {
        const double delay_ps = ps_from_fs(r.time_fs % period_fs);
        auto& v = h.counts[r.line];
        if (v.empty()) v.assign(n_bins, 0);
        auto bin = static_cast<std::size_t>(delay_ps / bin_width_ps);
        if (bin >= n_bins) bin = n_bins - 1;
        ++v[bin];
    }
    return h;
}

} // namespace qdot

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "qdot/correlate.hpp"
#include "qdot/errors.hpp"

namespace qdot {

// Gaussian instrument response of the whole detection chain (detector
// jitter plus monochromator dispersion, modeled as one combined width).
struct Irf {
    double fwhm_ps = 140.0;

    double sigma_ps() const { return fwhm_ps / 2.354820045030949; }

    void validate() const {
        if (!(fwhm_ps > 0.0)) throw ConfigError("irf: FWHM must be > 0");
    }
};

// Smear a uniformly sampled curve with the IRF. The kernel integrates the
// Gaussian over each grid cell (exact bin mass, not point samples) and is
// renormalized to one; the curve is extended by its boundary values, so
// flat asymptotes stay put.
inline std::vector<double> convolve(std::span<const double> curve, double grid_step_ps,
                                    const Irf& irf) {
    irf.validate();
    if (!(grid_step_ps > 0.0)) throw ConfigError("convolve: grid step must be > 0");
    const double sigma = irf.sigma_ps();
    if (grid_step_ps > sigma / 2.0)
        throw NumericsError("convolve: grid step coarser than sigma/2, curve cannot resolve the kernel");
    if (curve.empty()) return {};

    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(8.0 * sigma / grid_step_ps));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    const double inv = 1.0 / (sigma * std::sqrt(2.0));
    double sum = 0.0;
    for (std::ptrdiff_t j = -radius; j <= radius; ++j) {
        const double a = (static_cast<double>(j) - 0.5) * grid_step_ps * inv;
        const double b = (static_cast<double>(j) + 0.5) * grid_step_ps * inv;
        const double w = 0.5 * (std::erf(b) - std::erf(a));
        kernel[static_cast<std::size_t>(j + radius)] = w;
        sum += w;
    }
    for (double& w : kernel) w /= sum;

    const auto n = static_cast<std::ptrdiff_t>(curve.size());
    std::vector<double> out(curve.size(), 0.0);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::ptrdiff_t j = -radius; j <= radius; ++j) {
            std::ptrdiff_t k = i - j;
            if (k < 0) k = 0;          // constant extension
            if (k >= n) k = n - 1;
            acc += kernel[static_cast<std::size_t>(j + radius)] *
                   curve[static_cast<std::size_t>(k)];
        }
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

// FWHM of a single peak in sampled data, by linear interpolation of the
// half-maximum crossings on either side of the maximum. Baseline defaults
// to zero (histogram peaks).
inline double peak_fwhm(std::span<const double> x, std::span<const double> y,
                        double baseline = 0.0) {
    if (x.size() != y.size() || x.size() < 3)
        throw NumericsError("peak_fwhm: need at least 3 samples");
    std::size_t imax = 0;
    for (std::size_t i = 1; i < y.size(); ++i)
        if (y[i] > y[imax]) imax = i;
    const double half = baseline + 0.5 * (y[imax] - baseline);

    double left = x.front(), right = x.back();
    bool found_left = false, found_right = false;
    for (std::size_t i = imax; i-- > 0;) {
        if (y[i] <= half) {
            left = x[i] + (x[i + 1] - x[i]) * (half - y[i]) / (y[i + 1] - y[i]);
            found_left = true;
            break;
        }
    }
    for (std::size_t i = imax + 1; i < y.size(); ++i) {
        if (y[i] <= half) {
            right = x[i - 1] + (x[i] - x[i - 1]) * (half - y[i - 1]) / (y[i] - y[i - 1]);
            found_right = true;
            break;
        }
    }
    if (!found_left || !found_right)
        throw NumericsError("peak_fwhm: half-maximum crossing outside the sampled range");
    return right - left;
}

// Reproduce the timing-resolution calibration: a pulse train hits both
// detectors, each timestamp smeared by the per-channel jitter, and the two
// streams are correlated. Peaks appear at multiples of the period; the
// central peak width is the quadrature sum of the channel jitters.
inline CorrelationHistogram simulate_resolution_measurement(
    double pulse_period_ps, std::uint64_t n_pulses, double per_channel_jitter_fwhm_ps,
    double bin_width_ps = 10.0, std::uint64_t seed = 1) {
    if (!(pulse_period_ps > 0.0) || n_pulses < 2)
        throw ConfigError("resolution measurement: need positive period and >= 2 pulses");
    if (per_channel_jitter_fwhm_ps < 0.0)
        throw ConfigError("resolution measurement: jitter must be >= 0");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sigma = per_channel_jitter_fwhm_ps / 2.354820045030949;

    std::vector<std::uint64_t> a, b;
    a.reserve(n_pulses);
    b.reserve(n_pulses);
    // offset keeps jittered timestamps positive near t = 0
    const double offset = 10.0 * per_channel_jitter_fwhm_ps + pulse_period_ps;
    for (std::uint64_t j = 0; j < n_pulses; ++j) {
        const double t = offset + static_cast<double>(j) * pulse_period_ps;
        a.push_back(fs_from_ps(sigma > 0.0 ? t + gauss(rng) * sigma : t));
        b.push_back(fs_from_ps(sigma > 0.0 ? t + gauss(rng) * sigma : t));
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());

    const double window = 1.4 * pulse_period_ps;
    const double acq_s = (offset + static_cast<double>(n_pulses) * pulse_period_ps) * 1e-12;
    return correlate(std::span<const std::uint64_t>(a), std::span<const std::uint64_t>(b),
                     bin_width_ps, -window, window, acq_s);
}

} // namespace qdot

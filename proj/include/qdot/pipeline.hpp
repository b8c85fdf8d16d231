#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "qdot/correlate.hpp"
#include "qdot/errors.hpp"
#include "qdot/io.hpp"
#include "qdot/irf.hpp"
#include "qdot/ladder.hpp"

namespace qdot {

// What cmd_model_g2 evaluates: either one line's autocorrelation or a
// start/stop cross-correlation.
struct ModelG2Request {
    bool cross = false;
    int line = 1;       // auto mode
    int start_line = 2; // cross mode
    int stop_line = 1;
    double step_ps = 49.0;   // output grid spacing (bin centers at k*step)
    double window_ps = 3000.0;
};

namespace detail {

// Fine midpoint grid over the padded window: n_sub points per output bin,
// none of them on a bin edge or on tau = 0, so the cross-correlation
// discontinuity is integrated with correct measure on both sides.
struct FineGrid {
    std::vector<double> tau;
    int n_sub = 0;
    std::int64_t k_out = 0;  // output bins run k = -k_out .. k_out
    std::int64_t pad_bins = 0;
    double h = 0.0;

    std::size_t bin_begin(std::int64_t k) const {
        return static_cast<std::size_t>((k + k_out + pad_bins) * n_sub);
    }
};

inline FineGrid make_fine_grid(const ModelG2Request& req, double pad_ps, int n_sub) {
    FineGrid g;
    g.n_sub = n_sub;
    g.k_out = static_cast<std::int64_t>(std::llround(req.window_ps / req.step_ps));
    g.pad_bins = static_cast<std::int64_t>(std::ceil(pad_ps / req.step_ps));
    g.h = req.step_ps / n_sub;
    const std::int64_t total_bins = 2 * (g.k_out + g.pad_bins) + 1;
    const std::int64_t n = total_bins * n_sub;
    const double start =
        -(static_cast<double>(g.k_out + g.pad_bins) + 0.5) * req.step_ps + 0.5 * g.h;
    g.tau.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i)
        g.tau.push_back(start + static_cast<double>(i) * g.h);
    return g;
}

inline std::vector<double> eval_raw(const LadderConfig& ladder, const ModelG2Request& req,
                                    const std::vector<double>& tau) {
    return req.cross ? g2_cross(ladder, req.start_line, req.stop_line, tau)
                     : g2_auto(ladder, req.line, tau);
}

inline std::vector<double> bin_means(const FineGrid& g, const std::vector<double>& fine) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(2 * g.k_out + 1));
    for (std::int64_t k = -g.k_out; k <= g.k_out; ++k) {
        const std::size_t b = g.bin_begin(k);
        double acc = 0.0;
        for (int j = 0; j < g.n_sub; ++j) acc += fine[b + static_cast<std::size_t>(j)];
        out.push_back(acc / g.n_sub);
    }
    return out;
}

} // namespace detail

// Model curve on bin centers. The raw and background-adjusted columns are
// exact values at the centers (tau = 0 on a cross curve is the positive
// limit). The IRF runs on an internal fine grid and the convolved columns
// are averaged over each output bin, which is what a binned coincidence
// histogram of the smeared process measures. Background attenuation is the
// forward map g_meas = 1 + rho*rho*(g-1); without configured background
// rates it is the identity.
inline ModelG2Curve model_g2_curve(const RunConfig& rc, const ModelG2Request& req) {
    if (!(req.step_ps > 0.0) || !(req.window_ps > 0.0))
        throw ConfigError("model g2: step and window must be positive");
    rc.irf.validate();

    const double sigma = rc.irf.sigma_ps();
    int n_sub = static_cast<int>(std::ceil(req.step_ps / (sigma / 4.0)));
    if (n_sub < 3) n_sub = 3;
    if (n_sub % 2 == 0) ++n_sub;

    const detail::FineGrid grid = detail::make_fine_grid(req, 8.0 * sigma + req.step_ps, n_sub);
    const std::vector<double> fine_raw = detail::eval_raw(rc.sim.ladder, req, grid.tau);
    std::vector<double> fine_bg = fine_raw;
    if (rc.background) fine_bg = background_apply(fine_raw, *rc.background);

    const std::vector<double> fine_irf = convolve(fine_raw, grid.h, rc.irf);
    const std::vector<double> fine_bg_irf = convolve(fine_bg, grid.h, rc.irf);

    ModelG2Curve out;
    out.with_irf = detail::bin_means(grid, fine_irf);
    out.with_background_irf = detail::bin_means(grid, fine_bg_irf);

    // exact values on the centers
    std::vector<double> centers;
    centers.reserve(static_cast<std::size_t>(2 * grid.k_out + 1));
    for (std::int64_t k = -grid.k_out; k <= grid.k_out; ++k)
        centers.push_back(static_cast<double>(k) * req.step_ps);
    out.tau_ps = centers;
    out.raw = detail::eval_raw(rc.sim.ladder, req, centers);
    out.with_background = rc.background ? background_apply(out.raw, *rc.background) : out.raw;
    return out;
}

// Bin-averaged raw model curve (no IRF; background applied when configured)
// on the same centers, for comparisons against jitter-free Monte Carlo
// histograms.
inline std::vector<double> model_g2_bin_averaged(const RunConfig& rc,
                                                 const ModelG2Request& req) {
    const detail::FineGrid grid = detail::make_fine_grid(req, 0.0, 15);
    std::vector<double> fine = detail::eval_raw(rc.sim.ladder, req, grid.tau);
    if (rc.background) fine = background_apply(fine, *rc.background);
    return detail::bin_means(grid, fine);
}

} // namespace qdot

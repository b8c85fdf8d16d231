// Command-line surface of the photon-statistics toolkit: model curves,
// Monte Carlo timestamp streams, correlation histograms, fits and the
// timing-resolution check, all exchanged as CSV / QDTS files.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qdot/pipeline.hpp"
#include "qdot/qdot.hpp"

namespace {

std::string config_path_or_env(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("QDOT_CONFIG")) return env;
    throw qdot::ConfigError("no config file: pass --config or set QDOT_CONFIG");
}

struct CrossPair {
    int start = 2;
    int stop = 1;
};

CrossPair parse_cross(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos)
        throw qdot::ConfigError("--cross expects START,STOP line indices, e.g. 2,1");
    CrossPair p;
    p.start = static_cast<int>(qdot::parse_int(std::string_view(s).substr(0, comma), "--cross"));
    p.stop = static_cast<int>(qdot::parse_int(std::string_view(s).substr(comma + 1), "--cross"));
    return p;
}

int cmd_model_g2(const std::string& config_path, int line, const std::string& cross,
                 double window_ns, double step_ps, const std::string& out) {
    qdot::RunConfig rc = qdot::load_run_config(config_path_or_env(config_path));
    qdot::ModelG2Request req;
    req.step_ps = step_ps > 0.0 ? step_ps : rc.correlate.bin_ps;
    req.window_ps = (window_ns > 0.0 ? window_ns : rc.correlate.window_ns) * 1e3;
    if (!cross.empty()) {
        const CrossPair p = parse_cross(cross);
        req.cross = true;
        req.start_line = p.start;
        req.stop_line = p.stop;
    } else {
        req.line = line;
    }
    const qdot::ModelG2Curve curve = qdot::model_g2_curve(rc, req);
    qdot::write_model_g2_csv(out, curve);

    if (req.cross) {
        const auto lim = qdot::g2_cross_limits(rc.sim.ladder, req.start_line, req.stop_line);
        std::cout << "g2(0-) = " << qdot::format_double(lim.at_zero_minus) << "\n"
                  << "g2(0+) = " << qdot::format_double(lim.at_zero_plus)
                  << "  (tau = 0 row of the CSV carries the positive-side limit)\n";
    } else {
        std::cout << "g2(0) = " << qdot::format_double(curve.raw[curve.raw.size() / 2]) << "\n";
    }
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& out_a,
                 const std::string& out_b, const std::string& summary_path) {
    qdot::RunConfig rc = qdot::load_run_config(config_path_or_env(config_path));
    const qdot::SimResult res = qdot::simulate(rc.sim);
    qdot::write_timestamps(out_a, res.stream_a);
    qdot::write_timestamps(out_b, res.stream_b);
    const std::string summary = qdot::truth_summary_text(res.truth);
    if (summary_path.empty()) {
        std::cout << summary;
    } else {
        std::ofstream f(summary_path, std::ios::binary);
        if (!f) throw qdot::InputError("cannot open '" + summary_path + "' for writing");
        f << summary;
    }
    return 0;
}

int cmd_correlate(const std::string& config_path, const std::string& start_path,
                  const std::string& stop_path, double bin_ps, double window_ns,
                  const std::string& mode_name, bool normalize_flag, bool background_flag,
                  double acquisition_s, const std::string& out) {
    std::optional<qdot::RunConfig> rc;
    if (!config_path.empty() || std::getenv("QDOT_CONFIG"))
        rc = qdot::load_run_config(config_path_or_env(config_path));

    const auto start = qdot::read_timestamps(start_path);
    const auto stop = qdot::read_timestamps(stop_path);

    double bin = bin_ps > 0.0 ? bin_ps : (rc ? rc->correlate.bin_ps : 49.0);
    double win_ns = window_ns > 0.0 ? window_ns : (rc ? rc->correlate.window_ns : 3.0);
    qdot::CorrelationMode mode = rc ? rc->correlate.mode : qdot::CorrelationMode::full;
    if (!mode_name.empty()) {
        if (mode_name == "full")
            mode = qdot::CorrelationMode::full;
        else if (mode_name == "start_stop")
            mode = qdot::CorrelationMode::start_stop;
        else
            throw qdot::ConfigError("--mode: expected full or start_stop");
    }
    double acq = acquisition_s;
    if (acq <= 0.0 && rc) acq = rc->sim.acquisition_s;

    const auto hist = qdot::correlate(std::span<const qdot::PhotonRecord>(start),
                                      std::span<const qdot::PhotonRecord>(stop), bin,
                                      -win_ns * 1e3, win_ns * 1e3, acq, mode);
    if (normalize_flag || background_flag) {
        qdot::NormalizedCurve curve = qdot::normalize(hist);
        if (background_flag) {
            if (!rc || !rc->background)
                throw qdot::ConfigError(
                    "--background needs background rates in the config [correlate] section");
            curve = qdot::background_correct(curve, *rc->background);
        }
        qdot::write_histogram_csv(out, hist, &curve);
    } else {
        qdot::write_histogram_csv(out, hist);
    }
    std::cout << "n_c = " << hist.n_c << "\nwrote " << out << "\n";
    return 0;
}

int cmd_fit(const std::string& config_path, const std::string& type,
            const std::string& data_path, int line_flag, double period_ps, double bin_ps,
            const std::string& cross, bool with_irf, bool with_background,
            const std::string& out_base) {
    std::optional<qdot::RunConfig> rc;
    if (!config_path.empty() || std::getenv("QDOT_CONFIG"))
        rc = qdot::load_run_config(config_path_or_env(config_path));
    const int line = line_flag > 0 ? line_flag : (rc ? rc->fit_line : 1);

    qdot::FitResult fit;
    if (type == "biexp") {
        qdot::DecayHistogram h;
        if (qdot::detail::has_suffix(data_path, ".csv") &&
            !qdot::detail::has_suffix(data_path, ".qdts.csv")) {
            h = qdot::read_decay_csv(data_path);
        } else {
            const auto records = qdot::read_timestamps(data_path);
            const double period =
                period_ps > 0.0 ? period_ps : (rc ? rc->sim.pulse_period_ps : 12500.0);
            h = qdot::decay_histogram(std::span<const qdot::PhotonRecord>(records), period,
                                      bin_ps > 0.0 ? bin_ps : 10.0);
        }
        fit = qdot::fit_biexponential(h, line);
    } else if (type == "saturation") {
        if (!rc) throw qdot::ConfigError("saturation fit needs --config for the ladder");
        const auto [power, intensity] = qdot::read_xy_csv(data_path);
        fit = qdot::fit_saturation(power, intensity, rc->sim.ladder, line);
    } else if (type == "g2-overlay") {
        if (!rc) throw qdot::ConfigError("g2 overlay needs --config for the model curve");
        const qdot::NormalizedCurve measured = qdot::read_normalized_csv(data_path);
        if (measured.tau_ps.size() < 5) throw qdot::InputError("overlay data has too few bins");

        qdot::ModelG2Request req;
        req.step_ps = measured.tau_ps[1] - measured.tau_ps[0];
        req.window_ps = std::max(std::abs(measured.tau_ps.front()), measured.tau_ps.back());
        if (!cross.empty()) {
            const CrossPair p = parse_cross(cross);
            req.cross = true;
            req.start_line = p.start;
            req.stop_line = p.stop;
        } else {
            req.line = line;
        }
        qdot::RunConfig model_rc = *rc;
        if (!with_background) model_rc.background.reset();
        std::vector<double> model;
        if (with_irf)
            model = qdot::model_g2_curve(model_rc, req).with_background_irf;
        else
            model = qdot::model_g2_bin_averaged(model_rc, req);
        if (model.size() != measured.g2.size())
            throw qdot::InputError("overlay data bins do not form the expected uniform grid");

        const qdot::G2OverlayReport rep = qdot::fit_g2_overlay(measured, model);
        fit = rep.fit;
        fit.names.insert(fit.names.end(),
                         {"fwhm_measured_ps", "fwhm_model_ps", "fwhm_ratio"});
        fit.estimates.insert(fit.estimates.end(),
                             {rep.fwhm_measured_ps, rep.fwhm_model_ps, rep.fwhm_ratio});
        fit.std_errors.insert(fit.std_errors.end(), {0.0, 0.0, 0.0});
        std::cout << "dip FWHM measured = " << qdot::format_double(rep.fwhm_measured_ps)
                  << " ps, model = " << qdot::format_double(rep.fwhm_model_ps)
                  << " ps, ratio = " << qdot::format_double(rep.fwhm_ratio) << "\n";
    } else {
        throw qdot::ConfigError("--type: expected biexp, saturation or g2-overlay");
    }

    qdot::write_fit_result_text(out_base + ".txt", fit);
    qdot::write_fit_result_csv(out_base + ".csv", fit);
    for (std::size_t i = 0; i < fit.names.size(); ++i)
        std::cout << fit.names[i] << " = " << qdot::format_double(fit.estimates[i]) << " +- "
                  << qdot::format_double(fit.std_errors[i]) << "\n";
    if (!fit.converged) {
        std::cout << "fit did not converge\n";
        return 1;
    }
    return 0;
}

int cmd_irf_check(double period_ps, double jitter_ps, std::uint64_t pulses, double bin_ps,
                  std::uint64_t seed, const std::string& out) {
    const auto hist =
        qdot::simulate_resolution_measurement(period_ps, pulses, jitter_ps, bin_ps, seed);
    qdot::write_histogram_csv(out, hist);

    std::vector<double> tau(hist.n_bins()), counts(hist.n_bins());
    for (std::size_t i = 0; i < hist.n_bins(); ++i) {
        tau[i] = hist.bin_center_ps(i);
        counts[i] = static_cast<double>(hist.counts[i]);
    }
    // central peak only
    std::vector<double> ctau, ccounts;
    for (std::size_t i = 0; i < tau.size(); ++i)
        if (std::abs(tau[i]) < period_ps / 2.0) {
            ctau.push_back(tau[i]);
            ccounts.push_back(counts[i]);
        }
    const double fwhm = qdot::peak_fwhm(ctau, ccounts);
    std::cout << "central peak FWHM = " << qdot::format_double(fwhm) << " ps\n";

    // side peak positions from the count-weighted argmax in each half
    auto peak_pos = [&](double lo, double hi) {
        double best = 0.0, best_tau = 0.0;
        for (std::size_t i = 0; i < tau.size(); ++i)
            if (tau[i] > lo && tau[i] < hi && counts[i] > best) {
                best = counts[i];
                best_tau = tau[i];
            }
        return best_tau;
    };
    const double right = peak_pos(period_ps / 2.0, 1.5 * period_ps);
    const double left = peak_pos(-1.5 * period_ps, -period_ps / 2.0);
    std::cout << "peak spacing = " << qdot::format_double((right - left) / 2.0) << " ps\n";
    std::cout << "wrote " << out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"single quantum dot photon statistics toolkit"};
    app.require_subcommand(1);

    std::string config, out, out_a, out_b, summary, cross, mode, type, data, start_path,
        stop_path;
    int line = 0;
    double window_ns = 0.0, step_ps = 0.0, bin_ps = 0.0, acquisition_s = 0.0,
           period_ps = 12500.0, jitter_ps = 99.0;
    std::uint64_t pulses = 200000, seed = 1;
    bool normalize_flag = false, background_flag = false, with_irf = false,
         with_background = false;

    auto* model = app.add_subcommand("model-g2", "analytic g2 curve as plot-ready CSV");
    model->add_option("--config", config, "run configuration file");
    model->add_option("--line", line, "emission line for autocorrelation (default from [fit])");
    model->add_option("--cross", cross, "START,STOP lines for cross-correlation");
    model->add_option("--window-ns", window_ns, "half window (default [correlate] window_ns)");
    model->add_option("--step-ps", step_ps, "output grid step (default [correlate] bin_ps)");
    model->add_option("--out", out, "output CSV path")->required();

    auto* sim = app.add_subcommand("simulate", "Monte Carlo timestamp streams");
    sim->add_option("--config", config, "run configuration file");
    sim->add_option("--out-a", out_a, "channel A timestamp file")->required();
    sim->add_option("--out-b", out_b, "channel B timestamp file")->required();
    sim->add_option("--summary", summary, "truth summary file (default: stdout)");

    auto* corr = app.add_subcommand("correlate", "coincidence histogram from timestamp files");
    corr->add_option("--config", config, "run configuration file (defaults/background)");
    corr->add_option("--start", start_path, "start-channel timestamps")->required();
    corr->add_option("--stop", stop_path, "stop-channel timestamps")->required();
    corr->add_option("--bin-ps", bin_ps, "bin width (default 49)");
    corr->add_option("--window-ns", window_ns, "half window (default 3)");
    corr->add_option("--mode", mode, "full | start_stop");
    corr->add_flag("--normalize", normalize_flag, "emit g2 columns");
    corr->add_flag("--background", background_flag, "apply background correction (implies --normalize)");
    corr->add_option("--acquisition-s", acquisition_s, "acquisition time for rate normalization");
    corr->add_option("--out", out, "output CSV path")->required();

    auto* fit = app.add_subcommand("fit", "nonlinear fits: biexp, saturation, g2-overlay");
    fit->add_option("--config", config, "run configuration file");
    fit->add_option("--type", type, "biexp | saturation | g2-overlay")->required();
    fit->add_option("--data", data, "input data file")->required();
    fit->add_option("--line", line, "emission line");
    fit->add_option("--cross", cross, "START,STOP lines (g2-overlay)");
    fit->add_option("--period-ps", period_ps, "pulse period for folding timestamp input");
    fit->add_option("--bin-ps", bin_ps, "decay histogram bin width");
    fit->add_flag("--with-irf", with_irf, "overlay model includes the IRF");
    fit->add_flag("--with-background", with_background, "overlay model includes background");
    fit->add_option("--out", out, "output base path (writes .txt and .csv)")->required();

    auto* irfc = app.add_subcommand("irf-check", "simulate the pulsed resolution calibration");
    irfc->add_option("--period-ps", period_ps, "pulse period (default 12500)");
    irfc->add_option("--jitter-ps", jitter_ps, "per-channel jitter FWHM (default 99)");
    irfc->add_option("--pulses", pulses, "number of pulses");
    irfc->add_option("--bin-ps", bin_ps, "histogram bin (default 10)");
    irfc->add_option("--seed", seed, "RNG seed");
    irfc->add_option("--out", out, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (app.got_subcommand(model))
            return cmd_model_g2(config, line > 0 ? line : 1, cross, window_ns, step_ps, out);
        if (app.got_subcommand(sim)) return cmd_simulate(config, out_a, out_b, summary);
        if (app.got_subcommand(corr))
            return cmd_correlate(config, start_path, stop_path, bin_ps, window_ns, mode,
                                 normalize_flag, background_flag, acquisition_s, out);
        if (app.got_subcommand(fit))
            return cmd_fit(config, type, data, line, period_ps, bin_ps, cross, with_irf,
                           with_background, out);
        if (app.got_subcommand(irfc))
            return cmd_irf_check(period_ps, jitter_ps, pulses, bin_ps > 0.0 ? bin_ps : 10.0,
                                 seed, out);
    } catch (const qdot::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const qdot::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const qdot::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

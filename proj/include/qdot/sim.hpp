#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qdot/correlate.hpp"
#include "qdot/errors.hpp"
#include "qdot/ladder.hpp"
#include "qdot/record.hpp"

namespace qdot {

// One arm of the detection chain: monochromator line filter, detection
// efficiency, Gaussian timestamp jitter, dark counts and dead time.
struct DetectorConfig {
    double efficiency = 1.0;
    double dark_rate_cps = 0.0;
    double jitter_fwhm_ps = 0.0;
    double dead_time_ps = 0.0;
    std::vector<int> line_filter; // empty = pass every line

    bool passes(int line) const {
        if (line_filter.empty()) return true;
        return std::find(line_filter.begin(), line_filter.end(), line) != line_filter.end();
    }

    void validate() const {
        if (!(efficiency >= 0.0 && efficiency <= 1.0))
            throw ConfigError("detector: efficiency must be in [0,1]");
        if (!(dark_rate_cps >= 0.0)) throw ConfigError("detector: dark rate must be >= 0");
        if (!(jitter_fwhm_ps >= 0.0)) throw ConfigError("detector: jitter must be >= 0");
        if (!(dead_time_ps >= 0.0)) throw ConfigError("detector: dead time must be >= 0");
    }
};

enum class ExcitationMode { cw, pulsed };

// Extra slow decay path for one line in pulsed mode: with the matching
// probability the emission wait is drawn from the slow lifetime instead of
// the radiative one, producing a biexponential delay histogram with
// amplitude ratio A'/A = amplitude_ratio.
struct SlowComponent {
    double lifetime_ps = 0.0;
    double amplitude_ratio = 0.0;
};

struct SimConfig {
    LadderConfig ladder;
    double acquisition_s = 1.0;
    DetectorConfig detector_a;
    DetectorConfig detector_b;
    double splitter_ratio = 0.5; // probability an emitted photon goes to channel A
    std::uint64_t seed = 1;
    ExcitationMode mode = ExcitationMode::cw;
    double pulse_period_ps = 12500.0;          // pulsed mode only
    int pulse_pairs_injected = 2;              // pulsed mode only
    std::map<int, SlowComponent> slow;         // pulsed mode only, keyed by line
    int shards = 1;
    std::uint64_t max_records = 100'000'000;   // overflow guard

    double acquisition_ps() const { return acquisition_s * 1e12; }

    void validate() const {
        ladder.validate();
        detector_a.validate();
        detector_b.validate();
        if (!(acquisition_s > 0.0)) throw ConfigError("sim: acquisition time must be > 0");
        if (!(splitter_ratio >= 0.0 && splitter_ratio <= 1.0))
            throw ConfigError("sim: splitter ratio must be in [0,1]");
        if (shards < 1) throw ConfigError("sim: shards must be >= 1");
        if (mode == ExcitationMode::pulsed) {
            if (!(pulse_period_ps > 0.0)) throw ConfigError("sim: pulse period must be > 0");
            if (pulse_pairs_injected < 0)
                throw ConfigError("sim: injected pair count must be >= 0");
            for (const auto& [line, sc] : slow) {
                if (line < 1 || line > ladder.n_max)
                    throw ConfigError("sim: slow component line out of range");
                if (!(sc.lifetime_ps > 0.0) || !(sc.amplitude_ratio >= 0.0))
                    throw ConfigError("sim: slow component needs positive lifetime and ratio >= 0");
            }
        }
    }
};

struct TruthSummary {
    double duration_ps = 0.0;
    std::vector<std::uint64_t> emitted; // index k = photons emitted on line k (entry 0 unused)
    std::uint64_t detected_a = 0, detected_b = 0; // records kept after the full chain
    std::uint64_t dark_a = 0, dark_b = 0;         // dark-count records among them

    double emitted_rate_cps(int line) const {
        return static_cast<double>(emitted[static_cast<std::size_t>(line)]) /
               (duration_ps * 1e-12);
    }
};

struct SimResult {
    std::vector<PhotonRecord> stream_a;
    std::vector<PhotonRecord> stream_b;
    TruthSummary truth;
};

namespace detail {

// Derived per-shard seed; splitmix64 step keeps shard streams decorrelated.
inline std::uint64_t shard_seed(std::uint64_t seed, std::uint64_t shard) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (shard + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline constexpr double kFwhmToSigma = 2.354820045030949; // 2*sqrt(2*ln 2)

struct Emission {
    double time_ps;
    int line;
};

// Truth-level emission times for one cw shard: a jump walk of the
// embedded chain of the generator matrix, so the stochastic rates match
// build_generator by construction.
inline void gillespie_cw(const LadderConfig& ladder, double t0_ps, double t1_ps,
                         std::mt19937_64& rng, std::vector<Emission>& out,
                         std::vector<std::uint64_t>& emitted) {
    const GeneratorMatrix g = build_generator(ladder);
    const std::size_t n = g.n_states();
    // outgoing rates per state
    std::vector<double> total_rate(n, 0.0);
    std::vector<std::vector<std::pair<std::size_t, double>>> jumps(n);
    for (std::size_t from = 0; from < n; ++from) {
        for (std::size_t to = 0; to < n; ++to) {
            if (to == from) continue;
            const double rate = g.m(to, from);
            if (rate > 0.0) {
                jumps[from].emplace_back(to, rate);
                total_rate[from] += rate;
            }
        }
    }
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::exponential_distribution<double> exp1(1.0);

    std::size_t state = 0;
    double t = t0_ps;
    const auto n_max = static_cast<std::size_t>(ladder.n_max);
    while (true) {
        const double rate = total_rate[state];
        if (rate <= 0.0) break; // absorbing (empty dot, no pump)
        t += exp1(rng) / rate;
        if (t >= t1_ps) break;
        double u = uni(rng) * rate;
        std::size_t next = jumps[state].back().first;
        for (const auto& [to, jr] : jumps[state]) {
            if (u < jr) {
                next = to;
                break;
            }
            u -= jr;
        }
        // radiative step: one level down inside the bright ladder
        if (state >= 1 && state <= n_max && next == state - 1) {
            out.push_back({t, static_cast<int>(state)});
            ++emitted[state];
        }
        state = next;
    }
}

// Pulsed mode: each pulse deposits the configured pair count and the
// cascade unwinds level by level. Cascades are generated independently per
// pulse, which keeps every per-line delay distribution exactly the
// cascade convolution (delays longer than the period fold around).
inline void cascade_pulsed(const SimConfig& config, double t0_ps, double t1_ps,
                           std::mt19937_64& rng, std::vector<Emission>& out,
                           std::vector<std::uint64_t>& emitted) {
    const double period = config.pulse_period_ps;
    const int pairs = std::min(config.pulse_pairs_injected, config.ladder.n_max);
    if (pairs == 0) return;
    std::exponential_distribution<double> exp1(1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    // mixture probability q from the amplitude ratio a = A'/A:
    // slow/fast photon-count ratio is a*T'/T, so q = a*T' / (T + a*T')
    std::vector<double> q(static_cast<std::size_t>(config.ladder.n_max) + 1, 0.0);
    std::vector<double> slow_t(q.size(), 0.0);
    for (const auto& [line, sc] : config.slow) {
        const double t_fast = config.ladder.lifetimes_ps[static_cast<std::size_t>(line - 1)];
        const double w = sc.amplitude_ratio * sc.lifetime_ps;
        q[static_cast<std::size_t>(line)] = w / (t_fast + w);
        slow_t[static_cast<std::size_t>(line)] = sc.lifetime_ps;
    }

    const auto first_pulse = static_cast<std::uint64_t>(std::ceil(t0_ps / period));
    for (std::uint64_t j = first_pulse;; ++j) {
        const double t_pulse = static_cast<double>(j) * period;
        if (t_pulse >= t1_ps) break;
        double t = t_pulse;
        for (int level = pairs; level >= 1; --level) {
            const auto k = static_cast<std::size_t>(level);
            double mean = config.ladder.lifetimes_ps[k - 1];
            if (q[k] > 0.0 && uni(rng) < q[k]) mean = slow_t[k];
            t += exp1(rng) * mean;
            out.push_back({t, level});
            ++emitted[k];
        }
    }
}

struct ShardOutput {
    std::vector<PhotonRecord> a, b;
    std::vector<std::uint64_t> emitted;
};

inline ShardOutput run_shard(const SimConfig& config, std::uint64_t shard) {
    std::mt19937_64 rng(shard_seed(config.seed, shard));
    const double total_ps = config.acquisition_ps();
    const double t0 = total_ps * static_cast<double>(shard) / config.shards;
    const double t1 = total_ps * static_cast<double>(shard + 1) / config.shards;

    ShardOutput shard_out;
    shard_out.emitted.assign(static_cast<std::size_t>(config.ladder.n_max) + 1, 0);

    std::vector<Emission> emissions;
    if (config.ladder.pump_rate_inv_ps > 0.0 || config.mode == ExcitationMode::pulsed) {
        if (config.mode == ExcitationMode::cw)
            gillespie_cw(config.ladder, t0, t1, rng, emissions, shard_out.emitted);
        else
            cascade_pulsed(config, t0, t1, rng, emissions, shard_out.emitted);
    }

    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sigma_a = config.detector_a.jitter_fwhm_ps / kFwhmToSigma;
    const double sigma_b = config.detector_b.jitter_fwhm_ps / kFwhmToSigma;

    for (const Emission& e : emissions) {
        const bool to_a = uni(rng) < config.splitter_ratio;
        const DetectorConfig& det = to_a ? config.detector_a : config.detector_b;
        if (!det.passes(e.line)) continue;
        if (det.efficiency < 1.0 && uni(rng) >= det.efficiency) continue;
        double t = e.time_ps;
        const double sigma = to_a ? sigma_a : sigma_b;
        if (sigma > 0.0) t += gauss(rng) * sigma;
        if (t < 0.0) continue;
        PhotonRecord rec{fs_from_ps(t), to_a ? Channel::A : Channel::B,
                         static_cast<std::uint8_t>(e.line)};
        (to_a ? shard_out.a : shard_out.b).push_back(rec);
    }

    // dark counts: homogeneous Poisson per channel, merged after the fact
    std::exponential_distribution<double> exp1(1.0);
    for (int c = 0; c < 2; ++c) {
        const DetectorConfig& det = c == 0 ? config.detector_a : config.detector_b;
        if (det.dark_rate_cps <= 0.0) continue;
        const double rate_inv_ps = det.dark_rate_cps * 1e-12;
        double t = t0;
        auto& stream = c == 0 ? shard_out.a : shard_out.b;
        while (true) {
            t += exp1(rng) / rate_inv_ps;
            if (t >= t1) break;
            stream.push_back({fs_from_ps(t), static_cast<Channel>(c), kDarkCountLine});
        }
    }
    return shard_out;
}

inline void dead_time_sweep(std::vector<PhotonRecord>& stream, double dead_time_ps) {
    if (dead_time_ps <= 0.0 || stream.empty()) return;
    const std::uint64_t dead_fs = fs_from_ps(dead_time_ps);
    std::size_t kept = 1;
    std::uint64_t last = stream[0].time_fs;
    for (std::size_t i = 1; i < stream.size(); ++i) {
        if (stream[i].time_fs - last < dead_fs) continue;
        last = stream[i].time_fs;
        stream[kept++] = stream[i];
    }
    stream.resize(kept);
}

} // namespace detail

// Stochastic emission of the configured ladder through the beamsplitter
// and both detector chains. Deterministic for a given config (seed
// included); shards split the acquisition window and may run concurrently
// without affecting the output.
inline SimResult simulate(const SimConfig& config) {
    config.validate();
    if (config.mode == ExcitationMode::pulsed &&
        config.pulse_period_ps < 10.0 * *std::max_element(config.ladder.lifetimes_ps.begin(),
                                                          config.ladder.lifetimes_ps.end()))
        std::fputs("warning: pulse period below 10x the slowest lifetime, pile-up likely\n",
                   stderr);

    std::vector<detail::ShardOutput> shard_outputs(static_cast<std::size_t>(config.shards));
    if (config.shards == 1) {
        shard_outputs[0] = detail::run_shard(config, 0);
    } else {
        std::vector<std::future<detail::ShardOutput>> futs;
        futs.reserve(static_cast<std::size_t>(config.shards));
        for (int s = 0; s < config.shards; ++s)
            futs.push_back(std::async(std::launch::async, detail::run_shard, std::cref(config),
                                      static_cast<std::uint64_t>(s)));
        for (int s = 0; s < config.shards; ++s)
            shard_outputs[static_cast<std::size_t>(s)] = futs[static_cast<std::size_t>(s)].get();
    }

    SimResult result;
    result.truth.duration_ps = config.acquisition_ps();
    result.truth.emitted.assign(static_cast<std::size_t>(config.ladder.n_max) + 1, 0);

    std::uint64_t total_records = 0;
    for (const auto& so : shard_outputs) total_records += so.a.size() + so.b.size();
    if (total_records > config.max_records)
        throw ResourceError("record cap exceeded: " + std::to_string(total_records) + " > " +
                            std::to_string(config.max_records));

    for (auto& so : shard_outputs) {
        result.stream_a.insert(result.stream_a.end(), so.a.begin(), so.a.end());
        result.stream_b.insert(result.stream_b.end(), so.b.begin(), so.b.end());
        for (std::size_t k = 0; k < so.emitted.size(); ++k)
            result.truth.emitted[k] += so.emitted[k];
    }

    auto by_time = [](const PhotonRecord& x, const PhotonRecord& y) {
        return x.time_fs < y.time_fs;
    };
    std::stable_sort(result.stream_a.begin(), result.stream_a.end(), by_time);
    std::stable_sort(result.stream_b.begin(), result.stream_b.end(), by_time);

    detail::dead_time_sweep(result.stream_a, config.detector_a.dead_time_ps);
    detail::dead_time_sweep(result.stream_b, config.detector_b.dead_time_ps);

    result.truth.detected_a = result.stream_a.size();
    result.truth.detected_b = result.stream_b.size();
    for (const auto& r : result.stream_a)
        if (r.line == kDarkCountLine) ++result.truth.dark_a;
    for (const auto& r : result.stream_b)
        if (r.line == kDarkCountLine) ++result.truth.dark_b;
    return result;
}

// Truth-level lifetime measurement: histogram of (emission time - pulse
// time) per line, folded into one period. Bypasses the detector chain so
// the distributions are the bare cascade statistics.
inline DecayHistogram simulate_pulsed_decay(const SimConfig& config,
                                            double bin_width_ps = 10.0) {
    SimConfig c = config;
    c.mode = ExcitationMode::pulsed;
    c.validate();
    if (!(bin_width_ps > 0.0)) throw ConfigError("decay histogram: bin width must be > 0");

    DecayHistogram h;
    h.bin_width_ps = bin_width_ps;
    h.period_ps = c.pulse_period_ps;

    std::mt19937_64 rng(detail::shard_seed(c.seed, 0));
    std::vector<detail::Emission> emissions;
    std::vector<std::uint64_t> emitted(static_cast<std::size_t>(c.ladder.n_max) + 1, 0);
    detail::cascade_pulsed(c, 0.0, c.acquisition_ps(), rng, emissions, emitted);

    const std::size_t n_bins = h.n_bins();
    for (const auto& e : emissions) {
        const double delay = std::fmod(e.time_ps, c.pulse_period_ps);
        auto& v = h.counts[e.line];
        if (v.empty()) v.assign(n_bins, 0);
        auto bin = static_cast<std::size_t>(delay / bin_width_ps);
        if (bin >= n_bins) bin = n_bins - 1;
        ++v[bin];
    }
    return h;
}

} // namespace qdot

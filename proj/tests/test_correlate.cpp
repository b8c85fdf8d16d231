#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qdot/correlate.hpp"
#include "qdot/sim.hpp"

using namespace qdot;

namespace {

std::vector<std::uint64_t> poisson_stream(double rate_cps, double duration_s,
                                          std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> exp1(1.0);
    const double rate_inv_ps = rate_cps * 1e-12;
    const double t_end = duration_s * 1e12;
    std::vector<std::uint64_t> out;
    double t = 0.0;
    while (true) {
        t += exp1(rng) / rate_inv_ps;
        if (t >= t_end) break;
        out.push_back(fs_from_ps(t));
    }
    return out;
}

} // namespace

TEST_CASE("correlate: one pair lands in the right bin") {
    std::vector<std::uint64_t> start{fs_from_ps(0.0)};
    std::vector<std::uint64_t> stop{fs_from_ps(100.0)};
    const auto h = correlate(std::span<const std::uint64_t>(start),
                             std::span<const std::uint64_t>(stop), 49.0, -1000.0, 1000.0, 1.0);
    CHECK(h.n_c == 1);
    std::size_t hot = 0;
    for (std::size_t i = 0; i < h.n_bins(); ++i)
        if (h.counts[i] > 0) hot = i;
    // +100 ps lies in the bin centered at +98 ps (2 * 49)
    CHECK(h.bin_center_ps(hot) == Catch::Approx(98.0));
    CHECK(std::abs(h.bin_center_ps(hot) - 100.0) <= 24.5);
}

TEST_CASE("correlate: matches the exhaustive pair count on small fixtures") {
    std::mt19937_64 rng(1234);
    std::uniform_int_distribution<std::uint64_t> pick(0, 40'000'000); // 40 ns span
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<std::uint64_t> start(10 + trial), stop(10 + 2 * trial);
        for (auto& t : start) t = pick(rng);
        for (auto& t : stop) t = pick(rng);
        std::sort(start.begin(), start.end());
        std::sort(stop.begin(), stop.end());
        const auto h = correlate(std::span<const std::uint64_t>(start),
                                 std::span<const std::uint64_t>(stop), 49.0, -3000.0, 3000.0, 1.0);
        const auto ref = oracle::brute_force_pairs(start, stop, 49000, h.first_bin_index,
                                                   h.first_bin_index +
                                                       static_cast<std::int64_t>(h.n_bins()) - 1);
        REQUIRE(ref.size() == h.n_bins());
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(h.counts[i] == ref[i]);
        std::uint64_t total = 0;
        for (auto c : h.counts) total += c;
        CHECK(total == h.n_c);
    }
}

TEST_CASE("correlate: swap symmetry of full mode") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<std::uint64_t> pick(0, 100'000'000);
    std::vector<std::uint64_t> a(200), b(150);
    for (auto& t : a) t = pick(rng);
    for (auto& t : b) t = pick(rng);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const auto hab = correlate(std::span<const std::uint64_t>(a),
                               std::span<const std::uint64_t>(b), 49.0, -2000.0, 2000.0, 1.0);
    const auto hba = correlate(std::span<const std::uint64_t>(b),
                               std::span<const std::uint64_t>(a), 49.0, -2000.0, 2000.0, 1.0);
    REQUIRE(hab.n_bins() == hba.n_bins());
    for (std::size_t i = 0; i < hab.n_bins(); ++i)
        CHECK(hab.counts[i] == hba.counts[hba.n_bins() - 1 - i]);
}

TEST_CASE("correlate: total pairs conserved when bins partition the window") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::uint64_t> pick(0, 60'000'000);
    std::vector<std::uint64_t> a(300), b(300);
    for (auto& t : a) t = pick(rng);
    for (auto& t : b) t = pick(rng);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    // 147 = 3 * 49: the coarser centers-at-multiples grid shares bin edges
    const auto fine = correlate(std::span<const std::uint64_t>(a),
                                std::span<const std::uint64_t>(b), 49.0, -3013.5, 3013.5, 1.0);
    const auto coarse = correlate(std::span<const std::uint64_t>(a),
                                  std::span<const std::uint64_t>(b), 147.0, -3013.5, 3013.5, 1.0);
    CHECK(fine.tau_min_ps == coarse.tau_min_ps);
    CHECK(fine.tau_max_ps == coarse.tau_max_ps);
    CHECK(fine.n_c == coarse.n_c);
    // and the coarse bins are exact sums of fine triples
    for (std::size_t i = 0; i < coarse.n_bins(); ++i)
        CHECK(coarse.counts[i] ==
              fine.counts[3 * i] + fine.counts[3 * i + 1] + fine.counts[3 * i + 2]);
}

TEST_CASE("correlate: unsorted input is rejected") {
    std::vector<std::uint64_t> bad{100, 50};
    std::vector<std::uint64_t> good{10, 20};
    CHECK_THROWS_AS(correlate(std::span<const std::uint64_t>(bad),
                              std::span<const std::uint64_t>(good), 49.0, -100.0, 100.0, 1.0),
                    InputError);
}

TEST_CASE("correlate: independent Poisson streams give the analytic mean") {
    // scaled-down analog of the acquisition in the normalization example:
    // mean coincidences per bin = r1 * r2 * bin * T
    const double r1 = 1e6, r2 = 7e5, T = 2.0, bin_ps = 49.0;
    const auto a = poisson_stream(r1, T, 11);
    const auto b = poisson_stream(r2, T, 12);
    const auto h = correlate(std::span<const std::uint64_t>(a),
                             std::span<const std::uint64_t>(b), bin_ps, -3000.0, 3000.0, T);
    const double expected = r1 * r2 * bin_ps * 1e-12 * T;
    double total = 0.0;
    for (auto c : h.counts) total += static_cast<double>(c);
    const double mean = total / static_cast<double>(h.n_bins());
    const double sigma_mean = std::sqrt(expected / static_cast<double>(h.n_bins()));
    CHECK(std::abs(mean - expected) < 4.0 * sigma_mean);
    // per-bin scatter is Poisson: chi^2 per bin around 1
    double chi2 = 0.0;
    for (auto c : h.counts) {
        const double d = static_cast<double>(c) - expected;
        chi2 += d * d / expected;
    }
    CHECK(chi2 / static_cast<double>(h.n_bins()) < 1.5);
}

TEST_CASE("normalize: flat counts at the Poisson level give g2 = 1") {
    CorrelationHistogram h;
    h.bin_width_ps = 49.0;
    h.acquisition_s = 12600.0;
    h.rate_start_cps = 10000.0;
    h.rate_stop_cps = 7000.0;
    h.mode = CorrelationMode::full;
    h.first_bin_index = -61;
    const double denom = 10000.0 * 7000.0 * 49e-12 * 12600.0; // = 43.218
    CHECK(denom == Catch::Approx(43.2).margin(0.1));
    h.counts.assign(123, static_cast<std::uint64_t>(std::llround(denom)));
    const auto c = normalize(h);
    for (std::size_t i = 0; i < c.g2.size(); ++i) {
        CHECK(c.g2[i] == Catch::Approx(43.0 / denom)); // exact counts / denom
        CHECK(c.err[i] == Catch::Approx(std::sqrt(43.0) / denom));
    }
}

TEST_CASE("normalize: zero rate is an error") {
    CorrelationHistogram h;
    h.counts.assign(10, 0);
    CHECK_THROWS_AS(normalize(h), NumericsError);
}

TEST_CASE("normalize: simulated dot streams show the antibunching dip") {
    SimConfig sc;
    sc.ladder.pump_rate_inv_ps = 0.65 / 251.0;
    sc.acquisition_s = 2e-4;
    sc.seed = 71;
    sc.detector_a.line_filter = {1}; // both monochromators on the exciton line
    sc.detector_b.line_filter = {1};
    const auto res = simulate(sc);
    const auto h =
        correlate(std::span<const PhotonRecord>(res.stream_a),
                  std::span<const PhotonRecord>(res.stream_b), 49.0, -3000.0, 3000.0,
                  sc.acquisition_s);
    const auto curve = normalize(h);
    // dip at zero, decorrelated far out
    const std::size_t mid = curve.g2.size() / 2;
    CHECK(curve.g2[mid] < 0.25);
    CHECK(curve.g2.front() == Catch::Approx(1.0).margin(0.15));
    CHECK(curve.g2.back() == Catch::Approx(1.0).margin(0.15));
}

TEST_CASE("start_stop approaches full mode at low rates") {
    const double T = 20.0;
    const auto a = poisson_stream(2e4, T, 21);
    const auto b = poisson_stream(1.5e4, T, 22);
    const auto full = correlate(std::span<const std::uint64_t>(a),
                                std::span<const std::uint64_t>(b), 98.0, 0.0, 3000.0, T,
                                CorrelationMode::full);
    const auto ss = correlate(std::span<const std::uint64_t>(a),
                              std::span<const std::uint64_t>(b), 98.0, 0.0, 3000.0, T,
                              CorrelationMode::start_stop);
    REQUIRE(full.n_bins() == ss.n_bins());
    for (std::size_t i = 0; i < full.n_bins(); ++i) {
        const double diff = std::abs(static_cast<double>(full.counts[i]) -
                                     static_cast<double>(ss.counts[i]));
        const double scale = std::sqrt(static_cast<double>(full.counts[i]) + 1.0);
        CHECK(diff < 4.0 * scale);
    }
    // start_stop never counts more than one stop per start
    std::uint64_t per_start = 0;
    for (auto c : ss.counts) per_start += c;
    CHECK(per_start <= a.size());
}

TEST_CASE("start_stop takes only the first stop after each start") {
    std::vector<std::uint64_t> start{fs_from_ps(1000.0)};
    std::vector<std::uint64_t> stop{fs_from_ps(1100.0), fs_from_ps(1200.0)};
    const auto h = correlate(std::span<const std::uint64_t>(start),
                             std::span<const std::uint64_t>(stop), 49.0, -1000.0, 1000.0, 1.0,
                             CorrelationMode::start_stop);
    CHECK(h.n_c == 1);
    std::size_t hot = 0;
    for (std::size_t i = 0; i < h.n_bins(); ++i)
        if (h.counts[i] > 0) hot = i;
    CHECK(h.bin_center_ps(hot) == Catch::Approx(98.0)); // 100 ps, not 200 ps
}

TEST_CASE("background: the worked example and the involution") {
    BackgroundRates b;
    b.start_total_cps = 10000.0;
    b.start_background_cps = 1000.0;
    b.stop_total_cps = 7000.0;
    b.stop_background_cps = 800.0;
    CHECK(b.rho_start() == Catch::Approx(0.9));
    CHECK(b.rho_stop() == Catch::Approx(6200.0 / 7000.0));

    // model dip of 0 appears as 1 - rho*rho ~ 0.203 in the measured curve
    const auto measured = background_apply({0.0, 0.5, 1.0, 1.3}, b);
    CHECK(measured[0] == Catch::Approx(1.0 - 0.9 * 6200.0 / 7000.0).margin(1e-12));
    CHECK(measured[0] == Catch::Approx(0.203).margin(5e-4));
    CHECK(measured[2] == Catch::Approx(1.0).margin(1e-15));

    NormalizedCurve nc;
    nc.tau_ps = {0.0, 49.0, 98.0, 147.0};
    nc.g2 = measured;
    nc.err = {0.01, 0.01, 0.01, 0.01};
    const auto corrected = background_correct(nc, b);
    const std::vector<double> truth{0.0, 0.5, 1.0, 1.3};
    for (std::size_t i = 0; i < truth.size(); ++i)
        CHECK(std::abs(corrected.g2[i] - truth[i]) < 1e-12);

    // identity at rho = 1
    BackgroundRates clean;
    clean.start_total_cps = clean.stop_total_cps = 1000.0;
    const auto same = background_apply({0.3, 1.2}, clean);
    CHECK(same[0] == 0.3);
    CHECK(same[1] == 1.2);
}

TEST_CASE("background: all-background channel is an error") {
    BackgroundRates b;
    b.start_total_cps = 1000.0;
    b.start_background_cps = 1000.0;
    b.stop_total_cps = 7000.0;
    b.stop_background_cps = 800.0;
    NormalizedCurve nc;
    nc.tau_ps = {0.0};
    nc.g2 = {1.0};
    nc.err = {0.1};
    CHECK_THROWS_AS(background_correct(nc, b), NumericsError);
}

TEST_CASE("decay histogram: folding and edge cases") {
    std::vector<PhotonRecord> records{
        {fs_from_ps(12500.0 + 300.0), Channel::A, 1},
    };
    const auto h = decay_histogram(records, 12500.0, 10.0);
    const auto& v = h.counts.at(1);
    std::size_t hot = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] > 0) hot = i;
    CHECK(h.bin_center_ps(hot) == Catch::Approx(305.0));
    CHECK(v[hot] == 1);

    const auto empty = decay_histogram(std::span<const PhotonRecord>(), 12500.0, 10.0);
    CHECK(empty.counts.empty());
}

TEST_CASE("decay histogram: recovers the generating lifetime") {
    SimConfig c;
    c.ladder.pump_rate_inv_ps = 0.0;
    c.mode = ExcitationMode::pulsed;
    c.pulse_pairs_injected = 1;
    c.acquisition_s = 12500.0 * 3e5 * 1e-12;
    c.seed = 55;
    const auto res = simulate(c);
    auto all = res.stream_a;
    all.insert(all.end(), res.stream_b.begin(), res.stream_b.end());
    std::sort(all.begin(), all.end(),
              [](const PhotonRecord& x, const PhotonRecord& y) { return x.time_fs < y.time_fs; });
    const auto h = decay_histogram(all, 12500.0, 5.0);
    const auto& v = h.counts.at(1);
    double s = 0.0, n = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += static_cast<double>(v[i]) * h.bin_center_ps(i);
        n += static_cast<double>(v[i]);
    }
    CHECK(std::abs(s / n - 251.0) < 0.01 * 251.0);
}

TEST_CASE("dark-variant Monte Carlo widens the dip against the plain ladder") {
    auto dip_half_rise = [](const LadderConfig& lad, std::uint64_t seed) {
        SimConfig c;
        c.ladder = lad;
        c.acquisition_s = 4e-4;
        c.seed = seed;
        c.detector_a.line_filter = {1};
        c.detector_b.line_filter = {1};
        const auto res = simulate(c);
        const auto h = correlate(std::span<const PhotonRecord>(res.stream_a),
                                 std::span<const PhotonRecord>(res.stream_b), 21.0, -4000.0,
                                 4000.0, c.acquisition_s);
        const auto curve = normalize(h);
        // first tau >= 0 where g2 rises through half its far level; the
        // baseline averages several edge bins to tame Poisson noise
        double base = 0.0;
        for (std::size_t i = 0; i < 8; ++i)
            base += curve.g2[i] + curve.g2[curve.g2.size() - 1 - i];
        base /= 16.0;
        for (std::size_t i = curve.g2.size() / 2; i < curve.g2.size(); ++i)
            if (curve.g2[i] >= 0.5 * base) return curve.tau_ps[i];
        return curve.tau_ps.back();
    };
    LadderConfig plain;
    plain.pump_rate_inv_ps = 0.1 / 251.0;
    LadderConfig darkened = plain;
    darkened.dark = DarkConfig{1.0 / 125.0, 1.0 / 500.0};
    const double wp = dip_half_rise(plain, 201);
    const double wd = dip_half_rise(darkened, 202);
    CHECK(wd > 1.25 * wp);
}

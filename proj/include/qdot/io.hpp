#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qdot/correlate.hpp"
#include "qdot/errors.hpp"
#include "qdot/fit.hpp"
#include "qdot/irf.hpp"
#include "qdot/sim.hpp"

namespace qdot {

// ---------------------------------------------------------------------------
// number formatting: shortest representation that parses back to the exact
// same double, so emitted CSVs are both compact and lossless
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline double parse_double(std::string_view s, const std::string& context) {
    double v = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    // from_chars does not accept "inf"
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        throw InputError("cannot parse number '" + std::string(s) + "' in " + context);
    return v;
}

inline std::int64_t parse_int(std::string_view s, const std::string& context) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw InputError("cannot parse integer '" + std::string(s) + "' in " + context);
    return v;
}

// ---------------------------------------------------------------------------
// timestamp files: binary "QDTS" (magic, version byte, then packed records
// of u64 femtoseconds + u8 channel + u8 line, little endian), with a CSV
// text alternative selected by the .csv extension
// ---------------------------------------------------------------------------

namespace detail {

inline bool has_suffix(const std::string& path, std::string_view suffix) {
    return path.size() >= suffix.size() &&
           path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline void put_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

} // namespace detail

inline constexpr char kTimestampMagic[4] = {'Q', 'D', 'T', 'S'};
inline constexpr std::uint8_t kTimestampVersion = 1;

inline void write_timestamps(const std::string& path, std::span<const PhotonRecord> records) {
    if (detail::has_suffix(path, ".csv")) {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw InputError("cannot open '" + path + "' for writing");
        f << "time_fs,channel,line\n";
        for (const auto& r : records)
            f << r.time_fs << ',' << (r.channel == Channel::A ? 'A' : 'B') << ','
              << static_cast<int>(r.line) << '\n';
        if (!f) throw InputError("write failed on '" + path + "'");
        return;
    }
    std::string buf;
    buf.reserve(5 + records.size() * 10);
    buf.append(kTimestampMagic, 4);
    buf.push_back(static_cast<char>(kTimestampVersion));
    for (const auto& r : records) {
        detail::put_u64_le(buf, r.time_fs);
        buf.push_back(static_cast<char>(static_cast<std::uint8_t>(r.channel)));
        buf.push_back(static_cast<char>(r.line));
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open '" + path + "' for writing");
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw InputError("write failed on '" + path + "'");
}

inline std::vector<PhotonRecord> read_timestamps(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open timestamp file '" + path + "'");
    std::vector<PhotonRecord> records;

    if (detail::has_suffix(path, ".csv")) {
        std::string line;
        if (!std::getline(f, line)) throw InputError("empty timestamp CSV '" + path + "'");
        std::size_t lineno = 1;
        while (std::getline(f, line)) {
            ++lineno;
            if (line.empty()) continue;
            const auto c1 = line.find(',');
            const auto c2 = line.find(',', c1 + 1);
            if (c1 == std::string::npos || c2 == std::string::npos)
                throw InputError(path + ":" + std::to_string(lineno) + ": need 3 columns");
            PhotonRecord r;
            r.time_fs = static_cast<std::uint64_t>(
                parse_int(std::string_view(line).substr(0, c1), path));
            const std::string_view ch = std::string_view(line).substr(c1 + 1, c2 - c1 - 1);
            if (ch == "A" || ch == "0")
                r.channel = Channel::A;
            else if (ch == "B" || ch == "1")
                r.channel = Channel::B;
            else
                throw InputError(path + ":" + std::to_string(lineno) + ": bad channel");
            r.line = static_cast<std::uint8_t>(
                parse_int(std::string_view(line).substr(c2 + 1), path));
            records.push_back(r);
        }
        return records;
    }

    std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (data.size() < 5 || std::memcmp(data.data(), kTimestampMagic, 4) != 0)
        throw InputError("'" + path + "' is not a QDTS timestamp file");
    if (static_cast<std::uint8_t>(data[4]) != kTimestampVersion)
        throw InputError("'" + path + "': unsupported QDTS version");
    if ((data.size() - 5) % 10 != 0)
        throw InputError("'" + path + "': truncated QDTS record");
    const std::size_t n = (data.size() - 5) / 10;
    records.resize(n);
    const auto* p = reinterpret_cast<const unsigned char*>(data.data()) + 5;
    for (std::size_t i = 0; i < n; ++i, p += 10) {
        records[i].time_fs = detail::get_u64_le(p);
        records[i].channel = static_cast<Channel>(p[8]);
        records[i].line = p[9];
    }
    return records;
}

// ---------------------------------------------------------------------------
// histogram / curve CSVs (comma separator, '.' decimal, LF endings)
// ---------------------------------------------------------------------------

inline void write_histogram_csv(const std::string& path, const CorrelationHistogram& h,
                                const NormalizedCurve* normalized = nullptr) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open '" + path + "' for writing");
    f << "tau_ps_bin_center,counts,g2,g2_err\n";
    for (std::size_t i = 0; i < h.n_bins(); ++i) {
        f << format_double(h.bin_center_ps(i)) << ',' << h.counts[i] << ',';
        if (normalized)
            f << format_double(normalized->g2[i]) << ',' << format_double(normalized->err[i]);
        else
            f << ',';
        f << '\n';
    }
    if (!f) throw InputError("write failed on '" + path + "'");
}

// Reads tau/g2/err columns back from a histogram CSV (the g2 columns must
// be present, i.e. the histogram was written normalized).
inline NormalizedCurve read_normalized_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open histogram CSV '" + path + "'");
    std::string line;
    if (!std::getline(f, line) || line.rfind("tau_ps_bin_center,", 0) != 0)
        throw InputError("'" + path + "' is not a histogram CSV");
    NormalizedCurve c;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string_view> cols;
        std::string_view sv(line);
        std::size_t pos = 0;
        while (true) {
            const auto comma = sv.find(',', pos);
            cols.push_back(sv.substr(pos, comma - pos));
            if (comma == std::string_view::npos) break;
            pos = comma + 1;
        }
        if (cols.size() != 4)
            throw InputError(path + ":" + std::to_string(lineno) + ": need 4 columns");
        if (cols[2].empty() || cols[3].empty())
            throw InputError(path + ":" + std::to_string(lineno) +
                             ": histogram is not normalized (empty g2 column)");
        c.tau_ps.push_back(parse_double(cols[0], path));
        c.g2.push_back(parse_double(cols[2], path));
        c.err.push_back(parse_double(cols[3], path));
    }
    return c;
}

inline void write_decay_csv(const std::string& path, const DecayHistogram& h) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open '" + path + "' for writing");
    f << "line,delay_ps_bin_center,counts\n";
    for (const auto& [line, counts] : h.counts)
        for (std::size_t i = 0; i < counts.size(); ++i)
            f << line << ',' << format_double(h.bin_center_ps(i)) << ',' << counts[i] << '\n';
    if (!f) throw InputError("write failed on '" + path + "'");
}

inline DecayHistogram read_decay_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open decay CSV '" + path + "'");
    std::string line;
    if (!std::getline(f, line) || line.rfind("line,", 0) != 0)
        throw InputError("'" + path + "' is not a decay CSV");
    std::map<int, std::vector<std::pair<double, std::uint64_t>>> rows;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw InputError(path + ":" + std::to_string(lineno) + ": need 3 columns");
        const int ln = static_cast<int>(parse_int(std::string_view(line).substr(0, c1), path));
        const double t = parse_double(std::string_view(line).substr(c1 + 1, c2 - c1 - 1), path);
        const auto n = parse_int(std::string_view(line).substr(c2 + 1), path);
        rows[ln].emplace_back(t, static_cast<std::uint64_t>(n));
    }
    DecayHistogram h;
    for (auto& [ln, v] : rows) {
        if (v.size() < 2) throw InputError("'" + path + "': too few bins for line " +
                                           std::to_string(ln));
        const double width = v[1].first - v[0].first;
        h.bin_width_ps = width;
        h.period_ps = v.back().first + 0.5 * width;
        auto& counts = h.counts[ln];
        counts.resize(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) counts[i] = v[i].second;
    }
    return h;
}

// Generic two-column (x,y) CSV with a one-line header, e.g. saturation data.
inline std::pair<std::vector<double>, std::vector<double>> read_xy_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open data file '" + path + "'");
    std::string line;
    if (!std::getline(f, line)) throw InputError("empty data file '" + path + "'");
    std::pair<std::vector<double>, std::vector<double>> out;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto c = line.find(',');
        if (c == std::string::npos)
            throw InputError(path + ":" + std::to_string(lineno) + ": need 2 columns");
        out.first.push_back(parse_double(std::string_view(line).substr(0, c), path));
        out.second.push_back(parse_double(std::string_view(line).substr(c + 1), path));
    }
    return out;
}

inline void write_fit_result_text(const std::string& path, const FitResult& r) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open '" + path + "' for writing");
    for (std::size_t i = 0; i < r.names.size(); ++i)
        f << r.names[i] << " = " << format_double(r.estimates[i]) << " +- "
          << format_double(r.std_errors[i]) << '\n';
    f << "residual_norm = " << format_double(r.residual_norm) << '\n';
    f << "converged = " << (r.converged ? "true" : "false") << '\n';
    f << "iterations = " << r.iterations << '\n';
    for (const auto& w : r.warnings) f << "warning: " << w << '\n';
    if (!f) throw InputError("write failed on '" + path + "'");
}

inline void write_fit_result_csv(const std::string& path, const FitResult& r) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open '" + path + "' for writing");
    f << "name,estimate,std_error\n";
    for (std::size_t i = 0; i < r.names.size(); ++i)
        f << r.names[i] << ',' << format_double(r.estimates[i]) << ','
          << format_double(r.std_errors[i]) << '\n';
    if (!f) throw InputError("write failed on '" + path + "'");
}

// ---------------------------------------------------------------------------
// run configuration: one INI-style file drives a whole pipeline run.
// Unknown sections or keys are rejected. Keys carry explicit units.
// ---------------------------------------------------------------------------

struct CorrelateConfig {
    double bin_ps = 49.0;
    double window_ns = 3.0;
    CorrelationMode mode = CorrelationMode::full;
};

struct RunConfig {
    SimConfig sim; // embeds LadderConfig and both detectors
    CorrelateConfig correlate;
    std::optional<BackgroundRates> background;
    Irf irf;
    int fit_line = 1;
};

namespace detail {

struct IniFile {
    // section -> key -> (value, line number)
    std::map<std::string, std::map<std::string, std::pair<std::string, std::size_t>>> data;
    std::string path;

    bool has(const std::string& sec, const std::string& key) const {
        auto s = data.find(sec);
        return s != data.end() && s->second.count(key) > 0;
    }
    std::optional<std::string> take(const std::string& sec, const std::string& key) {
        auto s = data.find(sec);
        if (s == data.end()) return std::nullopt;
        auto k = s->second.find(key);
        if (k == s->second.end()) return std::nullopt;
        std::string v = k->second.first;
        s->second.erase(k);
        return v;
    }
    void finish() const {
        for (const auto& [sec, keys] : data)
            for (const auto& [key, v] : keys)
                throw ConfigError(path + ":" + std::to_string(v.second) + ": unknown key '" +
                                  key + "' in section [" + sec + "]");
    }
};

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline IniFile parse_ini(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot open config file '" + path + "'");
    static const std::set<std::string> known_sections = {
        "ladder", "sim", "detector.A", "detector.B", "correlate", "irf", "fit"};
    IniFile ini;
    ini.path = path;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed section");
            section = t.substr(1, t.size() - 2);
            if (known_sections.count(section) == 0)
                throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown section [" +
                                  section + "]");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos || section.empty())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(std::string_view(t).substr(0, eq));
        const std::string value = trim(std::string_view(t).substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key or value");
        if (!ini.data[section].emplace(key, std::make_pair(value, lineno)).second)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate key '" + key +
                              "'");
    }
    return ini;
}

inline double ini_double(IniFile& ini, const std::string& sec, const std::string& key,
                         double fallback) {
    auto v = ini.take(sec, key);
    if (!v) return fallback;
    try {
        return parse_double(*v, "[" + sec + "] " + key);
    } catch (const InputError& e) {
        throw ConfigError(e.what());
    }
}

inline std::int64_t ini_int(IniFile& ini, const std::string& sec, const std::string& key,
                            std::int64_t fallback) {
    auto v = ini.take(sec, key);
    if (!v) return fallback;
    try {
        return parse_int(*v, "[" + sec + "] " + key);
    } catch (const InputError& e) {
        throw ConfigError(e.what());
    }
}

inline bool ini_bool(IniFile& ini, const std::string& sec, const std::string& key,
                     bool fallback) {
    auto v = ini.take(sec, key);
    if (!v) return fallback;
    if (*v == "true") return true;
    if (*v == "false") return false;
    throw ConfigError("[" + sec + "] " + key + ": expected true or false, got '" + *v + "'");
}

inline DetectorConfig parse_detector(IniFile& ini, const std::string& sec) {
    DetectorConfig d;
    d.efficiency = ini_double(ini, sec, "efficiency", d.efficiency);
    d.dark_rate_cps = ini_double(ini, sec, "dark_rate_cps", d.dark_rate_cps);
    d.jitter_fwhm_ps = ini_double(ini, sec, "jitter_fwhm_ps", d.jitter_fwhm_ps);
    d.dead_time_ps = ini_double(ini, sec, "dead_time_ps", d.dead_time_ps);
    if (auto lines = ini.take(sec, "lines")) {
        std::stringstream ss(*lines);
        std::string tok;
        while (std::getline(ss, tok, ','))
            d.line_filter.push_back(
                static_cast<int>(parse_int(trim(tok), "[" + sec + "] lines")));
    }
    return d;
}

} // namespace detail

inline RunConfig load_run_config(const std::string& path) {
    detail::IniFile ini = detail::parse_ini(path);
    RunConfig rc;

    // [ladder]
    LadderConfig& lad = rc.sim.ladder;
    lad.n_max = static_cast<int>(detail::ini_int(ini, "ladder", "n_max", lad.n_max));
    if (lad.n_max >= 1) {
        std::vector<double> defaults{251.0, 185.0, 150.0, 120.0};
        lad.lifetimes_ps.assign(static_cast<std::size_t>(lad.n_max), 0.0);
        for (int k = 1; k <= lad.n_max; ++k) {
            const double dflt =
                k <= 4 ? defaults[static_cast<std::size_t>(k - 1)]
                       : defaults.back() / static_cast<double>(k - 3); // keep decreasing
            lad.lifetimes_ps[static_cast<std::size_t>(k - 1)] = detail::ini_double(
                ini, "ladder", "t" + std::to_string(k) + "_ps", dflt);
        }
    }
    const bool has_rel = ini.has("ladder", "pump_rate_in_gamma1");
    const bool has_abs = ini.has("ladder", "pump_rate_inv_ps");
    if (has_rel && has_abs)
        throw ConfigError("[ladder]: give pump_rate_in_gamma1 or pump_rate_inv_ps, not both");
    if (has_rel)
        lad.pump_rate_inv_ps =
            detail::ini_double(ini, "ladder", "pump_rate_in_gamma1", 0.0) / lad.lifetimes_ps.at(0);
    else
        lad.pump_rate_inv_ps = detail::ini_double(ini, "ladder", "pump_rate_inv_ps", 0.0);
    if (detail::ini_bool(ini, "ladder", "dark_enabled", false)) {
        DarkConfig dark;
        dark.gamma_bd_inv_ps = detail::ini_double(ini, "ladder", "dark_gamma_bd_inv_ps", 0.0);
        dark.gamma_db_inv_ps = detail::ini_double(ini, "ladder", "dark_gamma_db_inv_ps", 0.0);
        dark.t_dark_ps = detail::ini_double(ini, "ladder", "dark_t_dark_ps", dark.t_dark_ps);
        lad.dark = dark;
    } else {
        // tolerate the dark keys but ignore them when disabled
        ini.take("ladder", "dark_gamma_bd_inv_ps");
        ini.take("ladder", "dark_gamma_db_inv_ps");
        ini.take("ladder", "dark_t_dark_ps");
    }

    // [sim]
    rc.sim.acquisition_s = detail::ini_double(ini, "sim", "acquisition_s", rc.sim.acquisition_s);
    rc.sim.splitter_ratio = detail::ini_double(ini, "sim", "splitter_ratio", rc.sim.splitter_ratio);
    rc.sim.seed = static_cast<std::uint64_t>(detail::ini_int(ini, "sim", "seed", 1));
    if (auto mode = ini.take("sim", "mode")) {
        if (*mode == "cw")
            rc.sim.mode = ExcitationMode::cw;
        else if (*mode == "pulsed")
            rc.sim.mode = ExcitationMode::pulsed;
        else
            throw ConfigError("[sim] mode: expected cw or pulsed, got '" + *mode + "'");
    }
    rc.sim.pulse_period_ps = detail::ini_double(ini, "sim", "pulse_period_ps", rc.sim.pulse_period_ps);
    rc.sim.pulse_pairs_injected =
        static_cast<int>(detail::ini_int(ini, "sim", "pulse_pairs", rc.sim.pulse_pairs_injected));
    rc.sim.shards = static_cast<int>(detail::ini_int(ini, "sim", "shards", rc.sim.shards));
    rc.sim.max_records = static_cast<std::uint64_t>(
        detail::ini_int(ini, "sim", "max_records", static_cast<std::int64_t>(rc.sim.max_records)));
    for (int k = 1; k <= lad.n_max; ++k) {
        const std::string base = "slow" + std::to_string(k);
        const bool has_t = ini.has("sim", base + "_lifetime_ps");
        const bool has_a = ini.has("sim", base + "_amplitude_ratio");
        if (has_t != has_a)
            throw ConfigError("[sim]: " + base + " needs both lifetime and amplitude ratio");
        if (has_t) {
            SlowComponent sc;
            sc.lifetime_ps = detail::ini_double(ini, "sim", base + "_lifetime_ps", 0.0);
            sc.amplitude_ratio = detail::ini_double(ini, "sim", base + "_amplitude_ratio", 0.0);
            rc.sim.slow[k] = sc;
        }
    }

    rc.sim.detector_a = detail::parse_detector(ini, "detector.A");
    rc.sim.detector_b = detail::parse_detector(ini, "detector.B");

    // [correlate]
    rc.correlate.bin_ps = detail::ini_double(ini, "correlate", "bin_ps", rc.correlate.bin_ps);
    rc.correlate.window_ns = detail::ini_double(ini, "correlate", "window_ns", rc.correlate.window_ns);
    if (auto mode = ini.take("correlate", "mode")) {
        if (*mode == "full")
            rc.correlate.mode = CorrelationMode::full;
        else if (*mode == "start_stop")
            rc.correlate.mode = CorrelationMode::start_stop;
        else
            throw ConfigError("[correlate] mode: expected full or start_stop");
    }
    {
        const bool any = ini.has("correlate", "rate_start_cps") ||
                         ini.has("correlate", "rate_stop_cps") ||
                         ini.has("correlate", "background_start_cps") ||
                         ini.has("correlate", "background_stop_cps");
        if (any) {
            BackgroundRates b;
            b.start_total_cps = detail::ini_double(ini, "correlate", "rate_start_cps", 0.0);
            b.stop_total_cps = detail::ini_double(ini, "correlate", "rate_stop_cps", 0.0);
            b.start_background_cps =
                detail::ini_double(ini, "correlate", "background_start_cps", 0.0);
            b.stop_background_cps =
                detail::ini_double(ini, "correlate", "background_stop_cps", 0.0);
            b.validate();
            rc.background = b;
        }
    }

    rc.irf.fwhm_ps = detail::ini_double(ini, "irf", "fwhm_ps", rc.irf.fwhm_ps);
    rc.fit_line = static_cast<int>(detail::ini_int(ini, "fit", "line", rc.fit_line));

    ini.finish();
    rc.sim.ladder.validate();
    rc.sim.detector_a.validate();
    rc.sim.detector_b.validate();
    rc.irf.validate();
    if (!(rc.correlate.bin_ps > 0.0) || !(rc.correlate.window_ns > 0.0))
        throw ConfigError("[correlate]: bin and window must be positive");
    return rc;
}

// Plot-ready model curve columns (raw model, IRF-convolved, background-
// adjusted, and both effects together).
struct ModelG2Curve {
    std::vector<double> tau_ps;
    std::vector<double> raw;
    std::vector<double> with_irf;
    std::vector<double> with_background;
    std::vector<double> with_background_irf;
};

inline void write_model_g2_csv(const std::string& path, const ModelG2Curve& c) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open '" + path + "' for writing");
    f << "tau_ps,g2_model,g2_irf,g2_bg,g2_bg_irf\n";
    for (std::size_t i = 0; i < c.tau_ps.size(); ++i)
        f << format_double(c.tau_ps[i]) << ',' << format_double(c.raw[i]) << ','
          << format_double(c.with_irf[i]) << ',' << format_double(c.with_background[i]) << ','
          << format_double(c.with_background_irf[i]) << '\n';
    if (!f) throw InputError("write failed on '" + path + "'");
}

inline std::string truth_summary_text(const TruthSummary& t) {
    std::ostringstream os;
    os << "duration_s: " << format_double(t.duration_ps * 1e-12) << '\n';
    for (std::size_t k = 1; k < t.emitted.size(); ++k)
        os << "emitted_line_" << k << ": " << t.emitted[k] << '\n';
    for (std::size_t k = 1; k < t.emitted.size(); ++k)
        os << "emitted_rate_line_" << k
           << "_cps: " << format_double(t.emitted_rate_cps(static_cast<int>(k))) << '\n';
    os << "detected_a: " << t.detected_a << '\n';
    os << "detected_b: " << t.detected_b << '\n';
    os << "dark_counts_a: " << t.dark_a << '\n';
    os << "dark_counts_b: " << t.dark_b << '\n';
    return os.str();
}

} // namespace qdot

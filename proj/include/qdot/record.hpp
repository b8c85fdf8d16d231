#pragma once

#include <cmath>
#include <cstdint>

namespace qdot {

enum class Channel : std::uint8_t { A = 0, B = 1 };

// Line tag of a detector dark count (no emitting level).
inline constexpr std::uint8_t kDarkCountLine = 255;

// One detected event. Timestamps are integer femtoseconds so that files
// round-trip exactly; helpers convert to/from the picosecond unit used by
// the physics code.
struct PhotonRecord {
    std::uint64_t time_fs = 0;
    Channel channel = Channel::A;
    std::uint8_t line = 0;
};

inline std::uint64_t fs_from_ps(double t_ps) {
    return static_cast<std::uint64_t>(std::llround(t_ps * 1e3));
}

inline double ps_from_fs(std::uint64_t t_fs) { return static_cast<double>(t_fs) * 1e-3; }

} // namespace qdot

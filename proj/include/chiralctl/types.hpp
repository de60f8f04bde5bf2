#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace chiralctl {

// Handedness selects the sign of the two-photon coupling: the field triple
// seen by the left species is (op, +oq, os), the right species sees (op, -oq, os).
enum class Chirality { Left, Right };

inline constexpr double coupling_sign(Chirality c) {
  return c == Chirality::Left ? +1.0 : -1.0;
}

// One piecewise-constant control interval. Amplitudes are signed; phases are
// extra offsets on top of the fixed internal phase convention (the two-photon
// coupling always carries a built-in pi/2 relative to the other two).
struct PulseSegment {
  double dt = 0.0;
  double op = 0.0, oq = 0.0, os = 0.0;  // amplitudes of the three couplings
  double pp = 0.0, pq = 0.0, ps = 0.0;  // phase offsets (radians)

  bool real_fields() const { return pp == 0.0 && pq == 0.0 && ps == 0.0; }
};

struct ScheduleMeta {
  std::string protocol;
  double s = std::numeric_limits<double>::quiet_NaN();
  double objective = std::numeric_limits<double>::quiet_NaN();
  std::map<std::string, double> trace;  // named intermediates of the derivation
};

struct PulseSchedule {
  double omega0 = 1.0;  // bound on |op|, |os|
  double omega1 = 1.0;  // bound on |oq|
  std::vector<PulseSegment> segments;
  ScheduleMeta meta;

  double total_duration() const {
    double t = 0.0;
    for (const auto& seg : segments) t += seg.dt;
    return t;
  }

  bool real_fields() const {
    for (const auto& seg : segments)
      if (!seg.real_fields()) return false;
    return true;
  }
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::domain_error(msg);
}

}  // namespace chiralctl

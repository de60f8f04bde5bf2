#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>

#include <json.hpp>

#include "chiralctl/spin.hpp"
#include "chiralctl/types.hpp"

namespace chiralctl {

// field order is kept as written so documents diff cleanly
using Json = nlohmann::ordered_json;

inline Json schedule_to_json(const PulseSchedule& sched) {
  Json doc;
  doc["format_version"] = "1";
  doc["omega0"] = sched.omega0;
  doc["omega1"] = sched.omega1;
  doc["segments"] = Json::array();
  for (const auto& seg : sched.segments) {
    Json j;
    j["dt"] = seg.dt;
    j["op"] = seg.op;
    j["oq"] = seg.oq;
    j["os"] = seg.os;
    j["pp"] = seg.pp;
    j["pq"] = seg.pq;
    j["ps"] = seg.ps;
    doc["segments"].push_back(std::move(j));
  }
  Json meta = Json::object();
  if (!sched.meta.protocol.empty()) meta["protocol"] = sched.meta.protocol;
  if (std::isfinite(sched.meta.s)) meta["s"] = sched.meta.s;
  if (std::isfinite(sched.meta.objective))
    meta["objective"] = sched.meta.objective;
  if (!sched.meta.trace.empty()) {
    Json trace = Json::object();
    for (const auto& [key, value] : sched.meta.trace) trace[key] = value;
    meta["trace"] = std::move(trace);
  }
  doc["meta"] = std::move(meta);
  return doc;
}

inline PulseSchedule schedule_from_json(const Json& doc) {
  if (!doc.is_object() || !doc.contains("format_version"))
    throw std::runtime_error("schedule document: missing format_version");
  if (doc.at("format_version").get<std::string>() != "1")
    throw std::runtime_error("schedule document: unsupported format_version");
  for (const char* key : {"omega0", "omega1", "segments"})
    if (!doc.contains(key))
      throw std::runtime_error(std::string("schedule document: missing ") + key);

  PulseSchedule sched;
  sched.omega0 = doc.at("omega0").get<double>();
  sched.omega1 = doc.at("omega1").get<double>();
  require(sched.omega0 > 0 && sched.omega1 > 0,
          "schedule document: amplitude bounds must be positive");
  for (const auto& j : doc.at("segments")) {
    PulseSegment seg;
    seg.dt = j.at("dt").get<double>();
    seg.op = j.at("op").get<double>();
    seg.oq = j.at("oq").get<double>();
    seg.os = j.at("os").get<double>();
    seg.pp = j.value("pp", 0.0);
    seg.pq = j.value("pq", 0.0);
    seg.ps = j.value("ps", 0.0);
    require(seg.dt >= 0, "schedule document: negative segment duration");
    sched.segments.push_back(seg);
  }
  if (doc.contains("meta")) {
    const Json& meta = doc.at("meta");
    sched.meta.protocol = meta.value("protocol", std::string{});
    sched.meta.s = meta.value("s", std::numeric_limits<double>::quiet_NaN());
    sched.meta.objective =
        meta.value("objective", std::numeric_limits<double>::quiet_NaN());
    if (meta.contains("trace"))
      for (const auto& [key, value] : meta.at("trace").items())
        sched.meta.trace[key] = value.get<double>();
  }
  return sched;
}

inline void save_schedule(const std::string& path, const PulseSchedule& sched) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << schedule_to_json(sched).dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline PulseSchedule load_schedule(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  Json doc = Json::parse(in);  // parse errors propagate
  return schedule_from_json(doc);
}

// 12 significant digits, '.' decimal regardless of locale
inline std::string format_sig(double v) {
  if (v == 0.0) return "0";  // fold the sign of -0 away
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// Trajectory table for both species; returns the final |3> populations.
inline std::pair<double, double> write_trajectory_csv(std::ostream& out,
                                                      const PulseSchedule& sched,
                                                      int samples_per_segment) {
  require(samples_per_segment > 0, "trajectory: need at least one sample");
  const auto plus =
      sample_three(sched.segments, Chirality::Left, samples_per_segment);
  const auto minus =
      sample_three(sched.segments, Chirality::Right, samples_per_segment);
  out << "t,x_plus,y_plus,z_plus,x_minus,y_minus,z_minus,p3_plus,p3_minus\n";
  double p3p = 0.0, p3m = 0.0;
  for (std::size_t i = 0; i < plus.size(); ++i) {
    const Vec3 rp = bloch_from_three(plus[i].psi);
    const Vec3 rm = bloch_from_three(minus[i].psi);
    p3p = std::norm(plus[i].psi(2));
    p3m = std::norm(minus[i].psi(2));
    out << format_sig(plus[i].t) << ',' << format_sig(rp.x()) << ','
        << format_sig(rp.y()) << ',' << format_sig(rp.z()) << ','
        << format_sig(rm.x()) << ',' << format_sig(rm.y()) << ','
        << format_sig(rm.z()) << ',' << format_sig(p3p) << ','
        << format_sig(p3m) << '\n';
  }
  return {p3p, p3m};
}

}  // namespace chiralctl

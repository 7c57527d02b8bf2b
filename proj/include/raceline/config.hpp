#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "raceline/common.hpp"
#include "raceline/drafting.hpp"
#include "raceline/geo.hpp"
#include "raceline/params_io.hpp"
#include "raceline/spline.hpp"
#include "raceline/track.hpp"
#include "raceline/tracking.hpp"

namespace raceline {

// Everything a run needs, with working defaults so a config file only states
// what it changes. Every output file records the digest of the effective
// configuration, so results always name the settings that produced them.
struct RunConfig {
    std::string tracking_path;
    std::string track_path;
    std::string params_path;
    std::string output_dir = ".";

    std::uint64_t seed = 1;
    int workers = 1;

    SplineSpec spline;
    double theta_prior_sd = 0.5;
    double mu_prior_sd = 10.0;
    double delta_prior_sd = 0.1;
    double psi_prior_sd = 1.0;
    double sigma_prior_sd = 1.0;
    int max_iterations = 2000;

    AnomalyConfig anomalies;
    DragTable drag;

    int draws = 2000;
    double frame_period = 0.25;
    double race_distance = 1609.34;
    int max_frames = 1200;

    double lane_width = 1.0;
    int lane_sims = 100;

    int clusters = 3;
    double curve_step = 10.0;
};

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j,
                                const std::vector<std::string>& known,
                                const char* where) {
    for (const auto& item : j.items())
        if (std::find(known.begin(), known.end(), item.key()) == known.end())
            throw std::runtime_error(
                strprintf("config: unknown key '%s' in %s", item.key().c_str(), where));
}

}  // namespace detail

inline nlohmann::json config_to_json(const RunConfig& c) {
    return {
        {"paths",
         {{"tracking", c.tracking_path},
          {"track", c.track_path},
          {"params", c.params_path},
          {"output_dir", c.output_dir}}},
        {"seed", c.seed},
        {"workers", c.workers},
        {"spline",
         {{"degree", c.spline.degree},
          {"lower", c.spline.lower},
          {"upper", c.spline.upper},
          {"internal_knots", c.spline.internal_knots}}},
        {"priors",
         {{"theta_sd", c.theta_prior_sd},
          {"mu_sd", c.mu_prior_sd},
          {"delta_sd", c.delta_prior_sd},
          {"psi_sd", c.psi_prior_sd},
          {"sigma_sd", c.sigma_prior_sd}}},
        {"optimizer", {{"max_iterations", c.max_iterations}}},
        {"anomalies",
         {{"freeze_epsilon", c.anomalies.freeze_epsilon},
          {"jump_speed", c.anomalies.jump_speed},
          {"early_window_frames", c.anomalies.early_window_frames}}},
        {"drag", detail::drag_to_json(c.drag)},
        {"simulation",
         {{"draws", c.draws},
          {"frame_period", c.frame_period},
          {"race_distance", c.race_distance},
          {"max_frames", c.max_frames}}},
        {"lanes", {{"width", c.lane_width}, {"sims_per_assignment", c.lane_sims}}},
        {"profiles", {{"clusters", c.clusters}, {"curve_step", c.curve_step}}},
    };
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::runtime_error("config: top level must be an object");
    detail::reject_unknown_keys(
        j,
        {"paths", "seed", "workers", "spline", "priors", "optimizer", "anomalies",
         "drag", "simulation", "lanes", "profiles"},
        "the top level");
    RunConfig c;
    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        detail::reject_unknown_keys(p, {"tracking", "track", "params", "output_dir"},
                                    "paths");
        c.tracking_path = p.value("tracking", c.tracking_path);
        c.track_path = p.value("track", c.track_path);
        c.params_path = p.value("params", c.params_path);
        c.output_dir = p.value("output_dir", c.output_dir);
    }
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    if (j.contains("spline")) {
        const auto& s = j.at("spline");
        detail::reject_unknown_keys(s, {"degree", "lower", "upper", "internal_knots"},
                                    "spline");
        c.spline.degree = s.value("degree", c.spline.degree);
        c.spline.lower = s.value("lower", c.spline.lower);
        c.spline.upper = s.value("upper", c.spline.upper);
        if (s.contains("internal_knots"))
            c.spline.internal_knots = s.at("internal_knots").get<std::vector<double>>();
    }
    if (j.contains("priors")) {
        const auto& p = j.at("priors");
        detail::reject_unknown_keys(
            p, {"theta_sd", "mu_sd", "delta_sd", "psi_sd", "sigma_sd"}, "priors");
        c.theta_prior_sd = p.value("theta_sd", c.theta_prior_sd);
        c.mu_prior_sd = p.value("mu_sd", c.mu_prior_sd);
        c.delta_prior_sd = p.value("delta_sd", c.delta_prior_sd);
        c.psi_prior_sd = p.value("psi_sd", c.psi_prior_sd);
        c.sigma_prior_sd = p.value("sigma_sd", c.sigma_prior_sd);
    }
    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        detail::reject_unknown_keys(o, {"max_iterations"}, "optimizer");
        c.max_iterations = o.value("max_iterations", c.max_iterations);
    }
    if (j.contains("anomalies")) {
        const auto& a = j.at("anomalies");
        detail::reject_unknown_keys(
            a, {"freeze_epsilon", "jump_speed", "early_window_frames"}, "anomalies");
        c.anomalies.freeze_epsilon = a.value("freeze_epsilon", c.anomalies.freeze_epsilon);
        c.anomalies.jump_speed = a.value("jump_speed", c.anomalies.jump_speed);
        c.anomalies.early_window_frames =
            a.value("early_window_frames", c.anomalies.early_window_frames);
    }
    if (j.contains("drag")) c.drag = detail::drag_from_json(j.at("drag"));
    if (j.contains("simulation")) {
        const auto& s = j.at("simulation");
        detail::reject_unknown_keys(
            s, {"draws", "frame_period", "race_distance", "max_frames"}, "simulation");
        c.draws = s.value("draws", c.draws);
        c.frame_period = s.value("frame_period", c.frame_period);
        c.race_distance = s.value("race_distance", c.race_distance);
        c.max_frames = s.value("max_frames", c.max_frames);
    }
    if (j.contains("lanes")) {
        const auto& l = j.at("lanes");
        detail::reject_unknown_keys(l, {"width", "sims_per_assignment"}, "lanes");
        c.lane_width = l.value("width", c.lane_width);
        c.lane_sims = l.value("sims_per_assignment", c.lane_sims);
    }
    if (j.contains("profiles")) {
        const auto& p = j.at("profiles");
        detail::reject_unknown_keys(p, {"clusters", "curve_step"}, "profiles");
        c.clusters = p.value("clusters", c.clusters);
        c.curve_step = p.value("curve_step", c.curve_step);
    }
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(strprintf("config %s: %s", path.c_str(), e.what()));
    }
    return config_from_json(j);
}

// Digest of the canonical form of the effective configuration (defaults
// included, keys sorted, compact), so formatting and key order never matter.
// Execution details that cannot change result content — the worker count and
// where outputs land — are left out: reruns of the same computation must
// produce byte-identical files no matter how they are scheduled.
inline std::string config_digest(const RunConfig& c) {
    nlohmann::json j = config_to_json(c);
    j.erase("workers");
    j["paths"].erase("output_dir");
    return strprintf("%016llx",
                     static_cast<unsigned long long>(fnv1a64(j.dump())));
}

// ---------------------------------------------------------------------------
// Track description file: geographic outlines plus build options.

constexpr const char* kTrackFormat = "raceline-track";
constexpr int kTrackVersion = 1;

struct TrackSpec {
    std::string track_id;
    GeoPoint origin{};
    std::vector<GeoPoint> inner, outer, finish;
    bool closed = true;
    bool has_gate = false;
    GeoPoint gate{};
    std::vector<std::pair<double, double>> chutes;  // arclength ranges, metres
};

namespace detail {

inline nlohmann::json geo_list_to_json(const std::vector<GeoPoint>& pts) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& p : pts) out.push_back({p.latitude, p.longitude});
    return out;
}

inline std::vector<GeoPoint> geo_list_from_json(const nlohmann::json& j, const char* what) {
    std::vector<GeoPoint> out;
    for (const auto& row : j) {
        if (!row.is_array() || row.size() != 2)
            throw std::runtime_error(
                strprintf("track file: %s entries must be [latitude, longitude]", what));
        out.push_back({row[0].get<double>(), row[1].get<double>()});
    }
    return out;
}

}  // namespace detail

inline nlohmann::json track_spec_to_json(const TrackSpec& t) {
    nlohmann::json j = {
        {"format", kTrackFormat},
        {"version", kTrackVersion},
        {"track_id", t.track_id},
        {"origin", {t.origin.latitude, t.origin.longitude}},
        {"inner", detail::geo_list_to_json(t.inner)},
        {"outer", detail::geo_list_to_json(t.outer)},
        {"finish", detail::geo_list_to_json(t.finish)},
        {"closed", t.closed},
        {"chutes", t.chutes},
    };
    if (t.has_gate) j["gate"] = {t.gate.latitude, t.gate.longitude};
    return j;
}

inline TrackSpec track_spec_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("format", std::string{}) != kTrackFormat)
        throw std::runtime_error("track file: unrecognized format");
    int version = j.value("version", -1);
    if (version != kTrackVersion)
        throw std::runtime_error(strprintf(
            "track file: unsupported version %d (expected %d)", version, kTrackVersion));
    TrackSpec t;
    t.track_id = j.at("track_id").get<std::string>();
    const auto& o = j.at("origin");
    t.origin = {o.at(0).get<double>(), o.at(1).get<double>()};
    t.inner = detail::geo_list_from_json(j.at("inner"), "inner");
    t.outer = detail::geo_list_from_json(j.at("outer"), "outer");
    t.finish = detail::geo_list_from_json(j.at("finish"), "finish");
    if (t.finish.size() != 2)
        throw std::runtime_error("track file: finish must be exactly two points");
    t.closed = j.value("closed", true);
    if (j.contains("gate")) {
        t.has_gate = true;
        t.gate = {j.at("gate").at(0).get<double>(), j.at("gate").at(1).get<double>()};
    }
    if (j.contains("chutes"))
        t.chutes = j.at("chutes").get<std::vector<std::pair<double, double>>>();
    return t;
}

inline void save_track_spec(const std::string& path, const TrackSpec& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write track file: " + path);
    out << track_spec_to_json(t).dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing track file: " + path);
}

inline TrackSpec load_track_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open track file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(strprintf("track file %s: %s", path.c_str(), e.what()));
    }
    return track_spec_from_json(j);
}

inline TrackModel build_track(const TrackSpec& t, double spacing = 0.1) {
    TrackBuildOptions opts;
    opts.closed = t.closed;
    opts.chutes = t.chutes;
    opts.spacing = spacing;
    if (t.has_gate) {
        opts.has_gate = true;
        opts.gate = geo_to_plane(t.gate, t.origin);
    }
    return build_track_geo(t.track_id, t.origin, t.inner, t.outer, t.finish, opts);
}

}  // namespace raceline

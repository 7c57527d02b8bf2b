#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "raceline/geo.hpp"

namespace raceline {

enum class SegmentLabel { Stretch, LeftTurn, RightTurn, HomeStretch, Chute };

inline const char* segment_name(SegmentLabel s) {
    switch (s) {
        case SegmentLabel::Stretch: return "stretch";
        case SegmentLabel::LeftTurn: return "left_turn";
        case SegmentLabel::RightTurn: return "right_turn";
        case SegmentLabel::HomeStretch: return "home_stretch";
        case SegmentLabel::Chute: return "chute";
    }
    return "?";
}

// Position in track coordinates: arclength along the inside rail from the
// race origin, and unsigned distance to the rail.
struct TrackPosition {
    double forward = 0.0;
    double lateral = 0.0;
};

struct MotionDelta {
    double d_forward = 0.0;
    double d_lateral = 0.0;
    double d_total = 0.0;
};

inline MotionDelta motion_delta(const TrackPosition& prev, const TrackPosition& cur) {
    double df = cur.forward - prev.forward;
    double dl = cur.lateral - prev.lateral;
    return {df, dl, std::hypot(df, dl)};
}

struct TrackBuildOptions {
    bool closed = true;  // inner outline is a loop
    bool has_gate = false;
    PlanarPoint gate{};  // race origin, same frame as the input outline
    std::vector<std::pair<double, double>> chutes;  // arclength ranges
    double spacing = 0.1;
};

struct TrackModel {
    std::string track_id;
    GeoPoint geo_origin{};
    bool has_geo_origin = false;
    PlaneRotation rotation;  // applied to every point of this track
    std::vector<PlanarPoint> inner_outline, outer_outline, finish_line;
    std::vector<PlanarPoint> rail;        // samples every `spacing` metres
    std::vector<double> arclength;        // spacing * index
    std::vector<SegmentLabel> labels;     // one per rail sample
    double spacing = 0.1;
    bool closed = true;
    int loop_sign = 1;  // +1 when the rail is walked counter-clockwise

    double rail_length() const {
        return arclength.empty() ? 0.0 : arclength.back();
    }

    PlanarPoint to_track_plane(const GeoPoint& g) const {
        return rotation.apply(geo_to_plane(g, geo_origin));
    }
};

namespace detail {

inline std::vector<double> cumulative_lengths(const std::vector<PlanarPoint>& pts) {
    std::vector<double> cum(pts.size(), 0.0);
    for (size_t i = 1; i < pts.size(); ++i)
        cum[i] = cum[i - 1] + std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y);
    return cum;
}

inline PlanarPoint point_at(const std::vector<PlanarPoint>& pts, const std::vector<double>& cum,
                            double s) {
    auto it = std::upper_bound(cum.begin(), cum.end(), s);
    size_t hi = std::min<size_t>(static_cast<size_t>(it - cum.begin()), cum.size() - 1);
    if (hi == 0) return pts.front();
    size_t lo = hi - 1;
    double seg = cum[hi] - cum[lo];
    double t = seg > 0.0 ? (s - cum[lo]) / seg : 0.0;
    return {pts[lo].x + t * (pts[hi].x - pts[lo].x), pts[lo].y + t * (pts[hi].y - pts[lo].y)};
}

inline double dist2_point_segment(const PlanarPoint& p, const PlanarPoint& a,
                                  const PlanarPoint& b, double* t_out = nullptr) {
    double vx = b.x - a.x, vy = b.y - a.y;
    double len2 = vx * vx + vy * vy;
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(((p.x - a.x) * vx + (p.y - a.y) * vy) / len2, 0.0, 1.0);
    double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
    if (t_out) *t_out = t;
    return dx * dx + dy * dy;
}

// Arclength of the closest point of the polyline to p.
inline double project_arclength(const std::vector<PlanarPoint>& pts,
                                const std::vector<double>& cum, const PlanarPoint& p) {
    double best = std::numeric_limits<double>::infinity(), best_s = 0.0;
    for (size_t i = 1; i < pts.size(); ++i) {
        double t;
        double d2 = dist2_point_segment(p, pts[i - 1], pts[i], &t);
        if (d2 < best) {
            best = d2;
            best_s = cum[i - 1] + t * (cum[i] - cum[i - 1]);
        }
    }
    return best_s;
}

inline double signed_loop_area(const std::vector<PlanarPoint>& pts) {
    double a = 0.0;
    for (size_t i = 0; i + 1 < pts.size(); ++i)
        a += pts[i].x * pts[i + 1].y - pts[i + 1].x * pts[i].y;
    return 0.5 * a;
}

}  // namespace detail

// Circle-based partition: the turn circles have diameter equal to the outline's
// y-extent and sit flush against the x-extremes; everything left of the left
// centre is LeftTurn, right of the right centre RightTurn, the rest Stretch.
// The stretch run nearest the finish line becomes HomeStretch, then chute
// ranges override.
inline void partition_segments(TrackModel& track,
                               const std::vector<std::pair<double, double>>& chutes) {
    if (track.rail.empty()) throw std::runtime_error("partition_segments: empty rail");
    double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
    double min_y = min_x, max_y = -min_x;
    for (const auto& p : track.inner_outline) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    double radius = 0.5 * (max_y - min_y);
    double left_cx = min_x + radius, right_cx = max_x - radius;
    if (left_cx > right_cx + 1e-9)
        throw std::runtime_error("partition_segments: turn circles overlap");

    track.labels.assign(track.rail.size(), SegmentLabel::Stretch);
    for (size_t i = 0; i < track.rail.size(); ++i) {
        if (track.rail[i].x < left_cx)
            track.labels[i] = SegmentLabel::LeftTurn;
        else if (track.rail[i].x > right_cx)
            track.labels[i] = SegmentLabel::RightTurn;
    }

    if (!track.finish_line.empty()) {
        double best = std::numeric_limits<double>::infinity();
        size_t best_i = 0;
        for (size_t i = 0; i < track.rail.size(); ++i) {
            double d2;
            if (track.finish_line.size() == 1) {
                double dx = track.rail[i].x - track.finish_line[0].x;
                double dy = track.rail[i].y - track.finish_line[0].y;
                d2 = dx * dx + dy * dy;
            } else {
                d2 = std::numeric_limits<double>::infinity();
                for (size_t k = 1; k < track.finish_line.size(); ++k)
                    d2 = std::min(d2, detail::dist2_point_segment(track.rail[i],
                                                                  track.finish_line[k - 1],
                                                                  track.finish_line[k]));
            }
            if (d2 < best) {
                best = d2;
                best_i = i;
            }
        }
        if (track.labels[best_i] != SegmentLabel::Stretch)
            throw std::runtime_error("partition_segments: finish line does not meet a stretch");
        for (size_t i = best_i; i < track.rail.size() && track.labels[i] == SegmentLabel::Stretch;
             ++i)
            track.labels[i] = SegmentLabel::HomeStretch;
        for (size_t i = best_i; i-- > 0 && track.labels[i] == SegmentLabel::Stretch;)
            track.labels[i] = SegmentLabel::HomeStretch;
    }

    for (const auto& [a, b] : chutes) {
        if (a > b) throw std::invalid_argument("partition_segments: chute range reversed");
        for (size_t i = 0; i < track.rail.size(); ++i)
            if (track.arclength[i] >= a && track.arclength[i] <= b)
                track.labels[i] = SegmentLabel::Chute;
    }
}

// Builds the rail index and segment labels from an already-planar outline.
// The outline is reoriented internally; `opts.gate` re-roots arclength 0.
inline TrackModel build_track_planar(const std::string& track_id,
                                     const std::vector<PlanarPoint>& inner,
                                     const std::vector<PlanarPoint>& outer,
                                     const std::vector<PlanarPoint>& finish,
                                     const TrackBuildOptions& opts = {}) {
    if (inner.size() < 2) throw std::invalid_argument("build_track: inner outline too short");
    TrackModel track;
    track.track_id = track_id;
    track.spacing = opts.spacing;

    OrientedOutline oriented = normalize_orientation(inner);
    track.rotation = oriented.rotation;
    track.inner_outline = std::move(oriented.points);
    track.outer_outline.reserve(outer.size());
    for (const auto& p : outer) track.outer_outline.push_back(track.rotation.apply(p));
    track.finish_line.reserve(finish.size());
    for (const auto& p : finish) track.finish_line.push_back(track.rotation.apply(p));

    std::vector<PlanarPoint> path = track.inner_outline;
    if (opts.closed) {
        double dx = path.back().x - path.front().x, dy = path.back().y - path.front().y;
        if (dx * dx + dy * dy > 1e-18) path.push_back(path.front());
    }
    std::vector<double> cum = detail::cumulative_lengths(path);
    double total = cum.back();
    if (total <= opts.spacing)
        throw std::runtime_error("build_track: outline shorter than rail spacing");
    track.closed = opts.closed;
    track.loop_sign = detail::signed_loop_area(path) >= 0.0 ? 1 : -1;

    double gate_s = 0.0;
    if (opts.has_gate) {
        if (!opts.closed)
            throw std::invalid_argument("build_track: gate re-rooting needs a closed outline");
        gate_s = detail::project_arclength(path, cum, track.rotation.apply(opts.gate));
    }

    size_t n = static_cast<size_t>(std::floor(total / opts.spacing)) + 1;
    track.rail.reserve(n);
    track.arclength.reserve(n);
    for (size_t k = 0; k < n; ++k) {
        double s = static_cast<double>(k) * opts.spacing;
        double loop_s = opts.closed ? std::fmod(gate_s + s, total) : s;
        track.rail.push_back(detail::point_at(path, cum, loop_s));
        track.arclength.push_back(s);
    }
    partition_segments(track, opts.chutes);
    return track;
}

inline TrackModel build_track_geo(const std::string& track_id, const GeoPoint& origin,
                                  const std::vector<GeoPoint>& inner,
                                  const std::vector<GeoPoint>& outer,
                                  const std::vector<GeoPoint>& finish,
                                  const TrackBuildOptions& opts = {}) {
    auto to_plane = [&](const std::vector<GeoPoint>& g) {
        std::vector<PlanarPoint> out;
        out.reserve(g.size());
        for (const auto& p : g) out.push_back(geo_to_plane(p, origin));
        return out;
    };
    TrackModel track = build_track_planar(track_id, to_plane(inner), to_plane(outer),
                                          to_plane(finish), opts);
    track.geo_origin = origin;
    track.has_geo_origin = true;
    return track;
}

// Nearest rail sample, no sub-sample refinement; exact ties go to the
// smaller arclength.
inline TrackPosition project_to_track(const TrackModel& track, const PlanarPoint& p) {
    if (track.rail.empty()) throw std::runtime_error("project_to_track: empty rail");
    double best = std::numeric_limits<double>::infinity();
    size_t best_i = 0;
    for (size_t i = 0; i < track.rail.size(); ++i) {
        double dx = p.x - track.rail[i].x, dy = p.y - track.rail[i].y;
        double d2 = dx * dx + dy * dy;
        if (d2 < best) {
            best = d2;
            best_i = i;
        }
    }
    return {track.arclength[best_i], std::sqrt(best)};
}

inline size_t rail_index_at(const TrackModel& track, double forward) {
    if (forward < -1e-9)
        throw std::out_of_range("rail position: negative forward distance");
    auto idx = static_cast<long long>(std::llround(forward / track.spacing));
    if (idx < 0) idx = 0;
    if (idx >= static_cast<long long>(track.rail.size())) {
        if (forward <= track.rail_length() + 0.5 * track.spacing + 1e-9)
            idx = static_cast<long long>(track.rail.size()) - 1;
        else
            throw std::out_of_range("rail position: forward distance beyond built rail");
    }
    return static_cast<size_t>(idx);
}

inline SegmentLabel label_at(const TrackModel& track, double forward) {
    return track.labels[rail_index_at(track, forward)];
}

// Interpolated rail point, used when reconstructing planar positions.
inline PlanarPoint rail_point(const TrackModel& track, double forward) {
    size_t i = rail_index_at(track, forward);
    double s_i = track.arclength[i];
    if (forward < s_i && i > 0) --i;
    if (i + 1 >= track.rail.size()) i = track.rail.size() - 2;
    double t = (forward - track.arclength[i]) / track.spacing;
    t = std::clamp(t, 0.0, 1.0);
    const auto& a = track.rail[i];
    const auto& b = track.rail[i + 1];
    return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
}

// Unit normal pointing from the rail into the racing surface.
inline PlanarPoint rail_normal(const TrackModel& track, double forward) {
    size_t i = rail_index_at(track, forward);
    size_t a = i > 0 ? i - 1 : 0;
    size_t b = std::min(i + 1, track.rail.size() - 1);
    double tx = track.rail[b].x - track.rail[a].x, ty = track.rail[b].y - track.rail[a].y;
    double n = std::hypot(tx, ty);
    if (n <= 0.0) throw std::runtime_error("rail_normal: degenerate rail segment");
    tx /= n;
    ty /= n;
    return track.loop_sign >= 0 ? PlanarPoint{ty, -tx} : PlanarPoint{-ty, tx};
}

}  // namespace raceline

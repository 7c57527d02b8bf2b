#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "raceline/common.hpp"
#include "raceline/geo.hpp"
#include "raceline/table.hpp"
#include "raceline/track.hpp"

namespace raceline {

enum class CourseType { dirt, turf };
enum class TrackCondition { fast, good, sloppy, muddy };

inline CourseType parse_course(const std::string& s, size_t row) {
    std::string v = to_lower(s);
    if (v == "dirt") return CourseType::dirt;
    if (v == "turf") return CourseType::turf;
    throw std::runtime_error(
        strprintf("schema error: row %zu: unknown course_type '%s'", row, s.c_str()));
}

inline TrackCondition parse_condition(const std::string& s, size_t row) {
    std::string v = to_lower(s);
    if (v == "fast") return TrackCondition::fast;
    if (v == "good") return TrackCondition::good;
    if (v == "sloppy") return TrackCondition::sloppy;
    if (v == "muddy") return TrackCondition::muddy;
    throw std::runtime_error(
        strprintf("schema error: row %zu: unknown track_condition '%s'", row, s.c_str()));
}

inline const char* course_name(CourseType c) { return c == CourseType::dirt ? "dirt" : "turf"; }

inline const char* condition_name(TrackCondition c) {
    switch (c) {
        case TrackCondition::fast: return "fast";
        case TrackCondition::good: return "good";
        case TrackCondition::sloppy: return "sloppy";
        case TrackCondition::muddy: return "muddy";
    }
    return "?";
}

// Course plus condition, the grouping used for the track random effect.
inline std::string race_context(CourseType c, TrackCondition k) {
    return std::string(course_name(c)) + "_" + condition_name(k);
}

struct FrameObs {
    int frame = 0;
    double timestamp_s = 0.0;
    GeoPoint geo{};
    PlanarPoint plane{};
    TrackPosition pos{};
    bool imputed = false;
};

struct CompetitorTrack {
    std::string horse_id, jockey_id;
    int starting_lane = 1;
    std::vector<FrameObs> frames;  // consecutive frame numbers

    int first_frame() const { return frames.empty() ? 0 : frames.front().frame; }
    int last_frame() const { return frames.empty() ? -1 : frames.back().frame; }

    const FrameObs* at_frame(int frame) const {
        if (frames.empty() || frame < first_frame() || frame > last_frame()) return nullptr;
        return &frames[static_cast<size_t>(frame - first_frame())];
    }
    FrameObs* at_frame(int frame) {
        return const_cast<FrameObs*>(static_cast<const CompetitorTrack*>(this)->at_frame(frame));
    }
};

struct RaceFrameTable {
    std::string race_id, track_id;
    CourseType course = CourseType::dirt;
    TrackCondition condition = TrackCondition::fast;
    double frame_period = 0.25;  // seconds
    std::vector<CompetitorTrack> competitors;  // sorted by horse_id

    std::string context() const { return race_context(course, condition); }

    const CompetitorTrack* competitor(const std::string& horse_id) const {
        for (const auto& c : competitors)
            if (c.horse_id == horse_id) return &c;
        return nullptr;
    }
    CompetitorTrack* competitor(const std::string& horse_id) {
        return const_cast<CompetitorTrack*>(
            static_cast<const RaceFrameTable*>(this)->competitor(horse_id));
    }
};

struct TrackingSet {
    std::vector<RaceFrameTable> races;  // sorted by race_id
    bool enriched = false;  // true when track coordinates were read from the file
};

// Parses the raw tracking schema. Enriched columns (x, y, forward, lateral,
// imputed) are read back when present so written tables round-trip.
inline TrackingSet parse_tracking(std::istream& in, double frame_period = 0.25) {
    TextTable t = read_table(in);
    size_t c_race = t.col("race_id"), c_track = t.col("track_id");
    size_t c_course = t.col("course_type"), c_cond = t.col("track_condition");
    size_t c_frame = t.col("frame"), c_ts = t.col("timestamp_s");
    size_t c_horse = t.col("horse_id"), c_jockey = t.col("jockey_id");
    size_t c_lane = t.col("starting_lane");
    size_t c_lat = t.col("latitude"), c_lon = t.col("longitude");
    bool enriched = t.has_col("forward");
    size_t c_x = 0, c_y = 0, c_fwd = 0, c_latl = 0, c_imp = 0;
    if (enriched) {
        c_x = t.col("x");
        c_y = t.col("y");
        c_fwd = t.col("forward");
        c_latl = t.col("lateral");
        c_imp = t.col("imputed");
    }

    std::map<std::string, RaceFrameTable> races;
    std::map<std::pair<std::string, std::string>, std::map<int, FrameObs>> cells;
    std::map<std::pair<std::string, std::string>, std::pair<std::string, int>> rider;

    for (size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        size_t rowno = r + 1;
        const std::string& race_id = row[c_race];
        RaceFrameTable& race = races[race_id];
        if (race.race_id.empty()) {
            race.race_id = race_id;
            race.track_id = row[c_track];
            race.course = parse_course(row[c_course], rowno);
            race.condition = parse_condition(row[c_cond], rowno);
            race.frame_period = frame_period;
        } else {
            if (race.track_id != row[c_track])
                throw std::runtime_error(strprintf(
                    "schema error: row %zu: race '%s' maps to multiple tracks", rowno,
                    race_id.c_str()));
            if (race.course != parse_course(row[c_course], rowno) ||
                race.condition != parse_condition(row[c_cond], rowno))
                throw std::runtime_error(strprintf(
                    "schema error: row %zu: race '%s' has inconsistent context", rowno,
                    race_id.c_str()));
        }

        FrameObs obs;
        obs.frame = static_cast<int>(parse_int(row[c_frame], "frame", rowno));
        obs.timestamp_s = parse_double(row[c_ts], "timestamp_s", rowno);
        obs.geo.latitude = parse_double(row[c_lat], "latitude", rowno);
        obs.geo.longitude = parse_double(row[c_lon], "longitude", rowno);
        if (!geo_valid(obs.geo))
            throw std::runtime_error(
                strprintf("schema error: row %zu: coordinates out of range", rowno));
        if (enriched) {
            obs.plane.x = parse_double(row[c_x], "x", rowno);
            obs.plane.y = parse_double(row[c_y], "y", rowno);
            obs.pos.forward = parse_double(row[c_fwd], "forward", rowno);
            obs.pos.lateral = parse_double(row[c_latl], "lateral", rowno);
            obs.imputed = parse_int(row[c_imp], "imputed", rowno) != 0;
        }

        auto key = std::make_pair(race_id, row[c_horse]);
        int lane = static_cast<int>(parse_int(row[c_lane], "starting_lane", rowno));
        if (lane < 1)
            throw std::runtime_error(
                strprintf("schema error: row %zu: starting_lane must be >= 1", rowno));
        auto rit = rider.find(key);
        if (rit == rider.end())
            rider[key] = {row[c_jockey], lane};
        else if (rit->second.first != row[c_jockey] || rit->second.second != lane)
            throw std::runtime_error(strprintf(
                "schema error: row %zu: competitor '%s' changes jockey or lane mid-race",
                rowno, row[c_horse].c_str()));

        auto [it, inserted] = cells[key].emplace(obs.frame, obs);
        if (!inserted)
            throw std::runtime_error(strprintf(
                "schema error: row %zu: duplicate frame %d for competitor '%s'", rowno,
                obs.frame, row[c_horse].c_str()));
    }

    for (auto& [key, frames] : cells) {
        CompetitorTrack ct;
        ct.horse_id = key.second;
        ct.jockey_id = rider[key].first;
        ct.starting_lane = rider[key].second;
        int expect = frames.begin()->first;
        for (auto& [frame, obs] : frames) {
            if (frame != expect)
                throw std::runtime_error(strprintf(
                    "schema error: competitor '%s' in race '%s' has non-consecutive frames "
                    "(%d then %d)",
                    key.second.c_str(), key.first.c_str(), expect - 1, frame));
            ct.frames.push_back(obs);
            ++expect;
        }
        races[key.first].competitors.push_back(std::move(ct));
    }

    TrackingSet set;
    set.enriched = enriched;
    for (auto& [id, race] : races) {
        std::sort(race.competitors.begin(), race.competitors.end(),
                  [](const CompetitorTrack& a, const CompetitorTrack& b) {
                      return a.horse_id < b.horse_id;
                  });
        set.races.push_back(std::move(race));
    }
    return set;
}

// Rows ordered by (race, frame, competitor); `enriched` adds the planar and
// track-coordinate columns so prepared data round-trips through this format.
inline void write_tracking(std::ostream& out, const TrackingSet& set, bool enriched,
                           const std::vector<std::string>& comments = {}) {
    TextTable t;
    t.comments = comments;
    t.columns = {"race_id",  "track_id",  "course_type", "track_condition",
                 "frame",    "timestamp_s", "horse_id",  "jockey_id",
                 "starting_lane", "latitude", "longitude"};
    if (enriched)
        for (const char* c : {"x", "y", "forward", "lateral", "imputed"})
            t.columns.push_back(c);
    for (const auto& race : set.races) {
        int lo = 0, hi = -1;
        for (const auto& c : race.competitors) {
            if (c.frames.empty()) continue;
            if (hi < lo) {
                lo = c.first_frame();
                hi = c.last_frame();
            } else {
                lo = std::min(lo, c.first_frame());
                hi = std::max(hi, c.last_frame());
            }
        }
        for (int frame = lo; frame <= hi; ++frame) {
            for (const auto& c : race.competitors) {
                const FrameObs* obs = c.at_frame(frame);
                if (!obs) continue;
                std::vector<std::string> row = {
                    race.race_id,
                    race.track_id,
                    course_name(race.course),
                    condition_name(race.condition),
                    strprintf("%d", obs->frame),
                    strprintf("%.3f", obs->timestamp_s),
                    c.horse_id,
                    c.jockey_id,
                    strprintf("%d", c.starting_lane),
                    strprintf("%.10f", obs->geo.latitude),
                    strprintf("%.10f", obs->geo.longitude)};
                if (enriched) {
                    row.push_back(strprintf("%.6f", obs->plane.x));
                    row.push_back(strprintf("%.6f", obs->plane.y));
                    row.push_back(strprintf("%.6f", obs->pos.forward));
                    row.push_back(strprintf("%.6f", obs->pos.lateral));
                    row.push_back(obs->imputed ? "1" : "0");
                }
                t.rows.push_back(std::move(row));
            }
        }
    }
    write_table(out, t);
}

enum class AnomalyKind { frozen, jump };

struct AnomalySpan {
    std::string horse_id;
    int first_frame = 0;  // last reliable frame before the bad run
    int last_frame = 0;   // first reliable frame after it
    AnomalyKind kind = AnomalyKind::frozen;
};

struct AnomalyConfig {
    double freeze_epsilon = 0.05;  // metres per frame
    double jump_speed = 20.0;      // metres per second
    int early_window_frames = 40;  // imputation only near the start
};

// Freeze-then-jump detector on per-frame total displacement in track
// coordinates. A run of >= 2 sub-epsilon displacements followed by a
// single-frame jump marks the frozen frames as unreliable; the span endpoints
// are the reliable frames on either side.
inline std::vector<AnomalySpan> detect_anomalies(const RaceFrameTable& race,
                                                 const AnomalyConfig& cfg = {}) {
    std::vector<AnomalySpan> spans;
    double jump_dist = cfg.jump_speed * race.frame_period;
    for (const auto& comp : race.competitors) {
        const auto& fr = comp.frames;
        if (fr.size() < 2) continue;
        size_t n = fr.size();
        std::vector<double> disp(n, 0.0);
        for (size_t k = 1; k < n; ++k)
            disp[k] = motion_delta(fr[k - 1].pos, fr[k].pos).d_total;
        size_t k = 1;
        while (k < n) {
            if (disp[k] < cfg.freeze_epsilon) {
                size_t e = k;
                while (e + 1 < n && disp[e + 1] < cfg.freeze_epsilon) ++e;
                size_t len = e - k + 1;
                if (len >= 2 && e + 1 < n && disp[e + 1] > jump_dist) {
                    AnomalySpan s;
                    s.horse_id = comp.horse_id;
                    size_t a_idx = (k >= 2) ? k - 2 : 0;
                    s.first_frame = fr[a_idx].frame;
                    s.last_frame = fr[e + 1].frame;
                    s.kind = AnomalyKind::frozen;
                    spans.push_back(std::move(s));
                    k = e + 2;
                } else {
                    k = e + 1;
                }
            } else if (disp[k] > jump_dist) {
                spans.push_back({comp.horse_id, fr[k - 1].frame, fr[k].frame,
                                 AnomalyKind::jump});
                ++k;
            } else {
                ++k;
            }
        }
    }
    return spans;
}

// Replaces the interior of a span with proportional-progress imputation:
// each interior frame gets the span's forward distance scaled by the mean
// proportion covered by reliable peers, and linear lateral interpolation.
// Endpoints are preserved exactly.
inline void impute_gap(RaceFrameTable& race, const AnomalySpan& span,
                       const std::vector<AnomalySpan>& all_spans) {
    CompetitorTrack* self = race.competitor(span.horse_id);
    if (!self) throw std::invalid_argument("impute_gap: unknown competitor");
    int a = span.first_frame, b = span.last_frame;
    if (b - a < 2) return;  // no interior frames
    const FrameObs* fa = self->at_frame(a);
    const FrameObs* fb = self->at_frame(b);
    if (!fa || !fb) throw std::invalid_argument("impute_gap: span outside observed frames");

    struct Peer {
        const CompetitorTrack* track;
        double fwd_a, denom;
    };
    std::vector<Peer> peers;
    for (const auto& other : race.competitors) {
        if (other.horse_id == span.horse_id) continue;
        const FrameObs* oa = other.at_frame(a);
        const FrameObs* ob = other.at_frame(b);
        if (!oa || !ob) continue;
        bool clean = true;
        for (const auto& s : all_spans)
            if (s.horse_id == other.horse_id && s.first_frame <= b && s.last_frame >= a) {
                clean = false;
                break;
            }
        if (!clean) continue;
        double denom = ob->pos.forward - oa->pos.forward;
        if (std::fabs(denom) < 1e-9) continue;
        peers.push_back({&other, oa->pos.forward, denom});
    }
    if (peers.empty())
        throw std::runtime_error(strprintf(
            "imputation error: no reliable competitor covers frames %d..%d", a, b));

    double D = fb->pos.forward - fa->pos.forward;
    double lat_a = fa->pos.lateral, lat_b = fb->pos.lateral;
    for (int t = a + 1; t < b; ++t) {
        double pbar = 0.0;
        for (const auto& p : peers)
            pbar += (p.track->at_frame(t)->pos.forward - p.fwd_a) / p.denom;
        pbar /= static_cast<double>(peers.size());
        FrameObs* obs = self->at_frame(t);
        obs->pos.forward = fa->pos.forward + D * pbar;
        double w = static_cast<double>(t - a) / static_cast<double>(b - a);
        obs->pos.lateral = lat_a + w * (lat_b - lat_a);
        obs->imputed = true;
    }
}

struct PrepReport {
    std::vector<AnomalySpan> spans;
    int imputed_frames = 0;
    int imputed_competitors = 0;
    int competitors = 0;
    std::vector<std::string> warnings;
};

// Full per-race preparation: project every observation into track
// coordinates, then collapse early freeze/jump anomalies.
inline PrepReport prepare_race(RaceFrameTable& race, const TrackModel& track,
                               const AnomalyConfig& cfg = {}) {
    if (!track.has_geo_origin)
        throw std::invalid_argument("prepare_race: track has no geographic origin");
    for (auto& comp : race.competitors)
        for (auto& obs : comp.frames) {
            obs.plane = track.to_track_plane(obs.geo);
            obs.pos = project_to_track(track, obs.plane);
        }

    PrepReport report;
    report.competitors = static_cast<int>(race.competitors.size());
    report.spans = detect_anomalies(race, cfg);
    for (const auto& span : report.spans) {
        if (span.kind != AnomalyKind::frozen) continue;
        const CompetitorTrack* comp = race.competitor(span.horse_id);
        if (span.first_frame - comp->first_frame() > cfg.early_window_frames) {
            report.warnings.push_back(strprintf(
                "race %s competitor %s: span %d..%d beyond the first %d frames left as-is",
                race.race_id.c_str(), span.horse_id.c_str(), span.first_frame,
                span.last_frame, cfg.early_window_frames));
            continue;
        }
        impute_gap(race, span, report.spans);
    }
    for (const auto& comp : race.competitors) {
        int n = 0;
        for (const auto& obs : comp.frames) n += obs.imputed ? 1 : 0;
        report.imputed_frames += n;
        report.imputed_competitors += n > 0 ? 1 : 0;
    }
    return report;
}

}  // namespace raceline

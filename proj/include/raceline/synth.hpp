#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "raceline/common.hpp"
#include "raceline/config.hpp"
#include "raceline/covariates.hpp"
#include "raceline/drafting.hpp"
#include "raceline/model.hpp"
#include "raceline/rng.hpp"
#include "raceline/simulate.hpp"
#include "raceline/track.hpp"
#include "raceline/tracking.hpp"

namespace raceline {

// Knobs for the bundled synthetic fixture: a stadium course plus a field of
// horses with three running styles, raced by the simulator itself so every
// downstream stage sees data that actually follows the model.
struct SynthSpec {
    std::string track_id = "synth-stadium";
    int n_horses = 9;   // running styles are cycled across the field
    int n_jockeys = 4;
    int n_races = 12;
    int per_race = 6;
    std::uint64_t seed = 1;
    double sigma_forward = 0.25;  // m per frame
    double sigma_lateral = 0.08;
    double race_distance = 1609.34;
    double frame_period = 0.25;
    double lane_width = 1.0;
    double straight = 500.0;  // stadium geometry, metres
    double radius = 120.0;
    GeoPoint origin{40.0, -73.0};
};

struct SynthResult {
    TrackSpec track_spec;
    TrackModel track;
    TrackingSet tracking;
    FittedParams truth;
    DragTable drag;
};

namespace detail {

// Counter-clockwise stadium starting at (0, 0) heading +x; racing surface
// lies outside the loop (negative y along the opening straight).
inline std::vector<PlanarPoint> synth_stadium(double straight, double radius,
                                              double step = 0.25) {
    std::vector<PlanarPoint> pts;
    int n_straight = std::max(2, static_cast<int>(straight / step));
    int n_arc = std::max(8, static_cast<int>(kPi * radius / step));
    for (int i = 0; i < n_straight; ++i)
        pts.push_back({straight * i / n_straight, 0.0});
    for (int i = 0; i <= n_arc; ++i) {
        double a = -0.5 * kPi + kPi * i / n_arc;
        pts.push_back({straight + radius * std::cos(a), radius + radius * std::sin(a)});
    }
    for (int i = 1; i < n_straight; ++i)
        pts.push_back({straight - straight * i / n_straight, 2.0 * radius});
    for (int i = 0; i <= n_arc; ++i) {
        double a = 0.5 * kPi + kPi * i / n_arc;
        pts.push_back({radius * std::cos(a), radius + radius * std::sin(a)});
    }
    return pts;
}

inline void validate_synth(const SynthSpec& s) {
    if (s.n_horses < 2 || s.n_jockeys < 1 || s.n_races < 1)
        throw std::invalid_argument("synth: need at least two horses, one jockey, one race");
    if (s.per_race < 2 || s.per_race > s.n_horses)
        throw std::invalid_argument("synth: per_race must be in [2, n_horses]");
    if (s.sigma_forward <= 0.0 || s.sigma_lateral <= 0.0)
        throw std::invalid_argument("synth: noise scales must be positive");
    if (s.frame_period <= 0.0 || s.race_distance <= 0.0 || s.lane_width <= 0.0)
        throw std::invalid_argument("synth: frame period, distance, and lane width must be positive");
    if (s.straight < 100.0 || s.radius < 30.0)
        throw std::invalid_argument("synth: stadium too small to race on");
}

}  // namespace detail

// The generating parameters: three speed-curve archetypes with per-horse
// jitter, a spread of rider effects, and light covariate couplings.
inline FittedParams synth_truth(const SynthSpec& spec) {
    detail::validate_synth(spec);
    FittedParams p;
    for (int h = 0; h < spec.n_horses; ++h) p.horses.push_back(strprintf("h%02d", h));
    for (int j = 0; j < spec.n_jockeys; ++j) p.jockeys.push_back(strprintf("j%d", j));
    p.contexts = {"dirt_fast"};
    p.spline_spec = SplineSpec{};
    p.std_forward = Standardizer::identity(kForwardCovariateCount);
    p.std_lateral = Standardizer::identity(kLateralCovariateCount);

    const std::vector<std::vector<double>> archetypes = {
        {4.60, 4.55, 4.45, 4.30, 4.15, 4.00, 3.90, 3.80, 3.70},  // strong start, fades
        {4.20, 4.20, 4.20, 4.20, 4.20, 4.20, 4.20, 4.20, 4.20},  // metronome
        {3.70, 3.80, 3.90, 4.05, 4.20, 4.35, 4.45, 4.50, 4.55},  // closer
    };

    auto& f = p.forward;
    f.layout.H = static_cast<size_t>(spec.n_horses);
    f.layout.B = 9;
    f.layout.J = static_cast<size_t>(spec.n_jockeys);
    f.layout.C = 1;
    f.layout.P = kForwardCovariateCount;
    f.mode.assign(f.layout.size(), 0.0);
    Rng jitter(mix_seed(spec.seed, 7));
    for (int h = 0; h < spec.n_horses; ++h) {
        const auto& base = archetypes[static_cast<size_t>(h) % archetypes.size()];
        for (size_t b = 0; b < 9; ++b)
            f.mode[static_cast<size_t>(h) * 9 + b] =
                base[b] + 0.05 * (2.0 * jitter.uniform() - 1.0);
    }
    for (size_t b = 0; b < 9; ++b) f.mode[f.layout.mu_off() + b] = 4.2;
    for (int j = 0; j < spec.n_jockeys; ++j)
        f.mode[f.layout.jockey_off() + static_cast<size_t>(j)] =
            spec.n_jockeys > 1
                ? 0.12 * (0.5 - static_cast<double>(j) / (spec.n_jockeys - 1))
                : 0.0;
    f.mode[f.layout.psi_off() + 0] = -0.01;  // inside traffic costs a touch of pace
    f.mode[f.layout.psi_off() + 9] = 0.04;   // sitting in a wake gives a touch back
    f.mode[f.layout.logsig_off()] = std::log(spec.sigma_forward);
    f.curvature_sd.assign(f.layout.size(), 0.0);

    auto& l = p.lateral;
    l.layout.J = static_cast<size_t>(spec.n_jockeys);
    l.layout.C = 1;
    l.layout.P = kLateralCovariateCount;
    l.mode.assign(l.layout.size(), 0.0);
    l.mode[l.layout.psi_off() + 0] = 0.30;   // sideways motion persists
    l.mode[l.layout.psi_off() + 13] = 0.01;  // drift out a little in the stretch
    l.mode[l.layout.psi_off() + 14] = 0.02;  // and a little more right off the turn
    l.mode[l.layout.logsig_off()] = std::log(spec.sigma_lateral);
    l.curvature_sd.assign(l.layout.size(), 0.0);
    return p;
}

// Stadium course description with the start gate placed so that the run from
// the gate to the finish line is exactly the requested race distance.
inline TrackSpec synth_track_spec(const SynthSpec& spec) {
    detail::validate_synth(spec);
    auto inner = detail::synth_stadium(spec.straight, spec.radius);
    auto outer = detail::synth_stadium(spec.straight, spec.radius + 25.0);
    for (auto& pt : outer) pt.y -= 25.0;
    double finish_x = 0.5 * spec.straight;
    std::vector<PlanarPoint> finish = {{finish_x, -2.0}, {finish_x, 20.0}};

    auto to_geo = [&](const std::vector<PlanarPoint>& pts) {
        std::vector<GeoPoint> out;
        out.reserve(pts.size());
        for (const auto& pt : pts) out.push_back(plane_to_geo(pt, spec.origin));
        return out;
    };
    TrackSpec ts;
    ts.track_id = spec.track_id;
    ts.origin = spec.origin;
    ts.inner = to_geo(inner);
    ts.outer = to_geo(outer);
    ts.finish = to_geo(finish);
    ts.closed = true;

    TrackModel rooted = build_track(ts);  // arclength still rooted at the outline start
    double length = rooted.rail_length();
    if (spec.race_distance + 15.0 > length)
        throw std::invalid_argument(
            strprintf("synth: race distance %.1f m does not fit on a %.1f m course",
                      spec.race_distance, length));
    PlanarPoint mid{0.5 * (rooted.finish_line[0].x + rooted.finish_line[1].x),
                    0.5 * (rooted.finish_line[0].y + rooted.finish_line[1].y)};
    double finish_fwd = project_to_track(rooted, mid).forward;
    double gate_fwd = std::fmod(finish_fwd - spec.race_distance + 2.0 * length, length);
    PlanarPoint gate_rot = rail_point(rooted, gate_fwd);
    PlaneRotation undo{rooted.rotation.center, -rooted.rotation.angle};
    ts.gate = plane_to_geo(undo.apply(gate_rot), spec.origin);
    ts.has_gate = true;
    return ts;
}

// Full fixture: build the course, race every field at the true parameters,
// and emit raw tracking rows exactly as a trackside feed would.
inline SynthResult synth_dataset(const SynthSpec& spec = {}) {
    detail::validate_synth(spec);
    SynthResult out;
    out.track_spec = synth_track_spec(spec);
    out.track = build_track(out.track_spec);
    out.truth = synth_truth(spec);
    out.drag = DragTable{};
    PlaneRotation undo{out.track.rotation.center, -out.track.rotation.angle};

    SimConfig cfg;
    cfg.frame_period = spec.frame_period;
    cfg.race_distance = spec.race_distance;
    cfg.drag = out.drag;

    for (int r = 0; r < spec.n_races; ++r) {
        std::vector<int> chosen;
        for (int k = 0; k < spec.per_race; ++k)
            chosen.push_back((r * spec.per_race + k) % spec.n_horses);
        std::sort(chosen.begin(), chosen.end());

        RaceSetup setup;
        setup.context = "dirt_fast";
        std::vector<int> lanes;
        for (int i = 0; i < spec.per_race; ++i) {
            int lane = (i + r) % spec.per_race;
            SimCompetitor c;
            c.horse_id = out.truth.horses[static_cast<size_t>(chosen[static_cast<size_t>(i)])];
            c.jockey_id =
                out.truth.jockeys[static_cast<size_t>((chosen[static_cast<size_t>(i)] + r) %
                                                      spec.n_jockeys)];
            c.start_forward = 0.0;
            c.start_lateral = (lane + 0.5) * spec.lane_width;
            setup.competitors.push_back(c);
            lanes.push_back(lane);
        }

        Rng rng(mix_seed(spec.seed, 5000 + static_cast<std::uint64_t>(r)));
        std::vector<std::vector<TrackPosition>> traj;
        simulate_race(out.track, out.truth, setup, cfg, rng, &traj);

        RaceFrameTable race;
        race.race_id = strprintf("race%03d", r);
        race.track_id = spec.track_id;
        race.course = CourseType::dirt;
        race.condition = TrackCondition::fast;
        race.frame_period = spec.frame_period;
        for (size_t c = 0; c < setup.competitors.size(); ++c) {
            CompetitorTrack ct;
            ct.horse_id = setup.competitors[c].horse_id;
            ct.jockey_id = setup.competitors[c].jockey_id;
            ct.starting_lane = lanes[c] + 1;
            for (size_t t = 0; t < traj.size(); ++t) {
                FrameObs obs;
                obs.frame = static_cast<int>(t);
                obs.timestamp_s = static_cast<double>(t) * spec.frame_period;
                obs.pos = traj[t][c];
                PlanarPoint base = rail_point(out.track, obs.pos.forward);
                PlanarPoint nrm = rail_normal(out.track, obs.pos.forward);
                obs.plane = {base.x + obs.pos.lateral * nrm.x,
                             base.y + obs.pos.lateral * nrm.y};
                obs.geo = plane_to_geo(undo.apply(obs.plane), spec.origin);
                ct.frames.push_back(obs);
                // the feed follows each horse through its crossing frame and
                // then drops it; the gallop-out past the line is not tracked
                if (traj[t][c].forward >= spec.race_distance) break;
            }
            race.competitors.push_back(std::move(ct));
        }
        out.tracking.races.push_back(std::move(race));
    }
    return out;
}

// Races per horse in a tracking set, the eligibility input for clustering.
inline std::unordered_map<std::string, int> race_counts(const TrackingSet& set) {
    std::unordered_map<std::string, int> counts;
    for (const auto& race : set.races)
        for (const auto& comp : race.competitors) counts[comp.horse_id] += 1;
    return counts;
}

}  // namespace raceline

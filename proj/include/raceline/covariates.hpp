#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "raceline/drafting.hpp"
#include "raceline/track.hpp"
#include "raceline/tracking.hpp"

namespace raceline {

inline constexpr int kForwardCovariateCount = 12;
inline constexpr int kLateralCovariateCount = 15;
inline constexpr double kNeighborCap = 50.0;  // metres; also the empty-set fill

using ForwardRow = std::array<double, kForwardCovariateCount>;
using LateralRow = std::array<double, kLateralCovariateCount>;

inline const std::vector<std::string>& forward_covariate_names() {
    static const std::vector<std::string> names = {
        "n_horses_inside",      "n_horses_outside",      "n_horses_forward",
        "n_horses_backward",    "nearest_inside",        "nearest_outside",
        "nearest_inside_euclid", "nearest_outside_euclid", "nearest_forward",
        "is_drafting",          "prop_energy_saved",     "is_turn",
    };
    return names;
}

inline const std::vector<std::string>& lateral_covariate_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v = {"prev_lat_movement"};
        for (const auto& n : forward_covariate_names()) v.push_back(n);
        v.push_back("is_home_stretch");
        v.push_back("turn_to_home_stretch");
        return v;
    }();
    return names;
}

// Minimal per-competitor state needed to evaluate covariates at one frame.
struct CompetitorState {
    std::string horse_id;
    double forward = 0.0;
    double lateral = 0.0;
    double prev_lat_movement = 0.0;  // realized lateral step into this frame
    double prop_energy_saved = 0.0;  // ledger value accumulated so far
};

struct CovariateRow {
    ForwardRow forward{};
    LateralRow lateral{};
    double drag_coefficient = 1.0;  // to charge the upcoming step's energy
};

// True within the opening metres of a home stretch entered directly from a
// turn — the window where riders straighten out of the bend.
inline bool entering_home_stretch(const TrackModel& track, double forward,
                                  double window = 10.0) {
    size_t idx = rail_index_at(track, forward);
    if (track.labels[idx] != SegmentLabel::HomeStretch) return false;
    size_t n = track.labels.size();
    size_t max_back = static_cast<size_t>(window / track.spacing) + 1;
    size_t i = idx;
    for (size_t step = 1; step <= max_back; ++step) {
        size_t prev;
        if (i == 0) {
            if (!track.closed) return false;  // stretch reaches the rail start
            prev = n - 1;
        } else {
            prev = i - 1;
        }
        SegmentLabel lab = track.labels[prev];
        if (lab == SegmentLabel::HomeStretch) {
            i = prev;
            continue;
        }
        if (lab != SegmentLabel::LeftTurn && lab != SegmentLabel::RightTurn) return false;
        double run_start = track.arclength[i];
        double pos = track.arclength[idx];
        double dist = pos >= run_start ? pos - run_start
                                       : pos + track.rail_length() - run_start;
        return dist <= window;
    }
    return false;  // run extends beyond the window, so we are past it anyway
}

// Covariates for field[self] given every competitor's current state. The
// field should hold everyone visible on the course, including competitors
// already finished but still on track.
inline CovariateRow covariate_row(const TrackModel& track, const DragTable& drag,
                                  const std::vector<CompetitorState>& field,
                                  size_t self) {
    if (self >= field.size()) throw std::out_of_range("covariates: bad self index");
    const CompetitorState& me = field[self];

    double n_inside = 0, n_outside = 0, n_forward = 0, n_backward = 0;
    double near_inside = kNeighborCap, near_outside = kNeighborCap;
    double near_inside_e = kNeighborCap, near_outside_e = kNeighborCap;
    double near_forward = kNeighborCap;
    bool have_leader = false;
    double lead_gap = 0.0, lead_euclid = 0.0, lead_lateral = 0.0;

    for (size_t k = 0; k < field.size(); ++k) {
        if (k == self) continue;
        const CompetitorState& other = field[k];
        double dfwd = other.forward - me.forward;
        double dlat = other.lateral - me.lateral;
        double euclid = std::hypot(dfwd, dlat);

        if (dlat < 0.0) {  // ties in lateral count for neither side
            n_inside += 1;
            near_inside = std::min(near_inside, -dlat);
            near_inside_e = std::min(near_inside_e, euclid);
        } else if (dlat > 0.0) {
            n_outside += 1;
            near_outside = std::min(near_outside, dlat);
            near_outside_e = std::min(near_outside_e, euclid);
        }
        if (dfwd > 0.0) {  // ties in forward count for neither direction
            n_forward += 1;
            near_forward = std::min(near_forward, dfwd);
            if (!have_leader || dfwd < lead_gap ||
                (dfwd == lead_gap && euclid < lead_euclid)) {
                have_leader = true;
                lead_gap = dfwd;
                lead_euclid = euclid;
                lead_lateral = other.lateral;
            }
        } else if (dfwd < 0.0) {
            n_backward += 1;
        }
    }

    double c_d = drag.clean_air;
    if (have_leader)
        c_d = drag_coefficient(drag, lead_gap, me.lateral - lead_lateral);
    bool drafting = c_d < drag.clean_air - 1e-12;

    SegmentLabel label = label_at(track, me.forward);
    bool turn = label == SegmentLabel::LeftTurn || label == SegmentLabel::RightTurn;
    bool home = label == SegmentLabel::HomeStretch;
    bool entering = home && entering_home_stretch(track, me.forward);

    CovariateRow row;
    row.forward = {n_inside,
                   n_outside,
                   n_forward,
                   n_backward,
                   std::min(near_inside, kNeighborCap),
                   std::min(near_outside, kNeighborCap),
                   std::min(near_inside_e, kNeighborCap),
                   std::min(near_outside_e, kNeighborCap),
                   std::min(near_forward, kNeighborCap),
                   drafting ? 1.0 : 0.0,
                   me.prop_energy_saved,
                   turn ? 1.0 : 0.0};
    row.lateral[0] = me.prev_lat_movement;
    for (int i = 0; i < kForwardCovariateCount; ++i)
        row.lateral[static_cast<size_t>(i + 1)] = row.forward[static_cast<size_t>(i)];
    row.lateral[kForwardCovariateCount + 1] = home ? 1.0 : 0.0;
    row.lateral[kForwardCovariateCount + 2] = entering ? 1.0 : 0.0;
    row.drag_coefficient = c_d;
    return row;
}

// One observed frame-to-frame step: covariates at the departing frame paired
// with the realized displacement into the next frame.
struct DesignRow {
    std::string race_id;
    std::string context;  // course/condition key
    std::string horse_id;
    std::string jockey_id;
    int frame = 0;      // frame the step departs from
    double j = 0.0;     // cumulative forward distance at departure
    ForwardRow x_forward{};
    LateralRow x_lateral{};
    double d_forward = 0.0;
    double d_lateral = 0.0;
};

// Walks a prepared race and emits a row per observed step of every
// competitor. Energy bookkeeping matches the simulator: the drag coefficient
// seen at the departing frame prices the step just taken.
inline std::vector<DesignRow> build_design_rows(const RaceFrameTable& race,
                                                const TrackModel& track,
                                                const DragTable& drag) {
    std::vector<DesignRow> rows;
    if (race.competitors.empty()) return rows;

    int lo = race.competitors.front().first_frame();
    int hi = race.competitors.front().last_frame();
    for (const auto& comp : race.competitors) {
        lo = std::min(lo, comp.first_frame());
        hi = std::max(hi, comp.last_frame());
    }

    std::vector<EnergyLedger> ledgers(race.competitors.size());
    std::vector<double> prev_lat(race.competitors.size(), 0.0);

    for (int frame = lo; frame <= hi; ++frame) {
        std::vector<CompetitorState> field;
        std::vector<size_t> comp_index;  // field slot -> competitor slot
        for (size_t c = 0; c < race.competitors.size(); ++c) {
            const FrameObs* obs = race.competitors[c].at_frame(frame);
            if (!obs) continue;
            CompetitorState st;
            st.horse_id = race.competitors[c].horse_id;
            st.forward = obs->pos.forward;
            st.lateral = obs->pos.lateral;
            st.prev_lat_movement =
                frame == race.competitors[c].first_frame() ? 0.0 : prev_lat[c];
            st.prop_energy_saved = ledgers[c].prop_energy_saved();
            field.push_back(st);
            comp_index.push_back(c);
        }

        for (size_t s = 0; s < field.size(); ++s) {
            size_t c = comp_index[s];
            const CompetitorTrack& comp = race.competitors[c];
            const FrameObs* next = comp.at_frame(frame + 1);
            if (!next) continue;

            CovariateRow cov = covariate_row(track, drag, field, s);
            DesignRow row;
            row.race_id = race.race_id;
            row.context = race.context();
            row.horse_id = comp.horse_id;
            row.jockey_id = comp.jockey_id;
            row.frame = frame;
            row.j = field[s].forward;
            row.x_forward = cov.forward;
            row.x_lateral = cov.lateral;
            row.d_forward = next->pos.forward - field[s].forward;
            row.d_lateral = next->pos.lateral - field[s].lateral;
            rows.push_back(std::move(row));

            double step = std::hypot(row.d_forward, row.d_lateral);
            ledgers[c].add_frame(drag, step / race.frame_period, step,
                                 cov.drag_coefficient);
            prev_lat[c] = row.d_lateral;
        }
    }
    return rows;
}

// Column-wise location/scale for a design block. Constant columns keep scale
// one so indicators that never fire pass through unchanged.
struct Standardizer {
    std::vector<double> mean, sd;

    static Standardizer identity(size_t n) {
        Standardizer s;
        s.mean.assign(n, 0.0);
        s.sd.assign(n, 1.0);
        return s;
    }

    template <size_t N>
    static Standardizer fit(const std::vector<std::array<double, N>>& rows) {
        Standardizer s;
        s.mean.assign(N, 0.0);
        s.sd.assign(N, 1.0);
        if (rows.empty()) return s;
        for (const auto& r : rows)
            for (size_t i = 0; i < N; ++i) s.mean[i] += r[i];
        for (size_t i = 0; i < N; ++i) s.mean[i] /= static_cast<double>(rows.size());
        std::vector<double> var(N, 0.0);
        for (const auto& r : rows)
            for (size_t i = 0; i < N; ++i) {
                double d = r[i] - s.mean[i];
                var[i] += d * d;
            }
        for (size_t i = 0; i < N; ++i) {
            double v = var[i] / static_cast<double>(rows.size());
            s.sd[i] = v > 1e-24 ? std::sqrt(v) : 1.0;
        }
        return s;
    }

    template <size_t N>
    void apply(std::array<double, N>& row) const {
        if (mean.size() != N) throw std::invalid_argument("standardizer: size mismatch");
        for (size_t i = 0; i < N; ++i) row[i] = (row[i] - mean[i]) / sd[i];
    }
};

}  // namespace raceline

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "raceline/common.hpp"
#include "raceline/covariates.hpp"
#include "raceline/drafting.hpp"
#include "raceline/model.hpp"
#include "raceline/rng.hpp"
#include "raceline/track.hpp"

namespace raceline {

struct SimConfig {
    double frame_period = 0.25;      // seconds per frame
    double race_distance = 1609.34;  // metres from the gate to the line
    int max_frames = 1200;           // hard cap before the run is abandoned
    DragTable drag{};
};

struct SimCompetitor {
    std::string horse_id, jockey_id;
    double start_forward = 0.0;
    double start_lateral = 0.0;  // metres off the rail
};

struct RaceSetup {
    std::string context;  // course/condition key, e.g. "dirt_fast"
    std::vector<SimCompetitor> competitors;  // strictly ascending horse_id
};

struct RaceResult {
    std::vector<double> finish_time;       // seconds, setup order
    std::vector<int> placement;            // 0-based finishing position
    std::vector<double> crossing_lateral;  // lateral offset at the line
    int frames_used = 0;
};

namespace detail {

inline void validate_setup(const FittedParams& params, const RaceSetup& setup) {
    if (setup.competitors.empty())
        throw std::invalid_argument("simulate: no competitors");
    for (size_t i = 0; i < setup.competitors.size(); ++i) {
        const auto& c = setup.competitors[i];
        if (i > 0 && !(setup.competitors[i - 1].horse_id < c.horse_id))
            throw std::invalid_argument(
                "simulate: competitors must be strictly sorted by horse id");
        if (c.start_forward < 0.0 || c.start_lateral < 0.0)
            throw std::invalid_argument(
                strprintf("simulate: negative starting position for '%s'",
                          c.horse_id.c_str()));
        params.horse_index(c.horse_id);    // throws for unknown ids
        params.jockey_index(c.jockey_id);
    }
    params.context_index(setup.context);
}

}  // namespace detail

// Rolls one race forward frame by frame. All competitors draw their steps
// from the shared generator in id order against the pre-step field, then
// move simultaneously. Finishers freeze in place but stay visible. When a
// trajectory sink is given it receives one position row per competitor for
// the starting state and after every frame.
inline RaceResult simulate_race(const TrackModel& track, const FittedParams& params,
                                const std::vector<double>& forward_param,
                                const std::vector<double>& lateral_param,
                                const RaceSetup& setup, const SimConfig& cfg,
                                Rng& rng,
                                std::vector<std::vector<TrackPosition>>* trajectory = nullptr) {
    detail::validate_setup(params, setup);
    const size_t n = setup.competitors.size();
    ParamView fv(params.forward.layout, forward_param);
    ParamView lv(params.lateral.layout, lateral_param);
    BSplineBasis basis{params.spline_spec};
    const double dt = cfg.frame_period;
    const double D = cfg.race_distance;

    std::vector<size_t> horse_idx(n), jockey_idx(n);
    for (size_t c = 0; c < n; ++c) {
        horse_idx[c] = params.horse_index(setup.competitors[c].horse_id);
        jockey_idx[c] = params.jockey_index(setup.competitors[c].jockey_id);
    }
    size_t context_idx = params.context_index(setup.context);

    std::vector<double> fwd(n), lat(n), plm(n, 0.0);
    std::vector<EnergyLedger> ledger(n);
    std::vector<bool> finished(n, false);
    RaceResult res;
    res.finish_time.assign(n, 0.0);
    res.crossing_lateral.assign(n, 0.0);
    res.placement.assign(n, 0);

    // Competitors already across the line get time zero; among them, the one
    // furthest past the line is taken to have crossed first.
    std::vector<double> overshoot(n, 0.0);
    size_t remaining = n;
    for (size_t c = 0; c < n; ++c) {
        fwd[c] = setup.competitors[c].start_forward;
        lat[c] = setup.competitors[c].start_lateral;
        if (fwd[c] >= D) {
            finished[c] = true;
            res.finish_time[c] = 0.0;
            res.crossing_lateral[c] = lat[c];
            overshoot[c] = fwd[c] - D;
            --remaining;
        }
    }

    auto record = [&]() {
        if (!trajectory) return;
        std::vector<TrackPosition> snap(n);
        for (size_t c = 0; c < n; ++c) snap[c] = {fwd[c], lat[c]};
        trajectory->push_back(std::move(snap));
    };
    if (trajectory) trajectory->clear();
    record();

    std::vector<double> d_fwd(n, 0.0), d_lat(n, 0.0), c_d(n, 1.0);
    int frame = 0;
    while (remaining > 0) {
        if (frame >= cfg.max_frames)
            throw std::runtime_error(
                strprintf("simulate: race still unfinished after %d frames",
                          cfg.max_frames));

        std::vector<CompetitorState> field(n);
        for (size_t c = 0; c < n; ++c) {
            field[c].horse_id = setup.competitors[c].horse_id;
            field[c].forward = fwd[c];
            field[c].lateral = lat[c];
            field[c].prev_lat_movement = plm[c];
            field[c].prop_energy_saved = ledger[c].prop_energy_saved();
        }

        for (size_t c = 0; c < n; ++c) {
            if (finished[c]) continue;
            CovariateRow row = covariate_row(track, cfg.drag, field, c);
            ForwardRow xf = row.forward;
            params.std_forward.apply(xf);
            LateralRow xl = row.lateral;
            params.std_lateral.apply(xl);

            double vals[8];
            int first = basis.row_sparse(fwd[c], vals);
            double mf = 0.0;
            for (int k = 0; k < basis.order(); ++k)
                mf += vals[k] * fv.theta(horse_idx[c], static_cast<size_t>(first + k));
            mf += fv.delta_jockey(jockey_idx[c]) + fv.delta_context(context_idx);
            for (size_t k = 0; k < xf.size(); ++k) mf += xf[k] * fv.psi(k);

            double ml = lv.delta_jockey(jockey_idx[c]) + lv.delta_context(context_idx);
            for (size_t k = 0; k < xl.size(); ++k) ml += xl[k] * lv.psi(k);

            d_fwd[c] = rng.truncated_normal_nonneg(mf, fv.sigma());
            d_lat[c] = rng.normal(ml, lv.sigma());
            c_d[c] = row.drag_coefficient;
        }

        for (size_t c = 0; c < n; ++c) {
            if (finished[c]) continue;
            double new_lat = std::max(0.0, lat[c] + d_lat[c]);
            double realized = new_lat - lat[c];
            double new_fwd = fwd[c] + d_fwd[c];
            double step_len = std::hypot(d_fwd[c], realized);
            ledger[c].add_frame(cfg.drag, step_len / dt, step_len, c_d[c]);
            if (new_fwd >= D && d_fwd[c] > 0.0) {
                double frac = (D - fwd[c]) / d_fwd[c];
                res.finish_time[c] = dt * static_cast<double>(frame) + dt * frac;
                res.crossing_lateral[c] = lat[c] + realized * frac;
                finished[c] = true;
                --remaining;
            }
            plm[c] = realized;
            fwd[c] = new_fwd;
            lat[c] = new_lat;
        }
        ++frame;
        record();
    }
    res.frames_used = frame;

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (res.finish_time[a] != res.finish_time[b])
            return res.finish_time[a] < res.finish_time[b];
        if (overshoot[a] != overshoot[b]) return overshoot[a] > overshoot[b];
        if (res.crossing_lateral[a] != res.crossing_lateral[b])
            return res.crossing_lateral[a] < res.crossing_lateral[b];
        return setup.competitors[a].horse_id < setup.competitors[b].horse_id;
    });
    for (size_t place = 0; place < n; ++place)
        res.placement[order[place]] = static_cast<int>(place);
    return res;
}

// Convenience: race the fitted mode.
inline RaceResult simulate_race(const TrackModel& track, const FittedParams& params,
                                const RaceSetup& setup, const SimConfig& cfg, Rng& rng,
                                std::vector<std::vector<TrackPosition>>* trajectory = nullptr) {
    return simulate_race(track, params, params.forward.mode, params.lateral.mode,
                         setup, cfg, rng, trajectory);
}

struct PlacementMatrix {
    std::vector<std::string> horses;       // setup order
    std::vector<std::vector<int>> counts;  // [horse][place]
    int draws = 0;

    std::vector<std::vector<double>> probabilities() const {
        std::vector<std::vector<double>> p(counts.size());
        for (size_t h = 0; h < counts.size(); ++h) {
            p[h].resize(counts[h].size());
            for (size_t k = 0; k < counts[h].size(); ++k)
                p[h][k] = static_cast<double>(counts[h][k]) / static_cast<double>(draws);
        }
        return p;
    }

    double win_probability(const std::string& horse_id) const {
        for (size_t h = 0; h < horses.size(); ++h)
            if (horses[h] == horse_id)
                return static_cast<double>(counts[h][0]) / static_cast<double>(draws);
        throw std::out_of_range("placements: unknown horse id " + horse_id);
    }
};

// Posterior-predictive placement frequencies: each draw takes one parameter
// sample from the fitted approximation and races it once. Draw i is fully
// determined by mix_seed(seed, i), so results do not depend on worker count.
inline PlacementMatrix simulate_placements(const TrackModel& track,
                                           const FittedParams& params,
                                           const RaceSetup& setup, const SimConfig& cfg,
                                           int draws, std::uint64_t seed,
                                           int workers = 1) {
    if (draws < 1) throw std::invalid_argument("simulate: need at least one draw");
    detail::validate_setup(params, setup);
    const size_t n = setup.competitors.size();

    std::vector<std::vector<int>> placements(static_cast<size_t>(draws));
    parallel_for(static_cast<size_t>(draws), workers, [&](size_t i) {
        Rng rng(mix_seed(seed, i));
        std::vector<double> f = params.forward.draw(rng);
        std::vector<double> l = params.lateral.draw(rng);
        RaceResult r = simulate_race(track, params, f, l, setup, cfg, rng);
        placements[i] = r.placement;
    });

    PlacementMatrix out;
    out.draws = draws;
    for (const auto& c : setup.competitors) out.horses.push_back(c.horse_id);
    out.counts.assign(n, std::vector<int>(n, 0));
    for (const auto& pl : placements)
        for (size_t h = 0; h < n; ++h)
            out.counts[h][static_cast<size_t>(pl[h])] += 1;
    return out;
}

struct LaneExperiment {
    std::vector<std::string> horses;             // sorted ids
    std::vector<std::vector<double>> mean_rank;  // [horse][lane], 1-based ranks
    int assignments = 0;
    int sims_per_assignment = 0;
    size_t samples_per_cell = 0;  // simulations behind each mean
};

// Exhaustive starting-lane counterfactual: every permutation of competitors
// across lanes, simulated repeatedly at the fitted mode. Lane k (0-based)
// starts at lateral (k + 0.5) * lane_width.
inline LaneExperiment lane_experiment(const TrackModel& track,
                                      const FittedParams& params,
                                      const RaceSetup& base, const SimConfig& cfg,
                                      double lane_width, int sims_per_assignment,
                                      std::uint64_t seed, int workers = 1) {
    detail::validate_setup(params, base);
    const size_t n = base.competitors.size();
    if (n < 2) throw std::invalid_argument("lane experiment: need at least two competitors");
    if (n > 8)
        throw std::invalid_argument(
            "lane experiment: exhaustive assignment is capped at eight competitors");
    if (sims_per_assignment < 1)
        throw std::invalid_argument("lane experiment: need at least one simulation");
    if (lane_width < 0.0)
        throw std::invalid_argument("lane experiment: negative lane width");

    std::vector<std::vector<int>> perms;  // lane -> competitor index
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    do {
        perms.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));

    const size_t total = perms.size() * static_cast<size_t>(sims_per_assignment);
    std::vector<std::vector<int>> placements(total);
    parallel_for(total, workers, [&](size_t t) {
        size_t a = t / static_cast<size_t>(sims_per_assignment);
        RaceSetup setup = base;
        for (size_t lane = 0; lane < n; ++lane) {
            auto& comp = setup.competitors[static_cast<size_t>(perms[a][lane])];
            comp.start_forward = 0.0;
            comp.start_lateral = (static_cast<double>(lane) + 0.5) * lane_width;
        }
        Rng rng(mix_seed(seed, t));
        RaceResult r = simulate_race(track, params, setup, cfg, rng);
        placements[t] = r.placement;
    });

    LaneExperiment out;
    for (const auto& c : base.competitors) out.horses.push_back(c.horse_id);
    out.assignments = static_cast<int>(perms.size());
    out.sims_per_assignment = sims_per_assignment;
    out.mean_rank.assign(n, std::vector<double>(n, 0.0));
    std::vector<std::vector<size_t>> cell_count(n, std::vector<size_t>(n, 0));
    for (size_t t = 0; t < total; ++t) {
        size_t a = t / static_cast<size_t>(sims_per_assignment);
        for (size_t lane = 0; lane < n; ++lane) {
            size_t h = static_cast<size_t>(perms[a][lane]);
            out.mean_rank[h][lane] += static_cast<double>(placements[t][h] + 1);
            cell_count[h][lane] += 1;
        }
    }
    for (size_t h = 0; h < n; ++h)
        for (size_t lane = 0; lane < n; ++lane)
            out.mean_rank[h][lane] /= static_cast<double>(cell_count[h][lane]);
    out.samples_per_cell = cell_count[0][0];
    return out;
}

}  // namespace raceline

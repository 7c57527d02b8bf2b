// Runs the whole pipeline in-process on a small synthetic card and prints the
// kind of race-day sheet the library is for: live win probabilities as the
// race unfolds, a starting-lane what-if, running-style groups, and rider form.

#include <cstdio>
#include <string>
#include <vector>

#include "raceline/cluster.hpp"
#include "raceline/fit.hpp"
#include "raceline/simulate.hpp"
#include "raceline/synth.hpp"

using namespace raceline;

int main() {
    SynthSpec spec;
    spec.n_horses = 6;
    spec.n_jockeys = 3;
    spec.n_races = 10;
    spec.per_race = 5;
    spec.seed = 7;
    spec.straight = 400.0;
    spec.radius = 100.0;
    spec.race_distance = 1000.0;
    std::printf("generating %d synthetic races over a %.0f m course...\n", spec.n_races,
                spec.race_distance);
    SynthResult fixture = synth_dataset(spec);

    for (auto& race : fixture.tracking.races) prepare_race(race, fixture.track);

    std::vector<DesignRow> rows;
    for (const auto& race : fixture.tracking.races) {
        std::vector<DesignRow> r = build_design_rows(race, fixture.track, fixture.drag);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    std::printf("fitting both movement models on %zu observed steps...\n", rows.size());
    FitSettings settings;
    FittedParams params = fit_dataset(rows, settings);
    std::printf("  forward: %s after %d iterations\n",
                params.forward_info.converged ? "converged" : "not converged",
                params.forward_info.iterations);
    std::printf("  lateral: %s after %d iterations\n\n",
                params.lateral_info.converged ? "converged" : "not converged",
                params.lateral_info.iterations);

    // --- live win probabilities for the first race, quarter by quarter
    const RaceFrameTable& race = fixture.tracking.races.front();
    SimConfig sim;
    sim.race_distance = spec.race_distance;
    sim.drag = fixture.drag;

    RaceSetup setup;
    setup.context = race.context();
    for (const auto& comp : race.competitors)
        setup.competitors.push_back({comp.horse_id, comp.jockey_id, 0.0, 0.0});

    int last_shared = race.competitors.front().last_frame();
    for (const auto& comp : race.competitors)
        last_shared = std::min(last_shared, comp.last_frame());

    std::printf("win probability by race stage (%s, 400 draws):\n", race.race_id.c_str());
    std::printf("%10s", "");
    for (const auto& comp : race.competitors) std::printf("%8s", comp.horse_id.c_str());
    std::printf("\n");
    for (double stage : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        int frame = static_cast<int>(stage * last_shared);
        for (size_t c = 0; c < race.competitors.size(); ++c) {
            const FrameObs* obs = race.competitors[c].at_frame(frame);
            setup.competitors[c].start_forward = obs->pos.forward;
            setup.competitors[c].start_lateral = std::max(0.0, obs->pos.lateral);
        }
        PlacementMatrix m = simulate_placements(fixture.track, params, setup, sim, 400,
                                                2024, 1);
        std::printf("frame %4d", frame);
        for (const auto& h : m.horses) std::printf("%8.2f", m.win_probability(h));
        std::printf("\n");
    }

    // --- counterfactual: does the draw matter on this card?
    std::printf("\nstarting-lane experiment (every assignment of the %s field):\n",
                race.race_id.c_str());
    LaneExperiment lanes =
        lane_experiment(fixture.track, params, setup, sim, spec.lane_width, 20, 99, 1);
    std::printf("%10s", "");
    for (size_t l = 0; l < lanes.horses.size(); ++l)
        std::printf("  lane %zu", l + 1);
    std::printf("\n");
    for (size_t h = 0; h < lanes.horses.size(); ++h) {
        std::printf("%10s", lanes.horses[h].c_str());
        for (size_t l = 0; l < lanes.horses.size(); ++l)
            std::printf("%8.2f", lanes.mean_rank[h][l]);
        std::printf("\n");
    }

    // --- running styles and rider form
    std::printf("\nrunning-style groups (label 0 starts fastest):\n");
    std::vector<ProfileVector> profiles =
        extract_profiles(params, race_counts(fixture.tracking));
    BSplineBasis basis{params.spline_spec};
    ClusterResult styles = cluster_profiles(profiles, basis, 3);
    for (size_t i = 0; i < styles.horse_ids.size(); ++i)
        std::printf("  %s -> group %d\n", styles.horse_ids[i].c_str(), styles.labels[i]);

    std::printf("\nrider form (forward effect, m/frame):\n");
    for (const auto& r : jockey_ratings(params))
        std::printf("  %s  %+.4f\n", r.jockey_id.c_str(), r.rating);
    return 0;
}

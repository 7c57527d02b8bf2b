#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "raceline/cluster.hpp"
#include "raceline/common.hpp"
#include "raceline/config.hpp"
#include "raceline/fit.hpp"
#include "raceline/model.hpp"
#include "raceline/params_io.hpp"
#include "raceline/simulate.hpp"
#include "raceline/synth.hpp"
#include "raceline/table.hpp"
#include "raceline/track.hpp"
#include "raceline/tracking.hpp"

namespace raceline {

namespace detail {

inline std::string join_path(const std::string& dir, const std::string& name) {
    std::filesystem::path p = dir.empty() ? "." : dir;
    return (p / name).string();
}

inline void ensure_output_dir(const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.output_dir.empty() ? "." : cfg.output_dir);
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    return out;
}

// Every output names the settings and seed that produced it.
inline std::vector<std::string> meta_comments(const RunConfig& cfg) {
    return {"config_digest " + config_digest(cfg),
            strprintf("seed %llu", static_cast<unsigned long long>(cfg.seed))};
}

inline nlohmann::json meta_json(const RunConfig& cfg) {
    return {{"config_digest", config_digest(cfg)}, {"seed", cfg.seed}};
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out = open_output(path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing file: " + path);
}

inline TrackingSet load_tracking(const RunConfig& cfg, const char* cmd) {
    if (cfg.tracking_path.empty())
        throw std::runtime_error(strprintf(
            "%s: no tracking file given (config paths.tracking or --input)", cmd));
    std::ifstream in(cfg.tracking_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open tracking file: " + cfg.tracking_path);
    return parse_tracking(in, cfg.frame_period);
}

inline TrackModel load_track_model(const RunConfig& cfg, const char* cmd) {
    if (cfg.track_path.empty())
        throw std::runtime_error(
            strprintf("%s: no track file given (config paths.track)", cmd));
    return build_track(load_track_spec(cfg.track_path));
}

inline LoadedParams load_fitted(const RunConfig& cfg, const char* cmd) {
    if (cfg.params_path.empty())
        throw std::runtime_error(
            strprintf("%s: no parameter file given (config paths.params)", cmd));
    return load_params(cfg.params_path);
}

inline const RaceFrameTable& find_race(const TrackingSet& set, const std::string& race_id,
                                       const char* cmd) {
    for (const auto& race : set.races)
        if (race.race_id == race_id) return race;
    throw std::runtime_error(strprintf("%s: unknown race id '%s'", cmd, race_id.c_str()));
}

inline SimConfig sim_config(const RunConfig& cfg, const DragTable& drag) {
    SimConfig sim;
    sim.frame_period = cfg.frame_period;
    sim.race_distance = cfg.race_distance;
    sim.max_frames = cfg.max_frames;
    sim.drag = drag;
    return sim;
}

// Field description shared by the replay commands: competitors arrive sorted
// by horse id from the parser, which is the order the simulator requires.
inline RaceSetup race_setup(const RaceFrameTable& race) {
    RaceSetup setup;
    setup.context = race.context();
    for (const auto& comp : race.competitors) {
        SimCompetitor c;
        c.horse_id = comp.horse_id;
        c.jockey_id = comp.jockey_id;
        setup.competitors.push_back(std::move(c));
    }
    return setup;
}

// Frames at which every competitor is observed, the states a mid-race
// simulation can legally start from.
inline std::pair<int, int> shared_frame_range(const RaceFrameTable& race) {
    int lo = race.competitors.front().first_frame();
    int hi = race.competitors.front().last_frame();
    for (const auto& comp : race.competitors) {
        lo = std::max(lo, comp.first_frame());
        hi = std::min(hi, comp.last_frame());
    }
    return {lo, hi};
}

inline nlohmann::json fit_info_json(const FitInfo& info) {
    return {{"iterations", info.iterations},
            {"converged", info.converged},
            {"neg_log_posterior", info.neg_log_posterior},
            {"rows", info.n_rows},
            {"warnings", info.warnings}};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommand bodies. Each takes the effective configuration (file values with
// command-line overrides applied) so outputs can embed its digest.

inline int cmd_synth(const RunConfig& cfg, SynthSpec spec) {
    spec.seed = cfg.seed;
    spec.frame_period = cfg.frame_period;
    spec.race_distance = cfg.race_distance;
    spec.lane_width = cfg.lane_width;

    SynthResult fixture = synth_dataset(spec);
    detail::ensure_output_dir(cfg);

    std::string track_path = detail::join_path(cfg.output_dir, "synth_track.json");
    save_track_spec(track_path, fixture.track_spec);

    std::string tracking_path = detail::join_path(cfg.output_dir, "synth_tracking.csv");
    {
        std::ofstream out = detail::open_output(tracking_path);
        write_tracking(out, fixture.tracking, /*enriched=*/false, detail::meta_comments(cfg));
    }

    std::string truth_path = detail::join_path(cfg.output_dir, "synth_truth.json");
    save_params(truth_path, fixture.truth, fixture.drag,
                ParamsMeta{config_digest(cfg), cfg.seed});

    std::cout << strprintf("synth: %d races, %d horses, %d riders -> %s, %s, %s\n",
                           spec.n_races, spec.n_horses, spec.n_jockeys,
                           track_path.c_str(), tracking_path.c_str(), truth_path.c_str());
    return 0;
}

inline int cmd_prepare(const RunConfig& cfg) {
    TrackModel track = detail::load_track_model(cfg, "prepare");
    TrackingSet set = detail::load_tracking(cfg, "prepare");

    nlohmann::json races = nlohmann::json::array();
    int total_spans = 0, total_imputed = 0;
    for (auto& race : set.races) {
        PrepReport rep = prepare_race(race, track, cfg.anomalies);
        total_spans += static_cast<int>(rep.spans.size());
        total_imputed += rep.imputed_frames;
        nlohmann::json spans = nlohmann::json::array();
        for (const auto& s : rep.spans)
            spans.push_back({{"horse_id", s.horse_id},
                             {"first_frame", s.first_frame},
                             {"last_frame", s.last_frame},
                             {"kind", s.kind == AnomalyKind::frozen ? "frozen" : "jump"},
                             {"method", "proportional progress, linear lateral"}});
        races.push_back({{"race_id", race.race_id},
                         {"competitors", rep.competitors},
                         {"spans", spans},
                         {"imputed_frames", rep.imputed_frames},
                         {"imputed_competitors", rep.imputed_competitors},
                         {"warnings", rep.warnings}});
    }
    set.enriched = true;

    detail::ensure_output_dir(cfg);
    std::string out_path = detail::join_path(cfg.output_dir, "prepared_tracking.csv");
    {
        std::ofstream out = detail::open_output(out_path);
        write_tracking(out, set, /*enriched=*/true, detail::meta_comments(cfg));
    }
    std::string report_path = detail::join_path(cfg.output_dir, "prepare_report.json");
    detail::write_json_file(report_path, {{"format", "raceline-prep-report"},
                                          {"version", 1},
                                          {"meta", detail::meta_json(cfg)},
                                          {"races", races}});

    std::cout << strprintf(
        "prepare: %zu races, %d anomaly spans, %d imputed frames -> %s, %s\n",
        set.races.size(), total_spans, total_imputed, out_path.c_str(),
        report_path.c_str());
    return 0;
}

inline int cmd_fit(const RunConfig& cfg) {
    TrackModel track = detail::load_track_model(cfg, "fit");
    TrackingSet set = detail::load_tracking(cfg, "fit");
    if (!set.enriched)
        throw std::runtime_error(
            "fit: tracking file lacks prepared coordinates; run prepare first");

    std::vector<DesignRow> rows;
    for (const auto& race : set.races) {
        std::vector<DesignRow> r = build_design_rows(race, track, cfg.drag);
        rows.insert(rows.end(), r.begin(), r.end());
    }

    FitSettings settings;
    settings.spline_spec = cfg.spline;
    settings.options.max_iterations = cfg.max_iterations;
    auto apply_priors = [&](ModelConfig& m) {
        m.theta_prior_sd = cfg.theta_prior_sd;
        m.mu_prior_sd = cfg.mu_prior_sd;
        m.delta_prior_sd = cfg.delta_prior_sd;
        m.psi_prior_sd = cfg.psi_prior_sd;
        m.sigma_prior_sd = cfg.sigma_prior_sd;
    };
    apply_priors(settings.forward_model);
    apply_priors(settings.lateral_model);

    FittedParams params = fit_dataset(rows, settings);

    detail::ensure_output_dir(cfg);
    std::string params_path = detail::join_path(cfg.output_dir, "params.json");
    save_params(params_path, params, cfg.drag, ParamsMeta{config_digest(cfg), cfg.seed});

    std::cout << strprintf(
        "fit: %zu rows; forward %s in %d iterations (nlp %.6f), lateral %s in %d "
        "iterations (nlp %.6f) -> %s\n",
        rows.size(), params.forward_info.converged ? "converged" : "DID NOT CONVERGE",
        params.forward_info.iterations, params.forward_info.neg_log_posterior,
        params.lateral_info.converged ? "converged" : "DID NOT CONVERGE",
        params.lateral_info.iterations, params.lateral_info.neg_log_posterior,
        params_path.c_str());
    for (const auto& w : params.forward_info.warnings)
        std::cout << "fit: forward: " << w << '\n';
    for (const auto& w : params.lateral_info.warnings)
        std::cout << "fit: lateral: " << w << '\n';

    if (!params.forward_info.converged || !params.lateral_info.converged) {
        std::string diag_path = detail::join_path(cfg.output_dir, "fit_diagnostics.json");
        detail::write_json_file(diag_path,
                                {{"format", "raceline-fit-diagnostics"},
                                 {"version", 1},
                                 {"meta", detail::meta_json(cfg)},
                                 {"forward", detail::fit_info_json(params.forward_info)},
                                 {"lateral", detail::fit_info_json(params.lateral_info)}});
        std::cerr << "fit: optimization did not converge; diagnostics in " << diag_path
                  << '\n';
        return 3;
    }
    return 0;
}

inline int cmd_simulate(const RunConfig& cfg, const std::string& race_id, int start_frame,
                        int every) {
    LoadedParams loaded = detail::load_fitted(cfg, "simulate");
    TrackModel track = detail::load_track_model(cfg, "simulate");
    TrackingSet set = detail::load_tracking(cfg, "simulate");
    if (!set.enriched)
        throw std::runtime_error(
            "simulate: tracking file lacks prepared coordinates; run prepare first");
    const RaceFrameTable& race = detail::find_race(set, race_id, "simulate");

    auto [lo, hi] = detail::shared_frame_range(race);
    if (start_frame < lo || start_frame > hi)
        throw std::runtime_error(
            strprintf("simulate: start frame %d outside race '%s' (every competitor is "
                      "observed on frames %d..%d)",
                      start_frame, race_id.c_str(), lo, hi));
    std::vector<int> frames;
    for (int f = start_frame; f <= hi; f += every > 0 ? every : 1) {
        frames.push_back(f);
        if (every <= 0) break;
    }

    RaceSetup setup = detail::race_setup(race);
    SimConfig sim = detail::sim_config(cfg, loaded.drag);

    nlohmann::json frame_results = nlohmann::json::array();
    for (int f : frames) {
        for (size_t c = 0; c < race.competitors.size(); ++c) {
            const FrameObs* obs = race.competitors[c].at_frame(f);
            setup.competitors[c].start_forward = obs->pos.forward;
            // projection occasionally dips a whisker inside the rail; the
            // simulator keeps starting positions on the course
            setup.competitors[c].start_lateral = std::max(0.0, obs->pos.lateral);
        }
        PlacementMatrix m =
            simulate_placements(track, loaded.params, setup, sim, cfg.draws, cfg.seed,
                                cfg.workers);
        nlohmann::json win = nlohmann::json::object();
        for (const auto& h : m.horses) win[h] = m.win_probability(h);
        frame_results.push_back({{"start_frame", f},
                                 {"counts", m.counts},
                                 {"probabilities", m.probabilities()},
                                 {"win_probability", win}});
    }

    std::vector<std::string> horses;
    for (const auto& c : setup.competitors) horses.push_back(c.horse_id);

    detail::ensure_output_dir(cfg);
    std::string out_path =
        detail::join_path(cfg.output_dir, "placements_" + race_id + ".json");
    detail::write_json_file(out_path, {{"format", "raceline-placements"},
                                       {"version", 1},
                                       {"meta", detail::meta_json(cfg)},
                                       {"race_id", race_id},
                                       {"context", setup.context},
                                       {"draws", cfg.draws},
                                       {"horses", horses},
                                       {"frames", frame_results}});

    std::cout << strprintf("simulate: race '%s', %zu start frame(s) x %d draws -> %s\n",
                           race_id.c_str(), frames.size(), cfg.draws, out_path.c_str());
    return 0;
}

inline int cmd_counterfactual(const RunConfig& cfg, const std::string& race_id) {
    LoadedParams loaded = detail::load_fitted(cfg, "counterfactual");
    TrackModel track = detail::load_track_model(cfg, "counterfactual");
    TrackingSet set = detail::load_tracking(cfg, "counterfactual");
    const RaceFrameTable& race = detail::find_race(set, race_id, "counterfactual");

    RaceSetup base = detail::race_setup(race);
    SimConfig sim = detail::sim_config(cfg, loaded.drag);
    LaneExperiment exp = lane_experiment(track, loaded.params, base, sim, cfg.lane_width,
                                         cfg.lane_sims, cfg.seed, cfg.workers);

    const size_t n = exp.horses.size();
    std::vector<double> lane_mean(n, 0.0);
    for (size_t lane = 0; lane < n; ++lane) {
        for (size_t h = 0; h < n; ++h) lane_mean[lane] += exp.mean_rank[h][lane];
        lane_mean[lane] /= static_cast<double>(n);
    }

    detail::ensure_output_dir(cfg);
    std::string out_path = detail::join_path(cfg.output_dir, "lanes_" + race_id + ".json");
    detail::write_json_file(out_path,
                            {{"format", "raceline-lanes"},
                             {"version", 1},
                             {"meta", detail::meta_json(cfg)},
                             {"race_id", race_id},
                             {"lane_width", cfg.lane_width},
                             {"assignments", exp.assignments},
                             {"sims_per_assignment", exp.sims_per_assignment},
                             {"samples_per_cell", exp.samples_per_cell},
                             {"horses", exp.horses},
                             {"mean_rank", exp.mean_rank},
                             {"lane_expected_rank", lane_mean}});

    std::cout << strprintf(
        "counterfactual: race '%s', %d assignments x %d sims (%zu per cell) -> %s\n",
        race_id.c_str(), exp.assignments, exp.sims_per_assignment, exp.samples_per_cell,
        out_path.c_str());
    return 0;
}

inline int cmd_profiles(const RunConfig& cfg) {
    LoadedParams loaded = detail::load_fitted(cfg, "profiles");
    TrackingSet set = detail::load_tracking(cfg, "profiles");

    std::vector<ProfileVector> profiles =
        extract_profiles(loaded.params, race_counts(set));
    BSplineBasis basis{loaded.params.spline_spec};
    ClusterResult result = cluster_profiles(profiles, basis, cfg.clusters);

    std::unordered_map<std::string, size_t> leaf_of;
    for (size_t i = 0; i < result.horse_ids.size(); ++i) leaf_of[result.horse_ids[i]] = i;

    detail::ensure_output_dir(cfg);

    TextTable clusters;
    clusters.comments = detail::meta_comments(cfg);
    clusters.comments.push_back(strprintf(
        "horses with fewer than %d races carry no leaf or label", kMinRacesForClustering));
    clusters.columns = {"horse_id", "race_count", "leaf", "label"};
    for (const auto& p : profiles) {
        auto it = leaf_of.find(p.horse_id);
        clusters.rows.push_back(
            {p.horse_id, strprintf("%d", p.race_count),
             it == leaf_of.end() ? "" : strprintf("%zu", it->second),
             it == leaf_of.end() ? ""
                                 : strprintf("%d", result.labels[it->second])});
    }
    std::string clusters_path = detail::join_path(cfg.output_dir, "profile_clusters.csv");
    {
        std::ofstream out = detail::open_output(clusters_path);
        write_table(out, clusters);
    }

    TextTable tree;
    tree.comments = detail::meta_comments(cfg);
    tree.comments.push_back(
        "leaves 0..n-1 are the rows of profile_clusters.csv; merge t creates node n+t");
    tree.columns = {"node", "left", "right", "height", "size"};
    int n_leaves = static_cast<int>(result.horse_ids.size());
    for (size_t t = 0; t < result.merges.size(); ++t) {
        const ProfileMerge& m = result.merges[t];
        tree.rows.push_back({strprintf("%d", n_leaves + static_cast<int>(t)),
                             strprintf("%d", m.left), strprintf("%d", m.right),
                             strprintf("%.9f", m.height), strprintf("%d", m.size)});
    }
    std::string tree_path = detail::join_path(cfg.output_dir, "profile_tree.csv");
    {
        std::ofstream out = detail::open_output(tree_path);
        write_table(out, tree);
    }

    TextTable curves;
    curves.comments = detail::meta_comments(cfg);
    curves.columns = {"horse_id", "j", "speed"};
    for (const auto& p : profiles)
        for (const auto& [j, v] : sample_profile(basis, p.coefficients, cfg.curve_step))
            curves.rows.push_back(
                {p.horse_id, strprintf("%.3f", j), strprintf("%.6f", v)});
    std::string curves_path = detail::join_path(cfg.output_dir, "profile_curves.csv");
    {
        std::ofstream out = detail::open_output(curves_path);
        write_table(out, curves);
    }

    std::cout << strprintf(
        "profiles: %zu horses (%d clustered into %d groups) -> %s, %s, %s\n",
        profiles.size(), n_leaves, result.k, clusters_path.c_str(), tree_path.c_str(),
        curves_path.c_str());
    return 0;
}

inline int cmd_ratings(const RunConfig& cfg) {
    LoadedParams loaded = detail::load_fitted(cfg, "ratings");
    std::vector<JockeyRating> ratings = jockey_ratings(loaded.params);

    detail::ensure_output_dir(cfg);
    TextTable t;
    t.comments = detail::meta_comments(cfg);
    t.comments.push_back("rating is the rider's forward-speed effect, metres per frame");
    t.columns = {"rank", "jockey_id", "rating"};
    for (size_t i = 0; i < ratings.size(); ++i)
        t.rows.push_back({strprintf("%zu", i + 1), ratings[i].jockey_id,
                          strprintf("%.6f", ratings[i].rating)});
    std::string out_path = detail::join_path(cfg.output_dir, "jockey_ratings.csv");
    {
        std::ofstream out = detail::open_output(out_path);
        write_table(out, t);
    }

    std::cout << strprintf("ratings: %zu riders -> %s\n", ratings.size(),
                           out_path.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// Argument surface. Global flags may appear before or after the subcommand;
// command-specific --input points at the tracking file the command reads.

inline int run_cli(int argc, char** argv) {
    CLI::App app{"frame-level race model: prepare tracking data, fit movement models, "
                 "and run placement, lane, profile, and rating analyses"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::uint64_t seed = 0;
    int workers = 0;
    std::string output_dir;
    app.add_option("--config", config_path, "run configuration JSON file");
    CLI::Option* seed_opt = app.add_option("--seed", seed, "override the run seed");
    CLI::Option* workers_opt =
        app.add_option("--workers", workers, "override the worker count");
    CLI::Option* output_opt =
        app.add_option("--output-dir", output_dir, "override the output directory");

    SynthSpec spec;
    CLI::App* c_synth =
        app.add_subcommand("synth", "generate the bundled synthetic fixture");
    c_synth->add_option("--horses", spec.n_horses, "field of horses to invent");
    c_synth->add_option("--jockeys", spec.n_jockeys, "number of riders");
    c_synth->add_option("--races", spec.n_races, "number of races");
    c_synth->add_option("--per-race", spec.per_race, "competitors per race");
    c_synth->add_option("--sigma-forward", spec.sigma_forward,
                        "forward step noise, metres per frame");
    c_synth->add_option("--sigma-lateral", spec.sigma_lateral,
                        "lateral step noise, metres per frame");

    std::string input;
    CLI::App* c_prepare = app.add_subcommand(
        "prepare", "project raw tracking onto the track and repair anomalies");
    c_prepare->add_option("--input", input, "tracking file (overrides config)");
    CLI::App* c_fit =
        app.add_subcommand("fit", "fit both movement models from prepared tracking");
    c_fit->add_option("--input", input, "prepared tracking file (overrides config)");

    std::string race_id;
    int start_frame = 0, every = 0;
    CLI::App* c_sim = app.add_subcommand(
        "simulate", "posterior-predictive placement probabilities for one race");
    c_sim->add_option("--race", race_id, "race id to replay")->required();
    c_sim->add_option("--start-frame", start_frame, "frame to start simulating from");
    c_sim->add_option("--every", every,
                      "also simulate every K-th frame to the end of the race");
    c_sim->add_option("--input", input, "prepared tracking file (overrides config)");

    CLI::App* c_lane = app.add_subcommand(
        "counterfactual", "exhaustive starting-lane experiment for one race's field");
    c_lane->add_option("--race", race_id, "race id whose field to permute")->required();
    c_lane->add_option("--input", input, "tracking file (overrides config)");

    CLI::App* c_prof = app.add_subcommand(
        "profiles", "cluster fitted speed profiles; emit labels, merge tree, curves");
    c_prof->add_option("--input", input, "tracking file for race counts (overrides config)");

    CLI::App* c_rate =
        app.add_subcommand("ratings", "ranked rider effects from the fitted model");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
        if (seed_opt->count() > 0) cfg.seed = seed;
        if (workers_opt->count() > 0) cfg.workers = workers;
        if (output_opt->count() > 0) cfg.output_dir = output_dir;
        if (!input.empty()) cfg.tracking_path = input;
        if (cfg.workers < 1)
            throw std::runtime_error("config: workers must be at least 1");

        if (c_synth->parsed()) return cmd_synth(cfg, spec);
        if (c_prepare->parsed()) return cmd_prepare(cfg);
        if (c_fit->parsed()) return cmd_fit(cfg);
        if (c_sim->parsed()) return cmd_simulate(cfg, race_id, start_frame, every);
        if (c_lane->parsed()) return cmd_counterfactual(cfg, race_id);
        if (c_prof->parsed()) return cmd_profiles(cfg);
        if (c_rate->parsed()) return cmd_ratings(cfg);
        return 1;  // unreachable: a subcommand is required
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace raceline

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "raceline/config.hpp"
#include "raceline/params_io.hpp"
#include "raceline/synth.hpp"
#include "support.hpp"

using namespace raceline;
using Catch::Approx;

namespace {

FittedParams sample_params() {
    FittedParams p;
    p.horses = {"h00", "h01"};
    p.jockeys = {"j0", "j1", "j2"};
    p.contexts = {"dirt_fast", "turf_good"};
    p.spline_spec = SplineSpec{};
    p.std_forward = Standardizer::identity(kForwardCovariateCount);
    p.std_forward.mean[3] = 1.25;
    p.std_forward.sd[3] = 0.4;
    p.std_lateral = Standardizer::identity(kLateralCovariateCount);
    auto& f = p.forward;
    f.layout = {2, 9, 3, 2, kForwardCovariateCount};
    f.mode.assign(f.layout.size(), 0.0);
    for (size_t i = 0; i < f.mode.size(); ++i)
        f.mode[i] = std::sin(static_cast<double>(i)) * 2.0 + 4.0;
    f.curvature_sd.assign(f.layout.size(), 0.01);
    f.curvature_sd[0] = 0.0;
    auto& l = p.lateral;
    l.layout = {0, 0, 3, 2, kLateralCovariateCount};
    l.mode.assign(l.layout.size(), 0.0);
    for (size_t i = 0; i < l.mode.size(); ++i)
        l.mode[i] = std::cos(static_cast<double>(i)) * 0.2;
    l.curvature_sd.assign(l.layout.size(), 0.005);
    p.forward_info.iterations = 137;
    p.forward_info.converged = true;
    p.forward_info.neg_log_posterior = 834.4385;
    p.forward_info.n_rows = 2800;
    p.forward_info.warnings = {"optimizer: stopped at numerical precision"};
    p.lateral_info.iterations = 28;
    p.lateral_info.converged = true;
    p.lateral_info.neg_log_posterior = -120.25;
    p.lateral_info.n_rows = 2800;
    return p;
}

}  // namespace

TEST_CASE("parameter files round-trip every field exactly") {
    auto dir = testsupport::scratch_dir("params_io");
    FittedParams p = sample_params();
    DragTable drag;
    drag.clean_air = 0.91;
    ParamsMeta meta;
    meta.config_digest = "00ff00ff00ff00ff";
    meta.seed = 424242;

    std::string path = (dir / "params.json").string();
    save_params(path, p, drag, meta);
    LoadedParams back = load_params(path);

    CHECK(back.params.horses == p.horses);
    CHECK(back.params.jockeys == p.jockeys);
    CHECK(back.params.contexts == p.contexts);
    CHECK(back.params.spline_spec.internal_knots == p.spline_spec.internal_knots);
    CHECK(back.params.std_forward.mean == p.std_forward.mean);
    CHECK(back.params.std_forward.sd == p.std_forward.sd);
    CHECK(back.params.forward.mode == p.forward.mode);
    CHECK(back.params.forward.curvature_sd == p.forward.curvature_sd);
    CHECK(back.params.lateral.mode == p.lateral.mode);
    CHECK(back.params.forward.layout.H == p.forward.layout.H);
    CHECK(back.params.forward.layout.P == p.forward.layout.P);
    CHECK(back.params.forward_info.iterations == 137);
    CHECK(back.params.forward_info.warnings == p.forward_info.warnings);
    CHECK(back.params.lateral_info.neg_log_posterior == -120.25);
    CHECK(back.drag.clean_air == 0.91);
    CHECK(back.meta.config_digest == "00ff00ff00ff00ff");
    CHECK(back.meta.seed == 424242);

    // identical content twice: byte-for-byte stable serialization
    std::string path2 = (dir / "params2.json").string();
    save_params(path2, p, drag, meta);
    std::ifstream a(path), b(path2);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());
}

TEST_CASE("parameter files reject foreign and damaged content") {
    auto dir = testsupport::scratch_dir("params_bad");
    CHECK_THROWS_AS(load_params((dir / "missing.json").string()), std::runtime_error);

    auto write = [&](const char* name, const nlohmann::json& j) {
        std::ofstream out(dir / name);
        out << j.dump();
        return (dir / name).string();
    };
    CHECK_THROWS_WITH(load_params(write("other.json", {{"format", "something-else"}})),
                      Catch::Matchers::ContainsSubstring("unrecognized format"));

    FittedParams p = sample_params();
    nlohmann::json good = params_to_json(p, DragTable{}, ParamsMeta{});
    nlohmann::json wrong_version = good;
    wrong_version["version"] = 99;
    CHECK_THROWS_WITH(load_params(write("v99.json", wrong_version)),
                      Catch::Matchers::ContainsSubstring("version"));

    nlohmann::json short_mode = good;
    short_mode["forward"]["mode"].erase(0);
    CHECK_THROWS_WITH(load_params(write("short.json", short_mode)),
                      Catch::Matchers::ContainsSubstring("layout"));

    nlohmann::json horse_gone = good;
    horse_gone["horses"].erase(0);
    CHECK_THROWS_AS(load_params(write("horses.json", horse_gone)), std::runtime_error);

    std::ofstream(dir / "garbage.json") << "{not json";
    CHECK_THROWS_AS(load_params((dir / "garbage.json").string()), std::runtime_error);
}

TEST_CASE("config files apply partial overrides over defaults") {
    auto dir = testsupport::scratch_dir("config");
    std::ofstream(dir / "run.json") << R"({
        "paths": {"tracking": "data.csv", "output_dir": "out"},
        "seed": 99,
        "simulation": {"draws": 500},
        "lanes": {"width": 1.5}
    })";
    RunConfig c = load_config((dir / "run.json").string());
    CHECK(c.tracking_path == "data.csv");
    CHECK(c.output_dir == "out");
    CHECK(c.seed == 99);
    CHECK(c.draws == 500);
    CHECK(c.lane_width == 1.5);
    // untouched settings keep their defaults
    CHECK(c.race_distance == Approx(1609.34));
    CHECK(c.max_iterations == 2000);
    CHECK(c.clusters == 3);
    CHECK(c.drag.clean_air == Approx(0.90));
    CHECK(c.spline.internal_knots == std::vector<double>{90, 250, 800, 1207, 1375});
}

TEST_CASE("config digests track content rather than formatting") {
    auto dir = testsupport::scratch_dir("config_digest");
    std::ofstream(dir / "a.json") << R"({"seed": 7, "workers": 2})";
    std::ofstream(dir / "b.json") << R"({
        "workers":    2,
        "seed":       7
    })";
    std::ofstream(dir / "c.json") << R"({"seed": 8, "workers": 2})";
    std::string da = config_digest(load_config((dir / "a.json").string()));
    std::string db = config_digest(load_config((dir / "b.json").string()));
    std::string dc = config_digest(load_config((dir / "c.json").string()));
    CHECK(da.size() == 16);
    CHECK(da == db);
    CHECK(da != dc);
    CHECK(config_digest(RunConfig{}).size() == 16);
}

TEST_CASE("config files reject unknown keys") {
    auto dir = testsupport::scratch_dir("config_bad");
    std::ofstream(dir / "typo.json") << R"({"sede": 7})";
    CHECK_THROWS_WITH(load_config((dir / "typo.json").string()),
                      Catch::Matchers::ContainsSubstring("sede"));
    std::ofstream(dir / "nested.json") << R"({"lanes": {"widht": 2.0}})";
    CHECK_THROWS_WITH(load_config((dir / "nested.json").string()),
                      Catch::Matchers::ContainsSubstring("widht"));
}

TEST_CASE("track files round-trip and rebuild the same course") {
    auto dir = testsupport::scratch_dir("track_io");
    SynthSpec spec;
    spec.straight = 300.0;
    spec.radius = 80.0;
    spec.race_distance = 400.0;
    TrackSpec ts = synth_track_spec(spec);
    REQUIRE(ts.has_gate);

    std::string path = (dir / "track.json").string();
    save_track_spec(path, ts);
    TrackSpec back = load_track_spec(path);
    CHECK(back.track_id == ts.track_id);
    CHECK(back.closed == ts.closed);
    CHECK(back.has_gate);
    CHECK(back.inner.size() == ts.inner.size());
    CHECK(back.gate.latitude == Approx(ts.gate.latitude).margin(1e-12));

    TrackModel t1 = build_track(ts);
    TrackModel t2 = build_track(back);
    REQUIRE(t1.rail.size() == t2.rail.size());
    CHECK(t1.rail_length() == Approx(t2.rail_length()).margin(1e-6));

    // the gate roots the arclength so the finish sits one race away
    PlanarPoint mid{0.5 * (t1.finish_line[0].x + t1.finish_line[1].x),
                    0.5 * (t1.finish_line[0].y + t1.finish_line[1].y)};
    CHECK(project_to_track(t1, mid).forward == Approx(400.0).margin(0.5));

    std::ofstream(dir / "bad.json") << R"({"format": "raceline-track", "version": 3})";
    CHECK_THROWS_WITH(load_track_spec((dir / "bad.json").string()),
                      Catch::Matchers::ContainsSubstring("version"));
}

TEST_CASE("synthetic fixture races follow the declared schema") {
    SynthSpec spec;
    spec.n_horses = 6;
    spec.n_jockeys = 3;
    spec.n_races = 4;
    spec.per_race = 4;
    spec.straight = 300.0;
    spec.radius = 80.0;
    spec.race_distance = 400.0;
    SynthResult s = synth_dataset(spec);

    REQUIRE(s.tracking.races.size() == 4);
    for (const auto& race : s.tracking.races) {
        CHECK(race.competitors.size() == 4);
        for (size_t c = 1; c < race.competitors.size(); ++c)
            CHECK(race.competitors[c - 1].horse_id < race.competitors[c].horse_id);
        // every track runs from the gate through its own crossing frame: the
        // final observation is the only one at or past the race distance
        for (const auto& comp : race.competitors) {
            REQUIRE(comp.frames.size() > 50);
            CHECK(comp.frames.front().frame == 0);
            CHECK(comp.frames.back().frame ==
                  static_cast<int>(comp.frames.size()) - 1);
            CHECK(comp.frames.front().pos.forward == 0.0);
            CHECK(comp.frames.back().pos.forward >= spec.race_distance);
            for (size_t f = 0; f + 1 < comp.frames.size(); ++f)
                CHECK(comp.frames[f].pos.forward < spec.race_distance);
        }
    }
    auto counts = race_counts(s.tracking);
    int total = 0;
    for (const auto& [id, n] : counts) total += n;
    CHECK(total == 16);

    // written text rows parse back into the identical frame structure
    std::stringstream buf;
    write_tracking(buf, s.tracking, false);
    TrackingSet parsed = parse_tracking(buf, spec.frame_period);
    REQUIRE(parsed.races.size() == s.tracking.races.size());
    for (size_t r = 0; r < parsed.races.size(); ++r) {
        const auto& pr = parsed.races[r];
        const auto& sr = s.tracking.races[r];
        REQUIRE(pr.competitors.size() == sr.competitors.size());
        for (size_t c = 0; c < pr.competitors.size(); ++c) {
            CHECK(pr.competitors[c].horse_id == sr.competitors[c].horse_id);
            CHECK(pr.competitors[c].jockey_id == sr.competitors[c].jockey_id);
            CHECK(pr.competitors[c].starting_lane == sr.competitors[c].starting_lane);
            REQUIRE(pr.competitors[c].frames.size() == sr.competitors[c].frames.size());
        }
    }
}

TEST_CASE("projected synthetic coordinates recover the simulated positions") {
    SynthSpec spec;
    spec.n_horses = 4;
    spec.n_jockeys = 2;
    spec.n_races = 2;
    spec.per_race = 3;
    spec.straight = 300.0;
    spec.radius = 80.0;
    spec.race_distance = 350.0;
    SynthResult s = synth_dataset(spec);

    // round-trip through the text format and a track rebuilt from its spec,
    // exactly the way the preparation stage will see the data
    std::stringstream buf;
    write_tracking(buf, s.tracking, false);
    TrackingSet parsed = parse_tracking(buf, spec.frame_period);
    TrackModel track = build_track(s.track_spec);

    double worst_forward = 0.0, worst_lateral = 0.0;
    for (size_t r = 0; r < parsed.races.size(); ++r) {
        for (size_t c = 0; c < parsed.races[r].competitors.size(); ++c) {
            const auto& truth_frames = s.tracking.races[r].competitors[c].frames;
            const auto& comp = parsed.races[r].competitors[c];
            for (size_t t = 0; t < comp.frames.size(); ++t) {
                PlanarPoint pl = track.to_track_plane(comp.frames[t].geo);
                TrackPosition pos = project_to_track(track, pl);
                worst_forward = std::max(
                    worst_forward, std::fabs(pos.forward - truth_frames[t].pos.forward));
                worst_lateral = std::max(
                    worst_lateral, std::fabs(pos.lateral - truth_frames[t].pos.lateral));
            }
        }
    }
    // nearest-sample projection on a decimetre rail grid: either coordinate
    // can be off by up to half a sample near the rail, nothing more
    CHECK(worst_forward < 0.06);
    CHECK(worst_lateral < 0.06);
}

TEST_CASE("synthetic spec validation") {
    SynthSpec bad;
    bad.per_race = 12;  // more than the field
    CHECK_THROWS_AS(synth_dataset(bad), std::invalid_argument);
    SynthSpec tiny;
    tiny.race_distance = 5000.0;  // does not fit the course
    CHECK_THROWS_AS(synth_track_spec(tiny), std::invalid_argument);
    SynthSpec noiseless;
    noiseless.sigma_forward = 0.0;
    CHECK_THROWS_AS(synth_truth(noiseless), std::invalid_argument);
}

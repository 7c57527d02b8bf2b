#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "raceline/cluster.hpp"
#include "support.hpp"

using namespace raceline;
using Catch::Approx;

namespace {

BSplineBasis default_basis() { return BSplineBasis{SplineSpec{}}; }

ProfileVector profile(const std::string& id, std::vector<double> coeffs, int races = 6) {
    ProfileVector p;
    p.horse_id = id;
    p.coefficients = std::move(coeffs);
    p.race_count = races;
    return p;
}

// Three stylised running styles with small within-group jitter.
std::vector<ProfileVector> archetype_profiles(int per_group, unsigned seed,
                                              double jitter = 0.02) {
    std::vector<double> fast = {5.2, 5.1, 4.9, 4.6, 4.3, 4.0, 3.8, 3.6, 3.4};
    std::vector<double> steady(9, 4.3);
    std::vector<double> kick = {3.4, 3.5, 3.7, 4.0, 4.3, 4.6, 4.8, 5.0, 5.1};
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> u(-jitter, jitter);
    std::vector<ProfileVector> out;
    auto add = [&](const char* tag, const std::vector<double>& base) {
        for (int i = 0; i < per_group; ++i) {
            std::vector<double> c = base;
            for (auto& v : c) v += u(gen);
            out.push_back(profile(strprintf("%s%d", tag, i), c));
        }
    };
    add("fast", fast);
    add("steady", steady);
    add("kick", kick);
    return out;
}

std::vector<std::vector<double>> coefficient_matrix(const std::vector<ProfileVector>& ps) {
    std::vector<std::vector<double>> m;
    for (const auto& p : ps) m.push_back(p.coefficients);
    return m;
}

}  // namespace

TEST_CASE("identical vectors merge first at height zero") {
    auto basis = default_basis();
    std::vector<ProfileVector> ps = {
        profile("a", {4.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0}),
        profile("b", {5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0}),
        profile("c", {4.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0}),
    };
    ClusterResult r = cluster_profiles(ps, basis, 1);
    REQUIRE(r.merges.size() == 2);
    CHECK(r.merges[0].left == 0);
    CHECK(r.merges[0].right == 2);
    CHECK(r.merges[0].height == 0.0);
    CHECK(r.merges[1].size == 3);
    for (int l : r.labels) CHECK(l == 0);
}

TEST_CASE("archetype groups separate with full purity") {
    auto basis = default_basis();
    auto ps = archetype_profiles(4, 99);
    ClusterResult r = cluster_profiles(ps, basis, 3);

    std::map<std::string, std::set<int>> by_group;
    for (size_t i = 0; i < ps.size(); ++i) {
        std::string group = ps[i].horse_id.substr(0, ps[i].horse_id.size() - 1);
        by_group[group].insert(r.labels[i]);
    }
    std::set<int> seen;
    for (const auto& [group, labels] : by_group) {
        CHECK(labels.size() == 1);  // no group splits across clusters
        seen.insert(*labels.begin());
    }
    CHECK(seen == std::set<int>{0, 1, 2});

    // label 0 is the fastest-starting style, labels then descend in early pace
    for (size_t i = 0; i < ps.size(); ++i) {
        int want = ps[i].horse_id.rfind("fast", 0) == 0   ? 0
                   : ps[i].horse_id.rfind("steady", 0) == 0 ? 1
                                                            : 2;
        CHECK(r.labels[i] == want);
    }
}

TEST_CASE("merge sequence matches the direct variance-increase oracle") {
    auto basis = default_basis();
    for (unsigned seed : {7u, 19u, 402u}) {
        std::mt19937 gen(seed);
        std::uniform_real_distribution<double> u(3.0, 5.5);
        std::vector<ProfileVector> ps;
        for (int i = 0; i < 12; ++i) {
            std::vector<double> c(9);
            for (auto& v : c) v = u(gen);
            ps.push_back(profile(strprintf("h%02d", i), c));
        }
        ClusterResult r = cluster_profiles(ps, basis, 1);
        auto oracle = testsupport::ward_oracle(coefficient_matrix(ps));
        REQUIRE(r.merges.size() == oracle.size());
        for (size_t t = 0; t < oracle.size(); ++t) {
            CHECK(r.merges[t].left == oracle[t].left);
            CHECK(r.merges[t].right == oracle[t].right);
            CHECK(r.merges[t].size == oracle[t].size);
            CHECK(r.merges[t].height ==
                  Approx(oracle[t].height).epsilon(1e-9).margin(1e-12));
        }
    }
}

TEST_CASE("merge heights never decrease") {
    auto basis = default_basis();
    for (unsigned seed : {3u, 81u}) {
        std::mt19937 gen(seed);
        std::uniform_real_distribution<double> u(3.0, 5.5);
        std::vector<ProfileVector> ps;
        for (int i = 0; i < 15; ++i) {
            std::vector<double> c(9);
            for (auto& v : c) v = u(gen);
            ps.push_back(profile(strprintf("h%02d", i), c));
        }
        ClusterResult r = cluster_profiles(ps, basis, 2);
        REQUIRE(r.merges.size() == 14);
        for (size_t t = 1; t < r.merges.size(); ++t)
            CHECK(r.merges[t].height >= r.merges[t - 1].height);
    }
}

TEST_CASE("horses with thin race histories stay out of the clustering") {
    auto basis = default_basis();
    auto ps = archetype_profiles(2, 5);
    ps.push_back(profile("rookie", std::vector<double>(9, 4.4), 4));
    ClusterResult r = cluster_profiles(ps, basis, 3);
    CHECK(r.horse_ids.size() == 6);
    CHECK(std::find(r.horse_ids.begin(), r.horse_ids.end(), "rookie") ==
          r.horse_ids.end());

    std::vector<ProfileVector> thin = {
        profile("a", std::vector<double>(9, 4.0), 5),
        profile("b", std::vector<double>(9, 4.5), 4),
        profile("c", std::vector<double>(9, 5.0), 2),
    };
    REQUIRE_THROWS_AS(cluster_profiles(thin, basis, 3), std::invalid_argument);
}

TEST_CASE("input order does not change the assignment") {
    auto basis = default_basis();
    auto ps = archetype_profiles(3, 123);
    ClusterResult base = cluster_profiles(ps, basis, 3);
    std::map<std::string, int> want;
    for (size_t i = 0; i < ps.size(); ++i) want[base.horse_ids[i]] = base.labels[i];

    std::mt19937 gen(77);
    for (int trial = 0; trial < 4; ++trial) {
        std::shuffle(ps.begin(), ps.end(), gen);
        ClusterResult r = cluster_profiles(ps, basis, 3);
        for (size_t i = 0; i < ps.size(); ++i)
            CHECK(r.labels[i] == want.at(r.horse_ids[i]));
    }
}

TEST_CASE("profile curves sample the fitted basis") {
    auto basis = default_basis();
    std::vector<double> coeffs = {4.1, 4.3, 4.0, 3.9, 4.5, 4.2, 4.4, 3.8, 3.7};
    auto curve = sample_profile(basis, coeffs, 10.0);
    REQUIRE(curve.size() == 166);
    CHECK(curve.front().first == 0.0);
    CHECK(curve.front().second == Approx(coeffs.front()).margin(1e-12));
    CHECK(curve.back().first == Approx(1650.0).margin(1e-9));
    CHECK(curve.back().second == Approx(coeffs.back()).margin(1e-12));
    for (const auto& [j, v] : curve) CHECK(v == Approx(basis.eval(j, coeffs)).margin(1e-12));

    std::vector<double> flat(9, 4.25);
    for (const auto& [j, v] : sample_profile(basis, flat, 50.0))
        CHECK(v == Approx(4.25).margin(1e-10));

    REQUIRE_THROWS_AS(sample_profile(basis, coeffs, 0.0), std::invalid_argument);
}

TEST_CASE("profiles lift straight out of fitted parameters") {
    FittedParams params;
    params.horses = {"a", "b"};
    params.jockeys = {"j"};
    params.contexts = {"dirt_fast"};
    params.spline_spec = SplineSpec{};
    auto& f = params.forward;
    f.layout.H = 2;
    f.layout.B = 9;
    f.layout.J = 1;
    f.layout.C = 1;
    f.layout.P = kForwardCovariateCount;
    f.mode.assign(f.layout.size(), 0.0);
    for (size_t b = 0; b < 9; ++b) {
        f.mode[b] = 4.0 + 0.1 * static_cast<double>(b);
        f.mode[9 + b] = 3.5;
    }

    auto ps = extract_profiles(params, {{"a", 7}});
    REQUIRE(ps.size() == 2);
    CHECK(ps[0].horse_id == "a");
    CHECK(ps[0].race_count == 7);
    CHECK(ps[0].coefficients[3] == Approx(4.3).margin(1e-12));
    CHECK(ps[1].race_count == 0);
    CHECK(ps[1].coefficients == std::vector<double>(9, 3.5));

    FittedParams no_curve = params;
    no_curve.forward.layout.B = 0;
    no_curve.forward.layout.H = 0;
    REQUIRE_THROWS_AS(extract_profiles(no_curve, {}), std::logic_error);
}

TEST_CASE("clustering validates its inputs") {
    auto basis = default_basis();
    auto ps = archetype_profiles(2, 1);
    REQUIRE_THROWS_AS(cluster_profiles(ps, basis, 0), std::invalid_argument);

    auto bad = ps;
    bad[0].coefficients.resize(5);
    REQUIRE_THROWS_AS(cluster_profiles(bad, basis, 2), std::invalid_argument);
}

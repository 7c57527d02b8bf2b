#pragma once

// Shared fixtures and independent oracles for the test suite. Oracles here are
// written from first principles (finite differences, direct centroid Ward,
// closed-form geometry) so library results are checked against a second route.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "raceline/geo.hpp"

namespace testsupport {

using raceline::PlanarPoint;

// Counter-clockwise stadium: two horizontal straights of length `straight`
// joined by semicircles of radius `radius`. Starts at (0,0) heading +x.
inline std::vector<PlanarPoint> stadium_outline(double straight, double radius,
                                                double step = 0.25) {
    std::vector<PlanarPoint> pts;
    auto add = [&](double x, double y) { pts.push_back({x, y}); };
    int n_straight = std::max(2, static_cast<int>(straight / step));
    int n_arc = std::max(8, static_cast<int>(raceline::kPi * radius / step));
    for (int i = 0; i < n_straight; ++i)
        add(straight * i / n_straight, 0.0);
    for (int i = 0; i <= n_arc; ++i) {
        double a = -0.5 * raceline::kPi + raceline::kPi * i / n_arc;
        add(straight + radius * std::cos(a), radius + radius * std::sin(a));
    }
    for (int i = 1; i < n_straight; ++i)
        add(straight - straight * i / n_straight, 2.0 * radius);
    for (int i = 0; i <= n_arc; ++i) {
        double a = 0.5 * raceline::kPi + raceline::kPi * i / n_arc;
        add(radius * std::cos(a), radius + radius * std::sin(a));
    }
    return pts;
}

// Central finite-difference gradient of f at x.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h = 1e-5) {
    std::vector<double> g(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        double step = h * std::max(1.0, std::fabs(x[i]));
        double keep = x[i];
        x[i] = keep + step;
        double fp = f(x);
        x[i] = keep - step;
        double fm = f(x);
        x[i] = keep;
        g[i] = (fp - fm) / (2.0 * step);
    }
    return g;
}

// Spearman rank correlation (average ranks for ties).
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), size_t{0});
        std::sort(idx.begin(), idx.end(), [&](size_t i, size_t j) { return v[i] < v[j]; });
        std::vector<double> r(v.size());
        size_t i = 0;
        while (i < idx.size()) {
            size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
            double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
            for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    std::vector<double> ra = ranks(a), rb = ranks(b);
    double ma = 0, mb = 0;
    for (size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= static_cast<double>(ra.size());
    mb /= static_cast<double>(rb.size());
    double sab = 0, saa = 0, sbb = 0;
    for (size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

// Brute-force Ward merges: recompute the exact within-cluster variance
// increase for every pair at every step from cluster members directly.
struct WardOracleMerge {
    int left, right;  // cluster ids, originals 0..n-1, merged n, n+1, ...
    double height;    // sqrt(2 * variance increase)
    int size;
};

inline std::vector<WardOracleMerge> ward_oracle(const std::vector<std::vector<double>>& pts) {
    struct Cl {
        int id;
        std::vector<int> members;
        bool alive = true;
    };
    std::vector<Cl> cl;
    for (size_t i = 0; i < pts.size(); ++i)
        cl.push_back({static_cast<int>(i), {static_cast<int>(i)}, true});
    auto centroid = [&](const Cl& c) {
        std::vector<double> m(pts[0].size(), 0.0);
        for (int idx : c.members)
            for (size_t d = 0; d < m.size(); ++d) m[d] += pts[idx][d];
        for (auto& v : m) v /= static_cast<double>(c.members.size());
        return m;
    };
    std::vector<WardOracleMerge> merges;
    int next_id = static_cast<int>(pts.size());
    for (size_t step = 1; step < pts.size(); ++step) {
        double best = std::numeric_limits<double>::infinity();
        size_t bi = 0, bj = 0;
        for (size_t i = 0; i < cl.size(); ++i) {
            if (!cl[i].alive) continue;
            for (size_t j = i + 1; j < cl.size(); ++j) {
                if (!cl[j].alive) continue;
                auto ci = centroid(cl[i]), cj = centroid(cl[j]);
                double d2 = 0;
                for (size_t d = 0; d < ci.size(); ++d) d2 += (ci[d] - cj[d]) * (ci[d] - cj[d]);
                double na = static_cast<double>(cl[i].members.size());
                double nb = static_cast<double>(cl[j].members.size());
                double cost = na * nb / (na + nb) * d2;
                if (cost < best - 1e-12 ||
                    (std::fabs(cost - best) <= 1e-12 &&
                     (cl[i].id < cl[bi].id ||
                      (cl[i].id == cl[bi].id && cl[j].id < cl[bj].id)))) {
                    best = cost;
                    bi = i;
                    bj = j;
                }
            }
        }
        Cl merged;
        merged.id = next_id++;
        merged.members = cl[bi].members;
        merged.members.insert(merged.members.end(), cl[bj].members.begin(),
                              cl[bj].members.end());
        merges.push_back({std::min(cl[bi].id, cl[bj].id), std::max(cl[bi].id, cl[bj].id),
                          std::sqrt(2.0 * best), static_cast<int>(merged.members.size())});
        cl[bi].alive = false;
        cl[bj].alive = false;
        cl.push_back(std::move(merged));
    }
    return merges;
}

// Unique scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("raceline_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testsupport

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "raceline/common.hpp"
#include "raceline/model.hpp"
#include "raceline/spline.hpp"

namespace raceline {

// A horse's fitted distance curve in coefficient form, plus how much racing
// backs it up. Thin curves (few races) are noise and stay out of clustering.
struct ProfileVector {
    std::string horse_id;
    std::vector<double> coefficients;  // m/frame, one per basis function
    int race_count = 0;
};

constexpr int kMinRacesForClustering = 5;

// One agglomeration step. Leaves are numbered 0..n-1 in input order; the
// merge at position t creates node n + t.
struct ProfileMerge {
    int left = 0;
    int right = 0;     // left < right, both previously-created node ids
    double height = 0.0;
    int size = 0;      // leaves under the new node
};

struct ClusterResult {
    std::vector<std::string> horse_ids;  // eligible horses, input order
    std::vector<ProfileMerge> merges;    // n - 1 rows in merge order
    std::vector<int> labels;             // per horse: 0 = strongest early pace
    int k = 0;
};

inline std::vector<ProfileVector> eligible_profiles(const std::vector<ProfileVector>& in) {
    std::vector<ProfileVector> out;
    for (const auto& p : in)
        if (p.race_count >= kMinRacesForClustering) out.push_back(p);
    return out;
}

// Pulls per-horse coefficient rows out of a fitted model. Horses missing from
// race_counts count zero races and will be filtered from clustering.
inline std::vector<ProfileVector> extract_profiles(
    const FittedParams& params,
    const std::unordered_map<std::string, int>& race_counts) {
    const ParamLayout& l = params.forward.layout;
    if (l.B == 0)
        throw std::logic_error("profiles: forward model carries no distance curve");
    std::vector<ProfileVector> out;
    for (size_t h = 0; h < params.horses.size(); ++h) {
        ProfileVector p;
        p.horse_id = params.horses[h];
        p.coefficients.assign(params.forward.mode.begin() + static_cast<long>(h * l.B),
                              params.forward.mode.begin() + static_cast<long>((h + 1) * l.B));
        auto it = race_counts.find(p.horse_id);
        p.race_count = it == race_counts.end() ? 0 : it->second;
        out.push_back(std::move(p));
    }
    return out;
}

// Curve samples (j, value) on a regular grid across the basis domain,
// endpoints included.
inline std::vector<std::pair<double, double>> sample_profile(
    const BSplineBasis& basis, const std::vector<double>& coefficients,
    double step = 10.0) {
    if (step <= 0.0) throw std::invalid_argument("profiles: sample step must be positive");
    double lo = basis.knots().front(), hi = basis.knots().back();
    std::vector<std::pair<double, double>> out;
    for (double j = lo; j < hi + 0.5 * step; j += step) {
        double jj = std::min(j, hi);
        out.push_back({jj, basis.eval(jj, coefficients)});
    }
    return out;
}

namespace detail {

// Mean curve value over the opening phase of a race, used only to give the
// final clusters a deterministic, interpretable ordering.
inline double early_pace(const BSplineBasis& basis, const std::vector<double>& coeffs,
                         double early_end = 250.0, double step = 10.0) {
    double sum = 0.0;
    int count = 0;
    for (double j = 0.0; j <= early_end + 1e-9; j += step) {
        sum += basis.eval(j, coeffs);
        ++count;
    }
    return sum / count;
}

}  // namespace detail

// Bottom-up minimum-variance clustering of the eligible coefficient vectors.
// Pair dissimilarities start as squared Euclidean distances and are updated
// with the standard recurrence, so the recorded height for a merge equals
// sqrt(2 * increase in within-cluster variance). Ties in merge cost take the
// lexicographically smallest (left id, right id) pair. The tree is cut at k
// clusters and labels are ordered by descending early pace.
inline ClusterResult cluster_profiles(const std::vector<ProfileVector>& profiles,
                                      const BSplineBasis& basis, int k = 3) {
    if (k < 1) throw std::invalid_argument("clustering: k must be at least 1");
    std::vector<ProfileVector> pts = eligible_profiles(profiles);
    const size_t n = pts.size();
    if (n < static_cast<size_t>(k))
        throw std::invalid_argument(
            strprintf("clustering: %zu eligible profiles, need at least %d", n, k));
    const size_t dim = basis.dimension();
    for (const auto& p : pts)
        if (p.coefficients.size() != dim)
            throw std::invalid_argument(
                strprintf("clustering: profile '%s' has %zu coefficients, expected %zu",
                          p.horse_id.c_str(), p.coefficients.size(), dim));

    ClusterResult res;
    res.k = k;
    for (const auto& p : pts) res.horse_ids.push_back(p.horse_id);

    const size_t slots = 2 * n - 1;  // leaves plus every merged node
    std::vector<char> alive(slots, 0);
    std::vector<double> size(slots, 0.0);
    std::vector<std::vector<double>> d2(slots);
    for (size_t s = 0; s < slots; ++s) d2[s].assign(s, 0.0);
    auto dist2 = [&](size_t a, size_t b) -> double& {
        return a < b ? d2[b][a] : d2[a][b];
    };

    for (size_t i = 0; i < n; ++i) {
        alive[i] = 1;
        size[i] = 1.0;
        for (size_t j = 0; j < i; ++j) {
            double s = 0.0;
            for (size_t d = 0; d < dim; ++d) {
                double diff = pts[i].coefficients[d] - pts[j].coefficients[d];
                s += diff * diff;
            }
            d2[i][j] = s;
        }
    }

    // Leaf ancestry for the k-cut: which node each leaf currently sits under.
    std::vector<size_t> root(n);
    for (size_t i = 0; i < n; ++i) root[i] = i;

    for (size_t step = 0; step + 1 < n; ++step) {
        double best = std::numeric_limits<double>::infinity();
        size_t bi = slots, bj = slots;
        for (size_t j = 0; j < n + step; ++j) {
            if (!alive[j]) continue;
            for (size_t i = 0; i < j; ++i) {
                if (!alive[i]) continue;
                double c = d2[j][i];
                if (c < best || (c == best && (i < bi || (i == bi && j < bj)))) {
                    best = c;
                    bi = i;
                    bj = j;
                }
            }
        }

        size_t m = n + step;
        size[m] = size[bi] + size[bj];
        for (size_t t = 0; t < m; ++t) {
            if (!alive[t] || t == bi || t == bj) continue;
            dist2(m, t) = ((size[bi] + size[t]) * dist2(bi, t) +
                           (size[bj] + size[t]) * dist2(bj, t) - size[t] * best) /
                          (size[m] + size[t]);
        }
        alive[bi] = 0;
        alive[bj] = 0;
        alive[m] = 1;

        ProfileMerge mg;
        mg.left = static_cast<int>(bi);
        mg.right = static_cast<int>(bj);
        mg.height = std::sqrt(best);
        mg.size = static_cast<int>(size[m]);
        res.merges.push_back(mg);

        if (step + static_cast<size_t>(k) < n) {  // merge is below the k-cut
            for (size_t leaf = 0; leaf < n; ++leaf)
                if (root[leaf] == bi || root[leaf] == bj) root[leaf] = m;
        }
    }

    // Compress the surviving roots into 0..k-1, then order those groups by
    // descending early pace (ties by first member) so label 0 always means
    // the fastest-starting cluster.
    std::vector<size_t> uniq;
    for (size_t leaf = 0; leaf < n; ++leaf)
        if (std::find(uniq.begin(), uniq.end(), root[leaf]) == uniq.end())
            uniq.push_back(root[leaf]);
    if (uniq.size() != static_cast<size_t>(k))
        throw std::logic_error("clustering: cut produced the wrong cluster count");

    struct Group {
        size_t first_leaf;
        double pace_sum = 0.0;
        int count = 0;
    };
    std::vector<Group> groups(uniq.size());
    std::vector<int> provisional(n);
    for (size_t leaf = 0; leaf < n; ++leaf) {
        size_t g = static_cast<size_t>(
            std::find(uniq.begin(), uniq.end(), root[leaf]) - uniq.begin());
        provisional[leaf] = static_cast<int>(g);
        if (groups[g].count == 0) groups[g].first_leaf = leaf;
        groups[g].pace_sum += detail::early_pace(basis, pts[leaf].coefficients);
        groups[g].count += 1;
    }
    std::vector<size_t> order(groups.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        double pa = groups[a].pace_sum / groups[a].count;
        double pb = groups[b].pace_sum / groups[b].count;
        if (pa != pb) return pa > pb;
        return groups[a].first_leaf < groups[b].first_leaf;
    });
    std::vector<int> relabel(groups.size());
    for (size_t r = 0; r < order.size(); ++r) relabel[order[r]] = static_cast<int>(r);

    res.labels.resize(n);
    for (size_t leaf = 0; leaf < n; ++leaf)
        res.labels[leaf] = relabel[static_cast<size_t>(provisional[leaf])];
    return res;
}

}  // namespace raceline

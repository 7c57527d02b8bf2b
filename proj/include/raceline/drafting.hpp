#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace raceline {

// Drag-coefficient lookup around a leading competitor. Inside the measured
// grid the coefficient is bilinear; outside it blends linearly toward clean
// air, reaching it at `fade_behind` metres back or `fade_lateral` metres to
// the side. Gaps closer than the first grid row use that row.
struct DragTable {
    std::vector<double> behind_grid = {2.0, 3.5, 5.0};     // metres behind, ascending
    std::vector<double> lateral_grid = {-0.5, 0.0, 0.5};   // metres to the side, ascending
    std::vector<std::vector<double>> coefficients = {      // [behind][lateral]
        {0.61, 0.55, 0.61},
        {0.76, 0.70, 0.76},
        {0.88, 0.82, 0.88},
    };
    double clean_air = 0.90;
    double fade_behind = 8.0;
    double fade_lateral = 1.0;
    double air_density = 1.225;   // kg/m^3
    double frontal_area = 1.0;    // m^2

    void validate() const {
        if (behind_grid.size() < 2 || lateral_grid.size() < 2)
            throw std::invalid_argument("drag table: grids need at least two nodes");
        if (coefficients.size() != behind_grid.size())
            throw std::invalid_argument("drag table: coefficient rows do not match grid");
        for (const auto& row : coefficients)
            if (row.size() != lateral_grid.size())
                throw std::invalid_argument("drag table: coefficient columns do not match grid");
        for (size_t i = 1; i < behind_grid.size(); ++i)
            if (behind_grid[i] <= behind_grid[i - 1])
                throw std::invalid_argument("drag table: behind grid not ascending");
        for (size_t j = 1; j < lateral_grid.size(); ++j)
            if (lateral_grid[j] <= lateral_grid[j - 1])
                throw std::invalid_argument("drag table: lateral grid not ascending");
        if (behind_grid.front() <= 0.0)
            throw std::invalid_argument("drag table: behind grid must be positive");
        if (fade_behind < behind_grid.back() || fade_lateral < lateral_grid.back())
            throw std::invalid_argument("drag table: fade envelope inside the grid");
        size_t centre = 0;
        double best = std::fabs(lateral_grid[0]);
        for (size_t j = 1; j < lateral_grid.size(); ++j)
            if (std::fabs(lateral_grid[j]) < best) {
                best = std::fabs(lateral_grid[j]);
                centre = j;
            }
        for (size_t i = 0; i < coefficients.size(); ++i) {
            for (size_t j = 0; j < coefficients[i].size(); ++j) {
                if (coefficients[i][j] >= clean_air)
                    throw std::invalid_argument(
                        "drag table: drafting coefficient not below clean air");
                if (i > 0 && coefficients[i][j] < coefficients[i - 1][j])
                    throw std::invalid_argument(
                        "drag table: coefficient decreasing with distance behind");
                if (coefficients[i][j] < coefficients[i][centre])
                    throw std::invalid_argument(
                        "drag table: offset column below the directly-behind column");
            }
        }
        if (air_density <= 0.0 || frontal_area <= 0.0)
            throw std::invalid_argument("drag table: density and area must be positive");
    }
};

namespace detail {
inline double interp_weight(double x, const std::vector<double>& grid, size_t* lo) {
    if (x <= grid.front()) {
        *lo = 0;
        return 0.0;
    }
    if (x >= grid.back()) {
        *lo = grid.size() - 2;
        return 1.0;
    }
    size_t i = 0;
    while (x > grid[i + 1]) ++i;
    *lo = i;
    return (x - grid[i]) / (grid[i + 1] - grid[i]);
}
}  // namespace detail

// Drag coefficient for a competitor `rel_behind` metres behind the nearest
// leader with centre-to-centre lateral offset `rel_lateral`. Non-positive
// rel_behind means beside or ahead: clean air.
inline double drag_coefficient(const DragTable& table, double rel_behind, double rel_lateral) {
    if (rel_behind <= 0.0) return table.clean_air;

    double cb = std::clamp(rel_behind, table.behind_grid.front(), table.behind_grid.back());
    double cl = std::clamp(rel_lateral, table.lateral_grid.front(), table.lateral_grid.back());
    size_t bi, lj;
    double wb = detail::interp_weight(cb, table.behind_grid, &bi);
    double wl = detail::interp_weight(cl, table.lateral_grid, &lj);
    double hull =
        (1.0 - wb) * ((1.0 - wl) * table.coefficients[bi][lj] +
                      wl * table.coefficients[bi][lj + 1]) +
        wb * ((1.0 - wl) * table.coefficients[bi + 1][lj] +
              wl * table.coefficients[bi + 1][lj + 1]);

    double fade = 0.0;
    if (rel_behind > table.behind_grid.back())
        fade = std::min(1.0, (rel_behind - table.behind_grid.back()) /
                                 (table.fade_behind - table.behind_grid.back()));
    if (rel_lateral > table.lateral_grid.back())
        fade = std::max(fade, std::min(1.0, (rel_lateral - table.lateral_grid.back()) /
                                                (table.fade_lateral -
                                                 table.lateral_grid.back())));
    else if (rel_lateral < table.lateral_grid.front())
        fade = std::max(fade, std::min(1.0, (table.lateral_grid.front() - rel_lateral) /
                                                (table.fade_lateral +
                                                 table.lateral_grid.front())));
    return hull + fade * (table.clean_air - hull);
}

// F = 1/2 rho v^2 c_d A
inline double drag_force(const DragTable& table, double speed, double c_d) {
    return 0.5 * table.air_density * speed * speed * c_d * table.frontal_area;
}

// Cumulative aerodynamic work with and without drafting. prop_energy_saved
// stays in [0, 1) and is 0 until the first drafting frame.
struct EnergyLedger {
    double actual_joules = 0.0;
    double clean_joules = 0.0;

    void add_frame(const DragTable& table, double speed, double distance, double c_d) {
        actual_joules += drag_force(table, speed, c_d) * distance;
        clean_joules += drag_force(table, speed, table.clean_air) * distance;
    }

    double prop_energy_saved() const {
        if (clean_joules <= 0.0) return 0.0;
        return 1.0 - actual_joules / clean_joules;
    }
};

}  // namespace raceline

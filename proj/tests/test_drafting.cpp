#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "raceline/drafting.hpp"

using namespace raceline;
using Catch::Approx;

TEST_CASE("default drag table passes its own validation") {
    DragTable table;
    CHECK_NOTHROW(table.validate());
}

TEST_CASE("drag table validation rejects bad tables") {
    SECTION("coefficient at or above clean air") {
        DragTable t;
        t.coefficients[2][0] = 0.95;
        CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    }
    SECTION("coefficient decreasing with distance behind") {
        DragTable t;
        t.coefficients[1][1] = 0.50;  // below the 2 m row
        CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    }
    SECTION("offset column below directly-behind") {
        DragTable t;
        t.coefficients[0][0] = 0.50;
        CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    }
    SECTION("non-ascending grid") {
        DragTable t;
        t.behind_grid = {2.0, 2.0, 5.0};
        CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    }
}

TEST_CASE("drag coefficient interpolation") {
    DragTable table;

    SECTION("grid nodes are reproduced exactly") {
        CHECK(drag_coefficient(table, 2.0, 0.0) == Approx(0.55).margin(1e-12));
        CHECK(drag_coefficient(table, 3.5, 0.5) == Approx(0.76).margin(1e-12));
        CHECK(drag_coefficient(table, 5.0, -0.5) == Approx(0.88).margin(1e-12));
    }

    SECTION("bilinear midpoint mixes four nodes with equal weight") {
        // (2.75, 0.25): halfway in both directions
        double want = 0.25 * (0.55 + 0.61 + 0.70 + 0.76);
        CHECK(drag_coefficient(table, 2.75, 0.25) == Approx(want).margin(1e-12));
    }

    SECTION("beside or ahead is clean air") {
        CHECK(drag_coefficient(table, 0.0, 0.0) == table.clean_air);
        CHECK(drag_coefficient(table, -3.0, 0.0) == table.clean_air);
    }

    SECTION("fade reaches clean air at the envelope") {
        CHECK(drag_coefficient(table, 8.0, 0.0) == Approx(0.90).margin(1e-12));
        CHECK(drag_coefficient(table, 12.0, 0.0) == Approx(0.90).margin(1e-12));
        CHECK(drag_coefficient(table, 3.0, 1.0) == Approx(0.90).margin(1e-12));
        CHECK(drag_coefficient(table, 3.0, -1.5) == Approx(0.90).margin(1e-12));
    }

    SECTION("fade is linear past the grid edge") {
        // halfway between the 5 m row and the 8 m clean-air line
        double edge = drag_coefficient(table, 5.0, 0.0);
        CHECK(drag_coefficient(table, 6.5, 0.0) ==
              Approx(0.5 * (edge + table.clean_air)).margin(1e-12));
        double lat_edge = drag_coefficient(table, 3.5, 0.5);
        CHECK(drag_coefficient(table, 3.5, 0.75) ==
              Approx(0.5 * (lat_edge + table.clean_air)).margin(1e-12));
    }

    SECTION("blend is continuous at the hull boundary") {
        for (double lat : {-0.4, 0.0, 0.3}) {
            double inside = drag_coefficient(table, 5.0 - 1e-9, lat);
            double outside = drag_coefficient(table, 5.0 + 1e-9, lat);
            CHECK(std::fabs(inside - outside) < 1e-7);
        }
        for (double behind : {2.5, 4.0}) {
            double inside = drag_coefficient(table, behind, 0.5 - 1e-9);
            double outside = drag_coefficient(table, behind, 0.5 + 1e-9);
            CHECK(std::fabs(inside - outside) < 1e-7);
        }
    }

    SECTION("gaps closer than the first row use that row") {
        CHECK(drag_coefficient(table, 1.0, 0.0) == Approx(0.55).margin(1e-12));
    }

    SECTION("coefficient never exceeds clean air and respects monotonicity") {
        for (double b = 0.1; b < 10.0; b += 0.17)
            for (double l = -1.3; l < 1.3; l += 0.11) {
                double c = drag_coefficient(table, b, l);
                CHECK(c <= table.clean_air + 1e-12);
                CHECK(c >= 0.55 - 1e-12);
            }
        // monotone non-decreasing in distance behind at fixed lateral
        for (double l : {-0.3, 0.0, 0.2}) {
            double prev = 0.0;
            for (double b = 2.0; b <= 9.0; b += 0.05) {
                double c = drag_coefficient(table, b, l);
                CHECK(c >= prev - 1e-12);
                prev = c;
            }
        }
    }
}

TEST_CASE("drag force matches the quadratic law") {
    DragTable table;
    // 1/2 * 1.225 * 16^2 * 0.9 * 1.0
    CHECK(drag_force(table, 16.0, 0.9) == Approx(141.12).margin(1e-9));
    CHECK(drag_force(table, 0.0, 0.9) == 0.0);
    // doubling speed quadruples force
    CHECK(drag_force(table, 8.0, 0.7) * 4.0 == Approx(drag_force(table, 16.0, 0.7)));
}

TEST_CASE("energy ledger accumulates savings") {
    DragTable table;
    EnergyLedger ledger;
    CHECK(ledger.prop_energy_saved() == 0.0);

    SECTION("clean-air frames save nothing") {
        ledger.add_frame(table, 16.0, 4.0, table.clean_air);
        ledger.add_frame(table, 15.0, 3.75, table.clean_air);
        CHECK(ledger.prop_energy_saved() == Approx(0.0).margin(1e-12));
    }

    SECTION("constant drafting at 0.8 of clean air saves 20 percent") {
        for (int i = 0; i < 10; ++i)
            ledger.add_frame(table, 16.0, 4.0, 0.8 * table.clean_air);
        CHECK(ledger.prop_energy_saved() == Approx(0.2).margin(1e-12));
    }

    SECTION("mixed frames stay within [0, 1)") {
        ledger.add_frame(table, 16.0, 4.0, table.clean_air);
        ledger.add_frame(table, 16.0, 4.0, 0.55);
        ledger.add_frame(table, 14.0, 3.5, 0.82);
        double p = ledger.prop_energy_saved();
        CHECK(p > 0.0);
        CHECK(p < 1.0);
        // energy scales with force times distance
        EnergyLedger expect;
        double e_clean = 141.12 * 4.0 + 141.12 * 4.0 +
                         drag_force(table, 14.0, 0.9) * 3.5;
        double e_actual = 141.12 * 4.0 + drag_force(table, 16.0, 0.55) * 4.0 +
                          drag_force(table, 14.0, 0.82) * 3.5;
        CHECK(p == Approx(1.0 - e_actual / e_clean).margin(1e-9));
    }
}

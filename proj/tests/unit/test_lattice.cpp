#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "toricdm/lattice.hpp"

using namespace toricdm;

TEST_CASE("lattice counting identities") {
    for (auto [lx, ly] : {std::pair{2, 2}, {3, 3}, {2, 3}, {4, 3}}) {
        Lattice lat = build_lattice(lx, ly);
        CHECK(lat.n_spins() == 2 * lx * ly);
        CHECK(lat.n_plaquettes() == lx * ly);
        CHECK(lat.n_stars() == lx * ly);
    }
    Lattice lat33 = build_lattice(3, 3);
    CHECK(lat33.n_spins() == 18);
}

TEST_CASE("lattice rejects degenerate sizes") {
    CHECK_THROWS_AS(build_lattice(1, 3), std::invalid_argument);
    CHECK_THROWS_AS(build_lattice(3, 1), std::invalid_argument);
    CHECK_THROWS_AS(build_lattice(0, 0), std::invalid_argument);
}

TEST_CASE("every bond index produced exactly once; cells have 4 distinct bonds") {
    for (auto [lx, ly] : {std::pair{2, 2}, {3, 3}, {3, 4}}) {
        Lattice lat = build_lattice(lx, ly);
        std::set<int> seen;
        for (int y = 0; y < ly; ++y)
            for (int x = 0; x < lx; ++x) {
                seen.insert(lat.h_bond(x, y));
                seen.insert(lat.v_bond(x, y));
            }
        CHECK(static_cast<int>(seen.size()) == lat.n_spins());
        CHECK(*seen.begin() == 0);
        CHECK(*seen.rbegin() == lat.n_spins() - 1);

        for (int cell = 0; cell < lat.n_cells(); ++cell) {
            const auto& bs = lat.cell_bonds(cell);
            std::set<int> uniq(bs.begin(), bs.end());
            CHECK(uniq.size() == 4);
        }
    }
}

TEST_CASE("each bond lies in exactly 2 plaquettes and 2 stars; double covers") {
    for (auto [lx, ly] : {std::pair{2, 2}, {3, 3}}) {
        Lattice lat = build_lattice(lx, ly);
        std::map<int, int> plaq_count, star_count;
        for (int p = 0; p < lat.n_plaquettes(); ++p)
            for (int b : lat.plaquette_bonds(p)) ++plaq_count[b];
        for (int s = 0; s < lat.n_stars(); ++s)
            for (int b : lat.star_bonds(s)) ++star_count[b];
        for (int b = 0; b < lat.n_spins(); ++b) {
            CHECK(plaq_count[b] == 2);  // the multiset union covers each bond exactly twice
            CHECK(star_count[b] == 2);
        }
    }
}

TEST_CASE("straight dual loops: counts, lengths, disjoint partition") {
    Lattice lat = build_lattice(3, 3);
    auto loops_x = straight_dual_loops(lat, Axis::x);
    auto loops_y = straight_dual_loops(lat, Axis::y);
    CHECK(loops_x.size() == 3);
    CHECK(loops_y.size() == 3);
    for (const auto& lp : loops_x) CHECK(lp.length() == 3);
    for (const auto& lp : loops_y) CHECK(lp.length() == 3);

    std::set<int> all_bonds;
    for (const auto& lp : loops_x)
        for (int b : lp.bonds) CHECK(all_bonds.insert(b).second);  // pairwise disjoint
    CHECK(static_cast<int>(all_bonds.size()) == lat.lx() * lat.ly());
}

TEST_CASE("loop invariant: every loop bond joins its two neighboring cells") {
    Lattice lat = build_lattice(3, 4);
    auto check_loop = [&](const LoopPath& lp) {
        int n = lp.length();
        REQUIRE(static_cast<int>(lp.cells.size()) == n);
        for (int k = 0; k < n; ++k) {
            int prev = lp.cells[(k + n - 1) % n];
            int cur = lp.cells[k];
            CHECK(lat.slot_of(prev, lp.bonds[k]) >= 0);
            CHECK(lat.slot_of(cur, lp.bonds[k]) >= 0);
        }
        // each cell is entered and left through two distinct bonds
        for (int k = 0; k < n; ++k) CHECK(lp.bonds[k] != lp.bonds[(k + 1) % n]);
    };
    for (auto axis : {Axis::x, Axis::y}) {
        for (const auto& lp : straight_dual_loops(lat, axis)) check_loop(lp);
        for (const auto& lp : straight_direct_loops(lat, axis)) check_loop(lp);
    }
    for (int s = 0; s < lat.n_stars(); ++s) check_loop(elementary_loop(lat, {CellKind::star, s}));
    for (int p = 0; p < lat.n_plaquettes(); ++p)
        check_loop(elementary_loop(lat, {CellKind::plaquette, p}));
}

TEST_CASE("elementary loops have 4 incidences with 4 distinct bonds") {
    Lattice lat = build_lattice(2, 2);
    LoopPath lp = elementary_loop(lat, {CellKind::plaquette, 0});
    CHECK(lp.cells.size() == 4);
    std::set<int> uniq(lp.bonds.begin(), lp.bonds.end());
    CHECK(uniq.size() == 4);

    Lattice lat3 = build_lattice(3, 3);
    LoopPath lp3 = elementary_loop(lat3, {CellKind::star, lat3.star_id(1, 1)});
    CHECK(lp3.cells.size() == 4);
    std::set<int> plaqs(lp3.cells.begin(), lp3.cells.end());
    CHECK(plaqs.size() == 4);
    // bonds of the loop are exactly the bonds of the star
    std::set<int> loop_bonds(lp3.bonds.begin(), lp3.bonds.end());
    const auto& sb = lat3.star_bonds(lat3.star_id(1, 1));
    CHECK(loop_bonds == std::set<int>(sb.begin(), sb.end()));

    CHECK_THROWS_AS(elementary_loop(lat3, {CellKind::star, 99}), std::invalid_argument);
}

TEST_CASE("phase parity: contractible loops even, non-contractible by length") {
    Lattice lat = build_lattice(3, 3);
    for (int s = 0; s < lat.n_stars(); ++s)
        CHECK(elementary_loop(lat, {CellKind::star, s}).phase_parity() == 0);
    for (const auto& lp : straight_dual_loops(lat, Axis::x)) CHECK(lp.phase_parity() == 1);

    Lattice even = build_lattice(2, 2);
    for (const auto& lp : straight_dual_loops(even, Axis::x)) CHECK(lp.phase_parity() == 0);
}

TEST_CASE("translation invariance: shifted coordinates map cells onto cells") {
    Lattice lat = build_lattice(3, 3);
    int dx = 1, dy = 2;
    // bond permutation induced by the shift
    auto shift_bond = [&](int b) {
        int orient = b % 2;
        int x = (b / 2) % lat.lx();
        int y = (b / 2) / lat.lx();
        return orient == 0 ? lat.h_bond(x + dx, y + dy) : lat.v_bond(x + dx, y + dy);
    };
    // shifted plaquettes/stars must map to existing plaquette/star bond sets
    std::set<std::set<int>> plaq_sets, star_sets;
    for (int p = 0; p < lat.n_plaquettes(); ++p) {
        const auto& bs = lat.plaquette_bonds(p);
        plaq_sets.insert(std::set<int>(bs.begin(), bs.end()));
    }
    for (int s = 0; s < lat.n_stars(); ++s) {
        const auto& bs = lat.star_bonds(s);
        star_sets.insert(std::set<int>(bs.begin(), bs.end()));
    }
    for (int p = 0; p < lat.n_plaquettes(); ++p) {
        std::set<int> shifted;
        for (int b : lat.plaquette_bonds(p)) shifted.insert(shift_bond(b));
        CHECK(plaq_sets.count(shifted) == 1);
    }
    for (int s = 0; s < lat.n_stars(); ++s) {
        std::set<int> shifted;
        for (int b : lat.star_bonds(s)) shifted.insert(shift_bond(b));
        CHECK(star_sets.count(shifted) == 1);
    }
}

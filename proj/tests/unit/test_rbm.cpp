#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "toricdm/hamiltonian.hpp"
#include "toricdm/lattice.hpp"
#include "toricdm/rbm.hpp"
#include "toricdm/rng.hpp"

using namespace toricdm;

namespace {
constexpr double kPi = std::numbers::pi;

// independent oracle: plain product of cosines, no log-sign bookkeeping
double direct_amplitude(const Lattice& lat, const RbmParams& p, const SpinConfig& s) {
    double a = 1.0;
    for (int cell = 0; cell < lat.n_cells(); ++cell) {
        double th = p.bias(cell);
        const auto& bonds = lat.cell_bonds(cell);
        for (int k = 0; k < 4; ++k) th += p.weight(cell, k) * s[bonds[k]];
        double c = std::cos(th);
        if (std::abs(c) < kCosZeroTol) return 0.0;
        a *= c;
    }
    return a;
}

RbmParams perturbed(const Lattice& lat, std::uint64_t seed, double scale) {
    return random_params(lat, seed, scale);
}

SpinConfig random_config(const Lattice& lat, std::uint64_t seed) {
    Rng rng(seed);
    SpinConfig c(lat.n_spins());
    for (auto& s : c) s = rng.uniform01() < 0.5 ? +1 : -1;
    return c;
}
}  // namespace

TEST_CASE("amplitude: identity parameters give psi = 1 on any config") {
    Lattice lat = build_lattice(3, 3);
    RbmParams zero(3, 3);
    for (int t = 0; t < 5; ++t) {
        Amplitude a = log_amplitude(lat, zero, random_config(lat, 100 + t));
        CHECK(!a.is_zero);
        CHECK(a.sign == 1.0);
        CHECK(a.log_abs == doctest::Approx(0.0).epsilon(1e-15));
    }
}

TEST_CASE("amplitude: analytic ground state on all-up config") {
    Lattice lat = build_lattice(3, 3);
    RbmParams psi3 = toric_ground_state_params(lat);
    SpinConfig up(lat.n_spins(), +1);
    Amplitude a = log_amplitude(lat, psi3, up);
    // nine plaquette factors cos(pi) = -1, nine star factors cos(2 pi) = +1
    CHECK(!a.is_zero);
    CHECK(a.sign == -1.0);
    CHECK(a.value() == doctest::Approx(-1.0).epsilon(1e-12));

    // single flipped spin kills the two adjacent plaquette factors
    SpinConfig one_down = up;
    one_down[7] = -1;
    CHECK(log_amplitude(lat, psi3, one_down).is_zero);
}

TEST_CASE("amplitude: config length mismatch is rejected") {
    Lattice lat = build_lattice(2, 2);
    SpinConfig bad(5, +1);
    CHECK_THROWS_AS(log_amplitude(lat, RbmParams(2, 2), bad), std::invalid_argument);
}

TEST_CASE("log-sign form reproduces the direct cosine product") {
    Lattice lat = build_lattice(3, 3);
    for (int t = 0; t < 20; ++t) {
        RbmParams p = perturbed(lat, 200 + t, 0.7);
        SpinConfig c = random_config(lat, 300 + t);
        double direct = direct_amplitude(lat, p, c);
        Amplitude a = log_amplitude(lat, p, c);
        if (direct == 0.0) {
            CHECK(a.is_zero);
        } else {
            CHECK(a.value() == doctest::Approx(direct).epsilon(1e-12));
        }
    }
}

TEST_CASE("log_derivatives: zeros at identity parameters, exact value at pi/4") {
    Lattice lat = build_lattice(3, 3);
    RbmParams zero(3, 3);
    auto d = log_derivatives(lat, zero, random_config(lat, 7));
    for (double v : d) CHECK(v == 0.0);

    // theta_X = pi/4 for one plaquette, 0 elsewhere: bias derivative -1 there
    RbmParams p(3, 3);
    p.bias(2) = kPi / 4;
    SpinConfig up(lat.n_spins(), +1);
    auto d2 = log_derivatives(lat, p, up);
    CHECK(d2[5 * 2] == doctest::Approx(-1.0).epsilon(1e-12));
    for (int cell = 0; cell < lat.n_cells(); ++cell) {
        if (cell == 2) continue;
        CHECK(d2[5 * cell] == 0.0);
    }
}

TEST_CASE("log_derivatives match central finite differences of log|psi|") {
    Lattice lat = build_lattice(2, 2);
    const double step = 1e-5;
    for (int t = 0; t < 10; ++t) {
        RbmParams p = perturbed(lat, 400 + t, 0.4);
        SpinConfig c = random_config(lat, 500 + t);
        if (log_amplitude(lat, p, c).is_zero) continue;
        // keep away from tan poles, where the finite-difference oracle itself
        // loses accuracy
        WavefunctionState st(lat, p, c);
        bool near_singular = false;
        for (int cell = 0; cell < lat.n_cells(); ++cell)
            if (std::abs(std::cos(st.theta(cell))) < 0.05) near_singular = true;
        if (near_singular) continue;
        auto d = log_derivatives(lat, p, c);
        for (int i = 0; i < p.n_params(); ++i) {
            RbmParams pp = p, pm = p;
            pp.values[i] += step;
            pm.values[i] -= step;
            double fd = (log_amplitude(lat, pp, c).log_abs - log_amplitude(lat, pm, c).log_abs) / (2 * step);
            CHECK(std::abs(d[i] - fd) < 1e-6);
        }
    }
}

TEST_CASE("log_derivatives throw at zero-amplitude points") {
    Lattice lat = build_lattice(3, 3);
    RbmParams psi3 = toric_ground_state_params(lat);
    SpinConfig c(lat.n_spins(), +1);
    c[0] = -1;
    CHECK_THROWS_AS(log_derivatives(lat, psi3, c), std::domain_error);
}

TEST_CASE("toric ground state: stabilizer expectations on 2x2 by enumeration") {
    Lattice lat = build_lattice(2, 2);
    RbmParams psi = toric_ground_state_params(lat);
    AmplitudeTable t = build_amplitude_table(lat, psi);
    // every star and plaquette expectation is +1
    for (int s = 0; s < lat.n_stars(); ++s) {
        std::uint32_t mask = 0;
        for (int b : lat.star_bonds(s)) mask |= 1u << b;
        double num = 0, den = 0;
        for (std::uint32_t idx = 0; idx < t.amp.size(); ++idx) {
            num += t.amp[idx] * t.amp[idx ^ mask];
            den += t.amp[idx] * t.amp[idx];
        }
        CHECK(num / den == doctest::Approx(1.0).epsilon(1e-12));
    }
    ToricParams tp;
    CHECK(exact_energy(lat, psi, tp) == doctest::Approx(-8.0).epsilon(1e-12));
}

TEST_CASE("toric ground state on 3x3: energy -18 and Wilson loops -1") {
    Lattice lat = build_lattice(3, 3);
    RbmParams psi3 = toric_ground_state_params(lat);
    ToricParams tp;  // j_p = j_s = 1, h = 0
    CHECK(exact_energy(lat, psi3, tp) == doctest::Approx(-18.0).epsilon(1e-12));
    auto [w1, w2] = averaged_wilson_exact(lat, psi3);
    CHECK(w1 == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(w2 == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(exact_sz_total(lat, psi3) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("toric ground state vanishes on stabilizer-violating configs (2x2)") {
    Lattice lat = build_lattice(2, 2);
    RbmParams psi = toric_ground_state_params(lat);
    AmplitudeTable t = build_amplitude_table(lat, psi);
    for (std::uint32_t idx = 0; idx < t.amp.size(); ++idx) {
        bool ok = true;
        for (int p = 0; p < lat.n_plaquettes() && ok; ++p) {
            int par = 0;
            for (int b : lat.plaquette_bonds(p)) par ^= (idx >> b) & 1u;
            if (par) ok = false;
        }
        if (!ok) CHECK(t.amp[idx] == 0.0);
        if (ok) CHECK(t.amp[idx] != 0.0);
    }
}

TEST_CASE("polarized params represent the unique all-up product state") {
    Lattice lat = build_lattice(3, 3);
    RbmParams pol = polarized_params(lat);
    AmplitudeTable t = build_amplitude_table(lat, pol);
    CHECK(std::abs(t.amp[0]) > 0.0);  // index 0 = all-up
    for (std::uint32_t idx = 1; idx < t.amp.size(); ++idx) CHECK(t.amp[idx] == 0.0);
    CHECK(exact_sz_total(lat, pol) == doctest::Approx(18.0).epsilon(1e-12));

    ToricParams tp;
    tp.h = 1.0;
    // plaquette term -9, field term -18, star ratios vanish
    CHECK(exact_energy(lat, pol, tp) == doctest::Approx(-27.0).epsilon(1e-12));
}

TEST_CASE("random_params: determinism and zero-scale identity") {
    Lattice lat = build_lattice(3, 3);
    RbmParams base = toric_ground_state_params(lat);
    RbmParams a = random_params(lat, 0, 0.0);
    CHECK(a.values == base.values);
    RbmParams b1 = random_params(lat, 42, 0.1);
    RbmParams b2 = random_params(lat, 42, 0.1);
    CHECK(b1.values == b2.values);
    RbmParams c = random_params(lat, 43, 0.1);
    CHECK(b1.values != c.values);
}

TEST_CASE("fast flip ratio equals full recomputation") {
    Lattice lat = build_lattice(3, 3);
    for (int t = 0; t < 10; ++t) {
        RbmParams p = perturbed(lat, 600 + t, 0.5);
        SpinConfig c = random_config(lat, 700 + t);
        if (log_amplitude(lat, p, c).is_zero) continue;
        WavefunctionState st(lat, p, c);

        // single flip and star flip
        std::vector<std::vector<int>> flip_sets = {{t % lat.n_spins()}};
        const auto& sb = lat.star_bonds(t % lat.n_stars());
        flip_sets.push_back(std::vector<int>(sb.begin(), sb.end()));
        for (const auto& flips : flip_sets) {
            SpinConfig c2 = c;
            for (int b : flips) c2[b] = static_cast<std::int8_t>(-c2[b]);
            double full_a = direct_amplitude(lat, p, c);
            double full_b = direct_amplitude(lat, p, c2);
            auto r = st.flip_ratio(flips);
            if (full_b == 0.0) {
                CHECK(r.is_zero);
            } else {
                CHECK(r.value() == doctest::Approx(full_b / full_a).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("gauge covariance by full enumeration (2x2 and 3x3)") {
    for (auto [lx, ly] : {std::pair{2, 2}, {3, 3}}) {
        Lattice lat = build_lattice(lx, ly);
        Rng rng(derive_seed(12345, {static_cast<std::uint64_t>(lx)}));
        for (int trial = 0; trial < 12; ++trial) {
            RbmParams p = perturbed(lat, 800 + trial + lx, 0.8);

            std::vector<std::pair<GaugeTransform, const char*>> gs;
            gs.emplace_back(GaugeTransform::sign_flip(rng.uniform_int(lat.n_cells())), "sign_flip");
            gs.emplace_back(GaugeTransform::pi_shift_bias(rng.uniform_int(lat.n_cells())), "pi_bias");
            int cell = rng.uniform_int(lat.n_cells());
            int bond = lat.cell_bonds(cell)[rng.uniform_int(4)];
            gs.emplace_back(GaugeTransform::pi_shift_weight(cell, bond), "pi_weight");
            gs.emplace_back(
                GaugeTransform::half_pi_loop(elementary_loop(lat, {CellKind::star, rng.uniform_int(lat.n_stars())})),
                "loop_star");
            gs.emplace_back(GaugeTransform::half_pi_loop(
                                elementary_loop(lat, {CellKind::plaquette, rng.uniform_int(lat.n_plaquettes())})),
                            "loop_plaq");
            gs.emplace_back(GaugeTransform::half_pi_loop(straight_dual_loops(lat, Axis::x)[0]), "loop_ncx");
            gs.emplace_back(GaugeTransform::half_pi_loop(straight_direct_loops(lat, Axis::y)[0]), "loop_ncy");

            AmplitudeTable t0 = build_amplitude_table(lat, p);
            double peak = 0.0;
            for (double a : t0.amp) peak = std::max(peak, std::abs(a));
            REQUIRE(peak > 0.0);

            for (const auto& [g, name] : gs) {
                CAPTURE(name);
                auto [p2, phase] = apply_gauge(lat, p, g);
                double s = std::cos(phase);  // +1 or -1
                AmplitudeTable t1 = build_amplitude_table(lat, p2);
                double worst = 0.0;
                for (std::size_t i = 0; i < t0.amp.size(); ++i)
                    worst = std::max(worst, std::abs(t1.amp[i] - s * t0.amp[i]));
                CHECK(worst / peak < 1e-10);
            }
        }
    }
}

TEST_CASE("gauge phases: expected values per class") {
    Lattice lat = build_lattice(3, 3);
    RbmParams p = perturbed(lat, 1, 0.3);
    CHECK(apply_gauge(lat, p, GaugeTransform::sign_flip(0)).second == 0.0);
    CHECK(apply_gauge(lat, p, GaugeTransform::pi_shift_bias(3)).second == doctest::Approx(kPi));
    auto loop_c = elementary_loop(lat, {CellKind::star, 4});
    CHECK(apply_gauge(lat, p, GaugeTransform::half_pi_loop(loop_c)).second == 0.0);
    auto loop_nc = straight_dual_loops(lat, Axis::x)[1];
    CHECK(apply_gauge(lat, p, GaugeTransform::half_pi_loop(loop_nc)).second == doctest::Approx(kPi));
}

TEST_CASE("applying an elementary loop twice shifts weights by pi (gauge-equivalent)") {
    Lattice lat = build_lattice(2, 2);
    RbmParams p = perturbed(lat, 77, 0.4);
    auto loop = elementary_loop(lat, {CellKind::plaquette, 1});
    auto g = GaugeTransform::half_pi_loop(loop);
    auto [p1, ph1] = apply_gauge(lat, p, g);
    auto [p2, ph2] = apply_gauge(lat, p1, g);
    // net effect: pi shifts on the loop incidences -> amplitude unchanged up
    // to the composed phase, which is 0 mod 2 pi here (even # of pi shifts)
    AmplitudeTable t0 = build_amplitude_table(lat, p);
    AmplitudeTable t2 = build_amplitude_table(lat, p2);
    for (std::size_t i = 0; i < t0.amp.size(); ++i)
        CHECK(t2.amp[i] == doctest::Approx(t0.amp[i]).epsilon(1e-10));
}

TEST_CASE("amplitude factorization: flipping a spin touches only 4 cells") {
    Lattice lat = build_lattice(3, 3);
    RbmParams p = perturbed(lat, 5, 0.6);
    SpinConfig c = random_config(lat, 6);
    WavefunctionState st(lat, p, c);
    int bond = 11;
    auto r = st.flip_ratio(&bond, 1);
    // ratio from the 4 affected cells must match the full recomputation
    SpinConfig c2 = c;
    c2[bond] = static_cast<std::int8_t>(-c2[bond]);
    Amplitude a1 = log_amplitude(lat, p, c);
    Amplitude a2 = log_amplitude(lat, p, c2);
    if (!a1.is_zero && !a2.is_zero && !r.is_zero) {
        double expect = a2.value() / a1.value();
        CHECK(r.value() == doctest::Approx(expect).epsilon(1e-12));
    }
}

#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "toricdm/hamiltonian.hpp"
#include "toricdm/rng.hpp"
#include "toricdm/vmc.hpp"

using namespace toricdm;

namespace {
SamplerConfig small_sampler(std::uint64_t seed, int steps = 300, int burn = 60) {
    SamplerConfig sc;
    sc.n_chains = 4;
    sc.n_steps = steps;
    sc.n_burn = burn;
    sc.seed = seed;
    return sc;
}
}  // namespace

TEST_CASE("metropolis_accept reproduces min(1, |ratio|^2)") {
    // stubbed uniforms against the analytic threshold
    CHECK(metropolis_accept(0.0, false, 0.999999));           // ratio 1: always accept
    CHECK(metropolis_accept(0.7, false, 0.999999));           // uphill in |psi|
    CHECK(!metropolis_accept(0.0, true, 0.0));                // zero amplitude: never
    double log_ratio = std::log(0.8);                         // |ratio|^2 = 0.64
    CHECK(metropolis_accept(log_ratio, false, 0.639));
    CHECK(!metropolis_accept(log_ratio, false, 0.641));
    // frequency over a real RNG stream
    Rng rng(9);
    int n = 100000, acc = 0;
    for (int i = 0; i < n; ++i)
        if (metropolis_accept(log_ratio, false, rng.uniform01())) ++acc;
    CHECK(std::abs(acc / double(n) - 0.64) < 0.005);
}

TEST_CASE("sampler config validation") {
    Lattice lat = build_lattice(2, 2);
    RbmParams p(2, 2);
    SamplerConfig sc;
    sc.n_burn = sc.n_steps;  // must be < n_steps
    CHECK_THROWS_AS(sample_configs(lat, p, sc), std::invalid_argument);
}

TEST_CASE("uniform state: magnetization vanishes within errors") {
    Lattice lat = build_lattice(3, 3);
    RbmParams zero(3, 3);  // all cosines 1: uniform distribution
    auto est = estimate(lat, zero, small_sampler(11), [&](const WavefunctionState& st) {
        double m = 0;
        for (auto s : st.spins()) m += s;
        return m / st.spins().size();
    });
    CHECK(std::abs(est.mean) < 4.0 * est.std_error + 1e-9);
}

TEST_CASE("toric state sampling: plaquette parities stay +1, samples all-up-free") {
    Lattice lat = build_lattice(3, 3);
    RbmParams psi3 = toric_ground_state_params(lat);
    auto configs = sample_configs(lat, psi3, small_sampler(12, 120, 30));
    REQUIRE(!configs.empty());
    for (const auto& c : configs) {
        for (int p = 0; p < lat.n_plaquettes(); ++p) {
            int prod = 1;
            for (int b : lat.plaquette_bonds(p)) prod *= c[b];
            CHECK(prod == 1);
        }
    }
}

TEST_CASE("polarized state: every sample is all-up") {
    Lattice lat = build_lattice(3, 3);
    RbmParams pol = polarized_params(lat);
    auto configs = sample_configs(lat, pol, small_sampler(13, 80, 20));
    for (const auto& c : configs)
        for (auto s : c) CHECK(s == +1);
}

TEST_CASE("estimate: constant observable gives mean 1, stderr 0") {
    Lattice lat = build_lattice(2, 2);
    RbmParams p = random_params(lat, 3, 0.2);
    auto est = estimate(lat, p, small_sampler(14, 100, 20), [](const WavefunctionState&) { return 1.0; });
    CHECK(est.mean == 1.0);
    CHECK(est.std_error == 0.0);
    CHECK(est.n_samples > 0);
}

TEST_CASE("eigenstate energy estimate has zero variance") {
    Lattice lat = build_lattice(3, 3);
    RbmParams psi3 = toric_ground_state_params(lat);
    ToricParams tp;
    auto est = estimate_energy(lat, psi3, tp, small_sampler(15, 100, 20));
    CHECK(est.mean == doctest::Approx(-18.0).epsilon(1e-10));
    CHECK(est.std_error < 1e-10);
}

TEST_CASE("MC energy matches exact enumeration on 2x2") {
    Lattice lat = build_lattice(2, 2);
    ToricParams tp;
    tp.h = 0.3;
    int good = 0, total = 0;
    for (int t = 0; t < 20; ++t) {
        RbmParams p = random_params(lat, 2000 + t, 0.3);
        double exact = exact_energy(lat, p, tp);
        auto est = estimate_energy(lat, p, tp, small_sampler(2100 + t, 400, 100));
        ++total;
        if (std::abs(est.mean - exact) <= 3.0 * est.std_error) ++good;
    }
    CHECK(good >= total - 1);  // ~99.7% per state, allow one outlier
}

TEST_CASE("reproducibility: identical seeds give identical samples and estimates") {
    Lattice lat = build_lattice(2, 2);
    RbmParams p = random_params(lat, 5, 0.4);
    auto c1 = sample_configs(lat, p, small_sampler(42, 60, 10));
    auto c2 = sample_configs(lat, p, small_sampler(42, 60, 10));
    CHECK(c1 == c2);
    ToricParams tp;
    auto e1 = estimate_energy(lat, p, tp, small_sampler(42, 60, 10));
    auto e2 = estimate_energy(lat, p, tp, small_sampler(42, 60, 10));
    CHECK(e1.mean == e2.mean);
    CHECK(e1.std_error == e2.std_error);
}

TEST_CASE("gradient vanishes for the stationary symmetric point") {
    Lattice lat = build_lattice(2, 2);
    RbmParams zero(2, 2);  // all theta_X = 0: every D_i = 0
    ToricParams tp;
    auto ge = energy_gradient(lat, zero, tp, small_sampler(16, 100, 20));
    for (double g : ge.gradient) CHECK(g == 0.0);
}

TEST_CASE("gradient at the eigenstate is zero within errors") {
    Lattice lat = build_lattice(3, 3);
    RbmParams psi3 = toric_ground_state_params(lat);
    ToricParams tp;
    auto ge = energy_gradient(lat, psi3, tp, small_sampler(17, 200, 50));
    for (std::size_t i = 0; i < ge.gradient.size(); ++i)
        CHECK(std::abs(ge.gradient[i]) <= 5.0 * ge.gradient_std_error[i] + 1e-12);
}

namespace {
// Random parameters with every |theta_X| < pi/2: the wavefunction has no
// nodes, so E_loc * D_i has finite variance and the Monte Carlo error bars
// are statistically meaningful. Near nodes (where H psi != 0 but psi = 0)
// the estimator is heavy-tailed and no finite sample calibrates it.
RbmParams bounded_angle_random(const Lattice& lat, std::uint64_t seed, double s) {
    RbmParams p(lat.lx(), lat.ly());
    Rng rng(seed);
    for (double& v : p.values) v = rng.uniform(-s, s);
    return p;
}
}  // namespace

TEST_CASE("covariance gradient matches finite differences of the exact energy (2x2)") {
    Lattice lat = build_lattice(2, 2);
    ToricParams tp;
    tp.h = 0.2;
    const double fd_step = 1e-4;
    for (int t = 0; t < 3; ++t) {
        RbmParams p = bounded_angle_random(lat, 3000 + t, 0.25);
        SamplerConfig sc = small_sampler(3100 + t, 1000, 250);
        sc.n_chains = 8;
        auto ge = energy_gradient(lat, p, tp, sc);
        for (int i = 0; i < p.n_params(); ++i) {
            RbmParams pp = p, pm = p;
            pp.values[i] += fd_step;
            pm.values[i] -= fd_step;
            double fd = (exact_energy(lat, pp, tp) - exact_energy(lat, pm, tp)) / (2 * fd_step);
            double tol = std::max(1e-3, 4.0 * ge.gradient_std_error[i]);
            CHECK(std::abs(ge.gradient[i] - fd) < tol);
        }
    }
}

TEST_CASE("optimize: exact initialization stays at the ground energy") {
    Lattice lat = build_lattice(3, 3);
    RbmParams psi3 = toric_ground_state_params(lat);
    ToricParams tp;
    OptimizerConfig oc;
    oc.n_iterations = 20;
    auto res = optimize(lat, psi3, tp, small_sampler(18, 100, 25), oc);
    for (const auto& e : res.energy_trace) CHECK(e.mean == doctest::Approx(-18.0).epsilon(5e-3));
}

TEST_CASE("optimize: random init on 2x2 respects the variational bound") {
    Lattice lat = build_lattice(2, 2);
    ToricParams tp;
    OptimizerConfig oc;
    oc.n_iterations = 120;
    RbmParams init = random_params(lat, 19, 0.5);
    auto res = optimize(lat, init, tp, small_sampler(20, 200, 50), oc);
    const auto& last = res.energy_trace.back();
    CHECK(last.mean >= -8.0 - 3.0 * last.std_error);  // exact ground energy is -8
    CHECK(last.mean < -6.0);                          // and it actually made progress
}

TEST_CASE("optimizer rejects invalid configs") {
    Lattice lat = build_lattice(2, 2);
    OptimizerConfig oc;
    oc.learning_rate = 0.0;
    CHECK_THROWS_AS(optimize(lat, RbmParams(2, 2), ToricParams{}, small_sampler(1), oc),
                    std::invalid_argument);
}

TEST_CASE("averaged Wilson: sampled estimates agree with enumeration") {
    Lattice lat = build_lattice(3, 3);
    RbmParams psi3 = toric_ground_state_params(lat);
    auto [w1, w2] = averaged_wilson_sampled(lat, psi3, small_sampler(21, 150, 30));
    CHECK(std::abs(w1.mean - (-1.0)) < 0.01);
    CHECK(std::abs(w2.mean - (-1.0)) < 0.01);

    RbmParams zero(3, 3);
    auto [u1, u2] = averaged_wilson_sampled(lat, zero, small_sampler(22, 150, 30));
    CHECK(u1.mean == doctest::Approx(1.0).epsilon(1e-12));  // uniform state: every ratio +1
    CHECK(u2.mean == doctest::Approx(1.0).epsilon(1e-12));

    auto [p1, p2] = averaged_wilson_exact(lat, polarized_params(lat));
    CHECK(p1 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(p2 == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("local energy: hand values and null Hamiltonian") {
    Lattice lat = build_lattice(3, 3);
    SpinConfig up(lat.n_spins(), +1);

    RbmParams psi3 = toric_ground_state_params(lat);
    CHECK(local_energy(lat, psi3, ToricParams{}, up) == doctest::Approx(-18.0).epsilon(1e-12));

    RbmParams pol = polarized_params(lat);
    ToricParams tp_field{1.0, 1.0, 1.0};
    CHECK(local_energy(lat, pol, tp_field, up) == doctest::Approx(-27.0).epsilon(1e-12));

    ToricParams null_tp{0.0, 0.0, 0.0};
    RbmParams p = random_params(lat, 23, 0.3);
    CHECK(local_energy(lat, p, null_tp, up) == 0.0);
}

TEST_CASE("wilson loop local values: analytic states") {
    Lattice lat = build_lattice(3, 3);
    SpinConfig up(lat.n_spins(), +1);
    auto loops = straight_dual_loops(lat, Axis::x);

    RbmParams psi3 = toric_ground_state_params(lat);
    for (const auto& lp : loops)
        CHECK(wilson_loop_value(lat, psi3, up, lp) == doctest::Approx(-1.0).epsilon(1e-12));

    RbmParams pol = polarized_params(lat);
    for (const auto& lp : loops) CHECK(wilson_loop_value(lat, pol, up, lp) == 0.0);

    RbmParams zero(3, 3);
    for (const auto& lp : loops)
        CHECK(wilson_loop_value(lat, zero, up, lp) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fidelity scan: dh = 0 gives exactly 1") {
    Lattice lat = build_lattice(2, 2);
    OptimizerConfig oc;
    oc.n_iterations = 15;
    std::vector<double> grid = {0.1, 0.1};
    auto pts = fidelity_scan(lat, 1.0, 1.0, grid, toric_ground_state_params(lat),
                             small_sampler(24, 80, 20), oc);
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].fidelity_to_next == 1.0);
}

TEST_CASE("fidelity scan: flat region at small fields") {
    Lattice lat = build_lattice(2, 2);
    OptimizerConfig oc;
    oc.n_iterations = 60;
    std::vector<double> grid = {0.0, 0.05, 0.1, 0.15, 0.2};
    auto pts = fidelity_scan(lat, 1.0, 1.0, grid, toric_ground_state_params(lat),
                             small_sampler(25, 150, 40), oc);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) CHECK(pts[i].fidelity_to_next >= 0.99);
}

TEST_CASE("exact vs sampled estimator cross-check contract (2x2)") {
    Lattice lat = build_lattice(2, 2);
    ToricParams tp;
    RbmParams p = random_params(lat, 26, 0.3);
    double exact = exact_energy(lat, p, tp);
    auto est = estimate_energy(lat, p, tp, small_sampler(27, 600, 150));
    CHECK(std::abs(est.mean - exact) <= 3.0 * est.std_error);
}

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "toricdm/hamiltonian.hpp"
#include "toricdm/lattice.hpp"
#include "toricdm/rbm.hpp"

namespace toricdm {

// Metropolis-Rosenbluth sampling of spin configurations from |psi|^2.
// One step is a sweep of n_spins proposals; each proposal is a single-spin
// flip with probability p_spin_flip, otherwise a star (vertex) flip.
struct SamplerConfig {
    int n_chains = 4;
    int n_steps = 400;  // sweeps per chain, kept samples = n_steps - n_burn
    int n_burn = 100;
    double p_spin_flip = 0.3;
    std::uint64_t seed = 0;
};

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    long n_samples = 0;
    bool below_resolution = false;
};

// Pure acceptance rule, exposed for stubbed-RNG tests:
// accept iff u < min(1, |psi'/psi|^2), with the ratio in log form.
bool metropolis_accept(double log_abs_ratio, bool ratio_is_zero, double u);

// Find a configuration with nonzero amplitude: all-up first, then random
// retries, then random star flips. Throws if nothing is found.
SpinConfig find_nonzero_config(const Lattice& lat, const RbmParams& params, std::uint64_t seed);

// Run the sampler, calling visit(chain, state) for every kept sample.
void run_sampler(const Lattice& lat, const RbmParams& params, const SamplerConfig& sc,
                 const std::function<void(int, const WavefunctionState&)>& visit);

// Kept samples of all chains, in (chain, step) order.
std::vector<SpinConfig> sample_configs(const Lattice& lat, const RbmParams& params, const SamplerConfig& sc);

// Monte Carlo mean of a local estimator; the error bar comes from batch
// means, 20 batches per chain.
McEstimate estimate(const Lattice& lat, const RbmParams& params, const SamplerConfig& sc,
                    const std::function<double(const WavefunctionState&)>& local);

McEstimate estimate_energy(const Lattice& lat, const RbmParams& params, const ToricParams& tp,
                           const SamplerConfig& sc);

// (W1_bar, W2_bar) from the sampler, averaging the straight-loop estimators.
std::pair<McEstimate, McEstimate> averaged_wilson_sampled(const Lattice& lat, const RbmParams& params,
                                                          const SamplerConfig& sc);

// Energy and its parameter gradient from one sample set. For the real
// parameters used here, d<E>/dL_i = 2 (<E_loc D_i> - <E_loc><D_i>); E_loc
// and D_i are evaluated on identical configurations.
struct GradientEstimate {
    McEstimate energy;
    std::vector<double> gradient;
    std::vector<double> gradient_std_error;
};
GradientEstimate energy_gradient(const Lattice& lat, const RbmParams& params, const ToricParams& tp,
                                 const SamplerConfig& sc);

struct OptimizerConfig {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int n_iterations = 500;
    int plateau_window = 50;
    double plateau_tol = 1e-4;
};

struct OptimizeResult {
    RbmParams params;
    std::vector<McEstimate> energy_trace;  // one entry per iteration
    bool plateaued = false;
};

// Adam minimization of <H>; deterministic given sc.seed (fresh per-iteration
// sample seeds are derived from it). Throws on the divergence guard.
OptimizeResult optimize(const Lattice& lat, const RbmParams& init, const ToricParams& tp,
                        const SamplerConfig& sc, const OptimizerConfig& oc);

// Fidelity scan over an increasing field grid, warm-starting each
// optimization from the previous field value. fidelity_to_next of entry i is
// |<psi(h_i)|psi(h_{i+1})>|^2 (exact enumeration); NaN for the last entry.
// Repeated grid values reuse the previous state, so dh = 0 gives exactly 1.
struct FidelityPoint {
    double h;
    double fidelity_to_next;
    McEstimate energy;
};
std::vector<FidelityPoint> fidelity_scan(const Lattice& lat, double j_p, double j_s,
                                         const std::vector<double>& h_grid, const RbmParams& init,
                                         const SamplerConfig& sc, const OptimizerConfig& oc);

}  // namespace toricdm

#pragma once

#include <cstdint>
#include <vector>

#include "toricdm/hamiltonian.hpp"
#include "toricdm/lattice.hpp"
#include "toricdm/rbm.hpp"
#include "toricdm/rng.hpp"
#include "toricdm/vmc.hpp"

namespace toricdm {

// Boltzmann-weighted Markov chain over network parameters at
// hyper-temperature T: k independent chains of n steps each, started from
// optimized seeds (cycled over chains), keeping the last m states per chain.
struct EnsembleConfig {
    double temperature = 0.1;
    int k_chains = 8;  // total chains; the seed list is cycled across them
    int n_steps = 250;
    int m_keep = 250;
    double p_m = 0.3;  // probability of the sign-flip move
    double xi = 0.2;   // local noise scale (radians)
    std::uint64_t seed = 0;
};

struct EnsembleMember {
    RbmParams params;
    McEstimate energy;  // the estimate used in the acceptance decision
    int chain_id;
    int step_index;
};

struct Ensemble {
    std::vector<EnsembleMember> members;  // (chain, step) order
    // accounting: incumbent energies are cached, so this equals
    // k_chains * (n_steps + 1) when no retries occurred
    long n_energy_estimates = 0;
};

// Single-site proposal: pick a uniformly random bond j; with probability p_m
// negate the four weights w_Xj of the cells containing j, otherwise add
// independent uniform(0, xi) noise to those same four entries.
RbmParams propose_params(const Lattice& lat, const RbmParams& params, double p_m, double xi, Rng& rng);

// Accept with probability min(1, exp(-(e_proposed - e_current)/T)).
bool accept_step(double e_current, double e_proposed, double temperature, Rng& rng);
// Pure decision rule for stubbed-RNG tests: accept iff u < p_accept.
bool accept_step_u(double e_current, double e_proposed, double temperature, double u);

Ensemble generate(const Lattice& lat, const ToricParams& tp, const EnsembleConfig& ec,
                  const std::vector<RbmParams>& seeds, const SamplerConfig& sampler);

}  // namespace toricdm

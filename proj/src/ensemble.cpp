#include "toricdm/ensemble.hpp"

#include <cmath>
#include <stdexcept>

namespace toricdm {

namespace {
constexpr std::uint64_t kTagEnsChain = 0x656e73ULL;  // "ens"
constexpr int kRetryBudget = 10;
}  // namespace

RbmParams propose_params(const Lattice& lat, const RbmParams& params, double p_m, double xi, Rng& rng) {
    RbmParams out = params;
    int bond = rng.uniform_int(lat.n_spins());
    bool sign_move = rng.uniform01() < p_m;
    for (const auto& cs : lat.bond_cells(bond)) {
        double& w = out.weight(cs.cell, cs.slot);
        if (sign_move)
            w = -w;
        else
            w += rng.uniform(0.0, xi);
    }
    return out;
}

bool accept_step_u(double e_current, double e_proposed, double temperature, double u) {
    if (!(temperature > 0.0)) throw std::invalid_argument("accept_step: temperature must be > 0");
    if (e_proposed <= e_current) return true;
    return u < std::exp(-(e_proposed - e_current) / temperature);
}

bool accept_step(double e_current, double e_proposed, double temperature, Rng& rng) {
    return accept_step_u(e_current, e_proposed, temperature, rng.uniform01());
}

Ensemble generate(const Lattice& lat, const ToricParams& tp, const EnsembleConfig& ec,
                  const std::vector<RbmParams>& seeds, const SamplerConfig& sampler) {
    if (seeds.empty()) throw std::invalid_argument("generate: at least one seed is required");
    if (ec.m_keep > ec.n_steps) throw std::invalid_argument("generate: m_keep must be <= n_steps");
    if (!(ec.temperature > 0.0)) throw std::invalid_argument("generate: temperature must be > 0");
    if (ec.p_m < 0.0 || ec.p_m > 1.0) throw std::invalid_argument("generate: p_m must be in [0,1]");
    if (!(ec.xi > 0.0)) throw std::invalid_argument("generate: xi must be > 0");

    Ensemble ens;
    ens.members.reserve(static_cast<std::size_t>(ec.k_chains) * ec.m_keep);

    for (int chain = 0; chain < ec.k_chains; ++chain) {
        Rng rng(derive_seed(ec.seed, {kTagEnsChain, static_cast<std::uint64_t>(chain)}));
        auto energy_of = [&](const RbmParams& p, int step) {
            SamplerConfig sc = sampler;
            sc.seed = derive_seed(ec.seed, {kTagEnsChain, static_cast<std::uint64_t>(chain),
                                            static_cast<std::uint64_t>(step)});
            ++ens.n_energy_estimates;
            return estimate_energy(lat, p, tp, sc);
        };

        RbmParams incumbent = seeds[chain % seeds.size()];
        McEstimate incumbent_e = energy_of(incumbent, 0);

        for (int step = 1; step <= ec.n_steps; ++step) {
            int attempt = 0;
            for (;; ++attempt) {
                if (attempt >= kRetryBudget)
                    throw std::runtime_error("ensemble chain " + std::to_string(chain) +
                                             ": energy estimation kept failing at step " +
                                             std::to_string(step));
                RbmParams proposal = propose_params(lat, incumbent, ec.p_m, ec.xi, rng);
                McEstimate prop_e;
                try {
                    prop_e = energy_of(proposal, step);
                } catch (const std::runtime_error&) {
                    continue;  // e.g. no nonzero-amplitude start; retry with a fresh proposal
                }
                if (accept_step(incumbent_e.mean, prop_e.mean, ec.temperature, rng)) {
                    incumbent = std::move(proposal);
                    incumbent_e = prop_e;  // cached until the next acceptance
                }
                break;
            }
            if (step > ec.n_steps - ec.m_keep)
                ens.members.push_back(EnsembleMember{incumbent, incumbent_e, chain, step});
        }
    }
    return ens;
}

}  // namespace toricdm

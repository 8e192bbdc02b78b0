#pragma once

#include <cstdint>
#include <vector>

#include "toricdm/lattice.hpp"
#include "toricdm/rbm.hpp"

namespace toricdm {

// Couplings of the toric code Hamiltonian with a longitudinal field,
//   H = -j_p sum_P prod_{i in P} s^z_i - j_s sum_S prod_{i in S} s^x_i - h sum_i s^z_i ,
// energies in units of J_P.
struct ToricParams {
    double j_p = 1.0;
    double j_s = 1.0;
    double h = 0.0;
};

// E_loc(sigma) = <sigma|H|Psi> / psi(sigma). The star terms are off-diagonal
// in the z basis and evaluated as amplitude ratios of 4-bond flips.
double local_energy(const Lattice& lat, const RbmParams& params, const ToricParams& tp, const SpinConfig& config);
double local_energy(const WavefunctionState& state, const ToricParams& tp);

// Local estimator of the Wilson loop prod_{i in loop} s^x_i (dual-lattice
// loops): psi(sigma with loop bonds flipped) / psi(sigma).
double wilson_loop_value(const Lattice& lat, const RbmParams& params, const SpinConfig& config, const LoopPath& loop);
double wilson_loop_value(const WavefunctionState& state, const LoopPath& loop);

// ---- exact enumeration (n_spins <= kEnumerationBudget) ------------------
//
// Configurations are indexed by bitmask: bit i set means sigma_i = -1, so
// index 0 is the all-up configuration.

inline constexpr int kEnumerationBudget = 20;

struct AmplitudeTable {
    int n_spins = 0;
    std::vector<double> amp;  // 2^n unnormalized amplitudes

    double norm2() const;  // pairwise-summed sum of squares
};

AmplitudeTable build_amplitude_table(const Lattice& lat, const RbmParams& params);

SpinConfig config_from_index(std::uint32_t index, int n_spins);
std::uint32_t bond_mask(const std::vector<int>& bonds);

// Numerically stable pairwise sum (fixed reduction tree).
double pairwise_sum(const double* x, std::size_t n);
double pairwise_sum(const std::vector<double>& x);

// <H> by full enumeration; the oracle for the Monte Carlo estimators.
double exact_energy(const Lattice& lat, const RbmParams& params, const ToricParams& tp);
// <prod_{i in loop} s^x_i> by full enumeration.
double exact_wilson(const Lattice& lat, const RbmParams& params, const LoopPath& loop);
// <sum_i s^z_i> by full enumeration.
double exact_sz_total(const Lattice& lat, const RbmParams& params);

// Same observables evaluated from a prebuilt amplitude table.
double exact_energy(const Lattice& lat, const AmplitudeTable& t, const RbmParams& params, const ToricParams& tp);
double exact_wilson(const AmplitudeTable& t, const LoopPath& loop);
double exact_sz_total(const AmplitudeTable& t);

// Spatial averages (W1_bar, W2_bar) of the straight Wilson loops winding
// along x and y, by full enumeration.
std::pair<double, double> averaged_wilson_exact(const Lattice& lat, const RbmParams& params);
std::pair<double, double> averaged_wilson_exact(const Lattice& lat, const AmplitudeTable& t);

}  // namespace toricdm

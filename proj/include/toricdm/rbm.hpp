#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "toricdm/lattice.hpp"

namespace toricdm {

// Variational parameters of the quasi-local RBM ansatz
//
//   psi(sigma) = prod_X cos(b_X + sum_{j in X} w_Xj sigma_j),
//
// X running over all plaquettes and stars. Storage is a flat array in cell
// order (plaquettes first, then stars), 5 slots per cell: slot 0 the bias,
// slots 1..4 the weights in the bond order of Lattice::cell_bonds. All
// parameters are real (radians); they are never canonicalized here, gauge
// handling is left to the similarity measures.
struct RbmParams {
    int lx = 0, ly = 0;
    std::vector<double> values;

    RbmParams() = default;
    RbmParams(int lx_, int ly_) : lx(lx_), ly(ly_), values(static_cast<std::size_t>(10 * lx_ * ly_), 0.0) {}

    int n_cells() const { return 2 * lx * ly; }
    int n_params() const { return static_cast<int>(values.size()); }

    double bias(int cell) const { return values[5 * cell]; }
    double& bias(int cell) { return values[5 * cell]; }
    // slot in [0,4): weight of the slot-th bond of the cell
    double weight(int cell, int slot) const { return values[5 * cell + 1 + slot]; }
    double& weight(int cell, int slot) { return values[5 * cell + 1 + slot]; }

    bool same_layout(const RbmParams& o) const { return lx == o.lx && ly == o.ly; }
};

// A cosine factor with |cos| below this is treated as an exact zero of the
// wavefunction; the analytic states produce such zeros by construction.
inline constexpr double kCosZeroTol = 1e-14;

// Unnormalized amplitude in log-sign form (products of up to N cosines
// underflow in linear space).
struct Amplitude {
    double log_abs;  // -inf when zero
    double sign;     // +1 or -1; fixed to +1 when zero
    bool is_zero;

    double value() const;
    static Amplitude zero();
};

Amplitude log_amplitude(const Lattice& lat, const RbmParams& params, const SpinConfig& config);

// D_i = d log psi / d Lambda_i at a nonzero-amplitude point:
// -tan(theta_X) for biases, -sigma_j tan(theta_X) for weights.
// Throws std::domain_error at zero-amplitude (non-differentiable) points.
std::vector<double> log_derivatives(const Lattice& lat, const RbmParams& params, const SpinConfig& config);

// Analytic toric-code ground state: w_Pj = pi/4, b_P = 0, w_Sj = pi/2, b_S = 0.
// On lattices with odd lx, ly this is the state with both non-contractible
// Wilson loops equal to -1.
RbmParams toric_ground_state_params(const Lattice& lat);

// Fully polarized (all spins up) product state: b_X = -pi/4 everywhere and a
// single pi/4 weight per cell covering its designated spin (northmost bond of
// each plaquette, southmost bond of each star).
RbmParams polarized_params(const Lattice& lat);

// toric_ground_state_params plus iid uniform(-scale, scale) noise on every
// parameter; deterministic in the seed.
RbmParams random_params(const Lattice& lat, std::uint64_t seed, double scale);

// Parameter maps that change the state by at most a global phase e^{i theta},
// theta in {0, pi}:
//   sign_flip      negate all 5 parameters of one cell        (theta = 0)
//   pi_shift_bias  add pi to one bias                          (theta = pi)
//   pi_shift_weight add pi to one weight                       (theta = pi)
//   half_pi_loop   add pi/2 to the loop-bond weights of every
//                  cell on a closed loop                       (theta = pi * (length mod 2))
struct GaugeTransform {
    enum class Kind { sign_flip, pi_shift_bias, pi_shift_weight, half_pi_loop };
    Kind kind;
    int cell = -1;   // for the cell-local kinds
    int bond = -1;   // for pi_shift_weight
    LoopPath loop;   // for half_pi_loop

    static GaugeTransform sign_flip(int cell);
    static GaugeTransform pi_shift_bias(int cell);
    static GaugeTransform pi_shift_weight(int cell, int bond);
    static GaugeTransform half_pi_loop(LoopPath loop);
};

// Returns the transformed parameters and the induced global phase (0 or pi).
// For half_pi_loop, each cell on the loop receives pi/2 shifts at both of its
// loop bonds (entry and exit), which multiplies its cosine by a pure sign.
std::pair<RbmParams, double> apply_gauge(const Lattice& lat, const RbmParams& params, const GaugeTransform& g);

// Mutable evaluation state for Markov-chain sampling: caches the angle
// theta_X of every cell for the current spin configuration so that the
// amplitude ratio of a few-spin flip only touches the affected cells.
class WavefunctionState {
public:
    WavefunctionState(const Lattice& lat, const RbmParams& params, SpinConfig config);

    const SpinConfig& spins() const { return spins_; }
    const Lattice& lattice() const { return *lat_; }
    const RbmParams& params() const { return *params_; }

    Amplitude amplitude() const;
    double theta(int cell) const { return theta_[cell]; }

    struct Ratio {
        double log_abs;
        double sign;
        bool is_zero;
        double value() const;
    };
    // psi(sigma with `bonds` flipped) / psi(sigma). Duplicate bonds in the
    // list are not allowed.
    Ratio flip_ratio(const int* bonds, int n_bonds) const;
    Ratio flip_ratio(const std::vector<int>& bonds) const { return flip_ratio(bonds.data(), static_cast<int>(bonds.size())); }

    void apply_flips(const int* bonds, int n_bonds);
    void apply_flips(const std::vector<int>& bonds) { apply_flips(bonds.data(), static_cast<int>(bonds.size())); }

    // Recompute all thetas from scratch (tests use this to bound drift).
    void rebuild();

private:
    const Lattice* lat_;
    const RbmParams* params_;
    SpinConfig spins_;
    std::vector<double> theta_;
    // scratch: affected-cell collection buffer
    mutable std::vector<int> touched_;
    mutable std::vector<double> new_theta_;
};

}  // namespace toricdm

#include "toricdm/rbm.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "toricdm/rng.hpp"

namespace toricdm {

namespace {
constexpr double kPi = std::numbers::pi;

void check_config(const Lattice& lat, const SpinConfig& config) {
    if (static_cast<int>(config.size()) != lat.n_spins())
        throw std::invalid_argument("spin configuration length does not match lattice");
}

double cell_theta(const Lattice& lat, const RbmParams& p, const SpinConfig& s, int cell) {
    const auto& bonds = lat.cell_bonds(cell);
    double th = p.bias(cell);
    for (int k = 0; k < 4; ++k) th += p.weight(cell, k) * s[bonds[k]];
    return th;
}
}  // namespace

double Amplitude::value() const { return is_zero ? 0.0 : sign * std::exp(log_abs); }

Amplitude Amplitude::zero() {
    return Amplitude{-std::numeric_limits<double>::infinity(), +1.0, true};
}

Amplitude log_amplitude(const Lattice& lat, const RbmParams& params, const SpinConfig& config) {
    check_config(lat, config);
    double log_abs = 0.0;
    double sign = 1.0;
    for (int cell = 0; cell < lat.n_cells(); ++cell) {
        double c = std::cos(cell_theta(lat, params, config, cell));
        if (std::abs(c) < kCosZeroTol) return Amplitude::zero();
        log_abs += std::log(std::abs(c));
        if (c < 0) sign = -sign;
    }
    return Amplitude{log_abs, sign, false};
}

std::vector<double> log_derivatives(const Lattice& lat, const RbmParams& params, const SpinConfig& config) {
    check_config(lat, config);
    std::vector<double> d(params.values.size());
    for (int cell = 0; cell < lat.n_cells(); ++cell) {
        double th = cell_theta(lat, params, config, cell);
        if (std::abs(std::cos(th)) < kCosZeroTol)
            throw std::domain_error("log_derivatives: zero amplitude (tan pole), non-differentiable point");
        double t = std::tan(th);
        d[5 * cell] = -t;
        const auto& bonds = lat.cell_bonds(cell);
        for (int k = 0; k < 4; ++k) d[5 * cell + 1 + k] = -config[bonds[k]] * t;
    }
    return d;
}

RbmParams toric_ground_state_params(const Lattice& lat) {
    RbmParams p(lat.lx(), lat.ly());
    for (int i = 0; i < lat.n_plaquettes(); ++i)
        for (int k = 0; k < 4; ++k) p.weight(lat.plaquette_cell(i), k) = kPi / 4;
    for (int i = 0; i < lat.n_stars(); ++i)
        for (int k = 0; k < 4; ++k) p.weight(lat.star_cell(i), k) = kPi / 2;
    return p;
}

RbmParams polarized_params(const Lattice& lat) {
    RbmParams p(lat.lx(), lat.ly());
    for (int cell = 0; cell < lat.n_cells(); ++cell) p.bias(cell) = -kPi / 4;
    // Designated spins: slot 1 is h(x,y+1), the northmost bond of P(x,y);
    // slot 3 is v(x,y-1), the southmost bond of S(x,y). Together they cover
    // every bond exactly once.
    for (int i = 0; i < lat.n_plaquettes(); ++i) p.weight(lat.plaquette_cell(i), 1) = kPi / 4;
    for (int i = 0; i < lat.n_stars(); ++i) p.weight(lat.star_cell(i), 3) = kPi / 4;
    return p;
}

RbmParams random_params(const Lattice& lat, std::uint64_t seed, double scale) {
    if (scale < 0) throw std::invalid_argument("random_params: scale must be >= 0");
    RbmParams p = toric_ground_state_params(lat);
    Rng rng(derive_seed(seed, {0x7061726d73ULL}));  // "params"
    for (double& v : p.values) v += rng.uniform(-scale, scale);
    return p;
}

GaugeTransform GaugeTransform::sign_flip(int cell) {
    GaugeTransform g;
    g.kind = Kind::sign_flip;
    g.cell = cell;
    return g;
}
GaugeTransform GaugeTransform::pi_shift_bias(int cell) {
    GaugeTransform g;
    g.kind = Kind::pi_shift_bias;
    g.cell = cell;
    return g;
}
GaugeTransform GaugeTransform::pi_shift_weight(int cell, int bond) {
    GaugeTransform g;
    g.kind = Kind::pi_shift_weight;
    g.cell = cell;
    g.bond = bond;
    return g;
}
GaugeTransform GaugeTransform::half_pi_loop(LoopPath loop) {
    GaugeTransform g;
    g.kind = Kind::half_pi_loop;
    g.loop = std::move(loop);
    return g;
}

std::pair<RbmParams, double> apply_gauge(const Lattice& lat, const RbmParams& params, const GaugeTransform& g) {
    RbmParams out = params;
    switch (g.kind) {
        case GaugeTransform::Kind::sign_flip: {
            if (g.cell < 0 || g.cell >= lat.n_cells()) throw std::invalid_argument("apply_gauge: invalid cell");
            for (int s = 0; s < 5; ++s) out.values[5 * g.cell + s] = -out.values[5 * g.cell + s];
            return {out, 0.0};
        }
        case GaugeTransform::Kind::pi_shift_bias: {
            if (g.cell < 0 || g.cell >= lat.n_cells()) throw std::invalid_argument("apply_gauge: invalid cell");
            out.bias(g.cell) += kPi;
            return {out, kPi};
        }
        case GaugeTransform::Kind::pi_shift_weight: {
            if (g.cell < 0 || g.cell >= lat.n_cells()) throw std::invalid_argument("apply_gauge: invalid cell");
            int slot = lat.slot_of(g.cell, g.bond);
            if (slot < 0) throw std::invalid_argument("apply_gauge: bond not part of cell");
            out.weight(g.cell, slot) += kPi;
            return {out, kPi};
        }
        case GaugeTransform::Kind::half_pi_loop: {
            const LoopPath& lp = g.loop;
            int n = lp.length();
            if (n == 0 || static_cast<int>(lp.cells.size()) != n)
                throw std::invalid_argument("apply_gauge: malformed loop");
            // Each visited cell shifts the weights of its entry bond and its
            // exit bond by pi/2; the two shifts add to 0 or +-pi inside the
            // cosine, so the factor changes only by a sign.
            for (int k = 0; k < n; ++k) {
                int cell = lp.cells[k];
                int b_in = lp.bonds[k];
                int b_out = lp.bonds[(k + 1) % n];
                int s_in = lat.slot_of(cell, b_in);
                int s_out = lat.slot_of(cell, b_out);
                if (s_in < 0 || s_out < 0)
                    throw std::invalid_argument("apply_gauge: loop incidence does not match lattice");
                out.weight(cell, s_in) += kPi / 2;
                out.weight(cell, s_out) += kPi / 2;
            }
            return {out, kPi * lp.phase_parity()};
        }
    }
    throw std::logic_error("apply_gauge: unreachable");
}

WavefunctionState::WavefunctionState(const Lattice& lat, const RbmParams& params, SpinConfig config)
    : lat_(&lat), params_(&params), spins_(std::move(config)) {
    check_config(lat, spins_);
    if (params.lx != lat.lx() || params.ly != lat.ly())
        throw std::invalid_argument("WavefunctionState: parameter layout does not match lattice");
    theta_.resize(lat.n_cells());
    rebuild();
    touched_.reserve(16);
    new_theta_.reserve(16);
}

void WavefunctionState::rebuild() {
    for (int cell = 0; cell < lat_->n_cells(); ++cell)
        theta_[cell] = cell_theta(*lat_, *params_, spins_, cell);
}

Amplitude WavefunctionState::amplitude() const {
    double log_abs = 0.0, sign = 1.0;
    for (double th : theta_) {
        double c = std::cos(th);
        if (std::abs(c) < kCosZeroTol) return Amplitude::zero();
        log_abs += std::log(std::abs(c));
        if (c < 0) sign = -sign;
    }
    return Amplitude{log_abs, sign, false};
}

double WavefunctionState::Ratio::value() const { return is_zero ? 0.0 : sign * std::exp(log_abs); }

WavefunctionState::Ratio WavefunctionState::flip_ratio(const int* bonds, int n_bonds) const {
    touched_.clear();
    new_theta_.clear();
    // Collect the cells containing any flipped bond; each flip of bond j
    // moves theta_X by -2 w_Xj sigma_j for every cell X containing j.
    for (int i = 0; i < n_bonds; ++i) {
        int b = bonds[i];
        double s = spins_[b];
        for (const auto& cs : lat_->bond_cells(b)) {
            double delta = -2.0 * params_->weight(cs.cell, cs.slot) * s;
            bool found = false;
            for (std::size_t t = 0; t < touched_.size(); ++t) {
                if (touched_[t] == cs.cell) {
                    new_theta_[t] += delta;
                    found = true;
                    break;
                }
            }
            if (!found) {
                touched_.push_back(cs.cell);
                new_theta_.push_back(theta_[cs.cell] + delta);
            }
        }
    }
    double log_abs = 0.0, sign = 1.0;
    for (std::size_t t = 0; t < touched_.size(); ++t) {
        double c_new = std::cos(new_theta_[t]);
        if (std::abs(c_new) < kCosZeroTol) return Ratio{-std::numeric_limits<double>::infinity(), +1.0, true};
        double c_old = std::cos(theta_[touched_[t]]);
        log_abs += std::log(std::abs(c_new)) - std::log(std::abs(c_old));
        if (c_new * c_old < 0) sign = -sign;
    }
    return Ratio{log_abs, sign, false};
}

void WavefunctionState::apply_flips(const int* bonds, int n_bonds) {
    for (int i = 0; i < n_bonds; ++i) {
        int b = bonds[i];
        double s = spins_[b];
        for (const auto& cs : lat_->bond_cells(b))
            theta_[cs.cell] += -2.0 * params_->weight(cs.cell, cs.slot) * s;
        spins_[b] = static_cast<std::int8_t>(-spins_[b]);
    }
}

}  // namespace toricdm

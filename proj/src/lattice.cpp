#include "toricdm/lattice.hpp"

#include <stdexcept>

namespace toricdm {

Lattice::Lattice(int lx, int ly) : lx_(lx), ly_(ly) {
    if (lx < 2 || ly < 2)
        throw std::invalid_argument("Lattice: lx and ly must be >= 2 (smaller lattices have degenerate plaquettes)");

    cell_bonds_.resize(n_cells());
    for (int y = 0; y < ly_; ++y) {
        for (int x = 0; x < lx_; ++x) {
            cell_bonds_[plaquette_cell(plaquette_id(x, y))] = {
                h_bond(x, y), h_bond(x, y + 1), v_bond(x, y), v_bond(x + 1, y)};
            cell_bonds_[star_cell(star_id(x, y))] = {
                h_bond(x, y), h_bond(x - 1, y), v_bond(x, y), v_bond(x, y - 1)};
        }
    }

    bond_cells_.resize(n_spins());
    std::vector<int> fill(n_spins(), 0);
    for (int cell = 0; cell < n_cells(); ++cell) {
        for (int slot = 0; slot < 4; ++slot) {
            int b = cell_bonds_[cell][slot];
            bond_cells_[b][fill[b]++] = {cell, slot};
        }
    }
    for (int b = 0; b < n_spins(); ++b)
        if (fill[b] != 4) throw std::logic_error("Lattice: bond/cell incidence bookkeeping broken");
}

int Lattice::slot_of(int cell, int bond) const {
    const auto& bs = cell_bonds_[cell];
    for (int s = 0; s < 4; ++s)
        if (bs[s] == bond) return s;
    return -1;
}

Lattice build_lattice(int lx, int ly) { return Lattice(lx, ly); }

std::vector<LoopPath> straight_dual_loops(const Lattice& lat, Axis direction) {
    std::vector<LoopPath> loops;
    if (direction == Axis::x) {
        // One loop per row, through the plaquettes P(0,y)..P(lx-1,y).
        for (int y = 0; y < lat.ly(); ++y) {
            LoopPath lp;
            lp.cell_kind = CellKind::plaquette;
            lp.contractible = false;
            for (int x = 0; x < lat.lx(); ++x) {
                lp.cells.push_back(lat.plaquette_cell(lat.plaquette_id(x, y)));
                lp.bonds.push_back(lat.v_bond(x, y));  // shared with P(x-1,y)
            }
            loops.push_back(std::move(lp));
        }
    } else {
        for (int x = 0; x < lat.lx(); ++x) {
            LoopPath lp;
            lp.cell_kind = CellKind::plaquette;
            lp.contractible = false;
            for (int y = 0; y < lat.ly(); ++y) {
                lp.cells.push_back(lat.plaquette_cell(lat.plaquette_id(x, y)));
                lp.bonds.push_back(lat.h_bond(x, y));  // shared with P(x,y-1)
            }
            loops.push_back(std::move(lp));
        }
    }
    return loops;
}

std::vector<LoopPath> straight_direct_loops(const Lattice& lat, Axis direction) {
    std::vector<LoopPath> loops;
    if (direction == Axis::x) {
        // One loop per row, through the stars S(0,y)..S(lx-1,y).
        for (int y = 0; y < lat.ly(); ++y) {
            LoopPath lp;
            lp.cell_kind = CellKind::star;
            lp.contractible = false;
            for (int x = 0; x < lat.lx(); ++x) {
                lp.cells.push_back(lat.star_cell(lat.star_id(x, y)));
                lp.bonds.push_back(lat.h_bond(x - 1, y));  // joins S(x-1,y) and S(x,y)
            }
            loops.push_back(std::move(lp));
        }
    } else {
        for (int x = 0; x < lat.lx(); ++x) {
            LoopPath lp;
            lp.cell_kind = CellKind::star;
            lp.contractible = false;
            for (int y = 0; y < lat.ly(); ++y) {
                lp.cells.push_back(lat.star_cell(lat.star_id(x, y)));
                lp.bonds.push_back(lat.v_bond(x, y - 1));  // joins S(x,y-1) and S(x,y)
            }
            loops.push_back(std::move(lp));
        }
    }
    return loops;
}

LoopPath elementary_loop(const Lattice& lat, CellRef cell) {
    if (cell.index < 0 || cell.index >= lat.n_plaquettes())
        throw std::invalid_argument("elementary_loop: invalid cell id");

    int x = cell.index % lat.lx();
    int y = cell.index / lat.lx();
    LoopPath lp;
    if (cell.kind == CellKind::star) {
        // Dual loop around star S(x,y), through its 4 adjacent plaquettes,
        // crossing the 4 bonds of the star.
        lp.cell_kind = CellKind::plaquette;
        lp.cells = {lat.plaquette_cell(lat.plaquette_id(x - 1, y - 1)),
                    lat.plaquette_cell(lat.plaquette_id(x, y - 1)),
                    lat.plaquette_cell(lat.plaquette_id(x, y)),
                    lat.plaquette_cell(lat.plaquette_id(x - 1, y))};
        lp.bonds = {lat.h_bond(x - 1, y), lat.v_bond(x, y - 1), lat.h_bond(x, y), lat.v_bond(x, y)};
    } else {
        // Direct loop around plaquette P(x,y), through its 4 corner stars,
        // traversing the 4 bonds of the plaquette.
        lp.cell_kind = CellKind::star;
        lp.cells = {lat.star_cell(lat.star_id(x, y)),
                    lat.star_cell(lat.star_id(x + 1, y)),
                    lat.star_cell(lat.star_id(x + 1, y + 1)),
                    lat.star_cell(lat.star_id(x, y + 1))};
        lp.bonds = {lat.v_bond(x, y), lat.h_bond(x, y), lat.v_bond(x + 1, y), lat.h_bond(x, y + 1)};
    }
    lp.contractible = true;
    return lp;
}

}  // namespace toricdm

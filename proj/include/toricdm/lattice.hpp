#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace toricdm {

using SpinConfig = std::vector<std::int8_t>;  // entries are +1 / -1

enum class CellKind { plaquette, star };

struct CellRef {
    CellKind kind;
    int index;  // plaquette or star index, y*lx + x
};

// Periodic Lx x Ly square lattice with spins on the bonds.
//
// Bond index = 2*(y*lx + x) + orientation, orientation 0 for the horizontal
// bond leaving vertex (x,y) in +x, 1 for the vertical bond leaving in +y.
// Plaquette P(x,y) = {h(x,y), h(x,y+1), v(x,y), v(x+1,y)} (slots 0..3),
// star      S(x,y) = {h(x,y), h(x-1,y), v(x,y), v(x,y-1)} (slots 0..3),
// all coordinates periodic.
//
// Cells are addressed by a single id: plaquettes occupy [0, lx*ly),
// stars [lx*ly, 2*lx*ly). This is also the parameter-block order.
class Lattice {
public:
    Lattice(int lx, int ly);

    int lx() const { return lx_; }
    int ly() const { return ly_; }
    int n_spins() const { return 2 * lx_ * ly_; }
    int n_plaquettes() const { return lx_ * ly_; }
    int n_stars() const { return lx_ * ly_; }
    int n_cells() const { return 2 * lx_ * ly_; }

    int h_bond(int x, int y) const { return 2 * (wrap_y(y) * lx_ + wrap_x(x)); }
    int v_bond(int x, int y) const { return 2 * (wrap_y(y) * lx_ + wrap_x(x)) + 1; }

    int plaquette_id(int x, int y) const { return wrap_y(y) * lx_ + wrap_x(x); }
    int star_id(int x, int y) const { return wrap_y(y) * lx_ + wrap_x(x); }

    int plaquette_cell(int p) const { return p; }
    int star_cell(int s) const { return lx_ * ly_ + s; }
    int cell_of(CellRef c) const {
        return c.kind == CellKind::plaquette ? plaquette_cell(c.index) : star_cell(c.index);
    }
    bool cell_is_star(int cell) const { return cell >= lx_ * ly_; }

    const std::array<int, 4>& cell_bonds(int cell) const { return cell_bonds_[cell]; }
    const std::array<int, 4>& plaquette_bonds(int p) const { return cell_bonds_[p]; }
    const std::array<int, 4>& star_bonds(int s) const { return cell_bonds_[lx_ * ly_ + s]; }

    // The 4 cells containing a bond (2 plaquettes + 2 stars), paired with the
    // slot the bond occupies inside each cell.
    struct CellSlot {
        int cell;
        int slot;  // 0..3
    };
    const std::array<CellSlot, 4>& bond_cells(int bond) const { return bond_cells_[bond]; }

    // Slot of `bond` within `cell`, or -1 if the bond is not part of the cell.
    int slot_of(int cell, int bond) const;

private:
    int wrap_x(int x) const { return ((x % lx_) + lx_) % lx_; }
    int wrap_y(int y) const { return ((y % ly_) + ly_) % ly_; }

    int lx_, ly_;
    std::vector<std::array<int, 4>> cell_bonds_;
    std::vector<std::array<CellSlot, 4>> bond_cells_;
};

Lattice build_lattice(int lx, int ly);

enum class Axis { x, y };

// A closed loop, either on the direct lattice (cells are stars) or on the
// dual lattice (cells are plaquettes). bonds[k] is the bond shared between
// cells[k-1] and cells[k] (cyclically), so the pairs (cells[k], bonds[k])
// are the entry incidences of a closed path. Every bond of the loop is
// incident to exactly two of its cells: cells[k-1] and cells[k].
struct LoopPath {
    CellKind cell_kind;             // plaquette for dual loops, star for direct loops
    std::vector<int> cells;         // global cell ids, in traversal order
    std::vector<int> bonds;         // traversed (direct) or crossed (dual) bonds
    bool contractible = true;

    int length() const { return static_cast<int>(bonds.size()); }
    // Global phase parity of the pi/2-shift gauge transform along this loop:
    // 0 for even length, 1 for odd.
    int phase_parity() const { return length() % 2; }
};

// Straight non-contractible dual loops. Direction x: one loop per row y,
// crossing the vertical bonds {v(x,y), x in [0,lx)}. Direction y: one loop
// per column x, crossing {h(x,y), y in [0,ly)}.
std::vector<LoopPath> straight_dual_loops(const Lattice& lat, Axis direction);

// Straight non-contractible direct loops. Direction x: one loop per row y,
// traversing {h(x,y), x in [0,lx)}. Direction y: one loop per column x,
// traversing {v(x,y), y in [0,ly)}.
std::vector<LoopPath> straight_direct_loops(const Lattice& lat, Axis direction);

// Contractible elementary loop: the dual loop encircling a star (4 plaquette
// incidences) or the direct loop encircling a plaquette (4 star incidences).
LoopPath elementary_loop(const Lattice& lat, CellRef cell);

}  // namespace toricdm

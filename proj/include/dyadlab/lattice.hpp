#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dyadlab {

// A cube of a dyadic lattice: side 2^level, position index per axis.
// Indices are reduced modulo 2^{-level} (periodic root cube).
struct CubeId {
    int level = 0;                          // k_min <= level <= 0
    std::array<std::int64_t, 2> index{0, 0};  // unused axes stay 0

    friend bool operator==(const CubeId& a, const CubeId& b) {
        return a.level == b.level && a.index == b.index;
    }
    friend bool operator<(const CubeId& a, const CubeId& b) {
        if (a.level != b.level) return a.level < b.level;
        return a.index < b.index;
    }
};

// Good/bad classification parameters. gamma defaults to the value
// determined by the kernel smoothness alpha in dimension d.
struct GoodnessParams {
    int r0 = 2;
    double gamma = 0.25;
};

double goodness_gamma(int dim, double alpha);

// A finite dyadic lattice on the periodic unit cube [0,1)^d.
// Levels run k_min..0; each level j < 0 carries a shift bit vector
// omega_j in {0,1}^d, and the cells at level k are the standard cells
// translated by sum_{j<k} omega_j 2^j (mod 1 per coordinate).
class Lattice {
  public:
    Lattice(int dim, int k_min);  // zero shifts (standard lattice)

    static Lattice standard(int dim, int k_min);
    static Lattice sampled(int dim, int k_min, std::uint64_t seed);

    int dim() const { return dim_; }
    int k_min() const { return k_min_; }
    int levels() const { return -k_min_ + 1; }

    // shift bit of level j (k_min <= j < 0) along an axis
    int shift_bit(int j, int axis) const { return shifts_[static_cast<size_t>(j - k_min_)][static_cast<size_t>(axis)]; }
    void set_shift_bit(int j, int axis, int bit);

    // positions in "fine units": integers modulo cells_per_axis()
    std::int64_t cells_per_axis() const { return std::int64_t(1) << (-k_min_); }
    std::int64_t side_units(int level) const { return std::int64_t(1) << (level - k_min_); }
    // accumulated shift of level k along an axis, in fine units
    std::int64_t shift_units(int level, int axis) const;

    std::int64_t cubes_per_axis(int level) const { return std::int64_t(1) << (-level); }
    std::int64_t cube_count(int level) const;
    std::int64_t total_cells() const;

    // flat index of a cube within its level (row-major over axes)
    std::int64_t flat_index(const CubeId& q) const;
    CubeId from_flat(int level, std::int64_t flat) const;

    std::array<std::int64_t, 2> origin_units(const CubeId& q) const;
    // cube at `level` containing the cell whose lower corner is `point` (fine units)
    CubeId cube_at(int level, std::array<std::int64_t, 2> point) const;

    std::vector<CubeId> children(const CubeId& q) const;
    // all descendants exactly `depth` levels below q
    std::vector<CubeId> descendants(const CubeId& q, int depth) const;
    // finest-level cell indices covered by q, in row-major order
    std::vector<std::int64_t> cell_indices(const CubeId& q) const;
    CubeId parent(const CubeId& q) const;
    CubeId ancestor(const CubeId& q, int order) const;
    bool contains(const CubeId& outer, const CubeId& inner) const;

    double side_length(int level) const;
    double volume(const CubeId& q) const;

    // toroidal set distance between cubes (Euclidean over per-axis gaps)
    double distance(const CubeId& a, const CubeId& b) const;
    // D(Q,R) = dist(Q,R) + l(Q) + l(R)
    double long_distance(const CubeId& a, const CubeId& b) const;
    // distance from Q to the boundary of R (boundary faces; periodic)
    double boundary_distance(const CubeId& q, const CubeId& r) const;
    // distance from Q to the union of all level-`level` cell boundaries
    double level_boundary_distance(const CubeId& q, int level) const;

    bool is_bad(const CubeId& q, const GoodnessParams& p) const;
    // the deterministic part of goodness used for conditioning on R:
    // dist(Q, boundary of level-l cells) >= l(Q)^{1-g} l'^g for all levels
    // with 2^{r0} l(Q) < 2^l <= l(R)
    bool good_up_to_level(const CubeId& q, int r_level, const GoodnessParams& p) const;

    std::string serialize() const;
    static Lattice deserialize(const std::string& text);

  private:
    int dim_;
    int k_min_;
    std::vector<std::array<int, 2>> shifts_;  // index j - k_min, j in [k_min, 0)
};

struct PiBadEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    std::int64_t n_samples = 0;
};

// Monte Carlo estimate of P{Q is bad | Q} for a fixed-position cube at
// q_level, sampling the lattice levels above it.
PiBadEstimate estimate_pi_bad(int dim, int r0, double gamma, int q_level,
                              std::int64_t n_samples, std::uint64_t seed);

}  // namespace dyadlab

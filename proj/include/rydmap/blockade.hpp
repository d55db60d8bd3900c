#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rydmap/errors.hpp"
#include "rydmap/lattice.hpp"

namespace rydmap {

using Config = std::uint64_t;

/// Undirected graph over at most 64 atoms; an edge forbids simultaneous excitation.
struct BlockadeGraph {
    int n = 0;
    std::vector<std::pair<int, int>> edges;  // i < j, sorted
    std::vector<Config> neighbours;          // adjacency bitmasks

    explicit BlockadeGraph(int atoms = 0) : n(atoms), neighbours(static_cast<std::size_t>(atoms), 0) {
        if (atoms < 0 || atoms > 64) throw ConfigError("blockade graphs support up to 64 atoms");
    }

    void add_edge(int i, int j) {
        if (i == j) return;
        if (i > j) std::swap(i, j);
        if (i < 0 || j >= n) throw ConfigError("edge endpoint out of range");
        if (neighbours[static_cast<std::size_t>(i)] >> j & 1) return;
        neighbours[static_cast<std::size_t>(i)] |= Config{1} << j;
        neighbours[static_cast<std::size_t>(j)] |= Config{1} << i;
        edges.insert(std::upper_bound(edges.begin(), edges.end(), std::pair{i, j}), {i, j});
    }

    bool has_edge(int i, int j) const { return (neighbours[static_cast<std::size_t>(i)] >> j & 1) != 0; }

    bool independent(Config c) const {
        for (Config rest = c; rest != 0; rest &= rest - 1) {
            const int i = std::countr_zero(rest);
            if (neighbours[static_cast<std::size_t>(i)] & c) return false;
        }
        return true;
    }
};

/// Edge (i,j) iff |U_ij| > factor * Omega/2pi, both in MHz.
inline BlockadeGraph build_blockade_graph(const std::vector<std::vector<double>>& couplings_mhz,
                                          double omega_mhz, double factor = 1.0) {
    const int n = static_cast<int>(couplings_mhz.size());
    BlockadeGraph g(n);
    const double limit = factor * omega_mhz;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (std::abs(couplings_mhz[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) > limit) g.add_edge(i, j);
        }
    }
    return g;
}

/// Edges between all sites closer than `cutoff_um`. With cutoff just above
/// the spacing this is the nearest-neighbour graph; just above spacing * sqrt(2)
/// on a square grid it adds the diagonals.
inline BlockadeGraph distance_graph(const Lattice& lattice, double cutoff_um) {
    BlockadeGraph g(static_cast<int>(lattice.size()));
    for (std::size_t i = 0; i < lattice.size(); ++i) {
        for (std::size_t j = i + 1; j < lattice.size(); ++j) {
            if (lattice.distance(i, j) < cutoff_um) g.add_edge(static_cast<int>(i), static_cast<int>(j));
        }
    }
    return g;
}

/// Exact number of independent sets (including the empty set). Branches on
/// the lowest free vertex and memoises on the remaining free set, which stays
/// small for lattice graphs because only a boundary layer is ever partial.
inline std::uint64_t count_independent_sets(const BlockadeGraph& g) {
    std::unordered_map<Config, std::uint64_t> memo;
    const Config all = g.n == 64 ? ~Config{0} : (Config{1} << g.n) - 1;
    std::function<std::uint64_t(Config)> count = [&](Config free) -> std::uint64_t {
        if (free == 0) return 1;
        if (auto it = memo.find(free); it != memo.end()) return it->second;
        const int v = std::countr_zero(free);
        const Config without = free & ~(Config{1} << v);
        const std::uint64_t c = count(without) + count(without & ~g.neighbours[static_cast<std::size_t>(v)]);
        memo.emplace(free, c);
        return c;
    };
    return count(all);
}

/// Independent sets of the blockade graph in ascending bitmask order.
struct TruncatedBasis {
    BlockadeGraph graph;
    std::vector<Config> configs;

    int atoms() const { return graph.n; }
    std::size_t size() const { return configs.size(); }

    std::ptrdiff_t index_of(Config c) const {
        auto it = std::lower_bound(configs.begin(), configs.end(), c);
        if (it == configs.end() || *it != c) return -1;
        return it - configs.begin();
    }
};

struct ResourceBudget {
    std::uint64_t max_bytes = std::uint64_t{4} << 30;
};

/// Rough working-set estimate of a spin simulation over `count` configurations:
/// configuration list, complex state, phase table and drive pairs.
inline std::uint64_t estimated_bytes(std::uint64_t count, int atoms) {
    const std::uint64_t per_config = 8 + 16 + 16 + static_cast<std::uint64_t>(atoms) * 4;
    return count * per_config;
}

inline TruncatedBasis enumerate_truncated_basis(const BlockadeGraph& g, ResourceBudget budget = {}) {
    const std::uint64_t count = count_independent_sets(g);
    const std::uint64_t bytes = estimated_bytes(count, g.n);
    if (bytes > budget.max_bytes) {
        std::ostringstream os;
        os << "truncated basis has " << count << " configurations (~" << bytes / (1u << 20)
           << " MiB estimated), above the memory budget of " << budget.max_bytes / (1u << 20) << " MiB";
        throw ResourceError(os.str());
    }
    TruncatedBasis basis{g, {}};
    basis.configs.reserve(static_cast<std::size_t>(count));
    // depth-first from the highest atom down, "absent" before "present", so
    // configurations come out in ascending numeric order
    std::function<void(int, Config, Config)> walk = [&](int v, Config chosen, Config forbidden) {
        if (v < 0) {
            basis.configs.push_back(chosen);
            return;
        }
        walk(v - 1, chosen, forbidden);
        const Config bit = Config{1} << v;
        if (!(forbidden & bit)) walk(v - 1, chosen | bit, forbidden | g.neighbours[static_cast<std::size_t>(v)]);
    };
    walk(g.n - 1, 0, 0);
    return basis;
}

/// The full 2^N configuration space (no edges).
inline TruncatedBasis full_basis(int atoms, ResourceBudget budget = {}) {
    if (atoms > 40) throw ResourceError("full basis over more than 40 atoms is not representable");
    return enumerate_truncated_basis(BlockadeGraph(atoms), budget);
}

}  // namespace rydmap

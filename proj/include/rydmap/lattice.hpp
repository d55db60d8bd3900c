#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rydmap/constants.hpp"
#include "rydmap/errors.hpp"

namespace rydmap {

/// Atom positions in the array plane, in micrometres. The second coordinate
/// runs along the quantization axis z, the first along x.
struct Lattice {
    struct Site {
        double x = 0.0;
        double z = 0.0;
    };
    std::vector<Site> sites;

    std::size_t size() const { return sites.size(); }

    double distance(std::size_t i, std::size_t j) const {
        return std::hypot(sites[i].x - sites[j].x, sites[i].z - sites[j].z);
    }

    /// Angle between the axis i -> j and z, in [0, pi].
    double theta(std::size_t i, std::size_t j) const {
        const double r = distance(i, j);
        return std::acos(std::clamp((sites[j].z - sites[i].z) / r, -1.0, 1.0));
    }

    void validate() const {
        if (sites.empty()) throw ConfigError("lattice has no sites");
        if (sites.size() > 64) throw ConfigError("lattices are limited to 64 atoms");
        for (std::size_t i = 0; i < size(); ++i) {
            if (!std::isfinite(sites[i].x) || !std::isfinite(sites[i].z))
                throw ConfigError("lattice position " + std::to_string(i) + " is not finite");
            for (std::size_t j = 0; j < i; ++j) {
                if (!(distance(i, j) > 1e-9))
                    throw ConfigError("lattice sites " + std::to_string(j) + " and " + std::to_string(i) + " coincide");
            }
        }
    }

    /// n atoms on a circle with nearest-neighbour spacing `spacing_um`; site 0
    /// sits on the +z axis and the angle advances towards +x.
    static Lattice ring(int n, double spacing_um) {
        if (n < 2) throw ConfigError("a ring needs at least 2 atoms");
        if (!(spacing_um > 0)) throw ConfigError("ring spacing must be positive");
        const double radius = spacing_um / (2.0 * std::sin(constants::pi / n));
        Lattice l;
        for (int k = 0; k < n; ++k) {
            const double phi = 2.0 * constants::pi * k / n;
            l.sites.push_back({radius * std::sin(phi), radius * std::cos(phi)});
        }
        l.validate();
        return l;
    }

    /// rows x cols square grid; rows run along z, columns along x.
    static Lattice square(int rows, int cols, double spacing_um) {
        if (rows < 1 || cols < 1) throw ConfigError("grid dimensions must be positive");
        if (!(spacing_um > 0)) throw ConfigError("grid spacing must be positive");
        Lattice l;
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) l.sites.push_back({c * spacing_um, r * spacing_um});
        }
        l.validate();
        return l;
    }

    static Lattice explicit_sites(std::vector<Site> sites) {
        Lattice l{std::move(sites)};
        l.validate();
        return l;
    }
};

}  // namespace rydmap

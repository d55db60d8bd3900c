#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rydmap/angular.hpp"
#include "rydmap/atomic_structure.hpp"
#include "rydmap/constants.hpp"
#include "rydmap/errors.hpp"
#include "rydmap/linalg.hpp"
#include "rydmap/parallel.hpp"

namespace rydmap {

struct PairState {
    AtomicState a;
    AtomicState b;

    int total_mj2() const { return a.mj2 + b.mj2; }
    auto operator<=>(const PairState&) const = default;
};

/// Interatomic distance and polar angle of the interatomic axis w.r.t. z.
struct Geometry {
    double r_um = 1.0;
    double theta_rad = 0.0;

    void validate() const {
        if (!(r_um > 0) || !std::isfinite(r_um)) throw ConfigError("R must be positive");
        if (!(theta_rad >= 0 && theta_rad <= constants::pi)) throw ConfigError("theta must lie in [0, pi]");
    }
};

struct BasisCutoffs {
    double energy_window_mhz = 2000.0;
    int n_window = 2;
    int l_max = 4;
    int max_multipole = 2;
    int m_window = -1;  // |M - M_target| bound on total m_j; negative means unbounded
};

/// Two-atom product basis around a target pair state. States are stored as
/// index pairs into the list of distinct single-atom states; the list is
/// closed under atom exchange.
struct PairBasis {
    std::vector<AtomicState> singles;
    std::vector<std::array<int, 2>> states;
    std::vector<double> unperturbed_mhz;  // pair energy minus target pair energy, zero field
    PairState target;
    std::size_t target_index = 0;
    BasisCutoffs cutoffs;
    double target_energy_mhz = 0.0;

    std::size_t size() const { return states.size(); }

    PairState state(std::size_t i) const {
        return {singles[static_cast<std::size_t>(states[i][0])], singles[static_cast<std::size_t>(states[i][1])]};
    }

    std::optional<std::size_t> find(int ia, int ib) const {
        const std::array<int, 2> key{ia, ib};
        auto it = std::lower_bound(states.begin(), states.end(), key);
        if (it == states.end() || *it != key) return std::nullopt;
        return static_cast<std::size_t>(it - states.begin());
    }

    std::optional<int> single_index(const AtomicState& s) const {
        auto it = std::lower_bound(singles.begin(), singles.end(), s);
        if (it == singles.end() || *it != s) return std::nullopt;
        return static_cast<int>(it - singles.begin());
    }
};

/// Every single-atom state with |n - n_target| <= n_window and l <= l_max.
inline std::vector<AtomicState> single_atom_candidates(const AtomicState& center, const BasisCutoffs& cut,
                                                       const DefectTable& defects) {
    std::vector<AtomicState> out;
    for (int n = std::max(1, center.n - cut.n_window); n <= center.n + cut.n_window; ++n) {
        for (int l = 0; l <= cut.l_max && l < n; ++l) {
            for (int j2 = std::max(1, 2 * l - 1); j2 <= 2 * l + 1; j2 += 2) {
                if (!defects.has_channel(l, j2)) continue;
                if (n < defects.channel(l, j2).valid_n_min) continue;
                for (int m2 = -j2; m2 <= j2; m2 += 2) out.push_back({n, l, j2, m2});
            }
        }
    }
    return out;
}

inline PairBasis build_pair_basis(const PairState& target, const BasisCutoffs& cut, const AtomicStructure& atom) {
    target.a.validate();
    target.b.validate();
    if (!(cut.energy_window_mhz > 0) || cut.n_window < 0 || cut.l_max < 0)
        throw ConfigError("basis windows must be positive");
    if (cut.max_multipole < 1) throw ConfigError("max_multipole must be >= 1");

    std::vector<AtomicState> cand = single_atom_candidates(target.a, cut, atom.defects());
    if (target.b.n != target.a.n) {
        auto more = single_atom_candidates(target.b, cut, atom.defects());
        cand.insert(cand.end(), more.begin(), more.end());
    }
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

    std::vector<double> energies(cand.size());
    for (std::size_t i = 0; i < cand.size(); ++i) energies[i] = atom.energy_mhz(cand[i]);
    const double e_target = atom.energy_mhz(target.a) + atom.energy_mhz(target.b);
    const double tol = 1e-9 * std::abs(e_target);

    std::vector<char> used(cand.size(), 0);
    std::vector<std::array<int, 2>> raw;
    for (std::size_t i = 0; i < cand.size(); ++i) {
        for (std::size_t k = 0; k < cand.size(); ++k) {
            if (cut.m_window >= 0 && std::abs(cand[i].mj2 + cand[k].mj2 - target.total_mj2()) > 2 * cut.m_window) continue;
            if (std::abs(energies[i] + energies[k] - e_target) <= cut.energy_window_mhz + tol) {
                raw.push_back({static_cast<int>(i), static_cast<int>(k)});
                used[i] = used[k] = 1;
            }
        }
    }

    PairBasis basis;
    basis.cutoffs = cut;
    basis.target = target;
    basis.target_energy_mhz = e_target;
    std::vector<int> remap(cand.size(), -1);
    for (std::size_t i = 0; i < cand.size(); ++i) {
        if (!used[i]) continue;
        remap[i] = static_cast<int>(basis.singles.size());
        basis.singles.push_back(cand[i]);
    }
    for (auto& p : raw) basis.states.push_back({remap[static_cast<std::size_t>(p[0])], remap[static_cast<std::size_t>(p[1])]});
    std::sort(basis.states.begin(), basis.states.end());
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const auto ps = basis.state(i);
        basis.unperturbed_mhz.push_back(atom.energy_mhz(ps.a) + atom.energy_mhz(ps.b) - e_target);
    }

    const auto ia = basis.single_index(target.a);
    const auto ib = basis.single_index(target.b);
    const auto ti = (ia && ib) ? basis.find(*ia, *ib) : std::nullopt;
    if (basis.states.empty() || !ti)
        throw ConfigError("pair basis is empty or excludes the target state; widen the n/l windows");
    basis.target_index = *ti;
    return basis;
}

// ---------------------------------------------------------------------------
// Symmetry sectors

enum class SectorMode { automatic, full, symmetric };

/// One basis vector of the working sector: c0 |states[i0]> + c1 |states[i1]>.
struct SectorVector {
    std::size_t i0 = 0;
    std::ptrdiff_t i1 = -1;
    double c0 = 1.0;
    double c1 = 0.0;
};

/// Builds the working sector. The symmetric sector is the +1 eigenspace of
/// atom exchange combined with parity on both atoms, which commutes with the
/// multipole interaction and the Zeeman term but not with the Stark term.
inline std::vector<SectorVector> make_sector(const PairBasis& basis, bool symmetric) {
    std::vector<SectorVector> out;
    out.reserve(basis.size());
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const auto [a, b] = basis.states[i];
        if (!symmetric || a == b) {
            out.push_back({i, -1, 1.0, 0.0});
            continue;
        }
        if (a > b) continue;
        const auto partner = basis.find(b, a);
        if (!partner) throw NumericalError("pair basis is not closed under exchange");
        const int la = basis.singles[static_cast<std::size_t>(a)].l;
        const int lb = basis.singles[static_cast<std::size_t>(b)].l;
        const double s = ((la + lb) % 2 == 0) ? 1.0 : -1.0;
        const double h = 1.0 / std::sqrt(2.0);
        out.push_back({i, static_cast<std::ptrdiff_t>(*partner), h, s * h});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Multipole interaction

namespace detail {

/// Prefactor (-1)^k2 sqrt((2k)! / ((2k1)! (2k2)!)) times <k1 q1 k2 q2 | k q1+q2> C^k_{q1+q2}(theta).
class MultipoleAngularTable {
public:
    MultipoleAngularTable(int max_multipole, double theta) : max_(max_multipole) {
        table_.assign(static_cast<std::size_t>((max_ + 1) * (max_ + 1) * (2 * max_ + 1) * (2 * max_ + 1)), 0.0);
        for (int k1 = 1; k1 <= max_; ++k1) {
            for (int k2 = 1; k2 <= max_; ++k2) {
                const int k = k1 + k2;
                const double pre = ((k2 % 2) ? -1.0 : 1.0) *
                                   std::sqrt(std::tgamma(2.0 * k + 1) / (std::tgamma(2.0 * k1 + 1) * std::tgamma(2.0 * k2 + 1)));
                for (int q1 = -k1; q1 <= k1; ++q1) {
                    for (int q2 = -k2; q2 <= k2; ++q2) {
                        const double cg = angular::clebsch_gordan(2 * k1, 2 * q1, 2 * k2, 2 * q2, 2 * k, 2 * (q1 + q2));
                        at(k1, k2, q1, q2) = pre * cg * angular::spherical_c(k, q1 + q2, theta);
                    }
                }
            }
        }
    }

    double operator()(int k1, int k2, int q1, int q2) const {
        if (std::abs(q1) > k1 || std::abs(q2) > k2) return 0.0;
        return table_[index(k1, k2, q1, q2)];
    }

private:
    std::size_t index(int k1, int k2, int q1, int q2) const {
        const int w = 2 * max_ + 1;
        return static_cast<std::size_t>(((k1 * (max_ + 1) + k2) * w + (q1 + max_)) * w + (q2 + max_));
    }
    double& at(int k1, int k2, int q1, int q2) { return table_[index(k1, k2, q1, q2)]; }

    int max_;
    std::vector<double> table_;
};

/// <a| r^k C^k_q |c> for all single-atom states of a basis, one dense matrix per k.
inline std::vector<Eigen::MatrixXd> single_multipole_tables(const std::vector<AtomicState>& singles, int max_multipole,
                                                            const AtomicStructure& atom) {
    const auto n = static_cast<Eigen::Index>(singles.size());
    std::vector<Eigen::MatrixXd> tables(static_cast<std::size_t>(max_multipole + 1));
    for (int k = 1; k <= max_multipole; ++k) {
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index c = 0; c < n; ++c) {
                const auto& a = singles[static_cast<std::size_t>(i)];
                const auto& b = singles[static_cast<std::size_t>(c)];
                const int q2 = a.mj2 - b.mj2;
                if (std::abs(q2) > 2 * k) continue;
                t(i, c) = atom.multipole_element(a, k, q2 / 2, b);
            }
        }
        tables[static_cast<std::size_t>(k)] = std::move(t);
    }
    return tables;
}

}  // namespace detail

/// Dense Hamiltonian of a pair in one symmetry sector, split as
/// H(R) = H_fields + sum_p V_p / R^p with R in micrometres and energies in MHz.
class PairHamiltonian {
public:
    PairHamiltonian(const PairBasis& basis, const AtomicStructure& atom, const FieldConfig& fields, double theta_rad,
                    int max_multipole, SectorMode mode = SectorMode::automatic)
        : fields_(fields), theta_(theta_rad), max_multipole_(max_multipole) {
        if (max_multipole < 1) throw ConfigError("max_multipole must be >= 1");
        symmetric_ = mode == SectorMode::symmetric || (mode == SectorMode::automatic && fields.e_mv_cm == 0.0);
        if (symmetric_ && fields.e_mv_cm != 0.0)
            throw ConfigError("the exchange-symmetric sector is not invariant with an electric field");
        if (basis.target.a != basis.target.b) symmetric_ = false;
        sector_ = make_sector(basis, symmetric_);

        const auto dim = static_cast<Eigen::Index>(sector_.size());
        for (std::size_t s = 0; s < sector_.size(); ++s) {
            if (sector_[s].i0 == basis.target_index && sector_[s].i1 < 0) target_ = static_cast<Eigen::Index>(s);
        }
        if (target_ < 0) throw ConfigError("target pair state missing from the working sector");

        const auto tables = detail::single_multipole_tables(basis.singles, max_multipole, atom);
        const detail::MultipoleAngularTable ang(max_multipole, theta_rad);

        const int n_powers = 2 * max_multipole - 1;  // p = 3 .. 2 max + 1
        multipole_.assign(static_cast<std::size_t>(n_powers), Eigen::MatrixXd::Zero(dim, dim));

        std::vector<double> mp(static_cast<std::size_t>(n_powers));
        std::vector<double> acc(static_cast<std::size_t>(n_powers));
        auto multipole_elem = [&](std::size_t x, std::size_t y) {
            std::fill(mp.begin(), mp.end(), 0.0);
            const auto [a, b] = basis.states[x];
            const auto [c, d] = basis.states[y];
            const auto& sa = basis.singles[static_cast<std::size_t>(a)];
            const auto& sb = basis.singles[static_cast<std::size_t>(b)];
            const auto& sc = basis.singles[static_cast<std::size_t>(c)];
            const auto& sd = basis.singles[static_cast<std::size_t>(d)];
            const int q1 = (sa.mj2 - sc.mj2) / 2;
            const int q2 = (sb.mj2 - sd.mj2) / 2;
            for (int k1 = 1; k1 <= max_multipole; ++k1) {
                if (std::abs(q1) > k1) continue;
                const double m1 = tables[static_cast<std::size_t>(k1)](a, c);
                if (m1 == 0.0) continue;
                for (int k2 = 1; k2 <= max_multipole; ++k2) {
                    if (std::abs(q2) > k2) continue;
                    const double m2 = tables[static_cast<std::size_t>(k2)](b, d);
                    if (m2 == 0.0) continue;
                    mp[static_cast<std::size_t>(k1 + k2 - 2)] += ang(k1, k2, q1, q2) * m1 * m2;
                }
            }
        };

        for (Eigen::Index s = 0; s < dim; ++s) {
            for (Eigen::Index t = 0; t <= s; ++t) {
                std::fill(acc.begin(), acc.end(), 0.0);
                for_each_component(sector_[static_cast<std::size_t>(s)], sector_[static_cast<std::size_t>(t)],
                                   [&](std::size_t x, std::size_t y, double c) {
                                       multipole_elem(x, y);
                                       for (std::size_t p = 0; p < mp.size(); ++p) acc[p] += c * mp[p];
                                   });
                for (std::size_t p = 0; p < acc.size(); ++p) {
                    // atomic units -> MHz um^p
                    const double v = acc[p] * constants::hartree_mhz * std::pow(constants::bohr_um, static_cast<double>(p + 3));
                    multipole_[p](s, t) = multipole_[p](t, s) = v;
                }
            }
        }

        // Le Roy radius of the target pair bounds the validity of the multipole expansion
        const double r2a = atom.radial(basis.target.a)->expectation_r(2);
        const double r2b = atom.radial(basis.target.b)->expectation_r(2);
        min_distance_um_ = 2.0 * (std::sqrt(r2a) + std::sqrt(r2b)) * constants::bohr_um;

        set_field_part(basis, atom);
    }

    /// Same basis, angle and multipole matrices under different fields. The
    /// multipole part does not depend on the fields, so scans over B and E
    /// at fixed angle only pay for the cheap field part.
    PairHamiltonian with_fields(const PairBasis& basis, const AtomicStructure& atom, const FieldConfig& fields) const {
        if (symmetric_ && fields.e_mv_cm != 0.0)
            throw ConfigError("the exchange-symmetric sector is not invariant with an electric field");
        PairHamiltonian h = *this;
        h.fields_ = fields;
        h.set_field_part(basis, atom);
        return h;
    }

    Eigen::Index dimension() const { return field_.rows(); }
    Eigen::Index target_index() const { return target_; }
    bool symmetric() const { return symmetric_; }
    const std::vector<SectorVector>& sector() const { return sector_; }
    const FieldConfig& fields() const { return fields_; }
    double theta() const { return theta_; }
    int max_multipole() const { return max_multipole_; }
    double min_distance_um() const { return min_distance_um_; }

    /// Energy of the field-shifted, non-interacting target pair (MHz, zero-field reference).
    double reference_mhz() const { return reference_mhz_; }

    const Eigen::MatrixXd& field_part() const { return field_; }
    /// Coefficient matrix of 1/R^p, p = 3 + index, in MHz um^p.
    const Eigen::MatrixXd& multipole_part(int power) const {
        return multipole_.at(static_cast<std::size_t>(power - 3));
    }

    Eigen::MatrixXd interaction(double r_um) const {
        check_distance(r_um);
        Eigen::MatrixXd v = Eigen::MatrixXd::Zero(dimension(), dimension());
        for (std::size_t p = 0; p < multipole_.size(); ++p) v += multipole_[p] / std::pow(r_um, static_cast<double>(p + 3));
        return v;
    }

    Eigen::MatrixXd matrix(double r_um) const { return field_ + interaction(r_um); }

    void check_distance(double r_um) const {
        if (!(r_um >= min_distance_um_)) {
            std::ostringstream os;
            os << "R=" << r_um << " um is below the validity limit " << min_distance_um_
               << " um of the multipole expansion";
            throw ConfigError(os.str());
        }
    }

private:
    template <class Fn>
    static void for_each_component(const SectorVector& u, const SectorVector& w, Fn&& fn) {
        const std::array<std::pair<std::ptrdiff_t, double>, 2> left{{{static_cast<std::ptrdiff_t>(u.i0), u.c0}, {u.i1, u.c1}}};
        const std::array<std::pair<std::ptrdiff_t, double>, 2> right{{{static_cast<std::ptrdiff_t>(w.i0), w.c0}, {w.i1, w.c1}}};
        for (const auto& [x, cx] : left) {
            if (x < 0) continue;
            for (const auto& [y, cy] : right) {
                if (y < 0) continue;
                fn(static_cast<std::size_t>(x), static_cast<std::size_t>(y), cx * cy);
            }
        }
    }

    void set_field_part(const PairBasis& basis, const AtomicStructure& atom) {
        const auto dim = static_cast<Eigen::Index>(sector_.size());
        const Eigen::MatrixXd h1 = single_atom_hamiltonian(basis.singles, fields_, atom);
        const double e_target = basis.target_energy_mhz;
        field_ = Eigen::MatrixXd::Zero(dim, dim);
        for (Eigen::Index s = 0; s < dim; ++s) {
            for (Eigen::Index t = 0; t <= s; ++t) {
                double f = 0.0;
                for_each_component(sector_[static_cast<std::size_t>(s)], sector_[static_cast<std::size_t>(t)],
                                   [&](std::size_t x, std::size_t y, double c) {
                                       const auto [a, b] = basis.states[x];
                                       const auto [cc, d] = basis.states[y];
                                       double v = 0.0;
                                       if (b == d) v += h1(a, cc);
                                       if (a == cc) v += h1(b, d);
                                       if (x == y) v -= e_target;
                                       f += c * v;
                                   });
                field_(s, t) = field_(t, s) = f;
            }
        }

        // field-shifted energy of the non-interacting target pair; fields along
        // z conserve the total m_j, so only the target's M block is needed
        auto total_mj2 = [&](const SectorVector& v) {
            const auto [a, b] = basis.states[v.i0];
            return basis.singles[static_cast<std::size_t>(a)].mj2 + basis.singles[static_cast<std::size_t>(b)].mj2;
        };
        const int m_target = total_mj2(sector_[static_cast<std::size_t>(target_)]);
        std::vector<Eigen::Index> block;
        Eigen::Index target_pos = 0;
        for (Eigen::Index s = 0; s < dim; ++s) {
            if (total_mj2(sector_[static_cast<std::size_t>(s)]) != m_target) continue;
            if (s == target_) target_pos = static_cast<Eigen::Index>(block.size());
            block.push_back(s);
        }
        const auto nb = static_cast<Eigen::Index>(block.size());
        Eigen::MatrixXd sub(nb, nb);
        for (Eigen::Index i = 0; i < nb; ++i)
            for (Eigen::Index j = 0; j < nb; ++j) sub(i, j) = field_(block[static_cast<std::size_t>(i)], block[static_cast<std::size_t>(j)]);
        const auto far = linalg::eigh(sub, true);
        Eigen::Index best = 0;
        for (Eigen::Index k = 0; k < far.values.size(); ++k) {
            if (std::abs(far.vectors(target_pos, k)) > std::abs(far.vectors(target_pos, best))) best = k;
        }
        reference_mhz_ = far.values(best);
    }

    FieldConfig fields_;
    double theta_ = 0.0;
    int max_multipole_ = 1;
    bool symmetric_ = false;
    std::vector<SectorVector> sector_;
    Eigen::Index target_ = -1;
    Eigen::MatrixXd field_;
    std::vector<Eigen::MatrixXd> multipole_;
    double min_distance_um_ = 0.0;
    double reference_mhz_ = 0.0;
};

/// Multipole interaction alone in the full (unsymmetrised) product basis, MHz.
inline Eigen::MatrixXd interaction_hamiltonian(const PairBasis& basis, const Geometry& geometry, int max_multipole,
                                               const AtomicStructure& atom) {
    geometry.validate();
    const PairHamiltonian h(basis, atom, FieldConfig{}, geometry.theta_rad, max_multipole, SectorMode::full);
    return h.interaction(geometry.r_um);
}

// ---------------------------------------------------------------------------
// Spectra

struct PairSpectrumPoint {
    double r_um = 0.0;
    Eigen::VectorXd energies_mhz;  // relative to the zero-field target pair energy
    Eigen::VectorXd overlaps;      // |<target|psi_k>|^2
    Eigen::MatrixXd vectors;       // eigenvectors in the sector basis, empty unless requested
    double reference_mhz = 0.0;    // field-shifted non-interacting target energy

    Eigen::Index size() const { return energies_mhz.size(); }
    double detuning(Eigen::Index k) const { return energies_mhz(k) - reference_mhz; }
    Eigen::Index dominant() const {
        Eigen::Index k = 0;
        overlaps.maxCoeff(&k);
        return k;
    }
    bool has_vectors() const { return vectors.size() > 0; }
};

inline PairSpectrumPoint diagonalize_at(const PairHamiltonian& h, double r_um, bool store_vectors) {
    h.check_distance(r_um);
    PairSpectrumPoint pt;
    pt.r_um = r_um;
    pt.reference_mhz = h.reference_mhz();
    linalg::EigenDecomposition eig;
    try {
        eig = linalg::eigh(h.matrix(r_um), true);
    } catch (const NumericalError& e) {
        std::ostringstream os;
        os << e.what() << " at R=" << r_um << " um";
        throw NumericalError(os.str());
    }
    pt.energies_mhz = eig.values;
    pt.overlaps = eig.vectors.row(h.target_index()).transpose().array().square();
    if (store_vectors) pt.vectors = std::move(eig.vectors);
    return pt;
}

/// Full diagonalisation at every distance of an ascending list.
inline std::vector<PairSpectrumPoint> pair_spectrum(const PairHamiltonian& h, const std::vector<double>& r_list,
                                                    bool store_vectors = false, Parallelism budget = {}) {
    if (!std::is_sorted(r_list.begin(), r_list.end())) throw ConfigError("R list must be sorted ascending");
    for (double r : r_list) h.check_distance(r);
    std::vector<PairSpectrumPoint> out(r_list.size());
    parallel_for(r_list.size(), budget, [&](std::size_t i) { out[i] = diagonalize_at(h, r_list[i], store_vectors); });
    return out;
}

inline std::vector<double> linear_grid(double lo, double hi, double step) {
    std::vector<double> g;
    const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long i = 0; i <= count; ++i) g.push_back(lo + static_cast<double>(i) * step);
    return g;
}

// ---------------------------------------------------------------------------
// Resonances

struct ResonantDistance {
    double r_um = 0.0;       // refined crossing distance, or the grid point inside the window
    double r_lo_um = 0.0;    // bracketing interval after refinement
    double r_hi_um = 0.0;
    Eigen::Index eigen_index = 0;  // index of the resonant eigenstate at r_lo_um
    double overlap = 0.0;
    double detuning_mhz = 0.0;
};

struct ResonanceScan {
    std::vector<ResonantDistance> resonances;
    std::vector<std::string> warnings;
};

struct ResonanceOptions {
    double window_mhz = 1.2;        // laser detuning window (detuning relative to the non-interacting pair)
    double overlap_threshold = 0.01;
    double refine_tolerance_um = 0.01;
};

/// Locates distances at which a pair eigenstate other than the dominant one
/// is resonant with the two-photon excitation of the target pair. With
/// eigenvectors stored, eigenstates are followed across grid intervals and
/// zero crossings of their detuning are refined by bisection through
/// `recompute` (when given).
inline ResonanceScan find_resonant_distances(const std::vector<PairSpectrumPoint>& spectrum,
                                             const ResonanceOptions& opt = {},
                                             const std::function<PairSpectrumPoint(double)>& recompute = {}) {
    ResonanceScan scan;
    auto candidate = [&](const PairSpectrumPoint& p, Eigen::Index k) {
        return k != p.dominant() && p.overlaps(k) >= opt.overlap_threshold;
    };

    // in-window states at the grid points
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        const auto& p = spectrum[i];
        for (Eigen::Index k = 0; k < p.size(); ++k) {
            if (candidate(p, k) && std::abs(p.detuning(k)) <= opt.window_mhz)
                scan.resonances.push_back({p.r_um, p.r_um, p.r_um, k, p.overlaps(k), p.detuning(k)});
        }
    }

    // zero crossings between grid points
    for (std::size_t i = 0; i + 1 < spectrum.size(); ++i) {
        const auto& lo = spectrum[i];
        const auto& hi = spectrum[i + 1];
        if (!lo.has_vectors() || !hi.has_vectors()) break;
        std::vector<Eigen::Index> rows;
        for (Eigen::Index k = 0; k < lo.size(); ++k) {
            if (k != lo.dominant() && lo.overlaps(k) >= 0.1 * opt.overlap_threshold) rows.push_back(k);
        }
        int crossings = 0;
        for (Eigen::Index k : rows) {
            const Eigen::VectorXd proj = hi.vectors.transpose() * lo.vectors.col(k);
            Eigen::Index m = 0;
            const double match = proj.cwiseAbs().maxCoeff(&m);
            if (m == hi.dominant()) continue;
            if (std::max(lo.overlaps(k), hi.overlaps(m)) < opt.overlap_threshold) continue;
            const double d0 = lo.detuning(k);
            const double d1 = hi.detuning(m);
            if (!((d0 > 0) != (d1 > 0))) continue;
            if (std::abs(d0) <= opt.window_mhz || std::abs(d1) <= opt.window_mhz) continue;  // already listed
            if (match < 0.5) {
                std::ostringstream os;
                os << "ambiguous continuation of eigenstate " << k << " between R=" << lo.r_um << " and " << hi.r_um
                   << " um (overlap " << match << "); refine the R grid";
                scan.warnings.push_back(os.str());
            }
            ++crossings;
            ResonantDistance res{0.5 * (lo.r_um + hi.r_um), lo.r_um, hi.r_um, k,
                                 std::max(lo.overlaps(k), hi.overlaps(m)), 0.0};
            if (recompute) {
                double a = lo.r_um, b = hi.r_um;
                Eigen::VectorXd vec = lo.vectors.col(k);
                const bool sign_lo = d0 > 0;
                while (b - a > opt.refine_tolerance_um) {
                    const double mid = 0.5 * (a + b);
                    const auto pm = recompute(mid);
                    const Eigen::VectorXd pr = pm.vectors.transpose() * vec;
                    Eigen::Index mm = 0;
                    pr.cwiseAbs().maxCoeff(&mm);
                    if ((pm.detuning(mm) > 0) == sign_lo) {
                        a = mid;
                        vec = pm.vectors.col(mm);
                    } else {
                        b = mid;
                    }
                    res.overlap = pm.overlaps(mm);
                    res.detuning_mhz = pm.detuning(mm);
                }
                res.r_lo_um = a;
                res.r_hi_um = b;
                res.r_um = 0.5 * (a + b);
            }
            scan.resonances.push_back(res);
        }
        if (crossings > 1) {
            std::ostringstream os;
            os << crossings << " resonant crossings between R=" << lo.r_um << " and " << hi.r_um
               << " um; grid may be too coarse to separate them";
            scan.warnings.push_back(os.str());
        }
    }
    std::sort(scan.resonances.begin(), scan.resonances.end(),
              [](const auto& x, const auto& y) { return x.r_um < y.r_um; });
    return scan;
}

/// Number of eigenstates other than the dominant one inside the laser window
/// with overlap above threshold.
inline int count_resonant_states(const PairSpectrumPoint& p, const ResonanceOptions& opt) {
    int c = 0;
    const auto dom = p.dominant();
    for (Eigen::Index k = 0; k < p.size(); ++k) {
        if (k != dom && p.overlaps(k) >= opt.overlap_threshold && std::abs(p.detuning(k)) <= opt.window_mhz) ++c;
    }
    return c;
}

}  // namespace rydmap

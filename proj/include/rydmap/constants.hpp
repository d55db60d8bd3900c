#pragma once

// CODATA 2018 values and the unit conversions used throughout the library.
// Internally the atomic structure code works in atomic units; everything
// that leaves a module is in MHz (energies as E/h), micrometres, Gauss and
// mV/cm.

namespace rydmap::constants {

inline constexpr double pi = 3.14159265358979323846;

// Rydberg constant R_inf * c, GHz.
inline constexpr double rydberg_inf_ghz = 3289841.9602508;
// Hartree energy E_h / h, MHz.
inline constexpr double hartree_mhz = 6.579683920502e9;
// Bohr radius, micrometres.
inline constexpr double bohr_um = 5.29177210903e-5;
// Atomic unit of electric field, V/m.
inline constexpr double efield_au_v_per_m = 5.14220674763e11;
// Bohr magneton mu_B / h, MHz per Gauss.
inline constexpr double mu_b_mhz_per_gauss = 1.39962449361;
// Electron mass, atomic mass units.
inline constexpr double electron_mass_u = 5.48579909065e-4;

inline constexpr double rb87_mass_u = 86.909180531;

/// Mass-corrected Rydberg constant for a nucleus (plus core) of mass `mass_u`.
constexpr double rydberg_ghz(double mass_u) {
    return rydberg_inf_ghz / (1.0 + electron_mass_u / mass_u);
}

/// mV/cm to atomic units of field strength.
constexpr double mv_per_cm_to_au(double e_mv_cm) {
    return e_mv_cm * 0.1 / efield_au_v_per_m;
}

}  // namespace rydmap::constants

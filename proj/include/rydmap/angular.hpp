#pragma once

// Angular momentum algebra. Every argument is passed as twice its value so
// half-integer momenta are exact integers (j2 = 2j, m2 = 2m).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>

namespace rydmap::angular {

namespace detail {

inline constexpr int max_factorial = 256;

inline const std::array<double, max_factorial>& log_factorials() {
    static const std::array<double, max_factorial> table = [] {
        std::array<double, max_factorial> t{};
        t[0] = 0.0;
        for (int i = 1; i < max_factorial; ++i) t[i] = t[i - 1] + std::log(static_cast<double>(i));
        return t;
    }();
    return table;
}

// log((x/2)!) for an even doubled argument.
inline double lf(int x2) { return log_factorials()[static_cast<std::size_t>(x2 / 2)]; }

inline bool triangle(int a2, int b2, int c2) {
    return c2 >= std::abs(a2 - b2) && c2 <= a2 + b2 && (a2 + b2 + c2) % 2 == 0;
}

inline double log_delta(int a2, int b2, int c2) {
    return lf(a2 + b2 - c2) + lf(a2 - b2 + c2) + lf(-a2 + b2 + c2) - lf(a2 + b2 + c2 + 2);
}

inline double parity_sign(int twice_exponent) {
    // (-1)^(x) where x = twice_exponent / 2 is an integer
    return ((twice_exponent / 2) % 2 == 0) ? 1.0 : -1.0;
}

}  // namespace detail

/// Wigner 3j symbol (j1 j2 j3; m1 m2 m3), Racah's formula.
inline double wigner_3j(int j1, int j2, int j3, int m1, int m2, int m3) {
    using namespace detail;
    if (m1 + m2 + m3 != 0) return 0.0;
    if (!triangle(j1, j2, j3)) return 0.0;
    if (std::abs(m1) > j1 || std::abs(m2) > j2 || std::abs(m3) > j3) return 0.0;
    if ((j1 + m1) % 2 || (j2 + m2) % 2 || (j3 + m3) % 2) return 0.0;

    const double pre = 0.5 * (log_delta(j1, j2, j3) + lf(j1 + m1) + lf(j1 - m1) + lf(j2 + m2) +
                              lf(j2 - m2) + lf(j3 + m3) + lf(j3 - m3));

    // k runs over doubled integers keeping every factorial argument >= 0
    const int kmin = std::max({0, j2 - j3 - m1, j1 - j3 + m2});
    const int kmax = std::min({j1 + j2 - j3, j1 - m1, j2 + m2});
    double sum = 0.0;
    for (int k = kmin; k <= kmax; k += 2) {
        const double term = lf(k) + lf(j3 - j2 + k + m1) + lf(j3 - j1 + k - m2) + lf(j1 + j2 - j3 - k) +
                            lf(j1 - k - m1) + lf(j2 - k + m2);
        sum += parity_sign(k) * std::exp(pre - term);
    }
    return parity_sign(j1 - j2 - m3) * sum;
}

/// Wigner 6j symbol {j1 j2 j3; j4 j5 j6}.
inline double wigner_6j(int j1, int j2, int j3, int j4, int j5, int j6) {
    using namespace detail;
    if (!triangle(j1, j2, j3) || !triangle(j1, j5, j6) || !triangle(j4, j2, j6) || !triangle(j4, j5, j3))
        return 0.0;

    const double pre =
        0.5 * (log_delta(j1, j2, j3) + log_delta(j1, j5, j6) + log_delta(j4, j2, j6) + log_delta(j4, j5, j3));

    const int a1 = j1 + j2 + j3, a2 = j1 + j5 + j6, a3 = j4 + j2 + j6, a4 = j4 + j5 + j3;
    const int b1 = j1 + j2 + j4 + j5, b2 = j2 + j3 + j5 + j6, b3 = j3 + j1 + j6 + j4;
    const int tmin = std::max({a1, a2, a3, a4});
    const int tmax = std::min({b1, b2, b3});
    double sum = 0.0;
    for (int t = tmin; t <= tmax; t += 2) {
        const double term = lf(t + 2) - (lf(t - a1) + lf(t - a2) + lf(t - a3) + lf(t - a4) + lf(b1 - t) +
                                         lf(b2 - t) + lf(b3 - t));
        sum += parity_sign(t) * std::exp(pre + term);
    }
    return sum;
}

/// Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M>.
inline double clebsch_gordan(int j1, int m1, int j2, int m2, int J, int M) {
    return detail::parity_sign(j1 - j2 + M) * std::sqrt(J + 1.0) * wigner_3j(j1, j2, J, m1, m2, -M);
}

/// Reduced Wigner rotation matrix element d^j_{m' m}(beta).
inline double wigner_small_d(int j, int mp, int m, double beta) {
    using namespace detail;
    if (std::abs(m) > j || std::abs(mp) > j || (j + m) % 2 || (j + mp) % 2) return 0.0;
    const double c = std::cos(0.5 * beta);
    const double s = std::sin(0.5 * beta);
    const double pre = 0.5 * (lf(j + mp) + lf(j - mp) + lf(j + m) + lf(j - m));
    const int smin = std::max(0, m - mp);
    const int smax = std::min(j + m, j - mp);
    double sum = 0.0;
    for (int k = smin; k <= smax; k += 2) {
        const double denom = lf(j + m - k) + lf(k) + lf(mp - m + k) + lf(j - mp - k);
        const int pc = (2 * j + m - mp - 2 * k) / 2;
        const int ps = (mp - m + 2 * k) / 2;
        sum += parity_sign(mp - m + k) * std::exp(pre - denom) * std::pow(c, pc) * std::pow(s, ps);
    }
    return sum;
}

/// Renormalised spherical harmonic C^k_q(theta, phi = 0) = sqrt(4 pi / (2k+1)) Y_kq.
/// Takes integer k and q (not doubled).
inline double spherical_c(int k, int q, double theta) { return wigner_small_d(2 * k, 2 * q, 0, theta); }

}  // namespace rydmap::angular

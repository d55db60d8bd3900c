#pragma once

#include <string>

#include <Eigen/Dense>
#include <lapacke.h>

#include "rydmap/errors.hpp"

namespace rydmap::linalg {

struct EigenDecomposition {
    Eigen::VectorXd values;   // ascending
    Eigen::MatrixXd vectors;  // columns; empty when not requested
};

/// Dense symmetric eigensolver (LAPACK dsyevd). Only the lower triangle of
/// `m` is read.
inline EigenDecomposition eigh(Eigen::MatrixXd m, bool want_vectors = true) {
    const auto n = static_cast<lapack_int>(m.rows());
    if (m.rows() != m.cols()) throw NumericalError("eigh: matrix is not square");
    EigenDecomposition out;
    out.values.resize(n);
    if (n == 0) return out;
    const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, want_vectors ? 'V' : 'N', 'L', n, m.data(), n,
                                           out.values.data());
    if (info != 0) throw NumericalError("dsyevd failed to converge (info=" + std::to_string(info) + ")");
    if (want_vectors) out.vectors = std::move(m);
    return out;
}

}  // namespace rydmap::linalg

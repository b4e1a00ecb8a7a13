// matrix.hpp - minimal dense row-major matrix kernel
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "roadsafe/common.hpp"

namespace roadsafe {

struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& what) : Error("shape mismatch: " + what) {}
};

struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

    bool finite() const {
        for (double v : a)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool operator==(const Matrix&) const = default;
};

// C = A * B
inline Matrix matmul(const Matrix& A, const Matrix& B) {
    if (A.cols != B.rows) throw ShapeMismatch("matmul");
    Matrix C(A.rows, B.cols);
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t k = 0; k < A.cols; ++k) {
            const double aik = A.a[i * A.cols + k];
            if (aik == 0.0) continue;
            const double* brow = &B.a[k * B.cols];
            double* crow = &C.a[i * C.cols];
            for (std::size_t j = 0; j < B.cols; ++j) crow[j] += aik * brow[j];
        }
    return C;
}

// C = A * B^T
inline Matrix matmul_nt(const Matrix& A, const Matrix& B) {
    if (A.cols != B.cols) throw ShapeMismatch("matmul_nt");
    Matrix C(A.rows, B.rows);
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < B.rows; ++j) {
            double s = 0;
            const double* ar = &A.a[i * A.cols];
            const double* br = &B.a[j * B.cols];
            for (std::size_t k = 0; k < A.cols; ++k) s += ar[k] * br[k];
            C.a[i * C.cols + j] = s;
        }
    return C;
}

// C = A^T * B
inline Matrix matmul_tn(const Matrix& A, const Matrix& B) {
    if (A.rows != B.rows) throw ShapeMismatch("matmul_tn");
    Matrix C(A.cols, B.cols);
    for (std::size_t k = 0; k < A.rows; ++k) {
        const double* ar = &A.a[k * A.cols];
        const double* br = &B.a[k * B.cols];
        for (std::size_t i = 0; i < A.cols; ++i) {
            if (ar[i] == 0.0) continue;
            double* cr = &C.a[i * C.cols];
            for (std::size_t j = 0; j < B.cols; ++j) cr[j] += ar[i] * br[j];
        }
    }
    return C;
}

inline Matrix transpose(const Matrix& A) {
    Matrix T(A.cols, A.rows);
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < A.cols; ++j) T.at(j, i) = A.at(i, j);
    return T;
}

} // namespace roadsafe

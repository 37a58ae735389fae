#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace flip {

using Vec4 = std::array<double, 4>;
using Vec3 = std::array<double, 3>;
using Mat4 = std::array<std::array<double, 4>, 4>;  // [i][j] = d f_j / d x_i (rows are D_i f)

inline Vec4 operator+(const Vec4& a, const Vec4& b) {
    return {a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]};
}
inline Vec4 operator-(const Vec4& a, const Vec4& b) {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]};
}
inline Vec4 operator*(double s, const Vec4& a) {
    return {s * a[0], s * a[1], s * a[2], s * a[3]};
}
inline double dot(const Vec4& a, const Vec4& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
}
inline double norm2(const Vec4& a) { return std::sqrt(dot(a, a)); }
inline double norminf(const Vec4& a) {
    double m = 0.0;
    for (double c : a) m = std::max(m, std::abs(c));
    return m;
}
inline Vec4 axis4(int i) {
    Vec4 e{0.0, 0.0, 0.0, 0.0};
    e[static_cast<std::size_t>(i)] = 1.0;
    return e;
}

inline double det4(const Mat4& m) {
    // cofactor expansion over 2x2 minors of the first two rows
    auto minor2 = [&](int c0, int c1) {
        return m[0][c0] * m[1][c1] - m[0][c1] * m[1][c0];
    };
    auto minor2b = [&](int c0, int c1) {
        return m[2][c0] * m[3][c1] - m[2][c1] * m[3][c0];
    };
    return minor2(0, 1) * minor2b(2, 3) - minor2(0, 2) * minor2b(1, 3) +
           minor2(0, 3) * minor2b(1, 2) + minor2(1, 2) * minor2b(0, 3) -
           minor2(1, 3) * minor2b(0, 2) + minor2(2, 3) * minor2b(0, 1);
}

// Solve m^T? No: solves (as linear map x -> x*M with row convention) y = x M for x.
// Plain Gaussian elimination on the 4x4 system M^T x^T = y^T.
inline Vec4 solve4(Mat4 m, Vec4 y) {
    // rows of `m` are D_i f, so the linear map is y_j = sum_i x_i m[i][j];
    // build the standard column-major system a[j][i] = m[i][j].
    std::array<std::array<double, 5>, 4> a{};
    for (int j = 0; j < 4; ++j) {
        for (int i = 0; i < 4; ++i) a[j][i] = m[i][j];
        a[j][4] = y[static_cast<std::size_t>(j)];
    }
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        for (int r = 0; r < 4; ++r) {
            if (r == col || a[col][col] == 0.0) continue;
            double f = a[r][col] / a[col][col];
            for (int c = col; c < 5; ++c) a[r][c] -= f * a[col][c];
        }
    }
    Vec4 x{};
    for (int i = 0; i < 4; ++i) x[static_cast<std::size_t>(i)] = a[i][4] / a[i][i];
    return x;
}

}  // namespace flip

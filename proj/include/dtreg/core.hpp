#ifndef DTREG_CORE_HPP
#define DTREG_CORE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

namespace dtreg {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    double norm_inf() const {
        return std::max({std::abs(x), std::abs(y), std::abs(z)});
    }
    // componentwise product
    Vec3 cwise(const Vec3& o) const { return {x * o.x, y * o.y, z * o.z}; }
    Vec3 cwise_div(const Vec3& o) const { return {x / o.x, y / o.y, z / o.z}; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// 3x3 matrix, row-major.
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    double& operator()(int r, int c) { return m[static_cast<std::size_t>(3 * r + c)]; }
    double operator()(int r, int c) const { return m[static_cast<std::size_t>(3 * r + c)]; }

    static Mat3 identity() { return Mat3{}; }

    Vec3 col(int c) const { return {(*this)(0, c), (*this)(1, c), (*this)(2, c)}; }
    Vec3 row(int r) const { return {(*this)(r, 0), (*this)(r, 1), (*this)(r, 2)}; }

    Vec3 operator*(const Vec3& v) const {
        return {row(0).dot(v), row(1).dot(v), row(2).dot(v)};
    }
    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
                r(i, j) = s;
            }
        return r;
    }
    Mat3 operator+(const Mat3& o) const {
        Mat3 r;
        for (std::size_t i = 0; i < 9; ++i) r.m[i] = m[i] + o.m[i];
        return r;
    }
    Mat3 operator-(const Mat3& o) const {
        Mat3 r;
        for (std::size_t i = 0; i < 9; ++i) r.m[i] = m[i] - o.m[i];
        return r;
    }
    Mat3 operator*(double s) const {
        Mat3 r;
        for (std::size_t i = 0; i < 9; ++i) r.m[i] = m[i] * s;
        return r;
    }
    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
        return r;
    }
    // transpose times vector, avoids materializing the transpose
    Vec3 tmul(const Vec3& v) const {
        return {col(0).dot(v), col(1).dot(v), col(2).dot(v)};
    }
    double det() const {
        return (*this)(0, 0) * ((*this)(1, 1) * (*this)(2, 2) - (*this)(1, 2) * (*this)(2, 1)) -
               (*this)(0, 1) * ((*this)(1, 0) * (*this)(2, 2) - (*this)(1, 2) * (*this)(2, 0)) +
               (*this)(0, 2) * ((*this)(1, 0) * (*this)(2, 1) - (*this)(1, 1) * (*this)(2, 0));
    }
    Mat3 inverse() const {
        const Mat3& a = *this;
        Mat3 r;
        r(0, 0) = a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1);
        r(0, 1) = a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2);
        r(0, 2) = a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1);
        r(1, 0) = a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2);
        r(1, 1) = a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0);
        r(1, 2) = a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2);
        r(2, 0) = a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0);
        r(2, 1) = a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1);
        r(2, 2) = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
        const double d = det();
        return r * (1.0 / d);
    }
    double frobenius_norm() const {
        double s = 0.0;
        for (double v : m) s += v * v;
        return std::sqrt(s);
    }
};

// 4x4 homogeneous world-to-world transform, row-major. Last row (0,0,0,1).
struct Mat44 {
    std::array<double, 16> m{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};

    double& operator()(int r, int c) { return m[static_cast<std::size_t>(4 * r + c)]; }
    double operator()(int r, int c) const { return m[static_cast<std::size_t>(4 * r + c)]; }

    static Mat44 identity() { return Mat44{}; }

    Mat3 linear() const {
        Mat3 a;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) a(i, j) = (*this)(i, j);
        return a;
    }
    Vec3 translation_part() const { return {(*this)(0, 3), (*this)(1, 3), (*this)(2, 3)}; }

    Vec3 apply(const Vec3& p) const {
        return linear() * p + translation_part();
    }
    Mat44 operator*(const Mat44& o) const {
        Mat44 r;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                double s = 0.0;
                for (int k = 0; k < 4; ++k) s += (*this)(i, k) * o(k, j);
                r(i, j) = s;
            }
        return r;
    }
    static Mat44 from_linear_translation(const Mat3& a, const Vec3& t) {
        Mat44 r;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) r(i, j) = a(i, j);
            r(i, 3) = t[i];
        }
        r(3, 0) = r(3, 1) = r(3, 2) = 0.0;
        r(3, 3) = 1.0;
        return r;
    }
};

} // namespace dtreg

#endif

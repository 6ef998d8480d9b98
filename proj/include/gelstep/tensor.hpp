#pragma once

// Small fixed-size tensors for d = 2, 3. Index convention: Mat(i, j) is row i,
// column j; Tensor3(i, j, k) carries (∇F)_{ijk} = ∂_j ∂_k v_i.

#include <array>
#include <cmath>
#include <cstddef>

#include "gelstep/errors.hpp"

namespace gelstep {

template <int D>
concept SpatialDim = (D == 2 || D == 3);

template <int D>
    requires SpatialDim<D>
struct Vec {
    std::array<double, D> v{};

    constexpr double& operator[](int i) { return v[static_cast<std::size_t>(i)]; }
    constexpr double operator[](int i) const { return v[static_cast<std::size_t>(i)]; }
};

template <int D>
    requires SpatialDim<D>
struct Mat {
    std::array<double, D * D> a{};

    constexpr double& operator()(int i, int j) { return a[static_cast<std::size_t>(i * D + j)]; }
    constexpr double operator()(int i, int j) const { return a[static_cast<std::size_t>(i * D + j)]; }

    static constexpr Mat identity() {
        Mat m;
        for (int i = 0; i < D; ++i) m(i, i) = 1.0;
        return m;
    }
    static constexpr Mat diag(const Vec<D>& d) {
        Mat m;
        for (int i = 0; i < D; ++i) m(i, i) = d[i];
        return m;
    }
};

template <int D>
    requires SpatialDim<D>
struct Tensor3 {
    std::array<double, D * D * D> a{};

    constexpr double& operator()(int i, int j, int k) {
        return a[static_cast<std::size_t>((i * D + j) * D + k)];
    }
    constexpr double operator()(int i, int j, int k) const {
        return a[static_cast<std::size_t>((i * D + j) * D + k)];
    }
};

// Elementwise arithmetic shared by all three carriers.
#define GELSTEP_ELEMENTWISE_OPS(Type, storage)                                     \
    template <int D>                                                              \
    constexpr Type<D>& operator+=(Type<D>& x, const Type<D>& y) {                 \
        for (std::size_t i = 0; i < x.storage.size(); ++i) x.storage[i] += y.storage[i]; \
        return x;                                                                 \
    }                                                                             \
    template <int D>                                                              \
    constexpr Type<D>& operator-=(Type<D>& x, const Type<D>& y) {                 \
        for (std::size_t i = 0; i < x.storage.size(); ++i) x.storage[i] -= y.storage[i]; \
        return x;                                                                 \
    }                                                                             \
    template <int D>                                                              \
    constexpr Type<D>& operator*=(Type<D>& x, double s) {                         \
        for (auto& e : x.storage) e *= s;                                         \
        return x;                                                                 \
    }                                                                             \
    template <int D>                                                              \
    constexpr Type<D> operator+(Type<D> x, const Type<D>& y) { return x += y; }   \
    template <int D>                                                              \
    constexpr Type<D> operator-(Type<D> x, const Type<D>& y) { return x -= y; }   \
    template <int D>                                                              \
    constexpr Type<D> operator-(Type<D> x) { return x *= -1.0; }                  \
    template <int D>                                                              \
    constexpr Type<D> operator*(double s, Type<D> x) { return x *= s; }           \
    template <int D>                                                              \
    constexpr Type<D> operator*(Type<D> x, double s) { return x *= s; }           \
    template <int D>                                                              \
    constexpr Type<D> operator/(Type<D> x, double s) { return x *= (1.0 / s); }   \
    template <int D>                                                              \
    constexpr double frob_dot(const Type<D>& x, const Type<D>& y) {               \
        double s = 0.0;                                                           \
        for (std::size_t i = 0; i < x.storage.size(); ++i) s += x.storage[i] * y.storage[i]; \
        return s;                                                                 \
    }                                                                             \
    template <int D>                                                              \
    inline double norm(const Type<D>& x) { return std::sqrt(frob_dot(x, x)); }    \
    template <int D>                                                              \
    inline bool all_finite(const Type<D>& x) {                                    \
        for (double e : x.storage)                                                \
            if (!std::isfinite(e)) return false;                                  \
        return true;                                                              \
    }

GELSTEP_ELEMENTWISE_OPS(Vec, v)
GELSTEP_ELEMENTWISE_OPS(Mat, a)
GELSTEP_ELEMENTWISE_OPS(Tensor3, a)

#undef GELSTEP_ELEMENTWISE_OPS

/// A : B
template <int D>
constexpr double double_dot(const Mat<D>& x, const Mat<D>& y) {
    return frob_dot(x, y);
}

/// G ⋮ H = Σ_{ijk} G_{ijk} H_{ijk}
template <int D>
constexpr double triple_dot(const Tensor3<D>& g, const Tensor3<D>& h) {
    return frob_dot(g, h);
}

template <int D>
constexpr double dot(const Vec<D>& x, const Vec<D>& y) {
    return frob_dot(x, y);
}

template <int D>
constexpr Mat<D> transpose(const Mat<D>& m) {
    Mat<D> t;
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) t(i, j) = m(j, i);
    return t;
}

template <int D>
constexpr Mat<D> operator*(const Mat<D>& x, const Mat<D>& y) {
    Mat<D> r;
    for (int i = 0; i < D; ++i)
        for (int k = 0; k < D; ++k) {
            const double xik = x(i, k);
            for (int j = 0; j < D; ++j) r(i, j) += xik * y(k, j);
        }
    return r;
}

template <int D>
constexpr Vec<D> operator*(const Mat<D>& m, const Vec<D>& x) {
    Vec<D> r;
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) r[i] += m(i, j) * x[j];
    return r;
}

/// a ⊗ b, (a ⊗ b)_{ij} = a_i b_j
template <int D>
constexpr Mat<D> outer(const Vec<D>& x, const Vec<D>& y) {
    Mat<D> r;
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) r(i, j) = x[i] * y[j];
    return r;
}

/// (R G)_{ijk} = Σ_m R_{im} G_{mjk}: rotation acting on the first slot.
template <int D>
constexpr Tensor3<D> left_multiply(const Mat<D>& r, const Tensor3<D>& g) {
    Tensor3<D> out;
    for (int i = 0; i < D; ++i)
        for (int m = 0; m < D; ++m) {
            const double rim = r(i, m);
            for (int j = 0; j < D; ++j)
                for (int k = 0; k < D; ++k) out(i, j, k) += rim * g(m, j, k);
        }
    return out;
}

template <int D>
constexpr Mat<D> sym_part(const Mat<D>& m) {
    Mat<D> s;
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) s(i, j) = 0.5 * (m(i, j) + m(j, i));
    return s;
}

template <int D>
constexpr double trace(const Mat<D>& m) {
    double s = 0.0;
    for (int i = 0; i < D; ++i) s += m(i, i);
    return s;
}

template <int D>
constexpr double det(const Mat<D>& m) {
    if constexpr (D == 2) {
        return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    } else {
        return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
               m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
               m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    }
}

/// Transposed cofactor matrix: adj(M) M = det(M) I.
template <int D>
constexpr Mat<D> adjugate(const Mat<D>& m) {
    Mat<D> r;
    if constexpr (D == 2) {
        r(0, 0) = m(1, 1);
        r(0, 1) = -m(0, 1);
        r(1, 0) = -m(1, 0);
        r(1, 1) = m(0, 0);
    } else {
        r(0, 0) = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
        r(0, 1) = m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2);
        r(0, 2) = m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1);
        r(1, 0) = m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2);
        r(1, 1) = m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0);
        r(1, 2) = m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2);
        r(2, 0) = m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0);
        r(2, 1) = m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1);
        r(2, 2) = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    }
    return r;
}

inline constexpr double kSingularTolerance = 1e-14;

template <int D>
struct InverseDet {
    Mat<D> inverse;
    double determinant;
};

/// Inverse via the adjugate. Throws SingularMatrix when |det| < 1e-14.
template <int D>
InverseDet<D> mat_inv_det(const Mat<D>& m) {
    const double dm = det(m);
    if (!(std::abs(dm) >= kSingularTolerance))
        throw SingularMatrix("matrix determinant " + std::to_string(dm) + " below singularity tolerance");
    return {adjugate(m) / dm, dm};
}

template <int D>
Mat<D> inverse(const Mat<D>& m) {
    return mat_inv_det(m).inverse;
}

}  // namespace gelstep

#pragma once

// Uniform node lattice on (0,1)^d with second-order finite-difference
// stencils, their transposes, and trapezoidal quadrature. Node ids run with
// axis 0 fastest.

#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "gelstep/errors.hpp"
#include "gelstep/tensor.hpp"

namespace gelstep {

using ScalarField = std::vector<double>;
template <int D>
using VectorField = std::vector<Vec<D>>;

enum class DirichletFaces { OneFace, TwoFaces, FullBoundary };

inline DirichletFaces parse_dirichlet_faces(const std::string& s) {
    if (s == "one_face") return DirichletFaces::OneFace;
    if (s == "two_faces") return DirichletFaces::TwoFaces;
    if (s == "full" || s == "full_boundary") return DirichletFaces::FullBoundary;
    throw ValidationError("unknown Dirichlet boundary '" + s + "' (expected one_face, two_faces or full)");
}

inline std::string to_string(DirichletFaces f) {
    switch (f) {
        case DirichletFaces::OneFace: return "one_face";
        case DirichletFaces::TwoFaces: return "two_faces";
        case DirichletFaces::FullBoundary: return "full";
    }
    return "?";
}

/// Compensated (Neumaier) running sum.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// n x n sparse matrix acting along one lattice axis.
struct AxisOperator {
    std::vector<int> row_ptr;
    std::vector<int> col;
    std::vector<double> val;

    AxisOperator transposed(int n) const {
        AxisOperator t;
        t.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
        for (int c : col) ++t.row_ptr[static_cast<std::size_t>(c) + 1];
        for (int i = 0; i < n; ++i) t.row_ptr[i + 1] += t.row_ptr[i];
        t.col.resize(col.size());
        t.val.resize(val.size());
        std::vector<int> fill(t.row_ptr.begin(), t.row_ptr.end() - 1);
        for (int r = 0; r < n; ++r)
            for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
                const int pos = fill[col[k]]++;
                t.col[pos] = r;
                t.val[pos] = val[k];
            }
        return t;
    }
};

namespace detail {

inline void push_row(AxisOperator& op, std::initializer_list<std::pair<int, double>> entries) {
    for (const auto& [c, v] : entries) {
        op.col.push_back(c);
        op.val.push_back(v);
    }
    op.row_ptr.push_back(static_cast<int>(op.col.size()));
}

// Central differences inside, second-order one-sided at both ends.
inline AxisOperator first_derivative(int n, double h) {
    AxisOperator op;
    op.row_ptr.push_back(0);
    const double s = 1.0 / (2.0 * h);
    push_row(op, {{0, -3 * s}, {1, 4 * s}, {2, -s}});
    for (int i = 1; i < n - 1; ++i) push_row(op, {{i - 1, -s}, {i + 1, s}});
    push_row(op, {{n - 3, s}, {n - 2, -4 * s}, {n - 1, 3 * s}});
    return op;
}

// First-order one-sided differences; the missing neighbour at the far end
// is replaced by the other side.
inline AxisOperator forward_difference(int n, double h) {
    AxisOperator op;
    op.row_ptr.push_back(0);
    for (int i = 0; i < n - 1; ++i) push_row(op, {{i, -1 / h}, {i + 1, 1 / h}});
    push_row(op, {{n - 2, -1 / h}, {n - 1, 1 / h}});
    return op;
}

inline AxisOperator backward_difference(int n, double h) {
    AxisOperator op;
    op.row_ptr.push_back(0);
    push_row(op, {{0, -1 / h}, {1, 1 / h}});
    for (int i = 1; i < n; ++i) push_row(op, {{i - 1, -1 / h}, {i, 1 / h}});
    return op;
}

inline AxisOperator second_derivative(int n, double h) {
    AxisOperator op;
    op.row_ptr.push_back(0);
    const double s = 1.0 / (h * h);
    push_row(op, {{0, 2 * s}, {1, -5 * s}, {2, 4 * s}, {3, -s}});
    for (int i = 1; i < n - 1; ++i) push_row(op, {{i - 1, s}, {i, -2 * s}, {i + 1, s}});
    push_row(op, {{n - 4, -s}, {n - 3, 4 * s}, {n - 2, -5 * s}, {n - 1, 2 * s}});
    return op;
}

}  // namespace detail

template <int D>
    requires SpatialDim<D>
class Grid {
public:
    using Index = std::array<int, D>;

    explicit Grid(int n, DirichletFaces faces = DirichletFaces::TwoFaces) : n_(n), faces_(faces) {
        if (n < 5) throw ValidationError("grid needs n >= 5 nodes per axis (got " + std::to_string(n) + ")");
        h_ = 1.0 / (n - 1);
        size_ = 1;
        for (int a = 0; a < D; ++a) {
            stride_[a] = size_;
            size_ *= static_cast<std::size_t>(n);
        }
        weights_.resize(size_);
        dirichlet_mask_.assign(size_, 0);
        for (std::size_t node = 0; node < size_; ++node) {
            const Index ix = multi(node);
            double w = 1.0;
            bool on_dirichlet = false;
            for (int a = 0; a < D; ++a) {
                const bool end = ix[a] == 0 || ix[a] == n - 1;
                w *= end ? 0.5 * h_ : h_;
                if (faces == DirichletFaces::FullBoundary && end) on_dirichlet = true;
            }
            if (faces == DirichletFaces::TwoFaces && (ix[0] == 0 || ix[0] == n - 1)) on_dirichlet = true;
            if (faces == DirichletFaces::OneFace && ix[0] == 0) on_dirichlet = true;
            weights_[node] = w;
            if (on_dirichlet) {
                dirichlet_mask_[node] = 1;
                dirichlet_nodes_.push_back(node);
            }
        }
        d1_ = detail::first_derivative(n, h_);
        d2_ = detail::second_derivative(n, h_);
        d1t_ = d1_.transposed(n);
        d2t_ = d2_.transposed(n);
        sided_[0] = detail::backward_difference(n, h_);
        sided_[1] = detail::forward_difference(n, h_);
        sided_t_[0] = sided_[0].transposed(n);
        sided_t_[1] = sided_[1].transposed(n);
    }

    int n() const { return n_; }
    double h() const { return h_; }
    std::size_t size() const { return size_; }
    DirichletFaces faces() const { return faces_; }
    std::size_t stride(int axis) const { return stride_[axis]; }

    Index multi(std::size_t node) const {
        Index ix;
        for (int a = 0; a < D; ++a) {
            ix[a] = static_cast<int>(node % static_cast<std::size_t>(n_));
            node /= static_cast<std::size_t>(n_);
        }
        return ix;
    }

    std::size_t index(const Index& ix) const {
        std::size_t node = 0;
        for (int a = D - 1; a >= 0; --a) node = node * static_cast<std::size_t>(n_) + static_cast<std::size_t>(ix[a]);
        return node;
    }

    Vec<D> coord(std::size_t node) const {
        const Index ix = multi(node);
        Vec<D> x;
        for (int a = 0; a < D; ++a) x[a] = ix[a] * h_;
        return x;
    }

    double weight(std::size_t node) const { return weights_[node]; }
    const std::vector<double>& weights() const { return weights_; }
    bool is_dirichlet(std::size_t node) const { return dirichlet_mask_[node] != 0; }
    const std::vector<std::size_t>& dirichlet_nodes() const { return dirichlet_nodes_; }

    const AxisOperator& first_derivative_1d() const { return d1_; }
    const AxisOperator& second_derivative_1d() const { return d2_; }

    /// out = (op along `axis`) f
    ScalarField apply(const AxisOperator& op, int axis, const ScalarField& f) const {
        ScalarField out(size_, 0.0);
        const std::size_t st = stride_[axis];
        const std::size_t nn = static_cast<std::size_t>(n_);
        for (std::size_t node = 0; node < size_; ++node) {
            const int r = static_cast<int>((node / st) % nn);
            const std::size_t base = node - static_cast<std::size_t>(r) * st;
            double s = 0.0;
            for (int k = op.row_ptr[r]; k < op.row_ptr[r + 1]; ++k)
                s += op.val[k] * f[base + static_cast<std::size_t>(op.col[k]) * st];
            out[node] = s;
        }
        return out;
    }

    ScalarField d1(const ScalarField& f, int axis) const { return apply(d1_, axis, f); }
    ScalarField d2(const ScalarField& f, int axis) const { return apply(d2_, axis, f); }
    ScalarField d1_transpose(const ScalarField& f, int axis) const { return apply(d1t_, axis, f); }
    ScalarField d2_transpose(const ScalarField& f, int axis) const { return apply(d2t_, axis, f); }
    /// One-sided first difference: forward if `forward`, else backward.
    ScalarField d1_sided(const ScalarField& f, int axis, bool forward) const { return apply(sided_[forward], axis, f); }
    ScalarField d1_sided_transpose(const ScalarField& f, int axis, bool forward) const {
        return apply(sided_t_[forward], axis, f);
    }

    /// Trapezoidal rule.
    double integrate(const ScalarField& f) const {
        CompensatedSum s;
        for (std::size_t i = 0; i < size_; ++i) s.add(weights_[i] * f[i]);
        return s.value();
    }

    double volume() const { return 1.0; }

    /// Quadrature mean (1/|Ω|) ∫ f.
    double mean(const ScalarField& f) const { return integrate(f) / volume(); }

    template <class Fn>
    ScalarField sample_scalar(Fn&& fn) const {
        ScalarField f(size_);
        for (std::size_t i = 0; i < size_; ++i) f[i] = fn(coord(i));
        return f;
    }

    template <class Fn>
    VectorField<D> sample_vector(Fn&& fn) const {
        VectorField<D> f(size_);
        for (std::size_t i = 0; i < size_; ++i) f[i] = fn(coord(i));
        return f;
    }

    VectorField<D> identity_field() const {
        return sample_vector([](const Vec<D>& x) { return x; });
    }

private:
    int n_;
    double h_;
    DirichletFaces faces_;
    std::size_t size_;
    std::array<std::size_t, D> stride_{};
    std::vector<double> weights_;
    std::vector<char> dirichlet_mask_;
    std::vector<std::size_t> dirichlet_nodes_;
    AxisOperator d1_, d2_, d1t_, d2t_;
    std::array<AxisOperator, 2> sided_, sided_t_;
};

// ---------------------------------------------------------------------------
// Component access for vector fields.

template <int D>
ScalarField component(const VectorField<D>& y, int i) {
    ScalarField c(y.size());
    for (std::size_t k = 0; k < y.size(); ++k) c[k] = y[k][i];
    return c;
}

template <int D>
void set_component(VectorField<D>& y, int i, const ScalarField& c) {
    for (std::size_t k = 0; k < y.size(); ++k) y[k][i] = c[k];
}

// ---------------------------------------------------------------------------
// Gradients and Hessians of nodal fields, plus their adjoints under the
// Euclidean nodal pairing: Σ_node s·(op f) = Σ_node f·(opᵀ s).

template <int D>
VectorField<D> grad_field(const Grid<D>& g, const ScalarField& f) {
    VectorField<D> out(g.size());
    for (int a = 0; a < D; ++a) {
        const ScalarField da = g.d1(f, a);
        for (std::size_t k = 0; k < out.size(); ++k) out[k][a] = da[k];
    }
    return out;
}

/// (∇y)_{ij} = ∂_j y_i
template <int D>
std::vector<Mat<D>> grad_field(const Grid<D>& g, const VectorField<D>& y) {
    std::vector<Mat<D>> out(g.size());
    for (int i = 0; i < D; ++i) {
        const ScalarField yi = component(y, i);
        for (int j = 0; j < D; ++j) {
            const ScalarField dj = g.d1(yi, j);
            for (std::size_t k = 0; k < out.size(); ++k) out[k](i, j) = dj[k];
        }
    }
    return out;
}

template <int D>
ScalarField grad_adjoint(const Grid<D>& g, const VectorField<D>& s) {
    ScalarField out(g.size(), 0.0);
    for (int a = 0; a < D; ++a) {
        const ScalarField r = g.d1_transpose(component(s, a), a);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += r[k];
    }
    return out;
}

template <int D>
VectorField<D> grad_adjoint(const Grid<D>& g, const std::vector<Mat<D>>& s) {
    VectorField<D> out(g.size());
    ScalarField sij(g.size());
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) {
            for (std::size_t k = 0; k < sij.size(); ++k) sij[k] = s[k](i, j);
            const ScalarField r = g.d1_transpose(sij, j);
            for (std::size_t k = 0; k < out.size(); ++k) out[k][i] += r[k];
        }
    return out;
}

/// All 2^D one-sided gradients per node. Bit a of the combination index
/// selects the forward (1) or backward (0) difference along axis a. Unlike
/// the central gradient, each of these sees odd-even lattice modes.
template <int D>
using SidedGradients = std::vector<std::array<Vec<D>, (1 << D)>>;

template <int D>
SidedGradients<D> sided_gradients(const Grid<D>& g, const ScalarField& f) {
    std::array<std::array<ScalarField, 2>, D> parts;
    for (int a = 0; a < D; ++a)
        for (int s = 0; s < 2; ++s) parts[a][s] = g.d1_sided(f, a, s == 1);
    SidedGradients<D> out(g.size());
    for (std::size_t k = 0; k < out.size(); ++k)
        for (int c = 0; c < (1 << D); ++c)
            for (int a = 0; a < D; ++a) out[k][c][a] = parts[a][(c >> a) & 1][k];
    return out;
}

template <int D>
ScalarField sided_gradient_adjoint(const Grid<D>& g, const SidedGradients<D>& s) {
    ScalarField out(g.size(), 0.0);
    ScalarField buf(g.size());
    for (int a = 0; a < D; ++a)
        for (int side = 0; side < 2; ++side) {
            for (std::size_t k = 0; k < buf.size(); ++k) {
                double v = 0.0;
                for (int c = 0; c < (1 << D); ++c)
                    if (((c >> a) & 1) == side) v += s[k][c][a];
                buf[k] = v;
            }
            const ScalarField r = g.d1_sided_transpose(buf, a, side == 1);
            for (std::size_t k = 0; k < out.size(); ++k) out[k] += r[k];
        }
    return out;
}

/// Symmetric nodal Hessian: pure second derivatives on the diagonal, products
/// of first-derivative stencils off it.
template <int D>
std::vector<Mat<D>> hess_field(const Grid<D>& g, const ScalarField& f) {
    std::vector<Mat<D>> out(g.size());
    std::array<ScalarField, D> first;
    for (int a = 0; a < D; ++a) first[a] = g.d1(f, a);
    for (int j = 0; j < D; ++j) {
        const ScalarField djj = g.d2(f, j);
        for (std::size_t k = 0; k < out.size(); ++k) out[k](j, j) = djj[k];
        for (int l = j + 1; l < D; ++l) {
            const ScalarField djl = g.d1(first[l], j);
            for (std::size_t k = 0; k < out.size(); ++k) {
                out[k](j, l) = djl[k];
                out[k](l, j) = djl[k];
            }
        }
    }
    return out;
}

/// (∇²y)_{ijk} = ∂_j ∂_k y_i
template <int D>
std::vector<Tensor3<D>> hess_field(const Grid<D>& g, const VectorField<D>& y) {
    std::vector<Tensor3<D>> out(g.size());
    for (int i = 0; i < D; ++i) {
        const auto hi = hess_field(g, component(y, i));
        for (std::size_t k = 0; k < out.size(); ++k)
            for (int j = 0; j < D; ++j)
                for (int l = 0; l < D; ++l) out[k](i, j, l) = hi[k](j, l);
    }
    return out;
}

template <int D>
ScalarField hess_adjoint(const Grid<D>& g, const std::vector<Mat<D>>& s) {
    ScalarField out(g.size(), 0.0);
    ScalarField buf(g.size());
    for (int j = 0; j < D; ++j) {
        for (std::size_t k = 0; k < buf.size(); ++k) buf[k] = s[k](j, j);
        const ScalarField r = g.d2_transpose(buf, j);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += r[k];
        for (int l = j + 1; l < D; ++l) {
            for (std::size_t k = 0; k < buf.size(); ++k) buf[k] = s[k](j, l) + s[k](l, j);
            const ScalarField r2 = g.d1_transpose(g.d1_transpose(buf, j), l);
            for (std::size_t k = 0; k < out.size(); ++k) out[k] += r2[k];
        }
    }
    return out;
}

template <int D>
VectorField<D> hess_adjoint(const Grid<D>& g, const std::vector<Tensor3<D>>& s) {
    VectorField<D> out(g.size());
    std::vector<Mat<D>> si(g.size());
    for (int i = 0; i < D; ++i) {
        for (std::size_t k = 0; k < si.size(); ++k)
            for (int j = 0; j < D; ++j)
                for (int l = 0; l < D; ++l) si[k](j, l) = s[k](i, j, l);
        const ScalarField r = hess_adjoint(g, si);
        for (std::size_t k = 0; k < out.size(); ++k) out[k][i] = r[k];
    }
    return out;
}

}  // namespace gelstep

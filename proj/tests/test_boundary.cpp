#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "gelstep/boundary.hpp"
#include "gelstep/fields.hpp"
#include "oracles.hpp"

using namespace gelstep;
using std::numbers::pi;

namespace {

PotentialParams params() {
    PotentialParams p;
    p.gamma = 0.05;
    return p;
}

VectorField<2> wavy_state(const Grid<2>& g, std::uint64_t seed) {
    auto y = g.identity_field();
    const auto u = smooth_random_displacement(g, seed, 2, 0.08);
    for (std::size_t k = 0; k < g.size(); ++k) y[k] += u[k];
    return y;
}

}  // namespace

TEST(Boundary, IdentityFamilyIsTransparent) {
    const Grid<2> g(9);
    const auto fam = DirichletFamily<2>::identity();
    const auto y = wavy_state(g, 1);
    const auto b = compose_deformation(0.3, y, fam, g);
    const auto gy = grad_field(g, y);
    const auto hy = hess_field(g, y);
    for (std::size_t k = 0; k < g.size(); ++k) {
        EXPECT_EQ(norm(b.v[k] - y[k]), 0.0);
        EXPECT_EQ(norm(b.f[k] - gy[k]), 0.0);
        EXPECT_EQ(norm(b.grad_f[k] - hy[k]), 0.0);
        EXPECT_EQ(norm(b.l[k]), 0.0);
    }
    const auto pw = external_power_fields(0.3, y, fam, g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        EXPECT_EQ(norm(pw.l[k]), 0.0);
        EXPECT_EQ(norm(pw.dt_grad_f[k]), 0.0);
    }
}

TEST(Boundary, AffineStretchClosedForms) {
    const Grid<2> g(9);
    const double eps = 0.4, t = 0.25;
    const auto fam = DirichletFamily<2>::affine(Mat<2>::identity(), eps * Mat<2>::identity(), {}, {}, 1.0);
    const auto id = g.identity_field();
    const auto b = compose_deformation(t, id, fam, g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        EXPECT_LT(norm(b.f[k] - (1 + eps * t) * Mat<2>::identity()), 1e-12);
        EXPECT_LT(norm(b.grad_f[k]), 1e-9);
        EXPECT_LT(norm(b.l[k] - eps / (1 + eps * t) * Mat<2>::identity()), 1e-12);
    }
    const auto y = wavy_state(g, 2);
    const auto pw = external_power_fields(t, y, fam, g);
    const auto hy = hess_field(g, y);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_LT(norm(pw.dt_grad_f[k] - eps * hy[k]), 1e-10);
}

TEST(Boundary, BundleDeterminantMultiplicative) {
    const Grid<2> g(9);
    const auto fam = DirichletFamily<2>::gentle_bend(0.3, 1.0, 1.0);
    const auto y = wavy_state(g, 3);
    const auto b = compose_deformation(0.7, y, fam, g);
    const auto gy = grad_field(g, y);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double ja = det(fam.jet(0.7, y[k]).a);
        EXPECT_NEAR(det(b.f[k]), ja * det(gy[k]), 1e-12);
        EXPECT_GT(det(b.f[k]), 0.0);
    }
    // v = vD(t, x) on Γ_D for y = id there.
    for (std::size_t k : g.dirichlet_nodes()) EXPECT_LT(norm(b.v[k] - fam.jet(0.7, g.coord(k)).v), 1e-15);
}

TEST(Boundary, GentleBendBundleConsistentWithStencils) {
    std::vector<double> hs, ef, eg;
    for (int n : {17, 33, 65}) {
        const Grid<2> g(n);
        const auto fam = DirichletFamily<2>::gentle_bend(0.25, 1.0, 1.0);
        const auto y = g.sample_vector([](const Vec<2>& x) {
            return Vec<2>{{x[0] + 0.05 * std::sin(pi * x[0]) * std::cos(pi * x[1]), x[1] + 0.03 * std::sin(pi * x[0])}};
        });
        const auto b = compose_deformation(0.8, y, fam, g);
        const auto fv = grad_field(g, b.v);
        const auto hv = hess_field(g, b.v);
        double e1 = 0, e2 = 0;
        for (std::size_t k = 0; k < g.size(); ++k) {
            e1 = std::max(e1, norm(fv[k] - b.f[k]));
            e2 = std::max(e2, norm(hv[k] - b.grad_f[k]));
        }
        hs.push_back(g.h());
        ef.push_back(e1);
        eg.push_back(e2);
    }
    EXPECT_GE(oracle::observed_order(hs, ef), 1.8);
    EXPECT_GE(oracle::observed_order(hs, eg), 1.8);
}

TEST(Boundary, RotatedFamily) {
    std::mt19937_64 rng(5);
    const auto r = random_rotation<2>(rng);
    const auto base = DirichletFamily<2>::gentle_bend(0.2, 1.0, 0.5);
    const auto rot = base.rotated(r);
    const Vec<2> y{{0.3, 0.7}};
    const auto j0 = base.jet(0.2, y), j1 = rot.jet(0.2, y);
    EXPECT_LT(norm(j1.a - r * j0.a), 1e-15);
    EXPECT_LT(norm(j1.b - left_multiply(r, j0.b)), 1e-15);
    EXPECT_LT(norm(j1.dv - r * j0.dv), 1e-15);
}

TEST(Boundary, ConstructionRejectsDegenerateFamily) {
    Mat<2> a1;
    a1(0, 0) = -2.0;
    EXPECT_THROW(DirichletFamily<2>::affine(Mat<2>::identity(), a1, {}, {}, 1.0), ValidationError);
    EXPECT_THROW(DirichletFamily<2>::gentle_bend(0.2, 1.0, 0.0), ValidationError);
}

TEST(Boundary, SmallnessCheck) {
    const auto pp = params();
    const Grid<2> g(17);
    const auto nodes = g.identity_field();
    Mat<2> a1;
    a1(0, 0) = 0.3;
    const auto aff = DirichletFamily<2>::affine(Mat<2>::identity(), a1, {}, {}, 1.0);
    const auto ra = smallness_check(aff, pp, 1.0, nodes);
    EXPECT_EQ(ra.lhs, 0.0);
    EXPECT_TRUE(ra.pass());
    EXPECT_EQ(smallness_check(DirichletFamily<2>::gentle_bend(0.0, 1.0, 1.0), pp, 1.0, nodes).lhs, 0.0);

    const double kappa = 0.1;
    const auto bend = DirichletFamily<2>::gentle_bend(kappa, 1.0, 1.0);
    const auto rb = smallness_check(bend, pp, 1.0, nodes);
    const double analytic = pp.gamma / pp.alpha * std::pow(bend.analytic_hessian_sup(), pp.beta);
    EXPECT_NEAR(bend.analytic_hessian_sup(), kappa * pi * pi, 1e-14);
    // The node y₂ = 1/2 realises the supremum at t = T.
    EXPECT_NEAR(rb.lhs, analytic, 1e-12 * analytic);
    EXPECT_EQ(rb.pass(), analytic < 0.1);

    const auto big = DirichletFamily<2>::gentle_bend(2.0, 1.0, 1.0);
    EXPECT_FALSE(smallness_check(big, pp, 1.0, nodes).pass());
}

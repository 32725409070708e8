#include <ppgi/manifold.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/special_functions/bessel.hpp>

using namespace ppgi;
using namespace ppgi::manifold;

namespace {

UnitVec3 uv(const Vec3& v) { return UnitVec3::normalize(v); }

std::vector<UnitVec3> to_units(const std::vector<Vec3>& v)
{
    std::vector<UnitVec3> out;
    for (const auto& x : v)
        out.push_back(uv(x));
    return out;
}

} // namespace

TEST(Geodesic, BasicDistances)
{
    const UnitVec3 a(0, 0, 1), b(1, 0, 0);
    EXPECT_EQ(geodesic_dist(a, a), 0.0);
    EXPECT_NEAR(geodesic_dist(a, -a), pi, 1e-15);
    EXPECT_NEAR(geodesic_dist(a, b), pi / 2, 1e-15);
}

TEST(Geodesic, MatchesArccosAndIsAMetric)
{
    SplitMix64 rng(7);
    for (int i = 0; i < 1000; ++i) {
        const auto a = uv(oracle::random_unit(rng)), b = uv(oracle::random_unit(rng)), c = uv(oracle::random_unit(rng));
        EXPECT_NEAR(geodesic_dist(a, b), std::acos(std::clamp(a.dot(b), -1.0, 1.0)), 1e-7);
        EXPECT_EQ(geodesic_dist(a, b), geodesic_dist(b, a));
        EXPECT_LE(geodesic_dist(a, c), geodesic_dist(a, b) + geodesic_dist(b, c) + 1e-12);
    }
}

TEST(SphereLog, IdentityAndQuarterCircle)
{
    const UnitVec3 b(0, 0, 1);
    EXPECT_EQ(sphere_log(b, b).norm(), 0.0);
    const Vec3 t = sphere_log(b, UnitVec3(1, 0, 0));
    EXPECT_NEAR(t.norm(), pi / 2, 1e-15);
    EXPECT_NEAR((t / t.norm() - Vec3(1, 0, 0)).norm(), 0.0, 1e-15);
}

TEST(SphereLog, AntipodalIsCutLocus)
{
    const UnitVec3 b(0.3, -0.2, 0.9);
    try {
        sphere_log(b, -b);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CutLocus);
    }
}

TEST(SphereExp, ZeroTangentAndQuarterCircle)
{
    const UnitVec3 b(0, 0, 1);
    EXPECT_EQ((sphere_exp(b, Vec3::Zero()).vec() - b.vec()).norm(), 0.0);
    EXPECT_NEAR((sphere_exp(b, (pi / 2) * Vec3(1, 0, 0)).vec() - Vec3(1, 0, 0)).norm(), 0.0, 1e-15);
}

TEST(SphereExp, RejectsNonTangentVector)
{
    EXPECT_THROW(sphere_exp(UnitVec3(0, 0, 1), Vec3(0.1, 0, 1e-6)), Error);
}

TEST(SphereLogExp, RoundTripProperty)
{
    SplitMix64 rng(11);
    for (int i = 0; i < 5000; ++i) {
        const auto a = uv(oracle::random_unit(rng)), b = uv(oracle::random_unit(rng));
        if (a.dot(b) < -1.0 + 1e-6)
            continue;
        const Vec3 t = sphere_log(a, b);
        EXPECT_NEAR(t.norm(), geodesic_dist(a, b), 1e-12);
        EXPECT_LT((sphere_exp(a, t).vec() - b.vec()).norm(), 1e-9);
    }
}

TEST(Karcher, SinglePoint)
{
    const UnitVec3 p(0.1, 0.7, 0.2);
    const std::vector<UnitVec3> pts{p};
    const auto r = karcher_mean(pts);
    EXPECT_LT((r.mean.vec() - p.vec()).norm(), 1e-15);
}

TEST(Karcher, TwoPointsGiveMidpoint)
{
    SplitMix64 rng(3);
    for (int i = 0; i < 100; ++i) {
        const auto a = uv(oracle::random_unit(rng)), b = uv(oracle::random_unit(rng));
        if (a.dot(b) < -0.9)
            continue;
        const std::vector<UnitVec3> pts{a, b};
        const auto m = karcher_mean(pts).mean;
        EXPECT_NEAR(geodesic_dist(m, a), geodesic_dist(m, b), 1e-9);
        EXPECT_NEAR(geodesic_dist(m, a), geodesic_dist(a, b) / 2, 1e-9);
    }
}

TEST(Karcher, MatchesGridSearchInCap)
{
    SplitMix64 rng(2024);
    const double cap = 30.0 * pi / 180.0;
    for (int set = 0; set < 5; ++set) {
        const Vec3 c = oracle::random_unit(rng);
        std::vector<Vec3> pts;
        for (int i = 0; i < 10; ++i)
            pts.push_back(oracle::random_in_cap(rng, c, cap));
        const auto res = karcher_mean(to_units(pts));
        EXPECT_LT(res.grad_norm, 1e-10);
        EXPECT_TRUE(res.hemisphere_ok);
        const Vec3 g = oracle::karcher_grid(pts, c, cap, 0.1 * pi / 180.0);
        EXPECT_LT(std::acos(std::clamp(g.dot(res.mean.vec()), -1.0, 1.0)), 2e-3);
    }
}

TEST(Karcher, RotationEquivarianceAndPermutationInvariance)
{
    SplitMix64 rng(99);
    for (int set = 0; set < 50; ++set) {
        const Vec3 c = oracle::random_unit(rng);
        std::vector<Vec3> pts;
        for (int i = 0; i < 12; ++i)
            pts.push_back(oracle::random_in_cap(rng, c, 1.0));
        const Mat3 R = oracle::random_rotation(rng);
        std::vector<Vec3> rotated;
        for (const auto& p : pts)
            rotated.push_back(R * p);
        const Vec3 m = karcher_mean(to_units(pts)).mean.vec();
        const Vec3 mr = karcher_mean(to_units(rotated)).mean.vec();
        EXPECT_LT((R * m - mr).norm(), 1e-8);

        std::vector<Vec3> shuffled(pts.rbegin(), pts.rend());
        std::swap(shuffled[0], shuffled[5]);
        EXPECT_LT((karcher_mean(to_units(shuffled)).mean.vec() - m).norm(), 1e-12);
    }
}

TEST(Karcher, OutsideHemisphereIsFlagged)
{
    const std::vector<UnitVec3> pts{UnitVec3(1, 0, 0), uv(Vec3(-0.9, 0.1, 0)), uv(Vec3(-0.9, -0.1, 0))};
    try {
        const auto r = karcher_mean(pts);
        EXPECT_FALSE(r.hemisphere_ok);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonConvergence);
    }
}

TEST(Karcher, NonConvergenceReportsGradient)
{
    SplitMix64 rng(5);
    std::vector<UnitVec3> pts;
    for (int i = 0; i < 10; ++i)
        pts.push_back(uv(oracle::random_in_cap(rng, Vec3::UnitZ(), 1.2)));
    try {
        karcher_mean(pts, 1e-30, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonConvergence);
        EXPECT_NE(std::string(e.what()).find("gradient norm"), std::string::npos);
    }
}

TEST(Spherical, Conventions)
{
    auto s = to_spherical(UnitVec3(0, 0, 1));
    EXPECT_EQ(s.theta, 0.0);
    EXPECT_EQ(s.phi, 0.0);
    s = to_spherical(UnitVec3(0, 0, -1));
    EXPECT_NEAR(s.theta, pi, 1e-15);
    EXPECT_EQ(s.phi, 0.0);
    s = to_spherical(UnitVec3(1, 0, 0));
    EXPECT_NEAR(s.theta, pi / 2, 1e-15);
    EXPECT_EQ(s.phi, 0.0);
    s = to_spherical(uv(Vec3(1, 1, 1)));
    EXPECT_NEAR(s.theta, std::acos(1.0 / std::sqrt(3.0)), 1e-15);
    EXPECT_NEAR(s.phi, pi / 4, 1e-15);
    s = to_spherical(UnitVec3(-1, -0.0, 0));
    EXPECT_EQ(s.phi, pi);
}

TEST(Spherical, RoundTripOnOpenDomain)
{
    SplitMix64 rng(17);
    for (int i = 0; i < 2000; ++i) {
        SphericalCoord c{rng.uniform(1e-3, pi - 1e-3), rng.uniform(-pi + 1e-9, pi)};
        const auto back = to_spherical(from_spherical(c));
        EXPECT_NEAR(back.theta, c.theta, 1e-9);
        EXPECT_NEAR(back.phi, c.phi, 1e-9);
    }
}

TEST(Vmf, NormalizerMatchesClosedFormAndBesselIdentity)
{
    for (double k : {0.5, 1.0, 5.0}) {
        EXPECT_NEAR(vmf_normalizer(k), k / (4 * pi * std::sinh(k)), 1e-10);
        // c_p(k) = k^{p/2-1} / ((2 pi)^{p/2} I_{p/2-1}(k)) with p = 3.
        const double bessel = boost::math::cyl_bessel_i(0.5, k);
        const double c3 = std::sqrt(k) / (std::pow(2 * pi, 1.5) * bessel);
        EXPECT_NEAR(vmf_normalizer(k), c3, 1e-10);
    }
}

TEST(Vmf, UniformLimitAndLargeKappa)
{
    const VmfParams p{UnitVec3(0, 0, 1), 0.0};
    EXPECT_NEAR(vmf_pdf(UnitVec3(0.3, 0.1, 0.5), p), 1.0 / (4 * pi), 1e-15);
    EXPECT_NEAR(vmf_normalizer(1e-9), 1.0 / (4 * pi), 1e-15);
    const VmfParams big{UnitVec3(0, 0, 1), 1000.0};
    const double at_mu = vmf_pdf(UnitVec3(0, 0, 1), big);
    EXPECT_TRUE(std::isfinite(at_mu));
    EXPECT_NEAR(at_mu, 1000.0 / (2 * pi), 1e-6 * at_mu);
    EXPECT_THROW(vmf_normalizer(-1.0), Error);
}

TEST(Vmf, PdfIntegratesToOneAndPeaksAtMu)
{
    SplitMix64 rng(4);
    const VmfParams p{uv(Vec3(0.2, -0.5, 0.8)), 2.0};
    double s = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i)
        s += vmf_pdf(uv(oracle::random_unit(rng)), p);
    EXPECT_NEAR(4 * pi * s / n, 1.0, 0.01);
    const double peak = vmf_pdf(p.mu, p);
    for (int i = 0; i < 1000; ++i)
        EXPECT_LE(vmf_pdf(uv(oracle::random_unit(rng)), p), peak);
}

TEST(VmfFit, RecoversSamplerParameters)
{
    SplitMix64 rng(123);
    const Vec3 mu = Vec3(0.3, 0.4, -0.6).normalized();
    std::vector<UnitVec3> pts;
    for (int i = 0; i < 10000; ++i)
        pts.push_back(uv(oracle::sample_vmf(rng, mu, 10.0)));
    const auto fit = vmf_fit(pts);
    EXPECT_TRUE(fit.approximate);
    EXPECT_LT(std::acos(fit.params.mu.dot(UnitVec3::normalize(mu))), 2.0 * pi / 180.0);
    EXPECT_NEAR(fit.params.kappa, 10.0, 1.5);
}

TEST(VmfFit, DegenerateCases)
{
    const std::vector<UnitVec3> anti{UnitVec3(1, 0, 0), UnitVec3(-1, 0, 0)};
    EXPECT_EQ(vmf_fit(anti).params.kappa, 0.0);
    const std::vector<UnitVec3> same{UnitVec3(0, 1, 0), UnitVec3(0, 1, 0), UnitVec3(0, 1, 0)};
    EXPECT_TRUE(std::isinf(vmf_fit(same).params.kappa));
    const std::vector<UnitVec3> one{UnitVec3(0, 1, 0)};
    EXPECT_THROW(vmf_fit(one), Error);
}

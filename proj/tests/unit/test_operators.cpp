#include <ppgi/eval.hpp>
#include <ppgi/operators.hpp>
#include <ppgi/synth.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace ppgi;
using namespace ppgi::operators;

namespace {

/// Replays a fixed list of pixel sets.
struct VectorSource {
    std::vector<PixelSet> frames;
    std::size_t pos = 0;
    std::optional<PixelSet> next()
    {
        if (pos >= frames.size())
            return std::nullopt;
        return frames[pos++];
    }
};

VectorSource render(const synth::SynthConfig& cfg)
{
    VectorSource src;
    synth::SynthScene scene(cfg);
    while (auto ps = scene.next())
        src.frames.push_back(std::move(*ps));
    return src;
}

RgbTrace mean_trace(const VectorSource& src, double fs)
{
    RgbTrace tr;
    tr.fs = fs;
    for (const auto& ps : src.frames) {
        tr.samples.push_back(*features::pool_mean(ps));
        tr.valid.push_back(true);
    }
    return tr;
}

RgbTrace constant_trace(std::size_t n, const Vec3& v)
{
    RgbTrace tr;
    tr.fs = 30;
    tr.samples.assign(n, v);
    tr.valid.assign(n, true);
    return tr;
}

double median_bpm(const std::vector<double>& x, double fs)
{
    const auto hr = spectral::peak_hr(spectral::stft(spectral::bandpass(x, fs), fs));
    std::vector<double> v;
    for (std::size_t i = 0; i < hr.size(); ++i)
        if (hr.valid[i])
            v.push_back(hr.bpm[i]);
    if (v.empty())
        return 0.0;
    std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
    return v[v.size() / 2];
}

double max_abs(const std::vector<double>& x)
{
    double m = 0.0;
    for (double v : x)
        m = std::max(m, std::abs(v));
    return m;
}

Eigen::Matrix3d symmetric_eigen_oracle(const Mat3& c, Vec3& evals)
{
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(c);
    evals = es.eigenvalues().reverse();
    return es.eigenvectors().rowwise().reverse();
}

} // namespace

TEST(Windowing, StartsCoverTheTrace)
{
    EXPECT_EQ(window_starts(10, 4, 2), (std::vector<std::size_t>{0, 2, 4, 6}));
    EXPECT_EQ(window_starts(11, 4, 2), (std::vector<std::size_t>{0, 2, 4, 6, 7}));
    EXPECT_TRUE(window_starts(3, 4, 2).empty());
}

TEST(Windowing, BlendWeightsSumToOneAtHalfHop)
{
    const auto w = blend_window(64);
    for (std::size_t i = 0; i < 32; ++i)
        EXPECT_NEAR(w[i] + w[i + 32], 1.0, 1e-14);
    for (double v : w)
        EXPECT_GT(v, 0.0);
}

TEST(Windowing, OverlapAddReproducesAConstantSegment)
{
    const auto y = overlap_add(101, 20, [](std::size_t) { return std::vector<double>(20, 3.5); });
    for (double v : y)
        EXPECT_NEAR(v, 3.5, 1e-14);
}

TEST(Green, MeanRemovedGreenChannel)
{
    RgbTrace tr;
    tr.fs = 30;
    for (int k = 0; k < 10; ++k)
        tr.samples.emplace_back(0.9, 0.1 * k, 0.3);
    tr.valid.assign(10, true);
    const auto g = op_green(tr);
    ASSERT_EQ(g.size(), 10u);
    for (int k = 0; k < 10; ++k)
        EXPECT_NEAR(g.samples[static_cast<std::size_t>(k)], 0.1 * k - 0.45, 1e-14);
    EXPECT_EQ(g.op, Operator::Green);
}

TEST(Green, ConstantGivesZero)
{
    const auto g = op_green(constant_trace(50, Vec3(0.4, 0.5, 0.6)));
    EXPECT_LT(max_abs(g.samples), 1e-15);
}

TEST(Projection, AlgebraOnRandomWindows)
{
    SplitMix64 rng(101);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<Vec3> w(64);
        const Mat3 mix = oracle::random_rotation(rng) * Vec3(rng.uniform(0.5, 3), rng.uniform(0.1, 1), 0.05).asDiagonal();
        for (auto& x : w)
            x = Vec3(0.5, 0.4, 0.3) + mix * Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian());
        const auto op = build_projection(w);
        ASSERT_FALSE(op.degenerate);
        const Mat3& P = op.P;
        EXPECT_LT((P * P - P).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT((P.transpose() - P).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_NEAR(P.trace(), 2.0, 1e-10);
        EXPECT_LT((P * op.V).norm(), 1e-10);
        EXPECT_NEAR(op.V.norm(), 1.0, 1e-12);

        Vec3 raw_evals;
        symmetric_eigen_oracle(window_covariance(w), raw_evals);
        std::vector<Vec3> projected;
        for (const auto& x : w)
            projected.push_back(P * x);
        Vec3 proj_evals;
        symmetric_eigen_oracle(window_covariance(projected), proj_evals);
        EXPECT_LE(proj_evals(0), raw_evals(1) + 1e-9);
    }
}

TEST(Projection, RankOneDataIsAnnihilated)
{
    const Vec3 dir = Vec3(1, -2, 0.5).normalized();
    std::vector<Vec3> w;
    for (int k = 0; k < 40; ++k)
        w.push_back(Vec3(0.2, 0.3, 0.4) + std::sin(0.3 * k) * dir);
    const auto op = build_projection(w);
    EXPECT_LT(std::min((op.V - dir).norm(), (op.V + dir).norm()), 1e-12);
    for (const auto& x : w)
        EXPECT_LT((op.P * (x - w[0])).norm(), 1e-12);
}

TEST(Projection, ConstantWindowIsDegenerate)
{
    const std::vector<Vec3> w(16, Vec3(0.3, 0.3, 0.3));
    const auto op = build_projection(w);
    EXPECT_TRUE(op.degenerate);
    EXPECT_EQ(op.P, Mat3::Identity());
    EXPECT_THROW(build_projection(std::vector<Vec3>(2, Vec3::Ones())), Error);
}

TEST(Projection, FirstDifferenceCovarianceOracle)
{
    std::vector<Vec3> w{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 2, 0), Vec3(1, 2, 3)};
    // differences e1, 2 e2, 3 e3 with mean (1/3, 2/3, 1)
    Mat3 expected = Mat3::Zero();
    const Vec3 m(1.0 / 3, 2.0 / 3, 1.0);
    for (const Vec3& d : {Vec3(1, 0, 0), Vec3(0, 2, 0), Vec3(0, 0, 3)})
        expected += (d - m) * (d - m).transpose();
    expected /= 3.0;
    EXPECT_LT((window_covariance(w, CovarianceKind::FirstDifference) - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Projection, Deterministic)
{
    SplitMix64 rng(4);
    std::vector<Vec3> w(32);
    for (auto& x : w)
        x = Vec3(rng.uniform(), rng.uniform(), rng.uniform());
    const auto a = build_projection(w);
    const auto b = build_projection(w);
    EXPECT_EQ(a.P, b.P);
    EXPECT_EQ(a.V, b.V);
}

TEST(Lgi, SuppressesDominantInBandMotion)
{
    // Strong in-band motion along one colour direction, weak pulse orthogonal to it.
    const double fs = 30.0;
    const Vec3 motion = Vec3(0.6, 0.64, 0.48).normalized();
    const Vec3 pulse = motion.unitOrthogonal();
    SplitMix64 rng(9);
    RgbTrace tr;
    tr.fs = fs;
    for (int k = 0; k < 1800; ++k) {
        const double t = k / fs;
        tr.samples.push_back(Vec3(0.6, 0.45, 0.35) + 0.02 * std::sin(2 * pi * 1.7 * t) * motion +
                             0.002 * std::sin(2 * pi * 1.1 * t) * pulse +
                             1e-4 * Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian()));
        tr.valid.push_back(true);
    }
    const auto green = op_green(tr);
    LgiOptions opt;
    opt.channel = LgiChannel::SnrBest;
    const auto lgi = op_lgi(tr, opt);
    ASSERT_EQ(lgi.size(), tr.size());
    const double snr_g = eval::inband_snr_db(green.samples, fs, 1.1);
    const double snr_l = eval::inband_snr_db(lgi.samples, fs, 1.1);
    EXPECT_GE(snr_l, snr_g + 10.0) << snr_g << " " << snr_l;
    EXPECT_NEAR(median_bpm(lgi.samples, fs), 66.0, 1.0);
}

TEST(Lgi, ConstantTraceGivesZero)
{
    std::vector<ProjectionOp> ops;
    const auto out = op_lgi(constant_trace(600, Vec3(0.5, 0.4, 0.3)), {}, &ops);
    EXPECT_LT(max_abs(out.samples), 1e-13);
    ASSERT_FALSE(ops.empty());
    for (const auto& op : ops)
        EXPECT_TRUE(op.degenerate);
}

TEST(Lgi, RejectsShortTraceAndTinyWindow)
{
    EXPECT_THROW(op_lgi(constant_trace(100, Vec3::Ones())), Error);
    LgiOptions opt;
    opt.window = 8;
    EXPECT_THROW(op_lgi(constant_trace(600, Vec3::Ones()), opt), Error);
}

TEST(Pos, ConstantTraceGivesZero)
{
    EXPECT_LT(max_abs(op_pos(constant_trace(300, Vec3(0.5, 0.4, 0.3))).samples), 1e-15);
}

TEST(Pos, CancelsGlobalIntensityFlicker)
{
    RgbTrace tr;
    tr.fs = 30;
    for (int k = 0; k < 900; ++k) {
        const double g = 1.0 + 0.2 * std::sin(2 * pi * 1.3 * k / 30.0);
        tr.samples.push_back(g * Vec3(0.62, 0.41, 0.3));
        tr.valid.push_back(true);
    }
    EXPECT_LT(max_abs(op_pos(tr).samples), 1e-6);
}

TEST(Pos, RecoversSyntheticHeartRate)
{
    synth::SynthConfig cfg;
    cfg.duration_s = 40;
    cfg.pixel_noise_sigma = 0.01;
    const auto src = render(cfg);
    const auto pos = op_pos(mean_trace(src, cfg.fs));
    EXPECT_NEAR(median_bpm(pos.samples, cfg.fs), 66.0, 2.0);
}

TEST(Ssr, EigenframeContract)
{
    SplitMix64 rng(5);
    PixelSet ps;
    for (int i = 0; i < 300; ++i)
        ps.pixels.emplace_back(rng.uniform(0.3, 0.9), rng.uniform(0.2, 0.6), rng.uniform(0.1, 0.5));
    const auto ef = ssr_eigenframe(ps);
    ASSERT_TRUE(ef.valid);
    const Mat3 c = correlation_matrix(ps);
    EXPECT_LT((ef.U.transpose() * ef.U - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((c * ef.U - ef.U * ef.lambda.asDiagonal()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GE(ef.lambda(0), ef.lambda(1));
    EXPECT_GE(ef.lambda(1), ef.lambda(2));
    // correlation oracle
    Mat3 o = Mat3::Zero();
    for (const auto& p : ps.pixels)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                o(a, b) += p[a] * p[b] / 300.0;
    EXPECT_LT((o - c).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Ssr, IdenticalPixelsGiveZeroOutput)
{
    VectorSource src;
    for (int k = 0; k < 90; ++k) {
        PixelSet ps;
        ps.pixels.assign(200, Vec3(0.6, 0.4, 0.3) * (1.0 + 0.01 * std::sin(k)));
        src.frames.push_back(ps);
    }
    const auto out = op_ssr(src, 30.0);
    ASSERT_EQ(out.size(), 90u);
    EXPECT_LT(max_abs(out.samples), 1e-15);
}

TEST(Ssr, RecoversSyntheticHeartRate)
{
    synth::SynthConfig cfg;
    cfg.duration_s = 40;
    cfg.pixel_noise_sigma = 0.01;
    cfg.tone_spread = 0.05;
    auto src = render(cfg);
    const auto out = op_ssr(src, cfg.fs);
    ASSERT_EQ(out.size(), src.frames.size());
    EXPECT_NEAR(median_bpm(out.samples, cfg.fs), 66.0, 2.0);
}

TEST(Sph, GainInvariantAndOnFrequency)
{
    synth::SynthConfig cfg;
    cfg.duration_s = 40;
    auto still = render(cfg);
    cfg.motion_gain_amp = 0.2;
    auto moving = render(cfg);
    const auto a = op_sph(still, cfg.fs);
    const auto b = op_sph(moving, cfg.fs);
    ASSERT_EQ(a.pulse.size(), b.pulse.size());
    double diff = 0.0;
    for (std::size_t k = 0; k < a.pulse.size(); ++k)
        diff = std::max(diff, std::abs(a.pulse.samples[k] - b.pulse.samples[k]));
    EXPECT_LE(diff, 1e-12);
    EXPECT_NEAR(median_bpm(b.pulse.samples, cfg.fs), 66.0, 1.0);
    EXPECT_NEAR(oracle::dft_peak_hz(b.pulse.samples, cfg.fs, 0.5, 2.5), 1.1, 0.02);
}

TEST(Sph, StaticSceneGivesZero)
{
    synth::SynthConfig cfg;
    cfg.duration_s = 10;
    cfg.pulse_amp = 0.0;
    cfg.motion_gain_amp = 0.3;
    auto src = render(cfg);
    EXPECT_LT(max_abs(op_sph(src, cfg.fs).pulse.samples), 1e-12);
}

TEST(Sph, EmptyFramesHoldLastValue)
{
    synth::SynthConfig cfg;
    cfg.duration_s = 5;
    auto src = render(cfg);
    src.frames[10].pixels.clear();
    const auto r = op_sph(src, cfg.fs);
    EXPECT_FALSE(r.pulse.valid[10]);
    EXPECT_EQ(r.angles.phi[10], r.angles.phi[9]);
}

TEST(SpectralRadius, KnownMatrices)
{
    EXPECT_NEAR(spectral_radius(Eigen::Vector3d(1, -4, 2).asDiagonal().toDenseMatrix()), 4.0, 1e-12);
    Eigen::Matrix2d rot;
    rot << std::cos(0.3), -std::sin(0.3), std::sin(0.3), std::cos(0.3);
    EXPECT_NEAR(spectral_radius(rot), 1.0, 1e-12);
    Eigen::Matrix3d nil = Eigen::Matrix3d::Zero();
    nil(0, 1) = nil(1, 2) = 1.0;
    EXPECT_NEAR(spectral_radius(nil), 0.0, 1e-12);
    EXPECT_THROW(spectral_radius(Eigen::MatrixXd(2, 3)), Error);
}

TEST(SpectralRadius, GelfandLimitOnSymmetricMatrices)
{
    SplitMix64 rng(15);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::Matrix3d a;
        for (int i = 0; i < 9; ++i)
            a(i) = rng.uniform(-1, 1);
        const Eigen::Matrix3d m = 0.5 * (a + a.transpose());
        Eigen::Matrix3d p = m;
        double log_scale = 0.0;
        for (int s = 0; s < 6; ++s) { // m^64 by repeated squaring, renormalized
            p = p * p;
            const double n = p.norm();
            p /= n;
            log_scale = 2.0 * log_scale + std::log(n);
        }
        const double gelfand = std::exp((log_scale + std::log(p.norm())) / 64.0);
        const double rho = spectral_radius(m);
        EXPECT_NEAR(gelfand / rho, 1.0, 0.01);
    }
}

TEST(Operators, OutputLengthAndDeterminism)
{
    synth::SynthConfig cfg;
    cfg.duration_s = 12;
    cfg.pixel_noise_sigma = 0.01;
    auto src = render(cfg);
    const auto tr = mean_trace(src, cfg.fs);
    const auto n = tr.size();
    EXPECT_EQ(op_green(tr).size(), n);
    EXPECT_EQ(op_pos(tr).size(), n);
    EXPECT_EQ(op_lgi(tr).size(), n);
    EXPECT_EQ(op_lgi(tr).samples, op_lgi(tr).samples);
    EXPECT_EQ(op_pos(tr).samples, op_pos(tr).samples);
    auto s1 = src, s2 = src;
    EXPECT_EQ(op_ssr(s1, cfg.fs).samples, op_ssr(s2, cfg.fs).samples);
}

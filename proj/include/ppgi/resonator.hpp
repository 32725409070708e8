#ifndef PPGI_RESONATOR_HPP
#define PPGI_RESONATOR_HPP

#include "core.hpp"
#include "csv.hpp"
#include "log.hpp"
#include "spectral.hpp"
#include "types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace ppgi {
namespace resonator {

struct ResonatorConfig {
    int n_harmonics = 1;
    /// Process-noise intensity driving each oscillator's acceleration.
    double q_osc = 1e-4;
    /// Process-noise intensity of the drift channel's acceleration.
    double q_drift = 1e-6;
    double r_meas = 1e-2;
    double f_init_hz = 1.0;
    double f_lo_hz = 0.5;
    double f_hi_hz = 2.5;
    /// Initial state variance.
    double p0 = 1.0;
    /// Time constant of the first-order smoothing of the frequency hint.
    double smoothing_tau_s = 2.0;

    void validate() const
    {
        if (n_harmonics < 1)
            throw Error(ErrorCode::InvalidArgument, "resonator: n_harmonics must be >= 1");
        if (!(q_osc >= 0.0) || !(q_drift >= 0.0) || !(r_meas > 0.0) || !(p0 > 0.0))
            throw Error(ErrorCode::InvalidArgument, "resonator: noise variances must be non-negative and r_meas, p0 positive");
        if (!(f_lo_hz > 0.0) || !(f_lo_hz < f_hi_hz))
            throw Error(ErrorCode::InvalidArgument, "resonator: invalid frequency band");
        if (f_init_hz < f_lo_hz || f_init_hz > f_hi_hz)
            throw Error(ErrorCode::InvalidArgument, "resonator: f_init outside the band");
        if (!(smoothing_tau_s > 0.0))
            throw Error(ErrorCode::InvalidArgument, "resonator: smoothing time constant must be positive");
    }
};

/// Exact discretization of c'' = -w^2 c over dt, acting on (c, c').
inline Eigen::Matrix2d oscillator_transition(double omega, double dt)
{
    const double c = std::cos(omega * dt), s = std::sin(omega * dt);
    Eigen::Matrix2d f;
    f << c, s / omega, -omega * s, c;
    return f;
}

/// Covariance over dt of white acceleration noise of intensity q through the
/// oscillator: q * integral_0^dt F(u) [0 1]^T [0 1] F(u)^T du.
inline Eigen::Matrix2d oscillator_noise(double omega, double dt, double q)
{
    const double s2 = std::sin(2.0 * omega * dt);
    const double s = std::sin(omega * dt);
    Eigen::Matrix2d m;
    m(0, 0) = (dt / 2.0 - s2 / (4.0 * omega)) / (omega * omega);
    m(0, 1) = m(1, 0) = s * s / (2.0 * omega * omega);
    m(1, 1) = dt / 2.0 + s2 / (4.0 * omega);
    return q * m;
}

///
/// \brief Linear-Gaussian tracker of a noise-driven harmonic oscillator bank
/// plus an integrated random-walk drift.
///
/// State (c_1, c_1', ..., c_n, c_n', d, d'). Harmonic n rotates at
/// w = 2 pi n f; the drift obeys d'' = w(t). Observation y = sum c_n + d + v.
///
class Resonator {
public:
    explicit Resonator(const ResonatorConfig& cfg = {}) : cfg_(cfg)
    {
        cfg_.validate();
        const int dim = 2 * cfg_.n_harmonics + 2;
        x_ = Eigen::VectorXd::Zero(dim);
        P_ = cfg_.p0 * Eigen::MatrixXd::Identity(dim, dim);
        H_ = Eigen::RowVectorXd::Zero(dim);
        for (int n = 0; n <= cfg_.n_harmonics; ++n)
            H_(2 * n) = 1.0;
        f_ = cfg_.f_init_hz;
    }

    const ResonatorConfig& config() const { return cfg_; }
    const Eigen::VectorXd& state() const { return x_; }
    const Eigen::MatrixXd& covariance() const { return P_; }
    double frequency() const { return f_; }
    int jitter_events() const { return jitter_events_; }

    void set_frequency(double f) { f_ = std::clamp(f, cfg_.f_lo_hz, cfg_.f_hi_hz); }

    Eigen::MatrixXd transition(double dt) const
    {
        const auto dim = x_.size();
        Eigen::MatrixXd F = Eigen::MatrixXd::Zero(dim, dim);
        for (int n = 1; n <= cfg_.n_harmonics; ++n)
            F.block<2, 2>(2 * (n - 1), 2 * (n - 1)) = oscillator_transition(2.0 * pi * n * f_, dt);
        const auto d = 2 * cfg_.n_harmonics;
        F(d, d) = 1.0;
        F(d, d + 1) = dt;
        F(d + 1, d + 1) = 1.0;
        return F;
    }

    Eigen::MatrixXd process_noise(double dt) const
    {
        const auto dim = x_.size();
        Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(dim, dim);
        for (int n = 1; n <= cfg_.n_harmonics; ++n)
            Q.block<2, 2>(2 * (n - 1), 2 * (n - 1)) = oscillator_noise(2.0 * pi * n * f_, dt, cfg_.q_osc);
        const auto d = 2 * cfg_.n_harmonics;
        Q(d, d) = cfg_.q_drift * dt * dt * dt / 3.0;
        Q(d, d + 1) = Q(d + 1, d) = cfg_.q_drift * dt * dt / 2.0;
        Q(d + 1, d + 1) = cfg_.q_drift * dt;
        return Q;
    }

    void predict(double dt)
    {
        if (!(dt > 0.0))
            throw Error(ErrorCode::InvalidArgument, "resonator: dt must be positive");
        const auto F = transition(dt);
        x_ = F * x_;
        P_ = F * P_ * F.transpose() + process_noise(dt);
        repair_covariance();
    }

    void update(double y)
    {
        const double s = (H_ * P_ * H_.transpose())(0, 0) + cfg_.r_meas;
        const Eigen::VectorXd k = P_ * H_.transpose() / s;
        x_ += k * (y - (H_ * x_)(0, 0));
        const auto dim = x_.size();
        const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(dim, dim) - k * H_;
        P_ = a * P_ * a.transpose() + cfg_.r_meas * k * k.transpose();
        repair_covariance();
    }

    /// One predict/update cycle; returns the posterior mean of c_1.
    double step(double y, double dt)
    {
        predict(dt);
        update(y);
        return x_(0);
    }

private:
    void repair_covariance()
    {
        P_ = (0.5 * (P_ + P_.transpose())).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P_, Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues().minCoeff();
        if (lo < 0.0) {
            P_.diagonal().array() += -lo + 1e-12;
            ++jitter_events_;
            log().debug("resonator: covariance lost positive semidefiniteness (min eigenvalue {}), jittered", lo);
        }
    }

    ResonatorConfig cfg_;
    Eigen::VectorXd x_;
    Eigen::MatrixXd P_;
    Eigen::RowVectorXd H_;
    double f_ = 1.0;
    int jitter_events_ = 0;
};

/// Hint frequency in Hz at time t: the latest valid window at or before t,
/// else the first valid window; nullopt when no window is valid.
inline std::optional<double> hint_at(const spectral::HrSeries& hint, double t)
{
    std::optional<double> first, latest;
    for (std::size_t i = 0; i < hint.size(); ++i) {
        if (!hint.valid[i])
            continue;
        if (!first)
            first = hint.bpm[i] / 60.0;
        if (hint.times[i] <= t)
            latest = hint.bpm[i] / 60.0;
        else
            break;
    }
    return latest ? latest : first;
}

struct TrackResult {
    PulseTrace pulse;
    std::vector<double> frequency_hz;
    std::vector<Eigen::VectorXd> states;
};

///
/// \brief Filters a pulse trace with the resonator, steering its frequency
/// towards a coarse heart-rate hint through first-order smoothing.
///
inline TrackResult track_detailed(const PulseTrace& pt, const spectral::HrSeries& hint,
                                  const ResonatorConfig& cfg = {}, bool keep_states = false)
{
    if (!(pt.fs > 0.0))
        throw Error(ErrorCode::InvalidArgument, "track: fs must be positive");
    Resonator res(cfg);
    const double dt = 1.0 / pt.fs;
    const double alpha = 1.0 - std::exp(-dt / cfg.smoothing_tau_s);
    if (auto f0 = hint_at(hint, pt.t0))
        res.set_frequency(*f0);

    TrackResult out;
    out.pulse = pt;
    out.frequency_hz.resize(pt.size());
    if (keep_states)
        out.states.reserve(pt.size());
    double f = res.frequency();
    for (std::size_t k = 0; k < pt.size(); ++k) {
        const double t = pt.t0 + static_cast<double>(k) * dt;
        if (auto target = hint_at(hint, t)) {
            const double clamped = std::clamp(*target, cfg.f_lo_hz, cfg.f_hi_hz);
            f += alpha * (clamped - f);
            res.set_frequency(f);
        }
        out.pulse.samples[k] = res.step(pt.samples[k], dt);
        out.frequency_hz[k] = res.frequency();
        if (keep_states)
            out.states.push_back(res.state());
    }
    if (res.jitter_events() > 0)
        log().info("track: covariance repaired {} times", res.jitter_events());
    return out;
}

inline PulseTrace track(const PulseTrace& pt, const spectral::HrSeries& hint, const ResonatorConfig& cfg = {})
{
    return track_detailed(pt, hint, cfg).pulse;
}

/// CSV dump of a tracked state trajectory: t,f,c1,dc1,...,d,dd.
inline void write_state_csv(const std::string& path, const TrackResult& tr, int n_harmonics)
{
    auto out = csv::open_out(path);
    out << "t,f";
    for (int n = 1; n <= n_harmonics; ++n)
        out << ",c" << n << ",dc" << n;
    out << ",d,dd\n";
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
        out << csv::fmt(tr.pulse.t0 + static_cast<double>(k) / tr.pulse.fs) << ',' << csv::fmt(tr.frequency_hz[k]);
        for (Eigen::Index i = 0; i < tr.states[k].size(); ++i)
            out << ',' << csv::fmt(tr.states[k](i));
        out << '\n';
    }
}

} // namespace resonator
} // namespace ppgi

#endif // PPGI_RESONATOR_HPP

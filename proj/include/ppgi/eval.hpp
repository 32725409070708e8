#ifndef PPGI_EVAL_HPP
#define PPGI_EVAL_HPP

#include "core.hpp"
#include "csv.hpp"
#include "log.hpp"
#include "spectral.hpp"
#include "types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <span>
#include <string>
#include <vector>

namespace ppgi {
namespace eval {

/// Product-moment correlation; nullopt when either input has zero variance.
inline std::optional<double> pearson(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw Error(ErrorCode::InvalidArgument, "pearson: length mismatch");
    if (a.size() < 2)
        throw Error(ErrorCode::InsufficientData, "pearson: need at least 2 pairs");
    const double ma = spectral::mean(a), mb = spectral::mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (!(saa > 0.0) || !(sbb > 0.0))
        return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

inline double rmse(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw Error(ErrorCode::InvalidArgument, "rmse: length mismatch");
    if (a.empty())
        throw Error(ErrorCode::InsufficientData, "rmse: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / static_cast<double>(a.size()));
}

struct SubjectReport {
    std::string dataset;
    std::string subject_id;
    std::string operator_tag;
    std::optional<double> pearson_r;
    double rmse_bpm = 0.0;
    std::size_t n_windows = 0;
    /// Fewer than two jointly valid windows; metrics are not meaningful.
    bool insufficient = false;
};

/// Reference heart rate on the camera time base: resample to cam_fs, then
/// the same band-pass / STFT / peak chain as the prediction path.
inline spectral::HrSeries reference_hr(const RefSignal& ref, double cam_fs, const spectral::SpectralParams& p)
{
    const auto x = spectral::resample(ref.samples, ref.fs, cam_fs);
    const auto bp = spectral::bandpass(x, cam_fs, p.band_lo_hz, p.band_hi_hz, p.filter_order);
    const auto sg = spectral::stft(bp, cam_fs, p, ref.t0);
    return spectral::peak_hr(sg, p.band_lo_hz, p.band_hi_hz);
}

/// Pairs of (prediction, reference) windows matched by nearest time stamp
/// with skew at most hop/2.
inline std::vector<std::pair<std::size_t, std::size_t>> align_windows(const spectral::HrSeries& pred,
                                                                       const spectral::HrSeries& ref, double max_skew)
{
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!pred.valid[i])
            continue;
        const auto it = std::lower_bound(ref.times.begin(), ref.times.end(), pred.times[i]);
        std::size_t best = ref.size();
        double best_d = max_skew + 1e-9;
        for (auto cand : {it, it == ref.times.begin() ? it : std::prev(it)}) {
            if (cand == ref.times.end())
                continue;
            const double d = std::abs(*cand - pred.times[i]);
            if (d <= best_d) {
                best_d = d;
                best = static_cast<std::size_t>(cand - ref.times.begin());
            }
        }
        if (best < ref.size() && ref.valid[best])
            pairs.emplace_back(i, best);
    }
    return pairs;
}

inline SubjectReport compare_hr(const spectral::HrSeries& pred, const spectral::HrSeries& ref, double cam_fs,
                                const spectral::SpectralParams& p)
{
    const double skew = static_cast<double>(p.hop()) / (2.0 * cam_fs);
    const auto pairs = align_windows(pred, ref, skew);
    SubjectReport rep;
    rep.n_windows = pairs.size();
    std::vector<double> a, b;
    for (const auto& [i, j] : pairs) {
        a.push_back(pred.bpm[i]);
        b.push_back(ref.bpm[j]);
    }
    if (pairs.size() < 2) {
        rep.insufficient = true;
        rep.rmse_bpm = pairs.empty() ? std::nan("") : rmse(a, b);
        return rep;
    }
    rep.pearson_r = pearson(a, b);
    if (!rep.pearson_r)
        log().info("evaluate: heart-rate series has zero variance, Pearson r undefined");
    rep.rmse_bpm = rmse(a, b);
    return rep;
}

inline SubjectReport evaluate_subject(const spectral::HrSeries& pred, const RefSignal& ref, double cam_fs,
                                      const spectral::SpectralParams& p = {})
{
    if (!(ref.fs > 0.0) || !(cam_fs > 0.0))
        throw Error(ErrorCode::InvalidArgument, "evaluate_subject: rates must be positive");
    return compare_hr(pred, reference_hr(ref, cam_fs, p), cam_fs, p);
}

struct TableRow {
    std::string dataset;
    std::string operator_tag;
    std::optional<double> mean_r;
    double mean_rmse = 0.0;
    std::size_t n_subjects = 0;
    /// Subjects with a defined Pearson r.
    std::size_t n_r = 0;
};

struct TableReport {
    std::vector<TableRow> rows;
};

/// Arithmetic means per (dataset, operator). Subjects with undefined r count
/// towards the RMSE mean only; insufficient subjects are skipped.
inline TableReport aggregate(std::span<const SubjectReport> reports)
{
    std::map<std::pair<std::string, std::string>, std::vector<const SubjectReport*>> groups;
    std::vector<std::pair<std::string, std::string>> order;
    for (const auto& r : reports) {
        if (r.insufficient)
            continue;
        auto key = std::make_pair(r.dataset, r.operator_tag);
        if (!groups.count(key))
            order.push_back(key);
        groups[key].push_back(&r);
    }
    TableReport t;
    for (const auto& key : order) {
        const auto& g = groups[key];
        TableRow row;
        row.dataset = key.first;
        row.operator_tag = key.second;
        row.n_subjects = g.size();
        double sr = 0.0, se = 0.0;
        for (const auto* r : g) {
            se += r->rmse_bpm;
            if (r->pearson_r) {
                sr += *r->pearson_r;
                ++row.n_r;
            }
        }
        row.mean_rmse = se / static_cast<double>(g.size());
        if (row.n_r > 0)
            row.mean_r = sr / static_cast<double>(row.n_r);
        t.rows.push_back(row);
    }
    return t;
}

struct BoxplotRecord {
    std::string dataset;
    std::string operator_tag;
    std::string subject;
    std::optional<double> r;
    double rmse = 0.0;
};

inline std::vector<BoxplotRecord> emit_boxplot(std::span<const SubjectReport> reports)
{
    std::vector<BoxplotRecord> out;
    for (const auto& r : reports)
        if (!r.insufficient)
            out.push_back({r.dataset, r.operator_tag, r.subject_id, r.pearson_r, r.rmse_bpm});
    return out;
}

inline void write_boxplot_csv(const std::string& path, std::span<const BoxplotRecord> recs)
{
    auto out = csv::open_out(path);
    out << "dataset,operator,subject,r,rmse\n";
    for (const auto& r : recs)
        out << r.dataset << ',' << r.operator_tag << ',' << r.subject << ',' << (r.r ? csv::fmt(*r.r) : "") << ','
            << csv::fmt(r.rmse) << '\n';
}

inline void write_table_csv(const std::string& path, const TableReport& t)
{
    auto out = csv::open_out(path);
    out << "dataset,operator,mean_r,mean_rmse,n_subjects,n_r\n";
    for (const auto& r : t.rows)
        out << r.dataset << ',' << r.operator_tag << ',' << (r.mean_r ? csv::fmt(*r.mean_r) : "") << ','
            << csv::fmt(r.mean_rmse) << ',' << r.n_subjects << ',' << r.n_r << '\n';
}

/// Aligned text table, one row per dataset, one "r/RMSE" column per operator.
inline std::string format_table(const TableReport& t, const std::vector<std::string>& operators)
{
    std::vector<std::string> datasets;
    for (const auto& r : t.rows)
        if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end())
            datasets.push_back(r.dataset);
    auto cell = [&](const std::string& ds, const std::string& op) -> std::string {
        for (const auto& r : t.rows) {
            if (r.dataset != ds || r.operator_tag != op)
                continue;
            char buf[64];
            if (r.mean_r)
                std::snprintf(buf, sizeof(buf), "%.2f/%.2f", *r.mean_r, r.mean_rmse);
            else
                std::snprintf(buf, sizeof(buf), "n/a/%.2f", r.mean_rmse);
            return buf;
        }
        return "-";
    };
    std::size_t w0 = 8;
    for (const auto& d : datasets)
        w0 = std::max(w0, d.size());
    std::size_t wc = 11;
    for (const auto& op : operators)
        wc = std::max(wc, op.size());
    std::ostringstream os;
    auto pad = [](std::string s, std::size_t w) {
        s.resize(std::max(w, s.size()), ' ');
        return s;
    };
    os << pad("Database", w0 + 2);
    for (const auto& op : operators)
        os << pad(op, wc + 2);
    os << '\n' << std::string(w0 + 2 + operators.size() * (wc + 2), '=') << '\n';
    for (const auto& d : datasets) {
        os << pad(d, w0 + 2);
        for (const auto& op : operators)
            os << pad(cell(d, op), wc + 2);
        os << '\n';
    }
    std::size_t excluded = 0;
    for (const auto& r : t.rows)
        excluded += r.n_subjects - r.n_r;
    os << "cells: mean Pearson r / mean RMSE [BPM]";
    if (excluded > 0)
        os << "; " << excluded << " subject result(s) with undefined r excluded from the r mean";
    os << '\n';
    return os.str();
}

///
/// \brief In-band SNR in dB of a pulse with known frequency f0.
///
/// Hann periodogram of the mean-removed signal; power within +-half_width
/// of f0 over the remaining power in [lo, hi].
///
inline double inband_snr_db(std::span<const double> x, double fs, double f0, double half_width = 0.1,
                            double lo = 0.5, double hi = 2.5)
{
    std::size_t nfft = 1;
    while (nfft < 2 * x.size())
        nfft <<= 1;
    const auto w = spectral::hann(x.size());
    const double m = spectral::mean(x);
    std::vector<double> frame(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        frame[i] = (x[i] - m) * w[i];
    const auto p = spectral::power_spectrum(frame, nfft);
    double sig = 0.0, noise = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double f = static_cast<double>(k) * fs / static_cast<double>(nfft);
        if (f < lo || f > hi)
            continue;
        if (std::abs(f - f0) <= half_width)
            sig += p[k];
        else
            noise += p[k];
    }
    if (!(noise > 0.0))
        return sig > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(sig / noise);
}

} // namespace eval
} // namespace ppgi

#endif // PPGI_EVAL_HPP

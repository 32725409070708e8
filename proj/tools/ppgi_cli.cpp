// Command-line front end: extract, estimate, evaluate, synth, compare.
//
// Exit codes: 0 ok, 1 internal error, 2 input error (bad flags, config,
// paths or file contents), 3 skin mask empty in most frames, 4 not enough
// data for the analysis window.

#include <ppgi/ppgi.hpp>

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using namespace ppgi;

namespace {

enum Exit : int { ExitOk = 0, ExitInternal = 1, ExitInput = 2, ExitEmptyMask = 3, ExitInsufficient = 4 };

int exit_code(ErrorCode c)
{
    switch (c) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::Io:
    case ErrorCode::Format:
    case ErrorCode::Dimension:
        return ExitInput;
    case ErrorCode::EmptyMask:
        return ExitEmptyMask;
    case ErrorCode::InsufficientData:
        return ExitInsufficient;
    default:
        return ExitInternal;
    }
}

/// Raw flag values; each flag given on the command line overrides its config key.
struct Options {
    std::string config;
    std::vector<std::string> sets;
    std::map<std::string, std::string> keyed;
    std::map<std::string, std::vector<CLI::Option*>> given;
    std::string batch;
    bool dry_run = false;
    unsigned jobs = 1;
};

void add_common(CLI::App* sub, Options& o)
{
    sub->add_option("-c,--config", o.config, "TOML-style config file");
    sub->add_option("--set", o.sets, "Override a config key (key=value), repeatable");
    auto keyed = [&](const std::string& flag, const std::string& key, const std::string& help) {
        o.given[key].push_back(sub->add_option(flag, o.keyed[key], help));
    };
    keyed("--frames", "input.frames", "Directory of numbered PPM frames with meta.json");
    keyed("--roi", "input.roi", "ROI track CSV (frame,x,y,w,h)");
    keyed("--trace", "input.trace", "Pooled RGB trace CSV (t,r,g,b)");
    keyed("--ref", "input.ref", "Reference PPG CSV (t,ppg)");
    keyed("-o,--out", "output.dir", "Output directory");
    keyed("--operators", "run.operators", "Comma-separated operators (green,ssr,pos,lgi,sph)");
    keyed("--resonator", "run.resonator", "on|off");
    keyed("--pooling", "features.pooling", "Sphere pooling: euclid_renorm|karcher");
    keyed("--dataset", "run.dataset", "Dataset label for reports");
    keyed("--subject", "run.subject", "Subject label for reports");
    keyed("--seed", "synth.seed", "Synthetic scene seed");
    keyed("--cb-min", "skin.cb_min", "Skin threshold");
    keyed("--cb-max", "skin.cb_max", "Skin threshold");
    keyed("--cr-min", "skin.cr_min", "Skin threshold");
    keyed("--cr-max", "skin.cr_max", "Skin threshold");
    sub->add_flag("--dry-run", o.dry_run, "Validate the configuration and exit without writing");
    sub->add_option("-j,--jobs", o.jobs, "Worker threads (0 = all cores)");
}

config::Settings resolve(const Options& o)
{
    config::KeyValues kv;
    for (const auto& [k, opts] : o.given)
        if (std::any_of(opts.begin(), opts.end(), [](const CLI::Option* opt) { return opt->count() > 0; }))
            kv.set(k, o.keyed.at(k));
    for (const auto& s : o.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0)
            throw Error(ErrorCode::InvalidArgument, "--set expects key=value, got '" + s + "'");
        kv.set(std::string(csv::trim(s.substr(0, eq))), std::string(csv::trim(s.substr(eq + 1))));
    }
    return config::resolve(o.config, kv);
}

enum class Source { Frames, Trace, Synth };

const char* to_string(Source s)
{
    switch (s) {
    case Source::Frames: return "frames";
    case Source::Trace: return "trace";
    case Source::Synth: return "synthetic scene";
    }
    return "?";
}

Source source_of(const config::Settings& s)
{
    if (!s.frames_dir.empty() && !s.trace_path.empty())
        throw Error(ErrorCode::InvalidArgument, "give either --frames or --trace, not both");
    if (!s.frames_dir.empty())
        return Source::Frames;
    if (!s.trace_path.empty())
        return Source::Trace;
    return Source::Synth;
}

void require_file(const std::string& path, const char* what)
{
    if (!fs::is_regular_file(path))
        throw Error(ErrorCode::Io, std::string(what) + " not found: " + path);
}

/// Checks everything that can be checked without reading the inputs.
void validate(const config::Settings& s)
{
    if (s.operators.empty())
        throw Error(ErrorCode::InvalidArgument, "operator list is empty");
    const auto& p = s.pipeline.spectral;
    if (!(p.band_lo_hz > 0.0) || !(p.band_lo_hz < p.band_hi_hz))
        throw Error(ErrorCode::InvalidArgument, "spectral band must satisfy 0 < lo < hi");
    if (p.win < 8 || p.nfft < p.win || !(p.overlap >= 0.0 && p.overlap < 1.0) || p.filter_order < 1)
        throw Error(ErrorCode::InvalidArgument, "invalid spectral parameters");
    s.pipeline.skin.validate();
    s.pipeline.resonator.validate();
    switch (source_of(s)) {
    case Source::Frames:
        if (!fs::is_directory(s.frames_dir))
            throw Error(ErrorCode::Io, "frames directory not found: " + s.frames_dir);
        if (s.roi_path.empty())
            throw Error(ErrorCode::InvalidArgument, "frame input needs an ROI track (--roi)");
        require_file(s.roi_path, "ROI track");
        break;
    case Source::Trace:
        require_file(s.trace_path, "trace");
        break;
    case Source::Synth:
        synth::SynthScene{s.synth};
        break;
    }
    if (!s.ref_path.empty())
        require_file(s.ref_path, "reference");
}

struct Input {
    Source source = Source::Synth;
    Observations obs;
    /// Given reference, or the synthetic scene's clean pulse.
    std::optional<RefSignal> ref;
};

Input load(const config::Settings& s)
{
    Input in;
    in.source = source_of(s);
    switch (in.source) {
    case Source::Frames: {
        ingest::FrameSequence frames(s.frames_dir);
        MaskedFrameSource src(frames, ingest::read_roi_csv(s.roi_path), s.pipeline.skin);
        in.obs = collect_observations(src, frames.fps(), s.pipeline.pooling);
        break;
    }
    case Source::Trace:
        in.obs = observations_from_trace(ingest::read_trace_csv(s.trace_path));
        break;
    case Source::Synth: {
        synth::SynthScene scene(s.synth);
        in.obs = collect_observations(scene, s.synth.fs, s.pipeline.pooling);
        in.ref = scene.reference();
        break;
    }
    }
    if (!s.ref_path.empty())
        in.ref = ingest::read_ref_csv(s.ref_path);
    return in;
}

/// Operators runnable on this input; SSR and SPH need pixels.
std::vector<Operator> usable(const std::vector<Operator>& ops, Source src)
{
    std::vector<Operator> out;
    for (auto op : ops) {
        if (src == Source::Trace && (op == Operator::Ssr || op == Operator::Sph)) {
            log().warn("{} needs per-pixel input, skipped for a trace", to_string(op));
            continue;
        }
        out.push_back(op);
    }
    if (out.empty())
        throw Error(ErrorCode::InvalidArgument, "no requested operator can run on this input");
    return out;
}

std::string lower(std::string s)
{
    for (auto& c : s)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string out_file(const config::Settings& s, const std::string& name) { return (fs::path(s.out_dir) / name).string(); }

void make_out_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
}

/// Runs f(i) for i in [0, n) on up to `jobs` threads; rethrows the error
/// of the lowest failing index.
template <typename F>
void parallel_for(std::size_t n, unsigned jobs, F&& f)
{
    if (jobs == 0)
        jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(n, 1)));
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    auto worker = [&] {
        for (std::size_t i; (i = next++) < n;) {
            try {
                f(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned j = 1; j < jobs; ++j)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

std::vector<Estimate> estimate_all(const std::vector<Operator>& ops, const Input& in, const config::Settings& s,
                                   unsigned jobs)
{
    std::vector<Estimate> est(ops.size());
    parallel_for(ops.size(), jobs,
                 [&](std::size_t i) { est[i] = estimate_hr(run_operator(ops[i], in.obs, s.pipeline), s.pipeline); });
    return est;
}

std::string bpm_text(std::optional<double> v)
{
    char buf[32];
    if (!v)
        return "n/a";
    std::snprintf(buf, sizeof(buf), "%.2f", *v);
    return buf;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_synth(const config::Settings& s, const Options& o)
{
    std::vector<double> amps = s.amp_sweep;
    if (amps.empty())
        amps.push_back(s.synth.pulse_amp);
    std::vector<fs::path> dirs;
    for (double a : amps)
        dirs.push_back(s.amp_sweep.empty() ? fs::path(s.out_dir) : fs::path(s.out_dir) / ("amp_" + csv::fmt(a)));
    if (o.dry_run) {
        for (const auto& d : dirs)
            std::cout << "would write scene to " << d.string() << "\n";
        return ExitOk;
    }
    parallel_for(amps.size(), o.jobs, [&](std::size_t i) {
        auto cfg = s.synth;
        cfg.pulse_amp = amps[i];
        const fs::path dir = dirs[i];
        make_out_dir(dir / "frames");
        synth::SynthScene scene(cfg);
        RgbTrace trace;
        trace.fs = cfg.fs;
        Box box{0, 0, 0, 0};
        std::size_t n = 0;
        while (auto ps = scene.next()) {
            const auto frame = synth::render_frame(*ps, n);
            box = Box{0, 0, frame.width, frame.height};
            ingest::write_ppm(dir / "frames" / ingest::frame_filename(n), frame);
            trace.samples.push_back(*features::pool_mean(*ps));
            trace.valid.push_back(true);
            ++n;
        }
        ingest::write_meta(dir / "frames", {cfg.fs, n});
        ingest::RoiTrack roi;
        roi.set(0, box);
        ingest::write_roi_csv((dir / "roi.csv").string(), roi);
        ingest::write_ref_csv((dir / "ref.csv").string(), scene.reference());
        ingest::write_trace_csv((dir / "trace.csv").string(), trace);
    });
    for (std::size_t i = 0; i < amps.size(); ++i)
        std::cout << "scene pulse_amp=" << csv::fmt(amps[i]) << " -> " << dirs[i].string() << "\n";
    return ExitOk;
}

int cmd_extract(const config::Settings& s, const Options& o)
{
    if (o.dry_run) {
        std::cout << "config ok: extract from " << to_string(source_of(s)) << " into " << s.out_dir << "\n";
        return ExitOk;
    }
    const auto in = load(s);
    make_out_dir(s.out_dir);
    ingest::write_trace_csv(out_file(s, "rgb_trace.csv"), in.obs.rgb);
    std::size_t files = 1;
    if (in.obs.sphere) {
        features::write_sphere_csv(out_file(s, "sphere_trace.csv"), *in.obs.sphere);
        features::write_angles_csv(out_file(s, "angles.csv"), features::trace_to_angles(*in.obs.sphere));
        files += 2;
    }
    std::cout << in.obs.rgb.size() << " samples at " << csv::fmt(in.obs.rgb.fs) << " Hz, " << in.obs.empty_frames
              << " empty frames, " << files << " file(s) in " << s.out_dir << "\n";
    return ExitOk;
}

int cmd_estimate(const config::Settings& s, const Options& o)
{
    if (o.dry_run) {
        std::cout << "config ok: estimate from " << to_string(source_of(s)) << " into " << s.out_dir << "\n";
        return ExitOk;
    }
    const auto in = load(s);
    const auto ops = usable(s.operators, in.source);
    const auto est = estimate_all(ops, in, s, o.jobs);
    make_out_dir(s.out_dir);
    for (std::size_t i = 0; i < ops.size(); ++i) {
        const std::string tag = lower(to_string(ops[i]));
        write_hr_csv(out_file(s, "hr_" + tag + ".csv"), est[i].hr);
        write_pulse_csv(out_file(s, "pulse_" + tag + ".csv"), est[i]);
        const auto valid = static_cast<std::size_t>(std::count(est[i].hr.valid.begin(), est[i].hr.valid.end(), true));
        std::printf("%-6s median %s BPM (%zu/%zu windows)\n", to_string(ops[i]), bpm_text(median_bpm(est[i].hr)).c_str(),
                    valid, est[i].hr.size());
    }
    return ExitOk;
}

std::vector<eval::SubjectReport> evaluate_one(const config::Settings& s, unsigned jobs)
{
    const auto in = load(s);
    if (!in.ref)
        throw Error(ErrorCode::InvalidArgument, "evaluation needs a reference signal (--ref)");
    const auto ops = usable(s.operators, in.source);
    const auto est = estimate_all(ops, in, s, jobs);
    std::vector<eval::SubjectReport> reps;
    for (std::size_t i = 0; i < ops.size(); ++i) {
        auto r = eval::evaluate_subject(est[i].hr, *in.ref, in.obs.rgb.fs, s.pipeline.spectral);
        r.dataset = s.dataset;
        r.subject_id = s.subject;
        r.operator_tag = to_string(ops[i]);
        if (r.insufficient)
            log().warn("{}/{} {}: fewer than two comparable windows", s.dataset, s.subject, r.operator_tag);
        reps.push_back(std::move(r));
    }
    return reps;
}

/// Batch manifest: CSV with header dataset,subject,frames,roi,trace,ref;
/// empty cells keep the configured value.
std::vector<config::Settings> read_batch(const std::string& path, const config::Settings& base)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::Io, "cannot read batch manifest " + path);
    const std::vector<std::string> cols{"dataset", "subject", "frames", "roi", "trace", "ref"};
    std::string line;
    std::size_t lineno = 0;
    std::vector<config::Settings> out;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (csv::trim(line).empty())
            continue;
        auto cells = csv::split(line, ',');
        for (auto& c : cells)
            c = std::string(csv::trim(c));
        if (!header) {
            if (cells != cols)
                throw Error(ErrorCode::Format, path + ":" + std::to_string(lineno) +
                                                   ": header must be dataset,subject,frames,roi,trace,ref");
            header = true;
            continue;
        }
        if (cells.size() != cols.size())
            throw Error(ErrorCode::Format, path + ":" + std::to_string(lineno) + ": expected 6 fields");
        auto s = base;
        auto set = [](std::string& field, const std::string& v) {
            if (!v.empty())
                field = v;
        };
        set(s.dataset, cells[0]);
        set(s.subject, cells[1]);
        set(s.frames_dir, cells[2]);
        set(s.roi_path, cells[3]);
        set(s.trace_path, cells[4]);
        set(s.ref_path, cells[5]);
        out.push_back(std::move(s));
    }
    if (out.empty())
        throw Error(ErrorCode::Format, path + ": no subjects");
    return out;
}

int cmd_evaluate(const config::Settings& s, const Options& o)
{
    std::vector<config::Settings> subjects{s};
    if (!o.batch.empty())
        subjects = read_batch(o.batch, s);
    for (const auto& sub : subjects) {
        validate(sub);
        if (sub.ref_path.empty() && source_of(sub) != Source::Synth)
            throw Error(ErrorCode::InvalidArgument,
                        "evaluation of " + sub.subject + " needs a reference signal (--ref or manifest column)");
    }
    if (o.dry_run) {
        std::cout << "config ok: evaluate " << subjects.size() << " subject(s) into " << s.out_dir << "\n";
        return ExitOk;
    }
    std::vector<std::vector<eval::SubjectReport>> per(subjects.size());
    // subjects in parallel; operators within a subject sequential
    parallel_for(subjects.size(), o.jobs, [&](std::size_t i) { per[i] = evaluate_one(subjects[i], 1); });
    std::vector<eval::SubjectReport> all;
    for (auto& v : per)
        all.insert(all.end(), v.begin(), v.end());
    const auto table = eval::aggregate(all);
    make_out_dir(s.out_dir);
    eval::write_table_csv(out_file(s, "table.csv"), table);
    eval::write_boxplot_csv(out_file(s, "boxplot.csv"), eval::emit_boxplot(all));
    std::vector<std::string> tags;
    for (auto op : s.operators)
        tags.emplace_back(to_string(op));
    std::cout << eval::format_table(table, tags);
    if (table.rows.empty())
        throw Error(ErrorCode::InsufficientData, "no subject had enough comparable windows");
    return ExitOk;
}

int cmd_compare(config::Settings s, const Options& o)
{
    s.operators.assign(std::begin(all_operators), std::end(all_operators));
    if (o.dry_run) {
        std::cout << "config ok: compare all operators on " << to_string(source_of(s)) << "\n";
        return ExitOk;
    }
    const auto in = load(s);
    const auto ops = usable(s.operators, in.source);
    const auto est = estimate_all(ops, in, s, o.jobs);

    std::optional<double> f0;
    spectral::HrSeries ref_hr;
    if (in.ref) {
        ref_hr = eval::reference_hr(*in.ref, in.obs.rgb.fs, s.pipeline.spectral);
        if (auto m = median_bpm(ref_hr))
            f0 = *m / 60.0;
    }
    std::vector<eval::SubjectReport> reps;
    make_out_dir(s.out_dir);
    auto out = csv::open_out(out_file(s, "compare.csv"));
    out << "operator,median_bpm,snr_db,r,rmse\n";
    std::printf("%-8s %12s %10s %8s %10s\n", "Operator", "median BPM", "SNR dB", "r", "RMSE");
    for (std::size_t i = 0; i < ops.size(); ++i) {
        const auto med = median_bpm(est[i].hr);
        std::optional<double> snr;
        if (f0)
            snr = eval::inband_snr_db(est[i].pulse.samples, in.obs.rgb.fs, *f0, 0.1, s.pipeline.spectral.band_lo_hz,
                                      s.pipeline.spectral.band_hi_hz);
        std::optional<eval::SubjectReport> rep;
        if (in.ref) {
            rep = eval::compare_hr(est[i].hr, ref_hr, in.obs.rgb.fs, s.pipeline.spectral);
            rep->dataset = s.dataset;
            rep->subject_id = s.subject;
            rep->operator_tag = to_string(ops[i]);
            reps.push_back(*rep);
        }
        const std::string r_text = rep && rep->pearson_r ? bpm_text(rep->pearson_r) : "n/a";
        const std::string e_text = rep && !rep->insufficient ? bpm_text(rep->rmse_bpm) : "n/a";
        std::printf("%-8s %12s %10s %8s %10s\n", to_string(ops[i]), bpm_text(med).c_str(), bpm_text(snr).c_str(),
                    r_text.c_str(), e_text.c_str());
        out << to_string(ops[i]) << ',' << (med ? csv::fmt(*med) : "") << ',' << (snr ? csv::fmt(*snr) : "") << ','
            << (rep && rep->pearson_r ? csv::fmt(*rep->pearson_r) : "") << ','
            << (rep && !rep->insufficient ? csv::fmt(rep->rmse_bpm) : "") << '\n';
    }
    if (!reps.empty()) {
        std::vector<std::string> tags;
        for (auto op : ops)
            tags.emplace_back(to_string(op));
        std::cout << "\n" << eval::format_table(eval::aggregate(reps), tags);
    }
    return ExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Camera-based pulse extraction and heart-rate estimation"};
    app.require_subcommand(1);
    Options o;
    auto* extract = app.add_subcommand("extract", "Skin-mask and pool frames into RGB and sphere traces");
    auto* estimate = app.add_subcommand("estimate", "Run pulse operators and estimate heart rate");
    auto* evaluate = app.add_subcommand("evaluate", "Score heart-rate estimates against a reference PPG");
    auto* synth = app.add_subcommand("synth", "Generate a synthetic scene (frames, ROI, reference, trace)");
    auto* compare = app.add_subcommand("compare", "Run all five operators and print a comparison table");
    for (auto* sub : {extract, estimate, evaluate, synth, compare})
        add_common(sub, o);
    evaluate->add_option("--batch", o.batch, "Subject manifest CSV (dataset,subject,frames,roi,trace,ref)");
    o.given["synth.amp_sweep"].push_back(
        synth->add_option("--amp-sweep", o.keyed["synth.amp_sweep"], "Comma-separated pulse amplitudes, one scene each"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? ExitOk : ExitInput;
    }

    try {
        const auto s = resolve(o);
        if (app.got_subcommand(evaluate))
            return cmd_evaluate(s, o);
        validate(s);
        if (app.got_subcommand(synth))
            return cmd_synth(s, o);
        if (app.got_subcommand(extract))
            return cmd_extract(s, o);
        if (app.got_subcommand(estimate))
            return cmd_estimate(s, o);
        return cmd_compare(s, o);
    } catch (const Error& e) {
        std::fprintf(stderr, "ppgi_cli: %s: %s\n", to_string(e.code()), e.what());
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "ppgi_cli: internal error: %s\n", e.what());
        return ExitInternal;
    }
}

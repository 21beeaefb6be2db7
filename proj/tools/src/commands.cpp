#include "jsreg_cli/commands.hpp"

#include <chrono>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "jsreg/config.hpp"
#include "jsreg/error.hpp"
#include "jsreg/io.hpp"
#include "jsreg/parallel.hpp"
#include "jsreg/phantom.hpp"
#include "jsreg/preprocess.hpp"
#include "jsreg/report.hpp"
#include "jsreg_cli/manifest.hpp"

#ifndef JSREG_VERSION
#define JSREG_VERSION "dev"
#endif

namespace jsreg::cli {

namespace {

class StageClock {
public:
    void mark(std::string name) {
        const auto now = std::chrono::steady_clock::now();
        stages_.emplace_back(std::move(name), std::chrono::duration<double>(now - last_).count());
        last_ = now;
    }
    [[nodiscard]] const std::vector<std::pair<std::string, double>>& stages() const { return stages_; }

private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
    std::vector<std::pair<std::string, double>> stages_;
};

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError(fmt::format("cannot create output directory '{}'", dir.string()));
    }
}

Manifest base_manifest(std::string command, const std::vector<std::string>& argv, const fs::path& out_dir) {
    Manifest m;
    m.tool_version = JSREG_VERSION;
    m.command = std::move(command);
    m.argv = argv;
    m.cwd = fs::current_path().string();
    m.out_dir = out_dir.string();
    return m;
}

void write_manifest(const fs::path& out_dir, Manifest m, const StageClock& clock) {
    m.stage_seconds = clock.stages();
    write_file_atomic(out_dir / "manifest.json", format_manifest(m));
}

JobConfig load_config(const std::optional<fs::path>& path) {
    return path ? parse_config(read_file(*path)) : JobConfig{};
}

} // namespace

void cmd_phantom(const PhantomOptions& o, const std::vector<std::string>& argv) {
    StageClock clock;
    PhantomSpec spec;
    spec.size = o.size;
    spec.deform_amp = o.deform_amp;
    spec.noise_sigma = o.noise;
    const PhantomInstance ph = make_phantom(o.seed, spec);
    clock.mark("generate");

    ensure_dir(o.out_dir);
    write_image(o.out_dir / "R.if1", ph.r);
    write_image(o.out_dir / "T.if1", ph.t);
    write_field(o.out_dir / "u_true.if1", ph.u_true);
    write_image(o.out_dir / "mask_true.if1", ph.mask_true);
    write_markers(o.out_dir / "markers.json", ph.markers);
    clock.mark("write");

    Manifest m = base_manifest("phantom", argv, o.out_dir);
    m.seed = o.seed;
    m.stats["tumor_cx"] = ph.tumor_cx;
    m.stats["tumor_cy"] = ph.tumor_cy;
    m.stats["u_true_max"] = ph.u_true.max_magnitude();
    write_manifest(o.out_dir, std::move(m), clock);
}

void cmd_preprocess(const PreprocessOptions& o, const std::vector<std::string>& argv) {
    StageClock clock;
    const JobConfig cfg = load_config(o.config);
    const SliceStack t = read_stack(o.t);
    const SliceStack r = read_stack(o.r);
    clock.mark("load");

    const PreprocessedPair out = preprocess_pair(t, r, cfg.preprocess, o.jobs);
    clock.mark("preprocess");

    Manifest m = base_manifest("preprocess", argv, o.out_dir);
    m.inputs = {{"t", o.t.string()}, {"r", o.r.string()}};
    if (o.config) {
        m.inputs["config"] = o.config->string();
    }
    m.config = format_config(cfg);
    for (std::size_t i = 0; i < t.size(); ++i) {
        // Before: both slices only min-max normalized, on their own grids.
        const double before = ks_distance(normalize_minmax(t.slices[i]), normalize_minmax(r.slices[i]));
        const double after = ks_distance(out.template_stack.slices[i], out.reference_stack.slices[i]);
        m.stats[fmt::format("ks_before_{}", i)] = before;
        m.stats[fmt::format("ks_after_{}", i)] = after;
    }

    ensure_dir(o.out_dir);
    write_stack(o.out_dir / "T.if1", out.template_stack);
    write_stack(o.out_dir / "R.if1", out.reference_stack);
    clock.mark("write");
    write_manifest(o.out_dir, std::move(m), clock);
}

namespace {

std::string history_csv(const std::vector<RunOutputs>& outs) {
    std::string s = "slice,epoch,fidelity,seg_t,seg_r,global,local,total";
    for (auto name : kMetricColumns) {
        s += ',';
        s += name;
    }
    s += '\n';
    for (std::size_t i = 0; i < outs.size(); ++i) {
        const auto& o = outs[i];
        std::size_t cp = 0;
        for (const auto& h : o.history) {
            const auto& e = h.energy;
            s += fmt::format("{},{},{},{},{},{},{},{}", i, h.epoch, format_number(e.term_fidelity),
                             format_number(e.term_seg_t), format_number(e.term_seg_r), format_number(e.term_global),
                             format_number(e.term_local), format_number(e.total));
            const bool at_cp = cp < o.checkpoints.size() && o.checkpoints[cp].epoch == h.epoch;
            for (double v : metric_values(at_cp ? o.checkpoints[cp].metrics : MetricsRow{})) {
                s += ',';
                if (at_cp) {
                    s += format_number(v);
                }
            }
            if (at_cp) {
                ++cp;
            }
            s += '\n';
        }
    }
    return s;
}

} // namespace

void cmd_run(const RunOptions& o, const std::vector<std::string>& argv) {
    StageClock clock;
    JobConfig cfg = load_config(o.config);
    if (o.mode) {
        cfg.run.mode = *o.mode;
    }
    if (o.epochs) {
        cfg.run.epochs = *o.epochs;
        auto& cp = cfg.run.checkpoint_epochs;
        std::erase_if(cp, [&](int e) { return e > cfg.run.epochs; });
    }
    if (o.seed) {
        cfg.run.seed = *o.seed;
    }
    cfg.validate();

    const SliceStack t = read_stack(o.t);
    const SliceStack r = read_stack(o.r);
    const MarkerSet markers = read_markers(o.markers);
    std::optional<SliceStack> mask;
    if (o.mask) {
        mask = read_stack(*o.mask);
    }
    t.validate();
    r.validate();
    if (t.size() != r.size()) {
        throw InvalidArgument(fmt::format("run: T has {} slices but R has {}", t.size(), r.size()));
    }
    if (mask && mask->size() != 1 && mask->size() != t.size()) {
        throw InvalidArgument("run: mask must have one slice or one per T slice");
    }
    clock.mark("load");

    std::vector<SliceProblem> problems(t.size());
    parallel_for(t.size(), o.jobs, [&](std::size_t i) {
        std::optional<Image2D> g;
        if (mask) {
            g = mask->slices[mask->size() == 1 ? 0 : i];
        }
        problems[i] = prepare_slice(t.slices[i], r.slices[i], markers, cfg.slice, std::move(g));
    });
    clock.mark("setup");

    std::vector<RunOutputs> outs;
    if (cfg.run.mode == RunMode::Direct) {
        outs.resize(problems.size());
        parallel_for(problems.size(), o.jobs, [&](std::size_t i) { outs[i] = run_direct(problems[i], cfg.run); });
    } else {
        outs = run_dip(problems, cfg.run, cfg.net);
    }
    clock.mark("optimize");

    ensure_dir(o.out_dir);
    std::vector<Image2D> theta_t;
    std::vector<Image2D> theta_r;
    std::vector<Image2D> warped;
    std::vector<Image2D> post;
    std::vector<LabeledMetrics> rows;
    for (std::size_t i = 0; i < outs.size(); ++i) {
        theta_t.push_back(outs[i].theta_t);
        theta_r.push_back(outs[i].theta_r);
        warped.push_back(outs[i].warped_t);
        post.push_back(postprocess_mask(outs[i].theta_r, cfg.postprocess.open_radius, cfg.postprocess.close_radius));
        write_field(o.out_dir / fmt::format("u_{}.if1", i), outs[i].u);
        for (const auto& c : outs[i].checkpoints) {
            rows.push_back({static_cast<int>(i), c.epoch, c.metrics});
        }
    }
    write_stack(o.out_dir / "theta_t.if1", SliceStack(std::move(theta_t), t.slice_indices));
    write_stack(o.out_dir / "theta_r.if1", SliceStack(std::move(theta_r), t.slice_indices));
    write_stack(o.out_dir / "warped_t.if1", SliceStack(std::move(warped), t.slice_indices));
    write_stack(o.out_dir / "mask.if1", SliceStack(std::move(post), t.slice_indices));
    write_file_atomic(o.out_dir / "history.csv", history_csv(outs));
    write_file_atomic(o.out_dir / "metrics.csv", format_metrics_csv(rows));
    write_file_atomic(o.out_dir / "config.txt", format_config(cfg));
    clock.mark("write");

    Manifest m = base_manifest("run", argv, o.out_dir);
    m.seed = cfg.run.seed;
    m.inputs = {{"t", o.t.string()}, {"r", o.r.string()}, {"markers", o.markers.string()}};
    if (o.mask) {
        m.inputs["mask"] = o.mask->string();
    }
    if (o.config) {
        m.inputs["config"] = o.config->string();
    }
    m.config = format_config(cfg);
    for (std::size_t i = 0; i < outs.size(); ++i) {
        if (!outs[i].history.empty()) {
            m.stats[fmt::format("final_energy_{}", i)] = outs[i].history.back().energy.total;
        }
    }
    write_manifest(o.out_dir, std::move(m), clock);

    for (std::size_t i = 0; i < outs.size(); ++i) {
        if (outs[i].diverged) {
            throw DivergenceError(fmt::format("slice {}: {}", i, outs[i].failure));
        }
    }
}

void cmd_report(const ReportOptions& o, const std::vector<std::string>& argv) {
    StageClock clock;
    if (o.metrics.empty()) {
        throw InvalidArgument("report: at least one metrics CSV is required");
    }
    std::vector<SubjectSummary> subjects;
    std::vector<MetricsRow> all;
    for (const auto& path : o.metrics) {
        SubjectSummary s{path.stem().string(), parse_metrics_csv(read_file(path))};
        for (const auto& r : s.rows) {
            all.push_back(r.row);
        }
        subjects.push_back(std::move(s));
    }
    clock.mark("load");

    ensure_dir(o.out_dir);
    Manifest m = base_manifest("report", argv, o.out_dir);
    for (std::size_t i = 0; i < o.metrics.size(); ++i) {
        m.inputs[fmt::format("metrics_{}", i)] = o.metrics[i].string();
    }
    for (const auto& s : subjects) {
        write_file_atomic(o.out_dir / fmt::format("line_{}.svg", s.subject), line_chart_svg(s.rows, s.subject));
        write_file_atomic(o.out_dir / fmt::format("bar_{}.svg", s.subject), bar_chart_svg(s));
    }
    write_file_atomic(o.out_dir / "table1.csv", table1_csv(subjects));
    if (all.size() >= 3) {
        write_file_atomic(o.out_dir / "table2.csv", table2_csv(table2_matrix(all)));
    }
    m.stats["rows"] = static_cast<double>(all.size());
    clock.mark("write");
    write_manifest(o.out_dir, std::move(m), clock);
}

namespace {

class CwdGuard {
public:
    explicit CwdGuard(const fs::path& to) : saved_(fs::current_path()) { fs::current_path(to); }
    ~CwdGuard() {
        std::error_code ec;
        fs::current_path(saved_, ec);
    }
    CwdGuard(const CwdGuard&) = delete;
    CwdGuard& operator=(const CwdGuard&) = delete;

private:
    fs::path saved_;
};

} // namespace

int cmd_replay(const fs::path& manifest, std::ostream& out, std::ostream& err) {
    const Manifest m = parse_manifest(read_file(manifest));
    if (m.command == "replay" || m.argv.empty()) {
        throw InvalidArgument("replay: manifest does not record a replayable command");
    }
    std::error_code ec;
    if (!fs::is_directory(m.cwd, ec)) {
        throw IoError(fmt::format("replay: recorded working directory '{}' is missing", m.cwd));
    }
    CwdGuard guard(m.cwd);
    return run_cli(m.argv, out, err);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Joint tumor segmentation and deformable registration of slice pairs", "jsreg"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(JSREG_VERSION));

    PhantomOptions ph;
    auto* c_ph = app.add_subcommand("phantom", "Write a synthetic R/T pair with known deformation and mask");
    c_ph->add_option("--seed", ph.seed, "Generator seed");
    c_ph->add_option("--size", ph.size, "Image side length in pixels")->check(CLI::Range(16, 4096));
    c_ph->add_option("--deform-amp", ph.deform_amp, "Max displacement in pixels")->check(CLI::NonNegativeNumber);
    c_ph->add_option("--noise", ph.noise, "Gaussian noise sigma on T")->check(CLI::NonNegativeNumber);
    c_ph->add_option("--out-dir", ph.out_dir, "Output directory");

    PreprocessOptions pre;
    std::string pre_config;
    auto* c_pre = app.add_subcommand("preprocess", "Crop, normalize, match, CLAHE and resize T/R stacks");
    c_pre->add_option("--config", pre_config, "Config file");
    c_pre->add_option("--t", pre.t, "Template stack (IF1)")->required();
    c_pre->add_option("--r", pre.r, "Reference stack (IF1)")->required();
    c_pre->add_option("--out-dir", pre.out_dir, "Output directory");
    c_pre->add_option("--jobs", pre.jobs, "Worker threads")->check(CLI::PositiveNumber);

    RunOptions run;
    std::string run_config;
    std::string run_mask;
    std::string run_mode;
    int run_epochs = 0;
    std::uint64_t run_seed = 0;
    auto* c_run = app.add_subcommand("run", "Minimize the joint energy (direct or DIP mode)");
    c_run->add_option("--config", run_config, "Config file");
    c_run->add_option("--t", run.t, "Template stack (IF1)")->required();
    c_run->add_option("--r", run.r, "Reference stack (IF1)")->required();
    c_run->add_option("--markers", run.markers, "Marker JSON in T geometry")->required();
    c_run->add_option("--mask", run_mask, "Ground-truth mask in R geometry (IF1)");
    auto* o_mode = c_run->add_option("--mode", run_mode, "dip or direct")->check(CLI::IsMember({"dip", "direct"}));
    auto* o_epochs = c_run->add_option("--epochs", run_epochs, "Epoch count")->check(CLI::PositiveNumber);
    auto* o_seed = c_run->add_option("--seed", run_seed, "Run seed");
    c_run->add_option("--out-dir", run.out_dir, "Output directory");
    c_run->add_option("--jobs", run.jobs, "Worker threads")->check(CLI::PositiveNumber);

    ReportOptions rep;
    auto* c_rep = app.add_subcommand("report", "Charts and tables from metrics CSVs");
    c_rep->add_option("--metrics", rep.metrics, "Metrics CSV files (one per subject)")->required();
    c_rep->add_option("--out-dir", rep.out_dir, "Output directory");

    fs::path manifest;
    auto* c_replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
    c_replay->add_option("manifest", manifest, "manifest.json")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitBadInput;
    }

    try {
        if (*c_ph) {
            cmd_phantom(ph, args);
            out << fmt::format("phantom written to {}\n", ph.out_dir.string());
        } else if (*c_pre) {
            if (!pre_config.empty()) {
                pre.config = pre_config;
            }
            cmd_preprocess(pre, args);
            out << fmt::format("preprocessed stacks written to {}\n", pre.out_dir.string());
        } else if (*c_run) {
            if (!run_config.empty()) {
                run.config = run_config;
            }
            if (!run_mask.empty()) {
                run.mask = run_mask;
            }
            if (*o_mode) {
                run.mode = parse_mode(run_mode);
            }
            if (*o_epochs) {
                run.epochs = run_epochs;
            }
            if (*o_seed) {
                run.seed = run_seed;
            }
            cmd_run(run, args);
            out << fmt::format("run outputs written to {}\n", run.out_dir.string());
        } else if (*c_rep) {
            cmd_report(rep, args);
            out << fmt::format("report written to {}\n", rep.out_dir.string());
        } else if (*c_replay) {
            return cmd_replay(manifest, out, err);
        }
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return kExitBadInput;
    } catch (const DivergenceError& e) {
        err << "diverged: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << '\n';
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        err << "i/o error: " << e.what() << '\n';
        return kExitIo;
    }
    return kExitOk;
}

} // namespace jsreg::cli

#include "logsaw/pipeline.hpp"
#include "logsaw/error.hpp"
#include "logsaw/svg.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <thread>

namespace logsaw {

namespace {

namespace fs = std::filesystem;

template <typename F>
auto staged(const char* stage, F&& fn) {
    try {
        return fn();
    } catch (Error& e) {
        e.set_stage(stage);
        throw Error(e.kind(), std::string(stage) + ": " + e.what());
    }
}

SvgPlot function_plot(const CircularFunction& fn, const std::string& title,
                      const std::string& color) {
    SvgPlot plot;
    plot.title = title;
    plot.x_label = "theta [deg]";
    plot.y_label = "value";
    SvgSeries s;
    s.color = color;
    for (int i = 0; i < fn.size(); ++i) {
        s.x.push_back(fn.theta_of(i));
        s.y.push_back(fn.samples[i]);
    }
    plot.series.push_back(std::move(s));
    return plot;
}

} // namespace

PipelineConfig PipelineConfig::from_config(const ConfigMap& kv) {
    PipelineConfig cfg;
    cfg.gen = GenParams::from_config(kv);
    cfg.theta_bins = config_int(kv, "theta_bins", cfg.theta_bins);
    cfg.l_bins = config_int(kv, "l_bins", cfg.l_bins);
    cfg.lambda = config_double(kv, "lambda", cfg.lambda);
    cfg.n_segments = config_int(kv, "n_segments", cfg.n_segments);
    cfg.centerline_bins = config_int(kv, "centerline_bins", cfg.centerline_bins);
    cfg.detect_sigma_mm = config_double(kv, "detect_sigma_mm", cfg.detect_sigma_mm);
    cfg.detect_threshold = config_double(kv, "detect_threshold", cfg.detect_threshold);
    cfg.detect_floor = config_double(kv, "detect_floor", cfg.detect_floor);
    cfg.binarize_at = config_double(kv, "binarize_at", cfg.binarize_at);
    cfg.min_area_cells = config_int(kv, "min_area_cells", cfg.min_area_cells);
    cfg.sigma_deg = config_double(kv, "sigma_deg", cfg.sigma_deg);
    cfg.step_deg = config_double(kv, "step_deg", cfg.step_deg);
    cfg.raster_mm = config_double(kv, "raster_mm", cfg.raster_mm);
    cfg.arris_band_mm = config_double(kv, "arris_band_mm", cfg.arris_band_mm);
    cfg.sweep_step_deg = config_double(kv, "sweep_step_deg", cfg.sweep_step_deg);
    cfg.out_dir = config_string(kv, "out_dir", cfg.out_dir);
    cfg.cloud_path = config_string(kv, "cloud_path", cfg.cloud_path);
    cfg.gt_path = config_string(kv, "gt_path", cfg.gt_path);
    cfg.pattern_path = config_string(kv, "pattern_path", cfg.pattern_path);
    cfg.pmap_source = config_string(kv, "pmap_source", cfg.pmap_source);
    cfg.pmap_path = config_string(kv, "pmap_path", cfg.pmap_path);
    if (cfg.theta_bins < 2) fail("InvalidInput", "theta_bins must be >= 2");
    if (cfg.n_segments < 0) fail("InvalidInput", "n_segments must be >= 0 (0 = auto)");
    return cfg;
}

SawingPattern default_pattern() {
    SawingPattern pattern;
    pattern.name = "two-board-100x50";
    pattern.boards.push_back({0.0, 27.0, 100.0, 50.0});
    pattern.boards.push_back({0.0, -27.0, 100.0, 50.0});
    return pattern;
}

std::size_t resolve_n_segments(const PipelineConfig& cfg, const PointCloud& cloud) {
    if (cfg.n_segments > 0) return static_cast<std::size_t>(cfg.n_segments);
    Vec3 lo = cloud.points.front(), hi = lo;
    for (const Vec3& p : cloud.points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return default_n_segments((hi - lo).maxCoeff());
}

PipelineSummary run_pipeline(const PipelineConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    const std::string out = cfg.out_dir + "/";

    // inputs: synthetic by default, file-based when paths are configured
    std::optional<VirtualLog> log;
    PointCloud cloud;
    staged("generate", [&] {
        if (!cfg.cloud_path.empty()) {
            cloud = load_cloud(cfg.cloud_path);
            if (!cfg.gt_path.empty()) log = load_virtual_log(cfg.gt_path);
        } else {
            log = generate_log(cfg.gen);
            cloud = render_point_cloud(*log, cfg.gen);
            save_virtual_log(*log, out + "ground_truth.json");
            save_xyz(cloud, out + "cloud.xyz");
        }
        return 0;
    });

    PipelineSummary summary;
    if (log) summary.knot_count = log->knots.size();

    // height map
    HeightMap hmap = staged("heightmap", [&] {
        const Centerline line = estimate_centerline(
            cloud, resolve_n_segments(cfg, cloud),
            static_cast<std::size_t>(cfg.centerline_bins));
        const auto samples = cloud_to_cylindrical(cloud, line);
        double extent = 0;
        for (const CylindricalSample& s : samples) extent = std::max(extent, s.l);
        const int l_bins = cfg.l_bins > 0 ? cfg.l_bins : default_l_bins(extent);
        HeightMap m = fit_heightmap(samples, cfg.theta_bins, l_bins, cfg.lambda);
        save_hmap(m, out + "surface.hmap");
        return m;
    });

    // probability map
    ProbabilityMap pmap = staged("detect", [&] {
        ProbabilityMap p;
        if (cfg.pmap_source == "file") {
            p = load_pmap(cfg.pmap_path);
        } else if (cfg.pmap_source == "gt") {
            if (!log) fail("InvalidInput", "pmap_source=gt needs ground truth");
            p = ground_truth_pmap(*log, hmap.theta_bins, hmap.l_bins, hmap.l_extent_mm);
        } else if (cfg.pmap_source == "detect") {
            std::string warning;
            LogDetectOptions opt;
            opt.threshold = cfg.detect_threshold;
            opt.response_floor = cfg.detect_floor;
            p = log_detect(hmap, cfg.detect_sigma_mm, opt, &warning);
            if (!warning.empty()) std::fprintf(stderr, "warning: %s\n", warning.c_str());
        } else {
            fail("InvalidInput", "pmap_source must be detect, gt or file");
        }
        save_pmap(p, out + "knots.pmap");
        const auto detections = extract_detections(
            p, static_cast<std::size_t>(cfg.min_area_cells), cfg.binarize_at);
        save_detections_csv(detections, out + "detections.csv");
        return p;
    });

    // knot + pattern functions
    const SawingPattern pattern = staged("pattern", [&] {
        return cfg.pattern_path.empty() ? default_pattern() : load_pattern(cfg.pattern_path);
    });
    const KnotFunction fk = staged("knotfn", [&] {
        KnotFunction fn = knot_function(pmap);
        save_function_csv(fn, out + "knot_function.csv");
        save_svg_plot(function_plot(fn, "knot function f_k", "#1f77b4"),
                      out + "knot_function.svg");
        return fn;
    });
    const PatternFunction fp = staged("patternfn", [&] {
        double sigma = cfg.sigma_deg;
        if (sigma <= 0) sigma = log ? log->mean_knot_halfwidth_deg() : 8.0;
        PatternFunction fn = pattern_function(corner_angles(pattern), sigma,
                                              360.0 / cfg.theta_bins);
        save_function_csv(fn, out + "pattern_function.csv");
        save_svg_plot(function_plot(fn, "pattern function f_p", "#d62728"),
                      out + "pattern_function.svg");
        return fn;
    });

    // angle search
    const AngleResult angle = staged("optimize", [&] {
        AngleResult r = optimize_angle(fk, fp, cfg.step_deg);
        CircularFunction curve;
        curve.samples = r.objective_curve;
        curve.delta_deg = r.step_deg;
        save_function_csv(curve, out + "objective_curve.csv");
        save_svg_plot(function_plot(curve, "cross-correlation C(a)", "#2ca02c"),
                      out + "objective_curve.svg");
        return r;
    });
    summary.angle_deg = angle.angle_deg;
    summary.objective = angle.objective;

    // virtual sawing verification needs ground truth
    if (log) {
        staged("saw", [&] {
            SawSimOptions opt;
            opt.raster_mm = cfg.raster_mm;
            opt.arris_band_mm = cfg.arris_band_mm;
            SawingReport optimized = saw_and_classify(*log, pattern, angle.angle_deg, opt);
            const BaselineSweep baseline =
                all_angle_baseline(*log, pattern, cfg.sweep_step_deg, opt);
            const ImprovementReport improvement = improvement_report(optimized, baseline);
            save_report_json(optimized, &improvement, out + "sawing_report.json");
            save_report_csv(optimized, out + "sawing_report.csv");

            SvgPlot plot;
            plot.title = "arris knots per sawing angle";
            plot.x_label = "angle [deg]";
            plot.y_label = "arris count";
            SvgSeries s;
            s.color = "#9467bd";
            for (std::size_t i = 0; i < baseline.angles_deg.size(); ++i) {
                s.x.push_back(baseline.angles_deg[i]);
                s.y.push_back(static_cast<double>(baseline.arris_counts[i]));
            }
            plot.series.push_back(std::move(s));
            save_svg_plot(plot, out + "baseline_sweep.svg");

            summary.optimized = std::move(optimized);
            summary.improvement = improvement;
            summary.baseline_mean_count = baseline.mean_arris_count;
            summary.baseline_mean_area_dm2 = baseline.mean_arris_area_dm2;
            return 0;
        });
    }
    return summary;
}

std::vector<PipelineSummary> run_pipeline_batch(const PipelineConfig& cfg, int n_logs,
                                                int jobs) {
    if (n_logs < 1) fail("InvalidInput", "need at least one log");
    jobs = std::max(1, jobs);

    std::vector<PipelineSummary> summaries(static_cast<std::size_t>(n_logs));
    std::vector<std::string> errors(static_cast<std::size_t>(n_logs));

    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n_logs) return;
            PipelineConfig sub = cfg;
            sub.gen.seed = cfg.gen.seed + static_cast<std::uint64_t>(i);
            char dir[32];
            std::snprintf(dir, sizeof dir, "/log_%03d", i);
            sub.out_dir = cfg.out_dir + dir;
            try {
                summaries[static_cast<std::size_t>(i)] = run_pipeline(sub);
            } catch (const std::exception& e) {
                errors[static_cast<std::size_t>(i)] = e.what();
            }
        }
    };
    std::vector<std::thread> threads;
    for (int t = 0; t < std::min(jobs, n_logs); ++t) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();

    for (int i = 0; i < n_logs; ++i)
        if (!errors[static_cast<std::size_t>(i)].empty())
            fail("PipelineError", "log " + std::to_string(i) + ": " +
                                      errors[static_cast<std::size_t>(i)]);

    // ordered summary reduction
    fs::create_directories(cfg.out_dir);
    std::FILE* f = std::fopen((cfg.out_dir + "/summary.csv").c_str(), "w");
    if (!f) fail("IOError", "cannot write batch summary");
    std::fprintf(f, "log,seed,knots,angle_deg,arris_count,baseline_mean_count,"
                    "count_change_pct,arris_area_dm2,baseline_mean_area_dm2,"
                    "area_change_pct\n");
    for (int i = 0; i < n_logs; ++i) {
        const PipelineSummary& s = summaries[static_cast<std::size_t>(i)];
        const double cnt = s.optimized ? static_cast<double>(s.optimized->arris_count) : 0;
        const double area = s.optimized ? s.optimized->arris_area_dm2 : 0;
        std::fprintf(f, "%d,%llu,%zu,%.3f,%.0f,%.4f,%.3f,%.5f,%.5f,%.3f\n", i,
                     static_cast<unsigned long long>(cfg.gen.seed + static_cast<std::uint64_t>(i)),
                     s.knot_count, s.angle_deg, cnt, s.baseline_mean_count,
                     s.improvement ? s.improvement->count_change_pct : 0.0, area,
                     s.baseline_mean_area_dm2,
                     s.improvement ? s.improvement->area_change_pct : 0.0);
    }
    std::fclose(f);
    return summaries;
}

} // namespace logsaw

#include "logsaw/pipeline.hpp"
#include "logsaw/error.hpp"
#include "logsaw/registration.hpp"
#include "logsaw/svg.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace logsaw;

struct GlobalArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    std::vector<std::string> overrides;
};

PipelineConfig make_config(const GlobalArgs& args) {
    ConfigMap kv;
    if (!args.config_path.empty()) kv = load_config(args.config_path);
    apply_overrides(kv, args.overrides);
    if (args.seed) kv["seed"] = std::to_string(*args.seed);
    return PipelineConfig::from_config(kv);
}

void emit_error_json(const std::string& stage, const std::string& kind,
                     const std::string& message) {
    nlohmann::json j{{"stage", stage.empty() ? "cli" : stage},
                     {"kind", kind},
                     {"message", message}};
    std::fprintf(stderr, "%s\n", j.dump().c_str());
}

int cmd_generate(const PipelineConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    const VirtualLog log = generate_log(cfg.gen);
    const PointCloud cloud = render_point_cloud(log, cfg.gen);
    save_virtual_log(log, cfg.out_dir + "/ground_truth.json");
    save_xyz(cloud, cfg.out_dir + "/cloud.xyz");
    std::printf("log length %.0f mm, %zu knots, %zu points\n", log.length_mm,
                log.knots.size(), cloud.size());
    std::printf("wrote %s/cloud.xyz and %s/ground_truth.json\n", cfg.out_dir.c_str(),
                cfg.out_dir.c_str());
    return 0;
}

int cmd_heightmap(const PipelineConfig& cfg, const std::string& cloud_path,
                  const std::string& out_path) {
    const PointCloud cloud = load_cloud(cloud_path);
    const Centerline line =
        estimate_centerline(cloud, resolve_n_segments(cfg, cloud),
                            static_cast<std::size_t>(cfg.centerline_bins));
    const auto samples = cloud_to_cylindrical(cloud, line);
    double extent = 0;
    for (const CylindricalSample& s : samples) extent = std::max(extent, s.l);
    const int l_bins = cfg.l_bins > 0 ? cfg.l_bins : default_l_bins(extent);
    FitDiagnostics diag;
    const HeightMap map =
        fit_heightmap(samples, cfg.theta_bins, l_bins, cfg.lambda, {}, &diag);
    save_hmap(map, out_path);
    std::printf("fit %dx%d grid, %d CG iterations, residual %.2e -> %s\n", map.l_bins,
                map.theta_bins, diag.iterations, diag.relative_residual, out_path.c_str());
    return 0;
}

int cmd_register(const std::string& source_path, const std::string& target_path,
                 const std::string& transform_out, const std::string& labeled_out,
                 double cutoff_mm) {
    const PointCloud source = load_cloud(source_path);
    const PointCloud target = load_cloud(target_path);
    const RegistrationResult reg = register_clouds(source, target);
    std::printf("ICP: %d iterations, normalized MSE %.3e, %s\n", reg.icp.iterations,
                reg.icp.final_mse, reg.icp.converged ? "converged" : "not converged");
    if (!transform_out.empty()) save_transform(reg.source_to_target, transform_out);
    if (!labeled_out.empty()) {
        if (!source.has_labels())
            fail("InvalidInput", "source cloud carries no labels to transfer");
        const LabelTransferResult transfer =
            transfer_labels(source, target, reg.source_to_target, cutoff_mm);
        PointCloud labeled = target;
        labeled.labels = transfer.labels;
        save_xyz(labeled, labeled_out);
        std::printf("label transfer: matched %.1f%%, max distance %.3f mm\n",
                    transfer.matched_fraction * 100.0, transfer.max_match_distance);
    }
    return 0;
}

int cmd_detect(const PipelineConfig& cfg, const std::string& hmap_path,
               const std::string& pmap_out, const std::string& csv_out) {
    const HeightMap hmap = load_hmap(hmap_path);
    std::string warning;
    LogDetectOptions opt;
    opt.threshold = cfg.detect_threshold;
    opt.response_floor = cfg.detect_floor;
    const ProbabilityMap pmap = log_detect(hmap, cfg.detect_sigma_mm, opt, &warning);
    if (!warning.empty()) std::fprintf(stderr, "warning: %s\n", warning.c_str());
    save_pmap(pmap, pmap_out);
    const auto detections =
        extract_detections(pmap, static_cast<std::size_t>(cfg.min_area_cells), cfg.binarize_at);
    if (!csv_out.empty()) save_detections_csv(detections, csv_out);
    std::printf("%zu detections -> %s\n", detections.size(), pmap_out.c_str());
    return 0;
}

int cmd_knotfn(const std::string& pmap_path, const std::string& csv_out,
               const std::string& svg_out) {
    const ProbabilityMap pmap = load_pmap(pmap_path);
    const KnotFunction fn = knot_function(pmap);
    save_function_csv(fn, csv_out);
    if (!svg_out.empty()) {
        SvgPlot plot;
        plot.title = "knot function f_k";
        plot.x_label = "theta [deg]";
        plot.y_label = "value";
        SvgSeries s;
        for (int i = 0; i < fn.size(); ++i) {
            s.x.push_back(fn.theta_of(i));
            s.y.push_back(fn.samples[i]);
        }
        plot.series.push_back(std::move(s));
        save_svg_plot(plot, svg_out);
    }
    std::printf("knot function (%d samples) -> %s\n", fn.size(), csv_out.c_str());
    return 0;
}

int cmd_optimize(const PipelineConfig& cfg, const std::string& pmap_path,
                 const std::string& pattern_path, const std::string& curve_out) {
    const ProbabilityMap pmap = load_pmap(pmap_path);
    const SawingPattern pattern =
        pattern_path.empty() ? default_pattern() : load_pattern(pattern_path);
    const KnotFunction fk = knot_function(pmap);
    const double sigma = cfg.sigma_deg > 0 ? cfg.sigma_deg : 8.0;
    const PatternFunction fp =
        pattern_function(corner_angles(pattern), sigma, pmap.delta_theta_deg());
    const AngleResult result = optimize_angle(fk, fp, cfg.step_deg);
    if (!curve_out.empty()) {
        CircularFunction curve;
        curve.samples = result.objective_curve;
        curve.delta_deg = result.step_deg;
        save_function_csv(curve, curve_out);
    }
    std::printf("optimal sawing angle %.3f deg (objective %.6e, period %.0f deg)\n",
                result.angle_deg, result.objective, result.symmetry_period_deg);
    return 0;
}

int cmd_saw(const PipelineConfig& cfg, const std::string& gt_path,
            const std::string& pattern_path, double angle_deg,
            const std::string& report_out, bool dump_pgm) {
    const VirtualLog log = load_virtual_log(gt_path);
    const SawingPattern pattern =
        pattern_path.empty() ? default_pattern() : load_pattern(pattern_path);
    SawSimOptions opt;
    opt.raster_mm = cfg.raster_mm;
    opt.arris_band_mm = cfg.arris_band_mm;
    if (dump_pgm) {
        const auto grids = virtual_saw(log, pattern, angle_deg, opt);
        std::filesystem::create_directories(cfg.out_dir);
        for (const BoardSurfaceGrid& g : grids) {
            char name[64];
            std::snprintf(name, sizeof name, "/face_b%d_f%d.pgm", g.board_id, g.face_index);
            save_face_pgm(g, cfg.out_dir + name);
        }
    }
    const SawingReport report = saw_and_classify(log, pattern, angle_deg, opt);
    save_report_json(report, nullptr, report_out);
    std::printf("angle %.2f deg: %zu appearances, %zu arris, %.4f dm2 arris area -> %s\n",
                angle_deg, report.total_count, report.arris_count, report.arris_area_dm2,
                report_out.c_str());
    return 0;
}

int cmd_evaluate(const std::vector<std::string>& pred_paths,
                 const std::vector<std::string>& gt_paths, double iou, int theta_bins) {
    if (pred_paths.size() != gt_paths.size() || pred_paths.empty())
        fail("InvalidInput", "need matching --pred/--gt file lists");
    std::vector<std::vector<KnotDetection>> preds, gts;
    for (std::size_t i = 0; i < pred_paths.size(); ++i) {
        preds.push_back(load_detections_csv(pred_paths[i], theta_bins));
        gts.push_back(load_detections_csv(gt_paths[i], theta_bins));
    }
    std::printf("Log  mAP\n");
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const DetectionEvalReport r = evaluate_map(preds[i], gts[i], iou);
        std::printf("%-4zu %.2f\n", i + 1, r.map);
    }
    const DetectionEvalReport all = evaluate_map_pooled(preds, gts, iou);
    std::printf("All  %.2f\n", all.map);
    return 0;
}

int cmd_pipeline(const PipelineConfig& cfg, int n_logs, int jobs) {
    if (n_logs <= 1) {
        const PipelineSummary s = run_pipeline(cfg);
        std::printf("angle %.3f deg, %zu knots\n", s.angle_deg, s.knot_count);
        if (s.optimized) {
            std::printf("arris %zu / total %zu (baseline mean %.2f)\n",
                        s.optimized->arris_count, s.optimized->total_count,
                        s.baseline_mean_count);
            if (s.improvement) {
                std::printf("count change %+.1f%%, area change %+.1f%%, ratio %s\n",
                            s.improvement->count_change_pct, s.improvement->area_change_pct,
                            s.improvement->arris_vs_total.c_str());
            }
        }
        return 0;
    }

    const auto summaries = run_pipeline_batch(cfg, n_logs, jobs);
    double count_pct = 0, area_pct = 0;
    int defined = 0;
    std::printf("log  seed        knots angle    arris baseline  d_count%%  d_area%%\n");
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        const PipelineSummary& s = summaries[i];
        const double cnt = s.optimized ? static_cast<double>(s.optimized->arris_count) : 0;
        std::printf("%-4zu %-11llu %-5zu %-8.2f %-5.0f %-9.2f %-9.2f %-9.2f\n", i,
                    static_cast<unsigned long long>(cfg.gen.seed + i), s.knot_count,
                    s.angle_deg, cnt, s.baseline_mean_count,
                    s.improvement ? s.improvement->count_change_pct : 0.0,
                    s.improvement ? s.improvement->area_change_pct : 0.0);
        if (s.improvement && s.improvement->count_ratio_defined &&
            s.improvement->area_ratio_defined) {
            count_pct += s.improvement->count_change_pct;
            area_pct += s.improvement->area_change_pct;
            ++defined;
        }
    }
    if (defined > 0)
        std::printf("mean over %d logs: count change %+.1f%%, area change %+.1f%%\n", defined,
                    count_pct / defined, area_pct / defined);
    std::printf("summary: %s/summary.csv\n", cfg.out_dir.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"log surface knots to sawing angle pipeline"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand name

    GlobalArgs global;
    app.add_option("--config", global.config_path, "flat key = value config file");
    app.add_option("--seed", global.seed, "override the config seed");
    app.add_option("--jobs", global.jobs, "parallel logs in batch mode");
    app.add_option("--set", global.overrides, "key=value config override (repeatable)");

    auto* generate = app.add_subcommand("generate", "synthesize a log + ground truth");

    auto* heightmap = app.add_subcommand("heightmap", "fit a height map from a point cloud");
    std::string hm_cloud, hm_out = "surface.hmap";
    heightmap->add_option("cloud", hm_cloud, "input point cloud (.xyz/.ply)")->required();
    heightmap->add_option("-o,--output", hm_out, "output HMAP path");

    auto* reg = app.add_subcommand("register", "align two clouds and transfer labels");
    std::string reg_src, reg_dst, reg_tf, reg_labeled;
    double reg_cutoff = 2.0;
    reg->add_option("source", reg_src)->required();
    reg->add_option("target", reg_dst)->required();
    reg->add_option("-t,--transform", reg_tf, "write source->target transform");
    reg->add_option("-l,--labeled-out", reg_labeled, "write target cloud with transferred labels");
    reg->add_option("--cutoff", reg_cutoff, "label transfer distance cutoff [mm]");

    auto* detect = app.add_subcommand("detect", "LoG knot detection on a height map");
    std::string det_hmap, det_pmap = "knots.pmap", det_csv = "detections.csv";
    detect->add_option("hmap", det_hmap)->required();
    detect->add_option("-o,--output", det_pmap, "output PMAP path");
    detect->add_option("--csv", det_csv, "detections CSV path");

    auto* knotfn = app.add_subcommand("knotfn", "knot function from a probability map");
    std::string kf_pmap, kf_csv = "knot_function.csv", kf_svg;
    knotfn->add_option("pmap", kf_pmap)->required();
    knotfn->add_option("-o,--output", kf_csv, "output CSV path");
    knotfn->add_option("--svg", kf_svg, "optional SVG plot path");

    auto* optimize = app.add_subcommand("optimize", "sawing angle from a probability map");
    std::string opt_pmap, opt_pattern, opt_curve;
    optimize->add_option("pmap", opt_pmap)->required();
    optimize->add_option("-p,--pattern", opt_pattern, "sawing pattern JSON");
    optimize->add_option("--curve", opt_curve, "objective curve CSV path");

    auto* saw = app.add_subcommand("saw", "virtually saw a ground-truth log");
    std::string saw_gt, saw_pattern, saw_report = "sawing_report.json";
    double saw_angle = 0;
    bool saw_pgm = false;
    saw->add_option("gt", saw_gt, "ground-truth JSON")->required();
    saw->add_option("-p,--pattern", saw_pattern, "sawing pattern JSON");
    saw->add_option("-a,--angle", saw_angle, "sawing angle [deg]");
    saw->add_option("-o,--output", saw_report, "report JSON path");
    saw->add_flag("--pgm", saw_pgm, "dump per-face occupancy rasters");

    auto* evaluate = app.add_subcommand("evaluate", "mAP of detections against ground truth");
    std::vector<std::string> ev_pred, ev_gt;
    double ev_iou = 0.10;
    int ev_theta_bins = 360;
    evaluate->add_option("--pred", ev_pred, "prediction CSV (repeat per log)")->required();
    evaluate->add_option("--gt", ev_gt, "ground-truth CSV (repeat per log)")->required();
    evaluate->add_option("--iou", ev_iou, "IoU threshold");
    evaluate->add_option("--theta-bins", ev_theta_bins, "grid columns for wrapped boxes");

    auto* pipeline = app.add_subcommand("pipeline", "full generate->optimize->saw run");
    int pl_logs = 1;
    std::string pl_pmap;
    pipeline->add_option("--logs", pl_logs, "number of seeded logs (batch mode)");
    pipeline->add_option("--pmap", pl_pmap, "external probability map (skips detection)");

    CLI11_PARSE(app, argc, argv);

    std::string stage = "cli";
    try {
        if (generate->parsed()) {
            stage = "generate";
            return cmd_generate(make_config(global));
        }
        if (heightmap->parsed()) {
            stage = "heightmap";
            return cmd_heightmap(make_config(global), hm_cloud, hm_out);
        }
        if (reg->parsed()) {
            stage = "register";
            return cmd_register(reg_src, reg_dst, reg_tf, reg_labeled, reg_cutoff);
        }
        if (detect->parsed()) {
            stage = "detect";
            return cmd_detect(make_config(global), det_hmap, det_pmap, det_csv);
        }
        if (knotfn->parsed()) {
            stage = "knotfn";
            return cmd_knotfn(kf_pmap, kf_csv, kf_svg);
        }
        if (optimize->parsed()) {
            stage = "optimize";
            return cmd_optimize(make_config(global), opt_pmap, opt_pattern, opt_curve);
        }
        if (saw->parsed()) {
            stage = "saw";
            return cmd_saw(make_config(global), saw_gt, saw_pattern, saw_angle, saw_report,
                           saw_pgm);
        }
        if (evaluate->parsed()) {
            stage = "evaluate";
            return cmd_evaluate(ev_pred, ev_gt, ev_iou, ev_theta_bins);
        }
        if (pipeline->parsed()) {
            stage = "pipeline";
            PipelineConfig cfg = make_config(global);
            if (!pl_pmap.empty()) {
                cfg.pmap_source = "file";
                cfg.pmap_path = pl_pmap;
            }
            return cmd_pipeline(cfg, pl_logs, global.jobs);
        }
    } catch (const Error& e) {
        emit_error_json(e.stage().empty() ? stage : e.stage(), e.kind(), e.what());
        return 1;
    } catch (const std::exception& e) {
        emit_error_json(stage, "Unexpected", e.what());
        return 1;
    }
    return 0;
}

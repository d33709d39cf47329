#ifndef LOGSAW_PIPELINE_HPP
#define LOGSAW_PIPELINE_HPP

#include "logsaw/config.hpp"
#include "logsaw/sawsim.hpp"

#include <optional>
#include <string>

namespace logsaw {

// Everything one pipeline run needs, assembled from a config file plus
// --set/--seed overrides. Unknown keys fall back to the documented defaults.
struct PipelineConfig {
    GenParams gen;

    int theta_bins = 360;
    int l_bins = 0; // 0 = one node per 10 mm
    double lambda = 0.01;
    int n_segments = 0; // 0 = one segment per meter of log
    int centerline_bins = 50;

    double detect_sigma_mm = 15.0;
    double detect_threshold = 0.0;
    double detect_floor = 0.05; // below this max response the map is knot-free
    double binarize_at = 0.5;
    int min_area_cells = 4;

    double sigma_deg = 0.0; // 0 = generator-truth mean knot halfwidth
    double step_deg = 1.0;

    double raster_mm = 1.0;
    double arris_band_mm = 2.0;
    double sweep_step_deg = 1.0;

    std::string out_dir = "out";
    std::string cloud_path;   // empty = generate synthetically
    std::string gt_path;      // ground-truth JSON (for saw/baseline stages)
    std::string pattern_path; // empty = built-in two-board pattern
    std::string pmap_source = "detect"; // detect | gt | file
    std::string pmap_path;

    static PipelineConfig from_config(const ConfigMap& kv);
};

// The Fig. 5-style default: two 100x50 boards stacked symmetrically about
// the log center with a 4 mm saw gap.
SawingPattern default_pattern();

// Resolves n_segments = 0 to the length-based default using the cloud's
// bounding-box extent.
std::size_t resolve_n_segments(const PipelineConfig& cfg, const PointCloud& cloud);

struct PipelineSummary {
    double angle_deg = 0;
    double objective = 0;
    std::size_t knot_count = 0;
    std::optional<SawingReport> optimized;
    std::optional<ImprovementReport> improvement;
    double baseline_mean_count = 0;
    double baseline_mean_area_dm2 = 0;
};

// generate -> heightmap -> probability map -> knot function -> optimize ->
// saw at the optimum -> all-angle baseline -> improvement. Writes every
// intermediate artifact under cfg.out_dir. Errors carry the stage name.
PipelineSummary run_pipeline(const PipelineConfig& cfg);

// Batch: seeds cfg.gen.seed .. +n_logs-1, one subdirectory per log, summary
// CSV at <out_dir>/summary.csv; jobs > 1 runs logs concurrently.
std::vector<PipelineSummary> run_pipeline_batch(const PipelineConfig& cfg, int n_logs,
                                                int jobs);

} // namespace logsaw

#endif

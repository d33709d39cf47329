#ifndef LOGSAW_SAWSIM_HPP
#define LOGSAW_SAWSIM_HPP

#include "logsaw/sawopt.hpp"
#include "logsaw/synthgen.hpp"

#include <array>
#include <string>
#include <vector>

namespace logsaw {

enum class FaceType { Wide, Edge, End };

enum class KnotClass { Face, Edge, Arris };

// Knot occupancy on one board face, stored as per-row cell runs
// {row, first_cell, last_cell} of the face raster.
struct FaceOccupancy {
    int knot_id = -1;
    std::vector<std::array<int, 3>> runs;
    std::size_t cell_count = 0;
    int min_u_cell = 0, max_u_cell = 0;
    double z_cell_sum = 0; // sum of row z-centers over occupied cells
};

// One face of one board: raster geometry plus the knots that reach it.
// Long faces scan rows along z with u = the in-plane cross coordinate; end
// faces scan rows along y with u = x.
struct BoardSurfaceGrid {
    int board_id = 0;
    int face_index = 0; // 0,1 wide; 2,3 edge; 4,5 ends
    FaceType type = FaceType::Wide;
    char plane_axis = 'y';
    double plane_offset = 0;
    double res_mm = 1.0;
    double u_min = 0, u_max = 0;
    double row_min = 0, row_max = 0;
    int n_u = 0, n_rows = 0;
    std::vector<FaceOccupancy> knots;

    double u_center(int i) const { return u_min + (i + 0.5) * res_mm; }
    double row_center(int j) const { return row_min + (j + 0.5) * res_mm; }

    // Dense expansion (n_rows x n_u, knot id or -1; lowest id wins overlaps).
    std::vector<int> dense() const;
};

struct SawSimOptions {
    double raster_mm = 1.0;
    double arris_band_mm = 2.0;
};

struct KnotAppearance {
    int knot_id = 0;
    int board_id = 0;
    KnotClass classification = KnotClass::Face;
    double area_mm2 = 0; // summed over the long faces it touches
    double l_pos_mm = 0;
};

struct BoardBreakdown {
    int face = 0, edge = 0, arris = 0;
};

struct SawingReport {
    double angle_deg = 0;
    std::vector<KnotAppearance> appearances;
    std::size_t arris_count = 0;
    std::size_t total_count = 0;
    double arris_area_dm2 = 0;
    std::vector<BoardBreakdown> per_board;
};

// Cuts the pattern from the log rotated to `angle_deg` (knot cones rotate by
// +angle about the pith, oriented butt to top) and computes analytic
// cone/plane occupancy on every board face. The pith is straightened: cones
// live at their (theta, l) ground-truth coordinates.
// Errors: pattern corners outside the minimum log radius ->
// PatternDoesNotFit reporting the deficit in mm.
std::vector<BoardSurfaceGrid> virtual_saw(const VirtualLog& log,
                                          const SawingPattern& pattern,
                                          double angle_deg,
                                          const SawSimOptions& options = {});

// Classification per (knot, board) pair with precedence arris > edge > face:
// arris when occupancy on any long face comes within arris_band of that
// face's long corner line, edge when a narrow face is occupied, face
// otherwise. Board end faces are not classified.
std::vector<KnotAppearance> classify_appearances(const std::vector<BoardSurfaceGrid>& grids,
                                                 double arris_band_mm);

SawingReport make_report(double angle_deg, const SawingPattern& pattern,
                         std::vector<KnotAppearance> appearances);

// virtual_saw + classify in one step.
SawingReport saw_and_classify(const VirtualLog& log, const SawingPattern& pattern,
                              double angle_deg, const SawSimOptions& options = {});

struct BaselineSweep {
    double mean_arris_count = 0;
    double mean_arris_area_dm2 = 0;
    std::vector<double> angles_deg;
    std::vector<std::size_t> arris_counts;
    std::vector<double> arris_areas_dm2;
};

// Full sweep over {0, step, ..., 360-step}; the means are the expected
// outcome of sawing at a random angle. step must divide 360.
BaselineSweep all_angle_baseline(const VirtualLog& log, const SawingPattern& pattern,
                                 double step_deg, const SawSimOptions& options = {});

struct ImprovementReport {
    double optimized_count = 0;
    double baseline_mean_count = 0;
    double optimized_area_dm2 = 0;
    double baseline_mean_area_dm2 = 0;
    bool count_ratio_defined = false;
    bool area_ratio_defined = false;
    double count_change_pct = 0; // (optimized - mean) / mean * 100
    double area_change_pct = 0;
    double arris_vs_total_pct = 0; // 100 * arris / all appearances
    std::string arris_vs_total; // e.g. "20.8% (82/394)"
};

ImprovementReport improvement_report(const SawingReport& optimized,
                                     const BaselineSweep& baseline);

// JSON + CSV serialization of a report; PGM dump of one face raster.
void save_report_json(const SawingReport& report, const ImprovementReport* improvement,
                      const std::string& path);
void save_report_csv(const SawingReport& report, const std::string& path);
void save_face_pgm(const BoardSurfaceGrid& grid, const std::string& path);

const char* to_string(KnotClass c);
const char* to_string(FaceType t);

} // namespace logsaw

#endif

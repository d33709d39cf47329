#include "logsaw/sawsim.hpp"
#include "logsaw/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>

namespace logsaw {

const char* to_string(KnotClass c) {
    switch (c) {
        case KnotClass::Face: return "face";
        case KnotClass::Edge: return "edge";
        case KnotClass::Arris: return "arris";
    }
    return "?";
}

const char* to_string(FaceType t) {
    switch (t) {
        case FaceType::Wide: return "wide";
        case FaceType::Edge: return "edge";
        case FaceType::End: return "end";
    }
    return "?";
}

std::vector<int> BoardSurfaceGrid::dense() const {
    std::vector<int> grid(static_cast<std::size_t>(n_rows) * n_u, -1);
    for (const FaceOccupancy& occ : knots)
        for (const auto& run : occ.runs)
            for (int i = run[1]; i <= run[2]; ++i) {
                int& cell = grid[static_cast<std::size_t>(run[0]) * n_u + i];
                if (cell < 0 || occ.knot_id < cell) cell = occ.knot_id;
            }
    return grid;
}

namespace {

struct ConeSpec {
    double apex_z;
    double dir_x, dir_y; // unit axis in the cross-section plane
    double apex_r;
    double growth; // radius increase per unit length along the axis
    double reach;  // surface radius at the knot position
};

struct Interval {
    double lo, hi;
};

// Solution of A u^2 + B u + C <= 0 as up to two intervals (A < 0 yields the
// two outside pieces, A ~ 0 degenerates to a half-line).
int solve_quadratic_le(double A, double B, double C, Interval out[2]) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (std::abs(A) < 1e-10) {
        if (std::abs(B) < 1e-12) {
            if (C <= 0) {
                out[0] = {-inf, inf};
                return 1;
            }
            return 0;
        }
        if (B > 0) out[0] = {-inf, -C / B};
        else out[0] = {-C / B, inf};
        return 1;
    }
    const double disc = B * B - 4 * A * C;
    if (A > 0) {
        if (disc <= 0) return 0;
        const double s = std::sqrt(disc);
        out[0] = {(-B - s) / (2 * A), (-B + s) / (2 * A)};
        return 1;
    }
    // A < 0: <= 0 outside the roots (everywhere when no real roots)
    if (disc <= 0) {
        out[0] = {-inf, inf};
        return 1;
    }
    const double s = std::sqrt(disc);
    double r1 = (-B - s) / (2 * A);
    double r2 = (-B + s) / (2 * A);
    if (r1 > r2) std::swap(r1, r2);
    out[0] = {-inf, r1};
    out[1] = {r2, inf};
    return 2;
}

// In-cone intervals of u along the row p(u) = p0 + u * unit_dir.
int cone_row_intervals(const ConeSpec& cone, const Vec3& p0, const Vec3& row_dir,
                       Interval out[2]) {
    const Vec3 v0(p0.x(), p0.y(), p0.z() - cone.apex_z);
    const double alpha = v0.x() * cone.dir_x + v0.y() * cone.dir_y;
    const double beta = row_dir.x() * cone.dir_x + row_dir.y() * cone.dir_y;
    const double g2 = 1.0 + cone.growth * cone.growth;

    const double A = 1.0 - g2 * beta * beta;
    const double B =
        2.0 * (v0.dot(row_dir) - g2 * alpha * beta - cone.apex_r * cone.growth * beta);
    const double C = v0.squaredNorm() - g2 * alpha * alpha -
                     2.0 * cone.apex_r * cone.growth * alpha - cone.apex_r * cone.apex_r;

    Interval quad[2];
    const int nq = solve_quadratic_le(A, B, C, quad);
    if (nq == 0) return 0;

    // axial window 0 <= t <= reach, t = alpha + beta * u
    Interval tw;
    if (std::abs(beta) < 1e-12) {
        if (alpha < 0 || alpha > cone.reach) return 0;
        tw = {-std::numeric_limits<double>::infinity(),
              std::numeric_limits<double>::infinity()};
    } else {
        const double u0 = (0.0 - alpha) / beta;
        const double u1 = (cone.reach - alpha) / beta;
        tw = {std::min(u0, u1), std::max(u0, u1)};
    }

    int n = 0;
    for (int i = 0; i < nq; ++i) {
        const double lo = std::max(quad[i].lo, tw.lo);
        const double hi = std::min(quad[i].hi, tw.hi);
        if (lo <= hi) out[n++] = {lo, hi};
    }
    return n;
}

std::vector<BoardSurfaceGrid> make_faces(const BoardRect& board, int board_id,
                                         double log_length, double res) {
    std::vector<BoardSurfaceGrid> faces;
    const double x_lo = board.cx - board.w / 2, x_hi = board.cx + board.w / 2;
    const double y_lo = board.cy - board.h / 2, y_hi = board.cy + board.h / 2;
    const bool wide_is_y = board.w >= board.h; // wide faces span the longer side

    auto long_face = [&](int index, FaceType type, char axis, double offset, double umin,
                         double umax) {
        BoardSurfaceGrid f;
        f.board_id = board_id;
        f.face_index = index;
        f.type = type;
        f.plane_axis = axis;
        f.plane_offset = offset;
        f.res_mm = res;
        f.u_min = umin;
        f.u_max = umax;
        f.row_min = 0;
        f.row_max = log_length;
        f.n_u = std::max(1, static_cast<int>(std::ceil((umax - umin) / res - 1e-9)));
        f.n_rows = std::max(1, static_cast<int>(std::ceil(log_length / res - 1e-9)));
        return f;
    };

    if (wide_is_y) {
        faces.push_back(long_face(0, FaceType::Wide, 'y', y_lo, x_lo, x_hi));
        faces.push_back(long_face(1, FaceType::Wide, 'y', y_hi, x_lo, x_hi));
        faces.push_back(long_face(2, FaceType::Edge, 'x', x_lo, y_lo, y_hi));
        faces.push_back(long_face(3, FaceType::Edge, 'x', x_hi, y_lo, y_hi));
    } else {
        faces.push_back(long_face(0, FaceType::Wide, 'x', x_lo, y_lo, y_hi));
        faces.push_back(long_face(1, FaceType::Wide, 'x', x_hi, y_lo, y_hi));
        faces.push_back(long_face(2, FaceType::Edge, 'y', y_lo, x_lo, x_hi));
        faces.push_back(long_face(3, FaceType::Edge, 'y', y_hi, x_lo, x_hi));
    }

    for (int e = 0; e < 2; ++e) {
        BoardSurfaceGrid f;
        f.board_id = board_id;
        f.face_index = 4 + e;
        f.type = FaceType::End;
        f.plane_axis = 'z';
        f.plane_offset = e == 0 ? 0.0 : log_length;
        f.res_mm = res;
        f.u_min = x_lo;
        f.u_max = x_hi;
        f.row_min = y_lo;
        f.row_max = y_hi;
        f.n_u = std::max(1, static_cast<int>(std::ceil((x_hi - x_lo) / res - 1e-9)));
        f.n_rows = std::max(1, static_cast<int>(std::ceil((y_hi - y_lo) / res - 1e-9)));
        faces.push_back(std::move(f));
    }
    return faces;
}

// Largest coordinate the cone can reach along +/- x or y; linear in t, so the
// extrema sit at the endpoints.
bool cone_reaches_plane(const ConeSpec& cone, char axis, double offset, double slack) {
    const double dir = axis == 'x' ? cone.dir_x : cone.dir_y;
    const double perp = std::sqrt(std::max(0.0, 1.0 - dir * dir));
    const double at0 = cone.apex_r * perp;
    const double base_r = cone.apex_r + cone.growth * cone.reach;
    const double at1 = cone.reach * dir + base_r * perp;
    const double lo1 = cone.reach * dir - base_r * perp;
    if (offset >= 0) return std::max(at0, at1) >= offset - slack;
    return std::min(-at0, lo1) <= offset + slack;
}

} // namespace

std::vector<BoardSurfaceGrid> virtual_saw(const VirtualLog& log,
                                          const SawingPattern& pattern,
                                          double angle_deg, const SawSimOptions& options) {
    const double min_radius = std::min(log.butt_radius_mm, log.top_radius_mm);
    const double need = pattern.max_corner_radius();
    if (need > min_radius)
        fail("PatternDoesNotFit", "pattern needs radius " + std::to_string(need) +
                                      " mm, log minimum is " + std::to_string(min_radius) +
                                      " mm (deficit " + std::to_string(need - min_radius) +
                                      " mm)");
    if (options.raster_mm <= 0) fail("InvalidInput", "raster resolution must be positive");

    const double res = options.raster_mm;
    std::vector<BoardSurfaceGrid> faces;
    for (std::size_t b = 0; b < pattern.boards.size(); ++b) {
        auto board_faces = make_faces(pattern.boards[b], static_cast<int>(b),
                                      log.length_mm, res);
        for (auto& f : board_faces) faces.push_back(std::move(f));
    }

    std::vector<ConeSpec> cones(log.knots.size());
    for (std::size_t k = 0; k < log.knots.size(); ++k) {
        const GroundTruthKnot& knot = log.knots[k];
        const double phi =
            (knot.theta_pos_deg + angle_deg) * std::numbers::pi / 180.0;
        cones[k].apex_z = knot.l_pos_mm;
        cones[k].dir_x = std::cos(phi);
        cones[k].dir_y = std::sin(phi);
        cones[k].apex_r = knot.apex_radius_mm;
        cones[k].reach = log.radius_at(knot.l_pos_mm);
        cones[k].growth = (knot.base_radius_mm - knot.apex_radius_mm) / cones[k].reach;
    }

    for (BoardSurfaceGrid& face : faces) {
        for (std::size_t k = 0; k < cones.size(); ++k) {
            const ConeSpec& cone = cones[k];
            const double base_r = log.knots[k].base_radius_mm;

            FaceOccupancy occ;
            occ.knot_id = static_cast<int>(k);
            occ.min_u_cell = face.n_u;
            occ.max_u_cell = -1;

            if (face.type != FaceType::End) {
                if (!cone_reaches_plane(cone, face.plane_axis, face.plane_offset, res))
                    continue;
                const int j_lo = std::max(
                    0, static_cast<int>((cone.apex_z - base_r) / res) - 1);
                const int j_hi = std::min(
                    face.n_rows - 1, static_cast<int>((cone.apex_z + base_r) / res) + 1);
                const Vec3 row_dir = face.plane_axis == 'y' ? Vec3::UnitX() : Vec3::UnitY();
                for (int j = j_lo; j <= j_hi; ++j) {
                    const double z = face.row_center(j);
                    const Vec3 p0 = face.plane_axis == 'y'
                                        ? Vec3(0.0, face.plane_offset, z)
                                        : Vec3(face.plane_offset, 0.0, z);
                    Interval iv[2];
                    int n = cone_row_intervals(cone, p0, row_dir, iv);
                    if (n == 0) continue;

                    // clip to the log surface
                    const double R = log.radius_at(z);
                    const double q2 = R * R - face.plane_offset * face.plane_offset;
                    if (q2 <= 0) continue;
                    const double q = std::sqrt(q2);

                    for (int m = 0; m < n; ++m) {
                        const double lo = std::max({iv[m].lo, face.u_min, -q});
                        const double hi = std::min({iv[m].hi, face.u_max, q});
                        if (lo > hi) continue;
                        int i_lo = static_cast<int>(std::ceil((lo - face.u_min) / res - 0.5));
                        int i_hi = static_cast<int>(std::floor((hi - face.u_min) / res - 0.5));
                        i_lo = std::max(i_lo, 0);
                        i_hi = std::min(i_hi, face.n_u - 1);
                        if (i_lo > i_hi) continue;
                        occ.runs.push_back({j, i_lo, i_hi});
                        occ.cell_count += static_cast<std::size_t>(i_hi - i_lo + 1);
                        occ.min_u_cell = std::min(occ.min_u_cell, i_lo);
                        occ.max_u_cell = std::max(occ.max_u_cell, i_hi);
                        occ.z_cell_sum += z * static_cast<double>(i_hi - i_lo + 1);
                    }
                }
            } else {
                // end planes: rows along y, u along x, fixed z
                const double z = face.plane_offset;
                if (std::abs(z - cone.apex_z) > base_r + res) continue;
                const double R = log.radius_at(z);
                for (int j = 0; j < face.n_rows; ++j) {
                    const double y = face.row_center(j);
                    Interval iv[2];
                    int n = cone_row_intervals(cone, Vec3(0.0, y, z), Vec3::UnitX(), iv);
                    if (n == 0) continue;
                    const double q2 = R * R - y * y;
                    if (q2 <= 0) continue;
                    const double q = std::sqrt(q2);
                    for (int m = 0; m < n; ++m) {
                        const double lo = std::max({iv[m].lo, face.u_min, -q});
                        const double hi = std::min({iv[m].hi, face.u_max, q});
                        if (lo > hi) continue;
                        int i_lo = static_cast<int>(std::ceil((lo - face.u_min) / res - 0.5));
                        int i_hi = static_cast<int>(std::floor((hi - face.u_min) / res - 0.5));
                        i_lo = std::max(i_lo, 0);
                        i_hi = std::min(i_hi, face.n_u - 1);
                        if (i_lo > i_hi) continue;
                        occ.runs.push_back({j, i_lo, i_hi});
                        occ.cell_count += static_cast<std::size_t>(i_hi - i_lo + 1);
                        occ.min_u_cell = std::min(occ.min_u_cell, i_lo);
                        occ.max_u_cell = std::max(occ.max_u_cell, i_hi);
                        occ.z_cell_sum += z * static_cast<double>(i_hi - i_lo + 1);
                    }
                }
            }
            if (occ.cell_count > 0) face.knots.push_back(std::move(occ));
        }
    }
    return faces;
}

std::vector<KnotAppearance> classify_appearances(const std::vector<BoardSurfaceGrid>& grids,
                                                 double arris_band_mm) {
    struct Agg {
        double area = 0;
        double z_sum = 0;
        std::size_t cells = 0;
        bool near_corner = false;
        bool on_edge_face = false;
    };
    std::map<std::pair<int, int>, Agg> agg; // (knot, board) -> aggregate

    for (const BoardSurfaceGrid& face : grids) {
        if (face.type == FaceType::End) continue; // ends carry no classification
        for (const FaceOccupancy& occ : face.knots) {
            Agg& a = agg[{occ.knot_id, face.board_id}];
            a.area += static_cast<double>(occ.cell_count) * face.res_mm * face.res_mm;
            a.z_sum += occ.z_cell_sum;
            a.cells += occ.cell_count;
            if (face.type == FaceType::Edge) a.on_edge_face = true;
            const double lo_dist = face.u_center(occ.min_u_cell) - face.u_min;
            const double hi_dist = face.u_max - face.u_center(occ.max_u_cell);
            if (std::min(lo_dist, hi_dist) < arris_band_mm) a.near_corner = true;
        }
    }

    std::vector<KnotAppearance> out;
    out.reserve(agg.size());
    for (const auto& [key, a] : agg) {
        KnotAppearance app;
        app.knot_id = key.first;
        app.board_id = key.second;
        app.area_mm2 = a.area;
        app.l_pos_mm = a.cells > 0 ? a.z_sum / static_cast<double>(a.cells) : 0.0;
        app.classification = a.near_corner ? KnotClass::Arris
                             : a.on_edge_face ? KnotClass::Edge
                                              : KnotClass::Face;
        out.push_back(app);
    }
    return out;
}

SawingReport make_report(double angle_deg, const SawingPattern& pattern,
                         std::vector<KnotAppearance> appearances) {
    SawingReport report;
    report.angle_deg = angle_deg;
    report.per_board.assign(pattern.boards.size(), {});
    report.total_count = appearances.size();
    for (const KnotAppearance& app : appearances) {
        BoardBreakdown& b = report.per_board[static_cast<std::size_t>(app.board_id)];
        switch (app.classification) {
            case KnotClass::Face: b.face++; break;
            case KnotClass::Edge: b.edge++; break;
            case KnotClass::Arris:
                b.arris++;
                report.arris_count++;
                report.arris_area_dm2 += app.area_mm2 / 1e4;
                break;
        }
    }
    report.appearances = std::move(appearances);
    return report;
}

SawingReport saw_and_classify(const VirtualLog& log, const SawingPattern& pattern,
                              double angle_deg, const SawSimOptions& options) {
    const auto grids = virtual_saw(log, pattern, angle_deg, options);
    return make_report(angle_deg, pattern,
                       classify_appearances(grids, options.arris_band_mm));
}

BaselineSweep all_angle_baseline(const VirtualLog& log, const SawingPattern& pattern,
                                 double step_deg, const SawSimOptions& options) {
    if (step_deg <= 0 ||
        std::abs(360.0 / step_deg - std::round(360.0 / step_deg)) > 1e-9)
        fail("InvalidInput", "sweep step must divide 360");
    const int n = static_cast<int>(std::round(360.0 / step_deg));

    BaselineSweep sweep;
    sweep.angles_deg.reserve(n);
    sweep.arris_counts.reserve(n);
    sweep.arris_areas_dm2.reserve(n);
    double count_sum = 0, area_sum = 0;
    for (int i = 0; i < n; ++i) {
        const double angle = i * step_deg;
        const SawingReport report = saw_and_classify(log, pattern, angle, options);
        sweep.angles_deg.push_back(angle);
        sweep.arris_counts.push_back(report.arris_count);
        sweep.arris_areas_dm2.push_back(report.arris_area_dm2);
        count_sum += static_cast<double>(report.arris_count);
        area_sum += report.arris_area_dm2;
    }
    sweep.mean_arris_count = count_sum / n;
    sweep.mean_arris_area_dm2 = area_sum / n;
    return sweep;
}

ImprovementReport improvement_report(const SawingReport& optimized,
                                     const BaselineSweep& baseline) {
    ImprovementReport rep;
    rep.optimized_count = static_cast<double>(optimized.arris_count);
    rep.baseline_mean_count = baseline.mean_arris_count;
    rep.optimized_area_dm2 = optimized.arris_area_dm2;
    rep.baseline_mean_area_dm2 = baseline.mean_arris_area_dm2;

    if (baseline.mean_arris_count > 0) {
        rep.count_ratio_defined = true;
        rep.count_change_pct =
            (rep.optimized_count - rep.baseline_mean_count) / rep.baseline_mean_count * 100.0;
    } else {
        rep.count_ratio_defined = optimized.arris_count == 0;
        rep.count_change_pct = 0;
    }
    if (baseline.mean_arris_area_dm2 > 0) {
        rep.area_ratio_defined = true;
        rep.area_change_pct =
            (rep.optimized_area_dm2 - rep.baseline_mean_area_dm2) /
            rep.baseline_mean_area_dm2 * 100.0;
    } else {
        rep.area_ratio_defined = optimized.arris_area_dm2 == 0;
        rep.area_change_pct = 0;
    }

    rep.arris_vs_total_pct =
        optimized.total_count > 0
            ? 100.0 * static_cast<double>(optimized.arris_count) /
                  static_cast<double>(optimized.total_count)
            : 0.0;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.1f%% (%zu/%zu)", rep.arris_vs_total_pct,
                  optimized.arris_count, optimized.total_count);
    rep.arris_vs_total = buf;
    return rep;
}

void save_report_json(const SawingReport& report, const ImprovementReport* improvement,
                      const std::string& path) {
    nlohmann::json j;
    j["angle_deg"] = report.angle_deg;
    j["arris_count"] = report.arris_count;
    j["total_count"] = report.total_count;
    j["arris_area_dm2"] = report.arris_area_dm2;
    nlohmann::json apps = nlohmann::json::array();
    for (const KnotAppearance& a : report.appearances)
        apps.push_back({{"knot_id", a.knot_id},
                        {"board_id", a.board_id},
                        {"class", to_string(a.classification)},
                        {"area_mm2", a.area_mm2},
                        {"l_mm", a.l_pos_mm}});
    j["appearances"] = std::move(apps);
    nlohmann::json boards = nlohmann::json::array();
    for (const BoardBreakdown& b : report.per_board)
        boards.push_back({{"face", b.face}, {"edge", b.edge}, {"arris", b.arris}});
    j["per_board"] = std::move(boards);
    if (improvement) {
        j["improvement"] = {
            {"count_change_pct", improvement->count_change_pct},
            {"count_ratio_defined", improvement->count_ratio_defined},
            {"area_change_pct", improvement->area_change_pct},
            {"area_ratio_defined", improvement->area_ratio_defined},
            {"baseline_mean_count", improvement->baseline_mean_count},
            {"baseline_mean_area_dm2", improvement->baseline_mean_area_dm2},
            {"arris_vs_total", improvement->arris_vs_total},
        };
    }
    std::ofstream out(path);
    if (!out) fail("IOError", "cannot write " + path);
    out << j.dump(2) << "\n";
}

void save_report_csv(const SawingReport& report, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) fail("IOError", "cannot write " + path);
    std::fprintf(f, "knot_id,board_id,class,area_mm2,l_mm\n");
    for (const KnotAppearance& a : report.appearances)
        std::fprintf(f, "%d,%d,%s,%.6f,%.6f\n", a.knot_id, a.board_id,
                     to_string(a.classification), a.area_mm2, a.l_pos_mm);
    std::fclose(f);
}

void save_face_pgm(const BoardSurfaceGrid& grid, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) fail("IOError", "cannot write " + path);
    const std::vector<int> cells = grid.dense();
    std::fprintf(f, "P2\n%d %d\n255\n", grid.n_u, grid.n_rows);
    for (int j = 0; j < grid.n_rows; ++j) {
        for (int i = 0; i < grid.n_u; ++i) {
            const int id = cells[static_cast<std::size_t>(j) * grid.n_u + i];
            const int v = id < 0 ? 0 : 64 + (id * 37) % 192;
            std::fprintf(f, i == 0 ? "%d" : " %d", v);
        }
        std::fputc('\n', f);
    }
    std::fclose(f);
}

} // namespace logsaw

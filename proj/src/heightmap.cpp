#include "logsaw/heightmap.hpp"
#include "logsaw/error.hpp"
#include "logsaw/grid_io.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace logsaw {

namespace {

struct BilinearStencil {
    int r0, r1, c0, c1;
    double w00, w01, w10, w11; // w[row][col]
};

BilinearStencil locate(double theta_deg, double l_mm, int theta_bins, int l_bins,
                       double l_extent_mm) {
    const double dtheta = 360.0 / theta_bins;
    double t = theta_deg / dtheta;
    t -= std::floor(t / theta_bins) * theta_bins; // wrap into [0, theta_bins)
    int c0 = static_cast<int>(t);
    if (c0 >= theta_bins) c0 = 0;
    const double wc = t - c0;
    const int c1 = (c0 + 1) % theta_bins;

    const double dl = l_bins > 1 ? l_extent_mm / (l_bins - 1) : 1.0;
    double s = dl > 0 ? l_mm / dl : 0.0;
    s = std::clamp(s, 0.0, static_cast<double>(l_bins - 1));
    int r0 = std::min(static_cast<int>(s), l_bins - 2);
    r0 = std::max(r0, 0);
    const double wr = std::clamp(s - r0, 0.0, 1.0);

    BilinearStencil b;
    b.r0 = r0;
    b.r1 = r0 + 1;
    b.c0 = c0;
    b.c1 = c1;
    b.w00 = (1 - wr) * (1 - wc);
    b.w01 = (1 - wr) * wc;
    b.w10 = wr * (1 - wc);
    b.w11 = wr * wc;
    return b;
}

// 9-point stencil operator for A^T A + lambda * D^T D, circular in theta.
class NormalOperator {
public:
    NormalOperator(int theta_bins, int l_bins)
        : nt_(theta_bins), nl_(l_bins),
          coeff_(static_cast<std::size_t>(theta_bins) * l_bins * 9, 0.0) {}

    double& entry(int r, int c, int dr, int dc) {
        return coeff_[(static_cast<std::size_t>(r) * nt_ + c) * 9 +
                      static_cast<std::size_t>(dr + 1) * 3 + (dc + 1)];
    }

    void apply(const std::vector<double>& x, std::vector<double>& y) const {
        for (int r = 0; r < nl_; ++r) {
            for (int c = 0; c < nt_; ++c) {
                const double* st = &coeff_[(static_cast<std::size_t>(r) * nt_ + c) * 9];
                double acc = 0;
                for (int dr = -1; dr <= 1; ++dr) {
                    const int rr = r + dr;
                    if (rr < 0 || rr >= nl_) continue;
                    for (int dc = -1; dc <= 1; ++dc) {
                        const double w = st[(dr + 1) * 3 + (dc + 1)];
                        if (w == 0.0) continue;
                        int cc = c + dc;
                        if (cc < 0) cc += nt_;
                        if (cc >= nt_) cc -= nt_;
                        acc += w * x[static_cast<std::size_t>(rr) * nt_ + cc];
                    }
                }
                y[static_cast<std::size_t>(r) * nt_ + c] = acc;
            }
        }
    }

    double diagonal(int r, int c) const {
        return coeff_[(static_cast<std::size_t>(r) * nt_ + c) * 9 + 4];
    }

private:
    int nt_, nl_;
    std::vector<double> coeff_;
};

} // namespace

double HeightMap::mean_value() const {
    if (values.empty()) return 0.0;
    // sorted accumulation keeps the result identical under column rotations
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    double s = 0;
    for (double v : sorted) s += v;
    return s / static_cast<double>(values.size());
}

double HeightMap::sample(double theta_deg, double l_mm) const {
    const BilinearStencil b = locate(theta_deg, l_mm, theta_bins, l_bins, l_extent_mm);
    return b.w00 * at(b.r0, b.c0) + b.w01 * at(b.r0, b.c1) +
           b.w10 * at(b.r1, b.c0) + b.w11 * at(b.r1, b.c1);
}

int default_l_bins(double l_extent_mm) {
    return std::max(2, static_cast<int>(std::ceil(l_extent_mm / 10.0)));
}

HeightMap fit_heightmap(const std::vector<CylindricalSample>& samples,
                        int theta_bins, int l_bins, double lambda,
                        const FitOptions& options, FitDiagnostics* diagnostics) {
    if (samples.empty()) fail("InvalidInput", "no cylindrical samples to fit");
    if (theta_bins < 2 || l_bins < 2) fail("InvalidInput", "need at least 2 bins per axis");
    if (lambda < 0) fail("InvalidInput", "lambda must be >= 0");

    double l_extent = options.l_extent_mm;
    if (l_extent <= 0) {
        for (const CylindricalSample& s : samples) l_extent = std::max(l_extent, s.l);
        if (l_extent <= 0) l_extent = 1.0;
    }

    HeightMap map;
    map.theta_bins = theta_bins;
    map.l_bins = l_bins;
    map.l_extent_mm = l_extent;
    map.lambda = lambda;

    const std::size_t n = static_cast<std::size_t>(theta_bins) * l_bins;
    std::vector<double> b(n, 0.0);
    NormalOperator M(theta_bins, l_bins);

    double rho_mean = 0;
    for (const CylindricalSample& s : samples) rho_mean += s.rho;
    rho_mean /= static_cast<double>(samples.size());

    for (const CylindricalSample& s : samples) {
        const BilinearStencil st = locate(s.theta_deg, s.l, theta_bins, l_bins, l_extent);
        const int rows[4] = {st.r0, st.r0, st.r1, st.r1};
        const int cols[4] = {st.c0, st.c1, st.c0, st.c1};
        const int drs[4] = {0, 0, 1, 1};
        const int dcs[4] = {0, 1, 0, 1};
        const double w[4] = {st.w00, st.w01, st.w10, st.w11};
        for (int i = 0; i < 4; ++i) {
            b[static_cast<std::size_t>(rows[i]) * theta_bins + cols[i]] += w[i] * s.rho;
            for (int j = 0; j < 4; ++j)
                M.entry(rows[i], cols[i], drs[j] - drs[i], dcs[j] - dcs[i]) += w[i] * w[j];
        }
    }

    // Gradient penalty: one term per grid edge, theta edges wrap.
    for (int r = 0; r < l_bins; ++r) {
        for (int c = 0; c < theta_bins; ++c) {
            M.entry(r, c, 0, 0) += lambda;
            M.entry(r, c, 0, 1) -= lambda;
            const int c2 = (c + 1) % theta_bins;
            M.entry(r, c2, 0, 0) += lambda;
            M.entry(r, c2, 0, -1) -= lambda;
            if (r + 1 < l_bins) {
                M.entry(r, c, 0, 0) += lambda;
                M.entry(r, c, 1, 0) -= lambda;
                M.entry(r + 1, c, 0, 0) += lambda;
                M.entry(r + 1, c, -1, 0) -= lambda;
            }
        }
    }

    // Jacobi-preconditioned CG, fixed iteration order for bit reproducibility.
    std::vector<double> x(n, rho_mean), r(n), z(n), p(n), Ap(n);
    std::vector<double> invdiag(n);
    for (int rr = 0; rr < l_bins; ++rr)
        for (int cc = 0; cc < theta_bins; ++cc) {
            const double d = M.diagonal(rr, cc);
            invdiag[static_cast<std::size_t>(rr) * theta_bins + cc] = d > 1e-300 ? 1.0 / d : 1.0;
        }

    double bnorm = 0;
    for (double v : b) bnorm += v * v;
    bnorm = std::sqrt(bnorm);

    M.apply(x, Ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - Ap[i];
    for (std::size_t i = 0; i < n; ++i) z[i] = invdiag[i] * r[i];
    p = z;
    double rz = 0;
    for (std::size_t i = 0; i < n; ++i) rz += r[i] * z[i];

    const double tol = options.cg_tolerance * (bnorm > 0 ? bnorm : 1.0);
    int it = 0;
    double rnorm = 0;
    for (double v : r) rnorm += v * v;
    rnorm = std::sqrt(rnorm);

    while (rnorm > tol && it < options.cg_max_iterations && rz > 0) {
        M.apply(p, Ap);
        double pAp = 0;
        for (std::size_t i = 0; i < n; ++i) pAp += p[i] * Ap[i];
        if (pAp <= 0) break;
        const double alpha = rz / pAp;
        for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
        for (std::size_t i = 0; i < n; ++i) r[i] -= alpha * Ap[i];
        for (std::size_t i = 0; i < n; ++i) z[i] = invdiag[i] * r[i];
        double rz_new = 0;
        for (std::size_t i = 0; i < n; ++i) rz_new += r[i] * z[i];
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        rnorm = 0;
        for (double v : r) rnorm += v * v;
        rnorm = std::sqrt(rnorm);
        ++it;
    }

    if (diagnostics) {
        diagnostics->iterations = it;
        diagnostics->relative_residual = bnorm > 0 ? rnorm / bnorm : rnorm;
        diagnostics->converged = rnorm <= tol;
    }

    map.values = std::move(x);
    return map;
}

double fit_objective(const HeightMap& map,
                     const std::vector<CylindricalSample>& samples) {
    double obj = 0;
    for (const CylindricalSample& s : samples) {
        const double d = map.sample(s.theta_deg, s.l) - s.rho;
        obj += d * d;
    }
    double reg = 0;
    for (int r = 0; r < map.l_bins; ++r)
        for (int c = 0; c < map.theta_bins; ++c) {
            const double v = map.at(r, c);
            const double dh = map.at(r, (c + 1) % map.theta_bins) - v;
            reg += dh * dh;
            if (r + 1 < map.l_bins) {
                const double dv = map.at(r + 1, c) - v;
                reg += dv * dv;
            }
        }
    return obj + map.lambda * reg;
}

void save_hmap(const HeightMap& map, const std::string& path) {
    save_grid(map.values, map.theta_bins, map.l_bins, map.l_extent_mm, "HMAP", path);
}

HeightMap load_hmap(const std::string& path) {
    HeightMap map;
    load_grid(map.values, map.theta_bins, map.l_bins, map.l_extent_mm, "HMAP", path);
    return map;
}

} // namespace logsaw

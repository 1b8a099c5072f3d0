#include "mdra/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mdra/vb_engine.hpp"

namespace mdra {

namespace {

constexpr double kPowerTol = 1e-10;
constexpr std::size_t kPowerMaxIter = 100000;

// y = B x for a dense symmetric matrix stored row-major.
void symv(const std::vector<double>& B, std::size_t n, const std::vector<double>& x,
          std::vector<double>& y) {
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        const double* row = &B[i * n];
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
}

}  // namespace

std::pair<std::vector<std::size_t>, std::vector<double>> assign_and_mass(const Mat& R) {
    check_row_stochastic(R);
    std::vector<std::size_t> assignments(R.rows, 0);
    std::vector<double> masses(R.cols, 0.0);
    for (std::size_t n = 0; n < R.rows; ++n) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < R.cols; ++k)
            if (R(n, k) > R(n, best)) best = k;  // ties keep the lowest index
        assignments[n] = best;
        for (std::size_t k = 0; k < R.cols; ++k) masses[k] += R(n, k);
    }
    if (R.rows > 0)
        for (double& m : masses) m /= static_cast<double>(R.rows);
    return {std::move(assignments), std::move(masses)};
}

double purity(const std::vector<std::size_t>& assignments, const std::vector<std::string>& labels) {
    if (assignments.empty()) throw DomainError("purity: empty input");
    if (assignments.size() != labels.size())
        throw ShapeError("purity: assignments and labels differ in length");
    std::map<std::size_t, std::map<std::string, std::size_t>> counts;
    for (std::size_t i = 0; i < assignments.size(); ++i) ++counts[assignments[i]][labels[i]];
    std::size_t majority_total = 0;
    for (const auto& [cluster, by_label] : counts) {
        std::size_t best = 0;
        for (const auto& [label, count] : by_label) best = std::max(best, count);
        majority_total += best;
    }
    return static_cast<double>(majority_total) / static_cast<double>(assignments.size());
}

Mat complex_rows_to_real(const CMat& H) {
    Mat out(H.rows, 2 * H.cols);
    for (std::size_t i = 0; i < H.rows; ++i)
        for (std::size_t j = 0; j < H.cols; ++j) {
            out(i, j) = H(i, j).real();
            out(i, H.cols + j) = H(i, j).imag();
        }
    return out;
}

MdsResult classical_mds(const Mat& points, std::size_t target_dim) {
    const std::size_t n = points.rows;
    if (target_dim < 1) throw ConfigError("classical_mds: target_dim must be >= 1");
    if (n < target_dim)
        throw ConfigError("classical_mds: need at least target_dim points");

    // Squared Euclidean distances, then double centering: B = -1/2 J D2 J.
    std::vector<double> d2(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < points.cols; ++c) {
                const double d = points(i, c) - points(j, c);
                acc += d * d;
            }
            d2[i * n + j] = acc;
            d2[j * n + i] = acc;
        }
    std::vector<double> row_mean(n, 0.0);
    double total_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) row_mean[i] += d2[i * n + j];
        row_mean[i] /= static_cast<double>(n);
        total_mean += row_mean[i];
    }
    total_mean /= static_cast<double>(n);
    std::vector<double> B(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            B[i * n + j] = -0.5 * (d2[i * n + j] - row_mean[i] - row_mean[j] + total_mean);

    MdsResult res;
    res.coords = Mat(n, target_dim, 0.0);
    res.positive_axes = 0;

    // Scale reference for deciding that an eigenvalue is effectively zero.
    double b_scale = 0.0;
    for (double v : B) b_scale = std::max(b_scale, std::abs(v));
    const double eig_floor = b_scale * 1e-12;

    std::vector<double> x(n), y(n);
    for (std::size_t axis = 0; axis < target_dim; ++axis) {
        // Deterministic start vector.
        Rng rng(0x9e3779b97f4a7c15ULL + axis);
        double nrm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rng.uniform(-1.0, 1.0);
            nrm += x[i] * x[i];
        }
        nrm = std::sqrt(nrm);
        for (double& v : x) v /= nrm;

        double lambda = 0.0;
        bool converged = false;
        for (std::size_t it = 0; it < kPowerMaxIter; ++it) {
            symv(B, n, x, y);
            double ynorm = 0.0;
            for (double v : y) ynorm += v * v;
            ynorm = std::sqrt(ynorm);
            if (ynorm <= eig_floor || ynorm == 0.0) {
                lambda = 0.0;
                converged = true;
                break;
            }
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += x[i] * y[i];
            lambda = dot;  // Rayleigh quotient (x is unit)
            double diff_pos = 0.0, diff_neg = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double xi_new = y[i] / ynorm;
                diff_pos += (xi_new - x[i]) * (xi_new - x[i]);
                diff_neg += (xi_new + x[i]) * (xi_new + x[i]);
                x[i] = xi_new;
            }
            if (std::min(std::sqrt(diff_pos), std::sqrt(diff_neg)) < kPowerTol) {
                converged = true;
                break;
            }
        }
        (void)converged;
        if (lambda <= eig_floor) break;  // no more positive eigenvalues: zero-pad

        // Fix the sign: first coordinate above 1e-12 in magnitude is positive.
        for (std::size_t i = 0; i < n; ++i) {
            if (std::abs(x[i]) > 1e-12) {
                if (x[i] < 0.0)
                    for (double& v : x) v = -v;
                break;
            }
        }
        const double scale = std::sqrt(lambda);
        for (std::size_t i = 0; i < n; ++i) res.coords(i, axis) = scale * x[i];
        ++res.positive_axes;

        // Deflate.
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) B[i * n + j] -= lambda * x[i] * x[j];
    }
    return res;
}

ClusterReport build_report(const Mat& R, const std::vector<std::string>& labels,
                           std::size_t embed_dim) {
    ClusterReport report;
    auto [assignments, masses] = assign_and_mass(R);
    report.assignments = std::move(assignments);
    report.masses = std::move(masses);
    if (!labels.empty()) report.purity = purity(report.assignments, labels);
    if (embed_dim > 0) report.embedding = classical_mds(R, embed_dim).coords;
    return report;
}

}  // namespace mdra

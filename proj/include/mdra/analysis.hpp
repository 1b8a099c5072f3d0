#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mdra/common.hpp"

namespace mdra {

struct ClusterReport {
    std::vector<std::size_t> assignments;  // argmax of each R row
    std::vector<double> masses;            // column means of R
    std::optional<double> purity;          // only when labels are known
    std::optional<Mat> embedding;          // N x m MDS coordinates
};

// Per-row argmax (ties go to the lowest index) and column means.
std::pair<std::vector<std::size_t>, std::vector<double>> assign_and_mass(const Mat& R);

// sum over clusters of the majority label count, divided by N.
double purity(const std::vector<std::size_t>& assignments, const std::vector<std::string>& labels);

struct MdsResult {
    Mat coords;                  // N x m
    std::size_t positive_axes;   // axes backed by positive eigenvalues
};

/// Classical (Torgerson) MDS on Euclidean distances: double-center the squared
/// distance matrix, extract the top-m eigenpairs by power iteration with
/// deflation (tolerance 1e-10), scale eigenvectors by sqrt(eigenvalue). When
/// fewer than m positive eigenvalues exist the remaining axes are zero.
/// Sign convention: the first coordinate of each axis that exceeds 1e-12 in
/// magnitude is made positive.
MdsResult classical_mds(const Mat& points, std::size_t target_dim);

// N x 2L real view of complex features: [Re | Im] per row.
Mat complex_rows_to_real(const CMat& H);

// Assignments, masses, optional purity (labels nonempty) and optional MDS
// embedding of the R rows (embed_dim > 0).
ClusterReport build_report(const Mat& R, const std::vector<std::string>& labels,
                           std::size_t embed_dim);

}  // namespace mdra

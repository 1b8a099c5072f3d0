#pragma once

#include <cstdint>
#include <vector>

#include "mdra/common.hpp"

namespace mdra {

/// Digamma function psi(x) for x > 0, absolute error <= 1e-10. Uses the
/// recurrence psi(x) = psi(x+1) - 1/x to shift the argument to >= 6, then the
/// asymptotic series in 1/x^2.
double digamma(double x);

/// E[log beta] under Gamma(beta | nu, lambda) (shape/rate) = psi(nu) - log(lambda).
double expected_log_beta(double nu, double lambda);

// KL(Dirichlet(theta_bar) || Dirichlet(theta0 * 1)) in closed form.
double kl_dirichlet_symmetric(const std::vector<double>& theta_bar, double theta0);

// KL(Gamma(nu_q, lambda_q) || Gamma(nu_p, lambda_p)), shape/rate convention.
double kl_gamma(double nu_q, double lambda_q, double nu_p, double lambda_p);

// Prior hyperparameters: Dirichlet concentration theta0 over the K decoder
// allocations, Gamma(nu0, lambda0) over the observation precision beta.
struct Hyperparams {
    double theta0 = 0.5;
    double nu0 = 1.0;
    double lambda0 = 0.01;
    std::size_t K = 5;
};

// Variational posterior: Dirichlet(theta_bar) over allocation probabilities,
// Gamma(nu_bar, lambda_bar) over the precision, and the responsibility matrix
// R (N x K, rows sum to 1) holding r_nk = E_q[y_nk].
struct VBState {
    std::vector<double> theta_bar;
    double nu_bar = 0.0;
    double lambda_bar = 0.0;
    Mat R;
};

// Reconstruction errors E(n,k) = ||X^n - g(h_n | decoder k)||_F^2 plus the
// total signal dimension sizes[n] = T_n * D of every signal.
struct ErrorMatrix {
    Mat E;
    std::vector<double> sizes;
};

struct PosteriorParams {
    std::vector<double> theta_bar;
    double nu_bar = 0.0;
    double lambda_bar = 0.0;
};

/// VB E-step: recomputes responsibilities from the current posterior.
/// Row n: log rho_nk = psi(theta_bar_k) - psi(sum theta_bar)
///                     - E(n,k) nu_bar/lambda_bar
///                     + (sizes_n/2)(psi(nu_bar) - log lambda_bar)
///                     - (sizes_n/2) log pi,
/// normalized per row with a log-sum-exp shift by the row maximum.
Mat vb_e_step(const ErrorMatrix& err, const VBState& state);

/// VB M-step: N_k = sum_n r_nk, theta_bar_k = theta0 + N_k,
/// nu_bar = nu0 + (1/2) sum_n sizes_n,
/// lambda_bar = lambda0 + sum_nk r_nk E(n,k).
PosteriorParams vb_m_step(const ErrorMatrix& err, const Mat& R, const Hyperparams& hyper);

/// The variational free energy (negated evidence lower bound) in closed form:
///   sum_nk r log r  -  sum_nk r E[log alpha_k]
///   + KL(Dirichlet) + KL(Gamma)
///   + sum_nk r [ E[beta] E(n,k) - (sizes_n/2)(E[log beta] - log pi) ].
double variational_free_energy(const ErrorMatrix& err, const VBState& state,
                               const Hyperparams& hyper);

struct VBRunResult {
    VBState state;
    // free_energy[0] after the initializing M-step, then one entry per E+M pass.
    std::vector<double> free_energy;
};

/// Coordinate descent on the free energy. The posterior is initialized by an
/// M-step on init_R (making the first E-step well defined), then E and M
/// alternate `iters` times.
VBRunResult run_vb(const ErrorMatrix& err, const Hyperparams& hyper, std::size_t iters,
                   const Mat& init_R);

struct ClusterMass {
    std::size_t index = 0;
    double mass = 0.0;
};

/// Clusters whose average responsibility mass reaches mass_threshold,
/// sorted by descending mass.
std::vector<ClusterMass> effective_clusters(const Mat& R, double mass_threshold);

// All K cluster masses (column means of R) sorted by descending mass.
std::vector<ClusterMass> cluster_masses(const Mat& R);

// Throws ResponsibilityError unless every row of R sums to 1 within 1e-9
// with entries in [0, 1].
void check_row_stochastic(const Mat& R);

}  // namespace mdra

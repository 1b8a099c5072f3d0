#include "mdra/vb_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mdra {

namespace {

constexpr double kRowSumTol = 1e-9;

void check_hyper(const Hyperparams& h) {
    if (!(h.theta0 > 0.0) || !(h.nu0 > 0.0) || !(h.lambda0 > 0.0))
        throw DomainError("hyperparameters theta0, nu0, lambda0 must be strictly positive");
    if (h.K < 1) throw ConfigError("K must be >= 1");
}

void check_errors(const ErrorMatrix& err) {
    if (err.sizes.size() != err.E.rows)
        throw ShapeError("ErrorMatrix: sizes length " + std::to_string(err.sizes.size()) +
                         " does not match N=" + std::to_string(err.E.rows));
    for (double e : err.E.data)
        if (!std::isfinite(e) || e < 0.0)
            throw DataError("ErrorMatrix: entries must be finite and nonnegative");
    for (double s : err.sizes)
        if (!(s >= 1.0)) throw DataError("ErrorMatrix: sizes entries must be >= 1");
}

void check_state(const VBState& state, std::size_t N, std::size_t K) {
    if (state.theta_bar.size() != K)
        throw ShapeError("VBState: theta_bar has length " + std::to_string(state.theta_bar.size()) +
                         ", expected K=" + std::to_string(K));
    if (state.R.rows != N || state.R.cols != K)
        throw ShapeError("VBState: R has shape " + std::to_string(state.R.rows) + "x" +
                         std::to_string(state.R.cols));
    for (double t : state.theta_bar)
        if (!(t > 0.0)) throw DomainError("VBState: theta_bar entries must be positive");
    if (!(state.nu_bar > 0.0) || !(state.lambda_bar > 0.0))
        throw DomainError("VBState: nu_bar and lambda_bar must be positive");
}

}  // namespace

void check_row_stochastic(const Mat& R) {
    for (std::size_t n = 0; n < R.rows; ++n) {
        double sum = 0.0;
        for (std::size_t k = 0; k < R.cols; ++k) {
            const double r = R(n, k);
            if (!(r >= 0.0) || r > 1.0 + kRowSumTol)
                throw ResponsibilityError("responsibility out of [0,1] in row " +
                                          std::to_string(n));
            sum += r;
        }
        if (std::abs(sum - 1.0) > kRowSumTol)
            throw ResponsibilityError("responsibility row " + std::to_string(n) + " sums to " +
                                      std::to_string(sum));
    }
}

double digamma(double x) {
    if (!(x > 0.0)) throw DomainError("digamma: argument must be positive");
    double acc = 0.0;
    while (x < 6.0) {  // psi(x) = psi(x+1) - 1/x
        acc -= 1.0 / x;
        x += 1.0;
    }
    // Asymptotic series: psi(x) ~ ln x - 1/(2x) - sum_n B_{2n}/(2n x^{2n}).
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double p = inv2;
    double series = -p / 12.0;
    p *= inv2;
    series += p / 120.0;
    p *= inv2;
    series -= p / 252.0;
    p *= inv2;
    series += p / 240.0;
    p *= inv2;
    series -= p / 132.0;
    p *= inv2;
    series += p * (691.0 / 32760.0);
    p *= inv2;
    series -= p / 12.0;
    return acc + std::log(x) - 0.5 * inv + series;
}

double expected_log_beta(double nu, double lambda) {
    if (!(nu > 0.0) || !(lambda > 0.0))
        throw DomainError("expected_log_beta: nu and lambda must be positive");
    return digamma(nu) - std::log(lambda);
}

double kl_dirichlet_symmetric(const std::vector<double>& theta_bar, double theta0) {
    if (theta_bar.empty() || !(theta0 > 0.0))
        throw DomainError("kl_dirichlet_symmetric: bad arguments");
    const std::size_t K = theta_bar.size();
    double sum_q = 0.0;
    for (double t : theta_bar) {
        if (!(t > 0.0)) throw DomainError("kl_dirichlet_symmetric: nonpositive parameter");
        sum_q += t;
    }
    const double psi_sum = digamma(sum_q);
    double kl = std::lgamma(sum_q) - std::lgamma(static_cast<double>(K) * theta0) +
                static_cast<double>(K) * std::lgamma(theta0);
    for (double t : theta_bar) kl += -std::lgamma(t) + (t - theta0) * (digamma(t) - psi_sum);
    return kl;
}

double kl_gamma(double nu_q, double lambda_q, double nu_p, double lambda_p) {
    if (!(nu_q > 0.0) || !(lambda_q > 0.0) || !(nu_p > 0.0) || !(lambda_p > 0.0))
        throw DomainError("kl_gamma: parameters must be positive");
    return (nu_q - nu_p) * digamma(nu_q) - std::lgamma(nu_q) + std::lgamma(nu_p) +
           nu_p * (std::log(lambda_q) - std::log(lambda_p)) +
           nu_q * (lambda_p - lambda_q) / lambda_q;
}

Mat vb_e_step(const ErrorMatrix& err, const VBState& state) {
    const std::size_t N = err.E.rows, K = err.E.cols;
    check_errors(err);
    check_state(state, N, K);

    constexpr double log_pi = 1.1447298858494001741;  // log(pi)
    double sum_theta = 0.0;
    for (double t : state.theta_bar) sum_theta += t;
    const double psi_sum = digamma(sum_theta);
    std::vector<double> e_log_alpha(K);
    for (std::size_t k = 0; k < K; ++k) e_log_alpha[k] = digamma(state.theta_bar[k]) - psi_sum;
    const double e_beta = state.nu_bar / state.lambda_bar;
    const double e_log_beta = digamma(state.nu_bar) - std::log(state.lambda_bar);

    Mat R(N, K);
    std::vector<double> logits(K);
    for (std::size_t n = 0; n < N; ++n) {
        const double half_dim = 0.5 * err.sizes[n];
        double max_logit = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < K; ++k) {
            logits[k] = e_log_alpha[k] - err.E(n, k) * e_beta + half_dim * e_log_beta -
                        half_dim * log_pi;
            max_logit = std::max(max_logit, logits[k]);
        }
        double z = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            logits[k] = std::exp(logits[k] - max_logit);
            z += logits[k];
        }
        for (std::size_t k = 0; k < K; ++k) R(n, k) = logits[k] / z;
    }
    return R;
}

PosteriorParams vb_m_step(const ErrorMatrix& err, const Mat& R, const Hyperparams& hyper) {
    const std::size_t N = err.E.rows, K = err.E.cols;
    check_hyper(hyper);
    check_errors(err);
    if (R.rows != N || R.cols != K) throw ShapeError("vb_m_step: R shape mismatch");
    check_row_stochastic(R);

    PosteriorParams post;
    post.theta_bar.assign(K, hyper.theta0);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t k = 0; k < K; ++k) post.theta_bar[k] += R(n, k);

    double total_dim = 0.0;
    for (double s : err.sizes) total_dim += s;
    post.nu_bar = hyper.nu0 + 0.5 * total_dim;  // independent of R and errors

    double weighted_err = 0.0;
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t k = 0; k < K; ++k) weighted_err += R(n, k) * err.E(n, k);
    post.lambda_bar = hyper.lambda0 + weighted_err;
    return post;
}

double variational_free_energy(const ErrorMatrix& err, const VBState& state,
                               const Hyperparams& hyper) {
    const std::size_t N = err.E.rows, K = err.E.cols;
    check_hyper(hyper);
    check_errors(err);
    check_state(state, N, K);
    check_row_stochastic(state.R);

    // Accumulated in long double: the dominant terms scale with sum(sizes) and
    // the monotonicity contract is a 1e-9 absolute tolerance on differences.
    constexpr long double log_pi = 1.1447298858494001741L;
    long double sum_theta = 0.0L;
    for (double t : state.theta_bar) sum_theta += t;
    const long double psi_sum = digamma(static_cast<double>(sum_theta));
    const long double e_beta = static_cast<long double>(state.nu_bar) / state.lambda_bar;
    const long double e_log_beta = digamma(state.nu_bar) - std::log(state.lambda_bar);

    std::vector<long double> e_log_alpha(K);
    for (std::size_t k = 0; k < K; ++k)
        e_log_alpha[k] = static_cast<long double>(digamma(state.theta_bar[k])) - psi_sum;

    long double f = 0.0L;
    for (std::size_t n = 0; n < N; ++n) {
        const long double half_dim = 0.5L * err.sizes[n];
        for (std::size_t k = 0; k < K; ++k) {
            const long double r = state.R(n, k);
            if (r == 0.0L) continue;  // 0 log 0 := 0
            f += r * (std::log(static_cast<double>(r)) - e_log_alpha[k]);
            f += r * (e_beta * err.E(n, k) - half_dim * (e_log_beta - log_pi));
        }
    }
    f += kl_dirichlet_symmetric(state.theta_bar, hyper.theta0);
    f += kl_gamma(state.nu_bar, state.lambda_bar, hyper.nu0, hyper.lambda0);
    return static_cast<double>(f);
}

VBRunResult run_vb(const ErrorMatrix& err, const Hyperparams& hyper, std::size_t iters,
                   const Mat& init_R) {
    check_hyper(hyper);
    check_errors(err);
    if (init_R.rows != err.E.rows || init_R.cols != err.E.cols)
        throw ShapeError("run_vb: init_R shape mismatch");
    check_row_stochastic(init_R);

    VBRunResult res;
    res.state.R = init_R;
    PosteriorParams post = vb_m_step(err, res.state.R, hyper);
    res.state.theta_bar = post.theta_bar;
    res.state.nu_bar = post.nu_bar;
    res.state.lambda_bar = post.lambda_bar;
    res.free_energy.push_back(variational_free_energy(err, res.state, hyper));

    for (std::size_t i = 0; i < iters; ++i) {
        res.state.R = vb_e_step(err, res.state);
        post = vb_m_step(err, res.state.R, hyper);
        res.state.theta_bar = post.theta_bar;
        res.state.nu_bar = post.nu_bar;
        res.state.lambda_bar = post.lambda_bar;
        res.free_energy.push_back(variational_free_energy(err, res.state, hyper));
    }
    return res;
}

std::vector<ClusterMass> cluster_masses(const Mat& R) {
    std::vector<ClusterMass> masses(R.cols);
    for (std::size_t k = 0; k < R.cols; ++k) masses[k].index = k;
    if (R.rows > 0) {
        for (std::size_t n = 0; n < R.rows; ++n)
            for (std::size_t k = 0; k < R.cols; ++k) masses[k].mass += R(n, k);
        for (auto& m : masses) m.mass /= static_cast<double>(R.rows);
    }
    std::stable_sort(masses.begin(), masses.end(),
                     [](const ClusterMass& a, const ClusterMass& b) { return a.mass > b.mass; });
    return masses;
}

std::vector<ClusterMass> effective_clusters(const Mat& R, double mass_threshold) {
    if (!(mass_threshold > 0.0) || !(mass_threshold < 1.0))
        throw ConfigError("effective_clusters: mass_threshold must be in (0,1)");
    check_row_stochastic(R);
    auto masses = cluster_masses(R);
    std::erase_if(masses, [&](const ClusterMass& m) { return m.mass < mass_threshold; });
    return masses;
}

}  // namespace mdra

#include "mdra/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>

#include "mdra/parallel.hpp"

namespace mdra {

namespace {

struct AdamState {
    std::vector<double> m, v;
    std::size_t step = 0;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

void apply_update(std::vector<double>& theta, const std::vector<double>& grad,
                  const OptimizerConfig& opt, AdamState* adam) {
    if (opt.method == OptMethod::Sgd) {
        for (std::size_t i = 0; i < theta.size(); ++i)
            theta[i] -= opt.learning_rate * grad[i];
        return;
    }
    ++adam->step;
    const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(adam->step));
    const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(adam->step));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        adam->m[i] = kAdamBeta1 * adam->m[i] + (1.0 - kAdamBeta1) * grad[i];
        adam->v[i] = kAdamBeta2 * adam->v[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
        const double mhat = adam->m[i] / c1;
        const double vhat = adam->v[i] / c2;
        theta[i] -= opt.learning_rate * mhat / (std::sqrt(vhat) + kAdamEps);
    }
}

// Signal ids in `batch` whose individual weighted loss is non-finite.
std::string offending_ids(const ModelParams& model, const Dataset& dataset,
                          const std::vector<std::size_t>& batch, const Mat& R) {
    std::string ids;
    for (std::size_t idx : batch) {
        Mat row(1, R.cols);
        for (std::size_t k = 0; k < R.cols; ++k) row(0, k) = R(idx, k);
        const TimeSeries sig[1] = {dataset[idx]};
        double l;
        try {
            l = detail::weighted_loss_no_check(model, std::span<const TimeSeries>(sig, 1), row, 1);
        } catch (const Error&) {
            l = std::numeric_limits<double>::quiet_NaN();
        }
        if (!std::isfinite(l)) {
            if (!ids.empty()) ids += ", ";
            ids += std::to_string(dataset[idx].id);
        }
    }
    return ids.empty() ? "none identified" : ids;
}

void check_uniform_dataset(const Dataset& dataset) {
    if (dataset.empty()) throw DataError("train: dataset is empty");
    const std::size_t D = dataset.front().dim;
    for (const TimeSeries& x : dataset)
        if (x.dim != D) throw DataError("train: signals disagree on dimension D");
}

}  // namespace

ErrorMatrix compute_errors(const ModelParams& model, const Dataset& dataset, unsigned threads) {
    ErrorMatrix err;
    err.E = detail::per_signal_errors(model, dataset, threads);
    err.sizes.resize(dataset.size());
    for (std::size_t n = 0; n < dataset.size(); ++n)
        err.sizes[n] = static_cast<double>(dataset[n].length() * dataset[n].dim);
    return err;
}

double rnn_substep(ModelParams& model, const Dataset& dataset, const Mat& R,
                   const OptimizerConfig& opt, Rng& rng, unsigned threads,
                   std::vector<double>* epoch_grad_norms) {
    if (R.rows != dataset.size() || R.cols != model.K())
        throw ShapeError("rnn_substep: R shape mismatch");
    check_row_stochastic(R);
    if (opt.batch_size < 1) throw ConfigError("rnn_substep: batch_size must be >= 1");

    std::vector<double> theta = flatten(model);
    AdamState adam(theta.size());
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < opt.epochs_per_outer; ++epoch) {
        rng.shuffle(order);
        double grad_sq = 0.0;
        for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
            const std::size_t stop = std::min(order.size(), start + opt.batch_size);
            std::vector<std::size_t> batch(order.begin() + start, order.begin() + stop);
            Dataset signals;
            signals.reserve(batch.size());
            Mat rbatch(batch.size(), R.cols);
            for (std::size_t i = 0; i < batch.size(); ++i) {
                signals.push_back(dataset[batch[i]]);
                for (std::size_t k = 0; k < R.cols; ++k) rbatch(i, k) = R(batch[i], k);
            }
            const LossGrad lg = detail::loss_gradients_no_check(
                model, std::span<const TimeSeries>(signals), rbatch, threads);
            if (!std::isfinite(lg.loss))
                throw DivergenceError("weighted loss became non-finite at epoch " +
                                      std::to_string(epoch + 1) + " (signal ids: " +
                                      offending_ids(model, dataset, batch, R) + ")");
            std::vector<double> grad = flatten_grad(model, lg.grad);
            const double inv_batch = 1.0 / static_cast<double>(batch.size());
            for (double& g : grad) g *= inv_batch;
            for (double g : grad) grad_sq += g * g;
            apply_update(theta, grad, opt, &adam);
            unflatten(theta, model);
        }
        const double grad_norm = std::sqrt(grad_sq);
        if (!std::isfinite(grad_norm))
            throw DivergenceError("gradient norm became non-finite at epoch " +
                                  std::to_string(epoch + 1));
        if (epoch_grad_norms) epoch_grad_norms->push_back(grad_norm);
    }
    return weighted_loss(model, dataset, R, threads);
}

TrainedModel train(const Dataset& dataset, const TrainConfig& cfg) {
    check_uniform_dataset(dataset);
    if (cfg.hyper.K < 1 || cfg.vb_iters < 1 || cfg.max_outer_iters < 1 ||
        cfg.optimizer.batch_size < 1)
        throw ConfigError("train: counts must be >= 1");
    if (!(cfg.optimizer.learning_rate > 0.0))
        throw ConfigError("train: learning_rate must be positive");
    if (!(cfg.free_energy_threshold > 0.0))
        throw ConfigError("train: free_energy_threshold must be positive");

    const std::size_t N = dataset.size();
    const std::size_t K = cfg.hyper.K;
    Rng rng(cfg.rng_seed);
    TrainedModel out;
    out.model = init_model(cfg.arch.L, dataset.front().dim, K, cfg.arch.capacity,
                           cfg.arch.fft_style, cfg.arch.cpx, rng);

    // Uniform initial responsibilities; symmetry is broken by the random
    // decoder initializations, not by R.
    Mat R(N, K, 1.0 / static_cast<double>(K));

    ErrorMatrix err = compute_errors(out.model, dataset, cfg.threads);
    VBRunResult vb = run_vb(err, cfg.hyper, 0, R);
    double f_prev = vb.free_energy.back();

    for (std::size_t outer = 1; outer <= cfg.max_outer_iters; ++outer) {
        // hyperbolic decay keeps early progress fast and late iterations stable
        OptimizerConfig opt = cfg.optimizer;
        opt.learning_rate =
            cfg.optimizer.learning_rate * 150.0 / (150.0 + static_cast<double>(outer - 1));
        double loss;
        try {
            loss = rnn_substep(out.model, dataset, vb.state.R, opt, rng, cfg.threads);
        } catch (const DivergenceError& e) {
            throw DivergenceError("outer iteration " + std::to_string(outer) + ": " + e.what());
        }
        err = compute_errors(out.model, dataset, cfg.threads);
        vb = run_vb(err, cfg.hyper, cfg.vb_iters, vb.state.R);
        const double f_curr = vb.free_energy.back();
        if (!std::isfinite(f_curr))
            throw DivergenceError("outer iteration " + std::to_string(outer) +
                                  ": free energy became non-finite");

        TraceRow row;
        row.iter = outer;
        row.weighted_loss = loss;
        row.free_energy = f_curr;
        row.masses = cluster_masses(vb.state.R);
        out.trace.push_back(std::move(row));

        if (std::abs(f_prev - f_curr) <
            cfg.free_energy_threshold * std::max(1.0, std::abs(f_curr)))
            break;
        f_prev = f_curr;
    }
    out.vb = std::move(vb.state);
    return out;
}

Features extract(const ModelParams& model, const VBState& vb, const Dataset& dataset,
                 unsigned threads) {
    auto rows = parallel_map<CVec>(dataset.size(), threads,
                                   [&](std::size_t n) { return encode(model.encoder, dataset[n]); });
    Features f;
    f.H = CMat(dataset.size(), model.L);
    for (std::size_t n = 0; n < rows.size(); ++n)
        for (std::size_t j = 0; j < model.L; ++j) f.H(n, j) = rows[n][j];
    f.R = vb.R;  // passthrough
    return f;
}

}  // namespace mdra

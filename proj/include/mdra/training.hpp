#pragma once

#include <cstdint>
#include <vector>

#include "mdra/common.hpp"
#include "mdra/rnn_ae.hpp"
#include "mdra/vb_engine.hpp"

namespace mdra {

enum class OptMethod { Adam, Sgd };

struct OptimizerConfig {
    OptMethod method = OptMethod::Adam;
    double learning_rate = 1e-3;
    std::size_t epochs_per_outer = 20;
    std::size_t batch_size = 32;
};

// Architecture of the recurrent cells (shared by encoder and decoders).
struct ArchConfig {
    std::size_t L = 4;
    std::size_t capacity = 8;
    bool fft_style = true;
    bool cpx = false;
};

struct TrainConfig {
    Hyperparams hyper;
    ArchConfig arch;
    OptimizerConfig optimizer;
    std::size_t vb_iters = 5;
    // Outer loop stops when |F_prev - F_curr| < threshold * max(1, |F_curr|).
    double free_energy_threshold = 1e-3;
    std::size_t max_outer_iters = 100;
    std::uint64_t rng_seed = 0;
    unsigned threads = 1;
};

struct TraceRow {
    std::size_t iter = 0;
    double weighted_loss = 0.0;
    double free_energy = 0.0;
    std::vector<ClusterMass> masses;  // all K masses, descending
};

struct TrainedModel {
    ModelParams model;
    VBState vb;
    std::vector<TraceRow> trace;
};

// E(n,k) for every signal/decoder pair plus sizes[n] = T_n * D.
ErrorMatrix compute_errors(const ModelParams& model, const Dataset& dataset, unsigned threads = 1);

/// Inner minimization of the weighted reconstruction loss: epochs_per_outer
/// passes of minibatch updates (batches reshuffled per epoch from `rng`).
/// Returns the post-update loss on the full dataset. epoch_grad_norms, when
/// given, receives one gradient norm per epoch.
double rnn_substep(ModelParams& model, const Dataset& dataset, const Mat& R,
                   const OptimizerConfig& opt, Rng& rng, unsigned threads = 1,
                   std::vector<double>* epoch_grad_norms = nullptr);

/// The full alternation: gradient substep on the weighted loss, then the VB
/// pass, tracked by the variational free energy until its change falls below
/// the threshold or max_outer_iters is hit.
TrainedModel train(const Dataset& dataset, const TrainConfig& cfg);

struct Features {
    CMat H;  // N x L encoded signals
    Mat R;   // responsibilities, passed through from the VB state
};

/// Re-encodes every signal with the trained encoder; R is vb.R unchanged.
Features extract(const ModelParams& model, const VBState& vb, const Dataset& dataset,
                 unsigned threads = 1);

}  // namespace mdra

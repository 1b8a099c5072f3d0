#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mdra/common.hpp"
#include "mdra/unitary.hpp"

namespace mdra {

// One input signal: a T x D real matrix, row-major, variable T per signal.
struct TimeSeries {
    int id = 0;
    std::size_t dim = 1;
    std::vector<double> values;  // T * dim entries
    std::string label;           // empty when unlabeled

    TimeSeries() = default;
    TimeSeries(int id_, std::size_t dim_, std::vector<double> values_, std::string label_ = "")
        : id(id_), dim(dim_), values(std::move(values_)), label(std::move(label_)) {}

    std::size_t length() const { return dim == 0 ? 0 : values.size() / dim; }
    double at(std::size_t t, std::size_t d) const { return values[t * dim + d]; }
    double& at(std::size_t t, std::size_t d) { return values[t * dim + d]; }
};

using Dataset = std::vector<TimeSeries>;

// Recurrent cell parameters shared by encoder and decoders:
//   z^t = V h^{t-1} + U x^t + b,   h^t = modReLU(z^t; modrelu_bias)
// where modReLU scales |z_j| by ReLU(|z_j| + bias_j)/|z_j| and keeps the phase.
struct EncoderParams {
    UnitaryParams V;
    CMat U;  // L x D
    CVec b;  // L
    std::vector<double> modrelu_bias;  // L
};

// Decoder: same cell run autonomously from the encoded state, plus an affine
// readout from the (Re, Im) decomposition of the state to an output frame.
struct DecoderParams {
    UnitaryParams V;
    CMat U;  // L x D
    CVec b;  // L
    std::vector<double> modrelu_bias;  // L
    Mat readout_w;                     // D x 2L, columns ordered [Re h | Im h]
    std::vector<double> readout_b;     // D
};

struct ModelParams {
    std::size_t L = 0;
    std::size_t D = 0;
    EncoderParams encoder;
    std::vector<DecoderParams> decoders;

    std::size_t K() const { return decoders.size(); }
};

// Gradient records mirroring the parameter structs. Complex entries follow the
// pairs-of-reals convention (real part = d/dRe, imaginary part = d/dIm).
struct CellGrad {
    UnitaryGrad V;
    CMat U;
    CVec b;
    std::vector<double> modrelu_bias;
};

struct DecoderGrad {
    CellGrad cell;
    Mat readout_w;
    std::vector<double> readout_b;
};

struct ModelGrad {
    CellGrad encoder;
    std::vector<DecoderGrad> decoders;
};

ModelGrad zero_grad(const ModelParams& m);
void add_scaled(ModelGrad& acc, const ModelGrad& g, double scale);

// Random model. Unitary angles are uniform on [-pi, pi); U entries and readout
// weights are small uniform; biases start at zero (modReLU with zero bias is
// the identity on nonzero inputs, so signals propagate unattenuated at init).
ModelParams init_model(std::size_t L, std::size_t D, std::size_t K, std::size_t capacity,
                       bool fft_style, bool cpx, Rng& rng);

/// Runs the encoder over x and returns the final hidden state h^T (h^0 = 0).
CVec encode(const EncoderParams& enc, const TimeSeries& x);

/// Autonomous rollout of `dec` from h for T steps. Each emitted frame is fed
/// back through U as the next input: x^t = readout(h^{t-1}),
/// h^t = modReLU(V h^{t-1} + U x^t + b).
TimeSeries decode(const DecoderParams& dec, const CVec& h, std::size_t T);

/// Squared Frobenius norm of x - x_dec.
double reconstruction_error(const TimeSeries& x, const TimeSeries& x_dec);

/// sum_n sum_k R(n,k) * || X^n - decode(dec_k, encode(enc, X^n), T_n) ||_F^2.
/// Each signal is encoded once and shared across the K decoders. R rows must
/// align with `batch` and sum to 1 within 1e-9.
double weighted_loss(const ModelParams& model, std::span<const TimeSeries> batch, const Mat& R,
                     unsigned threads = 1);

struct LossGrad {
    double loss = 0.0;
    ModelGrad grad;
};

/// Exact gradients of weighted_loss w.r.t. every parameter, by
/// backpropagation through time across the decoder rollouts and the shared
/// encoder. Also returns the loss itself (computed in the same pass).
LossGrad loss_gradients(const ModelParams& model, std::span<const TimeSeries> batch, const Mat& R,
                        unsigned threads = 1);

namespace detail {
// Unchecked cores: skip the row-stochasticity validation (the weighted sums
// are linear in R, which tests exercise with non-stochastic rows).
double weighted_loss_no_check(const ModelParams& model, std::span<const TimeSeries> batch,
                              const Mat& R, unsigned threads);
LossGrad loss_gradients_no_check(const ModelParams& model, std::span<const TimeSeries> batch,
                                 const Mat& R, unsigned threads);
// Per-signal reconstruction errors against every decoder; row n holds
// E[n][k] = ||X^n - g(h_n | decoder k)||_F^2.
Mat per_signal_errors(const ModelParams& model, std::span<const TimeSeries> batch,
                      unsigned threads);
}  // namespace detail

// Flat parameter vector (fixed ordering shared with flatten_grad); used by the
// optimizer. unflatten writes back into a model of identical shape.
std::vector<double> flatten(const ModelParams& m);
void unflatten(const std::vector<double>& theta, ModelParams& m);
std::vector<double> flatten_grad(const ModelParams& shape, const ModelGrad& g);

}  // namespace mdra

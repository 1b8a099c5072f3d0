#include "mdra/rnn_ae.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "mdra/parallel.hpp"
#include "mdra/unitary_detail.hpp"
#include "mdra/vb_engine.hpp"

namespace mdra {

namespace {

// Magnitudes below this are treated as zero by modReLU and its gradient.
constexpr double kDeadMagnitude = 1e-100;

// Responsibilities below this are skipped in the gradient pass; their
// contribution is below double rounding at any realistic error scale.
constexpr double kGradWeightCutoff = 1e-12;

inline cx modrelu(cx z, double bias) {
    const double m = std::abs(z);
    const double a = m + bias;
    if (m < kDeadMagnitude || a <= 0.0) return cx(0.0, 0.0);
    return z * (a / m);
}

// Backward through one modReLU entry. `g` is dLoss/d(output) in the
// pairs-of-reals convention; returns dLoss/dz and accumulates dLoss/dbias.
inline cx modrelu_backward(cx z, double bias, cx g, double& gbias) {
    const double m = std::abs(z);
    const double a = m + bias;
    if (m < kDeadMagnitude || a <= 0.0) return cx(0.0, 0.0);
    const double x = z.real(), y = z.imag();
    const double gr = g.real(), gi = g.imag();
    const double f = a / m;
    const double q = bias / (m * m * m);
    gbias += (gr * x + gi * y) / m;
    return cx(gr * (f - q * x * x) + gi * (-q * x * y),
              gr * (-q * x * y) + gi * (f - q * y * y));
}

void check_signal(const TimeSeries& x, std::size_t D, const char* op) {
    if (x.dim != D)
        throw ShapeError(std::string(op) + ": signal " + std::to_string(x.id) + " has D=" +
                         std::to_string(x.dim) + ", model expects " + std::to_string(D));
    if (x.length() == 0)
        throw ShapeError(std::string(op) + ": signal " + std::to_string(x.id) + " is empty");
    if (!all_finite(x.values))
        throw DataError(std::string(op) + ": signal " + std::to_string(x.id) +
                        " contains non-finite values");
}

struct EncodeCache {
    std::vector<CVec> z;  // pre-activations, one per step
    std::vector<CVec> h;  // states after each step
};

CVec encode_impl(const EncoderParams& enc, const detail::UnitaryCoeffs& vc, const TimeSeries& x,
                 EncodeCache* cache) {
    const std::size_t L = enc.U.rows, D = enc.U.cols;
    const std::size_t T = x.length();
    const CVec h0(L, cx(0.0, 0.0));
    CVec z_buf, h_buf;
    if (cache) {
        cache->z.resize(T);
        cache->h.resize(T);
    }
    const CVec* h = &h0;
    for (std::size_t t = 0; t < T; ++t) {
        CVec& z = cache ? cache->z[t] : z_buf;
        z = *h;
        detail::apply_inplace(vc, z);
        const double* xt = &x.values[t * D];
        for (std::size_t j = 0; j < L; ++j) {
            cx acc = z[j] + enc.b[j];
            for (std::size_t d = 0; d < D; ++d) acc += enc.U(j, d) * xt[d];
            z[j] = acc;
        }
        CVec& hn = cache ? cache->h[t] : h_buf;
        hn.resize(L);
        for (std::size_t j = 0; j < L; ++j) hn[j] = modrelu(z[j], enc.modrelu_bias[j]);
        h = &hn;
    }
    return *h;
}

void readout_frame(const DecoderParams& dec, const CVec& s, double* out) {
    const std::size_t D = dec.readout_w.rows, L = dec.U.rows;
    for (std::size_t d = 0; d < D; ++d) {
        double acc = dec.readout_b[d];
        for (std::size_t j = 0; j < L; ++j) {
            acc += dec.readout_w(d, j) * s[j].real();
            acc += dec.readout_w(d, L + j) * s[j].imag();
        }
        out[d] = acc;
    }
}

struct DecodeCache {
    std::vector<CVec> s;  // states s[0..T-1], s[0] = h
    std::vector<CVec> z;  // z[t] produced s[t], t >= 1 (z[0] unused)
};

TimeSeries decode_impl(const DecoderParams& dec, const detail::UnitaryCoeffs& vc, const CVec& h,
                       std::size_t T, DecodeCache* cache) {
    const std::size_t L = dec.U.rows, D = dec.readout_w.rows;
    TimeSeries out;
    out.dim = D;
    out.values.resize(T * D);
    CVec s_buf, z_buf;
    const CVec* s;
    if (cache) {
        cache->s.resize(T);
        cache->z.resize(T);
        cache->s[0] = h;
        s = &cache->s[0];
    } else {
        s_buf = h;
        s = &s_buf;
    }
    for (std::size_t t = 0; t < T; ++t) {
        readout_frame(dec, *s, &out.values[t * D]);
        if (t + 1 < T) {  // the state after the last emission is never used
            CVec& z = cache ? cache->z[t + 1] : z_buf;
            z = *s;
            detail::apply_inplace(vc, z);
            const double* xt = &out.values[t * D];
            for (std::size_t j = 0; j < L; ++j) {
                cx acc = z[j] + dec.b[j];
                for (std::size_t d = 0; d < D; ++d) acc += dec.U(j, d) * xt[d];
                z[j] = acc;
            }
            CVec& sn = cache ? cache->s[t + 1] : s_buf;
            sn.resize(L);
            for (std::size_t j = 0; j < L; ++j) sn[j] = modrelu(z[j], dec.modrelu_bias[j]);
            s = &sn;
        }
    }
    return out;
}

CellGrad zero_cell_grad(const UnitaryParams& V, std::size_t L, std::size_t D) {
    CellGrad g;
    g.V = zero_grad(V);
    g.U = CMat(L, D);
    g.b.assign(L, cx(0.0, 0.0));
    g.modrelu_bias.assign(L, 0.0);
    return g;
}

void add_scaled(UnitaryGrad& acc, const UnitaryGrad& g, double s) {
    for (std::size_t i = 0; i < g.rotation_angles.size(); ++i)
        acc.rotation_angles[i] += s * g.rotation_angles[i];
    for (std::size_t i = 0; i < g.rotation_phases.size(); ++i)
        acc.rotation_phases[i] += s * g.rotation_phases[i];
    for (std::size_t i = 0; i < g.phase_angles.size(); ++i)
        acc.phase_angles[i] += s * g.phase_angles[i];
}

void add_scaled(CellGrad& acc, const CellGrad& g, double s) {
    add_scaled(acc.V, g.V, s);
    for (std::size_t i = 0; i < g.U.data.size(); ++i) acc.U.data[i] += s * g.U.data[i];
    for (std::size_t i = 0; i < g.b.size(); ++i) acc.b[i] += s * g.b[i];
    for (std::size_t i = 0; i < g.modrelu_bias.size(); ++i)
        acc.modrelu_bias[i] += s * g.modrelu_bias[i];
}

// Per-signal scratch, reused across decoders and time steps.
struct BackwardScratch {
    detail::UnitaryWorkspace uws;
    CVec gz, gs, gs_next, gh;
    std::vector<double> gx;
};

// Backward through one decoder rollout for signal x with weight w.
// Accumulates parameter gradients into gd and returns (in sc.gs_next)
// dLoss/dh at the encoded state.
void backward_decoder(const DecoderParams& dec, const detail::UnitaryCoeffs& vc,
                      const TimeSeries& x, const DecodeCache& cache, const TimeSeries& xhat,
                      double w, DecoderGrad& gd, BackwardScratch& sc) {
    const std::size_t T = x.length();
    const std::size_t L = dec.U.rows, D = dec.U.cols;

    sc.gx.resize(D);
    sc.gs_next.assign(L, cx(0.0, 0.0));
    for (std::size_t t = T; t-- > 0;) {
        const bool has_z = t + 1 < T;
        for (std::size_t d = 0; d < D; ++d)
            sc.gx[d] = 2.0 * w * (xhat.at(t, d) - x.at(t, d));
        if (has_z) {
            // z[t+1] = V s[t] + U xhat[t] + b fed s[t+1] = modReLU(z[t+1]).
            sc.gz.resize(L);
            for (std::size_t j = 0; j < L; ++j)
                sc.gz[j] = modrelu_backward(cache.z[t + 1][j], dec.modrelu_bias[j], sc.gs_next[j],
                                            gd.cell.modrelu_bias[j]);
            for (std::size_t j = 0; j < L; ++j) {
                gd.cell.b[j] += sc.gz[j];
                for (std::size_t d = 0; d < D; ++d) gd.cell.U(j, d) += sc.gz[j] * xhat.at(t, d);
            }
            for (std::size_t d = 0; d < D; ++d) {
                double acc = 0.0;
                for (std::size_t j = 0; j < L; ++j)
                    acc += std::real(std::conj(dec.U(j, d)) * sc.gz[j]);
                sc.gx[d] += acc;  // emitted frame also feeds the next state
            }
            // turns gz into dLoss/ds[t] through V, accumulating angle grads
            detail::backward_inplace(vc, cache.s[t], sc.gz, gd.cell.V, sc.uws);
        }
        // Emission t: xhat[t] = readout(s[t]).
        sc.gs.assign(L, cx(0.0, 0.0));
        for (std::size_t d = 0; d < D; ++d) {
            gd.readout_b[d] += sc.gx[d];
            for (std::size_t j = 0; j < L; ++j) {
                gd.readout_w(d, j) += sc.gx[d] * cache.s[t][j].real();
                gd.readout_w(d, L + j) += sc.gx[d] * cache.s[t][j].imag();
                sc.gs[j] += sc.gx[d] * cx(dec.readout_w(d, j), dec.readout_w(d, L + j));
            }
        }
        if (has_z)
            for (std::size_t j = 0; j < L; ++j) sc.gs[j] += sc.gz[j];
        std::swap(sc.gs_next, sc.gs);
    }
}

// Backward through the encoder given dLoss/dh at the final state in sc.gh.
void backward_encoder(const EncoderParams& enc, const detail::UnitaryCoeffs& vc,
                      const TimeSeries& x, const EncodeCache& cache, CellGrad& ge,
                      BackwardScratch& sc) {
    const std::size_t T = x.length();
    const std::size_t L = enc.U.rows, D = enc.U.cols;
    const CVec h0(L, cx(0.0, 0.0));
    for (std::size_t t = T; t-- > 0;) {
        sc.gz.resize(L);
        for (std::size_t j = 0; j < L; ++j)
            sc.gz[j] = modrelu_backward(cache.z[t][j], enc.modrelu_bias[j], sc.gh[j],
                                        ge.modrelu_bias[j]);
        for (std::size_t j = 0; j < L; ++j) {
            ge.b[j] += sc.gz[j];
            for (std::size_t d = 0; d < D; ++d) ge.U(j, d) += sc.gz[j] * x.at(t, d);
        }
        detail::backward_inplace(vc, t == 0 ? h0 : cache.h[t - 1], sc.gz, ge.V, sc.uws);
        std::swap(sc.gh, sc.gz);
    }
}

void check_batch(const ModelParams& model, std::span<const TimeSeries> batch, const Mat& R,
                 const char* op) {
    if (R.rows != batch.size() || R.cols != model.K())
        throw ShapeError(std::string(op) + ": R is " + std::to_string(R.rows) + "x" +
                         std::to_string(R.cols) + ", expected " + std::to_string(batch.size()) +
                         "x" + std::to_string(model.K()));
    for (const TimeSeries& x : batch) check_signal(x, model.D, op);
}

struct ModelCoeffs {
    detail::UnitaryCoeffs encoder;
    std::vector<detail::UnitaryCoeffs> decoders;
};

ModelCoeffs make_model_coeffs(const ModelParams& m) {
    ModelCoeffs mc;
    mc.encoder = detail::make_coeffs(m.encoder.V);
    mc.decoders.reserve(m.K());
    for (const DecoderParams& d : m.decoders) mc.decoders.push_back(detail::make_coeffs(d.V));
    return mc;
}

// Loss and gradient contribution of one signal (all K decoders).
LossGrad signal_loss_grad(const ModelParams& model, const ModelCoeffs& mc, const TimeSeries& x,
                          const double* r_row) {
    const std::size_t K = model.K();
    LossGrad out;
    out.grad = zero_grad(model);

    EncodeCache ec;
    const CVec h = encode_impl(model.encoder, mc.encoder, x, &ec);

    BackwardScratch sc;
    sc.gh.assign(model.L, cx(0.0, 0.0));
    DecodeCache dc;
    for (std::size_t k = 0; k < K; ++k) {
        const double w = r_row[k];
        if (w < kGradWeightCutoff) continue;
        const TimeSeries xhat = decode_impl(model.decoders[k], mc.decoders[k], h, x.length(), &dc);
        double e = 0.0;
        for (std::size_t i = 0; i < x.values.size(); ++i) {
            const double d = x.values[i] - xhat.values[i];
            e += d * d;
        }
        out.loss += w * e;
        backward_decoder(model.decoders[k], mc.decoders[k], x, dc, xhat, w,
                         out.grad.decoders[k], sc);
        for (std::size_t j = 0; j < model.L; ++j) sc.gh[j] += sc.gs_next[j];
    }
    backward_encoder(model.encoder, mc.encoder, x, ec, out.grad.encoder, sc);
    return out;
}

}  // namespace

ModelGrad zero_grad(const ModelParams& m) {
    ModelGrad g;
    g.encoder = zero_cell_grad(m.encoder.V, m.L, m.D);
    g.decoders.reserve(m.K());
    for (const DecoderParams& d : m.decoders) {
        DecoderGrad dg;
        dg.cell = zero_cell_grad(d.V, m.L, m.D);
        dg.readout_w = Mat(m.D, 2 * m.L);
        dg.readout_b.assign(m.D, 0.0);
        g.decoders.push_back(std::move(dg));
    }
    return g;
}

void add_scaled(ModelGrad& acc, const ModelGrad& g, double scale) {
    add_scaled(acc.encoder, g.encoder, scale);
    for (std::size_t k = 0; k < g.decoders.size(); ++k) {
        add_scaled(acc.decoders[k].cell, g.decoders[k].cell, scale);
        for (std::size_t i = 0; i < g.decoders[k].readout_w.data.size(); ++i)
            acc.decoders[k].readout_w.data[i] += scale * g.decoders[k].readout_w.data[i];
        for (std::size_t i = 0; i < g.decoders[k].readout_b.size(); ++i)
            acc.decoders[k].readout_b[i] += scale * g.decoders[k].readout_b[i];
    }
}

ModelParams init_model(std::size_t L, std::size_t D, std::size_t K, std::size_t capacity,
                       bool fft_style, bool cpx, Rng& rng) {
    if (D < 1) throw ConfigError("init_model: D must be >= 1");
    if (K < 1) throw ConfigError("init_model: K must be >= 1");
    ModelParams m;
    m.L = L;
    m.D = D;

    const double u_scale = 0.5 / std::sqrt(static_cast<double>(D));
    const double w_scale = 1.0 / std::sqrt(static_cast<double>(2 * L));

    auto init_cell = [&](UnitaryParams& V, CMat& U, CVec& b, std::vector<double>& mb) {
        V = build_unitary_params(L, capacity, fft_style, rng, cpx);
        U = CMat(L, D);
        for (cx& u : U.data) {
            const double re = rng.uniform(-u_scale, u_scale);
            const double im = rng.uniform(-u_scale, u_scale);
            u = cx(re, im);
        }
        b.assign(L, cx(0.0, 0.0));
        mb.assign(L, 0.0);
    };

    init_cell(m.encoder.V, m.encoder.U, m.encoder.b, m.encoder.modrelu_bias);
    m.decoders.resize(K);
    for (DecoderParams& dec : m.decoders) {
        init_cell(dec.V, dec.U, dec.b, dec.modrelu_bias);
        for (cx& z : dec.b) z = cx(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
        for (double& v : dec.modrelu_bias) v = rng.uniform(-0.05, 0.05);
        dec.readout_w = Mat(D, 2 * L);
        for (double& w : dec.readout_w.data) w = rng.uniform(-w_scale, w_scale);
        dec.readout_b.assign(D, 0.0);
    }
    return m;
}

CVec encode(const EncoderParams& enc, const TimeSeries& x) {
    check_signal(x, enc.U.cols, "encode");
    return encode_impl(enc, detail::make_coeffs(enc.V), x, nullptr);
}

TimeSeries decode(const DecoderParams& dec, const CVec& h, std::size_t T) {
    if (T < 1) throw ConfigError("decode: T must be >= 1");
    if (h.size() != dec.U.rows)
        throw ShapeError("decode: h has length " + std::to_string(h.size()) + ", expected " +
                         std::to_string(dec.U.rows));
    return decode_impl(dec, detail::make_coeffs(dec.V), h, T, nullptr);
}

double reconstruction_error(const TimeSeries& x, const TimeSeries& x_dec) {
    if (x.dim != x_dec.dim || x.values.size() != x_dec.values.size())
        throw ShapeError("reconstruction_error: shape mismatch");
    double e = 0.0;
    for (std::size_t i = 0; i < x.values.size(); ++i) {
        const double d = x.values[i] - x_dec.values[i];
        e += d * d;
    }
    return e;
}

namespace detail {

double weighted_loss_no_check(const ModelParams& model, std::span<const TimeSeries> batch,
                              const Mat& R, unsigned threads) {
    const ModelCoeffs mc = make_model_coeffs(model);
    const auto losses = parallel_map<double>(batch.size(), threads, [&](std::size_t n) {
        const TimeSeries& x = batch[n];
        const CVec h = encode_impl(model.encoder, mc.encoder, x, nullptr);
        double acc = 0.0;
        for (std::size_t k = 0; k < model.K(); ++k) {
            const double w = R(n, k);
            if (w == 0.0) continue;  // exact zero contributes nothing
            const TimeSeries xhat =
                decode_impl(model.decoders[k], mc.decoders[k], h, x.length(), nullptr);
            acc += w * reconstruction_error(x, xhat);
        }
        return acc;
    });
    double total = 0.0;
    for (double l : losses) total += l;  // fixed batch order
    return total;
}

LossGrad loss_gradients_no_check(const ModelParams& model, std::span<const TimeSeries> batch,
                                 const Mat& R, unsigned threads) {
    const ModelCoeffs mc = make_model_coeffs(model);
    auto parts = parallel_map<LossGrad>(batch.size(), threads, [&](std::size_t n) {
        return signal_loss_grad(model, mc, batch[n], &R.data[n * R.cols]);
    });
    LossGrad total;
    total.grad = zero_grad(model);
    for (const LossGrad& p : parts) {
        total.loss += p.loss;
        add_scaled(total.grad, p.grad, 1.0);
    }
    return total;
}

Mat per_signal_errors(const ModelParams& model, std::span<const TimeSeries> batch,
                      unsigned threads) {
    const std::size_t K = model.K();
    const ModelCoeffs mc = make_model_coeffs(model);
    auto rows = parallel_map<std::vector<double>>(batch.size(), threads, [&](std::size_t n) {
        const TimeSeries& x = batch[n];
        check_signal(x, model.D, "per_signal_errors");
        const CVec h = encode_impl(model.encoder, mc.encoder, x, nullptr);
        std::vector<double> row(K);
        for (std::size_t k = 0; k < K; ++k) {
            const TimeSeries xhat =
                decode_impl(model.decoders[k], mc.decoders[k], h, x.length(), nullptr);
            row[k] = reconstruction_error(x, xhat);
        }
        return row;
    });
    Mat E(batch.size(), K);
    for (std::size_t n = 0; n < rows.size(); ++n)
        for (std::size_t k = 0; k < K; ++k) E(n, k) = rows[n][k];
    return E;
}

}  // namespace detail

double weighted_loss(const ModelParams& model, std::span<const TimeSeries> batch, const Mat& R,
                     unsigned threads) {
    check_batch(model, batch, R, "weighted_loss");
    check_row_stochastic(R);
    return detail::weighted_loss_no_check(model, batch, R, threads);
}

LossGrad loss_gradients(const ModelParams& model, std::span<const TimeSeries> batch, const Mat& R,
                        unsigned threads) {
    check_batch(model, batch, R, "loss_gradients");
    check_row_stochastic(R);
    return detail::loss_gradients_no_check(model, batch, R, threads);
}

std::vector<double> flatten(const ModelParams& m) {
    std::vector<double> out;
    auto push_reals = [&](const std::vector<double>& v) {
        out.insert(out.end(), v.begin(), v.end());
    };
    auto push_cvec = [&](const CVec& v) {
        for (const cx& z : v) {
            out.push_back(z.real());
            out.push_back(z.imag());
        }
    };
    auto push_cell = [&](const UnitaryParams& V, const CMat& U, const CVec& b,
                         const std::vector<double>& mb) {
        push_reals(V.rotation_angles);
        if (V.cpx) push_reals(V.rotation_phases);
        push_reals(V.phase_angles);
        push_cvec(U.data);
        push_cvec(b);
        push_reals(mb);
    };
    push_cell(m.encoder.V, m.encoder.U, m.encoder.b, m.encoder.modrelu_bias);
    for (const DecoderParams& d : m.decoders) {
        push_cell(d.V, d.U, d.b, d.modrelu_bias);
        push_reals(d.readout_w.data);
        push_reals(d.readout_b);
    }
    return out;
}

void unflatten(const std::vector<double>& theta, ModelParams& m) {
    std::size_t pos = 0;
    auto take_reals = [&](std::vector<double>& v) {
        for (double& x : v) x = theta[pos++];
    };
    auto take_cvec = [&](CVec& v) {
        for (cx& z : v) {
            const double re = theta[pos++];
            const double im = theta[pos++];
            z = cx(re, im);
        }
    };
    auto take_cell = [&](UnitaryParams& V, CMat& U, CVec& b, std::vector<double>& mb) {
        take_reals(V.rotation_angles);
        if (V.cpx) take_reals(V.rotation_phases);
        take_reals(V.phase_angles);
        take_cvec(U.data);
        take_cvec(b);
        take_reals(mb);
    };
    take_cell(m.encoder.V, m.encoder.U, m.encoder.b, m.encoder.modrelu_bias);
    for (DecoderParams& d : m.decoders) {
        take_cell(d.V, d.U, d.b, d.modrelu_bias);
        take_reals(d.readout_w.data);
        take_reals(d.readout_b);
    }
    if (pos != theta.size())
        throw ShapeError("unflatten: parameter vector has " + std::to_string(theta.size()) +
                         " entries, model needs " + std::to_string(pos));
}

std::vector<double> flatten_grad(const ModelParams& shape, const ModelGrad& g) {
    std::vector<double> out;
    auto push_reals = [&](const std::vector<double>& v) {
        out.insert(out.end(), v.begin(), v.end());
    };
    auto push_cvec = [&](const CVec& v) {
        for (const cx& z : v) {
            out.push_back(z.real());
            out.push_back(z.imag());
        }
    };
    auto push_cell = [&](const UnitaryParams& V, const CellGrad& cg) {
        push_reals(cg.V.rotation_angles);
        if (V.cpx) push_reals(cg.V.rotation_phases);
        push_reals(cg.V.phase_angles);
        push_cvec(cg.U.data);
        push_cvec(cg.b);
        push_reals(cg.modrelu_bias);
    };
    push_cell(shape.encoder.V, g.encoder);
    for (std::size_t k = 0; k < shape.decoders.size(); ++k) {
        push_cell(shape.decoders[k].V, g.decoders[k].cell);
        push_reals(g.decoders[k].readout_w.data);
        push_reals(g.decoders[k].readout_b);
    }
    return out;
}

}  // namespace mdra

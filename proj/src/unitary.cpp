#include "mdra/unitary.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mdra/unitary_detail.hpp"

namespace mdra {

namespace {

void check_vector(const UnitaryParams& p, const CVec& v, const char* op) {
    if (v.size() != p.L)
        throw ShapeError(std::string(op) + ": vector length " + std::to_string(v.size()) +
                         " does not match L=" + std::to_string(p.L));
}

}  // namespace

namespace detail {

UnitaryCoeffs make_coeffs(const UnitaryParams& p) {
    UnitaryCoeffs u;
    u.L = p.L;
    u.layers = p.capacity;
    u.slots = p.L / 2;
    u.cpx = p.cpx;
    const std::size_t n = u.layers * u.slots;
    u.a.assign(n, kInertSlot);
    u.b.assign(n, kInertSlot);
    u.c.assign(n, 1.0);
    u.s.assign(n, 0.0);
    if (p.cpx) u.e.assign(n, cx(1.0, 0.0));
    for (std::size_t layer = 0; layer < u.layers; ++layer) {
        const auto pairs = rotation_pairs(p.L, layer, p.fft_style);
        for (std::size_t j = 0; j < pairs.size(); ++j) {
            const std::size_t i = layer * u.slots + j;
            u.a[i] = static_cast<std::uint32_t>(pairs[j].first);
            u.b[i] = static_cast<std::uint32_t>(pairs[j].second);
            u.c[i] = std::cos(p.rotation_angles[i]);
            u.s[i] = std::sin(p.rotation_angles[i]);
            if (p.cpx) u.e[i] = std::polar(1.0, p.rotation_phases[i]);
        }
    }
    u.diag.resize(p.L);
    for (std::size_t j = 0; j < p.L; ++j) u.diag[j] = std::polar(1.0, p.phase_angles[j]);
    return u;
}

void apply_inplace(const UnitaryCoeffs& u, CVec& v) {
    for (std::size_t i = 0; i < u.a.size(); ++i) {
        if (u.a[i] == kInertSlot) continue;
        cx& x = v[u.a[i]];
        cx& y = v[u.b[i]];
        const cx x2 = u.c[i] * x - u.s[i] * y;
        const cx y2 = u.s[i] * x + u.c[i] * y;
        x = u.cpx ? u.e[i] * x2 : x2;
        y = y2;
    }
    for (std::size_t j = 0; j < u.L; ++j) v[j] *= u.diag[j];
}

void apply_adjoint_inplace(const UnitaryCoeffs& u, CVec& v) {
    for (std::size_t j = 0; j < u.L; ++j) v[j] *= std::conj(u.diag[j]);
    for (std::size_t i = u.a.size(); i-- > 0;) {
        if (u.a[i] == kInertSlot) continue;
        cx& x = v[u.a[i]];
        cx& y = v[u.b[i]];
        const cx ex = u.cpx ? std::conj(u.e[i]) * x : x;
        const cx x2 = u.c[i] * ex + u.s[i] * y;
        const cx y2 = -u.s[i] * ex + u.c[i] * y;
        x = x2;
        y = y2;
    }
}

void backward_inplace(const UnitaryCoeffs& u, const CVec& v, CVec& g, UnitaryGrad& acc,
                      UnitaryWorkspace& ws) {
    // Forward again, keeping the state entering each rotation layer in
    // ws.states[layer]; `after` rolls forward to the pre-phase state.
    ws.states.resize(u.layers);
    ws.after = v;
    for (std::size_t layer = 0; layer < u.layers; ++layer) {
        ws.states[layer] = ws.after;
        for (std::size_t i = layer * u.slots; i < (layer + 1) * u.slots; ++i) {
            if (u.a[i] == kInertSlot) continue;
            cx& x = ws.after[u.a[i]];
            cx& y = ws.after[u.b[i]];
            const cx x0 = x, y0 = y;
            x = u.c[i] * x0 - u.s[i] * y0;
            if (u.cpx) x *= u.e[i];
            y = u.s[i] * x0 + u.c[i] * y0;
        }
    }

    // Phase layer: out_j = diag_j * after_j, d out_j / d q_j = i out_j.
    for (std::size_t j = 0; j < u.L; ++j) {
        const cx out = u.diag[j] * ws.after[j];
        acc.phase_angles[j] += std::real(std::conj(g[j]) * (cx(0.0, 1.0) * out));
        g[j] *= std::conj(u.diag[j]);
    }

    for (std::size_t layer = u.layers; layer-- > 0;) {
        const CVec& in = ws.states[layer];
        for (std::size_t i = (layer + 1) * u.slots; i-- > layer * u.slots;) {
            if (u.a[i] == kInertSlot) continue;
            const double c = u.c[i], s = u.s[i];
            const cx e = u.cpx ? u.e[i] : cx(1.0, 0.0);
            const cx x = in[u.a[i]], y = in[u.b[i]];
            const cx gx = g[u.a[i]], gy = g[u.b[i]];

            // d x'/d theta = e (-s x - c y), d y'/d theta = c x - s y.
            acc.rotation_angles[i] += std::real(std::conj(gx) * (e * (-s * x - c * y))) +
                                      std::real(std::conj(gy) * (c * x - s * y));
            if (u.cpx) {
                const cx xprime = e * (c * x - s * y);
                acc.rotation_phases[i] += std::real(std::conj(gx) * (cx(0.0, 1.0) * xprime));
            }
            // Input gradient is the block adjoint applied to (gx, gy).
            const cx egx = std::conj(e) * gx;
            g[u.a[i]] = c * egx + s * gy;
            g[u.b[i]] = -s * egx + c * gy;
        }
    }
}

}  // namespace detail

std::size_t rotation_layer_count(std::size_t L, std::size_t capacity, bool fft_style) {
    if (!fft_style) return capacity;
    std::size_t layers = 0;
    for (std::size_t span = 1; span < L; span <<= 1) ++layers;  // ceil(log2 L)
    return layers;
}

std::vector<std::pair<std::size_t, std::size_t>> rotation_pairs(std::size_t L, std::size_t layer,
                                                                bool fft_style) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    if (!fft_style) {
        // Sliding layout: even layers pair (0,1),(2,3),..., odd layers (1,2),(3,4),...
        for (std::size_t i = layer % 2; i + 1 < L; i += 2) pairs.emplace_back(i, i + 1);
    } else {
        // Butterfly layout: stride 2^layer within blocks of 2^(layer+1).
        const std::size_t stride = std::size_t{1} << layer;
        for (std::size_t block = 0; block < L; block += 2 * stride)
            for (std::size_t i = block; i < block + stride && i + stride < L; ++i)
                pairs.emplace_back(i, i + stride);
    }
    return pairs;
}

UnitaryParams build_unitary_params(std::size_t L, std::size_t capacity, bool fft_style, Rng& rng,
                                   bool cpx) {
    if (L < 2) throw ConfigError("build_unitary_params: L must be >= 2, got " + std::to_string(L));
    if (capacity < 1)
        throw ConfigError("build_unitary_params: capacity must be >= 1, got " +
                          std::to_string(capacity));

    UnitaryParams p;
    p.L = L;
    p.fft_style = fft_style;
    p.cpx = cpx;
    p.capacity = rotation_layer_count(L, capacity, fft_style);

    constexpr double pi = std::numbers::pi;
    const std::size_t n_rot = p.capacity * (L / 2);
    p.rotation_angles.resize(n_rot);
    for (double& a : p.rotation_angles) a = rng.uniform(-pi, pi);
    if (cpx) {
        p.rotation_phases.resize(n_rot);
        for (double& a : p.rotation_phases) a = rng.uniform(-pi, pi);
    }
    p.phase_angles.resize(L);
    for (double& a : p.phase_angles) a = rng.uniform(-pi, pi);
    return p;
}

UnitaryParams build_unitary_params(std::size_t L, std::size_t capacity, bool fft_style,
                                   std::uint64_t rng_seed, bool cpx) {
    Rng rng(rng_seed);
    return build_unitary_params(L, capacity, fft_style, rng, cpx);
}

CVec apply_unitary(const UnitaryParams& p, const CVec& v) {
    check_vector(p, v, "apply_unitary");
    CVec w = v;
    detail::apply_inplace(detail::make_coeffs(p), w);
    return w;
}

CVec apply_unitary_adjoint(const UnitaryParams& p, const CVec& v) {
    check_vector(p, v, "apply_unitary_adjoint");
    CVec w = v;
    detail::apply_adjoint_inplace(detail::make_coeffs(p), w);
    return w;
}

UnitaryGrad zero_grad(const UnitaryParams& p) {
    UnitaryGrad g;
    g.rotation_angles.assign(p.rotation_angles.size(), 0.0);
    g.rotation_phases.assign(p.rotation_phases.size(), 0.0);
    g.phase_angles.assign(p.phase_angles.size(), 0.0);
    return g;
}

UnitaryBackwardResult unitary_backward(const UnitaryParams& p, const CVec& v,
                                       const CVec& upstream) {
    check_vector(p, v, "unitary_backward");
    check_vector(p, upstream, "unitary_backward");
    UnitaryBackwardResult res;
    res.grad = zero_grad(p);
    res.grad_input = upstream;
    detail::UnitaryWorkspace ws;
    detail::backward_inplace(detail::make_coeffs(p), v, res.grad_input, res.grad, ws);
    return res;
}

}  // namespace mdra

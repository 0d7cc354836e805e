#pragma once
// Kuramoto-Sivashinsky u_t + u u_x + u_xx + u_xxxx = 0 on a periodic domain,
// pseudo-spectral in space with ETDRK4 in time (Cox-Matthews scheme, phi
// functions by contour integrals as in Kassam-Trefethen) and 2/3-rule
// dealiasing of the nonlinear term.

#include "mobsense/errors.hpp"
#include "mobsense/geometry.hpp"
#include "mobsense/model.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mobsense {

struct KsSpec {
    Index n_grid = 256;
    double domain_length = 22.0;
    double dt_solver = 0.01;
    double t_final = 100.0;
    Index output_every = 10;  ///< solver steps between stored snapshots
    double t_discard = 0.0;   ///< snapshots before this time are not stored
    std::uint64_t seed = 0;   ///< initial condition ~ N(0, 1) per grid point
    std::optional<VectorXd> initial;

    void validate() const {
        if (n_grid < 4 || (n_grid & (n_grid - 1)) != 0) throw ArgumentError("ks: n_grid must be a power of two >= 4");
        if (!(domain_length > 0.0)) throw ArgumentError("ks: domain_length must be > 0");
        if (!(dt_solver > 0.0)) throw ArgumentError("ks: dt_solver must be > 0");
        if (!(t_final > 0.0) || t_discard < 0.0 || t_discard > t_final) throw ArgumentError("ks: invalid time window");
        if (output_every < 1) throw ArgumentError("ks: output_every must be >= 1");
        if (initial && initial->size() != n_grid) throw ArgumentError("ks: initial condition size mismatch");
    }

    double output_dt() const { return dt_solver * static_cast<double>(output_every); }
};

namespace detail {

struct EtdCoefficients {
    std::vector<double> e, e2, q, f1, f2, f3;
};

inline EtdCoefficients etdrk4_coefficients(const std::vector<double>& linear, double h) {
    constexpr int contour_points = 32;
    const std::size_t n = linear.size();
    EtdCoefficients c;
    for (auto* v : {&c.e, &c.e2, &c.q, &c.f1, &c.f2, &c.f3}) v->resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double lh = h * linear[i];
        c.e[i] = std::exp(lh);
        c.e2[i] = std::exp(lh / 2.0);
        std::complex<double> q = 0.0, f1 = 0.0, f2 = 0.0, f3 = 0.0;
        for (int j = 1; j <= contour_points; ++j) {
            const std::complex<double> r = std::polar(1.0, M_PI * (j - 0.5) / contour_points);
            const std::complex<double> z = lh + r;
            const std::complex<double> ez = std::exp(z);
            q += (std::exp(z / 2.0) - 1.0) / z;
            f1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / (z * z * z);
            f2 += (2.0 + z + ez * (-2.0 + z)) / (z * z * z);
            f3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / (z * z * z);
        }
        c.q[i] = h * q.real() / contour_points;
        c.f1[i] = h * f1.real() / contour_points;
        c.f2[i] = h * f2.real() / contour_points;
        c.f3[i] = h * f3.real() / contour_points;
    }
    return c;
}

}  // namespace detail

/// Integrates the KS equation and returns snapshots every `output_every` steps.
inline SnapshotMatrix solve_ks(const KsSpec& spec) {
    spec.validate();
    using cd = std::complex<double>;
    const Index N = spec.n_grid;
    const auto n = static_cast<std::size_t>(N);
    const double h = spec.dt_solver;

    std::vector<cd> u(n), v(n), work(n), tmp(n);
    if (spec.initial) {
        for (std::size_t i = 0; i < n; ++i) u[i] = (*spec.initial)(static_cast<Index>(i));
    } else {
        std::mt19937_64 rng(spec.seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (auto& x : u) x = normal(rng);
    }

    Eigen::FFT<double> fft;
    fft.fwd(v, u);

    std::vector<double> wavenumber(n), linear(n);
    std::vector<cd> nonlinear_factor(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto idx = static_cast<Index>(i);
        const Index signed_mode = idx <= N / 2 ? idx : idx - N;
        wavenumber[i] = 2.0 * M_PI / spec.domain_length * static_cast<double>(signed_mode);
        if (idx == N / 2) wavenumber[i] = 0.0;  // Nyquist mode carries no derivative
        const double k = wavenumber[i];
        linear[i] = k * k - k * k * k * k;
        const bool kept = 3 * std::abs(signed_mode) < N;
        nonlinear_factor[i] = kept ? cd(0.0, -0.5 * k) : cd(0.0, 0.0);
    }
    const auto coef = detail::etdrk4_coefficients(linear, h);

    double time = 0.0;
    // N(v) = -0.5 i k fft(u^2), dealiased
    auto eval = [&](const std::vector<cd>& spectrum, std::vector<cd>& out) {
        fft.inv(tmp, spectrum);
        double peak = 0.0;
        for (auto& x : tmp) {
            const double re = x.real();
            peak = std::max(peak, std::abs(re));
            x = re * re;
        }
        if (!(peak <= 1e6))
            throw BlowUpError("ks: solution blew up at t = " + std::to_string(time), time);
        fft.fwd(out, tmp);
        for (std::size_t i = 0; i < n; ++i) out[i] *= nonlinear_factor[i];
    };

    const auto total_steps = static_cast<Index>(std::llround(spec.t_final / h));
    const auto first_kept = static_cast<Index>(std::ceil(spec.t_discard / h - 1e-9));
    std::vector<VectorXd> stored;
    auto store = [&](Index step) {
        if (step < first_kept || step % spec.output_every != 0) return;
        fft.inv(tmp, v);
        VectorXd col(N);
        for (std::size_t i = 0; i < n; ++i) col(static_cast<Index>(i)) = tmp[i].real();
        stored.push_back(std::move(col));
    };

    std::vector<cd> Nv(n), a(n), Na(n), b(n), Nb(n), c(n), Nc(n);
    store(0);
    for (Index step = 1; step <= total_steps; ++step) {
        eval(v, Nv);
        for (std::size_t i = 0; i < n; ++i) a[i] = coef.e2[i] * v[i] + coef.q[i] * Nv[i];
        eval(a, Na);
        for (std::size_t i = 0; i < n; ++i) b[i] = coef.e2[i] * v[i] + coef.q[i] * Na[i];
        eval(b, Nb);
        for (std::size_t i = 0; i < n; ++i) c[i] = coef.e2[i] * a[i] + coef.q[i] * (2.0 * Nb[i] - Nv[i]);
        eval(c, Nc);
        for (std::size_t i = 0; i < n; ++i)
            v[i] = coef.e[i] * v[i] + Nv[i] * coef.f1[i] + 2.0 * (Na[i] + Nb[i]) * coef.f2[i] + Nc[i] * coef.f3[i];
        time = static_cast<double>(step) * h;
        store(step);
    }
    if (stored.empty()) throw ArgumentError("ks: no snapshots in the requested window");

    SnapshotMatrix out;
    out.data.resize(N, static_cast<Index>(stored.size()));
    for (std::size_t j = 0; j < stored.size(); ++j) out.data.col(static_cast<Index>(j)) = stored[j];
    out.dt = spec.output_dt();
    out.grid = std::make_shared<const Geometry>(Geometry::line(N, true));
    return out;
}

}  // namespace mobsense

#pragma once
// Sparse linear dynamics on a periodic 2-D grid: global plane-wave (Fourier)
// modes plus localized Gaussian wave packets, each with its conjugate partner.

#include "mobsense/errors.hpp"
#include "mobsense/geometry.hpp"
#include "mobsense/model.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace mobsense {

struct TorusSpec {
    Index rows = 32;
    Index cols = 32;
    Index n_fourier = 2;
    Index n_gauss = 3;
    double gauss_width = 1.5;                       ///< standard deviation, grid units
    std::array<double, 2> freq_range{0.5, 2.5};     ///< oscillation frequency omega, rad per time unit
    std::array<double, 2> damp_range{-0.01, -0.001};  ///< growth rate delta <= 0
    Index max_wavenumber = 3;                       ///< Fourier wave vectors drawn from [-K, K]^2
    double dt = 0.1;                                ///< sampling interval
    std::uint64_t seed = 1;

    void validate() const {
        if (rows < 4 || cols < 4) throw ArgumentError("torus: rows and cols must be >= 4");
        if (n_fourier < 0 || n_gauss < 0 || n_fourier + n_gauss < 1) throw ArgumentError("torus: need at least one mode pair");
        if (!(gauss_width > 0.0)) throw ArgumentError("torus: gauss_width must be > 0");
        if (!(freq_range[0] > 0.0) || freq_range[1] < freq_range[0]) throw ArgumentError("torus: invalid freq_range");
        if (freq_range[1] * dt >= M_PI) throw ArgumentError("torus: frequencies alias at this dt");
        if (damp_range[1] > 0.0 || damp_range[1] < damp_range[0]) throw ArgumentError("torus: damping rates must be <= 0");
        if (!(dt > 0.0)) throw ArgumentError("torus: dt must be > 0");
        if (max_wavenumber < 1) throw ArgumentError("torus: max_wavenumber must be >= 1");
        if (2 * n_fourier > (2 * max_wavenumber + 1) * (2 * max_wavenumber + 1) - 1)
            throw ArgumentError("torus: not enough distinct wave vectors");
    }
};

struct TorusScenario {
    ReducedModel model;
    Geometry geometry;
    std::vector<Index> gauss_centers;  ///< cell index of each Gaussian packet
    double max_frequency = 0.0;        ///< rad per time unit
    double nyquist_period = 0.0;       ///< pi / max_frequency
    Index nyquist_steps = 0;           ///< floor(nyquist_period / dt)
};

inline double torus_distance(Index rows, Index cols, Index a, Index b) {
    Index dr = std::abs(a / cols - b / cols), dc = std::abs(a % cols - b % cols);
    dr = std::min(dr, rows - dr);
    dc = std::min(dc, cols - dc);
    return std::hypot(static_cast<double>(dr), static_cast<double>(dc));
}

inline TorusScenario make_torus(const TorusSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    const Index rows = spec.rows, cols = spec.cols, n = rows * cols;
    const Index pairs = spec.n_fourier + spec.n_gauss;
    std::uniform_int_distribution<Index> wave(-spec.max_wavenumber, spec.max_wavenumber);
    std::uniform_int_distribution<Index> cell(0, n - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    MatrixXcd modes(n, 2 * pairs);
    VectorXcd eigenvalues(2 * pairs);

    std::vector<std::pair<Index, Index>> waves;
    for (Index j = 0; j < spec.n_fourier; ++j) {
        Index kr = 0, kc = 0;
        for (;;) {
            kr = wave(rng);
            kc = wave(rng);
            if (kr == 0 && kc == 0) continue;
            bool fresh = true;
            for (const auto& [wr, wc] : waves) fresh = fresh && !(wr == kr && wc == kc) && !(wr == -kr && wc == -kc);
            if (fresh) break;
        }
        waves.emplace_back(kr, kc);
        for (Index r = 0; r < rows; ++r)
            for (Index c = 0; c < cols; ++c) {
                const double phase = 2.0 * M_PI * (static_cast<double>(kr * r) / rows + static_cast<double>(kc * c) / cols);
                modes(r * cols + c, 2 * j) = std::polar(1.0, phase);
            }
    }

    TorusScenario out{ReducedModel{}, Geometry::grid2d(rows, cols, true, true), {}, 0.0, 0.0, 0};
    for (Index g = 0; g < spec.n_gauss; ++g) {
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            const Index c = cell(rng);
            placed = true;
            for (Index other : out.gauss_centers)
                placed = placed && torus_distance(rows, cols, c, other) >= 2.0 * spec.gauss_width;
            if (placed) out.gauss_centers.push_back(c);
        }
        if (!placed) throw ArgumentError("torus: cannot place Gaussian centers 2*gauss_width apart after 100 attempts");
    }
    const double w = spec.gauss_width;
    const double kappa = 2.0 * M_PI / (4.0 * w);
    for (Index g = 0; g < spec.n_gauss; ++g) {
        const double theta = 2.0 * M_PI * unit(rng);
        const Index center = out.gauss_centers[static_cast<std::size_t>(g)];
        const double cr = static_cast<double>(center / cols), cc = static_cast<double>(center % cols);
        for (Index r = 0; r < rows; ++r)
            for (Index c = 0; c < cols; ++c) {
                double dr = static_cast<double>(r) - cr, dc = static_cast<double>(c) - cc;
                dr -= rows * std::round(dr / rows);
                dc -= cols * std::round(dc / cols);
                const double amp = std::exp(-(dr * dr + dc * dc) / (2.0 * w * w));
                modes(r * cols + c, 2 * (spec.n_fourier + g)) =
                    std::polar(amp, kappa * (std::cos(theta) * dc + std::sin(theta) * dr));
            }
    }

    for (Index j = 0; j < pairs; ++j) {
        const double delta = spec.damp_range[0] + (spec.damp_range[1] - spec.damp_range[0]) * unit(rng);
        const double omega = spec.freq_range[0] + (spec.freq_range[1] - spec.freq_range[0]) * unit(rng);
        out.max_frequency = std::max(out.max_frequency, omega);
        eigenvalues(2 * j) = std::exp(Complex(delta, omega) * spec.dt);
        eigenvalues(2 * j + 1) = std::conj(eigenvalues(2 * j));
        modes.col(2 * j).normalize();
        modes.col(2 * j + 1) = modes.col(2 * j).conjugate();
    }
    out.model = ReducedModel::from_spectrum(eigenvalues, modes);
    out.nyquist_period = M_PI / out.max_frequency;
    out.nyquist_steps = static_cast<Index>(std::floor(out.nyquist_period / spec.dt));
    return out;
}

}  // namespace mobsense

#include "mobsense/io.hpp"
#include "mobsense/model.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstring>
#include <random>

using namespace mobsense;
using testing_support::multiset_distance;
using testing_support::random_model;

TEST_CASE("spectral_truncate keeps the largest eigenvalues of a diagonal system") {
    FullModel full{Eigen::Vector3d(0.9, 0.5, 0.1).asDiagonal().toDenseMatrix(), 0.0, 1.0};
    const auto out = spectral_truncate(full, 2);
    REQUIRE(out.model.m() == 2);
    CHECK_FALSE(out.rank_adjusted);
    CHECK(std::abs(out.model.eigenvalues()(0) - Complex(0.9)) < 1e-14);
    CHECK(std::abs(out.model.eigenvalues()(1) - Complex(0.5)) < 1e-14);
    MatrixXcd expected = MatrixXcd::Identity(3, 2);
    CHECK((out.model.modes() - expected).norm() < 1e-14);
}

TEST_CASE("spectral_truncate of a scaled rotation yields one conjugate pair") {
    const double th = 0.3, r = 0.95;
    MatrixXd A(2, 2);
    A << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    A *= r;
    const auto out = spectral_truncate(FullModel{A, 0.0, 1.0}, 2);
    REQUIRE(out.model.m() == 2);
    CHECK(std::abs(out.model.eigenvalues()(0) - std::polar(r, th)) < 1e-12);
    CHECK(std::abs(out.model.eigenvalues()(1) - std::polar(r, -th)) < 1e-12);
    CHECK(out.model.pair_map()[0].role == PairRole::lead);
    CHECK(out.model.pair_map()[1].role == PairRole::follow);
}

TEST_CASE("spectral_truncate of a random stable system matches the full eigensolve") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXd A(8, 8);
    for (Index i = 0; i < 8; ++i)
        for (Index j = 0; j < 8; ++j) A(i, j) = normal(rng);
    // scale into the unit disc
    A /= 1.1 * Eigen::ComplexEigenSolver<MatrixXcd>(A.cast<Complex>()).eigenvalues().cwiseAbs().maxCoeff();

    // oracle: complex Schur based eigensolver, moduli sorted descending
    VectorXd oracle = Eigen::ComplexEigenSolver<MatrixXcd>(A.cast<Complex>()).eigenvalues().cwiseAbs();
    std::sort(oracle.begin(), oracle.end(), std::greater<>());

    const auto out = spectral_truncate(FullModel{A, 0.0, 1.0}, 4);
    REQUIRE(out.model.m() >= 3);
    CHECK(out.rank_adjusted == (out.model.m() != 4));
    for (Index j = 0; j < out.model.m(); ++j) CHECK(std::abs(std::abs(out.model.eigenvalues()(j)) - oracle(j)) < 1e-10);
}

TEST_CASE("spectral_truncate errors") {
    MatrixXd jordan(2, 2);
    jordan << 1.0, 1.0, 0.0, 1.0;
    CHECK_THROWS_AS(spectral_truncate(FullModel{jordan, 0.0, 1.0}, 1), DiagnosticError);
    CHECK_THROWS_AS(spectral_truncate(FullModel{MatrixXd::Identity(3, 3), 0.0, 1.0}, 0), ArgumentError);
}

TEST_CASE("spectral_truncate never splits a conjugate pair") {
    MatrixXd A = MatrixXd::Zero(3, 3);
    A(0, 0) = 0.95;
    A(1, 1) = 0.9 * std::cos(0.4);
    A(1, 2) = -0.9 * std::sin(0.4);
    A(2, 1) = 0.9 * std::sin(0.4);
    A(2, 2) = 0.9 * std::cos(0.4);
    const auto out = spectral_truncate(FullModel{A, 0.0, 1.0}, 2);
    CHECK(out.model.m() == 1);
    CHECK(out.rank_adjusted);
    CHECK(out.requested_rank == 2);
    CHECK(std::abs(out.model.eigenvalues()(0) - Complex(0.95)) < 1e-14);

    MatrixXd B = A.bottomRightCorner(2, 2);
    CHECK_THROWS_AS(spectral_truncate(FullModel{B, 0.0, 1.0}, 1), ArgumentError);
}

TEST_CASE("fit_dmd recovers a scalar geometric sequence") {
    SnapshotMatrix snaps;
    snaps.data.resize(1, 20);
    for (Index t = 0; t < 20; ++t) snaps.data(0, t) = std::pow(0.95, static_cast<double>(t));
    const auto model = fit_dmd(snaps, 1);
    REQUIRE(model.m() == 1);
    CHECK(std::abs(model.eigenvalues()(0) - Complex(0.95)) < 1e-10);
    CHECK(std::abs(model.modes()(0, 0) - Complex(1.0)) < 1e-12);
}

TEST_CASE("fit_dmd recovers a projected generator spectrum") {
    // generator: diag(0.9, 0.8 e^{+-0.2i}) in real form, seen through a fixed 16x3 basis
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXd basis(16, 3);
    for (Index i = 0; i < 16; ++i)
        for (Index j = 0; j < 3; ++j) basis(i, j) = normal(rng);
    MatrixXd G = MatrixXd::Zero(3, 3);
    G(0, 0) = 0.9;
    G.bottomRightCorner(2, 2) << 0.8 * std::cos(0.2), -0.8 * std::sin(0.2), 0.8 * std::sin(0.2), 0.8 * std::cos(0.2);
    Eigen::Vector3d s(1.0, 0.7, -0.4);
    SnapshotMatrix snaps;
    snaps.data.resize(16, 30);
    for (Index t = 0; t < 30; ++t, s = G * s) snaps.data.col(t) = basis * s;

    const auto model = fit_dmd(snaps, 3);
    VectorXcd truth(3);
    truth << 0.9, std::polar(0.8, 0.2), std::polar(0.8, -0.2);
    CHECK(multiset_distance(model.eigenvalues(), truth) < 1e-8);
    for (Index j = 0; j < 3; ++j) CHECK(std::abs(model.modes().col(j).norm() - 1.0) < 1e-12);
    CHECK(std::abs(model.eigenvalues()(0) - Complex(0.9)) < 1e-8);  // canonical order: largest modulus first
}

TEST_CASE("fit_dmd on constant snapshots reports the achievable rank") {
    SnapshotMatrix snaps;
    snaps.data = MatrixXd::Ones(5, 10);
    try {
        fit_dmd(snaps, 2);
        FAIL("expected DegenerateRankError");
    } catch (const DegenerateRankError& e) {
        CHECK(e.achievable_rank() == 1);
    }
}

TEST_CASE("to_real_blocks examples") {
    SECTION("real eigenvalue") {
        const ReducedModel model(VectorXcd::Constant(1, Complex(0.9)), MatrixXcd::Constant(1, 1, Complex(1.0)),
                                 {PairTag{PairRole::real, 0}});
        const auto real = to_real_blocks(model);
        REQUIRE(real.dynamics.rows() == 1);
        CHECK(real.dynamics(0, 0) == 0.9);
    }
    SECTION("rotation pair") {
        VectorXcd lam(2);
        lam << std::polar(0.95, 0.3), std::polar(0.95, -0.3);
        MatrixXcd modes(2, 2);
        modes << Complex(1, 0), Complex(1, 0), Complex(0, -1), Complex(0, 1);
        const auto real = to_real_blocks(ReducedModel::from_spectrum(lam, modes));
        MatrixXd expected(2, 2);
        expected << std::cos(0.3), -std::sin(0.3), std::sin(0.3), std::cos(0.3);
        CHECK((real.dynamics - 0.95 * expected).norm() < 1e-14);
    }
    SECTION("random ten-mode model") {
        const auto model = random_model(20, 4, 2, 11);
        const auto real = to_real_blocks(model);
        const VectorXcd ev = Eigen::EigenSolver<MatrixXd>(real.dynamics).eigenvalues();
        CHECK(multiset_distance(ev, model.eigenvalues()) < 1e-10);
    }
}

TEST_CASE("real-block modes reproduce complex reconstructions") {
    const auto model = random_model(12, 3, 2, 21);
    const auto real = to_real_blocks(model);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        VectorXd c(model.m());
        for (Index i = 0; i < c.size(); ++i) c(i) = normal(rng);
        const VectorXcd z = to_complex_coefficients(model, c);
        REQUIRE(model.is_conjugate_symmetric(z));
        const VectorXcd field = model.modes() * z;
        CHECK(field.imag().norm() <= 1e-8 * field.norm());
        CHECK((real.modes * c - field.real()).norm() <= 1e-8 * field.norm());
        // dynamics commute with the isomorphism
        const VectorXcd zn = model.eigenvalues().asDiagonal() * z;
        CHECK((to_real_coefficients(model, zn) - real.dynamics * c).norm() < 1e-12);
    }
}

TEST_CASE("inconsistent pair maps are structural errors") {
    VectorXcd lam(2);
    lam << std::polar(0.9, 0.3), std::polar(0.9, 0.3);
    MatrixXcd modes = MatrixXcd::Identity(2, 2);
    CHECK_THROWS_AS(ReducedModel(lam, modes, {PairTag{PairRole::lead, 1}, PairTag{PairRole::follow, 0}}), StructuralError);
    CHECK_THROWS_AS(ReducedModel(lam, modes, {PairTag{PairRole::follow, 1}, PairTag{PairRole::lead, 0}}), StructuralError);
}

TEST_CASE("simulate examples") {
    SECTION("fixed point") {
        const ReducedModel model(VectorXcd::Constant(1, Complex(1.0)), MatrixXcd::Ones(4, 1), {PairTag{PairRole::real, 0}});
        const auto out = simulate(model, VectorXcd::Constant(1, Complex(1.0)), 5, NoiseSpec{0.0, 1.0}, 1);
        CHECK(out.data == MatrixXd::Ones(4, 5));
    }
    SECTION("geometric decay") {
        const ReducedModel model(VectorXcd::Constant(1, Complex(0.5)), MatrixXcd::Ones(1, 1), {PairTag{PairRole::real, 0}});
        const auto out = simulate(model, VectorXcd::Constant(1, Complex(1.0)), 3, NoiseSpec{0.0, 1.0}, 1);
        CHECK(out.data(0, 0) == 1.0);
        CHECK(out.data(0, 1) == 0.5);
        CHECK(out.data(0, 2) == 0.25);
    }
    SECTION("determinism") {
        const auto model = random_model(10, 2, 1, 5);
        VectorXcd z0 = to_complex_coefficients(model, VectorXd::Ones(model.m()));
        const auto a = simulate(model, z0, 50, NoiseSpec{0.01, 1.0}, 99);
        const auto b = simulate(model, z0, 50, NoiseSpec{0.01, 1.0}, 99);
        CHECK(std::memcmp(a.data.data(), b.data.data(), sizeof(double) * a.data.size()) == 0);
        const auto c = simulate(model, z0, 50, NoiseSpec{0.01, 1.0}, 100);
        CHECK(a.data != c.data);
    }
    SECTION("rejects non-symmetric initial state") {
        const auto model = random_model(6, 1, 0, 5);
        VectorXcd z0(2);
        z0 << Complex(1, 1), Complex(1, 1);
        CHECK_THROWS_AS(simulate(model, z0, 3, NoiseSpec{0.0, 1.0}, 1), ArgumentError);
    }
}

TEST_CASE("noise-free simulation followed by DMD recovers the generator spectrum") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto model = random_model(30, 3, 2, seed, 0.7, 0.99);
        VectorXcd z0 = to_complex_coefficients(model, VectorXd::Ones(model.m()));
        const auto snaps = simulate(model, z0, 40, NoiseSpec{0.0, 1.0}, seed);
        const auto fitted = fit_dmd(snaps, model.m());
        for (Index j = 0; j < model.m(); ++j)
            CHECK(std::abs(fitted.eigenvalues()(j) - model.eigenvalues()(j)) <= 1e-6 * std::abs(model.eigenvalues()(j)));
    }
}

TEST_CASE("to_real_blocks after spectral_truncate preserves the spectrum") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        MatrixXd A(10, 10);
        for (Index i = 0; i < 10; ++i)
            for (Index j = 0; j < 10; ++j) A(i, j) = normal(rng) / std::sqrt(10.0);
        const auto out = spectral_truncate(FullModel{A, 0.0, 1.0}, 6);
        const auto real = to_real_blocks(out.model);
        const VectorXcd ev = Eigen::EigenSolver<MatrixXd>(real.dynamics).eigenvalues();
        CHECK(multiset_distance(ev, out.model.eigenvalues()) < 1e-10);
    }
}

TEST_CASE("full-measurement pseudoinverse reconstruction is exact on the mode span") {
    const auto model = random_model(15, 3, 1, 8);
    const MatrixXcd& psi = model.modes();
    const MatrixXcd pinv = psi.completeOrthogonalDecomposition().pseudoInverse();
    std::mt19937_64 rng(2);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        VectorXcd z(model.m());
        for (Index i = 0; i < z.size(); ++i) z(i) = Complex(normal(rng), normal(rng));
        const VectorXcd x = psi * z;
        CHECK((psi * (pinv * x) - x).norm() <= 1e-8 * x.norm());
    }
}

TEST_CASE("model JSON round trip is exact") {
    const auto model = random_model(9, 2, 3, 17);
    const auto text = io::model_to_json(model).dump();
    const auto back = io::model_from_json(nlohmann::json::parse(text));
    CHECK(back.eigenvalues() == model.eigenvalues());
    CHECK(back.modes() == model.modes());
    REQUIRE(back.pair_map().size() == model.pair_map().size());
    for (std::size_t j = 0; j < back.pair_map().size(); ++j) {
        CHECK(back.pair_map()[j].role == model.pair_map()[j].role);
        CHECK(back.pair_map()[j].partner == model.pair_map()[j].partner);
    }
    auto broken = io::model_to_json(model);
    broken["m"] = 4;
    CHECK_THROWS_AS(io::model_from_json(broken), FormatError);
}

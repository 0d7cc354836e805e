#include "mobsense/io.hpp"
#include "mobsense/observability.hpp"
#include "mobsense/scenarios/torus.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

using namespace mobsense;
using testing_support::random_model;
using testing_support::random_trajectory;

namespace {

/// Psi Lambda^t evaluated in complex arithmetic, then mapped to real-block columns.
MatrixXd complex_oracle_block(const ReducedModel& model, Index t) {
    VectorXcd powers(model.m());
    for (Index j = 0; j < model.m(); ++j) powers(j) = std::pow(model.eigenvalues()(j), static_cast<double>(t));
    const MatrixXcd block = model.modes() * powers.asDiagonal();
    MatrixXd out(model.n(), model.m());
    for (Index j = 0; j < model.m(); ++j) {
        switch (model.pair_map()[static_cast<std::size_t>(j)].role) {
            case PairRole::real: out.col(j) = block.col(j).real(); break;
            case PairRole::lead: out.col(j) = std::sqrt(2.0) * block.col(j).real(); break;
            case PairRole::follow: out.col(j) = -std::sqrt(2.0) * block.col(j - 1).imag(); break;
        }
    }
    return out;
}

}  // namespace

TEST_CASE("projected_block examples") {
    const auto model = random_model(14, 3, 1, 5);
    const auto real = to_real_blocks(model);
    CHECK(projected_block(real, 0) == real.modes);

    SECTION("complex-arithmetic oracle") {
        const MatrixXd got = projected_block(real, 3);
        const MatrixXd want = complex_oracle_block(model, 3);
        CHECK((got - want).cwiseAbs().maxCoeff() < 1e-10);
    }
    SECTION("isometric dynamics keep column norms") {
        VectorXcd lam = model.eigenvalues();
        for (Index j = 0; j < lam.size(); ++j) lam(j) /= std::abs(lam(j));
        const auto unit = to_real_blocks(ReducedModel(lam, model.modes(), model.pair_map()));
        for (Index t : {1, 5, 17}) {
            const MatrixXd b = projected_block(unit, t);
            // a rotation block mixes its two columns; the pair's joint norm is preserved
            CHECK(std::abs(b.norm() - unit.modes.norm()) < 1e-10);
            for (Index j = 0; j < b.cols(); ++j)
                if (unit.block_map[static_cast<std::size_t>(j)].part == BlockPart::real)
                    CHECK(std::abs(b.col(j).norm() - unit.modes.col(j).norm()) < 1e-10);
        }
    }
    CHECK_THROWS_AS(projected_block(real, -1), ArgumentError);
}

TEST_CASE("assemble examples") {
    const auto model = random_model(10, 2, 2, 6);
    const auto real = to_real_blocks(model);

    SECTION("single step equals stationary selection") {
        const Trajectory traj(1, 3, {7, 2, 4});
        const auto obs = assemble(real, traj);
        REQUIRE(obs.matrix.rows() == 3);
        CHECK(obs.matrix.row(0) == real.modes.row(7));
        CHECK(obs.matrix.row(1) == real.modes.row(2));
        CHECK(obs.matrix.row(2) == real.modes.row(4));
    }
    SECTION("full measurement over m steps has rank m") {
        std::vector<std::vector<Index>> steps;
        for (Index t = 0; t < real.m(); ++t) {
            std::vector<Index> all(static_cast<std::size_t>(real.n()));
            for (Index i = 0; i < real.n(); ++i) all[static_cast<std::size_t>(i)] = i;
            steps.push_back(all);
        }
        const auto obs = assemble(real, Trajectory::from_steps(steps));
        CHECK(obs.matrix.rows() == real.n() * real.m());
        for (Index t = 0; t < real.m(); ++t)
            CHECK(obs.matrix.middleRows(t * real.n(), real.n()) == projected_block(real, t));
        CHECK(is_observable(real, Trajectory::from_steps(steps)).observable);
    }
    SECTION("out-of-range index") {
        CHECK_THROWS_AS(assemble(real, Trajectory(1, 1, {10})), ArgumentError);
    }
}

TEST_CASE("assemble on the torus fixture matches explicit selection matrices") {
    const auto torus = make_torus(TorusSpec{});
    const auto real = to_real_blocks(torus.model);
    const Trajectory traj = Trajectory::from_steps({{5, 300}, {6, 301}, {38, 333}});
    const auto obs = assemble(real, traj);

    const Index n = real.n();
    MatrixXd power = MatrixXd::Identity(real.m(), real.m());
    MatrixXd oracle(6, real.m());
    for (Index t = 0; t < 3; ++t) {
        MatrixXd S = MatrixXd::Zero(2, n);
        for (Index j = 0; j < 2; ++j) S(j, traj.location(t, j)) = 1.0;
        oracle.middleRows(2 * t, 2) = S * real.modes * power;
        power = power * real.dynamics;
    }
    CHECK((obs.matrix - oracle).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("condition_number examples") {
    CHECK(condition_number(MatrixXd::Identity(4, 4)) == Catch::Approx(1.0).epsilon(1e-14));
    MatrixXd d(2, 2);
    d << 2, 0, 0, 1;
    CHECK(condition_number(d) == Catch::Approx(2.0).epsilon(1e-14));
    CHECK(std::isinf(condition_number(MatrixXd::Ones(2, 3))));
    MatrixXd singular(3, 2);
    singular << 1, 2, 2, 4, 3, 6;
    CHECK(std::isinf(condition_number(singular)));
    CHECK(condition_number(singular) == kInfinity);
    CHECK(kInfinity > 1e300);
}

TEST_CASE("is_observable examples") {
    SECTION("sensor on a zero row") {
        MatrixXcd modes(3, 1);
        modes << Complex(1), Complex(0), Complex(2);
        const auto real = to_real_blocks(ReducedModel(VectorXcd::Constant(1, Complex(0.9)), modes, {PairTag{PairRole::real, 0}}));
        const auto report = is_observable(real, Trajectory(1, 1, {1}));
        CHECK_FALSE(report.observable);
        CHECK(report.rank == 0);
        CHECK(report.singular_values.size() == 1);
        CHECK(is_observable(real, Trajectory(1, 1, {0})).observable);
    }
    SECTION("torus: moving sensor observable, frozen sensor not") {
        const auto torus = make_torus(TorusSpec{});
        const auto real = to_real_blocks(torus.model);
        std::vector<std::vector<Index>> moving, frozen;
        for (Index t = 0; t < 12; ++t) {
            moving.push_back({(t * 37 + 11 * (t % 3)) % real.n()});
            frozen.push_back({100});
        }
        const auto m_report = is_observable(real, Trajectory::from_steps(moving));
        const auto f_report = is_observable(real, Trajectory::from_steps(frozen));
        // oracle: SVD rank of the explicitly built matrices
        auto rank_of = [&](const std::vector<std::vector<Index>>& steps) {
            MatrixXd M(12, real.m());
            MatrixXd block = real.modes;
            for (Index t = 0; t < 12; ++t, block = block * real.dynamics) M.row(t) = block.row(steps[t][0]);
            const VectorXd sv = Eigen::JacobiSVD<MatrixXd>(M).singularValues();
            Index r = 0;
            for (Index i = 0; i < sv.size(); ++i) r += sv(i) > 1e-10 * sv(0);
            return r;
        };
        CHECK(m_report.observable);
        CHECK(m_report.rank == rank_of(moving));
        CHECK_FALSE(f_report.observable);
        CHECK(f_report.rank == rank_of(frozen));
    }
}

TEST_CASE("conditioning invariants") {
    std::mt19937_64 rng(31);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto model = random_model(16, 3, 2, seed);
        const auto real = to_real_blocks(model);
        const Trajectory traj = random_trajectory(16, 4, 3, rng);
        const double kappa = condition_number(assemble(real, traj));
        REQUIRE(std::isfinite(kappa));

        // permuting sensors within each step
        std::vector<Index> flat = traj.locations();
        for (Index t = 0; t < 4; ++t) std::reverse(flat.begin() + 3 * t, flat.begin() + 3 * t + 3);
        CHECK(std::abs(condition_number(assemble(real, Trajectory(4, 3, flat))) - kappa) <= 1e-12 * kappa);

        // scaling all modes
        RealBlockModel scaled = real;
        scaled.modes *= 3.7;
        CHECK(std::abs(condition_number(assemble(scaled, traj)) - kappa) <= 1e-12 * kappa);

        // appending steps never loses rank
        Index previous = 0;
        for (Index l = 1; l <= 4; ++l) {
            std::vector<Index> prefix(traj.locations().begin(), traj.locations().begin() + 3 * l);
            const Index rank = is_observable(real, Trajectory(l, 3, prefix)).rank;
            CHECK(rank >= previous);
            previous = rank;
        }
    }
}

TEST_CASE("trajectory validation and serialization") {
    CHECK_THROWS_AS(Trajectory(2, 2, {0, 0, 1, 2}), ArgumentError);
    CHECK_THROWS_AS(Trajectory(2, 2, {0, 1, 2}), ArgumentError);
    CHECK_THROWS_AS(Trajectory(0, 1, {}), ArgumentError);
    const Trajectory traj(3, 2, {0, 5, 1, 6, 2, 7});
    CHECK(traj.at_time(4)[0] == 1);
    const auto back = io::trajectory_from_json(nlohmann::json::parse(io::trajectory_to_json(traj).dump()));
    CHECK(back == traj);
    const auto csv = io::trajectory_csv(traj, Geometry::grid2d(2, 4));
    CHECK(csv.rfind("step,sensor,index,row,col\n0,0,0,0,0\n0,1,5,1,1\n", 0) == 0);
}

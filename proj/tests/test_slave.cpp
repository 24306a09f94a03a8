#include <catch2/catch_amalgamated.hpp>

#include "metagrad/slave.hpp"
#include "test_support.hpp"

using namespace metagrad;
using test_support::ball_project_oracle_2d;
using test_support::box_project_oracle_2d;
using test_support::metric_objective;
using test_support::pg_project_oracle;
using test_support::random_spd;

TEST_CASE("slave_init validates the learning rate and seeds the state") {
    const Bounds bounds{1.0, 1.0, Variant::full};
    CHECK_THROWS_AS(slave_init(0.3, bounds, 1), std::invalid_argument);  // > 1/(5 D G) = 0.2
    CHECK_THROWS_AS(slave_init(0.0, bounds, 1), std::invalid_argument);
    CHECK_THROWS_AS(slave_init(-0.1, bounds, 1), std::invalid_argument);

    const SlaveState s = slave_init(0.2, bounds, 3);
    CHECK(s.eta == 0.2);
    CHECK(s.w.isZero(0.0));
    CHECK(s.cov.isApprox(Matrix::Identity(3, 3), 0.0));  // D^2 I with D = 1

    const Bounds diag_bounds{1.0, 1.0, Variant::diag};
    const SlaveState sd = slave_init(0.1, diag_bounds, 2);
    CHECK(sd.cov_diag[0] == 1.0);
    CHECK(sd.cov_diag[1] == 1.0);
}

TEST_CASE("one-step frozen example in one dimension") {
    // D=1 (ball of radius 1/2), eta=0.1, w=0, g=1:
    //   precision 1/1 + 2*0.01 = 1.02, cov 1/1.02, step -0.1/1.02
    const Domain dom = Domain::ball(0.5, 1);
    const Bounds bounds = bounds_for(dom, 1.0, Variant::full);
    REQUIRE(bounds.D == 1.0);
    SlaveState s = slave_init(0.1, bounds, 1);
    Vector g(1), wm(1);
    g << 1.0;
    wm << 0.0;
    slave_step(s, g, wm, dom);
    CHECK(s.cov(0, 0) == Catch::Approx(1.0 / 1.02).epsilon(1e-15));
    CHECK(s.w[0] == Catch::Approx(-0.1 / 1.02).epsilon(1e-15));

    SlaveState sd = slave_init(0.1, bounds_for(dom, 1.0, Variant::diag), 1);
    slave_step(sd, g, wm, dom);
    CHECK(sd.cov_diag[0] == Catch::Approx(1.0 / 1.02).epsilon(1e-15));
    CHECK(sd.w[0] == Catch::Approx(-0.1 / 1.02).epsilon(1e-15));
}

TEST_CASE("a zero gradient leaves the state exactly unchanged") {
    const Domain dom = Domain::ball(1.0, 3);
    for (const Variant variant : {Variant::full, Variant::diag}) {
        const Bounds bounds = bounds_for(dom, 1.0, variant);
        SlaveState s = slave_init(0.05, bounds, 3);
        // move the state off the origin first
        Rng rng(31);
        Vector g = sample_ball(rng, 3, 1.0);
        Vector wm = sample_ball(rng, 3, 1.0);
        slave_step(s, g, wm, dom);
        const SlaveState before = s;
        slave_step(s, Vector::Zero(3), wm, dom);
        REQUIRE((s.w.array() == before.w.array()).all());
        if (variant == Variant::full) {
            REQUIRE((s.cov.array() == before.cov.array()).all());
        } else {
            REQUIRE((s.cov_diag.array() == before.cov_diag.array()).all());
        }
    }
}

TEST_CASE("full covariance tracks the dense-inverse oracle over 50 steps") {
    const Eigen::Index d = 3;
    const Domain dom = Domain::ball(1.0, d);
    const Bounds bounds = bounds_for(dom, 1.0, Variant::full);
    const double eta = 0.05;
    SlaveState s = slave_init(eta, bounds, d);
    Matrix precision = Matrix::Identity(d, d) / (bounds.D * bounds.D);
    Rng rng(77);
    for (int t = 0; t < 50; ++t) {
        const Vector g = sample_ball(rng, d, 1.0);
        const Vector wm = sample_ball(rng, d, 1.0);
        slave_step(s, g, wm, dom);
        precision += 2.0 * eta * eta * g * g.transpose();
        const Matrix oracle = precision.llt().solve(Matrix::Identity(d, d));
        REQUIRE((s.cov - oracle).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("diag covariance matches the per-coordinate closed form") {
    const Eigen::Index d = 3;
    const Domain dom = Domain::ball(1.0, d);
    const Bounds bounds = bounds_for(dom, 1.0, Variant::diag);
    const double eta = 0.05;
    SlaveState s = slave_init(eta, bounds, d);
    Vector sq_sum = Vector::Zero(d);
    Rng rng(78);
    for (int t = 0; t < 50; ++t) {
        const Vector g = sample_ball(rng, d, 1.0);
        const Vector wm = sample_ball(rng, d, 1.0);
        slave_step(s, g, wm, dom);
        sq_sum += g.cwiseAbs2();
        for (Eigen::Index i = 0; i < d; ++i) {
            const double oracle = 1.0 / (1.0 / (bounds.D * bounds.D) + 2.0 * eta * eta * sq_sum[i]);
            REQUIRE(s.cov_diag[i] == Catch::Approx(oracle).epsilon(1e-12));
        }
    }
}

TEST_CASE("covariance eigenvalues stay in (0, D^2]") {
    const Eigen::Index d = 4;
    const Domain dom = Domain::ball(1.0, d);
    const Bounds bounds = bounds_for(dom, 1.0, Variant::full);
    SlaveState s = slave_init(0.1, bounds, d);
    Rng rng(79);
    for (int t = 0; t < 100; ++t) {
        slave_step(s, sample_ball(rng, d, 1.0), sample_ball(rng, d, 1.0), dom);
        const Eigen::SelfAdjointEigenSolver<Matrix> es(s.cov);
        REQUIRE(es.eigenvalues().minCoeff() > 0.0);
        REQUIRE(es.eigenvalues().maxCoeff() <= bounds.D * bounds.D * (1.0 + 1e-10));
    }
}

TEST_CASE("metric ball projection frozen example") {
    // cov = diag(1,4), p = (2,2), r = 1: multiplier solves
    // (2/(1+L))^2 + (2/(1+4L))^2 = 1 -> L = 1.142830794062785,
    // u = (0.933344809838214, 0.358981149850612).
    const Domain dom = Domain::ball(1.0, 2);
    Vector p(2);
    p << 2.0, 2.0;
    Vector cov_diag(2);
    cov_diag << 1.0, 4.0;
    const Vector u_diag = mahalanobis_project(dom, cov_diag, p);
    CHECK(u_diag[0] == Catch::Approx(0.9333448098382142).margin(1e-6));
    CHECK(u_diag[1] == Catch::Approx(0.3589811498506122).margin(1e-6));
    CHECK(dom.contains(u_diag));

    Matrix cov = cov_diag.asDiagonal();
    const Vector u_full = mahalanobis_project(dom, cov, p);
    CHECK(u_full[0] == Catch::Approx(0.9333448098382142).margin(1e-6));
    CHECK(u_full[1] == Catch::Approx(0.3589811498506122).margin(1e-6));
}

TEST_CASE("metric projection returns interior points unchanged") {
    const Domain dom = Domain::ball(1.0, 2);
    Rng rng(80);
    for (int k = 0; k < 100; ++k) {
        const Vector p = sample_ball(rng, 2, 1.0);
        const Matrix cov = random_spd(rng, 2, 0.1, 3.0);
        const Vector u = mahalanobis_project(dom, cov, p);
        REQUIRE((u.array() == p.array()).all());
        Vector cd(2);
        cd << rng.uniform(0.1, 3.0), rng.uniform(0.1, 3.0);
        const Vector ud = mahalanobis_project(dom, cd, p);
        REQUIRE((ud.array() == p.array()).all());
    }
}

TEST_CASE("metric ball projection agrees with the boundary-scan oracle") {
    const Domain dom = Domain::ball(1.0, 2);
    Rng rng(81);
    for (int k = 0; k < 100; ++k) {
        const Matrix cov = random_spd(rng, 2, 0.05, 2.0);
        Vector p = sample_unit_sphere(rng, 2) * rng.uniform(1.01, 4.0);
        const Vector u = mahalanobis_project(dom, cov, p);
        REQUIRE(dom.contains(u));
        const Vector oracle = ball_project_oracle_2d(cov, p, 1.0);
        const double got = metric_objective(cov, p, u);
        const double want = metric_objective(cov, p, oracle);
        REQUIRE(got <= want + 1e-6);
        REQUIRE(std::abs(got - want) <= 1e-6 * std::max(1.0, want));
    }
}

TEST_CASE("metric box projection with a diagonal covariance is plain clipping") {
    Vector lo(2), hi(2);
    lo << -1.0, -0.5;
    hi << 0.75, 1.0;
    const Domain box = Domain::box(lo, hi);
    Rng rng(82);
    for (int k = 0; k < 200; ++k) {
        Vector p(2);
        p << rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0);
        Vector cd(2);
        cd << rng.uniform(0.05, 2.0), rng.uniform(0.05, 2.0);
        const Vector u = mahalanobis_project(box, cd, p);
        const Vector clip = p.cwiseMax(lo).cwiseMin(hi);
        REQUIRE((u.array() == clip.array()).all());
    }
}

TEST_CASE("metric box projection agrees with the per-face oracle") {
    Vector lo(2), hi(2);
    lo << -1.0, -1.0;
    hi << 1.0, 1.0;
    const Domain box = Domain::box(lo, hi);
    Rng rng(83);
    for (int k = 0; k < 100; ++k) {
        const Matrix cov = random_spd(rng, 2, 0.05, 2.0);
        Vector p(2);
        p << rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0);
        if (box.contains(p)) continue;
        const Vector u = mahalanobis_project(box, cov, p);
        REQUIRE(box.contains(u));
        const Vector oracle = box_project_oracle_2d(cov, p, box);
        const double got = metric_objective(cov, p, u);
        const double want = metric_objective(cov, p, oracle);
        REQUIRE(got <= want + 1e-6);
    }
}

TEST_CASE("metric projection agrees with projected gradient in dimension five") {
    const Domain dom = Domain::ball(1.0, 5);
    Rng rng(84);
    for (int k = 0; k < 20; ++k) {
        const Matrix cov = random_spd(rng, 5, 0.1, 2.0);
        const Vector p = sample_unit_sphere(rng, 5) * rng.uniform(1.05, 3.0);
        const Vector u = mahalanobis_project(dom, cov, p);
        const Vector oracle = pg_project_oracle(cov, p, dom);
        const double got = metric_objective(cov, p, u);
        const double want = metric_objective(cov, p, oracle);
        REQUIRE(got <= want + 1e-6);
    }
}

TEST_CASE("non-positive-definite covariance fails loudly") {
    const Domain ball = Domain::ball(1.0, 2);
    Vector p(2);
    p << 2.0, 0.0;

    Vector bad_diag(2);
    bad_diag << 1.0, 0.0;
    CHECK_THROWS_AS(mahalanobis_project(ball, bad_diag, p), CovarianceNotPositiveDefinite);

    Matrix indefinite(2, 2);
    indefinite << 1.0, 0.0, 0.0, -0.5;
    CHECK_THROWS_AS(mahalanobis_project(ball, indefinite, p), CovarianceNotPositiveDefinite);

    Vector lo(2), hi(2);
    lo << -1.0, -1.0;
    hi << 1.0, 1.0;
    const Domain box = Domain::box(lo, hi);
    Vector p_out(2);
    p_out << 3.0, 3.0;
    CHECK_THROWS_AS(mahalanobis_project(box, indefinite, p_out), CovarianceNotPositiveDefinite);
}

TEST_CASE("slave iterates always remain inside the domain") {
    Rng rng(85);
    const Domain ball = Domain::ball(0.8, 3);
    Vector lo(3), hi(3);
    lo << -1.0, -0.25, -2.0;
    hi << 0.5, 1.0, 0.75;
    const Domain box = Domain::box(lo, hi);
    for (const Variant variant : {Variant::full, Variant::diag}) {
        for (const Domain& dom : {ball, box}) {
            const Bounds bounds = bounds_for(dom, 1.0, variant);
            SlaveState s = slave_init(1.0 / (5.0 * bounds.D * bounds.G), bounds, 3);
            for (int t = 0; t < 200; ++t) {
                Vector g = variant == Variant::full
                               ? sample_ball(rng, 3, 1.0)
                               : sample_box(rng, Vector::Constant(3, -1.0), Vector::Constant(3, 1.0));
                slave_step(s, g, sample_ball(rng, 3, 0.5), dom);
                REQUIRE(dom.contains(s.w));
            }
        }
    }
}

// The per-rate guarantee the composed learner relies on: cumulative surrogate
// of the slave's own trajectory never exceeds that of any fixed point plus the
// quadratic-plus-log-determinant penalty, for any (w_master, g) stream.
TEST_CASE("slave surrogate regret bound on random streams") {
    Rng rng(86);
    const Eigen::Index d = 2;
    const Domain dom = Domain::ball(1.0, d);
    const std::uint64_t T = 100;
    for (const Variant variant : {Variant::full, Variant::diag}) {
        const Bounds bounds = bounds_for(dom, 1.0, variant);
        const double D = bounds.D;
        const double eta = 0.5 / (5.0 * D);
        SlaveState s = slave_init(eta, bounds, d);
        std::vector<Vector> ws, gs, wms;
        double own = 0.0;
        Matrix outer = Matrix::Zero(d, d);
        Vector sq = Vector::Zero(d);
        for (std::uint64_t t = 0; t < T; ++t) {
            const Vector g = sample_ball(rng, d, 1.0);
            const Vector wm = sample_ball(rng, d, 1.0);
            own += surrogate_loss(eta, wm, g, s.w, variant);
            ws.push_back(s.w);
            gs.push_back(g);
            wms.push_back(wm);
            slave_step(s, g, wm, dom);
            outer += g * g.transpose();
            sq += g.cwiseAbs2();
        }
        double logdet = 0.0;
        if (variant == Variant::full) {
            const Matrix M = Matrix::Identity(d, d) + 2.0 * eta * eta * D * D * outer;
            logdet = std::log(M.determinant());
        } else {
            for (Eigen::Index i = 0; i < d; ++i) logdet += std::log1p(2.0 * eta * eta * D * D * sq[i]);
        }
        for (int rep = 0; rep < 20; ++rep) {
            const Vector u = sample_ball(rng, d, 1.0);
            double fixed = 0.0;
            for (std::uint64_t t = 0; t < T; ++t) {
                fixed += surrogate_loss(eta, wms[t], gs[t], u, variant);
            }
            const double budget = fixed + u.squaredNorm() / (2.0 * D * D) + 0.5 * logdet;
            REQUIRE(own <= budget + 1e-8);
        }
    }
}

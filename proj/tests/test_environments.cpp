#include <catch2/catch_amalgamated.hpp>

#include "metagrad/environments.hpp"
#include "test_support.hpp"

using namespace metagrad;

TEST_CASE("fixed absolute loss: values, kink subgradient, and metadata") {
    Environment env = fixed_absolute(0);
    CHECK(env.name() == "fixed_absolute");
    CHECK(env.gradient_bound() == 1.0);
    REQUIRE(env.u_star().has_value());
    CHECK((*env.u_star())[0] == 0.25);
    CHECK(env.domain().shape() == Domain::Shape::box);
    CHECK(env.domain().lower()[0] == -1.0);
    CHECK(env.domain().upper()[0] == 1.0);

    const LossFunction f = env.next_loss();
    Vector at(1);
    at << 0.25;
    CHECK(f.value(at) == 0.0);
    CHECK(f.subgradient(at)[0] == 0.0);  // zero-slope element at the kink
    at << 0.0;
    CHECK(f.value(at) == 0.25);
    CHECK(f.subgradient(at)[0] == -1.0);
    at << 1.0;
    CHECK(f.value(at) == 0.75);
    CHECK(f.subgradient(at)[0] == 1.0);
}

TEST_CASE("stochastic absolute loss: frequencies and minimizer") {
    CHECK_THROWS_AS(stochastic_absolute(0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(stochastic_absolute(1.0, 1), std::invalid_argument);

    Environment env = stochastic_absolute(0.6, 2024);
    REQUIRE(env.u_star().has_value());
    CHECK((*env.u_star())[0] == 0.5);
    Environment env_minus = stochastic_absolute(0.3, 2024);
    CHECK((*env_minus.u_star())[0] == -0.5);

    Vector probe(1);
    probe << 0.5;
    int plus = 0;
    const int n = 100000;
    for (int t = 0; t < n; ++t) {
        // the outcome is +1/2 exactly when the loss vanishes at +1/2
        if (env.next_loss().value(probe) == 0.0) ++plus;
    }
    const double freq = static_cast<double>(plus) / n;
    CHECK(freq == Catch::Approx(0.6).margin(0.01));
}

TEST_CASE("hinge on the sphere: geometry of the draws") {
    const Eigen::Index d = 5;
    Vector u_bar = Vector::Zero(d);
    u_bar[0] = 1.0;
    Environment env = hinge_sphere(d, u_bar, 7);
    CHECK(env.domain().shape() == Domain::Shape::ball);
    CHECK(env.domain().radius() == 1.0);
    REQUIRE(env.u_star().has_value());

    const Vector origin = Vector::Zero(d);
    double mean_margin = 0.0;
    for (int t = 0; t < 10000; ++t) {
        const LossFunction f = env.next_loss();
        // at the origin the margin is 1, so the subgradient is -y X
        CHECK(f.value(origin) == 1.0);
        const Vector g = f.subgradient(origin);
        REQUIRE(std::abs(g.norm() - 1.0) <= 1e-12);   // X lives on the unit sphere
        // y <u_bar, X> = |<u_bar, X>| >= 0 by the label rule
        const double margin = -g.dot(u_bar);          // g = -yX
        REQUIRE(margin >= 0.0);
        mean_margin += margin;
    }
    mean_margin /= 10000.0;
    CHECK(mean_margin > 0.2);  // E|X_1| is about 0.33 in dimension 5

    // value and subgradient agree at a generic point
    Environment env2 = hinge_sphere(d, u_bar, 8);
    Rng rng(9);
    for (int t = 0; t < 100; ++t) {
        const LossFunction f = env2.next_loss();
        const Vector w = sample_ball(rng, d, 1.0);
        const double v = f.value(w);
        REQUIRE(v >= 0.0);
        if (v == 0.0) {
            REQUIRE(f.subgradient(w).isZero(0.0));
        }
    }
}

TEST_CASE("hinge on the sphere rejects malformed directions") {
    CHECK_THROWS_AS(hinge_sphere(2, Vector::Zero(2), 1), std::invalid_argument);
    Vector long_dir(2);
    long_dir << 1.5, 0.0;
    CHECK_THROWS_AS(hinge_sphere(2, long_dir, 1), std::invalid_argument);
    Vector wrong_dim(3);
    wrong_dim << 1.0, 0.0, 0.0;
    CHECK_THROWS_AS(hinge_sphere(2, wrong_dim, 1), std::invalid_argument);
}

TEST_CASE("scripted environment replays its gradients and derives u_star") {
    const Domain box = Domain::box(Vector::Constant(1, -1.0), Vector::Constant(1, 1.0));
    std::vector<Vector> script;
    for (const double v : {1.0, 1.0, -0.5}) {
        Vector g(1);
        g << v;
        script.push_back(g);
    }
    Environment env = scripted(box, 1.0, script);
    REQUIRE(env.u_star().has_value());
    CHECK((*env.u_star())[0] == -1.0);  // total gradient +1.5 pushes to the lower edge

    Vector probe(1);
    probe << 0.3;
    for (const double v : {1.0, 1.0, -0.5}) {
        const LossFunction f = env.next_loss();
        CHECK(f.subgradient(probe)[0] == v);
        CHECK(f.value(probe) == Catch::Approx(v * 0.3).epsilon(1e-15));
    }
    CHECK_THROWS_AS(env.next_loss(), std::out_of_range);

    // ball domain: u_star is the boundary point against the summed script
    const Domain ball = Domain::ball(2.0, 1);
    Environment env_ball = scripted(ball, 1.0, script);
    CHECK((*env_ball.u_star())[0] == Catch::Approx(-2.0).epsilon(1e-15));

    std::vector<Vector> too_big;
    Vector big(1);
    big << 1.5;
    too_big.push_back(big);
    CHECK_THROWS_AS(scripted(box, 1.0, too_big), std::invalid_argument);
    CHECK_THROWS_AS(scripted(box, 1.0, {}), std::invalid_argument);
}

TEST_CASE("scripted_random draws gradients inside the unit ball") {
    Environment env = scripted_random(3, 200, 5);
    CHECK(env.name() == "scripted_random");
    Vector probe = Vector::Zero(3);
    for (int t = 0; t < 200; ++t) {
        const Vector g = env.next_loss().subgradient(probe);
        REQUIRE(g.norm() <= 1.0 + 1e-12);
    }
}

TEST_CASE("equal seeds give bitwise-identical streams, reset rewinds") {
    Environment a = stochastic_absolute(0.6, 7);
    Environment b = stochastic_absolute(0.6, 7);
    Vector probe(1);
    probe << 0.1;
    std::vector<double> first;
    for (int t = 0; t < 1000; ++t) {
        const double va = a.next_loss().value(probe);
        const double vb = b.next_loss().value(probe);
        REQUIRE(va == vb);
        first.push_back(va);
    }
    a.reset();
    for (int t = 0; t < 1000; ++t) {
        REQUIRE(a.next_loss().value(probe) == first[static_cast<std::size_t>(t)]);
    }

    Environment c = scripted_random(2, 50, 1);
    Environment d_env = scripted_random(2, 50, 2);
    Vector origin = Vector::Zero(2);
    bool any_different = false;
    for (int t = 0; t < 50; ++t) {
        const Vector gc = c.next_loss().subgradient(origin);
        const Vector gd = d_env.next_loss().subgradient(origin);
        if ((gc.array() != gd.array()).any()) any_different = true;
    }
    CHECK(any_different);
}

TEST_CASE("every bundled loss passes the sampled convexity check") {
    Rng rng(123);
    Environment fixed = fixed_absolute(0);
    Environment stoch = stochastic_absolute(0.6, 1);
    Vector e1 = Vector::Zero(3);
    e1[0] = 1.0;
    Environment hinge = hinge_sphere(3, e1, 2);
    Environment script = scripted_random(2, 10, 3);
    for (int k = 0; k < 5; ++k) {
        REQUIRE(sampled_convexity_check(fixed.next_loss(), fixed.domain(), 100, rng));
        REQUIRE(sampled_convexity_check(stoch.next_loss(), stoch.domain(), 100, rng));
        REQUIRE(sampled_convexity_check(hinge.next_loss(), hinge.domain(), 100, rng));
        REQUIRE(sampled_convexity_check(script.next_loss(), script.domain(), 100, rng));
    }
}

TEST_CASE("environment validates u_star membership") {
    Vector lo(1), hi(1), outside(1);
    lo << -1.0;
    hi << 1.0;
    outside << 2.0;
    CHECK_THROWS_AS(Environment("bad", Domain::box(lo, hi), 1.0, outside,
                                RngSpec{"splitmix64", 0},
                                [](std::uint64_t, Rng&) { return LossFunction{}; }),
                    std::invalid_argument);
}

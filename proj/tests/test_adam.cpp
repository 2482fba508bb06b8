#include <catch2/catch_amalgamated.hpp>

#include "gcad/adam.hpp"
#include "gcad/core.hpp"

using namespace gcad;

TEST_CASE("zero gradients leave parameters unchanged", "[adam]") {
    Tensor w = Tensor::from_rows({{1.0, -2.0}, {0.5, 3.0}});
    Tensor orig = w;
    Tensor g(2, 2, 0.0);
    Adam opt;
    for (int i = 0; i < 25; ++i) opt.step({&w}, {&g}, {"w"});
    CHECK(w == orig);
}

TEST_CASE("one step moves against the gradient sign", "[adam]") {
    Tensor w = Tensor::from_rows({{1.0, -1.0}});
    Tensor g = Tensor::from_rows({{0.7, -0.3}});
    Adam opt;
    opt.step({&w}, {&g}, {"w"});
    CHECK(w(0, 0) < 1.0);
    CHECK(w(0, 1) > -1.0);
}

TEST_CASE("converges on a quadratic and matches the scalar recurrence", "[adam]") {
    // Independent oracle: the same recurrence written directly on scalars.
    double m = 0.0, v = 0.0, w_ref = 0.0;
    const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int t = 1; t <= 200; ++t) {
        double g = 2.0 * (w_ref - 3.0);
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        double mhat = m / (1 - std::pow(b1, t));
        double vhat = v / (1 - std::pow(b2, t));
        w_ref -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    REQUIRE(std::fabs(w_ref - 3.0) < 0.05);  // oracle sanity

    Tensor w(1, 1, 0.0);
    Adam opt({.lr = 0.05});
    for (int t = 1; t <= 200; ++t) {
        Tensor g(1, 1, 2.0 * (w(0, 0) - 3.0));
        opt.step({&w}, {&g}, {"w"});
    }
    CHECK(std::fabs(w(0, 0) - 3.0) < 0.05);
    CHECK(w(0, 0) == Catch::Approx(w_ref).margin(1e-12));
}

TEST_CASE("non-finite gradient names the parameter", "[adam]") {
    Tensor w(1, 1, 0.0);
    Tensor g(1, 1, std::nan(""));
    Adam opt;
    try {
        opt.step({&w}, {&g}, {"layer0.link_w1"});
        FAIL("expected error");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("layer0.link_w1") != std::string::npos);
    }
}

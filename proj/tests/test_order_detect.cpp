#include "eqf/core.hpp"
#include "eqf/order_detect.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace eqf;
using namespace eqf::order;
using doctest::Approx;

namespace {

BlackBoxFunction box(int arity, std::function<double(std::span<const double>)> f) {
    BlackBoxFunction b;
    b.arity = arity;
    b.evaluator = std::move(f);
    return b;
}

} // namespace

TEST_SUITE("order_detect") {

TEST_CASE("coordinate variance of simple functions") {
    long long used = 0;
    const ProbeSpec probe;
    const auto sq = box(3, [](auto x) { return x[0] * x[0]; });
    CHECK(coordinate_variance(sq, 2, probe, used).value == 0.0);
    const auto lin = box(2, [](auto x) { return x[0] + 3 * x[1]; });
    const auto v = coordinate_variance(lin, 2, probe, used);
    CHECK(v.value == Approx(9 * oracle::uniform_variance(-1, 1)).epsilon(0.1));
    const auto c = box(4, [](auto) { return 2.0; });
    for (int j = 1; j <= 4; ++j) CHECK(coordinate_variance(c, j, probe, used).value == 0.0);
    CHECK(used == 6 * probe.n_base * probe.n_perturb);
    CHECK_THROWS_AS(coordinate_variance(c, 5, probe, used), Error);
    CHECK_THROWS_AS(coordinate_variance(c, 0, probe, used), Error);
}

TEST_CASE("linear boxes: per-index variance equals c_j^2 w^2 / 12") {
    const double cs[] = {0.5, -2.0, 0.0, 4.0};
    const auto f = box(4, [&](auto x) { return cs[0] * x[0] + cs[1] * x[1] + cs[2] * x[2] + cs[3] * x[3]; });
    ProbeSpec probe;
    probe.n_perturb = 1000;
    probe.lo = -3;
    probe.hi = 1;
    const auto r = detect_order(f, probe);
    for (int j = 0; j < 4; ++j) {
        const double expect = cs[j] * cs[j] * oracle::uniform_variance(-3, 1);
        if (expect == 0.0)
            CHECK(r.per_index_variance[j] == 0.0);
        else
            CHECK(r.per_index_variance[j] == Approx(expect).epsilon(0.05));
    }
    CHECK(r.detected_order == 4);
}

TEST_CASE("detect_order on small examples") {
    CHECK(detect_order(box(2, [](auto x) { return x[0] * 0.0 + x[1]; }), {}).detected_order == 2);
    const auto c = detect_order(box(6, [](auto) { return 1.0; }), {});
    CHECK(c.detected_order == 0);
    CHECK(c.stopped_early);
    CHECK(c.stop_index == 5);
}

TEST_CASE("the adversarial box hides its far dependence") {
    const auto f = box(100, [](auto x) { return x[0] + x[99]; });
    const auto r = detect_order(f, {}, {std::nullopt, 5});
    CHECK(r.detected_order == 1);
    CHECK(r.stopped_early);
    CHECK(r.stop_index == 6);
    CHECK(std::isnan(r.per_index_variance[99]));
    // an exhaustive scan does find it
    const auto full = detect_order(f, {}, {std::nullopt, 100});
    CHECK(full.detected_order == 100);
    CHECK_FALSE(full.stopped_early);
}

TEST_CASE("budget exhaustion is reported with partial data") {
    auto f = box(10, [](auto x) { return x[0] + x[5]; });
    f.evaluation_budget = 3 * 16 * 256 + 10;
    const auto r = detect_order(f, {}, {std::nullopt, 10});
    CHECK(r.budget_exhausted);
    CHECK(r.budget_used == f.evaluation_budget);
    CHECK(r.detected_order == 1);
}

TEST_CASE("threshold validation and explicit threshold") {
    const auto f = box(3, [](auto x) { return x[0] + 1e-3 * x[2]; });
    CHECK_THROWS_AS(detect_order(f, {}, {0.0, 5}), Error);
    CHECK(detect_order(f, {}, {1e-4, 5}).detected_order == 1);
    CHECK(detect_order(f, {}, {1e-8, 5}).detected_order == 3);
}

TEST_CASE("results do not depend on the order probes were generated") {
    const auto f = box(5, [](auto x) { return std::sin(x[0]) * x[2]; });
    const auto a = detect_order(f, {8, 64, -1, 1, 99});
    const auto b = detect_order(f, {8, 64, -1, 1, 99});
    CHECK(a.per_index_variance == b.per_index_variance);
    CHECK(a.detected_order == 3);
}

TEST_CASE("derivative black boxes report the operator order") {
    DerivativeProbeConfig cfg;
    cfg.d_max = 4;
    const auto heat = derivative_blackbox(PdeSpec::heat(), cfg);
    CHECK(heat.first_index == 0);
    CHECK(detect_order(heat, {}).detected_order == 2);

    cfg.d_max = 2;
    const auto adv = derivative_blackbox(PdeSpec::advection(), cfg);
    const double a[] = {0.3, -0.7, 1.1};
    CHECK(adv.evaluator(a) == Approx(0.7 + 0.5 * 1e-3 * 1.1).epsilon(1e-9));
    const auto ra = detect_order(adv, {});
    CHECK(ra.detected_order == 1);
    CHECK(ra.per_index_variance[1] / ra.per_index_variance[2] >= std::pow(2.0 / cfg.dt_micro, 2) * 0.5);

    cfg.d_max = 4;
    const auto bi4 = derivative_blackbox(PdeSpec::biharmonic(), cfg);
    const double d[] = {0.3, -0.7, 1.1, 0.2, -0.4};
    CHECK(bi4.evaluator(d) == Approx(0.4).epsilon(1e-9));
    CHECK(detect_order(bi4, {}).detected_order == 4);

    cfg.d_max = 2;
    const auto bi2 = derivative_blackbox(PdeSpec::biharmonic(), cfg);
    const auto r2 = detect_order(bi2, {});
    CHECK(r2.detected_order == 0);
    for (int j = 0; j < 3; ++j) CHECK(r2.per_index_variance[j] == 0.0);
}

TEST_CASE("heat black box equals D2 plus the quartic correction") {
    DerivativeProbeConfig cfg;
    cfg.d_max = 4;
    const auto heat = derivative_blackbox(PdeSpec::heat(), cfg);
    const double d[] = {0.3, -0.7, 1.1, 0.2, -0.4};
    // exp(dt d2) on a quartic: D0 += dt D2 + dt^2/2 D4, D2 += dt D4; average adds h^2/24 D2
    const double dt = cfg.dt_micro, h = cfg.h;
    const double expect = 1.1 + 0.5 * dt * -0.4 + h * h / 24.0 * -0.4;
    CHECK(heat.evaluator(d) == Approx(expect).epsilon(1e-9));
}

TEST_CASE("buffered FD black box agrees with the exact one") {
    DerivativeProbeConfig cfg;
    cfg.d_max = 2;
    cfg.H = 0.1 + 12 * std::sqrt(cfg.dt_micro) + 0.1;
    cfg.grid = {2e-3, 0.9 * 0.4 * 4e-6};
    const auto fd = derivative_blackbox(PdeSpec::heat(), cfg);
    cfg.H.reset();
    const auto ex = derivative_blackbox(PdeSpec::heat(), cfg);
    const double d[] = {0.2, 0.5, -1.3};
    CHECK(fd.evaluator(d) == Approx(ex.evaluator(d)).epsilon(1e-3));
}

}

#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "hazesep/score.hpp"
#include "hazesep/sde.hpp"

using namespace hazesep;
using namespace hazesep::sde;

TEST_CASE("schedule defaults and validation") {
    const SdeSchedule s;
    CHECK(s.sigma == 25.0);
    CHECK(s.steps == 200);
    CHECK(s.tau == 0.8);
    CHECK(s.start_step() == 160);
    CHECK(s.dt() == 0.005);
    CHECK_THROWS(SdeSchedule{1.0, 200, 0.8}.validate());
    CHECK_THROWS(SdeSchedule{25.0, 0, 0.8}.validate());
    CHECK_THROWS(SdeSchedule{25.0, 200, 0.0}.validate());
    CHECK_THROWS(SdeSchedule{25.0, 200, 1.5}.validate());
}

TEST_CASE("kernel_std closed forms") {
    const SdeSchedule s;
    CHECK(kernel_std(s, 0.0) == 0.0);
    CHECK(kernel_std(s, 1.0) == doctest::Approx(9.8453).epsilon(1e-4));
    CHECK(kernel_std(s, 0.5) == doctest::Approx(1.9310).epsilon(1e-4));
    const double direct = std::sqrt((std::pow(25.0, 1.6) - 1.0) / (2.0 * std::log(25.0)));
    CHECK(kernel_std(s, 0.8) == doctest::Approx(direct).epsilon(1e-12));
    CHECK(std::abs(kernel_std(s, 0.8) - 5.161) < 1e-3);
    CHECK_THROWS_AS(kernel_std(s, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(kernel_std(s, 1.1), std::invalid_argument);
}

TEST_CASE("beta is zero at the origin and strictly increasing") {
    const SdeSchedule s;
    CHECK(s.beta(0.0) == 0.0);
    double prev = s.beta(0.0);
    bool increasing = true;
    for (int i = 1; i <= 1000; ++i) {
        const double b = s.beta(i / 1000.0);
        increasing = increasing && b > prev;
        prev = b;
    }
    CHECK(increasing);
    // d beta / dt = g(t)^2 for the VE family.
    const double t = 0.37, h = 1e-6;
    CHECK((s.beta(t + h) - s.beta(t - h)) / (2 * h) ==
          doctest::Approx(s.diffusion(t) * s.diffusion(t)).epsilon(1e-7));
}

TEST_CASE("forward_perturb") {
    const SdeSchedule s;
    SeededRng rng(1);
    const RFGrid x0 = gaussian_grid(rng, 3, 3);
    CHECK(forward_perturb(x0, 0.0, s, rng) == x0);

    const RFGrid zeros(250, 400);
    const RFGrid xt = forward_perturb(zeros, 1.0, s, rng);
    const double var = grid_sum_squares(xt) / static_cast<double>(xt.size());
    CHECK(var >= 0.97 * s.beta(1.0));
    CHECK(var <= 1.03 * s.beta(1.0));

    RFGrid mean(4, 4);
    const RFGrid base(4, 4, 0.3);
    for (int i = 0; i < 1000; ++i) mean = grid_add(mean, forward_perturb(base, 0.5, s, rng));
    mean = grid_scale(mean, 1e-3);
    const double tol = 3.0 * kernel_std(s, 0.5) / std::sqrt(1000.0);
    CHECK(max_abs_diff(mean, base) < tol);
}

TEST_CASE("reverse_step with injected noise") {
    const SdeSchedule s;
    const RFGrid x = RFGrid::from_rows({{0.5, -0.25}});
    DiffusionState st{x, 1.0};
    const auto next = reverse_step_with_noise(st, RFGrid(1, 2), s, RFGrid(1, 2));
    CHECK(next.x == x);
    CHECK(next.t == doctest::Approx(0.995).epsilon(1e-15));

    const RFGrid score = RFGrid::from_rows({{1.0, -2.0}});
    const auto moved = reverse_step_with_noise(st, score, s, RFGrid(1, 2));
    CHECK(moved.x(0, 0) - x(0, 0) == doctest::Approx(3.125 * 1.0).epsilon(1e-12));
    CHECK(moved.x(0, 1) - x(0, 1) == doctest::Approx(3.125 * -2.0).epsilon(1e-12));

    const RFGrid z = RFGrid::from_rows({{1.0, 0.0}});
    const auto noisy = reverse_step_with_noise(st, RFGrid(1, 2), s, z);
    CHECK(noisy.x(0, 0) - x(0, 0) == doctest::Approx(25.0 * std::sqrt(0.005)).epsilon(1e-12));

    // The step landing on t = 0 drops the noise term.
    DiffusionState last{x, s.dt()};
    const auto end = reverse_step_with_noise(last, RFGrid(1, 2), s, z);
    CHECK(end.x == x);
    CHECK(end.t == 0.0);

    CHECK_THROWS_AS(reverse_step_with_noise(st, RFGrid(2, 1), s, RFGrid(1, 2)),
                    std::invalid_argument);
    CHECK_THROWS(reverse_step_with_noise(DiffusionState{x, 0.0}, RFGrid(1, 2), s, RFGrid(1, 2)));
}

TEST_CASE("dsm_target identities") {
    const SdeSchedule s;
    SeededRng rng(3);
    const RFGrid x0 = gaussian_grid(rng, 5, 5);
    CHECK(grid_max_abs(dsm_target(x0, x0, 0.4, s)) == 0.0);
    const RFGrid z = gaussian_grid(rng, 5, 5);
    const double sd = kernel_std(s, 0.4);
    const RFGrid xt = grid_axpy(x0, sd, z);
    CHECK(max_abs_diff(dsm_target(x0, xt, 0.4, s), grid_scale(z, -1.0 / sd)) < 1e-12);
    CHECK_THROWS_AS(dsm_target(x0, xt, 0.0, s), std::invalid_argument);

    // Finite difference of log N(xt; x0, beta I) with respect to one entry.
    const double b = s.beta(0.4);
    auto logp = [&](double v) { return -0.5 * (v - x0(2, 3)) * (v - x0(2, 3)) / b; };
    const double h = 1e-5;
    const double fd = (logp(xt(2, 3) + h) - logp(xt(2, 3) - h)) / (2 * h);
    CHECK(std::abs(dsm_target(x0, xt, 0.4, s)(2, 3) / fd - 1.0) < 1e-5);
}

TEST_CASE("unconditional sampling with the analytic N(0,1) score") {
    const SdeSchedule s;
    SeededRng rng(2024);
    const AnalyticGaussianScore prior(0.0, 1.0, s);
    const RFGrid samples = sample_unconditional(
        [&](const RFGrid& x, double t) { return prior.evaluate(x, t); }, 1, 2000, s, rng);
    const double mean = grid_mean(samples);
    double var = 0.0;
    for (double v : samples.values()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(samples.size() - 1);
    CHECK(std::abs(mean) < 0.07);
    CHECK(var > 0.9);
    CHECK(var < 1.1);
}

TEST_CASE("unconditional sampling with a shifted Gaussian prior") {
    const SdeSchedule s;
    SeededRng rng(77);
    const double m = 1.5, v = 0.6;
    const AnalyticGaussianScore prior(m, v, s);
    const RFGrid samples = sample_unconditional(
        [&](const RFGrid& x, double t) { return prior.evaluate(x, t); }, 1, 2000, s, rng);
    const double mean = grid_mean(samples);
    double var = 0.0;
    for (double x : samples.values()) var += (x - mean) * (x - mean);
    var /= static_cast<double>(samples.size() - 1);
    CHECK(std::abs(mean - m) < std::abs(m) * 0.05 + 0.05);
    CHECK(std::abs(var - v) < 0.15 * v);
}

#include <gtest/gtest.h>

#include <cmath>

#include "ddim/diffusion.hpp"
#include "ddim/rng.hpp"
#include "oracles.hpp"

using namespace ddim;

namespace {

Tensor<double> scalar(double v) { return Tensor<double>(Shape{1}, v); }

// t at which the squared signal rate equals alpha_bar.
double time_for_alpha_bar(const DiffusionSchedule& s, double alpha_bar) {
    const double angle = std::acos(std::sqrt(alpha_bar));
    return (angle - s.start_angle()) / (s.end_angle() - s.start_angle());
}

}  // namespace

TEST(Noisify, NoiseFreeAndSignalFreeCases) {
    std::mt19937_64 gen(1);
    const DiffusionSchedule s;
    const auto x0 = oracle::random_tensor<double>({3, 4, 1}, gen);
    const auto zero = Tensor<double>(x0.shape());
    const auto a = noisify(x0, zero, 0.3, s);
    const auto b = noisify(zero, x0, 0.3, s);
    for (std::size_t i = 0; i < x0.size(); ++i) {
        EXPECT_DOUBLE_EQ(a.x_t[i], s.rates(0.3).signal * x0[i]);
        EXPECT_DOUBLE_EQ(b.x_t[i], s.rates(0.3).noise * x0[i]);
    }
}

TEST(Noisify, ScalarAtStart) {
    const auto p = noisify(scalar(1), scalar(1), 0.0, DiffusionSchedule());
    EXPECT_NEAR(p.x_t[0], 1.26225, 5e-5);
    EXPECT_EQ(p.t, 0.0);
    EXPECT_DOUBLE_EQ(p.signal_rate, 0.95);
}

TEST(Noisify, ShapeMismatchRejected) {
    EXPECT_THROW(noisify(Tensor<float>(Shape{2, 2, 1}), Tensor<float>(Shape{2, 3, 1}), 0.5, DiffusionSchedule()),
                 ShapeError);
}

TEST(Noisify, ExactInversion) {
    std::mt19937_64 gen(2);
    const DiffusionSchedule s;
    for (double t : {0.0, 0.25, 0.5, 0.9, 1.0}) {
        const auto x0 = oracle::random_tensor<float>({4, 8, 1}, gen, -2, 2);
        const auto eps = oracle::random_tensor<float>({4, 8, 1}, gen, -2, 2);
        const auto p = noisify(x0, eps, t, s);
        const float sr = static_cast<float>(p.signal_rate), nr = static_cast<float>(p.noise_rate);
        for (std::size_t i = 0; i < x0.size(); ++i) EXPECT_NEAR((p.x_t[i] - nr * eps[i]) / sr, x0[i], 1e-5) << t;
    }
}

TEST(SingleStep, Examples) {
    EXPECT_DOUBLE_EQ(single_step(scalar(0), scalar(1), 0.25)[0], 0.5);
    EXPECT_LT(std::abs(single_step(scalar(0.7), scalar(1), 1e-12)[0] - 0.7), 1e-6);
    EXPECT_THROW(single_step(scalar(0), scalar(1), 0.0), std::invalid_argument);
    EXPECT_THROW(single_step(scalar(0), scalar(1), 1.0), std::invalid_argument);
}

TEST(SingleStep, VariancePreservedStatistically) {
    Rng rng(3, "test");
    const std::size_t n = 1000000;
    Tensor<double> x(Shape{n}), e(Shape{n});
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.normal();
        e[i] = rng.normal();
    }
    const auto y = single_step(x, e, 0.3);
    double mean = 0, sq = 0;
    for (double v : y.values()) mean += v;
    mean /= n;
    for (double v : y.values()) sq += (v - mean) * (v - mean);
    EXPECT_NEAR(sq / (n - 1), 1.0, 0.01);
}

TEST(CoefficientIdentity, RandomAlphas) {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(1e-6, 1 - 1e-6);
    for (int i = 0; i < 10000; ++i) {
        const double a = u(gen), b = u(gen);
        EXPECT_NEAR(a * (1 - b) + (1 - a), 1 - a * b, 1e-12);
    }
}

TEST(CollinearPoint, ZeroSigmaIsBitIdenticalToNoisify) {
    std::mt19937_64 gen(5);
    const DiffusionSchedule s;
    for (double t : {0.0, 0.1, 0.5, 0.77, 1.0}) {
        const auto x0 = oracle::random_tensor<float>({4, 6, 1}, gen);
        const auto e1 = oracle::random_tensor<float>({4, 6, 1}, gen);
        const auto e2 = oracle::random_tensor<float>({4, 6, 1}, gen);
        EXPECT_EQ(collinear_point(x0, e1, e2, t, 0.0, s), noisify(x0, e1, t, s).x_t);
    }
}

TEST(CollinearPoint, SigmaAtBoundDropsSharedNoise) {
    std::mt19937_64 gen(6);
    const DiffusionSchedule s;
    const double t = 0.4;
    const auto r = s.rates(t);
    const auto x0 = oracle::random_tensor<double>({3, 3, 1}, gen);
    const auto e1 = oracle::random_tensor<double>({3, 3, 1}, gen);
    const auto e2 = oracle::random_tensor<double>({3, 3, 1}, gen);
    const auto y = collinear_point(x0, e1, e2, t, r.noise, s);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], r.signal * x0[i] + r.noise * e2[i], 1e-12);
}

TEST(CollinearPoint, RadicalHandExample) {
    const DiffusionSchedule s;
    const double t = time_for_alpha_bar(s, 0.75);
    const auto y = collinear_point(scalar(0), scalar(1), scalar(0), t, 0.3, s);
    EXPECT_NEAR(y[0], 0.4, 1e-9);
}

TEST(CollinearPoint, SigmaAboveBoundNamesBound) {
    const DiffusionSchedule s;
    try {
        collinear_point(scalar(0), scalar(1), scalar(0), 0.0, 0.5, s);
        FAIL() << "expected an error";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("0.312"), std::string::npos) << e.what();
    }
}

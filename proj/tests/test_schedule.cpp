#include <gtest/gtest.h>

#include <cmath>

#include "ddim/schedule.hpp"

using namespace ddim;

TEST(Schedule, EndpointRates) {
    const DiffusionSchedule s;
    EXPECT_NEAR(s.rates(0).signal, 0.95, 5e-5);
    EXPECT_NEAR(s.rates(0).noise, 0.31225, 5e-5);
    EXPECT_NEAR(s.rates(1).signal, 0.02, 5e-5);
    EXPECT_NEAR(s.rates(1).noise, 0.99980, 5e-5);
}

TEST(Schedule, MidpointFromHandEvaluatedAngles) {
    // arccos(0.95) = 0.31756, arccos(0.02) = 1.55080
    const double angle = 0.5 * (0.31756 + 1.55080);
    const auto r = DiffusionSchedule().rates(0.5);
    EXPECT_NEAR(r.signal, std::cos(angle), 1e-4);
    EXPECT_NEAR(r.noise, std::sin(angle), 1e-4);
    EXPECT_NEAR(r.signal, 0.5945, 1e-4);
    EXPECT_NEAR(r.noise, 0.8041, 1e-4);
}

TEST(Schedule, VarianceEndpoints) {
    const DiffusionSchedule s;
    EXPECT_NEAR(s.variance(0), 1 - 0.95 * 0.95, 1e-12);
    EXPECT_NEAR(s.variance(0), 0.0975, 1e-12);
    EXPECT_NEAR(s.variance(1), 0.9998 * 0.9998, 1e-6);
}

TEST(Schedule, UnitCircleOnDenseGrid) {
    const DiffusionSchedule s;
    const int n = 100000;
    double worst = 0;
    float worst32 = 0;
    for (int i = 0; i <= n; ++i) {
        const double t = static_cast<double>(i) / n;
        const auto r = s.rates(t);
        worst = std::max(worst, std::abs(r.signal * r.signal + r.noise * r.noise - 1.0));
        worst = std::max(worst, std::abs(s.variance(t) + r.signal * r.signal - 1.0));
        const float sf = static_cast<float>(r.signal), nf = static_cast<float>(r.noise);
        worst32 = std::max(worst32, std::abs(sf * sf + nf * nf - 1.0f));
    }
    EXPECT_LE(worst, 1e-12);
    EXPECT_LE(worst32, 1e-6f);
}

TEST(Schedule, MonotoneRates) {
    const DiffusionSchedule s;
    auto prev = s.rates(0);
    for (int i = 1; i <= 1000; ++i) {
        const auto r = s.rates(i / 1000.0);
        EXPECT_LT(r.signal, prev.signal);
        EXPECT_GT(r.noise, prev.noise);
        prev = r;
    }
}

TEST(Schedule, TimeOutsideUnitIntervalRejected) {
    const DiffusionSchedule s;
    EXPECT_THROW(s.rates(-1e-9), std::out_of_range);
    EXPECT_THROW(s.rates(1.0 + 1e-9), std::out_of_range);
    EXPECT_THROW(s.variance(2.0), std::out_of_range);
}

TEST(Schedule, InvalidRatesRejected) {
    EXPECT_THROW(DiffusionSchedule(0.5, 0.6), std::invalid_argument);
    EXPECT_THROW(DiffusionSchedule(1.1, 0.02), std::invalid_argument);
    EXPECT_THROW(DiffusionSchedule(0.95, 0.0), std::invalid_argument);
}

TEST(Schedule, AnglesOrdered) {
    const DiffusionSchedule s;
    EXPECT_LT(s.start_angle(), s.end_angle());
    EXPECT_GE(s.start_angle(), 0.0);
    EXPECT_LE(s.end_angle(), M_PI / 2);
}

#include "ddim/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ddim {

DiffusionSchedule::DiffusionSchedule(double max_signal_rate, double min_signal_rate)
    : max_signal_rate_(max_signal_rate), min_signal_rate_(min_signal_rate) {
    if (!(min_signal_rate > 0.0 && min_signal_rate < max_signal_rate && max_signal_rate <= 1.0)) {
        throw std::invalid_argument("schedule requires 0 < min_signal_rate < max_signal_rate <= 1, got min=" +
                                    std::to_string(min_signal_rate) + " max=" + std::to_string(max_signal_rate));
    }
    start_angle_ = std::acos(max_signal_rate);
    end_angle_ = std::acos(min_signal_rate);
}

Rates DiffusionSchedule::rates(double t) const {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::out_of_range("diffusion time must lie in [0,1], got " + std::to_string(t));
    }
    const double angle = start_angle_ + t * (end_angle_ - start_angle_);
    return {std::cos(angle), std::sin(angle)};
}

double DiffusionSchedule::variance(double t) const {
    const double n = rates(t).noise;
    return n * n;
}

}  // namespace ddim

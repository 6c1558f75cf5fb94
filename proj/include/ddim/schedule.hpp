#pragma once

namespace ddim {

struct Rates {
    double signal;  // sqrt(alpha_bar)
    double noise;   // sqrt(1 - alpha_bar)
};

// Offset cosine schedule over continuous diffusion time t in [0,1]. The
// angle moves linearly from arccos(max_signal_rate) to arccos(min_signal_rate),
// so signal^2 + noise^2 = 1 at every t.
class DiffusionSchedule {
public:
    static constexpr double kDefaultMaxSignalRate = 0.95;
    static constexpr double kDefaultMinSignalRate = 0.02;

    DiffusionSchedule() : DiffusionSchedule(kDefaultMaxSignalRate, kDefaultMinSignalRate) {}
    DiffusionSchedule(double max_signal_rate, double min_signal_rate);

    double max_signal_rate() const { return max_signal_rate_; }
    double min_signal_rate() const { return min_signal_rate_; }
    double start_angle() const { return start_angle_; }
    double end_angle() const { return end_angle_; }

    Rates rates(double t) const;
    // 1 - alpha_bar(t), the squared noise rate.
    double variance(double t) const;

    bool operator==(const DiffusionSchedule&) const = default;

private:
    double max_signal_rate_;
    double min_signal_rate_;
    double start_angle_;
    double end_angle_;
};

}  // namespace ddim

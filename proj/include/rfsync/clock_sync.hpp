#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>

#include "rfsync/rng.hpp"
#include "rfsync/units.hpp"

namespace rfsync {

/// Free-running node counter. local(t) = (1 + skew*1e-6) * t + offset.
class HardwareClock {
public:
    HardwareClock() = default;
    HardwareClock(double skew_ppm, SimTime tick, SimTime offset = 0)
        : skew_ppm_(skew_ppm), tick_(tick), offset_(offset) {
        if (tick_ <= 0) throw std::invalid_argument("clock tick must be positive");
        if (!(skew_ppm_ > -1e6)) throw std::invalid_argument("clock skew must be > -1e6 ppm");
    }

    double skew_ppm() const { return skew_ppm_; }
    SimTime tick() const { return tick_; }
    double rate() const { return 1.0 + skew_ppm_ * 1e-6; }

    /// Local time in picoseconds (not quantized).
    long double local_ps(SimTime t) const {
        return static_cast<long double>(t) * static_cast<long double>(rate()) + offset_;
    }

    /// Counter value latched at true time t.
    std::int64_t ticks_at(SimTime t) const {
        return static_cast<std::int64_t>(std::floor(local_ps(t) / tick_));
    }

    /// True instant at which the counter reaches `ticks`.
    SimTime time_of_tick(std::int64_t ticks) const {
        const long double local = static_cast<long double>(ticks) * tick_ - offset_;
        return static_cast<SimTime>(std::ceil(local / static_cast<long double>(rate())));
    }

    /// First counter edge at or after t.
    SimTime next_edge(SimTime t) const {
        std::int64_t k = ticks_at(t);
        SimTime edge = time_of_tick(k);
        while (edge < t || ticks_at(edge) < k) edge = time_of_tick(++k);
        return edge;
    }

    /// A tick count converted to seconds with the rate known to the sync
    /// scheme removed.
    double elapsed_seconds(std::int64_t ticks) const {
        return static_cast<double>(ticks) * seconds_from_ps(tick_) / rate();
    }

private:
    double skew_ppm_ = 0.0;
    SimTime tick_ = 42'000;
    SimTime offset_ = 0;
};

/// First-order lowpass on the compensation term:
///   applied(0) = c(0),  applied(k) = a * applied(k-1) + (1 - a) * c(k).
class CompensationFilter {
public:
    explicit CompensationFilter(double pole = 0.75) : pole_(pole) {
        if (!(pole >= 0.0 && pole < 1.0)) throw std::invalid_argument("filter pole must be in [0, 1)");
    }

    double update(double c_k) {
        applied_ = applied_ ? pole_ * *applied_ + (1.0 - pole_) * c_k : c_k;
        ++count_;
        return *applied_;
    }

    bool initialized() const { return applied_.has_value(); }
    double applied() const { return applied_.value_or(0.0); }
    double pole() const { return pole_; }
    std::size_t samples() const { return count_; }

private:
    double pole_;
    std::optional<double> applied_;
    std::size_t count_ = 0;
};

/// Abstract flooding sync scheme: after skew compensation it leaves a
/// zero-mean residual error per period on top of the flood timing offset.
struct SyncSchemeModel {
    double period_s = 60.0;
    double residual_std_s = 150e-9;

    double draw_residual(Rng& rng) const { return rng.normal(0.0, residual_std_s); }
};

/// Corrected clock of a node, expressed against true time.
///
///   virtual(t) = t - lateness(t) + correction(t)
///
/// lateness(t) is what the sync scheme leaves uncorrected, moved linearly
/// to each new value across one period so the scheme itself stays
/// monotonic. correction(t) is the delay compensation: an exponential
/// ramp toward the latest target, whose time constant gives 99%
/// convergence in one period unless the slope floor forces a slower one.
class VirtualClock {
public:
    explicit VirtualClock(double slope_floor = 0.5) : slope_floor_(slope_floor) {
        if (!(slope_floor >= 0.0 && slope_floor < 1.0))
            throw std::invalid_argument("slope floor must be in [0, 1)");
    }

    /// Sync scheme update at t: lateness reaches `lateness_s` at t + period.
    void sync(SimTime t, double lateness_s, SimTime period) {
        const double now = lateness(t);
        seg_t0_ = t;
        seg_v0_ = now;
        seg_t1_ = t + std::max<SimTime>(period, 1);
        seg_v1_ = lateness_s;
        synced_ = true;
    }

    bool synced() const { return synced_; }

    double lateness(SimTime t) const {
        if (!synced_) return 0.0;
        if (t >= seg_t1_) return seg_v1_;
        if (t <= seg_t0_) return seg_v0_;
        const double f = static_cast<double>(t - seg_t0_) / static_cast<double>(seg_t1_ - seg_t0_);
        return seg_v0_ + (seg_v1_ - seg_v0_) * f;
    }

    /// d(t - lateness)/dt: the slope the sync scheme alone would give.
    double predicted_slope(SimTime t) const {
        if (!synced_ || t < seg_t0_ || t >= seg_t1_) return 1.0;
        return 1.0 - (seg_v1_ - seg_v0_) / seconds_from_ps(seg_t1_ - seg_t0_);
    }

    double correction(SimTime t) const {
        if (!ramping_) return ramp_start_value_;
        if (t <= ramp_t0_) return ramp_start_value_;
        const double dt = seconds_from_ps(t - ramp_t0_);
        return ramp_target_ + (ramp_start_value_ - ramp_target_) * std::exp(-dt / ramp_tau_);
    }

    double correction_slope(SimTime t) const {
        if (!ramping_ || t < ramp_t0_) return 0.0;
        const double dt = seconds_from_ps(t - ramp_t0_);
        return (ramp_target_ - ramp_start_value_) / ramp_tau_ * std::exp(-dt / ramp_tau_);
    }

    /// Start a ramp at t from the present correction toward `target_s`.
    /// Returns true when the time constant had to be stretched to respect
    /// the slope floor.
    bool apply_correction(SimTime t, double target_s, double period_s) {
        if (!(period_s > 0)) throw std::invalid_argument("apply_correction: period must be > 0");
        const double start = correction(t);
        double tau = period_s / std::log(100.0);
        bool clamped = false;
        const double drop = start - target_s;
        if (drop > 0) {
            // steepest descent is at the ramp start: drop / tau
            const double budget = (1.0 - slope_floor_) * predicted_slope(t);
            const double tau_min = budget > 0 ? drop / budget : std::numeric_limits<double>::infinity();
            if (tau < tau_min) {
                // small margin so picosecond rounding cannot dip under the floor
                tau = tau_min * 1.001;
                clamped = true;
                ++clamp_count_;
            }
        }
        ramp_t0_ = t;
        ramp_start_value_ = start;
        ramp_target_ = target_s;
        ramp_tau_ = tau;
        ramping_ = true;
        return clamped;
    }

    /// Discrete pole equivalent of the current ramp at the given step.
    double ramp_pole(SimTime step) const {
        return ramping_ ? std::exp(-seconds_from_ps(step) / ramp_tau_) : 0.0;
    }
    double ramp_time_constant() const { return ramp_tau_; }
    double ramp_target() const { return ramp_target_; }
    std::size_t clamp_count() const { return clamp_count_; }
    double slope_floor() const { return slope_floor_; }

    /// Virtual time at true time t, picoseconds.
    SimTime virtual_time(SimTime t) const {
        return t + ps_from_seconds(correction(t) - lateness(t));
    }

    /// How late the node's clock is at true time t: positive when an event
    /// scheduled on the virtual clock fires after the master's.
    double sync_error(SimTime t) const { return lateness(t) - correction(t); }

private:
    double slope_floor_;
    bool synced_ = false;
    SimTime seg_t0_ = 0, seg_t1_ = 0;
    double seg_v0_ = 0.0, seg_v1_ = 0.0;

    bool ramping_ = false;
    SimTime ramp_t0_ = 0;
    double ramp_start_value_ = 0.0;
    double ramp_target_ = 0.0;
    double ramp_tau_ = 1.0;
    std::size_t clamp_count_ = 0;
};

struct MonotonicityReport {
    std::size_t samples = 0;
    std::size_t violations = 0; // non-increasing consecutive tick samples
    double min_slope_ratio = std::numeric_limits<double>::infinity(); // vs predicted slope

    void merge(const MonotonicityReport& o) {
        samples += o.samples;
        violations += o.violations;
        min_slope_ratio = std::min(min_slope_ratio, o.min_slope_ratio);
    }
    bool ok(double floor) const { return violations == 0 && min_slope_ratio >= floor; }
};

/// Samples the virtual clock at tick granularity: every tick for the first
/// `dense_ticks` after `from` (where a ramp is steepest), then tick pairs
/// at geometrically growing offsets up to `to`.
inline MonotonicityReport sample_monotonicity(const VirtualClock& clock, SimTime from, SimTime to,
                                              SimTime tick, std::size_t dense_ticks) {
    MonotonicityReport r;
    auto check_pair = [&](SimTime t) {
        const SimTime v0 = clock.virtual_time(t);
        const SimTime v1 = clock.virtual_time(t + tick);
        ++r.samples;
        if (v1 <= v0) ++r.violations;
        const double slope = static_cast<double>(v1 - v0) / static_cast<double>(tick);
        r.min_slope_ratio = std::min(r.min_slope_ratio, slope / clock.predicted_slope(t));
    };
    SimTime t = from;
    for (std::size_t i = 0; i < dense_ticks && t + tick <= to; ++i, t += tick) check_pair(t);
    for (SimTime step = tick * static_cast<SimTime>(std::max<std::size_t>(dense_ticks, 1)); from + step + tick <= to;
         step *= 2)
        check_pair(from + step);
    return r;
}

} // namespace rfsync

#pragma once

// Right-continuous piecewise-constant path with left limits (cadlag step
// function). The universal representation for counting-process style data:
// weights, indicator processes, estimated curves.

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace ctmsm {

class StepPath {
public:
    StepPath() = default;
    explicit StepPath(double initial) : initial_(initial) {}
    StepPath(double initial, std::vector<double> times, std::vector<double> values)
        : initial_(initial), times_(std::move(times)), values_(std::move(values)) {
        if (times_.size() != values_.size())
            throw std::invalid_argument("StepPath: times/values size mismatch");
        for (std::size_t k = 1; k < times_.size(); ++k)
            if (!(times_[k] > times_[k - 1]))
                throw std::invalid_argument("StepPath: jump times must be strictly increasing");
    }

    void append(double t, double v) {
        if (!times_.empty() && !(t > times_.back()))
            throw std::invalid_argument("StepPath::append: non-increasing jump time");
        times_.push_back(t);
        values_.push_back(v);
    }

    // Value at t: the value set by the last jump with time <= t.
    double at(double t) const {
        std::size_t idx = upper_bound(t);
        return idx == 0 ? initial_ : values_[idx - 1];
    }

    // Left limit at t: the value set by the last jump with time < t.
    double left_limit(double t) const {
        std::size_t idx = lower_bound(t);
        return idx == 0 ? initial_ : values_[idx - 1];
    }

    double initial_value() const { return initial_; }
    double terminal_value() const { return values_.empty() ? initial_ : values_.back(); }
    const std::vector<double>& times() const { return times_; }
    const std::vector<double>& values() const { return values_; }
    std::size_t jump_count() const { return times_.size(); }

private:
    // number of jump times <= t
    std::size_t upper_bound(double t) const {
        std::size_t lo = 0, hi = times_.size();
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (times_[mid] <= t) lo = mid + 1; else hi = mid;
        }
        return lo;
    }
    // number of jump times < t
    std::size_t lower_bound(double t) const {
        std::size_t lo = 0, hi = times_.size();
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (times_[mid] < t) lo = mid + 1; else hi = mid;
        }
        return lo;
    }

    double initial_ = 0.0;
    std::vector<double> times_;
    std::vector<double> values_;
};

}  // namespace ctmsm

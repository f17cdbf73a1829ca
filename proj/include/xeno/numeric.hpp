#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>

namespace xeno {

/// Neumaier compensated accumulator. Summation order is the insertion
/// order, so results are reproducible for a fixed traversal.
class CompensatedSum {
public:
    void add(double x) noexcept
    {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            compensation_ += (sum_ - t) + x;
        } else {
            compensation_ += (x - t) + sum_;
        }
        sum_ = t;
    }

    double value() const noexcept { return sum_ + compensation_; }

private:
    double sum_ = 0.0;
    double compensation_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) noexcept
{
    CompensatedSum acc;
    for (double x : xs) acc.add(x);
    return acc.value();
}

/// log(sum(exp(xs))); -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> xs) noexcept
{
    double hi = -std::numeric_limits<double>::infinity();
    for (double x : xs) hi = std::max(hi, x);
    if (!std::isfinite(hi)) return hi;
    CompensatedSum acc;
    for (double x : xs) acc.add(std::exp(x - hi));
    return hi + std::log(acc.value());
}

/// Shortest round-trip decimal text for a double ("inf", "-inf", "nan"
/// for the non-finite values).
std::string format_double(double x);

} // namespace xeno

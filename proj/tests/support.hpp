#pragma once

#include "xeno/diagnostics.hpp"
#include "xeno/oracle.hpp"
#include "xeno/trajectory_model.hpp"

#include <cmath>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

namespace xeno::test {

inline TokenString str(const TrajectoryModel& m, std::string_view text)
{
    return parse_string(m.alphabet(), text);
}

/// Collects warnings for the lifetime of the guard.
class WarningCapture {
public:
    WarningCapture()
    {
        previous_ = set_warning_handler([this](std::string_view msg) { messages.emplace_back(msg); });
    }
    ~WarningCapture() { set_warning_handler(previous_); }
    WarningCapture(const WarningCapture&) = delete;
    WarningCapture& operator=(const WarningCapture&) = delete;

    std::vector<std::string> messages;

private:
    WarningHandler previous_;
};

/// Pearson statistic against the oracle distribution; true when the fit is
/// not rejected at level alpha.
inline bool chi_square_accepts(const std::vector<double>& expected_p, const std::vector<std::size_t>& counts,
                               std::size_t total, double alpha = 0.001)
{
    double stat = 0.0;
    for (std::size_t i = 0; i < expected_p.size(); ++i) {
        const double e = expected_p[i] * static_cast<double>(total);
        const double d = static_cast<double>(counts[i]) - e;
        stat += d * d / e;
    }
    if (expected_p.size() < 2) return true;
    boost::math::chi_squared dist(static_cast<double>(expected_p.size() - 1));
    return stat <= boost::math::quantile(boost::math::complement(dist, alpha));
}

/// |freq - p| within k standard errors of a binomial proportion.
inline bool within_sigma(std::size_t hits, std::size_t total, double p, double k = 3.0)
{
    const double n = static_cast<double>(total);
    const double se = std::sqrt(p * (1.0 - p) / n);
    return std::abs(static_cast<double>(hits) / n - p) <= k * se;
}

} // namespace xeno::test

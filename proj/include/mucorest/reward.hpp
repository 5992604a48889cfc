#pragma once

#include <cstddef>
#include <optional>

#include "mucorest/call.hpp"
#include "mucorest/coverage.hpp"
#include "mucorest/error.hpp"

namespace mucorest {

struct RewardConfig {
    double R_fg = 10.0;
    double R_uniq = 10.0;
    double R_denied = -10.0;
    double R_invalid = 1.0;
    double R_success = 1.0;
    double R_failure = 50.0;
    long long H = 10;

    void validate() const {
        if (H < 1) throw ConfigError("rewards.H", "must be a positive integer");
        if (!(R_failure > 0.0)) throw ConfigError("rewards.R_failure", "must be positive");
        if (!(R_denied < 0.0)) throw ConfigError("rewards.R_denied", "must be negative");
        if (R_invalid < 0.0) throw ConfigError("rewards.R_invalid", "must not be negative");
        if (R_success < 0.0) throw ConfigError("rewards.R_success", "must not be negative");
    }
};

struct RewardBreakdown {
    double r_cc = 0.0;
    double r_oc = 0.0;
    double r_bd = 0.0;
    double total = 0.0;
};

// Which reward terms an ablation run drops.
struct RewardMask {
    bool disable_cc = false;
    bool disable_oc = false;
};

enum class StatusClass { Denied, Invalid, Success, Failure };

// No response and 401/403 are "denied"; 1xx is lumped with 2xx/3xx.
inline StatusClass classify_status(const std::optional<int>& status) {
    if (!status || *status == 401 || *status == 403) return StatusClass::Denied;
    if (*status >= 500) return StatusClass::Failure;
    if (*status >= 400) return StatusClass::Invalid;
    return StatusClass::Success;
}

inline double code_coverage_reward(double delta, Stage stage, const RewardConfig& cfg) {
    if (!(delta > 0.0)) return 0.0;
    return stage == Stage::FastGrowing ? cfg.R_fg : 2.0 * cfg.R_fg;
}

/// `matches` is N, the number of the H most recent same-operation,
/// same-status responses whose normalized body equals this one.
inline double output_coverage_reward(const ApiResponse& response, std::size_t matches, const RewardConfig& cfg) {
    if (classify_status(response.status) == StatusClass::Denied) return 0.0;
    return cfg.R_uniq * (1.0 - 2.0 * static_cast<double>(matches) / static_cast<double>(cfg.H));
}

/// `occurrences` is k, how often this failure signature has been seen
/// including this call; the 5xx reward is damped by p = 1/k.
inline double bug_discoverability_reward(const ApiResponse& response, std::size_t occurrences,
                                         const RewardConfig& cfg) {
    switch (classify_status(response.status)) {
        case StatusClass::Denied: return cfg.R_denied;
        case StatusClass::Invalid: return cfg.R_invalid;
        case StatusClass::Success: return cfg.R_success;
        case StatusClass::Failure: {
            const double p = 1.0 / static_cast<double>(occurrences == 0 ? 1 : occurrences);
            return cfg.R_failure * p;
        }
    }
    return 0.0;
}

inline RewardBreakdown total_reward(double r_cc, double r_oc, double r_bd) {
    return {r_cc, r_oc, r_bd, r_cc + r_oc + r_bd};
}

inline RewardBreakdown total_reward(double r_cc, double r_oc, double r_bd, RewardMask mask) {
    return total_reward(mask.disable_cc ? 0.0 : r_cc, mask.disable_oc ? 0.0 : r_oc, r_bd);
}

}  // namespace mucorest

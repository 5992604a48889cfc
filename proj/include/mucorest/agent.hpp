#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mucorest/error.hpp"
#include "mucorest/rng.hpp"
#include "mucorest/spec_model.hpp"

namespace mucorest {

// Where a parameter value comes from. The ordinal order is the tie-break order.
enum class SourceKind : int { SpecExample = 0, SpecDefault, EnumPick, Random, ResponseDerived };

inline constexpr std::array<SourceKind, 5> kAllSources = {
    SourceKind::SpecExample, SourceKind::SpecDefault, SourceKind::EnumPick, SourceKind::Random,
    SourceKind::ResponseDerived};

inline std::string_view to_string(SourceKind s) {
    switch (s) {
        case SourceKind::SpecExample: return "spec_example";
        case SourceKind::SpecDefault: return "spec_default";
        case SourceKind::EnumPick: return "enum_pick";
        case SourceKind::Random: return "random";
        case SourceKind::ResponseDerived: return "response_derived";
    }
    return "random";
}

inline std::optional<SourceKind> source_from_string(std::string_view s) {
    for (auto k : kAllSources) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

struct PolicyConfig {
    double alpha = 0.1;          // learning rate, (0, 1]
    double gamma = 0.9;          // discount, [0, 1)
    double epsilon = 0.1;        // exploration probability, [0, 1]
    double epsilon_decay = 1.0;  // multiplied into epsilon after every call, (0, 1]
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("policy.alpha", "must be in (0, 1]");
        if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("policy.gamma", "must be in [0, 1)");
        if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("policy.epsilon", "must be in [0, 1]");
        if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0)) {
            throw ConfigError("policy.epsilon_decay", "must be in (0, 1]");
        }
    }
};

struct QTableSet {
    std::map<std::string, double> op_q;
    std::map<std::pair<std::string, std::string>, double> param_q;
    std::map<std::pair<std::string, SourceKind>, double> source_q;

    friend bool operator==(const QTableSet&, const QTableSet&) = default;
};

struct ActionRecord {
    std::string op_id;
    std::set<std::string> params;
    SourceKind source = SourceKind::SpecExample;
};

/// Operation values start at the mean frequency of the operation's
/// parameter names, parameter values at the name's frequency, sources at 0.
inline QTableSet init_q_tables(const ApiSpec& spec, const FrequencyMap& freq) {
    QTableSet q;
    for (const auto& op : spec.operations) {
        std::set<std::string> names;
        for (const auto& p : op.params) {
            if (freq.count(p.name) == 0) continue;  // excluded from the frequency count
            names.insert(p.name);
        }
        double sum = 0.0;
        for (const auto& name : names) {
            const double f = static_cast<double>(freq.at(name));
            q.param_q[{op.op_id, name}] = f;
            sum += f;
        }
        // Parameters left out of the frequency map still need a slot.
        for (const auto& p : op.params) q.param_q.try_emplace({op.op_id, p.name}, 0.0);
        q.op_q[op.op_id] = names.empty() ? 0.0 : sum / static_cast<double>(names.size());
        for (auto kind : kAllSources) q.source_q[{op.op_id, kind}] = 0.0;
    }
    return q;
}

namespace detail {

// Draw u ~ U(0,1); u > epsilon exploits. Candidates are visited in tie-break
// order, so a strict `>` keeps the first of equal maxima.
template <typename Candidates, typename ValueOf>
auto epsilon_greedy(const Candidates& candidates, ValueOf value_of, double epsilon, Rng& rng) {
    const double u = rng.uniform01();
    if (u > epsilon) {
        auto best = candidates.begin();
        double best_q = value_of(*best);
        for (auto it = std::next(candidates.begin()); it != candidates.end(); ++it) {
            const double v = value_of(*it);
            if (v > best_q) {
                best = it;
                best_q = v;
            }
        }
        return *best;
    }
    return candidates[rng.uniform_index(candidates.size())];
}

}  // namespace detail

inline std::string select_operation(const QTableSet& q, const PolicyConfig& cfg, Rng& rng) {
    if (q.op_q.empty()) throw EmptyActionSpace("no operations to select from");
    std::vector<std::string> ids;
    ids.reserve(q.op_q.size());
    for (const auto& [id, _] : q.op_q) ids.push_back(id);
    return detail::epsilon_greedy(ids, [&](const std::string& id) { return q.op_q.at(id); }, cfg.epsilon, rng);
}

/// Required parameters plus `optional_count` optional ones, each picked
/// epsilon-greedily over the parameter table among those still unpicked.
inline std::set<std::string> select_parameters(const QTableSet& q, const OperationDesc& op,
                                               std::size_t optional_count, const PolicyConfig& cfg,
                                               Rng& rng) {
    std::set<std::string> chosen;
    for (const auto& p : op.params) {
        if (p.required) chosen.insert(p.name);
    }
    std::set<std::string> optional_names;
    for (const auto& p : op.params) {
        if (!p.required && chosen.count(p.name) == 0) optional_names.insert(p.name);
    }
    std::vector<std::string> remaining(optional_names.begin(), optional_names.end());
    const auto value_of = [&](const std::string& name) {
        auto it = q.param_q.find({op.op_id, name});
        return it == q.param_q.end() ? 0.0 : it->second;
    };
    for (std::size_t i = 0; i < optional_count && !remaining.empty(); ++i) {
        const std::string pick = detail::epsilon_greedy(remaining, value_of, cfg.epsilon, rng);
        chosen.insert(pick);
        remaining.erase(std::find(remaining.begin(), remaining.end(), pick));
    }
    return chosen;
}

inline std::set<std::string> select_parameters(const QTableSet& q, const OperationDesc& op,
                                               const PolicyConfig& cfg, Rng& rng) {
    std::set<std::string> required;
    std::set<std::string> optional_names;
    for (const auto& p : op.params) {
        if (p.required) required.insert(p.name);
    }
    for (const auto& p : op.params) {
        if (!p.required && required.count(p.name) == 0) optional_names.insert(p.name);
    }
    const auto k = static_cast<std::size_t>(rng.uniform_index(optional_names.size() + 1));
    return select_parameters(q, op, k, cfg, rng);
}

inline SourceKind select_value_source(const QTableSet& q, std::string_view op_id, const PolicyConfig& cfg,
                                      Rng& rng) {
    const std::vector<SourceKind> kinds(kAllSources.begin(), kAllSources.end());
    const std::string id(op_id);
    return detail::epsilon_greedy(
        kinds,
        [&](SourceKind k) {
            auto it = q.source_q.find({id, k});
            return it == q.source_q.end() ? 0.0 : it->second;
        },
        cfg.epsilon, rng);
}

namespace detail {

template <typename Map>
double table_max(const Map& table) {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& [_, v] : table) m = std::max(m, v);
    return table.empty() ? 0.0 : m;
}

inline double bellman(double current, double reward, double next_max, const PolicyConfig& cfg) {
    return current + cfg.alpha * (reward + cfg.gamma * next_max - current);
}

}  // namespace detail

/// Bellman update of the three entries behind `action`. The next-state value
/// is the maximum of the same table, read once before that table changes.
inline void update_q(QTableSet& q, const ActionRecord& action, double reward, const PolicyConfig& cfg) {
    {
        const double next = detail::table_max(q.op_q);
        auto& entry = q.op_q.at(action.op_id);
        entry = detail::bellman(entry, reward, next, cfg);
    }
    {
        const double next = detail::table_max(q.param_q);
        for (const auto& name : action.params) {
            auto& entry = q.param_q.at({action.op_id, name});
            entry = detail::bellman(entry, reward, next, cfg);
        }
    }
    {
        const double next = detail::table_max(q.source_q);
        auto& entry = q.source_q.at({action.op_id, action.source});
        entry = detail::bellman(entry, reward, next, cfg);
    }
}

inline nlohmann::json q_tables_to_json(const QTableSet& q) {
    nlohmann::json out;
    out["operations"] = nlohmann::json::object();
    for (const auto& [id, v] : q.op_q) out["operations"][id] = v;
    out["parameters"] = nlohmann::json::object();
    for (const auto& [key, v] : q.param_q) out["parameters"][key.first][key.second] = v;
    out["sources"] = nlohmann::json::object();
    for (const auto& [key, v] : q.source_q) out["sources"][key.first][std::string(to_string(key.second))] = v;
    return out;
}

}  // namespace mucorest

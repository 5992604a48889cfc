#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <spdlog/spdlog.h>

#include "mucorest/error.hpp"

namespace mucorest {

/// Accumulated statement coverage of the service under test.
struct CoverageSnapshot {
    std::uint64_t covered_units = 0;
    std::uint64_t total_units = 1;

    double fraction() const {
        return static_cast<double>(covered_units) / static_cast<double>(total_units);
    }

    friend bool operator==(const CoverageSnapshot&, const CoverageSnapshot&) = default;
};

inline CoverageSnapshot make_snapshot(std::uint64_t covered, std::uint64_t total) {
    if (total == 0) throw Error("coverage snapshot needs a positive total");
    if (covered > total) throw Error("coverage snapshot has covered > total");
    return {covered, total};
}

enum class Stage { FastGrowing, Stabilizing };

inline std::string_view to_string(Stage s) {
    return s == Stage::FastGrowing ? "fast_growing" : "stabilizing";
}

/// Increase in covered fraction between two snapshots, clamped at 0.
inline double coverage_improvement(const CoverageSnapshot& prev, const CoverageSnapshot& cur) {
    if (prev.total_units != cur.total_units) {
        throw TotalsMismatch("coverage totals changed from " + std::to_string(prev.total_units) + " to " +
                             std::to_string(cur.total_units));
    }
    const double delta = cur.fraction() - prev.fraction();
    if (delta < 0.0) {
        spdlog::warn("accumulated coverage went down ({} -> {} units); treating as no change",
                     prev.covered_units, cur.covered_units);
        return 0.0;
    }
    return delta;
}

// Splits coverage growth into the fast-growing and stabilizing stages. The
// first kWarmupCalls calls are all fast-growing; their mean improvement (zeros
// included) halved becomes the threshold for every later call.
class StageTracker {
public:
    static constexpr std::size_t kWarmupCalls = 100;

    Stage classify(double delta) {
        ++call_count_;
        if (!threshold_) {
            warmup_deltas_.push_back(delta);
            if (warmup_deltas_.size() == kWarmupCalls) {
                threshold_ = 0.5 * (compensated_sum(warmup_deltas_) / static_cast<double>(kWarmupCalls));
            }
            return Stage::FastGrowing;
        }
        return delta > *threshold_ ? Stage::FastGrowing : Stage::Stabilizing;
    }

    std::size_t call_count() const { return call_count_; }
    const std::vector<double>& warmup_deltas() const { return warmup_deltas_; }
    std::optional<double> threshold() const { return threshold_; }

private:
    // Neumaier summation, so the threshold does not drift with delta order.
    static double compensated_sum(const std::vector<double>& xs) {
        double sum = 0.0;
        double carry = 0.0;
        for (double x : xs) {
            const double t = sum + x;
            carry += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
            sum = t;
        }
        return sum + carry;
    }

    std::size_t call_count_ = 0;
    std::vector<double> warmup_deltas_;
    std::optional<double> threshold_;
};

inline Stage classify_stage(StageTracker& tracker, double delta) { return tracker.classify(delta); }

enum class CoverageProviderKind { None, JacocoReport, Synthetic };

inline std::string_view to_string(CoverageProviderKind k) {
    switch (k) {
        case CoverageProviderKind::None: return "none";
        case CoverageProviderKind::JacocoReport: return "jacoco";
        case CoverageProviderKind::Synthetic: return "synthetic";
    }
    return "none";
}

class CoverageProvider {
public:
    virtual ~CoverageProvider() = default;
    virtual CoverageSnapshot read_snapshot() = 0;
    virtual CoverageProviderKind kind() const = 0;
};

// Coverage signal disabled: always (0, 1).
class NullCoverageProvider final : public CoverageProvider {
public:
    CoverageSnapshot read_snapshot() override { return {0, 1}; }
    CoverageProviderKind kind() const override { return CoverageProviderKind::None; }
};

/// Reads the report-level LINE counter of a JaCoCo XML report. Package, class
/// and method counters nested deeper are ignored.
inline CoverageSnapshot parse_jacoco_report(std::string_view document) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream in{std::string(document)};
        pt::read_xml(in, tree, pt::xml_parser::no_comments);
    } catch (const pt::xml_parser_error& e) {
        throw MalformedReport(std::string("JaCoCo report is not well-formed XML: ") + e.what());
    }
    const auto report = tree.get_child_optional("report");
    if (!report) throw MalformedReport("JaCoCo report has no <report> root element");

    for (const auto& [tag, child] : *report) {
        if (tag != "counter") continue;
        if (child.get<std::string>("<xmlattr>.type", "") != "LINE") continue;
        const auto covered_text = child.get_optional<std::string>("<xmlattr>.covered");
        const auto missed_text = child.get_optional<std::string>("<xmlattr>.missed");
        if (!covered_text || !missed_text) throw MalformedReport("LINE counter lacks covered/missed attributes");
        std::uint64_t covered = 0;
        std::uint64_t missed = 0;
        try {
            std::size_t used = 0;
            covered = std::stoull(*covered_text, &used);
            if (used != covered_text->size() || covered_text->front() == '-') throw std::invalid_argument("");
            missed = std::stoull(*missed_text, &used);
            if (used != missed_text->size() || missed_text->front() == '-') throw std::invalid_argument("");
        } catch (const std::logic_error&) {
            throw MalformedReport("LINE counter attributes are not non-negative integers");
        }
        if (covered + missed == 0) throw MissingLineCounter("report-level LINE counter has zero total lines");
        return {covered, covered + missed};
    }
    throw MissingLineCounter("JaCoCo report has no report-level LINE counter");
}

inline std::string read_file_or_unavailable(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ProviderUnavailable("cannot open coverage report '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Polls a JaCoCo report every `poll_every` calls and serves the cached
/// snapshot in between. `fetch` returns the report text or throws
/// ProviderUnavailable.
class JacocoReportProvider final : public CoverageProvider {
public:
    JacocoReportProvider(std::function<std::string()> fetch, std::size_t poll_every = 1)
        : fetch_(std::move(fetch)), poll_every_(poll_every == 0 ? 1 : poll_every) {}

    static JacocoReportProvider from_file(std::string path, std::size_t poll_every = 1) {
        return JacocoReportProvider([p = std::move(path)] { return read_file_or_unavailable(p); }, poll_every);
    }

    CoverageSnapshot read_snapshot() override {
        const bool poll = !cached_ || reads_ % poll_every_ == 0;
        ++reads_;
        if (poll) cached_ = parse_jacoco_report(fetch_());
        return *cached_;
    }

    CoverageProviderKind kind() const override { return CoverageProviderKind::JacocoReport; }

private:
    std::function<std::string()> fetch_;
    std::size_t poll_every_;
    std::size_t reads_ = 0;
    std::optional<CoverageSnapshot> cached_;
};

}  // namespace mucorest

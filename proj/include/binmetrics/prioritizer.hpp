#pragma once

#include "binmetrics/metrics.hpp"
#include "binmetrics/trace.hpp"
#include "binmetrics/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace binmetrics {

// ── Campaign model ───────────────────────────────────────────────────────

struct TestCaseRecord {
    std::string id;
    std::optional<double> weight; // absent until a coverage was ingested
    int rank = 0;                 // 1..N after ordering, 0 before
    std::string data_path;

    bool operator==(const TestCaseRecord&) const = default;
};

struct CampaignState {
    std::string metric_used = "Exp";
    std::string mode = "coverage-scaled";
    uint64_t rng_seed = 0;
    uint64_t listing_digest = 0;
    std::vector<TestCaseRecord> records;

    bool operator==(const CampaignState&) const = default;

    TestCaseRecord* find(const std::string& id) {
        for (TestCaseRecord& r : records)
            if (r.id == id)
                return &r;
        return nullptr;
    }
};

// ── Weighting ────────────────────────────────────────────────────────────

enum class WeighMode { RoutineHit, CoverageScaled };

inline WeighMode parse_weigh_mode(const std::string& name) {
    if (name == "routine-hit")
        return WeighMode::RoutineHit;
    if (name == "coverage-scaled")
        return WeighMode::CoverageScaled;
    throw UsageError("unknown weighting mode: " + name +
                     " (expected routine-hit or coverage-scaled)");
}

// routine-hit sums the metric over touched routines; coverage-scaled scales
// each term by the fraction of the routine's blocks the trace reached.
inline double weigh(const Coverage& coverage,
                    const std::map<std::string, MetricVector>& metrics,
                    const std::string& metric, WeighMode mode) {
    if (!is_metric_name(metric))
        throw UsageError("unknown metric name: " + metric);
    double total = 0;
    for (const auto& [routine, heads] : coverage.covered) {
        auto it = metrics.find(routine);
        if (it == metrics.end() || heads.empty())
            continue;
        const double value = metric_value(it->second, metric);
        if (mode == WeighMode::RoutineHit) {
            total += value;
        } else {
            const double bbls = it->second.bbls;
            total += bbls > 0 ? value * static_cast<double>(heads.size()) / bbls : 0.0;
        }
    }
    return total;
}

// ── Queue ordering ───────────────────────────────────────────────────────

namespace detail {

// Fisher-Yates with an explicit draw so the permutation is identical on
// every platform for a given seed.
template <typename T>
void seeded_shuffle(std::vector<T>& items, uint64_t seed) {
    std::mt19937_64 gen(seed);
    for (size_t i = items.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(gen() % i);
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace detail

// New seeds (no weight yet) first, in seeded-shuffle order; then weighted
// ids in strictly descending weight, ties broken by ascending id.
inline std::vector<std::string> order_queue(const CampaignState& state) {
    std::vector<std::string> fresh;
    std::vector<const TestCaseRecord*> weighted;
    for (const TestCaseRecord& r : state.records) {
        if (r.weight)
            weighted.push_back(&r);
        else
            fresh.push_back(r.id);
    }
    std::sort(fresh.begin(), fresh.end());
    detail::seeded_shuffle(fresh, state.rng_seed);
    std::sort(weighted.begin(), weighted.end(),
              [](const TestCaseRecord* a, const TestCaseRecord* b) {
                  if (*a->weight != *b->weight)
                      return *a->weight > *b->weight;
                  return a->id < b->id;
              });
    std::vector<std::string> queue = std::move(fresh);
    for (const TestCaseRecord* r : weighted)
        queue.push_back(r->id);
    return queue;
}

// Orders the queue and stamps ranks 1..N back into the records.
inline std::vector<std::string> assign_ranks(CampaignState& state) {
    std::vector<std::string> queue = order_queue(state);
    for (size_t i = 0; i < queue.size(); ++i)
        if (TestCaseRecord* r = state.find(queue[i]))
            r->rank = static_cast<int>(i) + 1;
    return queue;
}

// ── Persistence ──────────────────────────────────────────────────────────

inline std::string state_to_json(const CampaignState& state) {
    nlohmann::json doc;
    doc["format"] = "binmetrics-campaign-v1";
    doc["metric_used"] = state.metric_used;
    doc["mode"] = state.mode;
    doc["rng_seed"] = state.rng_seed;
    doc["listing_digest"] = state.listing_digest;
    nlohmann::json records = nlohmann::json::array();
    for (const TestCaseRecord& r : state.records) {
        nlohmann::json rec;
        rec["id"] = r.id;
        rec["data_path"] = r.data_path;
        rec["rank"] = r.rank;
        if (r.weight)
            rec["weight"] = *r.weight;
        records.push_back(std::move(rec));
    }
    doc["records"] = std::move(records);
    return doc.dump(2) + "\n";
}

inline CampaignState state_from_json(const std::string& content, const std::string& source) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(content);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(source + ": corrupt campaign state: " + e.what());
    }
    try {
        if (doc.value("format", "") != "binmetrics-campaign-v1")
            throw ParseError(source + ": not a binmetrics campaign state file");
        CampaignState state;
        state.metric_used = doc.at("metric_used").get<std::string>();
        state.mode = doc.value("mode", "coverage-scaled");
        state.rng_seed = doc.at("rng_seed").get<uint64_t>();
        state.listing_digest = doc.at("listing_digest").get<uint64_t>();
        for (const auto& rec : doc.value("records", nlohmann::json::array())) {
            TestCaseRecord r;
            r.id = rec.at("id").get<std::string>();
            r.data_path = rec.value("data_path", "");
            r.rank = rec.value("rank", 0);
            if (rec.contains("weight"))
                r.weight = rec["weight"].get<double>();
            state.records.push_back(std::move(r));
        }
        return state;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(source + ": corrupt campaign state: " + e.what());
    }
}

// Atomic write: temp file in place, then rename.
inline void save_state(const CampaignState& state, const std::string& path) {
    const std::string tmp = path + ".tmp";
    write_file(tmp, state_to_json(state));
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw ParseError("cannot rename " + tmp + " to " + path);
}

inline CampaignState load_state(const std::string& path) {
    return state_from_json(read_file(path), path);
}

// Digest-checked load: rejects state computed against a different listing.
inline CampaignState load_state(const std::string& path, uint64_t expected_digest) {
    CampaignState state = load_state(path);
    if (state.listing_digest != expected_digest)
        throw InvariantError(path + ": campaign state was computed against a different "
                             "listing (digest mismatch); re-score or start a new campaign");
    return state;
}

// ── Campaign manifest ────────────────────────────────────────────────────
//
//   <id> <data-path> [<trace-path>]
// per line, '#' comments. Entries without a trace are fresh seeds.

struct ManifestEntry {
    std::string id;
    std::string data_path;
    std::string trace_path; // empty = no coverage yet
};

inline std::vector<ManifestEntry> parse_manifest(const std::string& content,
                                                 const std::string& source) {
    std::vector<ManifestEntry> entries;
    std::set<std::string> ids;
    std::istringstream in(content);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#')
            continue;
        auto fields = split_fields(line);
        if (fields.size() < 2 || fields.size() > 3)
            throw ParseError(source + ":" + std::to_string(line_no) +
                             ": expected '<id> <data-path> [<trace-path>]'");
        if (!ids.insert(fields[0]).second)
            throw ParseError(source + ":" + std::to_string(line_no) +
                             ": duplicate test case id " + fields[0]);
        entries.push_back({fields[0], fields[1], fields.size() == 3 ? fields[2] : ""});
    }
    return entries;
}

inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
    return parse_manifest(read_file(path), path);
}

} // namespace binmetrics

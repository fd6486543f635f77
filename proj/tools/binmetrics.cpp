// binmetrics: complexity metrics over disassembled routines, trace scoring,
// fuzzing queue prioritization, and metric effectiveness evaluation.
//
// Exit codes are a scripting contract: 0 ok, 1 usage, 2 input/parse,
// 3 invariant violation.

#include "binmetrics/evaluator.hpp"
#include "binmetrics/listing_io.hpp"
#include "binmetrics/metrics.hpp"
#include "binmetrics/prioritizer.hpp"
#include "binmetrics/trace.hpp"
#include "binmetrics/util.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace binmetrics;

char separator_for(const std::string& format) {
    if (format == "csv")
        return ',';
    if (format == "tsv")
        return '\t';
    throw UsageError("unknown format: " + format + " (expected csv or tsv)");
}

BannedFunctionTable table_from(const std::string& path) {
    return path.empty() ? BannedFunctionTable::default_table() : BannedFunctionTable::load(path);
}

ProgramListing load_listing_reporting(const std::string& path) {
    LoadReport report;
    ProgramListing listing = load_listing(path, &report);
    for (const std::string& m : report.unknown_mnemonics)
        std::cerr << path << ": unknown mnemonic '" << m << "' classified as other\n";
    return listing;
}

// Paths inside manifests resolve relative to the manifest location.
std::string resolve_near(const std::string& manifest_path, const std::string& path) {
    std::filesystem::path p(path);
    if (p.is_absolute())
        return path;
    return (std::filesystem::path(manifest_path).parent_path() / p).string();
}

struct AnalyzeArgs {
    std::string listing_path, banned_table, metrics_filter, format = "csv";
    bool bound_literal = false;
};

int cmd_analyze(const AnalyzeArgs& args) {
    ProgramListing listing = load_listing_reporting(args.listing_path);
    MetricsOptions opts;
    opts.bound_literal = args.bound_literal;
    auto metrics = compute_all(listing, table_from(args.banned_table), opts);
    std::vector<std::string> filter;
    if (!args.metrics_filter.empty())
        for (const std::string& name : split(args.metrics_filter, ','))
            filter.push_back(trim(name));
    std::cout << metrics_csv(listing, metrics, filter, separator_for(args.format));
    return kExitOk;
}

struct CfgArgs {
    std::string listing_path, routine;
    bool dot = false;
};

int cmd_cfg(const CfgArgs& args) {
    ProgramListing listing = load_listing_reporting(args.listing_path);
    const Routine* routine = listing.find_routine(args.routine);
    if (!routine)
        throw binmetrics::ParseError("unknown routine: " + args.routine);
    Cfg cfg = build_cfg(*routine);
    for (const BasicBlock& b : cfg.nodes)
        if (!b.reachable)
            std::cerr << args.routine << ": block " << hex_addr(b.head)
                      << " unreachable, excluded from graph metrics\n";
    if (args.dot) {
        std::cout << cfg_to_dot(cfg);
        return kExitOk;
    }
    size_t edge_count = 0;
    for (const BasicBlock& b : cfg.nodes) {
        std::cout << "block " << hex_addr(b.head) << "-" << hex_addr(b.end)
                  << " instrs=" << b.instr_count;
        if (b.edge1) {
            std::cout << " -> " << hex_addr(*b.edge1);
            ++edge_count;
        }
        if (b.edge2) {
            std::cout << "," << hex_addr(*b.edge2);
            ++edge_count;
        }
        if (cfg.predicate_nodes.count(b.head))
            std::cout << " predicate";
        std::cout << "\n";
    }
    std::cout << "v=" << cfg.nodes.size() << " e=" << edge_count << "\n";
    return kExitOk;
}

struct ScoreArgs {
    std::string listing_path, banned_table, metric = "Exp", mode = "coverage-scaled",
                format = "csv";
    std::vector<std::string> trace_paths;
};

int cmd_score(const ScoreArgs& args) {
    const WeighMode mode = parse_weigh_mode(args.mode);
    if (!is_metric_name(args.metric))
        throw UsageError("unknown metric name: " + args.metric);
    const char sep = separator_for(args.format);
    ProgramListing listing = load_listing_reporting(args.listing_path);
    auto metrics = compute_all(listing, table_from(args.banned_table));
    BlockIndex index = build_block_index(listing);
    std::cout << "id" << sep << "weight\n";
    for (const std::string& path : args.trace_paths) {
        Trace trace = parse_trace(path);
        Coverage cov = map_coverage(trace, listing, index);
        if (cov.unmatched > 0)
            std::cerr << path << ": " << cov.unmatched
                      << " trace address(es) outside every known block\n";
        std::cout << trace.test_case_id << sep
                  << format_f6(weigh(cov, metrics, args.metric, mode)) << "\n";
    }
    return kExitOk;
}

struct PrioritizeArgs {
    std::string state_path, manifest_path, listing_path, banned_table;
    std::string metric = "Exp", mode = "coverage-scaled";
    uint64_t seed = 0;
    bool metric_given = false, mode_given = false, seed_given = false;
};

int cmd_prioritize(const PrioritizeArgs& args) {
    const std::string listing_bytes = read_file(args.listing_path);
    const uint64_t digest = fnv1a64(listing_bytes);
    ProgramListing listing = parse_listing(listing_bytes, args.listing_path);

    CampaignState state;
    if (std::filesystem::exists(args.state_path)) {
        state = load_state(args.state_path, digest);
        if (args.metric_given && args.metric != state.metric_used)
            throw UsageError("campaign state was built with metric " + state.metric_used +
                             "; start a new state file to switch metrics");
        if (args.mode_given && args.mode != state.mode)
            throw UsageError("campaign state was built with mode " + state.mode +
                             "; start a new state file to switch modes");
        if (args.seed_given)
            state.rng_seed = args.seed;
    } else {
        if (!is_metric_name(args.metric))
            throw UsageError("unknown metric name: " + args.metric);
        parse_weigh_mode(args.mode);
        state.metric_used = args.metric;
        state.mode = args.mode;
        state.rng_seed = args.seed;
        state.listing_digest = digest;
    }

    auto metrics = compute_all(listing, table_from(args.banned_table));
    BlockIndex index = build_block_index(listing);
    const WeighMode mode = parse_weigh_mode(state.mode);

    for (const ManifestEntry& entry : load_manifest(args.manifest_path)) {
        TestCaseRecord* record = state.find(entry.id);
        if (!record) {
            state.records.push_back({entry.id, std::nullopt, 0, entry.data_path});
            record = &state.records.back();
        }
        record->data_path = entry.data_path;
        if (!entry.trace_path.empty()) {
            Trace trace = parse_trace(resolve_near(args.manifest_path, entry.trace_path));
            if (trace.test_case_id != entry.id)
                throw binmetrics::ParseError(entry.trace_path + ": trace id '" +
                                             trace.test_case_id +
                                             "' does not match manifest id '" + entry.id + "'");
            Coverage cov = map_coverage(trace, listing, index);
            record->weight = weigh(cov, metrics, state.metric_used, mode);
        }
    }

    std::vector<std::string> queue = assign_ranks(state);
    save_state(state, args.state_path);
    for (const std::string& id : queue)
        std::cout << id << "\n";
    return kExitOk;
}

struct EvaluateArgs {
    std::string corpus_path, ground_truth_path, banned_table, pr_values_path, format = "csv";
};

int cmd_evaluate(const EvaluateArgs& args) {
    const char sep = separator_for(args.format);
    BannedFunctionTable table = table_from(args.banned_table);
    GroundTruth gt = load_ground_truth(args.ground_truth_path);

    std::map<std::string, std::vector<PrSample>> by_metric;
    std::set<std::string> seen_modules;
    std::istringstream manifest(read_file(args.corpus_path));
    std::string raw;
    while (std::getline(manifest, raw)) {
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#')
            continue;
        ProgramListing listing = load_listing_reporting(resolve_near(args.corpus_path, line));
        seen_modules.insert(listing.module_name);
        auto it = gt.vulnerable.find(listing.module_name);
        if (it == gt.vulnerable.end())
            continue;
        auto metrics = compute_all(listing, table);
        score_application(listing.module_name, metrics, it->second, by_metric);
    }
    for (const auto& [module, routines] : gt.vulnerable)
        if (!seen_modules.count(module))
            throw binmetrics::ParseError("ground truth names module '" + module +
                                         "' absent from the corpus manifest");

    EvaluationReport report = aggregate(by_metric);
    if (!args.pr_values_path.empty())
        write_file(args.pr_values_path, pr_values_csv(report, sep));
    std::cout << report_csv(report, sep);
    return kExitOk;
}

struct ReportArgs {
    std::string state_path, format = "csv";
};

int cmd_report(const ReportArgs& args) {
    const char sep = separator_for(args.format);
    CampaignState state = load_state(args.state_path);
    std::vector<const TestCaseRecord*> records;
    for (const TestCaseRecord& r : state.records)
        records.push_back(&r);
    std::sort(records.begin(), records.end(),
              [](const TestCaseRecord* a, const TestCaseRecord* b) {
                  if ((a->rank == 0) != (b->rank == 0))
                      return b->rank == 0;
                  if (a->rank != b->rank)
                      return a->rank < b->rank;
                  return a->id < b->id;
              });
    std::cout << "id" << sep << "weight" << sep << "rank\n";
    for (const TestCaseRecord* r : records) {
        std::cout << r->id << sep;
        if (r->weight)
            std::cout << format_f6(*r->weight);
        std::cout << sep << r->rank << "\n";
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"complexity metrics and queue prioritization for fuzzing binary routines"};
    app.require_subcommand(1);

    AnalyzeArgs analyze_args;
    CLI::App* analyze = app.add_subcommand("analyze", "compute the metric CSV for a listing");
    analyze->add_option("listing", analyze_args.listing_path, "listing file")->required();
    analyze->add_option("--banned-table", analyze_args.banned_table,
                        "banned-function table file (default: built-in Microsoft SDL list)");
    analyze->add_option("--metrics", analyze_args.metrics_filter,
                        "comma-separated metric columns (default: all)");
    analyze->add_option("--format", analyze_args.format, "csv or tsv");
    analyze->add_flag("--bound-literal", analyze_args.bound_literal,
                      "use the literal boundary-values denominator");

    CfgArgs cfg_args;
    CLI::App* cfg = app.add_subcommand("cfg", "print a routine's control flow graph");
    cfg->add_option("listing", cfg_args.listing_path, "listing file")->required();
    cfg->add_option("routine", cfg_args.routine, "routine name")->required();
    cfg->add_flag("--dot", cfg_args.dot, "emit DOT instead of the block table");

    ScoreArgs score_args;
    CLI::App* score = app.add_subcommand("score", "weigh test cases by trace complexity");
    score->add_option("listing", score_args.listing_path, "listing file")->required();
    score->add_option("traces", score_args.trace_paths, "trace files")->required();
    score->add_option("--banned-table", score_args.banned_table, "banned-function table file");
    score->add_option("--metric", score_args.metric, "weighting metric (default Exp)");
    score->add_option("--mode", score_args.mode, "routine-hit or coverage-scaled");
    score->add_option("--format", score_args.format, "csv or tsv");

    PrioritizeArgs prio_args;
    CLI::App* prio = app.add_subcommand(
        "prioritize", "update campaign state from a manifest and print the queue");
    prio->add_option("state", prio_args.state_path, "campaign state file (created if absent)")
        ->required();
    prio->add_option("manifest", prio_args.manifest_path,
                     "lines of '<id> <data-path> [<trace-path>]'")
        ->required();
    prio->add_option("--listing", prio_args.listing_path, "listing file")->required();
    prio->add_option("--banned-table", prio_args.banned_table, "banned-function table file");
    CLI::Option* metric_opt =
        prio->add_option("--metric", prio_args.metric, "weighting metric (default Exp)");
    CLI::Option* mode_opt =
        prio->add_option("--mode", prio_args.mode, "routine-hit or coverage-scaled");
    CLI::Option* seed_opt =
        prio->add_option("--seed", prio_args.seed, "shuffle seed for fresh test cases");

    EvaluateArgs eval_args;
    CLI::App* evaluate = app.add_subcommand(
        "evaluate", "rank vulnerable routines per metric across a corpus");
    evaluate->add_option("corpus", eval_args.corpus_path, "manifest of listing paths")
        ->required();
    evaluate->add_option("ground_truth", eval_args.ground_truth_path,
                         "lines of '<module> <routine>'")
        ->required();
    evaluate->add_option("--banned-table", eval_args.banned_table, "banned-function table file");
    evaluate->add_option("--pr-values", eval_args.pr_values_path,
                         "write every PR sample to this CSV file");
    evaluate->add_option("--format", eval_args.format, "csv or tsv");

    ReportArgs report_args;
    CLI::App* report = app.add_subcommand("report", "print campaign state as id,weight,rank");
    report->add_option("state", report_args.state_path, "campaign state file")->required();
    report->add_option("--format", report_args.format, "csv or tsv");

    try {
        app.parse(argc, argv);
        prio_args.metric_given = metric_opt->count() > 0;
        prio_args.mode_given = mode_opt->count() > 0;
        prio_args.seed_given = seed_opt->count() > 0;

        int rc = binmetrics::kExitOk;
        if (analyze->parsed())
            rc = cmd_analyze(analyze_args);
        else if (cfg->parsed())
            rc = cmd_cfg(cfg_args);
        else if (score->parsed())
            rc = cmd_score(score_args);
        else if (prio->parsed())
            rc = cmd_prioritize(prio_args);
        else if (evaluate->parsed())
            rc = cmd_evaluate(eval_args);
        else if (report->parsed())
            rc = cmd_report(report_args);
        std::cout.flush();
        return rc;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? binmetrics::kExitOk : binmetrics::kExitUsage;
    } catch (const binmetrics::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return binmetrics::kExitUsage;
    } catch (const binmetrics::InvariantError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return binmetrics::kExitInvariant;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return binmetrics::kExitInput;
    }
}

#pragma once

#include "binmetrics/cfg.hpp"
#include "binmetrics/listing.hpp"
#include "binmetrics/util.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace binmetrics {

// ── Halstead counts ──────────────────────────────────────────────────────
//
// Operators are mnemonic occurrences; operands are canonical tokens per the
// listing tokenization (memory operands are one token, branch/call targets
// count as operands).

struct HalsteadCounts {
    int64_t total_operators = 0;  // N1
    int64_t total_operands = 0;   // N2
    int64_t unique_operators = 0; // n1
    int64_t unique_operands = 0;  // n2
};

struct HalsteadMetrics {
    HalsteadCounts counts;
    double length = 0;      // H.N  = N1 + N2
    double calc_length = 0; // H.N* = n1*log2(n1) + n2*log2(n2)
    double volume = 0;      // H.V  = N*log2(n)
    double difficulty = 0;  // H.D  = (n1/2)*(N2/n2), 0 when n2 = 0
    double effort = 0;      // H.E  = H.D*H.V
    double bugs = 0;        // H.B  = H.E^(2/3)/3000
};

namespace detail {

inline double xlog2x(double x) {
    return x > 0 ? x * std::log2(x) : 0.0;
}

} // namespace detail

inline HalsteadMetrics halstead(const Routine& routine) {
    if (routine.instructions.empty())
        throw InvariantError("routine " + routine.name + ": no instructions");
    HalsteadMetrics h;
    std::set<std::string> ops, args;
    for (const Instruction& insn : routine.instructions) {
        ++h.counts.total_operators;
        ops.insert(insn.mnemonic);
        for (const Operand& op : insn.operands) {
            ++h.counts.total_operands;
            args.insert(op.token);
        }
    }
    h.counts.unique_operators = static_cast<int64_t>(ops.size());
    h.counts.unique_operands = static_cast<int64_t>(args.size());

    const double N = static_cast<double>(h.counts.total_operators + h.counts.total_operands);
    const double n = static_cast<double>(h.counts.unique_operators + h.counts.unique_operands);
    h.length = N;
    h.calc_length = detail::xlog2x(static_cast<double>(h.counts.unique_operators)) +
                    detail::xlog2x(static_cast<double>(h.counts.unique_operands));
    h.volume = n > 0 ? N * std::log2(n) : 0.0;
    h.difficulty = h.counts.unique_operands > 0
                       ? (static_cast<double>(h.counts.unique_operators) / 2.0) *
                             (static_cast<double>(h.counts.total_operands) /
                              static_cast<double>(h.counts.unique_operands))
                       : 0.0;
    h.effort = h.difficulty * h.volume;
    h.bugs = std::pow(h.effort, 2.0 / 3.0) / 3000.0;
    return h;
}

// ── Graph metrics ────────────────────────────────────────────────────────

struct MetricsOptions {
    // Literal boundary-values denominator sum(in-degree - out-degree) instead
    // of the corrected sum(in-degree); kept for comparisons only.
    bool bound_literal = false;
};

struct GraphMetrics {
    double cc = 0;      // e - v + 2
    double cc_mod = 0;  // indirect-decision nodes contribute two edge slots
    double density = 0; // R = e / v
    double pi = 0;      // CC_mod + sum of predicate nesting levels
    double harr = 0;    // sum of sphere complexities over predicate nodes
    double bound = 0;   // 1 - (n-1)/S_a, 0 when no edges
    double reachable_nodes = 0;
    double reachable_edges = 0;
};

inline GraphMetrics graph_metrics(const Cfg& cfg, const MetricsOptions& opts = {}) {
    GraphMetrics g;
    int64_t v = 0, e = 0, indirect_nodes = 0, in_minus_out = 0;
    for (const BasicBlock& b : cfg.nodes) {
        if (!b.reachable)
            continue;
        ++v;
        if (b.edge1)
            ++e;
        if (b.edge2)
            ++e;
        if (b.indirect_unknown)
            ++indirect_nodes;
    }
    g.reachable_nodes = static_cast<double>(v);
    g.reachable_edges = static_cast<double>(e);

    g.cc = static_cast<double>(e - v + 2);
    g.cc_mod = static_cast<double>(e + 2 * indirect_nodes - v + 2);
    g.density = v > 0 ? static_cast<double>(e) / static_cast<double>(v) : 0.0;

    for (const auto& [head, level] : predicate_nesting(cfg))
        g.pi += level;
    g.pi += g.cc_mod;

    for (const auto& [head, c] : sphere_complexity(cfg))
        g.harr += c;

    if (opts.bound_literal) {
        for (const BasicBlock& b : cfg.nodes) {
            if (!b.reachable)
                continue;
            int out = (b.edge1 ? 1 : 0) + (b.edge2 ? 1 : 0);
            int in = 0;
            for (const auto& [from, to] : cfg.edges) {
                const BasicBlock* src = cfg.node_at(from);
                if (src && src->reachable && to == b.head)
                    ++in;
            }
            in_minus_out += in - out;
        }
        g.bound = in_minus_out != 0
                      ? 1.0 - static_cast<double>(v - 1) / static_cast<double>(in_minus_out)
                      : 0.0;
    } else {
        // Corrected denominator: S_a = sum of in-degrees = e.
        g.bound = e > 0 ? 1.0 - static_cast<double>(v - 1) / static_cast<double>(e) : 0.0;
    }
    return g;
}

// ── Counting metrics ─────────────────────────────────────────────────────

struct CountingMetrics {
    double loc = 0;
    double bbls = 0;
    double calls = 0;
    double assign = 0;
    double condit = 0;
    double global = 0;
    double jilb = 0; // Condit / N1
    double abc = 0;  // sqrt(Assign^2 + Condit^2 + CALLS^2)
    double span = 0; // instructions-containing-token, summed over unique tokens
};

inline CountingMetrics counting_metrics(const Routine& routine, const Cfg& cfg) {
    CountingMetrics c;
    c.loc = static_cast<double>(routine.instructions.size());
    c.bbls = static_cast<double>(cfg.reachable_count());

    std::map<std::string, int64_t> instrs_with_token;
    for (const Instruction& insn : routine.instructions) {
        if (insn.classes & kCall)
            c.calls += 1;
        if (insn.classes & kAssignment)
            c.assign += 1;
        if (insn.classes & kCondBranch)
            c.condit += 1;
        std::set<std::string> here;
        for (const Operand& op : insn.operands) {
            if (is_global_token(op.token))
                c.global += 1;
            here.insert(op.token);
        }
        for (const std::string& t : here)
            ++instrs_with_token[t];
    }
    const double n1_total = c.loc; // one mnemonic per instruction
    c.jilb = n1_total > 0 ? c.condit / n1_total : 0.0;
    c.abc = std::sqrt(c.assign * c.assign + c.condit * c.condit + c.calls * c.calls);
    for (const auto& [token, count] : instrs_with_token)
        c.span += static_cast<double>(count);
    return c;
}

// ── Data-flow approximations ─────────────────────────────────────────────
//
// Deterministic token-level read/write model. Immediates and code targets
// are never variables; registers and memory tokens are.

struct AccessSets {
    std::vector<const Operand*> reads;
    std::vector<const Operand*> writes;
};

inline AccessSets reads_writes(const Instruction& insn) {
    AccessSets acc;
    auto var = [](const Operand& op) {
        return op.kind == OperandKind::Register || op.kind == OperandKind::Memory;
    };
    auto read = [&](const Operand& op) {
        if (var(op))
            acc.reads.push_back(&op);
    };
    auto write = [&](const Operand& op) {
        if (var(op))
            acc.writes.push_back(&op);
    };
    const auto& ops = insn.operands;
    const std::string& m = insn.mnemonic;

    if (insn.classes & (kCondBranch | kUncondBranch | kIndirectBranch | kCall | kRet)) {
        for (const Operand& op : ops)
            read(op); // data-dependent transfer target
        return acc;
    }
    if (m == "push") {
        for (const Operand& op : ops)
            read(op);
    } else if (m == "pop") {
        if (!ops.empty())
            write(ops[0]);
    } else if (m == "mov" || m == "movzx" || m == "movsx" || m == "lea") {
        if (!ops.empty())
            write(ops[0]);
        for (size_t i = 1; i < ops.size(); ++i)
            read(ops[i]);
    } else if (m == "xchg" || m == "xadd") {
        for (const Operand& op : ops) {
            read(op);
            write(op);
        }
    } else if (m == "inc" || m == "dec" || m == "neg" || m == "not" || m == "bswap") {
        if (!ops.empty()) {
            read(ops[0]);
            write(ops[0]);
        }
    } else if (starts_with(m, "set")) {
        if (!ops.empty())
            write(ops[0]);
    } else if (m == "mul" || m == "div" || m == "idiv" ||
               (m == "imul" && ops.size() == 1)) {
        read(ops[0]);
    } else if (m == "imul" && ops.size() == 3) {
        write(ops[0]);
        read(ops[1]);
    } else if (insn.classes & kCompare) {
        for (const Operand& op : ops)
            read(op);
    } else if (insn.classes & kAssignment) {
        // two-operand read-modify-write arithmetic/logic
        if (!ops.empty()) {
            read(ops[0]);
            write(ops[0]);
        }
        for (size_t i = 1; i < ops.size(); ++i)
            read(ops[i]);
    } else {
        for (const Operand& op : ops)
            read(op);
    }
    return acc;
}

struct DataflowMetrics {
    double fan_in = 0;  // distinct callers + distinct global reads
    double fan_out = 0; // distinct callees + distinct global writes
    double hc = 0;      // LOC * (fan_in + fan_out)^2
    double cg = 0;      // fan_out^2 + v_args/(fan_out + 1)
    double oviedo = 0;  // per-block first-use-before-def reads
    double chapin = 0;  // P + 2M + 3C
};

namespace detail {

// Write target that leaves the routine: return register, absolute global,
// named data reference, or store through a computed pointer.
inline bool is_output_write(const Operand& op) {
    if (is_return_register_token(op.token))
        return true;
    if (is_global_token(op.token))
        return true;
    if (op.kind == OperandKind::Memory && !is_memory_token(op.token))
        return true; // bare named data symbol
    if (is_memory_token(op.token) && !is_stack_slot_token(op.token) &&
        !is_global_token(op.token))
        return true; // [eax], [ecx+4], ...
    return false;
}

} // namespace detail

inline DataflowMetrics dataflow_metrics(const Routine& routine, const Cfg& cfg,
                                        const ProgramListing& listing) {
    DataflowMetrics d;

    std::set<std::string> callers;
    for (const Routine& other : listing.routines)
        for (const std::string& callee : other.callees)
            if (callee == routine.name)
                callers.insert(other.name);

    std::set<std::string> callees(routine.callees.begin(), routine.callees.end());
    std::set<std::string> global_reads, global_writes, args_read;
    std::set<std::string> output_writes, local_slots, branch_vars;
    bool writes_return_reg = false;

    for (const Instruction& insn : routine.instructions) {
        AccessSets acc = reads_writes(insn);
        for (const Operand* op : acc.reads) {
            if (is_global_token(op->token))
                global_reads.insert(op->token);
            if (is_arg_slot_token(op->token))
                args_read.insert(op->token);
        }
        for (const Operand* op : acc.writes) {
            if (is_global_token(op->token))
                global_writes.insert(op->token);
            if (is_return_register_token(op->token))
                writes_return_reg = true;
            if (detail::is_output_write(*op))
                output_writes.insert(op->token);
        }
        for (const Operand& op : insn.operands)
            if (is_local_slot_token(op.token))
                local_slots.insert(op.token);
    }

    d.fan_in = static_cast<double>(callers.size() + global_reads.size());
    d.fan_out = static_cast<double>(callees.size() + global_writes.size());
    d.hc = static_cast<double>(routine.instructions.size()) *
           (d.fan_in + d.fan_out) * (d.fan_in + d.fan_out);

    const double v_args = static_cast<double>(args_read.size()) + (writes_return_reg ? 1 : 0);
    d.cg = d.fan_out * d.fan_out + v_args / (d.fan_out + 1.0);

    auto block_span = [&](const BasicBlock& block) {
        auto first = std::lower_bound(
            routine.instructions.begin(), routine.instructions.end(), block.head,
            [](const Instruction& i, uint64_t a) { return i.address < a; });
        auto last = first;
        while (last != routine.instructions.end() && last->address <= block.end)
            ++last;
        return std::pair{first, last};
    };

    // Oviedo: count register / stack-slot reads not preceded by a definition
    // in the same block, one per (block, variable).
    for (const BasicBlock& block : cfg.nodes) {
        std::set<std::string> defined, counted;
        auto [first, last] = block_span(block);
        for (auto it = first; it != last; ++it) {
            AccessSets acc = reads_writes(*it);
            for (const Operand* op : acc.reads) {
                if (!is_register_token(op->token) && !is_stack_slot_token(op->token))
                    continue;
                if (!defined.count(op->token) && counted.insert(op->token).second)
                    d.oviedo += 1;
            }
            for (const Operand* op : acc.writes)
                defined.insert(op->token);
        }
    }

    // Chapin C: operands of the last compare feeding each conditional branch.
    for (const BasicBlock& block : cfg.nodes) {
        const Instruction* terminator = routine.instruction_at(block.end);
        if (!terminator || !(terminator->classes & kCondBranch))
            continue;
        const Instruction* feeding = nullptr;
        auto [first, last] = block_span(block);
        for (auto it = first; it != last; ++it)
            if (it->classes & kCompare)
                feeding = &*it;
        if (!feeding)
            continue;
        for (const Operand& op : feeding->operands)
            if (op.kind != OperandKind::Immediate && op.kind != OperandKind::CodeTarget)
                branch_vars.insert(op.token);
    }

    d.chapin = static_cast<double>(output_writes.size()) +
               2.0 * static_cast<double>(local_slots.size()) +
               3.0 * static_cast<double>(branch_vars.size());
    return d;
}

// ── Banned-function table and the experimental metric ────────────────────

struct BannedFunctionTable {
    std::map<std::string, double> entries; // 1.0 banned, 0.5 discouraged

    std::optional<double> coefficient(const std::string& name) const {
        auto it = entries.find(to_lower(name));
        if (it == entries.end())
            return std::nullopt;
        return it->second;
    }

    // Microsoft SDL banned list: copy/cat/format/scan families banned, the
    // bounded n-variants and alloca discouraged.
    static BannedFunctionTable default_table() {
        BannedFunctionTable t;
        for (const char* name :
             {"strcpy", "wcscpy", "lstrcpy", "lstrcpya", "lstrcpyw", "strcat",
              "wcscat", "lstrcat", "lstrcata", "lstrcatw", "memcpy", "wmemcpy",
              "copymemory", "rtlcopymemory", "gets", "sprintf", "vsprintf",
              "wsprintf", "swprintf", "scanf", "sscanf", "fscanf", "vscanf",
              "vsscanf", "vfscanf", "wscanf", "swscanf"})
            t.entries[name] = 1.0;
        for (const char* name : {"strncpy", "wcsncpy", "lstrcpyn", "strncat",
                                 "wcsncat", "lstrcatn", "alloca", "_alloca",
                                 "_malloca"})
            t.entries[name] = 0.5;
        return t;
    }

    // "<name> <coefficient>" per line, '#' comments.
    static BannedFunctionTable parse(const std::string& content, const std::string& source) {
        BannedFunctionTable t;
        std::istringstream in(content);
        std::string raw;
        int line_no = 0;
        while (std::getline(in, raw)) {
            ++line_no;
            std::string line = trim(raw);
            if (line.empty() || line[0] == '#')
                continue;
            auto fields = split_fields(line);
            double coeff = fields.size() == 2 ? std::atof(fields[1].c_str()) : -1;
            if (fields.size() != 2 || (coeff != 1.0 && coeff != 0.5))
                throw ParseError(source + ":" + std::to_string(line_no) +
                                 ": expected '<name> <1.0|0.5>'");
            t.entries[to_lower(fields[0])] = coeff;
        }
        return t;
    }

    static BannedFunctionTable load(const std::string& path) {
        return parse(read_file(path), path);
    }
};

// Exp = H.B * sum over called banned functions of (v_i + 1), where v_i is
// call-site count times the danger coefficient. No banned calls leaves the
// neutral baseline Exp = H.B.
inline double exp_metric(const Routine& routine, double hb, const BannedFunctionTable& table) {
    std::map<std::string, int64_t> call_sites;
    for (const std::string& callee : routine.callees) {
        if (table.coefficient(callee))
            ++call_sites[to_lower(callee)];
    }
    if (call_sites.empty())
        return hb;
    double sum = 0;
    for (const auto& [name, count] : call_sites)
        sum += static_cast<double>(count) * *table.coefficient(name) + 1.0;
    return hb * sum;
}

inline double cocol(double hb, double loc, double cc) {
    return hb + loc + cc;
}

// ── The full vector ──────────────────────────────────────────────────────

struct MetricVector {
    double loc = 0, bbls = 0, calls = 0;
    double jilb = 0, abc = 0, cc = 0, cc_mod = 0, r = 0, pi = 0;
    double h_n = 0, h_n_star = 0, h_v = 0, h_d = 0, h_e = 0, h_b = 0;
    double harr = 0, bound = 0, span = 0;
    double hc = 0, cg = 0, oviedo = 0, chapin = 0;
    double cocol = 0, assign = 0, condit = 0, global = 0, exp = 0;
};

inline const std::vector<std::pair<std::string, double MetricVector::*>>& metric_table() {
    static const std::vector<std::pair<std::string, double MetricVector::*>> table = {
        {"LOC", &MetricVector::loc},       {"BBLs", &MetricVector::bbls},
        {"CALLS", &MetricVector::calls},   {"Jilb", &MetricVector::jilb},
        {"ABC", &MetricVector::abc},       {"CC", &MetricVector::cc},
        {"CC_mod", &MetricVector::cc_mod}, {"R", &MetricVector::r},
        {"Pi", &MetricVector::pi},         {"H.N", &MetricVector::h_n},
        {"H.N*", &MetricVector::h_n_star}, {"H.V", &MetricVector::h_v},
        {"H.D", &MetricVector::h_d},       {"H.E", &MetricVector::h_e},
        {"H.B", &MetricVector::h_b},       {"Harr", &MetricVector::harr},
        {"Bound", &MetricVector::bound},   {"Span", &MetricVector::span},
        {"H&C", &MetricVector::hc},        {"C&G", &MetricVector::cg},
        {"Oviedo", &MetricVector::oviedo}, {"Chapin", &MetricVector::chapin},
        {"Cocol", &MetricVector::cocol},   {"Assign", &MetricVector::assign},
        {"Condit", &MetricVector::condit}, {"Global", &MetricVector::global},
        {"Exp", &MetricVector::exp},
    };
    return table;
}

inline std::vector<std::string> metric_names() {
    std::vector<std::string> names;
    for (const auto& [name, _] : metric_table())
        names.push_back(name);
    return names;
}

inline double metric_value(const MetricVector& mv, const std::string& name) {
    const std::string want = to_lower(name);
    for (const auto& [n, member] : metric_table())
        if (to_lower(n) == want)
            return mv.*member;
    throw UsageError("unknown metric name: " + name);
}

inline bool is_metric_name(const std::string& name) {
    const std::string want = to_lower(name);
    for (const auto& [n, _] : metric_table())
        if (to_lower(n) == want)
            return true;
    return false;
}

inline MetricVector compute_routine_metrics(const Routine& routine, const Cfg& cfg,
                                            const ProgramListing& listing,
                                            const BannedFunctionTable& table,
                                            const MetricsOptions& opts = {}) {
    MetricVector mv;
    HalsteadMetrics h = halstead(routine);
    GraphMetrics g = graph_metrics(cfg, opts);
    CountingMetrics c = counting_metrics(routine, cfg);
    DataflowMetrics d = dataflow_metrics(routine, cfg, listing);

    mv.loc = c.loc;
    mv.bbls = c.bbls;
    mv.calls = c.calls;
    mv.jilb = c.jilb;
    mv.abc = c.abc;
    mv.cc = g.cc;
    mv.cc_mod = g.cc_mod;
    mv.r = g.density;
    mv.pi = g.pi;
    mv.h_n = h.length;
    mv.h_n_star = h.calc_length;
    mv.h_v = h.volume;
    mv.h_d = h.difficulty;
    mv.h_e = h.effort;
    mv.h_b = h.bugs;
    mv.harr = g.harr;
    mv.bound = g.bound;
    mv.span = c.span;
    mv.hc = d.hc;
    mv.cg = d.cg;
    mv.oviedo = d.oviedo;
    mv.chapin = d.chapin;
    mv.cocol = cocol(h.bugs, c.loc, g.cc);
    mv.assign = c.assign;
    mv.condit = c.condit;
    mv.global = c.global;
    mv.exp = exp_metric(routine, h.bugs, table);
    return mv;
}

// Every non-empty routine gets a complete vector; per-routine failures are
// aggregated, never silently dropped.
inline std::map<std::string, MetricVector> compute_all(const ProgramListing& listing,
                                                       const BannedFunctionTable& table,
                                                       const MetricsOptions& opts = {}) {
    std::map<std::string, MetricVector> out;
    std::vector<std::string> failures;
    for (const Routine& routine : listing.routines) {
        if (routine.instructions.empty())
            continue; // import thunk
        try {
            Cfg cfg = build_cfg(routine);
            out[routine.name] = compute_routine_metrics(routine, cfg, listing, table, opts);
        } catch (const std::exception& e) {
            failures.push_back(routine.name + ": " + e.what());
        }
    }
    if (!failures.empty()) {
        std::string msg = "metric computation failed for " +
                          std::to_string(failures.size()) + " routine(s):";
        for (const std::string& f : failures)
            msg += "\n  " + f;
        throw InvariantError(msg);
    }
    return out;
}

// ── CSV / TSV emission ───────────────────────────────────────────────────

inline std::string metrics_csv(const ProgramListing& listing,
                               const std::map<std::string, MetricVector>& metrics,
                               const std::vector<std::string>& filter = {},
                               char sep = ',') {
    std::vector<std::string> columns = filter.empty() ? metric_names() : filter;
    for (const std::string& name : columns)
        if (!is_metric_name(name))
            throw UsageError("unknown metric name: " + name);

    std::ostringstream out;
    out << "module" << sep << "routine" << sep << "entry";
    for (const std::string& name : columns)
        out << sep << name;
    out << "\n";
    for (const auto& [name, mv] : metrics) {
        const Routine* r = listing.find_routine(name);
        out << listing.module_name << sep << name << sep
            << hex_addr(r ? r->entry : 0);
        for (const std::string& col : columns)
            out << sep << format_g6(metric_value(mv, col));
        out << "\n";
    }
    return out.str();
}

} // namespace binmetrics

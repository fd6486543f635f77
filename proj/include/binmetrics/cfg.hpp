#pragma once

#include "binmetrics/listing.hpp"
#include "binmetrics/util.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace binmetrics {

// ── Graph model ──────────────────────────────────────────────────────────

struct BasicBlock {
    uint64_t head = 0; // address of the first instruction
    uint64_t end = 0;  // address of the last instruction
    std::optional<uint64_t> edge1;
    std::optional<uint64_t> edge2;
    int instr_count = 0;
    bool reachable = false;
    bool indirect_unknown = false; // ends in an indirect branch with no recorded targets

    bool operator==(const BasicBlock&) const = default;
};

struct Cfg {
    std::string routine_name;
    uint64_t entry = 0;
    std::vector<BasicBlock> nodes;                    // address order, full partition
    std::vector<std::pair<uint64_t, uint64_t>> edges; // outgoing slots (head -> head)
    std::set<uint64_t> predicate_nodes;               // cond-branch / indirect-branch enders

    bool operator==(const Cfg&) const = default;

    const BasicBlock* node_at(uint64_t head) const {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), head,
                                   [](const BasicBlock& b, uint64_t h) { return b.head < h; });
        if (it == nodes.end() || it->head != head)
            return nullptr;
        return &*it;
    }

    std::vector<uint64_t> successors(uint64_t head) const {
        std::vector<uint64_t> out;
        const BasicBlock* b = node_at(head);
        if (b) {
            if (b->edge1)
                out.push_back(*b->edge1);
            if (b->edge2)
                out.push_back(*b->edge2);
        }
        return out;
    }

    size_t reachable_count() const {
        size_t n = 0;
        for (const BasicBlock& b : nodes)
            n += b.reachable ? 1 : 0;
        return n;
    }
};

// Sentinel head for the virtual exit node that unifies multi-exit graphs.
constexpr uint64_t kVirtualExit = ~0ull;

// ── Routine -> CFG translation ───────────────────────────────────────────
//
// Blocks end exactly at a branch-family instruction (calls excluded) or
// immediately before a link target; concatenating the blocks in address
// order reproduces the instruction sequence once.

inline Cfg build_cfg(const Routine& routine) {
    if (routine.instructions.empty())
        throw InvariantError("routine " + routine.name + ": no instructions");

    const auto& insns = routine.instructions;
    constexpr ClassSet kBlockEnder = kCondBranch | kUncondBranch | kIndirectBranch | kRet;

    // Leaders: the entry, targets of control transfers, and the instruction
    // after each block ender. Fall-through links (including the ones calls
    // carry) never split a block.
    std::set<uint64_t> leaders;
    leaders.insert(insns.front().address);
    for (size_t i = 0; i < insns.size(); ++i) {
        const bool transfers = (insns[i].classes & kBlockEnder) != 0;
        const uint64_t next = i + 1 < insns.size() ? insns[i + 1].address : 0;
        for (uint64_t link : insns[i].links)
            if (transfers || link != next)
                leaders.insert(link);
        if ((insns[i].classes & kBlockEnder) && i + 1 < insns.size())
            leaders.insert(insns[i + 1].address);
    }

    Cfg cfg;
    cfg.routine_name = routine.name;
    cfg.entry = insns.front().address;

    size_t i = 0;
    while (i < insns.size()) {
        BasicBlock block;
        block.head = insns[i].address;
        size_t j = i;
        while (true) {
            block.end = insns[j].address;
            ++block.instr_count;
            const bool ender = (insns[j].classes & kBlockEnder) != 0;
            const bool next_is_leader =
                j + 1 < insns.size() && leaders.count(insns[j + 1].address) != 0;
            if (ender || next_is_leader || j + 1 == insns.size())
                break;
            ++j;
        }
        const Instruction& last = insns[j];
        if (!last.links.empty())
            block.edge1 = last.links[0];
        if (last.links.size() > 1)
            block.edge2 = last.links[1];
        if (last.classes & (kCondBranch | kIndirectBranch)) {
            cfg.predicate_nodes.insert(block.head);
            if ((last.classes & kIndirectBranch) && last.links.empty())
                block.indirect_unknown = true;
        }
        cfg.nodes.push_back(block);
        i = j + 1;
    }

    for (const BasicBlock& b : cfg.nodes) {
        if (b.edge1)
            cfg.edges.emplace_back(b.head, *b.edge1);
        if (b.edge2)
            cfg.edges.emplace_back(b.head, *b.edge2);
    }

    // Reachability from entry; unreachable blocks stay in the partition but
    // are skipped by the graph metrics.
    std::set<uint64_t> seen{cfg.entry};
    std::deque<uint64_t> work{cfg.entry};
    while (!work.empty()) {
        uint64_t head = work.front();
        work.pop_front();
        for (uint64_t succ : cfg.successors(head))
            if (seen.insert(succ).second)
                work.push_back(succ);
    }
    for (BasicBlock& b : cfg.nodes)
        b.reachable = seen.count(b.head) != 0;

    return cfg;
}

// ── Dominators ───────────────────────────────────────────────────────────

using DominatorMap = std::map<uint64_t, std::set<uint64_t>>;

namespace detail {

inline std::map<uint64_t, std::vector<uint64_t>> reachable_predecessors(const Cfg& cfg) {
    std::map<uint64_t, std::vector<uint64_t>> preds;
    for (const BasicBlock& b : cfg.nodes)
        if (b.reachable)
            preds[b.head]; // ensure entry exists
    for (const auto& [from, to] : cfg.edges) {
        const BasicBlock* src = cfg.node_at(from);
        if (src && src->reachable)
            preds[to].push_back(from);
    }
    return preds;
}

} // namespace detail

// Classic iterative dominance over the reachable subgraph: d dominates n iff
// every entry->n path passes through d. Unreachable nodes are excluded.
inline DominatorMap dominators(const Cfg& cfg) {
    auto preds = detail::reachable_predecessors(cfg);
    std::set<uint64_t> all;
    for (const auto& [head, _] : preds)
        all.insert(head);

    DominatorMap dom;
    for (uint64_t head : all)
        dom[head] = head == cfg.entry ? std::set<uint64_t>{cfg.entry} : all;

    bool changed = true;
    while (changed) {
        changed = false;
        for (uint64_t head : all) {
            if (head == cfg.entry)
                continue;
            std::set<uint64_t> next;
            bool first = true;
            for (uint64_t p : preds[head]) {
                if (first) {
                    next = dom[p];
                    first = false;
                } else {
                    std::set<uint64_t> merged;
                    std::set_intersection(next.begin(), next.end(), dom[p].begin(),
                                          dom[p].end(), std::inserter(merged, merged.end()));
                    next = std::move(merged);
                }
            }
            next.insert(head);
            if (next != dom[head]) {
                dom[head] = std::move(next);
                changed = true;
            }
        }
    }
    return dom;
}

// Post-dominator sets over the reversed graph, with kVirtualExit joined to
// every reachable zero-successor block. Nodes that cannot reach an exit
// (closed loops) get no entry.
inline DominatorMap post_dominators(const Cfg& cfg) {
    std::map<uint64_t, std::vector<uint64_t>> rpreds; // reversed-graph predecessors = successors
    std::set<uint64_t> nodes{kVirtualExit};
    for (const BasicBlock& b : cfg.nodes) {
        if (!b.reachable)
            continue;
        nodes.insert(b.head);
        auto succs = cfg.successors(b.head);
        if (succs.empty())
            succs.push_back(kVirtualExit);
        rpreds[b.head] = std::move(succs);
    }

    // Restrict to blocks that reach an exit.
    std::set<uint64_t> reaches{kVirtualExit};
    bool grew = true;
    while (grew) {
        grew = false;
        for (uint64_t n : nodes) {
            if (reaches.count(n))
                continue;
            for (uint64_t s : rpreds[n]) {
                if (reaches.count(s)) {
                    reaches.insert(n);
                    grew = true;
                    break;
                }
            }
        }
    }

    DominatorMap pdom;
    for (uint64_t n : reaches)
        pdom[n] = n == kVirtualExit ? std::set<uint64_t>{kVirtualExit} : reaches;

    bool changed = true;
    while (changed) {
        changed = false;
        for (uint64_t n : reaches) {
            if (n == kVirtualExit)
                continue;
            std::set<uint64_t> next;
            bool first = true;
            for (uint64_t s : rpreds[n]) {
                if (!reaches.count(s))
                    continue;
                if (first) {
                    next = pdom[s];
                    first = false;
                } else {
                    std::set<uint64_t> merged;
                    std::set_intersection(next.begin(), next.end(), pdom[s].begin(),
                                          pdom[s].end(), std::inserter(merged, merged.end()));
                    next = std::move(merged);
                }
            }
            next.insert(n);
            if (next != pdom[n]) {
                pdom[n] = std::move(next);
                changed = true;
            }
        }
    }
    return pdom;
}

// Immediate post-dominator per node: the strict post-dominator whose own set
// covers all the others (the sets form a chain).
inline std::map<uint64_t, uint64_t> immediate_post_dominators(const Cfg& cfg) {
    DominatorMap pdom = post_dominators(cfg);
    std::map<uint64_t, uint64_t> ipdom;
    for (const auto& [n, doms] : pdom) {
        if (n == kVirtualExit)
            continue;
        uint64_t best = kVirtualExit;
        size_t best_size = 0;
        for (uint64_t d : doms) {
            if (d == n)
                continue;
            size_t s = pdom[d].size();
            if (s >= best_size) {
                best_size = s;
                best = d;
            }
        }
        ipdom[n] = best;
    }
    return ipdom;
}

// ── Predicate nesting ────────────────────────────────────────────────────

// p_i: number of predicate nodes strictly dominating predicate node i.
inline std::map<uint64_t, int> predicate_nesting(const Cfg& cfg, const DominatorMap& dom) {
    std::map<uint64_t, int> nesting;
    for (uint64_t head : cfg.predicate_nodes) {
        auto it = dom.find(head);
        if (it == dom.end())
            continue; // unreachable predicate
        int level = 0;
        for (uint64_t d : it->second)
            if (d != head && cfg.predicate_nodes.count(d))
                ++level;
        nesting[head] = level;
    }
    return nesting;
}

inline std::map<uint64_t, int> predicate_nesting(const Cfg& cfg) {
    return predicate_nesting(cfg, dominators(cfg));
}

// ── Sphere of influence (Harrison & Magel node complexity) ──────────────

// c_i: instructions of predicate i plus instructions of every node lying on
// a path from i to (exclusive) its immediate post-dominator.
inline std::map<uint64_t, int> sphere_complexity(const Cfg& cfg,
                                                 const std::map<uint64_t, uint64_t>& ipdom) {
    std::map<uint64_t, int> sphere;
    for (uint64_t head : cfg.predicate_nodes) {
        const BasicBlock* b = cfg.node_at(head);
        if (!b || !b->reachable)
            continue;
        uint64_t stop = kVirtualExit;
        if (auto it = ipdom.find(head); it != ipdom.end())
            stop = it->second;
        std::set<uint64_t> visited{head, stop};
        std::deque<uint64_t> work;
        for (uint64_t s : cfg.successors(head))
            if (visited.insert(s).second)
                work.push_back(s);
        int total = b->instr_count;
        while (!work.empty()) {
            uint64_t n = work.front();
            work.pop_front();
            if (const BasicBlock* nb = cfg.node_at(n))
                total += nb->instr_count;
            for (uint64_t s : cfg.successors(n))
                if (visited.insert(s).second)
                    work.push_back(s);
        }
        sphere[head] = total;
    }
    return sphere;
}

inline std::map<uint64_t, int> sphere_complexity(const Cfg& cfg) {
    return sphere_complexity(cfg, immediate_post_dominators(cfg));
}

// ── DOT export ───────────────────────────────────────────────────────────

inline std::string cfg_to_dot(const Cfg& cfg) {
    std::ostringstream out;
    out << "digraph \"" << cfg.routine_name << "\" {\n";
    out << "  node [shape=box];\n";
    for (const BasicBlock& b : cfg.nodes) {
        out << "  \"" << hex_addr(b.head) << "\" [label=\"" << hex_addr(b.head) << "-"
            << hex_addr(b.end) << "\"";
        if (!b.reachable)
            out << " style=dotted";
        out << "];\n";
    }
    for (const auto& [from, to] : cfg.edges)
        out << "  \"" << hex_addr(from) << "\" -> \"" << hex_addr(to) << "\";\n";
    out << "}\n";
    return out.str();
}

} // namespace binmetrics

#pragma once

#include "binmetrics/cfg.hpp"
#include "binmetrics/listing.hpp"
#include "binmetrics/util.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace binmetrics {

// ── Trace model ──────────────────────────────────────────────────────────
//
// Trace file contract for external instrumentation exporters:
//   # id=<text> module=<text>
//   0x<hex>
//   ...
// Duplicates are preserved; later '#' lines are comments.

struct Trace {
    std::string test_case_id;
    std::string module_name;
    std::vector<uint64_t> block_heads; // file order, duplicates kept
};

inline Trace parse_trace_text(const std::string& content, const std::string& source) {
    Trace trace;
    std::istringstream in(content);
    std::string raw;
    int line_no = 0;
    bool saw_header = false;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty())
            continue;
        if (!saw_header) {
            if (line[0] != '#')
                throw ParseError(source + ":" + std::to_string(line_no) +
                                 ": missing '# id=<id> module=<module>' header");
            std::string id, module;
            for (const std::string& field : split_fields(std::string_view(line).substr(1))) {
                if (starts_with(field, "id="))
                    id = field.substr(3);
                else if (starts_with(field, "module="))
                    module = field.substr(7);
            }
            if (id.empty() || module.empty())
                throw ParseError(source + ":" + std::to_string(line_no) +
                                 ": header must carry id= and module=");
            trace.test_case_id = id;
            trace.module_name = module;
            saw_header = true;
            continue;
        }
        if (line[0] == '#')
            continue;
        uint64_t addr;
        if (!parse_u64(line, addr, 16))
            throw ParseError(source + ":" + std::to_string(line_no) +
                             ": bad block address '" + line + "'");
        trace.block_heads.push_back(addr);
    }
    if (!saw_header)
        throw ParseError(source + ": missing header");
    return trace;
}

inline Trace parse_trace(const std::string& path) {
    return parse_trace_text(read_file(path), path);
}

// ── Block index and coverage mapping ─────────────────────────────────────

struct Coverage {
    std::string test_case_id;
    std::map<std::string, std::set<uint64_t>> covered; // routine -> block heads
    int64_t unmatched = 0;

    int64_t covered_blocks() const {
        int64_t n = 0;
        for (const auto& [_, heads] : covered)
            n += static_cast<int64_t>(heads.size());
        return n;
    }
};

// Address-sorted block spans of a whole listing, for interior-tolerant
// trace address mapping.
struct BlockIndex {
    struct Span {
        uint64_t head, end;
        std::string routine;
    };
    std::vector<Span> spans; // sorted by head

    const Span* find(uint64_t addr) const {
        auto it = std::upper_bound(spans.begin(), spans.end(), addr,
                                   [](uint64_t a, const Span& s) { return a < s.head; });
        if (it == spans.begin())
            return nullptr;
        --it;
        return addr <= it->end ? &*it : nullptr;
    }
};

inline BlockIndex build_block_index(const ProgramListing& listing) {
    BlockIndex index;
    for (const Routine& r : listing.routines) {
        if (r.instructions.empty())
            continue;
        Cfg cfg = build_cfg(r);
        for (const BasicBlock& b : cfg.nodes)
            index.spans.push_back({b.head, b.end, r.name});
    }
    std::sort(index.spans.begin(), index.spans.end(),
              [](const BlockIndex::Span& a, const BlockIndex::Span& b) {
                  return a.head < b.head;
              });
    return index;
}

// Set-semantics coverage: any trace address inside a block marks that block
// covered once; addresses outside every known block are counted unmatched.
inline Coverage map_coverage(const Trace& trace, const ProgramListing& listing,
                             const BlockIndex& index) {
    if (trace.module_name != listing.module_name)
        throw ParseError("trace module '" + trace.module_name +
                         "' does not match listing module '" + listing.module_name + "'");
    Coverage cov;
    cov.test_case_id = trace.test_case_id;
    for (uint64_t addr : trace.block_heads) {
        const BlockIndex::Span* span = index.find(addr);
        if (span)
            cov.covered[span->routine].insert(span->head);
        else
            ++cov.unmatched;
    }
    return cov;
}

inline Coverage map_coverage(const Trace& trace, const ProgramListing& listing) {
    return map_coverage(trace, listing, build_block_index(listing));
}

} // namespace binmetrics

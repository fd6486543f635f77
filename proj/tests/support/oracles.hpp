// Test-only oracles and input generators. Everything here works on generated
// listing text and its own bookkeeping, independent of the library's parsing
// and metric code paths, so it can serve as a second opinion in properties
// and acceptance checks.
#pragma once

#include "binmetrics/cfg.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

using Rng = std::mt19937_64;

inline uint64_t pick(Rng& rng, uint64_t n) {
    return rng() % n;
}

// ── Generated routine bookkeeping ────────────────────────────────────────

struct GenInstr {
    uint64_t address = 0;
    std::string text;                  // canonical "mnemonic op, op"
    bool ends_block = false;           // cond/uncond branch or ret
    std::vector<uint64_t> jump_targets; // explicit transfer targets
};

struct GenRoutine {
    std::string name;
    uint64_t entry = 0;
    std::vector<GenInstr> instrs;
    int predicate_count = 0; // conditional branches emitted

    std::string to_listing_text(const std::string& module) const {
        std::ostringstream out;
        out << "listing " << module << " version 1\n";
        append_routine(out);
        return out.str();
    }

    void append_routine(std::ostringstream& out) const {
        char buf[32];
        std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(entry));
        out << "routine " << name << " @" << buf << "\n";
        for (const GenInstr& gi : instrs) {
            std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(gi.address));
            out << "  " << buf << ": " << gi.text << "\n";
        }
    }
};

inline std::string hex_of(uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
    return buf;
}

// ── Random routine generator (straight-line code + random valid branches) ─

inline GenRoutine random_routine(Rng& rng, int max_instrs, uint64_t base = 0x1000,
                                 const std::string& name = "gen") {
    const int n = 2 + static_cast<int>(pick(rng, static_cast<uint64_t>(max_instrs - 1)));

    // Kinds first so every address is known before targets are picked.
    // 0 assign, 1 cmp, 2 cond, 3 jmp, 4 call, 5 ret
    std::vector<int> kinds(static_cast<size_t>(n));
    for (int i = 0; i < n - 1; ++i) {
        switch (pick(rng, 10)) {
        case 0: kinds[i] = 2; break;
        case 1: kinds[i] = i > 0 && pick(rng, 2) == 0 ? 3 : 1; break;
        case 2: kinds[i] = 4; break;
        case 3: kinds[i] = pick(rng, 3) == 0 ? 5 : 0; break;
        default: kinds[i] = pick(rng, 4) == 0 ? 1 : 0; break;
        }
    }
    kinds[n - 1] = 5; // never fall off the end

    GenRoutine gen;
    gen.name = name;
    gen.entry = base;
    uint64_t addr = base;
    std::vector<uint64_t> addresses;
    for (int i = 0; i < n; ++i) {
        addresses.push_back(addr);
        addr += 1 + pick(rng, 3);
    }

    static const char* regs[] = {"eax", "ebx", "ecx", "edx", "esi", "edi"};
    static const char* mems[] = {"[ebp+8]", "[ebp+12]", "[ebp-4]", "[ebp-8]",
                                 "[eax]", "[0x403000]"};
    static const char* callees[] = {"helper", "strcpy", "process", "memcpy", "log_msg"};
    auto reg = [&] { return std::string(regs[pick(rng, 6)]); };
    auto operand = [&]() -> std::string {
        switch (pick(rng, 3)) {
        case 0: return reg();
        case 1: return std::to_string(pick(rng, 1000));
        default: return mems[pick(rng, 6)];
        }
    };
    auto target_of = [&](int self) {
        uint64_t t = addresses[pick(rng, static_cast<uint64_t>(n))];
        return t == addresses[static_cast<size_t>(self)] && self + 1 < n
                   ? addresses[static_cast<size_t>(self + 1)]
                   : t;
    };

    for (int i = 0; i < n; ++i) {
        GenInstr gi;
        gi.address = addresses[static_cast<size_t>(i)];
        switch (kinds[static_cast<size_t>(i)]) {
        case 0: {
            static const char* ops[] = {"mov", "add", "sub", "xor", "and", "lea"};
            gi.text = std::string(ops[pick(rng, 6)]) + " " + reg() + ", " + operand();
            break;
        }
        case 1:
            gi.text = std::string(pick(rng, 2) ? "cmp" : "test") + " " + operand() + ", " +
                      std::to_string(pick(rng, 100));
            break;
        case 2: {
            uint64_t t = target_of(i);
            gi.text = std::string(pick(rng, 2) ? "jz" : "jnz") + " " + hex_of(t);
            gi.ends_block = true;
            gi.jump_targets.push_back(t);
            ++gen.predicate_count;
            break;
        }
        case 3: {
            uint64_t t = target_of(i);
            gi.text = "jmp " + hex_of(t);
            gi.ends_block = true;
            gi.jump_targets.push_back(t);
            break;
        }
        case 4:
            gi.text = std::string("call ") + callees[pick(rng, 5)];
            break;
        default:
            gi.text = "ret";
            gi.ends_block = true;
            break;
        }
        gen.instrs.push_back(std::move(gi));
    }
    return gen;
}

// ── Structured routine generator (2-way predicates, single exit) ─────────

namespace detail {

struct Emitter {
    struct Line {
        std::string mnemonic_and_operands; // without target
        int target_slot = -1;              // index into instrs this jump goes to
        bool is_jump = false;
    };
    std::vector<Line> lines;
    int predicates = 0;

    size_t emit(std::string text) {
        lines.push_back({std::move(text), -1, false});
        return lines.size() - 1;
    }
    size_t emit_jump(const std::string& mnemonic) {
        lines.push_back({mnemonic, -1, true});
        return lines.size() - 1;
    }
    void patch(size_t jump_index, size_t target_index) {
        lines[jump_index].target_slot = static_cast<int>(target_index);
    }
};

inline void emit_statements(Emitter& em, Rng& rng, int count) {
    static const char* stmts[] = {"mov eax, 1",      "add ebx, eax", "xor ecx, ecx",
                                  "mov [ebp-4], eax", "inc edx",      "push esi"};
    for (int i = 0; i < count; ++i)
        em.emit(stmts[pick(rng, 6)]);
}

inline void emit_block(Emitter& em, Rng& rng, int depth) {
    const int items = 1 + static_cast<int>(pick(rng, 3));
    for (int i = 0; i < items; ++i) {
        const uint64_t kind = depth > 0 ? pick(rng, 4) : 3;
        if (kind == 0) { // if-then
            em.emit("cmp eax, 0");
            size_t j = em.emit_jump("jz");
            ++em.predicates;
            emit_statements(em, rng, 1 + static_cast<int>(pick(rng, 2)));
            if (pick(rng, 2))
                emit_block(em, rng, depth - 1);
            em.patch(j, em.lines.size());
        } else if (kind == 1) { // if-else
            em.emit("cmp ebx, 1");
            size_t to_else = em.emit_jump("jz");
            ++em.predicates;
            emit_statements(em, rng, 1 + static_cast<int>(pick(rng, 2)));
            size_t over_else = em.emit_jump("jmp");
            em.patch(to_else, em.lines.size());
            emit_statements(em, rng, 1 + static_cast<int>(pick(rng, 2)));
            em.patch(over_else, em.lines.size());
        } else if (kind == 2) { // while
            size_t head = em.lines.size();
            em.emit("cmp ecx, 10");
            size_t out = em.emit_jump("jz");
            ++em.predicates;
            emit_statements(em, rng, 1 + static_cast<int>(pick(rng, 2)));
            size_t back = em.emit_jump("jmp");
            em.patch(back, head);
            em.patch(out, em.lines.size());
        } else {
            emit_statements(em, rng, 1 + static_cast<int>(pick(rng, 3)));
        }
    }
}

} // namespace detail

inline GenRoutine structured_routine(Rng& rng, uint64_t base = 0x1000,
                                     const std::string& name = "structured") {
    detail::Emitter em;
    detail::emit_block(em, rng, 2);
    em.emit("ret");

    GenRoutine gen;
    gen.name = name;
    gen.entry = base;
    gen.predicate_count = em.predicates;
    for (size_t i = 0; i < em.lines.size(); ++i) {
        GenInstr gi;
        gi.address = base + i; // one-byte spacing keeps patch targets simple
        const auto& line = em.lines[i];
        if (line.target_slot >= 0) {
            uint64_t t = base + static_cast<uint64_t>(line.target_slot);
            gi.text = line.mnemonic_and_operands + " " + hex_of(t);
            gi.ends_block = true;
            gi.jump_targets.push_back(t);
        } else {
            gi.text = line.mnemonic_and_operands;
            gi.ends_block = line.mnemonic_and_operands == "ret";
        }
        gen.instrs.push_back(std::move(gi));
    }
    return gen;
}

// ── CFG partition checker ────────────────────────────────────────────────

// Verifies against the generator's own bookkeeping: the blocks tile the
// instruction sequence exactly once, every boundary is justified by a branch
// or a jump target, and every jump target is a block head.
inline std::string check_partition(const GenRoutine& gen, const binmetrics::Cfg& cfg) {
    std::set<uint64_t> jump_targets;
    for (const GenInstr& gi : gen.instrs)
        for (uint64_t t : gi.jump_targets)
            jump_targets.insert(t);

    size_t idx = 0;
    for (const binmetrics::BasicBlock& b : cfg.nodes) {
        if (idx >= gen.instrs.size())
            return "more blocks than instructions";
        if (b.head != gen.instrs[idx].address)
            return "gap or overlap before block " + hex_of(b.head);
        int count = 0;
        while (idx < gen.instrs.size() && gen.instrs[idx].address <= b.end) {
            ++count;
            ++idx;
        }
        if (count != b.instr_count)
            return "instr_count mismatch in block " + hex_of(b.head);
        if (gen.instrs[idx - 1].address != b.end)
            return "block end " + hex_of(b.end) + " is not an instruction";
        // Boundary justification (final instruction boundary is the routine end).
        if (idx < gen.instrs.size()) {
            const bool ender = gen.instrs[idx - 1].ends_block;
            const bool target = jump_targets.count(gen.instrs[idx].address) != 0;
            if (!ender && !target)
                return "unjustified boundary after " + hex_of(b.end);
        }
    }
    if (idx != gen.instrs.size())
        return "instructions left out of all blocks";
    for (uint64_t t : jump_targets)
        if (!cfg.node_at(t))
            return "jump target " + hex_of(t) + " is not a block head";
    return "";
}

// ── Brute-force Halstead tokenizer ───────────────────────────────────────

// Counts straight off the canonical text lines the generators emit:
// first word is the operator, the rest splits on ", ".
struct HalsteadOracle {
    long long total_operators = 0, total_operands = 0;
    long long unique_operators = 0, unique_operands = 0;
    double length = 0, calc_length = 0, volume = 0, difficulty = 0, effort = 0, bugs = 0;
};

inline HalsteadOracle halstead_oracle(const GenRoutine& gen) {
    HalsteadOracle h;
    std::set<std::string> ops, args;
    for (const GenInstr& gi : gen.instrs) {
        size_t sp = gi.text.find(' ');
        std::string mnemonic = sp == std::string::npos ? gi.text : gi.text.substr(0, sp);
        ++h.total_operators;
        ops.insert(mnemonic);
        if (sp != std::string::npos) {
            std::string rest = gi.text.substr(sp + 1);
            size_t start = 0;
            while (start <= rest.size()) {
                size_t comma = rest.find(", ", start);
                std::string tok = comma == std::string::npos ? rest.substr(start)
                                                             : rest.substr(start, comma - start);
                ++h.total_operands;
                args.insert(tok);
                if (comma == std::string::npos)
                    break;
                start = comma + 2;
            }
        }
    }
    h.unique_operators = static_cast<long long>(ops.size());
    h.unique_operands = static_cast<long long>(args.size());

    auto xlog2x = [](double x) { return x > 0 ? x * std::log2(x) : 0.0; };
    const double N = static_cast<double>(h.total_operators + h.total_operands);
    const double n = static_cast<double>(h.unique_operators + h.unique_operands);
    h.length = N;
    h.calc_length = xlog2x(static_cast<double>(h.unique_operators)) +
                    xlog2x(static_cast<double>(h.unique_operands));
    h.volume = n > 0 ? N * std::log2(n) : 0.0;
    h.difficulty = h.unique_operands > 0
                       ? (static_cast<double>(h.unique_operators) / 2.0) *
                             (static_cast<double>(h.total_operands) /
                              static_cast<double>(h.unique_operands))
                       : 0.0;
    h.effort = h.difficulty * h.volume;
    h.bugs = std::pow(h.effort, 2.0 / 3.0) / 3000.0;
    return h;
}

// ── Synthetic corpus for the methodology reproduction ────────────────────

struct CorpusApp {
    std::string module;
    std::string listing_text;
    std::string vulnerable_routine;
};

// One listing: mostly plain routines (some branch-heavy, benign calls only)
// plus exactly one "vulnerable" routine carrying banned calls and a wide
// operand vocabulary (above-median Halstead volume, few branches).
inline CorpusApp make_corpus_app(Rng& rng, int app_index, int routine_count) {
    CorpusApp app;
    app.module = "app" + std::to_string(app_index);
    std::ostringstream out;
    out << "listing " << app.module << " version 1\n";

    const int vuln_at = static_cast<int>(pick(rng, static_cast<uint64_t>(routine_count)));
    for (int k = 0; k < routine_count; ++k) {
        const uint64_t base = 0x10000ull * static_cast<uint64_t>(k + 1);
        if (k == vuln_at) {
            GenRoutine vuln;
            vuln.name = "vuln_" + std::to_string(k);
            vuln.entry = base;
            app.vulnerable_routine = vuln.name;
            uint64_t addr = base;
            auto put = [&](std::string text) {
                GenInstr gi;
                gi.address = addr++;
                gi.text = std::move(text);
                vuln.instrs.push_back(std::move(gi));
            };
            put("push ebp");
            put("mov ebp, esp");
            const int body = 45 + static_cast<int>(pick(rng, 15));
            static const char* ops[] = {"mov", "add", "sub", "xor", "lea", "and"};
            static const char* regs[] = {"eax", "ebx", "ecx", "edx", "esi", "edi"};
            for (int i = 0; i < body; ++i) {
                // fresh immediates and slots keep the operand vocabulary wide
                std::string dst = pick(rng, 3) == 0
                                      ? "[ebp-" + std::to_string(4 * (i % 16 + 1)) + "]"
                                      : regs[pick(rng, 6)];
                put(std::string(ops[pick(rng, 6)]) + " " + dst + ", " +
                    std::to_string(1000 + i * 7 + static_cast<int>(pick(rng, 5))));
            }
            // guarded unsafe calls, like real vulnerable handlers
            const bool two_calls = pick(rng, 2) != 0;
            put("cmp [ebp+8], 0");
            put("jz " + hex_of(addr + 4 + (two_calls ? 1 : 0)));
            put("lea eax, [ebp-8]");
            put("push eax");
            put("call strcpy");
            if (two_calls)
                put("call sprintf");
            put("mov esp, ebp");
            put("pop ebp");
            put("ret");
            vuln.append_routine(out);
        } else {
            // plain routine: narrow vocabulary, optional branchiness
            GenRoutine r;
            r.name = "sub_" + std::to_string(k);
            r.entry = base;
            const int stmts = 4 + static_cast<int>(pick(rng, 20));
            const int branches = static_cast<int>(pick(rng, 6)); // up to CC 6
            uint64_t addr = base;
            std::vector<std::string> texts;
            for (int i = 0; i < stmts; ++i) {
                static const char* pool[] = {"mov eax, ebx", "add eax, 1", "xor ecx, ecx",
                                             "mov edx, [ebp+8]", "sub ebx, eax"};
                texts.push_back(pool[pick(rng, 5)]);
            }
            for (int b = 0; b < branches; ++b)
                texts.push_back("__branch__");
            if (pick(rng, 3) == 0)
                texts.push_back("call helper");
            // place branches at random non-final positions
            for (size_t i = 0; i + 1 < texts.size(); ++i)
                if (pick(rng, 4) == 0)
                    std::swap(texts[i], texts[pick(rng, texts.size() - 1)]);
            texts.push_back("ret");
            std::vector<uint64_t> addresses;
            for (size_t i = 0; i < texts.size(); ++i)
                addresses.push_back(addr + i);
            for (size_t i = 0; i < texts.size(); ++i) {
                GenInstr gi;
                gi.address = addresses[i];
                if (texts[i] == "__branch__") {
                    uint64_t t = addresses[pick(rng, addresses.size())];
                    if (t == addresses[i])
                        t = addresses[i + 1];
                    gi.text = "jnz " + hex_of(t);
                } else {
                    gi.text = texts[i];
                }
                r.instrs.push_back(std::move(gi));
            }
            r.append_routine(out);
        }
    }
    app.listing_text = out.str();
    return app;
}

} // namespace oracle

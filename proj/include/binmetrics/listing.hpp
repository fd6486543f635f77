#pragma once

#include "binmetrics/util.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace binmetrics {

// ── Instruction model ────────────────────────────────────────────────────

enum class OperandKind { Register, Immediate, Memory, CodeTarget };

struct Operand {
    OperandKind kind = OperandKind::Immediate;
    std::string token;            // canonical: lowercase, no blanks, memory bracketed
    std::optional<int64_t> value; // immediates and resolved targets

    bool operator==(const Operand&) const = default;
};

enum InsnClass : unsigned {
    kCondBranch = 1u << 0,
    kUncondBranch = 1u << 1,
    kIndirectBranch = 1u << 2,
    kCall = 1u << 3,
    kRet = 1u << 4,
    kAssignment = 1u << 5,
    kCompare = 1u << 6,
    kOther = 1u << 7,
};

using ClassSet = unsigned;

constexpr ClassSet kBranchFamily =
    kCondBranch | kUncondBranch | kIndirectBranch | kCall | kRet;

struct Instruction {
    uint64_t address = 0; // module-relative byte offset
    std::string mnemonic; // lowercase
    std::vector<Operand> operands;
    ClassSet classes = 0;
    std::vector<uint64_t> links; // in-routine control-flow successors, call targets excluded

    bool operator==(const Instruction&) const = default;
};

struct Routine {
    std::string name;
    uint64_t entry = 0;
    bool is_import = false;
    std::vector<Instruction> instructions; // strictly ascending by address
    std::vector<std::string> callees;      // one entry per resolved call site, in address order

    bool operator==(const Routine&) const = default;

    const Instruction* instruction_at(uint64_t addr) const {
        auto it = std::lower_bound(instructions.begin(), instructions.end(), addr,
                                   [](const Instruction& i, uint64_t a) { return i.address < a; });
        if (it == instructions.end() || it->address != addr)
            return nullptr;
        return &*it;
    }
};

struct ProgramListing {
    std::string module_name;
    uint64_t image_base = 0;
    int format_version = 1;
    std::vector<Routine> routines;

    bool operator==(const ProgramListing&) const = default;

    const Routine* find_routine(const std::string& name) const {
        for (const Routine& r : routines)
            if (r.name == name)
                return &r;
        return nullptr;
    }

    const Routine* routine_at_entry(uint64_t addr) const {
        for (const Routine& r : routines)
            if (r.entry == addr)
                return &r;
        return nullptr;
    }
};

// ── Registers and token shapes ───────────────────────────────────────────

inline bool is_register_token(std::string_view t) {
    static const std::set<std::string, std::less<>> regs = {
        "eax", "ebx", "ecx", "edx", "esi", "edi", "ebp", "esp",
        "ax",  "bx",  "cx",  "dx",  "si",  "di",  "bp",  "sp",
        "al",  "ah",  "bl",  "bh",  "cl",  "ch",  "dl",  "dh",
        "cs",  "ds",  "es",  "fs",  "gs",  "ss",
    };
    return regs.find(t) != regs.end();
}

inline bool is_integer_token(std::string_view t) {
    int64_t v;
    return parse_i64(t, v);
}

// Memory token whose bracketed payload is a bare integer: an absolute
// data address, the basis of the Global count and of global read/write sets.
inline bool is_global_token(std::string_view t) {
    if (t.size() < 3 || t.front() != '[' || t.back() != ']')
        return false;
    return is_integer_token(t.substr(1, t.size() - 2));
}

inline bool is_memory_token(std::string_view t) {
    return t.size() >= 2 && t.front() == '[' && t.back() == ']';
}

// [ebp+N] / [esp+N] / [ebp] ... — frame or stack relative slot.
inline bool is_stack_slot_token(std::string_view t) {
    if (!is_memory_token(t))
        return false;
    std::string_view inner = t.substr(1, t.size() - 2);
    return starts_with(inner, "ebp") || starts_with(inner, "esp");
}

// [ebp+N] with N > 0: an argument slot of a frame-pointer routine.
inline bool is_arg_slot_token(std::string_view t) {
    if (!is_memory_token(t))
        return false;
    std::string_view inner = t.substr(1, t.size() - 2);
    if (!starts_with(inner, "ebp+"))
        return false;
    uint64_t off;
    return parse_u64(inner.substr(4), off) && off > 0;
}

// [ebp-N]: a local variable slot.
inline bool is_local_slot_token(std::string_view t) {
    if (!is_memory_token(t))
        return false;
    std::string_view inner = t.substr(1, t.size() - 2);
    if (!starts_with(inner, "ebp-"))
        return false;
    uint64_t off;
    return parse_u64(inner.substr(4), off) && off > 0;
}

inline bool is_return_register_token(std::string_view t) {
    return t == "eax" || t == "ax" || t == "al" || t == "ah";
}

// ── Mnemonic classification ──────────────────────────────────────────────
//
// Fixed table: mov/lea/arithmetic/logic/push/pop -> assignment, cmp/test ->
// compare, jcc -> cond-branch, jmp imm -> uncond-branch, jmp reg/mem ->
// indirect-branch, call/ret their own class. Unknown mnemonics -> other.

inline bool is_cond_branch_mnemonic(std::string_view m) {
    static const std::set<std::string, std::less<>> cc = {
        "ja",  "jae",  "jb",  "jbe",  "jc",   "jcxz", "jecxz", "je",   "jg",
        "jge", "jl",   "jle", "jna",  "jnae", "jnb",  "jnbe",  "jnc",  "jne",
        "jng", "jnge", "jnl", "jnle", "jno",  "jnp",  "jns",   "jnz",  "jo",
        "jp",  "jpe",  "jpo", "js",   "jz",   "loop", "loope", "loopne",
        "loopnz", "loopz",
    };
    return cc.find(m) != cc.end();
}

inline bool is_assignment_mnemonic(std::string_view m) {
    static const std::set<std::string, std::less<>> assign = {
        "mov",   "movzx", "movsx", "lea",   "push",  "pop",   "add",   "sub",
        "adc",   "sbb",   "inc",   "dec",   "neg",   "not",   "and",   "or",
        "xor",   "shl",   "shr",   "sal",   "sar",   "rol",   "ror",   "rcl",
        "rcr",   "imul",  "mul",   "idiv",  "div",   "xchg",  "cdq",   "cbw",
        "cwd",   "cwde",  "bswap", "leave", "enter", "movsb", "movsw", "movsd",
        "stosb", "stosw", "stosd", "lodsb", "lodsw", "lodsd", "xadd",  "bt",
        "bts",   "btr",   "btc",   "shld",  "shrd",
    };
    if (assign.find(m) != assign.end())
        return true;
    return starts_with(m, "set") && m.size() > 3; // setz, setne, ...
}

inline bool is_compare_mnemonic(std::string_view m) {
    static const std::set<std::string, std::less<>> cmp = {
        "cmp", "test", "cmpsb", "cmpsw", "cmpsd", "scasb", "scasw", "scasd",
    };
    return cmp.find(m) != cmp.end();
}

inline bool is_ret_mnemonic(std::string_view m) {
    return m == "ret" || m == "retn" || m == "retf" || m == "iret" || m == "iretd";
}

inline bool is_known_mnemonic(std::string_view m) {
    static const std::set<std::string, std::less<>> other = {
        "nop", "int", "int3", "hlt", "cld", "std", "stc", "clc",
        "sahf", "lahf", "wait", "pause", "cpuid", "rep", "repe", "repne",
    };
    return m == "jmp" || m == "call" || is_cond_branch_mnemonic(m) ||
           is_assignment_mnemonic(m) || is_compare_mnemonic(m) ||
           is_ret_mnemonic(m) || other.find(m) != other.end();
}

// Deterministic, total: every mnemonic maps to exactly one class.
inline ClassSet classify(std::string_view mnemonic, const std::vector<Operand>& operands) {
    if (is_cond_branch_mnemonic(mnemonic))
        return kCondBranch;
    if (mnemonic == "jmp") {
        if (!operands.empty() && (operands[0].kind == OperandKind::Register ||
                                  operands[0].kind == OperandKind::Memory))
            return kIndirectBranch;
        return kUncondBranch;
    }
    if (mnemonic == "call")
        return kCall;
    if (is_ret_mnemonic(mnemonic))
        return kRet;
    if (is_compare_mnemonic(mnemonic))
        return kCompare;
    if (is_assignment_mnemonic(mnemonic))
        return kAssignment;
    return kOther;
}

// ── Operand parsing ──────────────────────────────────────────────────────

// Canonical token: lowercase, all whitespace removed, size prefixes
// ("dword ptr" etc.) dropped from memory operands.
inline std::string canonical_operand_token(std::string_view raw) {
    std::string s = to_lower(trim(raw));
    for (std::string_view pfx : {"byte ptr", "word ptr", "dword ptr", "qword ptr"}) {
        if (starts_with(s, pfx)) {
            s = trim(std::string_view(s).substr(pfx.size()));
            break;
        }
    }
    std::string out;
    out.reserve(s.size());
    for (char c : s)
        if (!std::isspace(static_cast<unsigned char>(c)))
            out += c;
    return out;
}

// `transfer_target` marks branch/call operand position, where a bare number
// or symbol names a destination rather than data.
inline Operand parse_operand(std::string_view raw, bool transfer_target) {
    Operand op;
    op.token = canonical_operand_token(raw);
    if (op.token.empty())
        throw ParseError("empty operand token");
    if (is_memory_token(op.token)) {
        op.kind = OperandKind::Memory;
        return op;
    }
    if (is_register_token(op.token)) {
        op.kind = OperandKind::Register;
        return op;
    }
    int64_t v;
    if (parse_i64(op.token, v)) {
        if (transfer_target) {
            op.kind = OperandKind::CodeTarget;
            op.token = hex_addr(static_cast<uint64_t>(v));
        } else {
            op.kind = OperandKind::Immediate;
        }
        op.value = v;
        return op;
    }
    // Bare symbol: a named transfer target (call strcpy) or a named data
    // reference. Named targets resolve to entry addresses at listing scope.
    op.kind = transfer_target ? OperandKind::CodeTarget : OperandKind::Memory;
    return op;
}

inline bool is_transfer_mnemonic(std::string_view m) {
    return m == "jmp" || m == "call" || is_cond_branch_mnemonic(m);
}

// ── Link computation and validation ──────────────────────────────────────

namespace detail {

inline std::optional<uint64_t> branch_target(const Instruction& insn) {
    if (insn.operands.size() == 1 && insn.operands[0].kind == OperandKind::CodeTarget &&
        insn.operands[0].value)
        return static_cast<uint64_t>(*insn.operands[0].value);
    return std::nullopt;
}

} // namespace detail

// Fills links per the fixed rules: cond-branch gets target + fall-through,
// uncond-branch gets its target, ret and indirect get none, everything else
// falls through. Targets outside the routine are control-flow exits, not
// links. A fall-through past the last instruction is a routine exit.
inline void compute_links(Routine& routine) {
    const size_t count = routine.instructions.size();
    for (size_t i = 0; i < count; ++i) {
        Instruction& insn = routine.instructions[i];
        if (!insn.links.empty())
            continue; // explicit links= override wins
        const bool has_next = i + 1 < count;
        const uint64_t next = has_next ? routine.instructions[i + 1].address : 0;
        auto in_routine = [&](uint64_t a) { return routine.instruction_at(a) != nullptr; };
        if (insn.classes & kCondBranch) {
            auto target = detail::branch_target(insn);
            if (target && in_routine(*target))
                insn.links.push_back(*target);
            if (has_next)
                insn.links.push_back(next);
        } else if (insn.classes & kUncondBranch) {
            auto target = detail::branch_target(insn);
            if (target && in_routine(*target))
                insn.links.push_back(*target);
        } else if (insn.classes & (kIndirectBranch | kRet)) {
            // no recorded successors
        } else if (has_next) {
            insn.links.push_back(next);
        }
    }
}

// Enforces the per-routine invariants. Throws InvariantError naming the
// routine on the first violation.
inline void validate_routine(const Routine& routine) {
    if (routine.instructions.empty()) {
        if (routine.is_import)
            return;
        throw InvariantError("routine " + routine.name + ": no instructions");
    }
    if (routine.entry != routine.instructions.front().address)
        throw InvariantError("routine " + routine.name +
                             ": entry does not match first instruction address");
    uint64_t prev = 0;
    bool first = true;
    for (const Instruction& insn : routine.instructions) {
        if (!first && insn.address <= prev)
            throw InvariantError("routine " + routine.name + ": duplicate address " +
                                 hex_addr(insn.address));
        prev = insn.address;
        first = false;

        unsigned branch_bits = 0;
        for (unsigned bit : {kCondBranch, kUncondBranch, kIndirectBranch, kCall, kRet})
            if (insn.classes & bit)
                ++branch_bits;
        if (branch_bits > 1)
            throw InvariantError("routine " + routine.name + ": instruction " +
                                 hex_addr(insn.address) + " carries two branch-family classes");
        if (insn.links.size() > 2)
            throw InvariantError("routine " + routine.name + ": instruction " +
                                 hex_addr(insn.address) +
                                 " has more than two links; blocks carry two edge slots");
        for (uint64_t link : insn.links) {
            if (!routine.instruction_at(link))
                throw InvariantError("routine " + routine.name + ": dangling link " +
                                     hex_addr(link) + " from " + hex_addr(insn.address));
        }
    }
}

// Callee names, one per call site: named targets as written, numeric targets
// resolved against routine entries, unresolved numerics kept as hex tokens.
inline void resolve_callees(ProgramListing& listing) {
    for (Routine& r : listing.routines) {
        r.callees.clear();
        for (const Instruction& insn : r.instructions) {
            if (!(insn.classes & kCall) || insn.operands.empty())
                continue;
            const Operand& target = insn.operands[0];
            if (target.kind == OperandKind::CodeTarget) {
                if (target.value) {
                    const Routine* callee =
                        listing.routine_at_entry(static_cast<uint64_t>(*target.value));
                    r.callees.push_back(callee ? callee->name : target.token);
                } else {
                    r.callees.push_back(target.token);
                }
            }
            // register/memory call targets stay unresolved
        }
    }
}

inline void validate_listing(const ProgramListing& listing) {
    std::set<std::string> names;
    std::vector<std::pair<uint64_t, uint64_t>> spans;
    for (const Routine& r : listing.routines) {
        if (!names.insert(r.name).second)
            throw InvariantError("duplicate routine name: " + r.name);
        validate_routine(r);
        if (!r.instructions.empty())
            spans.emplace_back(r.instructions.front().address,
                               r.instructions.back().address);
    }
    std::sort(spans.begin(), spans.end());
    for (size_t i = 1; i < spans.size(); ++i)
        if (spans[i].first <= spans[i - 1].second)
            throw InvariantError("routine address ranges overlap at " +
                                 hex_addr(spans[i].first));
}

} // namespace binmetrics

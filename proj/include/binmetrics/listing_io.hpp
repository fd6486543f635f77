#pragma once

#include "binmetrics/listing.hpp"
#include "binmetrics/util.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace binmetrics {

constexpr int kListingFormatVersion = 1;

struct LoadReport {
    std::vector<std::string> unknown_mnemonics; // reported once per load, sorted
};

// ── Class-name mapping (JSON variant) ────────────────────────────────────

inline const std::vector<std::pair<std::string, InsnClass>>& class_name_table() {
    static const std::vector<std::pair<std::string, InsnClass>> table = {
        {"cond-branch", kCondBranch},   {"uncond-branch", kUncondBranch},
        {"indirect-branch", kIndirectBranch}, {"call", kCall},
        {"ret", kRet},                  {"assignment", kAssignment},
        {"compare", kCompare},          {"other", kOther},
    };
    return table;
}

inline InsnClass class_from_name(const std::string& name) {
    for (const auto& [n, c] : class_name_table())
        if (n == name)
            return c;
    throw ParseError("unknown instruction class: " + name);
}

inline std::vector<std::string> class_names(ClassSet classes) {
    std::vector<std::string> out;
    for (const auto& [n, c] : class_name_table())
        if (classes & c)
            out.push_back(n);
    return out;
}

// ── Finalization ─────────────────────────────────────────────────────────

namespace detail {

// Named transfer targets pick up entry addresses of same-named routines.
inline void resolve_named_targets(ProgramListing& listing) {
    std::map<std::string, uint64_t> entries;
    for (const Routine& r : listing.routines)
        entries[r.name] = r.entry;
    for (Routine& r : listing.routines) {
        for (Instruction& insn : r.instructions) {
            for (Operand& op : insn.operands) {
                if (op.kind == OperandKind::CodeTarget && !op.value) {
                    auto it = entries.find(op.token);
                    if (it != entries.end())
                        op.value = static_cast<int64_t>(it->second);
                }
            }
        }
    }
}

inline void collect_unknown_mnemonics(const ProgramListing& listing, LoadReport* report) {
    if (!report)
        return;
    std::set<std::string> seen;
    for (const Routine& r : listing.routines)
        for (const Instruction& insn : r.instructions)
            if (!is_known_mnemonic(insn.mnemonic))
                seen.insert(insn.mnemonic);
    report->unknown_mnemonics.assign(seen.begin(), seen.end());
}

} // namespace detail

// Classes from the table where absent, named-target resolution, link
// computation, invariant checks, callee resolution. Shared by both formats.
inline void finalize_listing(ProgramListing& listing, LoadReport* report = nullptr) {
    for (Routine& r : listing.routines)
        for (Instruction& insn : r.instructions)
            if (insn.classes == 0)
                insn.classes = classify(insn.mnemonic, insn.operands);
    detail::resolve_named_targets(listing);
    for (Routine& r : listing.routines)
        compute_links(r);
    validate_listing(listing);
    resolve_callees(listing);
    detail::collect_unknown_mnemonics(listing, report);
}

// ── Text format ──────────────────────────────────────────────────────────
//
//   listing <module> version <n> [base <hex>]
//   routine <name> @<hex-entry> [import]
//   <hex-address>: <mnemonic> [<operand>{, <operand>}] [; links=<hex>{,<hex>}]
//
// '#' begins a whole-line comment; a ';' suffix not carrying links= is
// ignored as a trailing comment.

namespace detail {

// Split on top-level commas only; memory brackets may not nest commas out.
inline std::vector<std::string> split_operands(std::string_view s) {
    std::vector<std::string> out;
    int depth = 0;
    size_t start = 0;
    for (size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || (s[i] == ',' && depth == 0)) {
            out.emplace_back(trim(s.substr(start, i - start)));
            start = i + 1;
        } else if (s[i] == '[') {
            ++depth;
        } else if (s[i] == ']') {
            --depth;
        }
    }
    if (out.size() == 1 && out[0].empty())
        out.clear();
    return out;
}

inline std::string locate(const std::string& source, int line) {
    return source + ":" + std::to_string(line);
}

} // namespace detail

inline ProgramListing parse_listing_text(const std::string& content,
                                         const std::string& source_name,
                                         LoadReport* report = nullptr) {
    ProgramListing listing;
    Routine* current = nullptr;
    bool saw_header = false;
    int line_no = 0;

    std::istringstream in(content);
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#')
            continue;

        if (!saw_header) {
            auto fields = split_fields(line);
            if (fields.size() < 4 || fields[0] != "listing" || fields[2] != "version")
                throw ParseError(detail::locate(source_name, line_no) +
                                 ": expected 'listing <module> version <n>' header");
            listing.module_name = fields[1];
            uint64_t version;
            if (!parse_u64(fields[3], version))
                throw ParseError(detail::locate(source_name, line_no) + ": bad version");
            listing.format_version = static_cast<int>(version);
            if (listing.format_version != kListingFormatVersion)
                throw ParseError(detail::locate(source_name, line_no) +
                                 ": unsupported format_version " + fields[3]);
            if (fields.size() >= 6 && fields[4] == "base") {
                if (!parse_u64(fields[5], listing.image_base, 16))
                    throw ParseError(detail::locate(source_name, line_no) + ": bad base");
            }
            saw_header = true;
            continue;
        }

        if (starts_with(line, "routine ")) {
            auto fields = split_fields(line);
            if (fields.size() < 3 || fields[2].empty() || fields[2][0] != '@')
                throw ParseError(detail::locate(source_name, line_no) +
                                 ": expected 'routine <name> @<hex-entry>'");
            Routine r;
            r.name = fields[1];
            if (!parse_u64(std::string_view(fields[2]).substr(1), r.entry, 16))
                throw ParseError(detail::locate(source_name, line_no) + ": bad entry address");
            r.is_import = fields.size() > 3 && fields[3] == "import";
            listing.routines.push_back(std::move(r));
            current = &listing.routines.back();
            continue;
        }

        if (!current)
            throw ParseError(detail::locate(source_name, line_no) +
                             ": instruction record outside a routine");

        // <hex>: <mnemonic> [operands] [; links=...]
        size_t colon = line.find(':');
        if (colon == std::string::npos)
            throw ParseError(detail::locate(source_name, line_no) + ": missing ':' after address");
        Instruction insn;
        if (!parse_u64(trim(std::string_view(line).substr(0, colon)), insn.address, 16))
            throw ParseError(detail::locate(source_name, line_no) + ": bad instruction address");

        std::string rest = trim(std::string_view(line).substr(colon + 1));
        std::string suffix;
        size_t semi = rest.find(';');
        if (semi != std::string::npos) {
            suffix = trim(std::string_view(rest).substr(semi + 1));
            rest = trim(std::string_view(rest).substr(0, semi));
        }
        if (rest.empty())
            throw ParseError(detail::locate(source_name, line_no) + ": missing mnemonic");

        size_t blank = rest.find_first_of(" \t");
        insn.mnemonic = to_lower(blank == std::string::npos ? rest : rest.substr(0, blank));
        if (blank != std::string::npos) {
            const bool transfer = is_transfer_mnemonic(insn.mnemonic);
            for (const std::string& tok :
                 detail::split_operands(std::string_view(rest).substr(blank + 1))) {
                try {
                    insn.operands.push_back(parse_operand(tok, transfer));
                } catch (const ParseError& e) {
                    throw ParseError(detail::locate(source_name, line_no) + ": " + e.what());
                }
            }
        }

        if (starts_with(suffix, "links=")) {
            for (const std::string& tok : split(std::string_view(suffix).substr(6), ',')) {
                uint64_t link;
                if (!parse_u64(trim(tok), link, 16))
                    throw ParseError(detail::locate(source_name, line_no) + ": bad link address");
                insn.links.push_back(link);
            }
        }
        current->instructions.push_back(std::move(insn));
    }

    if (!saw_header)
        throw ParseError(source_name + ": empty file, missing listing header");
    finalize_listing(listing, report);
    return listing;
}

// ── JSON machine-oriented variant ────────────────────────────────────────

inline ProgramListing parse_listing_json(const std::string& content,
                                         const std::string& source_name,
                                         LoadReport* report = nullptr) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(content);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(source_name + ": " + e.what());
    }
    try {
        ProgramListing listing;
        listing.format_version = doc.at("format_version").get<int>();
        if (listing.format_version != kListingFormatVersion)
            throw ParseError(source_name + ": unsupported format_version " +
                             std::to_string(listing.format_version));
        listing.module_name = doc.at("module_name").get<std::string>();
        listing.image_base = doc.value("image_base", 0ull);
        for (const auto& rj : doc.value("routines", nlohmann::json::array())) {
            Routine r;
            r.name = rj.at("name").get<std::string>();
            r.entry = rj.at("entry").get<uint64_t>();
            r.is_import = rj.value("is_import", false);
            for (const auto& ij : rj.value("instructions", nlohmann::json::array())) {
                Instruction insn;
                insn.address = ij.at("address").get<uint64_t>();
                insn.mnemonic = to_lower(ij.at("mnemonic").get<std::string>());
                const bool transfer = is_transfer_mnemonic(insn.mnemonic);
                for (const auto& oj : ij.value("operands", nlohmann::json::array()))
                    insn.operands.push_back(parse_operand(oj.get<std::string>(), transfer));
                for (const auto& cj : ij.value("classes", nlohmann::json::array()))
                    insn.classes |= class_from_name(cj.get<std::string>());
                for (const auto& lj : ij.value("links", nlohmann::json::array()))
                    insn.links.push_back(lj.get<uint64_t>());
                r.instructions.push_back(std::move(insn));
            }
            listing.routines.push_back(std::move(r));
        }
        finalize_listing(listing, report);
        return listing;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(source_name + ": " + e.what());
    }
}

inline ProgramListing parse_listing(const std::string& content,
                                    const std::string& source_name,
                                    LoadReport* report = nullptr) {
    size_t first = content.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && content[first] == '{')
        return parse_listing_json(content, source_name, report);
    return parse_listing_text(content, source_name, report);
}

inline ProgramListing load_listing(const std::string& path, LoadReport* report = nullptr) {
    return parse_listing(read_file(path), path, report);
}

// ── Serialization (text form) ────────────────────────────────────────────

inline std::string listing_to_text(const ProgramListing& listing) {
    std::ostringstream out;
    out << "listing " << listing.module_name << " version " << listing.format_version;
    if (listing.image_base != 0)
        out << " base " << hex_addr(listing.image_base);
    out << "\n";
    for (const Routine& r : listing.routines) {
        out << "routine " << r.name << " @" << hex_addr(r.entry)
            << (r.is_import ? " import" : "") << "\n";
        // Links are emitted only where they differ from what compute_links
        // would rebuild, so a reload reproduces the same structure.
        Routine recomputed = r;
        for (Instruction& insn : recomputed.instructions)
            insn.links.clear();
        compute_links(recomputed);
        for (size_t i = 0; i < r.instructions.size(); ++i) {
            const Instruction& insn = r.instructions[i];
            out << "  " << hex_addr(insn.address) << ": " << insn.mnemonic;
            for (size_t k = 0; k < insn.operands.size(); ++k)
                out << (k == 0 ? " " : ", ") << insn.operands[k].token;
            if (insn.links != recomputed.instructions[i].links) {
                out << " ; links=";
                for (size_t k = 0; k < insn.links.size(); ++k)
                    out << (k == 0 ? "" : ",") << hex_addr(insn.links[k]);
            }
            out << "\n";
        }
    }
    return out.str();
}

inline void save_listing(const ProgramListing& listing, const std::string& path) {
    write_file(path, listing_to_text(listing));
}

} // namespace binmetrics

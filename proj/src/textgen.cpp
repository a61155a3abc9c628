#include "tai/textgen.hpp"

#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tai/diagnostics.hpp"
#include "tai/error.hpp"
#include "tai/internal/text_files.hpp"

namespace tai {

using nlohmann::json;

namespace {

constexpr std::string_view kPlaceholder = "{}";

std::string format_id(std::string_view prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu", i);
    return std::string(prefix) + buf;
}

// Code points, not bytes: a multi-byte label name should not count extra.
std::size_t utf8_length(std::string_view s) {
    std::size_t n = 0;
    for (unsigned char c : s)
        if ((c & 0xC0) != 0x80) ++n;
    return n;
}

bool is_blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

}  // namespace

TemplateId parse_template_id(std::string_view name) {
    if (name == "instruction_1" || name == "instruction-1") return TemplateId::instruction_1;
    if (name == "instruction_2" || name == "instruction-2") return TemplateId::instruction_2;
    if (name == "prompt_set" || name == "prompt-set" || name == "prompt") return TemplateId::prompt_set;
    throw Error(ErrorCode::invalid_config, "unknown template '" + std::string(name) + "'");
}

std::string_view template_id_name(TemplateId id) {
    switch (id) {
        case TemplateId::instruction_1: return "instruction_1";
        case TemplateId::instruction_2: return "instruction_2";
        case TemplateId::prompt_set: return "prompt_set";
    }
    return "unknown";
}

const InstructionTemplate& builtin_template(TemplateId id) {
    static const InstructionTemplate inst1{
        TemplateId::instruction_1, {{"Please briefly caption an image that contains {}.", false}}};
    static const InstructionTemplate inst2{
        TemplateId::instruction_2, {{"Please organize the words {} into a sentence to describe an image.", false}}};
    static const InstructionTemplate prompts{TemplateId::prompt_set,
                                             {
                                                 {"there are {} in the photo.", false},
                                                 // Our own paraphrases of the line above.
                                                 {"a photo of {}.", true},
                                                 {"a picture showing {}.", true},
                                                 {"an image that contains {}.", true},
                                                 {"this photo shows {}.", true},
                                                 {"a snapshot with {} in it.", true},
                                                 {"{} can be seen in this picture.", true},
                                                 {"a scene with {}.", true},
                                             }};
    switch (id) {
        case TemplateId::instruction_1: return inst1;
        case TemplateId::instruction_2: return inst2;
        case TemplateId::prompt_set: return prompts;
    }
    throw Error(ErrorCode::invalid_config, "unknown template id");
}

void validate_pattern(std::string_view pattern) {
    const auto first = pattern.find(kPlaceholder);
    if (first == std::string_view::npos || pattern.find(kPlaceholder, first + 1) != std::string_view::npos)
        throw Error(ErrorCode::invalid_config,
                    "pattern must contain exactly one {} placeholder: '" + std::string(pattern) + "'");
}

std::vector<std::string> builtin_prompt_patterns() {
    std::vector<std::string> out;
    for (const auto& p : builtin_template(TemplateId::prompt_set).patterns) out.push_back(p.pattern);
    return out;
}

std::vector<std::string> read_prompt_patterns(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (is_blank(line) || line.front() == '#') continue;
        validate_pattern(line);
        out.push_back(line);
    }
    if (out.empty()) throw Error(ErrorCode::empty_input, path.string() + ": no prompt patterns");
    return out;
}

Annotation sample_combination(RandomSource& rng, const LabelVocab& vocab, std::size_t min_k, std::size_t max_k) {
    if (min_k < 1)
        throw Error(ErrorCode::invalid_config, "combination size must be at least 1");
    return multi_hot_from_indices(sample_subset(rng, vocab.size(), min_k, max_k), vocab.size());
}

std::string join_labels(std::span<const std::string> names) {
    if (names.empty()) throw Error(ErrorCode::invalid_config, "cannot render an empty label combination");
    std::string out = names[0];
    for (std::size_t i = 1; i < names.size(); ++i) {
        out += i + 1 == names.size() ? " and " : ", ";
        out += names[i];
    }
    return out;
}

std::string render_text(std::string_view pattern, const Annotation& combination, const LabelVocab& vocab) {
    validate_pattern(pattern);
    if (combination.size() != vocab.size())
        throw Error(ErrorCode::length_mismatch, "combination length differs from the vocabulary size");
    std::vector<std::string> names;
    for (auto i : positive_indices(combination)) names.push_back(vocab.name(i));
    const auto at = pattern.find(kPlaceholder);
    std::string out(pattern.substr(0, at));
    out += join_labels(names);
    out += pattern.substr(at + kPlaceholder.size());
    return out;
}

std::vector<InstructionRecord> make_instructions(RandomSource& rng, const LabelVocab& vocab, std::size_t count,
                                                 TemplateId template_id, std::size_t min_k, std::size_t max_k) {
    if (count == 0) throw Error(ErrorCode::invalid_config, "instruction count must be at least 1");
    const auto& patterns = builtin_template(template_id).patterns;
    std::vector<InstructionRecord> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto combo = sample_combination(rng, vocab, min_k, max_k);
        const auto& pattern = patterns.size() == 1 ? patterns[0] : patterns[rng.uniform_index(patterns.size())];
        out.push_back({format_id("inst-", i), render_text(pattern.pattern, combo, vocab), positive_indices(combo)});
    }
    return out;
}

InstructionFile emit_instructions(RandomSource& rng, const LabelVocab& vocab, std::size_t count,
                                  TemplateId template_id, std::size_t min_k, std::size_t max_k,
                                  const std::filesystem::path& out) {
    InstructionFile file;
    file.template_id = template_id;
    file.vocab_hash = vocab.hash();
    file.refinement_instructions = {std::string(kRefineDifferentCaption), std::string(kRefineShorter)};
    file.records = make_instructions(rng, vocab, count, template_id, min_k, max_k);

    std::string text;
    json meta;
    meta["template"] = template_id_name(template_id);
    meta["vocab"] = hash_hex(file.vocab_hash);
    meta["refinement_instructions"] = file.refinement_instructions;
    text += json{{"metadata", meta}}.dump() + "\n";
    for (const auto& r : file.records)
        text += json{{"id", r.id}, {"instruction", r.instruction}, {"labels", r.labels}}.dump() + "\n";
    write_text_file(out, text);
    return file;
}

InstructionFile read_instructions(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    InstructionFile file;
    bool have_meta = false;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        const json j = parse_json_line(line, line_no, "instructions");
        try {
            if (j.contains("metadata")) {
                const auto& m = j.at("metadata");
                file.template_id = parse_template_id(m.at("template").get<std::string>());
                file.vocab_hash = parse_hash_hex(m.at("vocab").get<std::string>());
                file.refinement_instructions = m.at("refinement_instructions").get<std::vector<std::string>>();
                have_meta = true;
                continue;
            }
            InstructionRecord r{j.at("id").get<std::string>(), j.at("instruction").get<std::string>(),
                                j.at("labels").get<std::vector<std::size_t>>()};
            if (!ids.insert(r.id).second)
                throw Error(ErrorCode::parse_error, "instructions line " + std::to_string(line_no) +
                                                        ": duplicate id '" + r.id + "'");
            file.records.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::parse_error, "instructions line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_meta) throw Error(ErrorCode::parse_error, path.string() + ": missing metadata line");
    return file;
}

IngestResult ingest_responses(const InstructionFile& instructions, const std::filesystem::path& responses,
                              std::size_t max_chars) {
    std::map<std::string, const InstructionRecord*> by_id;
    for (const auto& r : instructions.records) by_id.emplace(r.id, &r);

    std::istringstream in(read_text_file(responses));
    IngestResult result;
    std::vector<std::string> orphans;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        const json j = parse_json_line(line, line_no, "responses");
        std::string id, text;
        try {
            id = j.at("id").get<std::string>();
            text = j.at("text").get<std::string>();
        } catch (const json::exception& e) {
            throw Error(ErrorCode::parse_error, "responses line " + std::to_string(line_no) + ": " + e.what());
        }
        const auto it = by_id.find(id);
        if (it == by_id.end()) {
            orphans.push_back(id);
            continue;
        }
        if (is_blank(text)) {
            warn("response '" + id + "' is empty; skipped");
            ++result.skipped_empty;
            continue;
        }
        if (utf8_length(text) > max_chars) {
            ++result.dropped_too_long;
            continue;
        }
        result.texts.push_back({id, std::move(text), it->second->labels});
    }
    if (!orphans.empty()) {
        std::string list;
        for (const auto& o : orphans) list += (list.empty() ? "" : ",") + o;
        throw Error(ErrorCode::orphan_response, "responses with no matching instruction: " + list);
    }
    if (result.dropped_too_long)
        warn(std::to_string(result.dropped_too_long) + " response(s) longer than " + std::to_string(max_chars) +
             " characters dropped");
    return result;
}

IngestResult ingest_responses(const std::filesystem::path& instructions, const std::filesystem::path& responses,
                              std::size_t max_chars) {
    return ingest_responses(read_instructions(instructions), responses, max_chars);
}

std::vector<LabeledText> generate_prompt_texts(RandomSource& rng, const LabelVocab& vocab, std::size_t count,
                                               std::size_t min_k, std::size_t max_k,
                                               std::span<const std::string> patterns) {
    if (count == 0) throw Error(ErrorCode::invalid_config, "text count must be at least 1");
    if (patterns.empty()) throw Error(ErrorCode::invalid_config, "no prompt patterns");
    for (const auto& p : patterns) validate_pattern(p);
    std::vector<LabeledText> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto combo = sample_combination(rng, vocab, min_k, max_k);
        const auto& pattern = patterns[rng.uniform_index(patterns.size())];
        out.push_back({format_id("prompt-", i), render_text(pattern, combo, vocab), positive_indices(combo)});
    }
    return out;
}

}  // namespace tai

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tai/dataio.hpp"
#include "tai/numkit.hpp"

namespace tai {

enum class TemplateId { instruction_1, instruction_2, prompt_set };

TemplateId parse_template_id(std::string_view name);
std::string_view template_id_name(TemplateId id);

struct PromptPattern {
    std::string pattern;
    // Patterns added by this project beyond the single published example.
    bool supplemental = false;
};

struct InstructionTemplate {
    TemplateId id;
    std::vector<PromptPattern> patterns;  // one entry for instruction templates
};

const InstructionTemplate& builtin_template(TemplateId id);

// Sent to the chat model after the first reply: one asks for a different
// caption, the other asks for a shorter one.
inline constexpr std::string_view kRefineDifferentCaption =
    "Go ahead and add a caption to this image that is different from what you described before.";
inline constexpr std::string_view kRefineShorter = "It's too long, please make it shorter.";

inline constexpr std::size_t kDefaultMinLabels = 1;
inline constexpr std::size_t kDefaultMaxLabels = 4;
inline constexpr std::size_t kDefaultMaxTextChars = 300;

Annotation sample_combination(RandomSource& rng, const LabelVocab& vocab, std::size_t min_k, std::size_t max_k);

// "a", "a and b", "a, b and c".
std::string join_labels(std::span<const std::string> names);

// Substitutes the joined label names for the single "{}" placeholder.
std::string render_text(std::string_view pattern, const Annotation& combination, const LabelVocab& vocab);

struct InstructionRecord {
    std::string id;
    std::string instruction;
    std::vector<std::size_t> labels;

    friend bool operator==(const InstructionRecord&, const InstructionRecord&) = default;
};

struct InstructionFile {
    TemplateId template_id = TemplateId::instruction_1;
    std::uint64_t vocab_hash = 0;
    std::vector<std::string> refinement_instructions;
    std::vector<InstructionRecord> records;
};

std::vector<InstructionRecord> make_instructions(RandomSource& rng, const LabelVocab& vocab, std::size_t count,
                                                 TemplateId template_id, std::size_t min_k, std::size_t max_k);

/// Writes `instructions.jsonl`: a first line {"metadata": {...}} carrying the
/// template id, vocab hash and both refinement instructions verbatim, then one
/// {"id", "instruction", "labels"} object per line.
InstructionFile emit_instructions(RandomSource& rng, const LabelVocab& vocab, std::size_t count,
                                  TemplateId template_id, std::size_t min_k, std::size_t max_k,
                                  const std::filesystem::path& out);

InstructionFile read_instructions(const std::filesystem::path& path);

struct IngestResult {
    std::vector<LabeledText> texts;
    std::size_t dropped_too_long = 0;
    std::size_t skipped_empty = 0;
};

// Joins `responses.jsonl` ({"id", "text"} per line) onto the instructions.
IngestResult ingest_responses(const InstructionFile& instructions, const std::filesystem::path& responses,
                              std::size_t max_chars = kDefaultMaxTextChars);

IngestResult ingest_responses(const std::filesystem::path& instructions, const std::filesystem::path& responses,
                              std::size_t max_chars = kDefaultMaxTextChars);

// Throws invalid_config unless the pattern holds exactly one "{}".
void validate_pattern(std::string_view pattern);

std::vector<std::string> builtin_prompt_patterns();

// One pattern per nonempty line; lines starting with '#' are comments.
std::vector<std::string> read_prompt_patterns(const std::filesystem::path& path);

// Prompt-based generation: each text fills a uniformly chosen pattern.
std::vector<LabeledText> generate_prompt_texts(RandomSource& rng, const LabelVocab& vocab, std::size_t count,
                                               std::size_t min_k, std::size_t max_k,
                                               std::span<const std::string> patterns);

}  // namespace tai

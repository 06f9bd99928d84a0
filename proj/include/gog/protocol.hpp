#pragma once

// The tagged action grammar exchanged with the policy model:
//
//   <think>free text</think>
//   <img_search><img></img_search>        whole-image search
//   <img_search>description</img_search>  grounded (cropped) search
//   <text_search>query</text_search>
//   <search_crop>1,3</search_crop>        select grounded crops, 1-based
//   <answer>text</answer>
//
// Tool output is fed back inside <information>...</information>.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gog/phase.hpp"
#include "gog/result.hpp"

namespace gog::protocol {

struct WholeImageSearch {
  bool operator==(const WholeImageSearch&) const = default;
};
struct CroppedSearch {
  std::string description;
  bool operator==(const CroppedSearch&) const = default;
};
struct TextSearch {
  std::string query;
  bool operator==(const TextSearch&) const = default;
};
struct SelectCrops {
  std::vector<int> indices;  // strictly positive, unique, ascending
  bool operator==(const SelectCrops&) const = default;
};
struct Answer {
  std::string text;
  bool operator==(const Answer&) const = default;
};

using Action = std::variant<WholeImageSearch, CroppedSearch, TextSearch, SelectCrops, Answer>;

ActionKind kind_of(const Action& action);

struct ModelAction {
  std::optional<std::string> think;
  Action action;

  ActionKind kind() const { return kind_of(action); }
  bool operator==(const ModelAction&) const = default;
};

enum class ParseErrorKind { NoActionTag, MultipleActionTags, MalformedTag, IllegalActionForPhase, EmptyPayload };

std::string_view to_string(ParseErrorKind kind);

struct ParseError {
  ParseErrorKind kind;
  std::string tag;    // offending tag name, empty when none applies
  std::size_t begin;  // byte range of the offending region in the raw turn
  std::size_t end;
  std::string detail;

  std::string message() const;
};

/// One recognised tag occurrence. Offsets index into the scanned text.
struct TagSpan {
  std::string_view name;
  std::size_t begin;          // position of '<' of the opening tag
  std::size_t content_begin;
  std::size_t content_end;
  std::size_t end;            // one past the closing tag
};

struct StructuralIssue {
  std::string_view tag;
  std::size_t begin;
  std::size_t end;
  std::string detail;
};

/// Lexical view of a raw turn shared by parsing and format scoring.
struct TurnScan {
  std::vector<TagSpan> think_blocks;
  std::vector<TagSpan> actions;
  std::vector<StructuralIssue> issues;
  std::string stray_text;  // non-whitespace text outside every recognised tag
};

TurnScan scan_turn(std::string_view raw);

Result<ModelAction, ParseError> parse_action(std::string_view raw, Phase phase);

/// Canonical serialisation: "<think>T</think>\n<tag>payload</tag>", or the bare
/// action tag when there is no think text.
std::string render(const ModelAction& action);
std::string render(const Action& action);

// ---------------------------------------------------------------------------
// Observations

inline constexpr std::size_t kMaxImageResults = 5;

struct ImageHit {
  std::string thumbnail;
  std::string title;
  bool operator==(const ImageHit&) const = default;
};

struct ImageSearchSection {
  std::optional<int> crop_index;  // set when the section came from a selected crop
  std::vector<ImageHit> hits;
  bool operator==(const ImageSearchSection&) const = default;
};

struct ImageSearchResults {
  std::vector<ImageSearchSection> sections;
  bool operator==(const ImageSearchResults&) const = default;
};

struct TextSearchSummary {
  std::string text;
  bool operator==(const TextSearchSummary&) const = default;
};

struct CropCandidates {
  std::string description;
  std::vector<std::string> images;  // URLs shown to the model, in candidate order
  bool operator==(const CropCandidates&) const = default;
};

struct ToolError {
  std::string tool;
  std::string message;
  bool operator==(const ToolError&) const = default;
};

struct TurnRejected {
  std::string reason;
  bool operator==(const TurnRejected&) const = default;
};

using ObservationKind =
    std::variant<ImageSearchResults, TextSearchSummary, CropCandidates, ToolError, TurnRejected>;

std::string_view kind_name(const ObservationKind& kind);

struct Observation {
  ObservationKind kind;
  std::string rendered;
  std::vector<std::string> images;  // attached to the next user message
  bool operator==(const Observation&) const = default;
};

Observation render_observation(ObservationKind kind);

// ---------------------------------------------------------------------------
// Format scoring

inline constexpr std::string_view kFormatChecksVersion = "fmt-checks/v1";

struct FormatCheck {
  std::string name;
  bool passed;
};

struct FormatReport {
  std::vector<FormatCheck> checks;

  std::size_t passed() const;
  double score() const;  // passed / total; throws if there are no checks
};

FormatReport score_turn_format(std::string_view raw, Phase phase);

}  // namespace gog::protocol

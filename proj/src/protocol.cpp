#include "gog/protocol.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <sstream>
#include <stdexcept>

namespace gog {

namespace {

constexpr std::array<std::pair<Phase, std::string_view>, 5> kPhaseNames = {{
    {Phase::Initial, "Initial"},
    {Phase::AfterImageSearch, "AfterImageSearch"},
    {Phase::AfterGazeCrops, "AfterGazeCrops"},
    {Phase::AfterTextSearch, "AfterTextSearch"},
    {Phase::Terminated, "Terminated"},
}};

constexpr std::array<std::pair<ActionKind, std::string_view>, 5> kActionNames = {{
    {ActionKind::WholeImageSearch, "WholeImageSearch"},
    {ActionKind::CroppedSearch, "CroppedSearch"},
    {ActionKind::TextSearch, "TextSearch"},
    {ActionKind::SelectCrops, "SelectCrops"},
    {ActionKind::Answer, "Answer"},
}};

constexpr std::array<std::pair<TerminationReason, std::string_view>, 4> kTerminationNames = {{
    {TerminationReason::Answered, "Answered"},
    {TerminationReason::BudgetExhausted, "BudgetExhausted"},
    {TerminationReason::InvalidTurn, "InvalidTurn"},
    {TerminationReason::Error, "Error"},
}};

template <class Table, class Key>
std::string_view lookup_name(const Table& table, Key key) {
  for (const auto& [k, name] : table)
    if (k == key) return name;
  return "?";
}

template <class Key, class Table>
std::optional<Key> lookup_key(const Table& table, std::string_view name) {
  for (const auto& [k, n] : table)
    if (n == name) return k;
  return std::nullopt;
}

}  // namespace

std::string_view to_string(Phase phase) { return lookup_name(kPhaseNames, phase); }
std::string_view to_string(ActionKind kind) { return lookup_name(kActionNames, kind); }
std::string_view to_string(TerminationReason reason) { return lookup_name(kTerminationNames, reason); }

std::optional<Phase> phase_from_string(std::string_view name) { return lookup_key<Phase>(kPhaseNames, name); }
std::optional<ActionKind> action_kind_from_string(std::string_view name) {
  return lookup_key<ActionKind>(kActionNames, name);
}
std::optional<TerminationReason> termination_from_string(std::string_view name) {
  return lookup_key<TerminationReason>(kTerminationNames, name);
}

bool legal_in_phase(ActionKind kind, Phase phase) {
  switch (phase) {
    case Phase::Initial:
      return kind != ActionKind::SelectCrops;
    case Phase::AfterImageSearch:
      return kind != ActionKind::SelectCrops;
    case Phase::AfterGazeCrops:
      // Text search is withheld until the selected crops have been searched.
      return kind != ActionKind::TextSearch;
    case Phase::AfterTextSearch:
      return kind == ActionKind::Answer || kind == ActionKind::TextSearch;
    case Phase::Terminated:
      return false;
  }
  return false;
}

}  // namespace gog

namespace gog::protocol {

namespace {

constexpr std::string_view kThink = "think";
constexpr std::array<std::string_view, 4> kActionTags = {"answer", "img_search", "text_search", "search_crop"};
// The prompts show a bare "<img>"; the closed form is accepted as an alias.
constexpr std::string_view kWholeImageMarker = "<img>";
constexpr std::string_view kWholeImageMarkerClosed = "<img></img>";

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::optional<std::string_view> known_tag_name(std::string_view name) {
  if (name == kThink) return kThink;
  for (auto tag : kActionTags)
    if (tag == name) return tag;
  return std::nullopt;
}

// Matches "<name>" or "</name>" for a recognised tag at position pos.
struct TagToken {
  std::string_view name;
  bool closing;
  std::size_t length;
};

std::optional<TagToken> match_tag(std::string_view raw, std::size_t pos) {
  if (pos >= raw.size() || raw[pos] != '<') return std::nullopt;
  std::size_t i = pos + 1;
  bool closing = false;
  if (i < raw.size() && raw[i] == '/') {
    closing = true;
    ++i;
  }
  std::size_t gt = raw.find('>', i);
  if (gt == std::string_view::npos) return std::nullopt;
  auto name = known_tag_name(raw.substr(i, gt - i));
  if (!name) return std::nullopt;
  return TagToken{*name, closing, gt + 1 - pos};
}

// First recognised tag token inside [from, to), if any.
std::optional<std::pair<std::size_t, TagToken>> find_tag_in(std::string_view raw, std::size_t from, std::size_t to) {
  for (std::size_t p = raw.find('<', from); p != std::string_view::npos && p < to; p = raw.find('<', p + 1)) {
    if (auto tok = match_tag(raw, p); tok && p + tok->length <= to) return std::make_pair(p, *tok);
  }
  return std::nullopt;
}

void append_stray(std::string& stray, std::string_view text) {
  auto t = trim(text);
  if (t.empty()) return;
  if (!stray.empty()) stray.push_back(' ');
  stray.append(t);
}

struct DecodedPayload {
  std::optional<Action> action;  // empty when the payload is malformed or empty
  ActionKind kind;
  bool empty = false;
  bool malformed = false;
  std::string detail;
};

DecodedPayload decode_payload(std::string_view tag, std::string_view content) {
  DecodedPayload out{};
  auto body = trim(content);
  if (tag == "answer") {
    out.kind = ActionKind::Answer;
    if (body.empty()) {
      out.empty = true;
      return out;
    }
    out.action = Answer{std::string(body)};
  } else if (tag == "text_search") {
    out.kind = ActionKind::TextSearch;
    if (body.empty()) {
      out.empty = true;
      return out;
    }
    out.action = TextSearch{std::string(body)};
  } else if (tag == "img_search") {
    if (body == kWholeImageMarker || body == kWholeImageMarkerClosed) {
      out.kind = ActionKind::WholeImageSearch;
      out.action = WholeImageSearch{};
      return out;
    }
    out.kind = ActionKind::CroppedSearch;
    if (body.empty()) {
      out.empty = true;
      return out;
    }
    if (body.find("<img") != std::string_view::npos || body.find("</img>") != std::string_view::npos) {
      out.malformed = true;
      out.detail = "whole-image marker must be <img> or <img></img>";
      return out;
    }
    out.action = CroppedSearch{std::string(body)};
  } else {
    out.kind = ActionKind::SelectCrops;
    if (body.empty()) {
      out.empty = true;
      return out;
    }
    std::vector<int> indices;
    std::size_t start = 0;
    while (start <= body.size()) {
      std::size_t comma = body.find(',', start);
      if (comma == std::string_view::npos) comma = body.size();
      auto token = trim(body.substr(start, comma - start));
      int value = 0;
      auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
      if (token.empty() || ec != std::errc() || ptr != token.data() + token.size() || value < 1) {
        out.malformed = true;
        out.detail = "crop indices must be positive integers separated by commas";
        return out;
      }
      indices.push_back(value);
      start = comma + 1;
    }
    std::sort(indices.begin(), indices.end());
    indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
    out.action = SelectCrops{std::move(indices)};
  }
  return out;
}

std::string render_hits(const ImageSearchSection& section) {
  std::ostringstream out;
  const auto n = std::min(section.hits.size(), kMaxImageResults);
  std::string subject = section.crop_index ? "Crop " + std::to_string(*section.crop_index) + " image search"
                                           : std::string("Image search");
  if (n == 0) {
    out << subject << " returned no results.\n";
    return out.str();
  }
  out << subject << " returned " << n << (n == 1 ? " result:\n" : " results:\n");
  for (std::size_t i = 0; i < n; ++i) {
    const auto& hit = section.hits[i];
    out << (i + 1) << ". Webpage Image: " << hit.thumbnail << " Webpage Title: " << hit.title << "\n";
  }
  return out.str();
}

std::string information_block(std::string_view body) {
  std::string out = "<information>\n";
  out.append(body);
  if (out.back() != '\n') out.push_back('\n');
  out.append("</information>");
  return out;
}

}  // namespace

ActionKind kind_of(const Action& action) {
  return std::visit(
      [](const auto& a) -> ActionKind {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, WholeImageSearch>) return ActionKind::WholeImageSearch;
        else if constexpr (std::is_same_v<T, CroppedSearch>) return ActionKind::CroppedSearch;
        else if constexpr (std::is_same_v<T, TextSearch>) return ActionKind::TextSearch;
        else if constexpr (std::is_same_v<T, SelectCrops>) return ActionKind::SelectCrops;
        else return ActionKind::Answer;
      },
      action);
}

std::string_view to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::NoActionTag: return "NoActionTag";
    case ParseErrorKind::MultipleActionTags: return "MultipleActionTags";
    case ParseErrorKind::MalformedTag: return "MalformedTag";
    case ParseErrorKind::IllegalActionForPhase: return "IllegalActionForPhase";
    case ParseErrorKind::EmptyPayload: return "EmptyPayload";
  }
  return "?";
}

std::string ParseError::message() const {
  std::ostringstream out;
  out << to_string(kind);
  if (!tag.empty()) out << " <" << tag << ">";
  out << " at bytes [" << begin << "," << end << ")";
  if (!detail.empty()) out << ": " << detail;
  return out.str();
}

TurnScan scan_turn(std::string_view raw) {
  TurnScan scan;
  std::size_t i = 0;
  while (i < raw.size()) {
    std::size_t lt = raw.find('<', i);
    if (lt == std::string_view::npos) {
      append_stray(scan.stray_text, raw.substr(i));
      break;
    }
    auto token = match_tag(raw, lt);
    if (!token) {
      // Not one of ours; keep scanning after this '<'.
      append_stray(scan.stray_text, raw.substr(i, lt + 1 - i));
      i = lt + 1;
      continue;
    }
    append_stray(scan.stray_text, raw.substr(i, lt - i));
    if (token->closing) {
      scan.issues.push_back({token->name, lt, lt + token->length, "closing tag without opening tag"});
      i = lt + token->length;
      continue;
    }
    const std::string close = "</" + std::string(token->name) + ">";
    const std::size_t content_begin = lt + token->length;
    const std::size_t close_pos = raw.find(close, content_begin);
    if (close_pos == std::string_view::npos) {
      scan.issues.push_back({token->name, lt, raw.size(), "tag is never closed"});
      break;
    }
    TagSpan span{token->name, lt, content_begin, close_pos, close_pos + close.size()};
    if (token->name == kThink) {
      scan.think_blocks.push_back(span);
    } else {
      if (auto nested = find_tag_in(raw, content_begin, close_pos)) {
        auto [pos, tok] = *nested;
        scan.issues.push_back({token->name, pos, pos + tok.length,
                               "tag <" + std::string(tok.name) + "> nested inside <" + std::string(token->name) + ">"});
      }
      scan.actions.push_back(span);
    }
    i = span.end;
  }
  return scan;
}

Result<ModelAction, ParseError> parse_action(std::string_view raw, Phase phase) {
  const auto scan = scan_turn(raw);
  if (!scan.issues.empty()) {
    const auto& issue = scan.issues.front();
    return unexpected(ParseError{ParseErrorKind::MalformedTag, std::string(issue.tag), issue.begin, issue.end, issue.detail});
  }
  if (scan.actions.empty()) {
    return unexpected(ParseError{ParseErrorKind::NoActionTag, "", 0, raw.size(), "no action tag found"});
  }
  if (scan.actions.size() > 1) {
    const auto& second = scan.actions[1];
    return unexpected(ParseError{ParseErrorKind::MultipleActionTags, std::string(second.name), second.begin, second.end,
                                 std::to_string(scan.actions.size()) + " action tags in one turn"});
  }
  const auto& span = scan.actions.front();
  auto decoded = decode_payload(span.name, raw.substr(span.content_begin, span.content_end - span.content_begin));
  if (decoded.empty) {
    return unexpected(ParseError{ParseErrorKind::EmptyPayload, std::string(span.name), span.begin, span.end, "payload is empty"});
  }
  if (decoded.malformed) {
    return unexpected(ParseError{ParseErrorKind::MalformedTag, std::string(span.name), span.begin, span.end, decoded.detail});
  }
  if (!legal_in_phase(decoded.kind, phase)) {
    return unexpected(ParseError{ParseErrorKind::IllegalActionForPhase, std::string(span.name), span.begin, span.end,
                                 std::string(to_string(decoded.kind)) + " is not available in phase " +
                                     std::string(to_string(phase))});
  }
  ModelAction out{std::nullopt, std::move(*decoded.action)};
  if (!scan.think_blocks.empty()) {
    const auto& t = scan.think_blocks.front();
    out.think = std::string(raw.substr(t.content_begin, t.content_end - t.content_begin));
  }
  return out;
}

std::string render(const Action& action) {
  return std::visit(
      [](const auto& a) -> std::string {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, WholeImageSearch>) {
          return "<img_search><img></img_search>";
        } else if constexpr (std::is_same_v<T, CroppedSearch>) {
          return "<img_search>" + a.description + "</img_search>";
        } else if constexpr (std::is_same_v<T, TextSearch>) {
          return "<text_search>" + a.query + "</text_search>";
        } else if constexpr (std::is_same_v<T, SelectCrops>) {
          std::string out = "<search_crop>";
          for (std::size_t i = 0; i < a.indices.size(); ++i) {
            if (i) out.push_back(',');
            out += std::to_string(a.indices[i]);
          }
          return out + "</search_crop>";
        } else {
          return "<answer>" + a.text + "</answer>";
        }
      },
      action);
}

std::string render(const ModelAction& action) {
  std::string out;
  if (action.think) out = "<think>" + *action.think + "</think>\n";
  return out + render(action.action);
}

std::string_view kind_name(const ObservationKind& kind) {
  return std::visit(
      [](const auto& k) -> std::string_view {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, ImageSearchResults>) return "ImageSearchResults";
        else if constexpr (std::is_same_v<T, TextSearchSummary>) return "TextSearchSummary";
        else if constexpr (std::is_same_v<T, CropCandidates>) return "CropCandidates";
        else if constexpr (std::is_same_v<T, ToolError>) return "ToolError";
        else return "TurnRejected";
      },
      kind);
}

Observation render_observation(ObservationKind kind) {
  Observation obs{std::move(kind), {}, {}};
  std::visit(
      [&obs](auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, ImageSearchResults>) {
          if (k.sections.empty()) k.sections.push_back({});
          std::string body;
          for (auto& section : k.sections) {
            if (section.hits.size() > kMaxImageResults) section.hits.resize(kMaxImageResults);
            body += render_hits(section);
          }
          obs.rendered = information_block(body);
        } else if constexpr (std::is_same_v<T, TextSearchSummary>) {
          auto text = trim(k.text);
          obs.rendered = information_block(text.empty() ? "Text search returned no relevant information." : text);
        } else if constexpr (std::is_same_v<T, CropCandidates>) {
          if (k.images.empty()) {
            obs.rendered = information_block("Grounding found no region matching \"" + k.description +
                                             "\". Try a different description or search the whole image.");
          } else {
            std::string body = "Cropped regions for \"" + k.description + "\":\n";
            for (std::size_t i = 0; i < k.images.size(); ++i)
              body += "Crop " + std::to_string(i + 1) + ": " + k.images[i] + "\n";
            body.pop_back();
            obs.rendered = body;
            obs.images = k.images;
          }
        } else if constexpr (std::is_same_v<T, ToolError>) {
          obs.rendered = information_block(k.tool + " failed: " + k.message);
        } else {
          obs.rendered = "Your previous response could not be executed: " + k.reason;
        }
      },
      obs.kind);
  return obs;
}

std::size_t FormatReport::passed() const {
  return static_cast<std::size_t>(std::count_if(checks.begin(), checks.end(), [](const auto& c) { return c.passed; }));
}

double FormatReport::score() const {
  if (checks.empty()) throw std::logic_error("format report has no checks");
  return static_cast<double>(passed()) / static_cast<double>(checks.size());
}

FormatReport score_turn_format(std::string_view raw, Phase phase) {
  const auto scan = scan_turn(raw);
  // Structural checks only pass when there is an action tag to judge.
  bool grammar_ok = scan.issues.empty() && !scan.actions.empty();
  bool all_legal = !scan.actions.empty();
  bool all_nonempty = !scan.actions.empty();
  for (const auto& span : scan.actions) {
    auto decoded = decode_payload(span.name, raw.substr(span.content_begin, span.content_end - span.content_begin));
    grammar_ok = grammar_ok && !decoded.malformed;
    all_legal = all_legal && legal_in_phase(decoded.kind, phase);
    all_nonempty = all_nonempty && !decoded.empty;
  }
  FormatReport report;
  report.checks = {
      {"think_present", !scan.think_blocks.empty()},
      {"single_action", scan.actions.size() == 1},
      {"well_formed", grammar_ok},
      {"phase_legal", all_legal},
      {"payload_nonempty", all_nonempty},
  };
  return report;
}

}  // namespace gog::protocol

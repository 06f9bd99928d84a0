#include "gog/mock_tools.hpp"

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

#include "gog/hashing.hpp"

namespace gog::mock {

using toolkit::FailureCause;
using toolkit::ToolFailure;
using toolkit::ToolResult;

// ---------------------------------------------------------------------------
// FaultPlan

FaultPlan::FaultPlan(double rate, std::uint64_t seed) : rate_(rate), seed_(seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("fault rate must lie in [0,1]");
}

void FaultPlan::force(std::string tool, FailureCause cause, int upstream_code) {
  std::lock_guard lock(mutex_);
  forced_[std::move(tool)] = {cause, upstream_code};
}

void FaultPlan::force_key(std::string tool, std::string key, FailureCause cause) {
  std::lock_guard lock(mutex_);
  forced_keys_[tool + "\x1f" + key] = cause;
}

long FaultPlan::injected() const {
  std::lock_guard lock(mutex_);
  return injected_;
}

std::optional<ToolFailure> FaultPlan::draw(std::string_view tool, std::string_view key) {
  std::lock_guard lock(mutex_);
  if (auto it = forced_.find(tool); it != forced_.end()) {
    ++injected_;
    return ToolFailure::make(std::string(tool), it->second.first, "injected fault", it->second.second);
  }
  const std::string scoped = std::string(tool) + "\x1f" + std::string(key);
  if (auto it = forced_keys_.find(scoped); it != forced_keys_.end()) {
    ++injected_;
    auto failure = ToolFailure::make(std::string(tool), it->second, "injected fault");
    failure.retryable = false;
    return failure;
  }
  if (rate_ <= 0.0) return std::nullopt;
  const long n = counters_[scoped]++;
  const std::string draw_key = std::to_string(seed_) + "\x1f" + scoped + "\x1f" + std::to_string(n);
  if (hashed_unit(draw_key) >= rate_) return std::nullopt;
  ++injected_;
  static constexpr FailureCause kCauses[] = {FailureCause::Timeout, FailureCause::NetworkError,
                                             FailureCause::MalformedContent, FailureCause::UpstreamError};
  const auto cause = kCauses[sha256_u64(draw_key + "\x1f" "cause") % 4];
  return ToolFailure::make(std::string(tool), cause, "injected fault", cause == FailureCause::UpstreamError ? 503 : 0);
}

// ---------------------------------------------------------------------------
// Tools

MockImageSearch::MockImageSearch(const Corpus& corpus, const ImageStore& store, FaultPlan* faults)
    : store_(store), faults_(faults) {
  for (const auto& [ref, hits] : corpus.image_search) {
    if (!store.contains(ref)) throw CorpusError("image_search key does not resolve: " + ref);
    by_hash_[sha256_hex(encode_ppm(store.resolve(ref)))] = hits;
  }
}

std::vector<toolkit::ImageSearchResult> MockImageSearch::lookup_hash(const std::string& sha256) const {
  auto it = by_hash_.find(sha256);
  if (it == by_hash_.end()) return {};
  return toolkit::normalize_image_results(it->second);
}

ToolResult<std::vector<toolkit::ImageSearchResult>> MockImageSearch::search(std::string_view image_ref) {
  if (faults_)
    if (auto f = faults_->draw("image_search", image_ref)) return unexpected(std::move(*f));
  if (!store_.contains(image_ref))
    return unexpected(ToolFailure::make("image_search", FailureCause::MalformedContent, "unresolvable image"));
  return lookup_hash(sha256_hex(encode_ppm(store_.resolve(image_ref))));
}

ToolResult<std::vector<toolkit::WebResult>> MockWebSearch::search(std::string_view query) {
  if (faults_)
    if (auto f = faults_->draw("web_search", query)) return unexpected(std::move(*f));
  auto it = corpus_.web_search.find(normalize_key(query));
  if (it == corpus_.web_search.end()) return std::vector<toolkit::WebResult>{};
  return it->second;
}

ToolResult<std::string> MockPageReader::read(std::string_view url) {
  if (faults_)
    if (auto f = faults_->draw("reader", url)) return unexpected(std::move(*f));
  auto it = corpus_.pages.find(std::string(url));
  if (it == corpus_.pages.end() || it->second.empty())
    return unexpected(ToolFailure::make("reader", FailureCause::MalformedContent, "no extractable text"));
  return it->second;
}

ToolResult<std::vector<toolkit::GroundingBox>> MockGrounding::ground(std::string_view image_ref,
                                                                      std::string_view description) {
  if (description.find_first_not_of(" \t\r\n") == std::string_view::npos)
    return unexpected(ToolFailure::make("grounding", FailureCause::MalformedContent, "empty description"));
  if (faults_)
    if (auto f = faults_->draw("grounding", std::string(image_ref) + "|" + std::string(description)))
      return unexpected(std::move(*f));
  if (!store_.contains(image_ref))
    return unexpected(ToolFailure::make("grounding", FailureCause::MalformedContent, "unresolvable image"));
  auto by_image = corpus_.grounding.find(std::string(image_ref));
  if (by_image == corpus_.grounding.end()) return std::vector<toolkit::GroundingBox>{};
  auto by_desc = by_image->second.find(normalize_key(description));
  if (by_desc == by_image->second.end()) return std::vector<toolkit::GroundingBox>{};
  auto [w, h] = store_.dimensions(image_ref);
  return toolkit::normalize_boxes(by_desc->second, w, h, top_n_);
}

ToolResult<std::string> MockImageHost::upload(std::string_view image_ref) {
  if (faults_)
    if (auto f = faults_->draw("host", image_ref)) return unexpected(std::move(*f));
  if (!store_.contains(image_ref))
    return unexpected(ToolFailure::make("host", FailureCause::MalformedContent, "unresolvable image"));
  return toolkit::content_url(store_.resolve(image_ref));
}

// ---------------------------------------------------------------------------
// Chat endpoints

std::optional<std::string> question_in_prompt(std::string_view prompt) {
  static constexpr std::string_view kMarker = "Question: ";
  auto pos = prompt.find(kMarker);
  if (pos == std::string_view::npos) return std::nullopt;
  pos += kMarker.size();
  auto end = std::min(prompt.find('\n', pos), prompt.find(" Image:", pos));
  return std::string(prompt.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
}

namespace {

const toolkit::ChatMessage* first_user(const toolkit::ChatRequest& request) {
  for (const auto& m : request.messages)
    if (m.role == "user") return &m;
  return nullptr;
}

const toolkit::ChatMessage* last_user(const toolkit::ChatRequest& request) {
  for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it)
    if (it->role == "user") return &*it;
  return nullptr;
}

std::string between(std::string_view text, std::string_view open, std::string_view close) {
  auto b = text.find(open);
  if (b == std::string_view::npos) return {};
  b += open.size();
  auto e = text.find(close, b);
  if (e == std::string_view::npos) return {};
  return std::string(text.substr(b, e - b));
}

// Lowercase, keep letters and digits, collapse everything else to single spaces.
std::string fold(std::string_view text) {
  std::string out;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      out.push_back(static_cast<char>(std::tolower(u)));
    } else if (!out.empty() && out.back() != ' ') {
      out.push_back(' ');
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

}  // namespace

ScriptedPolicy::ScriptedPolicy(const Corpus& corpus) {
  for (const auto& ep : corpus.episodes) scripts_.emplace_back(normalize_key(ep.question), ep.scripts);
}

ScriptedPolicy::ScriptedPolicy(std::string question, std::vector<std::vector<std::string>> scripts) {
  if (scripts.empty()) throw std::invalid_argument("at least one script is required");
  scripts_.emplace_back(normalize_key(question), std::move(scripts));
}

ToolResult<std::string> ScriptedPolicy::complete(const toolkit::ChatRequest& request) {
  const auto* user = first_user(request);
  if (!user) return unexpected(ToolFailure::make("policy", FailureCause::MalformedContent, "no user message"));
  const auto question = question_in_prompt(user->text);
  const auto key = normalize_key(question.value_or(""));
  for (const auto& [q, variants] : scripts_) {
    if (q != key) continue;
    const auto& script = variants[request.seed.value_or(0) % variants.size()];
    const auto turn = static_cast<std::size_t>(
        std::count_if(request.messages.begin(), request.messages.end(), [](const auto& m) { return m.role == "assistant"; }));
    if (turn < script.size()) return script[turn];
    return std::string("<answer>I don't know</answer>");
  }
  return std::string(kUnknownAnswer);
}

std::optional<MockJudge::Fields> MockJudge::extract(std::string_view prompt) {
  Fields f;
  std::string truth;
  if (prompt.find("**Predicted Answer**: ") != std::string_view::npos) {
    f.xml = true;
    f.question = between(prompt, "**Question**: ", "\n");
    truth = between(prompt, "**Ground Truth Answer(s)**: ", " (A list of one or more");
    f.prediction = between(prompt, "**Predicted Answer**: ", " (The model's response");
  } else if (prompt.find("Predicted Answer: ") != std::string_view::npos) {
    f.question = between(prompt, "Question: ", "\nGround-Truth Answer(s): ");
    truth = between(prompt, "Ground-Truth Answer(s): ", "\nPredicted Answer: ");
    f.prediction = between(prompt, "Predicted Answer: ", "\n\nIMPORTANT:");
  } else {
    return std::nullopt;
  }
  try {
    auto j = nlohmann::json::parse(truth);
    if (j.is_array()) {
      f.ground_truth = j.get<std::vector<std::string>>();
    } else if (j.is_string()) {
      f.ground_truth = {j.get<std::string>()};
    }
  } catch (const nlohmann::json::exception&) {
    if (!truth.empty()) f.ground_truth = {truth};
  }
  return f;
}

bool MockJudge::matches(std::string_view prediction, const std::vector<std::string>& ground_truth) {
  const auto p = " " + fold(prediction) + " ";
  for (const auto& gt : ground_truth) {
    const auto g = fold(gt);
    if (!g.empty() && p.find(" " + g + " ") != std::string::npos) return true;
  }
  return false;
}

ToolResult<std::string> MockJudge::complete(const toolkit::ChatRequest& request) {
  const auto* user = last_user(request);
  auto fields = user ? extract(user->text) : std::nullopt;
  if (!fields) return unexpected(ToolFailure::make("judge", FailureCause::MalformedContent, "not a judge prompt"));
  const bool ok = matches(fields->prediction, fields->ground_truth);
  if (!fields->xml) return std::string(ok ? "[CORRECT]" : "[INCORRECT]");
  return std::string("<reason>\nCompared the normalized prediction with each reference answer.\n</reason>\n<judge>\n") +
         (ok ? "True" : "False") + "\n</judge>";
}

ToolResult<std::string> ScriptedSummarizer::complete(const toolkit::ChatRequest& request) {
  const auto* user = last_user(request);
  if (!user) return unexpected(ToolFailure::make("summarizer", FailureCause::MalformedContent, "no user message"));
  std::vector<std::string> sentences;
  std::string_view text = user->text;
  std::size_t pos = 0;
  while (pos < text.size() && sentences.size() < 5) {
    auto eol = text.find('\n', pos);
    auto line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    std::string_view body;
    if (line.rfind("Content: ", 0) == 0) {
      body = line.substr(9);
    } else if (line.rfind("Snippet: ", 0) == 0) {
      body = line.substr(9);
    } else {
      continue;
    }
    auto stop = body.find(". ");
    auto sentence = std::string(body.substr(0, stop == std::string_view::npos ? body.size() : stop + 1));
    if (!sentence.empty()) sentences.push_back(std::move(sentence));
  }
  if (sentences.empty()) return std::string(toolkit::kNoRelevantInformation);
  std::string out;
  for (const auto& s : sentences) out += (out.empty() ? "" : " ") + s;
  return out;
}

void ScriptedSampler::set(std::string question, std::string correct_answer, int pass_count) {
  targets_[normalize_key(question)] = {std::move(correct_answer), pass_count};
}

ToolResult<std::string> ScriptedSampler::complete(const toolkit::ChatRequest& request) {
  const auto* user = last_user(request);
  const auto question = user ? question_in_prompt(user->text) : std::nullopt;
  if (!question) return unexpected(ToolFailure::make("sampler", FailureCause::MalformedContent, "no question"));
  auto it = targets_.find(normalize_key(*question));
  if (it == targets_.end()) return std::string(kWrongAnswer);
  const auto attempt = request.seed.value_or(0);
  if (attempt < static_cast<std::uint64_t>(std::max(0, it->second.second))) return it->second.first;
  return std::string(kWrongAnswer);
}

// ---------------------------------------------------------------------------

MockToolset::MockToolset(Corpus c, double fault_rate, std::uint64_t fault_seed, std::size_t grounding_top_n)
    : corpus(std::move(c)), faults(fault_rate, fault_seed) {
  register_images(corpus, store);
  image_search = std::make_unique<MockImageSearch>(corpus, store, &faults);
  web_search = std::make_unique<MockWebSearch>(corpus, &faults);
  reader = std::make_unique<MockPageReader>(corpus, &faults);
  grounding = std::make_unique<MockGrounding>(corpus, store, &faults, grounding_top_n);
  host = std::make_unique<MockImageHost>(store, &faults);
  policy = std::make_unique<ScriptedPolicy>(corpus);
  judge = std::make_unique<MockJudge>();
  summarizer = std::make_unique<ScriptedSummarizer>();
}

}  // namespace gog::mock

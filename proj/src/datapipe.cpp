#include "gog/datapipe.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "gog/parallel.hpp"
#include "gog/prompts.hpp"

namespace gog::datapipe {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr SearchType kLabeledTypes[] = {SearchType::SearchFree, SearchType::TextOnly, SearchType::ImageOnly,
                                        SearchType::Both};

}  // namespace

std::string_view to_string(SearchType type) {
  switch (type) {
    case SearchType::SearchFree: return "SearchFree";
    case SearchType::TextOnly: return "TextOnly";
    case SearchType::ImageOnly: return "ImageOnly";
    case SearchType::Both: return "Both";
    case SearchType::Unlabeled: return "Unlabeled";
  }
  return "?";
}

std::string_view to_string(Level level) { return level == Level::L1 ? "L1" : "L2"; }

std::optional<SearchType> search_type_from_string(std::string_view name) {
  for (auto t : {SearchType::SearchFree, SearchType::TextOnly, SearchType::ImageOnly, SearchType::Both,
                 SearchType::Unlabeled})
    if (to_string(t) == name) return t;
  return std::nullopt;
}

std::optional<Level> level_from_string(std::string_view name) {
  if (name == "L1") return Level::L1;
  if (name == "L2") return Level::L2;
  return std::nullopt;
}

std::optional<double> DatasetRecord::pass_rate() const {
  if (!pass_count || !attempts || *attempts <= 0) return std::nullopt;
  return static_cast<double>(*pass_count) / static_cast<double>(*attempts);
}

// ---------------------------------------------------------------------------
// Manifest I/O

ordered_json to_json(const DatasetRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  j["question"] = r.question;
  j["image"] = r.image;
  j["answers"] = r.answers;
  j["pass_count"] = r.pass_count ? ordered_json(*r.pass_count) : ordered_json(nullptr);
  j["attempts"] = r.attempts ? ordered_json(*r.attempts) : ordered_json(nullptr);
  j["search_type"] = to_string(r.search_type);
  j["level"] = r.level ? ordered_json(to_string(*r.level)) : ordered_json(nullptr);
  return j;
}

DatasetRecord record_from_json(const json& j) {
  DatasetRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.question = j.at("question").get<std::string>();
    r.image = j.at("image").get<std::string>();
    r.answers = j.at("answers").get<std::vector<std::string>>();
    if (j.contains("pass_count") && !j.at("pass_count").is_null()) r.pass_count = j.at("pass_count").get<int>();
    if (j.contains("attempts") && !j.at("attempts").is_null()) r.attempts = j.at("attempts").get<int>();
    if (j.contains("search_type") && !j.at("search_type").is_null()) {
      auto t = search_type_from_string(j.at("search_type").get<std::string>());
      if (!t) throw ManifestError("unknown search_type " + j.at("search_type").dump());
      r.search_type = *t;
    }
    if (j.contains("level") && !j.at("level").is_null()) {
      auto l = level_from_string(j.at("level").get<std::string>());
      if (!l) throw ManifestError("unknown level " + j.at("level").dump());
      r.level = *l;
    }
  } catch (const json::exception& e) {
    throw ManifestError(std::string("malformed record: ") + e.what());
  }
  if (r.id.empty()) throw ManifestError("record id must not be empty");
  if (r.pass_count && *r.pass_count < 0) throw ManifestError("pass_count must be non-negative");
  if (r.attempts && *r.attempts < 0) throw ManifestError("attempts must be non-negative");
  if (r.pass_count && r.attempts && *r.pass_count > *r.attempts)
    throw ManifestError("pass_count exceeds attempts for record " + r.id);
  return r;
}

std::string to_jsonl(const DatasetRecord& r) { return to_json(r).dump(); }

DatasetRecord parse_record(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ManifestError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ManifestError("record must be a JSON object");
  return record_from_json(j);
}

Manifest read_manifest(std::istream& in) {
  Manifest m;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      m.records.push_back(parse_record(line));
    } catch (const ManifestError& e) {
      m.errors.push_back({n, e.what()});
    }
  }
  return m;
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest: " + path);
  return read_manifest(in);
}

void write_manifest(std::ostream& out, const std::vector<DatasetRecord>& records) {
  for (const auto& r : records) out << to_jsonl(r) << '\n';
}

void save_manifest(const std::string& path, const std::vector<DatasetRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ManifestError("cannot write manifest: " + path);
  write_manifest(out, records);
  if (!out) throw ManifestError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Uncertainty filtering

ordered_json to_json(const SampleTranscript& t) {
  return {{"id", t.record_id}, {"attempt", t.attempt}, {"answer", t.answer}, {"correct", t.correct}};
}

SampleTranscript transcript_from_json(const json& j) {
  return {j.at("id").get<std::string>(), j.at("attempt").get<int>(), j.at("answer").get<std::string>(),
          j.at("correct").get<bool>()};
}

toolkit::ChatRequest sampling_request(const DatasetRecord& record, int attempt, double temperature) {
  toolkit::ChatRequest req;
  req.temperature = temperature;
  req.seed = static_cast<std::uint64_t>(attempt);
  req.messages.push_back({"user", prompts::fill(prompts::direct_answer(), "question", record.question), {record.image}});
  return req;
}

namespace {

struct Sampled {
  std::optional<int> pass_count;
  std::vector<SampleTranscript> transcripts;
  std::string failure;
};

void place(FilterResult& out, DatasetRecord record, std::optional<int> pass_count, int n) {
  if (!pass_count) {
    out.unresolved.push_back(std::move(record));
    return;
  }
  record.pass_count = *pass_count;
  record.attempts = n;
  if (*pass_count < n) {
    out.kept.push_back(std::move(record));
  } else {
    out.discarded.push_back(std::move(record));
  }
}

}  // namespace

FilterResult uncertainty_filter(const std::vector<DatasetRecord>& records, toolkit::ChatClient& sampler,
                                reward::Judge& judge, int n, std::size_t parallelism, double temperature) {
  if (n < 1) throw std::invalid_argument("N must be at least 1");
  auto sampled = parallel_map(records.size(), parallelism, [&](std::size_t i) {
    const auto& record = records[i];
    Sampled s;
    int correct = 0;
    for (int attempt = 0; attempt < n; ++attempt) {
      auto answer = sampler.complete(sampling_request(record, attempt, temperature));
      if (!answer) {
        s.failure = record.id + ": sampler " + answer.error().message();
        return s;
      }
      auto verdict = judge.judge(record.question, record.answers, *answer);
      if (!verdict) {
        s.failure = record.id + ": judge " + verdict.error().message();
        return s;
      }
      const bool ok = *verdict == reward::Verdict::Correct;
      correct += ok ? 1 : 0;
      s.transcripts.push_back({record.id, attempt, *answer, ok});
    }
    s.pass_count = correct;
    return s;
  });

  FilterResult out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& s = sampled[i];
    for (auto& t : s.transcripts) out.transcripts.push_back(std::move(t));
    if (!s.failure.empty()) out.failures.push_back(std::move(s.failure));
    place(out, records[i], s.pass_count, n);
  }
  return out;
}

FilterResult replay_filter(const std::vector<DatasetRecord>& records, const std::vector<SampleTranscript>& transcripts,
                           int n) {
  if (n < 1) throw std::invalid_argument("N must be at least 1");
  std::map<std::string, std::map<int, const SampleTranscript*>> by_record;
  for (const auto& t : transcripts)
    if (t.attempt >= 0 && t.attempt < n) by_record[t.record_id][t.attempt] = &t;

  FilterResult out;
  for (const auto& record : records) {
    auto it = by_record.find(record.id);
    std::optional<int> pass_count;
    if (it != by_record.end() && static_cast<int>(it->second.size()) == n) {
      int correct = 0;
      for (const auto& [attempt, t] : it->second) {
        correct += t->correct ? 1 : 0;
        out.transcripts.push_back(*t);
      }
      pass_count = correct;
    } else {
      out.failures.push_back(record.id + ": incomplete transcripts");
    }
    place(out, record, pass_count, n);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Skeletons

TrajectorySkeleton synthesize_skeleton(const DatasetRecord& record) {
  TrajectorySkeleton s;
  s.record_id = record.id;
  s.question = record.question;
  s.image = record.image;
  s.answers = record.answers;
  s.search_type = record.search_type;
  s.answer_without_tools = record.search_type == SearchType::SearchFree;
  auto fill = [&](std::string_view tmpl) { return prompts::fill(tmpl, "question", record.question); };
  s.slots = {
      {"Glance", "Analyze the whole image and search it when global context is needed.", fill(prompts::round1()), ""},
      {"Decision", "Decide whether to answer, search text, or focus on a region.", fill(prompts::after_image_search()), ""},
      {"Gaze", "Ground a described region, select the relevant crops and search them.", fill(prompts::after_gaze()), ""},
  };
  s.checklist = {
      {"Answer Accuracy", "The final answer is factually correct.", std::nullopt},
      {"Visual Rationality", "Every cropped region is logically relevant to the question.", std::nullopt},
  };
  return s;
}

ordered_json to_json(const TrajectorySkeleton& s) {
  ordered_json slots = ordered_json::array();
  for (const auto& slot : s.slots)
    slots.push_back({{"name", slot.name}, {"purpose", slot.purpose}, {"prompt", slot.prompt}, {"content", slot.content}});
  ordered_json checklist = ordered_json::array();
  for (const auto& c : s.checklist)
    checklist.push_back({{"name", c.name},
                         {"criterion", c.criterion},
                         {"passed", c.passed ? ordered_json(*c.passed) : ordered_json(nullptr)}});
  ordered_json j;
  j["id"] = s.record_id;
  j["question"] = s.question;
  j["image"] = s.image;
  j["answers"] = s.answers;
  j["search_type"] = to_string(s.search_type);
  j["answer_without_tools"] = s.answer_without_tools;
  j["slots"] = std::move(slots);
  j["checklist"] = std::move(checklist);
  return j;
}

TrajectorySkeleton skeleton_from_json(const json& j) {
  TrajectorySkeleton s;
  s.record_id = j.at("id").get<std::string>();
  s.question = j.at("question").get<std::string>();
  s.image = j.at("image").get<std::string>();
  s.answers = j.at("answers").get<std::vector<std::string>>();
  auto t = search_type_from_string(j.at("search_type").get<std::string>());
  if (!t) throw ManifestError("unknown search_type in skeleton");
  s.search_type = *t;
  s.answer_without_tools = j.at("answer_without_tools").get<bool>();
  for (const auto& slot : j.at("slots"))
    s.slots.push_back({slot.at("name").get<std::string>(), slot.at("purpose").get<std::string>(),
                       slot.at("prompt").get<std::string>(), slot.at("content").get<std::string>()});
  for (const auto& c : j.at("checklist")) {
    ChecklistItem item{c.at("name").get<std::string>(), c.at("criterion").get<std::string>(), std::nullopt};
    if (!c.at("passed").is_null()) item.passed = c.at("passed").get<bool>();
    s.checklist.push_back(std::move(item));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Stratification

StratifyResult stratify(std::vector<DatasetRecord> records, Band band) {
  if (!(band.low >= 0.0 && band.low <= band.high && band.high <= 1.0))
    throw std::invalid_argument("band must satisfy 0 <= low <= high <= 1");
  StratifyResult out;
  for (auto& r : records) {
    const auto rate = r.pass_rate();
    if (!rate) throw MissingPassRate("record " + r.id + " has no measured pass rate");
    r.level.reset();
    if (*rate >= band.low && *rate <= band.high) {
      r.level = Level::L1;
      out.level1.push_back(r.id);
      out.level2.push_back(r.id);
    } else if (*rate == 0.0) {
      r.level = Level::L2;
      out.level2.push_back(r.id);
    } else {
      out.unassigned.push_back(r.id);
    }
  }
  out.records = std::move(records);
  return out;
}

// ---------------------------------------------------------------------------
// Composition

double round_one_decimal(double value) { return std::round(value * 10.0) / 10.0; }

CompositionReport composition_report(const std::vector<DatasetRecord>& records) {
  std::map<SearchType, std::size_t> counts;
  for (const auto& r : records) {
    if (r.search_type == SearchType::Unlabeled) throw UnlabeledRecords("record " + r.id + " has no search type");
    ++counts[r.search_type];
  }
  CompositionReport report;
  report.total = records.size();
  for (auto type : kLabeledTypes) {
    CompositionRow row{type, counts[type], std::nullopt, std::nullopt};
    if (report.total > 0) {
      row.ratio = static_cast<double>(row.count) / static_cast<double>(report.total);
      row.percent = round_one_decimal(*row.ratio * 100.0);
    }
    report.rows.push_back(row);
  }
  return report;
}

ordered_json to_json(const CompositionReport& report) {
  ordered_json rows = ordered_json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"search_type", to_string(row.type)},
                    {"count", row.count},
                    {"ratio", row.ratio ? ordered_json(*row.ratio) : ordered_json(nullptr)},
                    {"percent", row.percent ? ordered_json(*row.percent) : ordered_json(nullptr)}});
  }
  return {{"total", report.total}, {"rows", rows}};
}

std::string composition_table(const CompositionReport& report) {
  std::ostringstream out;
  out << "search_type\tcount\tpercent\n";
  for (const auto& row : report.rows) {
    out << to_string(row.type) << '\t' << row.count << '\t';
    if (row.percent) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.1f", *row.percent);
      out << buf;
    } else {
      out << "-";
    }
    out << '\n';
  }
  out << "Total\t" << report.total << '\t' << (report.total ? "100.0" : "-") << '\n';
  return out.str();
}

}  // namespace gog::datapipe

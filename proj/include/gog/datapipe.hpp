#pragma once

// Dataset manifests and the construction stages over them: uncertainty
// filtering, trajectory skeletons, difficulty stratification and composition
// accounting. Manifests are JSON Lines with the fields
//   id, question, image, answers, pass_count, attempts, search_type, level
// and every stage reads and writes the same format.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gog/errors.hpp"
#include "gog/reward.hpp"
#include "gog/toolkit.hpp"

namespace gog::datapipe {

inline constexpr int kDefaultFilterAttempts = 4;

enum class SearchType { SearchFree, TextOnly, ImageOnly, Both, Unlabeled };
enum class Level { L1, L2 };  // L1 records belong to Level 2 as well

std::string_view to_string(SearchType type);
std::string_view to_string(Level level);
std::optional<SearchType> search_type_from_string(std::string_view name);
std::optional<Level> level_from_string(std::string_view name);

struct DatasetRecord {
  std::string id;
  std::string question;
  std::string image;
  std::vector<std::string> answers;
  std::optional<int> pass_count;
  std::optional<int> attempts;  // number of judged samples behind pass_count
  SearchType search_type = SearchType::Unlabeled;
  std::optional<Level> level;

  std::optional<double> pass_rate() const;
  bool operator==(const DatasetRecord&) const = default;
};

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::ordered_json to_json(const DatasetRecord& r);
DatasetRecord record_from_json(const nlohmann::json& j);
std::string to_jsonl(const DatasetRecord& r);
/// Throws ManifestError on malformed JSON, missing fields or pass_count > attempts.
DatasetRecord parse_record(std::string_view line);

struct LineError {
  std::size_t line;  // 1-based
  std::string message;
};

struct Manifest {
  std::vector<DatasetRecord> records;
  std::vector<LineError> errors;  // malformed lines, skipped
};

/// Blank lines are ignored; malformed lines are reported and skipped.
Manifest read_manifest(std::istream& in);
Manifest load_manifest(const std::string& path);
void write_manifest(std::ostream& out, const std::vector<DatasetRecord>& records);
void save_manifest(const std::string& path, const std::vector<DatasetRecord>& records);

// ---------------------------------------------------------------------------
// Uncertainty filtering

struct SampleTranscript {
  std::string record_id;
  int attempt = 0;
  std::string answer;
  bool correct = false;
  bool operator==(const SampleTranscript&) const = default;
};

nlohmann::ordered_json to_json(const SampleTranscript& t);
SampleTranscript transcript_from_json(const nlohmann::json& j);

struct FilterResult {
  std::vector<DatasetRecord> kept;       // pass_count < N
  std::vector<DatasetRecord> discarded;  // pass_count == N
  std::vector<DatasetRecord> unresolved; // sampler or judge failed
  std::vector<SampleTranscript> transcripts;
  std::vector<std::string> failures;
};

/// Direct-answer prompt for one attempt; the attempt number is the request seed.
toolkit::ChatRequest sampling_request(const DatasetRecord& record, int attempt, double temperature);

/// Samples each question N times, judges each answer, and keeps the record
/// iff fewer than N answers were correct. Records are processed concurrently;
/// output order follows input order.
FilterResult uncertainty_filter(const std::vector<DatasetRecord>& records, toolkit::ChatClient& sampler,
                                reward::Judge& judge, int n = kDefaultFilterAttempts, std::size_t parallelism = 4,
                                double temperature = 1.0);

/// The same decision computed from persisted transcripts, without model calls.
/// Records lacking a complete set of N transcripts are unresolved.
FilterResult replay_filter(const std::vector<DatasetRecord>& records, const std::vector<SampleTranscript>& transcripts,
                           int n = kDefaultFilterAttempts);

// ---------------------------------------------------------------------------
// Skeleton synthesis

struct SkeletonSlot {
  std::string name;     // Glance, Decision, Gaze
  std::string purpose;
  std::string prompt;   // phase prompt with the question filled in
  std::string content;  // left empty for the teacher or annotator
  bool operator==(const SkeletonSlot&) const = default;
};

struct ChecklistItem {
  std::string name;
  std::string criterion;
  std::optional<bool> passed;
  bool operator==(const ChecklistItem&) const = default;
};

struct TrajectorySkeleton {
  std::string record_id;
  std::string question;
  std::string image;
  std::vector<std::string> answers;
  SearchType search_type = SearchType::Unlabeled;
  bool answer_without_tools = false;
  std::vector<SkeletonSlot> slots;
  std::vector<ChecklistItem> checklist;
  bool operator==(const TrajectorySkeleton&) const = default;
};

TrajectorySkeleton synthesize_skeleton(const DatasetRecord& record);
nlohmann::ordered_json to_json(const TrajectorySkeleton& s);
TrajectorySkeleton skeleton_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Stratification

struct Band {
  double low = 0.25;
  double high = 0.75;
};

struct StratifyResult {
  std::vector<DatasetRecord> records;  // input order, level assigned where applicable
  std::vector<std::string> level1;
  std::vector<std::string> level2;     // includes every Level 1 id
  std::vector<std::string> unassigned;
};

/// Level 1: pass rate inside the closed band. Level 2: Level 1 plus pass rate
/// exactly 0. Throws MissingPassRate when a record has no measured pass rate.
StratifyResult stratify(std::vector<DatasetRecord> records, Band band = {});

// ---------------------------------------------------------------------------
// Composition

struct CompositionRow {
  SearchType type;
  std::size_t count = 0;
  std::optional<double> ratio;    // exact fraction; absent for an empty set
  std::optional<double> percent;  // ratio * 100 rounded to one decimal
};

struct CompositionReport {
  std::vector<CompositionRow> rows;  // SearchFree, TextOnly, ImageOnly, Both
  std::size_t total = 0;
};

/// Throws UnlabeledRecords if any record lacks a search type.
CompositionReport composition_report(const std::vector<DatasetRecord>& records);

/// Rounds half away from zero to one decimal place.
double round_one_decimal(double value);

nlohmann::ordered_json to_json(const CompositionReport& report);
std::string composition_table(const CompositionReport& report);

}  // namespace gog::datapipe

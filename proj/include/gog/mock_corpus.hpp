#pragma once

// Canned data behind every mock tool and the scripted policy. The corpus is a
// JSON document versioned with the tests; see data/mock_corpus.json.

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gog/image.hpp"
#include "gog/toolkit.hpp"

namespace gog::mock {

inline constexpr std::string_view kCorpusVersion = "mock-corpus/v1";

struct CorpusImage {
  std::string id;
  int width = 0;
  int height = 0;
  std::uint64_t seed = 0;
};

struct ScriptedEpisode {
  std::string id;
  std::string question;
  std::string image;
  std::vector<std::string> answers;
  std::vector<std::vector<std::string>> scripts;  // alternative turn sequences
};

struct Corpus {
  std::string version;
  std::vector<CorpusImage> images;
  // Keyed by image ref; lookups go through the content hash of the resolved pixels.
  std::map<std::string, std::vector<toolkit::ImageSearchResult>> image_search;
  // image ref -> normalized description -> boxes
  std::map<std::string, std::map<std::string, std::vector<toolkit::GroundingBox>>> grounding;
  // normalized query -> results
  std::map<std::string, std::vector<toolkit::WebResult>> web_search;
  std::map<std::string, std::string> pages;
  std::vector<ScriptedEpisode> episodes;

  const ScriptedEpisode* find_episode(std::string_view question) const;
};

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lowercase, trim, and collapse internal whitespace.
std::string normalize_key(std::string_view text);

Corpus parse_corpus(std::string_view json_text);
Corpus load_corpus(const std::string& path);

/// Path of the bundled corpus (data/mock_corpus.json in the source tree).
std::string default_corpus_path();

/// Registers every corpus image in the store.
void register_images(const Corpus& corpus, ImageStore& store);

}  // namespace gog::mock

#include "gog/mock_corpus.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace gog::mock {

using nlohmann::json;

std::string normalize_key(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

const ScriptedEpisode* Corpus::find_episode(std::string_view question) const {
  const auto key = normalize_key(question);
  for (const auto& ep : episodes)
    if (normalize_key(ep.question) == key) return &ep;
  return nullptr;
}

namespace {

toolkit::GroundingBox parse_box(const json& j) {
  const auto& b = j.at("bbox");
  if (!b.is_array() || b.size() != 4) throw CorpusError("bbox must have four coordinates");
  toolkit::GroundingBox box;
  box.bbox = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
  box.score = j.at("score").get<double>();
  return box;
}

}  // namespace

Corpus parse_corpus(std::string_view json_text) {
  Corpus c;
  try {
    const auto doc = json::parse(json_text);
    // Named copies: iterating items() of a temporary would dangle.
    auto section = [&](const char* key, json fallback) { return doc.contains(key) ? doc.at(key) : fallback; };
    const json image_search = section("image_search", json::object());
    const json grounding = section("grounding", json::array());
    const json web_search = section("web_search", json::object());
    const json pages = section("pages", json::object());
    const json episodes = section("episodes", json::array());
    c.version = doc.at("version").get<std::string>();
    if (c.version != kCorpusVersion) throw CorpusError("unsupported corpus version: " + c.version);

    for (const auto& img : doc.at("images"))
      c.images.push_back({img.at("id").get<std::string>(), img.at("width").get<int>(), img.at("height").get<int>(),
                          img.at("seed").get<std::uint64_t>()});

    for (const auto& [ref, hits] : image_search.items()) {
      auto& list = c.image_search[ref];
      for (const auto& h : hits)
        list.push_back({h.at("thumbnail").get<std::string>(), h.at("title").get<std::string>(), 0});
    }

    for (const auto& entry : grounding) {
      const auto ref = entry.at("image").get<std::string>();
      const auto desc = normalize_key(entry.at("description").get<std::string>());
      auto& boxes = c.grounding[ref][desc];
      for (const auto& b : entry.at("boxes")) {
        auto box = parse_box(b);
        box.query = entry.at("description").get<std::string>();
        boxes.push_back(std::move(box));
      }
    }

    for (const auto& [query, results] : web_search.items()) {
      auto& list = c.web_search[normalize_key(query)];
      for (const auto& r : results)
        list.push_back({r.at("url").get<std::string>(), r.at("title").get<std::string>(),
                        r.value("snippet", std::string())});
    }

    for (const auto& [url, text] : pages.items()) c.pages[url] = text.get<std::string>();

    for (const auto& ep : episodes) {
      ScriptedEpisode e;
      e.id = ep.at("id").get<std::string>();
      e.question = ep.at("question").get<std::string>();
      e.image = ep.at("image").get<std::string>();
      e.answers = ep.at("answers").get<std::vector<std::string>>();
      e.scripts = ep.at("scripts").get<std::vector<std::vector<std::string>>>();
      if (e.scripts.empty()) throw CorpusError("episode " + e.id + " has no scripts");
      c.episodes.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw CorpusError(std::string("malformed corpus: ") + e.what());
  }
  return c;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str());
}

std::string default_corpus_path() { return std::string(GOG_DATA_DIR) + "/mock_corpus.json"; }

void register_images(const Corpus& corpus, ImageStore& store) {
  for (const auto& img : corpus.images) store.add_synthetic(img.id, img.width, img.height, img.seed);
}

}  // namespace gog::mock

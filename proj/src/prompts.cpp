#include "gog/prompts.hpp"

namespace gog::prompts {

std::string fill(std::string_view tmpl, std::string_view name, std::string_view value) {
  const std::string key = "{" + std::string(name) + "}";
  std::string out;
  out.reserve(tmpl.size() + value.size());
  std::size_t pos = 0;
  for (auto hit = tmpl.find(key); hit != std::string_view::npos; hit = tmpl.find(key, pos)) {
    out.append(tmpl.substr(pos, hit - pos));
    out.append(value);
    pos = hit + key.size();
  }
  out.append(tmpl.substr(pos));
  return out;
}

}  // namespace gog::prompts

#include "critsel/semantics.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "critsel/errors.hpp"
#include "critsel/log.hpp"

namespace critsel {

namespace {

bool ends_with(const std::string& s, const char* suffix) {
  const std::size_t n = std::char_traits<char>::length(suffix);
  return s.size() >= n && s.compare(s.size() - n, n, suffix) == 0;
}

std::string singularize(std::string token) {
  if (token.size() < 4 || token.back() != 's') return token;
  if (ends_with(token, "ss") || ends_with(token, "us") || ends_with(token, "is")) {
    return token;
  }
  if (ends_with(token, "ies")) {
    token.erase(token.size() - 3);
    token += 'y';
    return token;
  }
  if (ends_with(token, "es")) {
    const std::string stem = token.substr(0, token.size() - 2);
    if (ends_with(stem, "ch") || ends_with(stem, "sh") || ends_with(stem, "ss") ||
        ends_with(stem, "x") || ends_with(stem, "z") || ends_with(stem, "o")) {
      return stem;  // boxes -> box, dishes -> dish, potatoes -> potato
    }
    token.pop_back();  // planes -> plane
    return token;
  }
  token.pop_back();
  return token;
}

std::string join_tokens(const std::vector<std::string>& tokens, std::size_t first,
                        std::size_t count) {
  std::string key;
  for (std::size_t i = 0; i < count; ++i) {
    if (i) key += ' ';
    key += tokens[first + i];
  }
  return key;
}

}  // namespace

std::vector<std::string> normalize_caption(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalpha(c)) {
      current += static_cast<char>(std::tolower(c));
    } else if (!current.empty()) {
      tokens.push_back(singularize(std::move(current)));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(singularize(std::move(current)));
  return tokens;
}

ConceptMap ConceptMap::identity(const Vocabulary& vocab, int max_ngram) {
  ConceptMap map(max_ngram);
  for (const Category& cat : vocab.categories()) {
    const auto tokens = normalize_caption(cat.name);
    if (tokens.empty()) continue;
    if (static_cast<int>(tokens.size()) > max_ngram) {
      log::warn("category name \"" + cat.name + "\" exceeds " +
                std::to_string(max_ngram) + " tokens; not matchable from captions");
      continue;
    }
    map.add(join_tokens(tokens, 0, tokens.size()), cat.id);
  }
  return map;
}

ConceptMap ConceptMap::from_tsv(const std::string& path, const Vocabulary& vocab,
                                const LoadOptions& opts, int max_ngram) {
  std::ifstream in(path);
  if (!in.good()) {
    throw InputError(path + ": cannot open concept map");
  }

  ConceptMap map = identity(vocab, max_ngram);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;

    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw InputError(path + ":" + std::to_string(line_no) +
                       ": expected \"lemma<TAB>category_name\"");
    }
    const std::string lemma_raw = line.substr(0, tab);
    std::string name = line.substr(tab + 1);
    while (!name.empty() && (name.back() == '\r' || name.back() == ' ')) name.pop_back();
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

    const Category* cat = vocab.find_name(name);
    if (!cat) {
      if (opts.strict) {
        throw InputError(path + ":" + std::to_string(line_no) +
                         ": unknown category name \"" + name + "\"");
      }
      log::warn(path + ":" + std::to_string(line_no) + ": skipping entry for unknown category \"" +
                name + "\"");
      continue;
    }
    const auto tokens = normalize_caption(lemma_raw);
    if (tokens.empty() || static_cast<int>(tokens.size()) > max_ngram) {
      if (opts.strict) {
        throw InputError(path + ":" + std::to_string(line_no) +
                         ": lemma must be 1.." + std::to_string(max_ngram) + " tokens");
      }
      log::warn(path + ":" + std::to_string(line_no) + ": skipping unusable lemma \"" +
                lemma_raw + "\"");
      continue;
    }
    map.add(join_tokens(tokens, 0, tokens.size()), cat->id);
  }
  return map;
}

void ConceptMap::add(const std::string& lemma_ngram, std::int64_t category_id) {
  entries_[lemma_ngram] = category_id;
}

const std::int64_t* ConceptMap::find(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::set<std::int64_t> match_categories(const std::vector<std::string>& tokens,
                                        const ConceptMap& cmap) {
  std::set<std::int64_t> matched;
  const std::size_t n = tokens.size();
  std::size_t i = 0;
  while (i < n) {
    std::size_t consumed = 1;
    const std::size_t longest = std::min<std::size_t>(cmap.max_ngram(), n - i);
    for (std::size_t len = longest; len >= 1; --len) {
      const std::string key = join_tokens(tokens, i, len);
      if (const std::int64_t* cat = cmap.find(key)) {
        matched.insert(*cat);
        consumed = len;
        break;
      }
    }
    i += consumed;
  }
  return matched;
}

TypicalityScores typicality(const CaptionSet& captions, const ConceptMap& cmap) {
  TypicalityScores scores;
  scores.image_id = captions.image_id;
  scores.caption_count = captions.captions.size();

  std::map<std::int64_t, std::size_t> df;
  for (std::size_t i = 0; i < captions.captions.size(); ++i) {
    std::vector<std::string> tokens;
    if (i < captions.pre_tagged.size() && !captions.pre_tagged[i].empty()) {
      // Externally tagged lemmas: trust them, lowercase only.
      for (std::string t : captions.pre_tagged[i]) {
        std::transform(t.begin(), t.end(), t.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        tokens.push_back(std::move(t));
      }
    } else {
      tokens = normalize_caption(captions.captions[i]);
    }
    for (std::int64_t cat : match_categories(tokens, cmap)) {
      df[cat]++;
    }
  }
  for (const auto& [cat, count] : df) {
    scores.per_category[cat] =
        static_cast<double>(count) / static_cast<double>(scores.caption_count);
  }
  return scores;
}

}  // namespace critsel

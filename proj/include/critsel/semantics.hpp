#ifndef CRITSEL_SEMANTICS_HPP
#define CRITSEL_SEMANTICS_HPP

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "critsel/coco_io.hpp"
#include "critsel/dataset.hpp"

namespace critsel {

// Lowercases, splits on non-alphabetic runs, and singularizes each token
// with a fixed suffix table:
//   - length < 4, or ending in "ss", "us", "is": unchanged
//   - "ies" -> "y"                       (puppies -> puppy)
//   - "es" after ch/sh/ss/x/z/o: drop "es"  (boxes -> box, dishes -> dish)
//   - other "es": drop the final "s"     (planes -> plane)
//   - trailing "s": dropped              (dogs -> dog)
std::vector<std::string> normalize_caption(const std::string& text);

// Lemma n-grams (1..max_ngram lowercase tokens, single-space-joined) mapped
// to category ids. Stands in for an external concept resolver: keys are the
// normalized category names plus any synonyms from a TSV table.
class ConceptMap {
 public:
  static constexpr int kDefaultMaxNgram = 3;

  explicit ConceptMap(int max_ngram = kDefaultMaxNgram) : max_ngram_(max_ngram) {}

  // Identity entries for every category name in the vocabulary.
  static ConceptMap identity(const Vocabulary& vocab, int max_ngram = kDefaultMaxNgram);

  // Identity entries plus synonyms from a UTF-8 TSV file with one
  // "lemma-ngram<TAB>category_name" per line; '#' starts a comment.
  // Category names must resolve against the vocabulary; unresolvable
  // lines are skipped with a warning (error when strict).
  static ConceptMap from_tsv(const std::string& path, const Vocabulary& vocab,
                             const LoadOptions& opts = {},
                             int max_ngram = kDefaultMaxNgram);

  void add(const std::string& lemma_ngram, std::int64_t category_id);

  int max_ngram() const { return max_ngram_; }
  std::size_t size() const { return entries_.size(); }
  const std::unordered_map<std::string, std::int64_t>& entries() const { return entries_; }

  // nullptr when the key is unmapped.
  const std::int64_t* find(const std::string& key) const;

 private:
  int max_ngram_;
  std::unordered_map<std::string, std::int64_t> entries_;
};

// All category ids whose key n-gram occurs in the token sequence;
// longest match first, left to right, consumed tokens not reused.
std::set<std::int64_t> match_categories(const std::vector<std::string>& tokens,
                                        const ConceptMap& cmap);

// Per-category document frequency over an image's captions.
struct TypicalityScores {
  std::int64_t image_id = 0;
  std::map<std::int64_t, double> per_category;  // category id -> I_C in (0, 1]
  std::size_t caption_count = 0;
};

// I_C(c) = (number of captions mentioning a concept mapped to c) / |S|.
// A caption mentioning a category several times still counts once.
TypicalityScores typicality(const CaptionSet& captions, const ConceptMap& cmap);

}  // namespace critsel

#endif  // CRITSEL_SEMANTICS_HPP

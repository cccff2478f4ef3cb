#ifndef SARCASM_CORPUS_HPP
#define SARCASM_CORPUS_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sarcasm {

struct Message {
  std::string id;
  std::string author;
  std::vector<std::string> tokens;
  std::optional<int> label;  // 1 sarcastic, 0 literal, absent for history posts
};

struct Corpus {
  std::vector<Message> messages;                        // supervised set
  std::map<std::string, std::vector<Message>> histories;  // author -> prior posts
};

// Lowercase (ASCII bytes only, multi-byte UTF-8 passes through), split on
// whitespace, then replace user mentions with "@USER" and URLs with "URL".
// The sentinels are uppercase on purpose: post-lowercasing they cannot
// collide with real tokens.
std::vector<std::string> tokenize(std::string_view text);

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr std::string_view kPadWord = "<PAD>";
inline constexpr std::string_view kUnkWord = "<UNK>";

// Word table with reserved rows 0=<PAD> and 1=<UNK>. Real words get dense
// ids from 2 up, ordered by descending count then lexicographically, which
// makes construction deterministic. The unigram distribution covers real
// words only; reserved ids carry probability zero.
class Vocabulary {
 public:
  static Vocabulary build(const Corpus& corpus, std::int64_t min_count);

  int id(std::string_view word) const;  // kUnkId when absent
  bool contains(std::string_view word) const;
  const std::string& word(int id) const;
  std::int64_t count(int id) const;
  std::size_t size() const { return words_.size(); }  // includes PAD and UNK
  const std::vector<double>& unigram() const { return unigram_; }
  const std::vector<std::string>& words() const { return words_; }

  std::vector<int> to_ids(std::span<const std::string> tokens) const;

  void save(const std::filesystem::path& path) const;  // TSV word<TAB>id<TAB>count
  static Vocabulary load(const std::filesystem::path& path);

  // FNV-1a over "word\n" in id order; ties checkpoints to the table that
  // produced them
  std::uint64_t hash() const;

 private:
  std::vector<std::string> words_;
  std::vector<std::int64_t> counts_;
  std::vector<double> unigram_;
  std::unordered_map<std::string, int> index_;
  void finish();
};

// k near-equal folds over the labeled messages (indices follow corpus
// order). Split s uses fold s as test, fold (s+1) mod k as tune, and the
// rest as train, giving the 80/10/10 protocol at k=10.
struct FoldSplit {
  std::vector<std::vector<std::size_t>> folds;

  struct Roles {
    std::vector<std::size_t> train, tune, test;
  };
  Roles roles(std::size_t split) const;
  std::size_t k() const { return folds.size(); }
};

FoldSplit make_folds(const Corpus& corpus, std::size_t k, std::uint64_t seed);

// Two-community synthetic world. Users are assigned round-robin to groups;
// each group holds a stance, for or against, on every topic, and
// stance(g, t) is built so any two groups disagree on at least one topic
// (adjacent groups disagree on all of them). A labeled message is
// [topic, polarity, fillers...]; with probability sarcasm_rate the polarity
// word contradicts the author's stance, and the label marks exactly that
// contradiction, then flips with probability label_noise. History posts are
// always sincere: topic plus a stance-aligned polarity word, so user
// histories carry the group signal that labeled text alone lacks.
struct SyntheticSpec {
  int num_users = 0;
  int num_groups = 2;
  int num_topics = 1;
  int polarity_words_per_side = 1;  // vocabulary has this many pos* and neg* words
  int num_fillers = 4;
  int tokens_per_message = 5;  // topic + polarity + fillers
  int messages_per_user = 10;  // labeled count and history count per user
  double sarcasm_rate = 0.3;   // chance a message contradicts the author's stance
  double label_noise = 0.0;    // eta, flip probability applied to the label
  std::uint64_t seed = 1;

  void validate() const;
  int group_of_user(int user) const { return user % num_groups; }
  // +1 favorable, -1 unfavorable
  int stance(int group, int topic) const;
  int users_in_group(int group) const;
  std::string user_name(int user) const;

  static SyntheticSpec from_json(const std::string& text);
  static SyntheticSpec from_json_file(const std::filesystem::path& path);
  std::string to_json() const;
};

struct SyntheticCorpus {
  Corpus corpus;
  std::map<std::string, int> user_group;
  SyntheticSpec spec;
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

// Best achievable accuracy for a classifier that sees tokens but not the
// author, from exhaustive enumeration of the generator's outcome space
// (group x topic x sarcastic x polarity word x noise flip). Filler positions
// are drawn independently of group and label, so they cancel out of the
// posterior and the per-sequence label distribution depends only on the
// topic and polarity slots.
double content_bayes_accuracy(const SyntheticSpec& spec);

// JSONL, one object per line: {"id", "user", "text" or "tokens", "label"?}.
// The history file uses the same schema minus "label". Messages whose
// author has no history entry get an empty one so downstream code can rely
// on the key existing.
Corpus load_corpus(const std::filesystem::path& messages_path,
                   const std::filesystem::path& histories_path = {});
void save_corpus(const Corpus& corpus, const std::filesystem::path& messages_path,
                 const std::filesystem::path& histories_path = {});

// Sorted union of message authors and history keys.
std::vector<std::string> user_registry(const Corpus& corpus);

std::uint64_t registry_hash(std::span<const std::string> users);

}  // namespace sarcasm

#endif

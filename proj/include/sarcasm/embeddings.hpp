#ifndef SARCASM_EMBEDDINGS_HPP
#define SARCASM_EMBEDDINGS_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sarcasm/corpus.hpp"
#include "sarcasm/numerics.hpp"

namespace sarcasm {

// Keyed dense vectors: one row per word or per user.
struct EmbeddingTable {
  std::vector<std::string> keys;
  Matrix values;  // keys.size() x dim

  static EmbeddingTable with_keys(std::vector<std::string> keys, std::size_t dim);

  std::size_t dim() const { return values.cols(); }
  int row_of(std::string_view key) const;  // -1 when absent
  void rebuild_index();

 private:
  std::unordered_map<std::string, int> index_;
};

// Full-vocabulary log-linear word model: score(w | x) = weights[w] . x +
// bias[w]. Rows align with vocabulary ids; the reserved PAD/UNK rows exist
// but are outside the distribution's support.
struct WordSoftmaxParams {
  Matrix weights;  // |V| x dim
  Vector bias;     // |V|
};

enum class NegSampleKind { unigram_mle, uniform };

struct NegativeSamplingStrategy {
  NegSampleKind kind = NegSampleKind::unigram_mle;
  int negatives = 15;
  // weight words by count^unigram_power; 1 is the maximum-likelihood
  // unigram, 0.75 the smoothed variant. Ignored for uniform sampling.
  double unigram_power = 1.0;
};

struct User2VecConfig {
  int negatives = 15;
  int window = 5;
  double lr_initial = 0.025;
  double lr_final = 1e-4;  // linear decay endpoint across the epoch budget
  int max_epochs = 100;
  int patience = 5;
  double held_out_fraction = 0.1;
  std::uint64_t seed = 1;
  int jobs = 1;

  void validate() const;
  static User2VecConfig from_json_file(const std::filesystem::path& path);
};

struct SkipGramResult {
  EmbeddingTable words;       // input vectors, keys follow vocabulary ids
  WordSoftmaxParams softmax;  // output vectors; bias stays zero here
};

// Skip-gram with negative sampling over every message and history post in
// `text`. For each (center, context) pair within the window it raises
// sigma(e_center . w_context) and lowers sigma(e_center . w_neg) for k
// unigram-drawn negatives. PAD/UNK rows stay zero; tokens mapped to them are
// skipped. Requires more than k real words in the vocabulary.
SkipGramResult train_word_embeddings(const Corpus& text, const Vocabulary& vocab,
                                     std::size_t dim, int window, int negatives, int epochs,
                                     std::uint64_t seed);

// log P(word | x) under the softmax over real words (reserved ids excluded).
double word_log_prob(int word_id, std::span<const Real> x, const WordSoftmaxParams& params,
                     const Vocabulary& vocab);

struct HingeResult {
  Real loss;
  Vector grad_user;  // d loss / d user_vec
};

// sum over negatives l of max(0, 1 - e_i.u + e_l.u). Subgradient counts
// strictly positive terms only. The positive word must not appear among the
// negatives.
HingeResult hinge_loss(int word_id, std::span<const Real> user_vec,
                       std::span<const int> negatives, const EmbeddingTable& words);

// k ids drawn with replacement, never PAD/UNK and never in `exclude`;
// errors out when no candidate word remains. Replacement means k may exceed
// the candidate count.
std::vector<int> sample_negatives(const NegativeSamplingStrategy& strategy,
                                  const Vocabulary& vocab, std::span<const int> exclude, int k,
                                  Rng& rng);

// Reusable sampler; builds the weight table once.
class NegativeSampler {
 public:
  NegativeSampler(const NegativeSamplingStrategy& strategy, const Vocabulary& vocab);
  void sample(std::span<const int> exclude, int k, Rng& rng, std::vector<int>& out) const;

 private:
  std::vector<double> weights_;  // indexed by vocabulary id, 0 for reserved rows
  DiscreteSampler sampler_;
};

struct UserTrainingInfo {
  std::string user;
  int epochs_run = 0;
  int best_epoch = 0;  // 0 means the initialization was never improved on
  double best_likelihood = 0;
  bool empty_history = false;
};

struct User2VecResult {
  EmbeddingTable users;  // keys are the sorted user registry
  std::vector<UserTrainingInfo> report;
};

// Learns one vector per user from that user's history, with word vectors
// frozen. Each user trains independently: its own seed (derived from
// cfg.seed and the user id), a 90/10 train/held-out split of its posts, SGD
// on the hinge loss with the linear rate decay, and early stopping on the
// held-out likelihood with the best-scoring snapshot returned. The stopping
// metric scores words with the same frozen table the hinge ranks against
// (softmax over e_w . u, zero bias), so it measures exactly what training
// optimizes. Users are processed in parallel when cfg.jobs > 1; results do
// not depend on the schedule. Users with no history keep their initial row
// and are flagged.
User2VecResult train_user_embeddings(const Corpus& histories, const EmbeddingTable& words,
                                     const Vocabulary& vocab, const User2VecConfig& cfg,
                                     const NegativeSamplingStrategy& strategy);

// Mean over all tokens of the held-out sentences of log P(token | user_vec)
// under the word softmax. `words` only fixes the expected dimension.
double held_out_likelihood(std::span<const Real> user_vec,
                           const std::vector<std::vector<int>>& sentences,
                           const EmbeddingTable& words, const WordSoftmaxParams& softmax,
                           const Vocabulary& vocab);

// Text format: header "<count> <dim>", then one "<key> <v1> ... <vdim>" row
// per vector. Values print with 17 significant digits, so save followed by
// load reproduces every double bit for bit.
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable load_embeddings(const std::filesystem::path& path);

}  // namespace sarcasm

#endif

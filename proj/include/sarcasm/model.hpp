#ifndef SARCASM_MODEL_HPP
#define SARCASM_MODEL_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sarcasm/corpus.hpp"
#include "sarcasm/embeddings.hpp"
#include "sarcasm/numerics.hpp"

namespace sarcasm {

// cnn:         softmax(Y c + b), content only
// shallow_cue: softmax(Y (c ++ u) + b), user vector appended, no hidden layer
// cue:         softmax(Y relu(H (c ++ u) + h) + b)
// where c is the pooled convolution summary of the sentence and u the
// author's embedding row.
enum class Variant { cnn, shallow_cue, cue };

enum class UserInit { random, pretrained };

std::string to_string(Variant v);
Variant variant_from_string(std::string_view name);
std::string to_string(UserInit u);
UserInit user_init_from_string(std::string_view name);

struct HyperConfig {
  double dropout = 0.0;                      // drop probability on the layer feeding the output
  std::array<int, 3> filter_heights{1, 2, 3};  // strictly increasing
  int feature_maps = 4;                      // per filter height
  int hidden_size = 0;                       // required >= 1 for the cue variant
  int embedding_dim = 8;
  Variant variant = Variant::cue;
  UserInit user_init = UserInit::random;
  bool freeze_embeddings = false;  // hold E fixed during supervised training

  void validate() const;
  static HyperConfig from_json_file(const std::filesystem::path& path);
  std::string to_json() const;
};

// All trainable tensors plus the key lists that tie rows to words and users.
// Filter banks are stored stacked: bank b is (feature_maps * height_b) x d,
// with filter j occupying rows [j * height_b, (j + 1) * height_b).
struct ModelParams {
  HyperConfig hyper;
  std::vector<std::string> vocab_words;  // row keys of E, vocabulary id order
  std::vector<std::string> user_ids;     // row keys of U, registry order
  std::uint64_t init_seed = 0;

  Matrix embeddings;                   // |V| x d, PAD row pinned to zero
  Matrix users;                        // |users| x d; empty for cnn
  std::array<Matrix, 3> filters;       // stacked banks
  std::array<Vector, 3> filter_bias;   // feature_maps each
  Matrix hidden_weights;               // z x (3M + d); empty unless cue
  Vector hidden_bias;                  // z
  Matrix output_weights;               // 2 x feed dim
  Vector output_bias;                  // 2

  std::size_t summary_dim() const { return 3 * static_cast<std::size_t>(hyper.feature_maps); }
  std::size_t concat_dim() const;  // summary + d for user variants
  std::size_t feed_dim() const;    // width of the layer under the output weights
};

// Gradient tensors mirroring ModelParams. backward() accumulates, so zero()
// between batches.
struct Gradients {
  Matrix embeddings;
  Matrix users;
  std::array<Matrix, 3> filters;
  std::array<Vector, 3> filter_bias;
  Matrix hidden_weights;
  Vector hidden_bias;
  Matrix output_weights;
  Vector output_bias;

  static Gradients like(const ModelParams& params);
  void zero();
  void scale(Real factor);  // e.g. 1/batch for batch-mean gradients
};

// Bookkeeping from one encoding pass, enough to push gradients back through
// the pooled maps without keeping the full feature maps around.
struct EncodeTrace {
  std::vector<int> ids;  // after trailing-PAD normalization
  struct PooledMap {
    int position;  // window the max came from (first index on ties)
    Real preactivation;
  };
  std::vector<PooledMap> maps;  // 3 * feature_maps entries
};

// Sentence summary c: for each filter height, feature_maps maps of
// relu(<F, window> + bias) max-pooled over valid windows. Trailing PAD ids
// are stripped and the sentence re-padded to at least the tallest filter, so
// extra caller-side padding cannot change the result. PAD rows embed to
// zero.
Vector encode_sentence(std::span<const int> token_ids, const ModelParams& params,
                       EncodeTrace* trace = nullptr);

struct Prediction {
  std::array<Real, 2> probs;  // index 0 literal, 1 sarcastic
  Vector summary;             // the pooled sentence vector, kept for inspection
  int argmax() const { return probs[1] > probs[0] ? 1 : 0; }
};

// user_row indexes params.users; pass kNoUser for the cnn variant (other
// variants reject it). `dropout_mask` holds per-unit multipliers for the
// layer feeding the output weights (empty means no dropout; training passes
// 0 or 1/(1-D) entries). Pure: no hidden state, bitwise repeatable.
inline constexpr int kNoUser = -1;
Prediction forward(std::span<const int> token_ids, int user_row, const ModelParams& params,
                   std::span<const Real> dropout_mask = {});

// Cross-entropy gradients for one example, accumulated into `grads`.
// Returns the example loss. The PAD embedding row never receives gradient.
Real backward(std::span<const int> token_ids, int user_row, int gold,
              const ModelParams& params, std::span<const Real> dropout_mask, Gradients& grads);

// Glorot-uniform filters and dense layers, zero biases; word rows from
// U(-0.5/d, 0.5/d) or copied from `pretrained_words` by key; user rows from
// N(0, 0.01) or copied from `pretrained_users` when hyper.user_init says so.
// PAD and UNK rows start at zero in every case.
ModelParams init_params(const HyperConfig& hyper, const Vocabulary& vocab,
                        std::span<const std::string> users, std::uint64_t seed,
                        const EmbeddingTable* pretrained_words = nullptr,
                        const EmbeddingTable* pretrained_users = nullptr);

// Checkpoint: one-line JSON manifest (variant, hyper, vocab and registry
// hashes, init seed), then one labelled block per tensor in the embedding
// text format. Loading re-derives both hashes from the stored keys and
// refuses a file whose manifest disagrees; callers holding a vocabulary can
// additionally pass its hash to insist the checkpoint matches it.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path,
                            std::optional<std::uint64_t> expect_vocab_hash = std::nullopt,
                            std::optional<std::uint64_t> expect_user_hash = std::nullopt);

}  // namespace sarcasm

#endif

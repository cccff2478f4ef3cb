#ifndef SARCASM_HARNESS_HPP
#define SARCASM_HARNESS_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sarcasm/corpus.hpp"
#include "sarcasm/embeddings.hpp"
#include "sarcasm/model.hpp"
#include "sarcasm/numerics.hpp"
#include "sarcasm/rng.hpp"

namespace sarcasm {

// Supervised optimizer: minibatch AdaDelta with early stopping on a held-out
// slice of the training set.
struct OptimizerConfig {
  double rho = 0.95;
  double eps = 1e-6;
  int minibatch = 25;
  int max_epochs = 100;
  int patience = 10;
  double early_stop_fraction = 0.2;  // share of the train split reserved for early stopping

  void validate() const;
};

// One supervised example with tokens and author resolved to table rows.
struct LabeledExample {
  std::vector<int> token_ids;
  int user_row = kNoUser;
  int label = 0;
};

// Resolves every labeled message against the vocabulary and the user list
// (authors missing from `users` get kNoUser). Unlabeled messages are skipped,
// so indices line up with the folds of make_folds.
std::vector<LabeledExample> make_examples(const Corpus& corpus, const Vocabulary& vocab,
                                          std::span<const std::string> users);

// Inverted-dropout multipliers: each unit is 0 with probability `rate`,
// otherwise 1/(1-rate). rate 0 yields an empty mask (no-op).
Vector dropout_mask(std::size_t size, double rate, Rng& rng);

struct TrainReport {
  HyperConfig config;
  std::uint64_t seed = 0;
  std::vector<double> train_loss;          // mean example loss per epoch
  std::vector<double> early_stop_accuracy;  // entry 0 is the initialization, then one per epoch
  int best_epoch = 0;  // index into early_stop_accuracy; 0 means init was never beaten
  int epochs_run = 0;
  double tune_accuracy = -1;  // -1 when no tune set was given
  double test_accuracy = -1;  // filled by the caller that owns the test data
  double wall_clock_seconds = 0;  // reported to stderr only, never serialized
};

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

// Minibatch cross-entropy minimization with AdaDelta. A seeded
// `early_stop_fraction` slice of `train` is held out; after each epoch the
// slice's accuracy decides early stopping, and the best-scoring snapshot is
// returned. A fresh dropout mask is drawn per example per epoch. The word
// table E skips its update when hyper.freeze_embeddings is set. `tune` may be
// empty (the retraining path); when present its accuracy lands in the report.
TrainResult train_model(std::span<const LabeledExample> train,
                        std::span<const LabeledExample> tune, const ModelParams& init,
                        const OptimizerConfig& opt, std::uint64_t seed);

// Fraction of argmax-correct predictions; rejects an empty set.
double evaluate(const ModelParams& params, std::span<const LabeledExample> test);

using Predictor = std::function<int(const LabeledExample&)>;
double evaluate(const Predictor& predict, std::span<const LabeledExample> test);

// Hyperparameter grid. Configurations enumerate in nested order (dropout,
// heights, maps, hidden), and the search samples `budget` of them without
// replacement (budget 0 means half the space). Hidden sizes only shape the
// cue variant; runs over the other variants collapse the hidden axis to {0}.
struct SearchSpace {
  std::vector<double> dropouts;
  std::vector<std::array<int, 3>> filter_heights;
  std::vector<int> feature_maps;
  std::vector<int> hidden_sizes;
  std::size_t budget = 0;

  std::size_t size() const;
  std::size_t effective_budget() const;  // resolves the 0 default
  void validate() const;

  // The full-scale protocol grid: D {0,0.1,0.3,0.5}, H {(1,3,5)..(5,7,9)},
  // M {100,200,400,600}, Z {25,50,75,100}, budget 160 of 320.
  static SearchSpace full();
  // A compact grid sized for the synthetic corpus and the test suite.
  static SearchSpace reduced();
  // JSON object with dropouts, filter_heights, feature_maps, hidden_sizes,
  // and optional budget.
  static SearchSpace from_json_file(const std::filesystem::path& path);
};

struct TrialOutcome {
  HyperConfig config;
  std::size_t space_index = 0;  // position in the enumeration order
  double tune_accuracy = 0;
};

struct SearchReport {
  std::vector<TrialOutcome> trials;  // in the order they were run
  std::size_t best_trial = 0;
};

// Selection core with the training step injected, so tests can drive it with
// stub evaluators. `run_trial(config, trial_seed)` returns tune accuracy;
// trial seeds derive from `seed` and the configuration's enumeration index.
// Ties prefer fewer feature maps, then a smaller hidden layer, then lower
// dropout, then lexicographically smaller heights, then enumeration order.
SearchReport random_search_core(
    const SearchSpace& space, const HyperConfig& base, std::uint64_t seed,
    const std::function<double(const HyperConfig&, std::uint64_t)>& run_trial);

// Everything a neural cross-validation or search run needs beyond the data.
// The pretrained tables may be null; hyper.user_init decides whether the user
// table is consulted. Pointers are borrowed for the run's duration.
struct NeuralProtocol {
  HyperConfig base;  // variant, dims, init policy; search overwrites D/H/M/z
  SearchSpace space = SearchSpace::reduced();
  OptimizerConfig optimizer;
  const EmbeddingTable* pretrained_words = nullptr;
  const EmbeddingTable* pretrained_users = nullptr;
};

struct SearchOutcome {
  HyperConfig best;
  SearchReport report;
};

// Trains one model per sampled configuration (each trial with its own seeded
// early-stop reserve) and returns the tune-accuracy argmax.
SearchOutcome random_search(const NeuralProtocol& protocol,
                            std::span<const LabeledExample> train,
                            std::span<const LabeledExample> tune, const Vocabulary& vocab,
                            std::span<const std::string> users, std::uint64_t seed);

// One fold's work: fit on train, select on tune, hand back a predictor. The
// harness itself holds the test data and evaluates the predictor on it
// exactly once.
struct FoldContext {
  std::size_t fold = 0;
  std::uint64_t seed = 0;  // derived from the master seed and fold index
  std::span<const LabeledExample> train;
  std::span<const LabeledExample> tune;
};

struct FoldResult {
  Predictor predictor;
  std::string chosen_config;  // JSON fragment for the report
  double tune_accuracy = -1;
};

using FoldRunner = std::function<FoldResult(const FoldContext&)>;

struct CVReport {
  std::string model;
  std::uint64_t master_seed = 0;
  std::size_t test_evaluations = 0;  // one per fold when the protocol held
  std::vector<double> fold_accuracy;
  std::vector<double> fold_tune_accuracy;
  std::vector<std::string> chosen_config;  // per fold
  double mean = 0;
  double variance = 0;  // population variance over the k folds

  std::string to_json() const;
};

// k-fold protocol: fold s tests on fold s, tunes on fold (s+1) mod k, trains
// on the rest. Fold membership depends only on (corpus, k, master seed), so
// every model compared under one master seed sees identical splits. Folds may
// run concurrently (`jobs`); results are independent of the schedule.
CVReport cross_validate(const Corpus& corpus, const Vocabulary& vocab,
                        std::span<const std::string> users, std::size_t k,
                        std::uint64_t master_seed, const std::string& model_name,
                        const FoldRunner& runner, int jobs = 1);

// Fold runner for the neural variants: random search on (train, tune), then
// the winning configuration retrained on train ∪ tune with a fresh early-stop
// reserve. References stay with the caller.
FoldRunner neural_runner(const NeuralProtocol& protocol, const Vocabulary& vocab,
                         std::span<const std::string> users);

// Plain-text table of model name, mean accuracy, and variance per report.
std::string cv_summary_text(std::span<const CVReport> reports);

// ---- Linear baselines ----

inline constexpr std::array<double, 6> kRegularizationGrid{1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0};

// Binary indicator per vocabulary id (out-of-vocabulary tokens share the UNK
// bucket); length equals the vocabulary size.
Vector unigram_features(std::span<const std::string> tokens, const Vocabulary& vocab);
Vector unigram_features(std::span<const int> ids, std::size_t vocab_size);

// Sum of the embedding rows of the tokens; empty input gives the zero vector.
Vector nbow_features(std::span<const std::string> tokens, const Vocabulary& vocab,
                     const Matrix& embeddings);
Vector nbow_features(std::span<const int> ids, const Matrix& embeddings);

struct LogisticDataset {
  std::vector<Vector> features;
  std::vector<int> labels;  // 0 or 1
};

struct LogisticModel {
  Vector weights;
  Real bias = 0;
  double c = 0;  // regularization constant the model was fit with
  double final_loss = 0;
  double gradient_norm = 0;
  int iterations = 0;
  double tune_accuracy = -1;  // selection-time accuracy, set by train_logistic

  Real score(std::span<const Real> features) const;  // w.x + b
  int predict(std::span<const Real> features) const;
};

// Minimizes (1/n) sum log(1 + exp(-y z)) + |w|^2 / (2 c n) with y in {-1,+1}
// and the bias unregularized, by full-batch gradient descent with a
// backtracking line search, until the gradient norm drops under 1e-6 or the
// iteration cap. Training data must contain both classes.
LogisticModel fit_logistic(const LogisticDataset& train, double c, int max_iterations = 5000);

// Fits one model per grid value, keeps the best tune accuracy (ties go to
// the smallest c), then refits that c on train ∪ tune.
LogisticModel train_logistic(const LogisticDataset& train, const LogisticDataset& tune,
                             std::span<const double> c_grid = kRegularizationGrid);

using Featurizer = std::function<Vector(const LabeledExample&)>;

// Fold runner for the linear baselines.
FoldRunner logistic_runner(Featurizer featurize,
                           std::vector<double> c_grid = {kRegularizationGrid.begin(),
                                                         kRegularizationGrid.end()});

// ---- Paired per-seed comparisons ----

struct PairedRow {
  std::uint64_t seed = 0;
  double a = 0;
  double b = 0;
};

struct PairedComparison {
  std::string metric;
  std::string label_a;
  std::string label_b;
  std::string note;  // free-form context line, echoed by the renderers
  std::vector<PairedRow> rows;

  int wins_a() const;
  int wins_b() const;
  int ties() const;
  std::string to_text() const;
  std::string to_json() const;
};

// Runs `run(seed)` per seed; the callback returns {metric_a, metric_b}.
PairedComparison paired_comparison(
    std::string metric, std::string label_a, std::string label_b,
    std::span<const std::uint64_t> seeds,
    const std::function<std::array<double, 2>(std::uint64_t)>& run);

}  // namespace sarcasm

#endif

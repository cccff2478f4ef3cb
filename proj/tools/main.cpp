#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sarcasm/corpus.hpp"
#include "sarcasm/embeddings.hpp"
#include "sarcasm/errors.hpp"
#include "sarcasm/harness.hpp"
#include "sarcasm/model.hpp"
#include "sarcasm/numerics.hpp"
#include "sarcasm/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sarcasm;

namespace {

// Relative input paths resolve against SARCASM_DATA_DIR when it is set;
// outputs land exactly where the flags say.
fs::path resolve_input(const std::string& path) {
  fs::path p(path);
  if (p.is_absolute() || path.empty()) return p;
  if (const char* base = std::getenv("SARCASM_DATA_DIR")) return fs::path(base) / p;
  return p;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write: " + path.string());
  out << text;
  if (!out) throw FileError("write failed: " + path.string());
}

std::string format_real(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

Corpus load_inputs(const std::string& messages, const std::string& histories) {
  return load_corpus(resolve_input(messages),
                     histories.empty() ? fs::path() : resolve_input(histories));
}

// Word table whose rows must line up with vocabulary ids (the layout the
// embedding trainers emit).
EmbeddingTable load_id_aligned_table(const std::string& path, const Vocabulary& vocab,
                                     const char* what) {
  EmbeddingTable table = load_embeddings(resolve_input(path));
  if (table.keys.size() != vocab.size())
    throw std::invalid_argument(std::string(what) + ": table holds " +
                                std::to_string(table.keys.size()) + " rows, vocabulary has " +
                                std::to_string(vocab.size()));
  for (std::size_t id = 0; id < vocab.size(); ++id)
    if (table.keys[id] != vocab.word(static_cast<int>(id)))
      throw std::invalid_argument(std::string(what) + ": row " + std::to_string(id) +
                                  " is \"" + table.keys[id] + "\" but the vocabulary has \"" +
                                  vocab.word(static_cast<int>(id)) + "\"");
  return table;
}

struct OptimizerFlags {
  OptimizerConfig config;
  void attach(CLI::App* cmd) {
    cmd->add_option("--minibatch", config.minibatch, "Minibatch size");
    cmd->add_option("--max-epochs", config.max_epochs, "Epoch cap");
    cmd->add_option("--patience", config.patience, "Early-stop patience in epochs");
    cmd->add_option("--early-stop-fraction", config.early_stop_fraction,
                    "Share of the train split reserved for early stopping");
  }
};

struct HyperFlags {
  std::string hyper_file;
  std::string variant = "cue";
  std::string user_init = "random";
  double dropout = -1;
  std::vector<int> heights;
  int feature_maps = -1;
  int hidden_size = -1;
  int dim = -1;
  bool freeze_embeddings = false;

  CLI::Option* variant_opt = nullptr;
  CLI::Option* user_init_opt = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--hyper", hyper_file, "Hyperparameter JSON file (flags override it)");
    variant_opt = cmd->add_option("--variant", variant, "cnn, shallow-cue, or cue")
                      ->check(CLI::IsMember({"cnn", "shallow-cue", "cue"}));
    user_init_opt = cmd->add_option("--user-init", user_init, "random or pretrained")
                        ->check(CLI::IsMember({"random", "pretrained"}));
    cmd->add_option("--dropout", dropout, "Dropout rate on the layer feeding the output");
    cmd->add_option("--heights", heights, "Three increasing filter heights")->expected(3);
    cmd->add_option("--feature-maps", feature_maps, "Feature maps per filter height");
    cmd->add_option("--hidden", hidden_size, "Hidden layer width (cue variant)");
    cmd->add_option("--dim", dim, "Embedding dimension");
    cmd->add_flag("--freeze-embeddings", freeze_embeddings,
                  "Hold the word table fixed during supervised training");
  }

  HyperConfig build() const {
    HyperConfig h;
    if (!hyper_file.empty()) h = HyperConfig::from_json_file(resolve_input(hyper_file));
    if (variant_opt->count() || hyper_file.empty()) h.variant = variant_from_string(variant);
    if (user_init_opt->count() || hyper_file.empty())
      h.user_init = user_init_from_string(user_init);
    if (dropout >= 0) h.dropout = dropout;
    if (!heights.empty()) h.filter_heights = {heights[0], heights[1], heights[2]};
    if (feature_maps > 0) h.feature_maps = feature_maps;
    if (hidden_size >= 0) h.hidden_size = hidden_size;
    if (dim > 0) h.embedding_dim = dim;
    if (freeze_embeddings) h.freeze_embeddings = true;
    if (h.variant != Variant::cue) h.hidden_size = 0;
    return h;
  }
};

json train_report_json(const TrainReport& report) {
  json j;
  j["config"] = json::parse(report.config.to_json());
  j["seed"] = std::to_string(report.seed);
  j["epochs_run"] = report.epochs_run;
  j["best_epoch"] = report.best_epoch;
  j["train_loss"] = report.train_loss;
  j["early_stop_accuracy"] = report.early_stop_accuracy;
  if (report.tune_accuracy >= 0) j["tune_accuracy"] = report.tune_accuracy;
  if (report.test_accuracy >= 0) j["test_accuracy"] = report.test_accuracy;
  return j;
}

int run_synth(const std::string& spec_path, const std::string& out_path,
              const std::string& hist_path) {
  SyntheticSpec spec = SyntheticSpec::from_json_file(resolve_input(spec_path));
  SyntheticCorpus synth = generate_synthetic(spec);
  save_corpus(synth.corpus, out_path, hist_path.empty() ? fs::path() : fs::path(hist_path));
  std::fprintf(stderr, "wrote %zu labeled messages for %d users", synth.corpus.messages.size(),
               spec.num_users);
  if (!hist_path.empty()) {
    std::size_t history_posts = 0;
    for (const auto& [user, posts] : synth.corpus.histories) history_posts += posts.size();
    std::fprintf(stderr, ", %zu history posts", history_posts);
  }
  std::fprintf(stderr, "; content-only ceiling %.4f\n", content_bayes_accuracy(spec));
  return 0;
}

int run_vocab(const std::string& messages, const std::string& histories, std::int64_t min_count,
              const std::string& out_path) {
  Corpus corpus = load_inputs(messages, histories);
  Vocabulary vocab = Vocabulary::build(corpus, min_count);
  vocab.save(out_path);
  std::fprintf(stderr, "vocabulary: %zu entries (reserved rows included)\n", vocab.size());
  return 0;
}

int run_word2vec(const std::string& messages, const std::string& histories,
                 const std::string& vocab_path, std::size_t dim, int window, int negatives,
                 int epochs, std::uint64_t seed, const std::string& out_words,
                 const std::string& out_context) {
  Corpus corpus = load_inputs(messages, histories);
  Vocabulary vocab = Vocabulary::load(resolve_input(vocab_path));
  SkipGramResult result =
      train_word_embeddings(corpus, vocab, dim, window, negatives, epochs, seed);
  save_embeddings(result.words, out_words);
  if (!out_context.empty()) {
    EmbeddingTable context;
    context.keys = vocab.words();
    context.values = result.softmax.weights;
    context.rebuild_index();
    save_embeddings(context, out_context);
  }
  std::fprintf(stderr, "trained %zu word vectors of dimension %zu\n", result.words.keys.size(),
               dim);
  return 0;
}

int run_user2vec(const std::string& messages, const std::string& histories,
                 const std::string& vocab_path, const std::string& words_path,
                 const std::string& config_path, const std::string& neg, double neg_power,
                 CLI::Option* negatives_opt, int negatives, CLI::Option* epochs_opt, int epochs,
                 CLI::Option* seed_opt, std::uint64_t seed, int jobs,
                 const std::string& out_path, const std::string& report_path) {
  Corpus corpus = load_inputs(messages, histories);
  Vocabulary vocab = Vocabulary::load(resolve_input(vocab_path));
  EmbeddingTable words = load_id_aligned_table(words_path, vocab, "word table");

  User2VecConfig cfg;
  if (!config_path.empty()) cfg = User2VecConfig::from_json_file(resolve_input(config_path));
  if (negatives_opt->count()) cfg.negatives = negatives;
  if (epochs_opt->count()) cfg.max_epochs = epochs;
  if (seed_opt->count()) cfg.seed = seed;
  cfg.jobs = jobs;

  NegativeSamplingStrategy strategy;
  strategy.kind = neg == "uniform" ? NegSampleKind::uniform : NegSampleKind::unigram_mle;
  strategy.negatives = cfg.negatives;
  strategy.unigram_power = neg_power;

  User2VecResult result = train_user_embeddings(corpus, words, vocab, cfg, strategy);
  save_embeddings(result.users, out_path);
  if (!report_path.empty()) {
    json rows = json::array();
    for (const UserTrainingInfo& info : result.report) {
      json r;
      r["user"] = info.user;
      r["epochs_run"] = info.epochs_run;
      r["best_epoch"] = info.best_epoch;
      r["best_likelihood"] = info.best_likelihood;
      r["empty_history"] = info.empty_history;
      rows.push_back(std::move(r));
    }
    json j;
    j["sampling"] = neg;
    j["users"] = std::move(rows);
    write_text_file(report_path, j.dump(2) + "\n");
  }
  std::fprintf(stderr, "trained %zu user vectors (%s negatives)\n", result.users.keys.size(),
               neg.c_str());
  return 0;
}

int run_train(const std::string& messages, const std::string& histories,
              const std::string& vocab_path, const HyperFlags& hyper_flags,
              const OptimizerFlags& opt_flags, const std::string& words_path,
              const std::string& users_path, std::uint64_t seed, const std::string& out_path,
              const std::string& report_path) {
  Corpus corpus = load_inputs(messages, histories);
  Vocabulary vocab = Vocabulary::load(resolve_input(vocab_path));
  std::vector<std::string> registry = user_registry(corpus);

  HyperConfig hyper = hyper_flags.build();
  std::optional<EmbeddingTable> words, users;
  if (!words_path.empty()) {
    words = load_id_aligned_table(words_path, vocab, "word table");
    hyper.embedding_dim = static_cast<int>(words->dim());
  }
  if (!users_path.empty()) users = load_embeddings(resolve_input(users_path));
  hyper.validate();

  std::vector<LabeledExample> examples = make_examples(corpus, vocab, registry);
  ModelParams init = init_params(hyper, vocab, registry, derive_seed(seed, "init"),
                                 words ? &*words : nullptr, users ? &*users : nullptr);
  TrainResult result =
      train_model(examples, {}, init, opt_flags.config, derive_seed(seed, "train"));
  save_checkpoint(result.params, out_path);
  if (!report_path.empty())
    write_text_file(report_path, train_report_json(result.report).dump(2) + "\n");
  std::fprintf(stderr, "trained %s for %d epochs (best epoch %d) in %.1fs\n",
               to_string(hyper.variant).c_str(), result.report.epochs_run,
               result.report.best_epoch, result.report.wall_clock_seconds);
  return 0;
}

int run_cv(const std::string& messages, const std::string& histories,
           const std::string& vocab_path, const HyperFlags& hyper_flags,
           const OptimizerFlags& opt_flags, const std::string& words_path,
           const std::string& users_path, std::size_t k, std::uint64_t seed, int jobs,
           bool full_space, const std::string& space_path, const std::string& fixed_hyper,
           const std::string& out_path) {
  Corpus corpus = load_inputs(messages, histories);
  Vocabulary vocab = Vocabulary::load(resolve_input(vocab_path));
  std::vector<std::string> registry = user_registry(corpus);

  NeuralProtocol protocol;
  protocol.base = hyper_flags.build();
  protocol.optimizer = opt_flags.config;

  std::optional<EmbeddingTable> words, users;
  if (!words_path.empty()) {
    words = load_id_aligned_table(words_path, vocab, "word table");
    protocol.base.embedding_dim = static_cast<int>(words->dim());
    protocol.pretrained_words = &*words;
  }
  if (!users_path.empty()) {
    users = load_embeddings(resolve_input(users_path));
    protocol.pretrained_users = &*users;
  }

  if (!fixed_hyper.empty()) {
    HyperConfig fixed = HyperConfig::from_json_file(resolve_input(fixed_hyper));
    protocol.space.dropouts = {fixed.dropout};
    protocol.space.filter_heights = {fixed.filter_heights};
    protocol.space.feature_maps = {fixed.feature_maps};
    protocol.space.hidden_sizes = {protocol.base.variant == Variant::cue ? fixed.hidden_size
                                                                         : 0};
    protocol.space.budget = 1;
  } else if (!space_path.empty()) {
    protocol.space = SearchSpace::from_json_file(resolve_input(space_path));
  } else if (full_space) {
    protocol.space = SearchSpace::full();
  } else {
    protocol.space = SearchSpace::reduced();
  }

  std::string name = to_string(protocol.base.variant);
  if (protocol.base.variant != Variant::cnn)
    name += protocol.base.user_init == UserInit::pretrained ? "+pretrained-users"
                                                            : "+random-users";

  FoldRunner runner = neural_runner(protocol, vocab, registry);
  CVReport report = cross_validate(corpus, vocab, registry, k, seed, name, runner, jobs);
  write_text_file(out_path, report.to_json() + "\n");
  std::fputs(cv_summary_text({&report, 1}).c_str(), stdout);
  return 0;
}

int run_baseline(const std::string& messages, const std::string& histories,
                 const std::string& vocab_path, const std::string& features,
                 const std::string& words_path, std::size_t k, std::uint64_t seed, int jobs,
                 const std::string& out_path) {
  Corpus corpus = load_inputs(messages, histories);
  Vocabulary vocab = Vocabulary::load(resolve_input(vocab_path));
  std::vector<std::string> registry = user_registry(corpus);

  Featurizer featurize;
  std::optional<EmbeddingTable> words;
  if (features == "unigrams") {
    const std::size_t vocab_size = vocab.size();
    featurize = [vocab_size](const LabeledExample& ex) {
      return unigram_features(ex.token_ids, vocab_size);
    };
  } else {
    if (words_path.empty())
      throw std::invalid_argument("the nbow baseline needs --words for the embedding table");
    words = load_id_aligned_table(words_path, vocab, "word table");
    const Matrix* table = &words->values;
    featurize = [table](const LabeledExample& ex) { return nbow_features(ex.token_ids, *table); };
  }

  CVReport report =
      cross_validate(corpus, vocab, registry, k, seed, features, logistic_runner(featurize), jobs);
  write_text_file(out_path, report.to_json() + "\n");
  std::fputs(cv_summary_text({&report, 1}).c_str(), stdout);
  return 0;
}

int run_predict(const std::string& model_path, const std::string& messages,
                const std::string& as_user, const std::string& out_path) {
  ModelParams params = load_checkpoint(resolve_input(model_path));
  Corpus corpus = load_corpus(resolve_input(messages));

  std::unordered_map<std::string_view, int> word_id;
  word_id.reserve(params.vocab_words.size());
  for (std::size_t i = 0; i < params.vocab_words.size(); ++i)
    word_id.emplace(params.vocab_words[i], static_cast<int>(i));
  std::unordered_map<std::string_view, int> user_row;
  user_row.reserve(params.user_ids.size());
  for (std::size_t i = 0; i < params.user_ids.size(); ++i)
    user_row.emplace(params.user_ids[i], static_cast<int>(i));

  std::string lines;
  for (const Message& m : corpus.messages) {
    std::vector<int> ids;
    ids.reserve(m.tokens.size());
    for (const std::string& token : m.tokens) {
      auto it = word_id.find(token);
      ids.push_back(it == word_id.end() ? kUnkId : it->second);
    }
    const std::string& author = as_user.empty() ? m.author : as_user;
    int row = kNoUser;
    if (params.hyper.variant != Variant::cnn) {
      auto it = user_row.find(author);
      if (it == user_row.end())
        throw std::invalid_argument("unregistered user \"" + author + "\"");
      row = it->second;
    }
    Prediction pred = forward(ids, row, params);
    json j;
    j["id"] = m.id;
    j["user"] = author;
    j["p_literal"] = pred.probs[0];
    j["p_sarcastic"] = pred.probs[1];
    j["prediction"] = pred.argmax();
    lines += j.dump() + "\n";
  }
  if (out_path.empty())
    std::fputs(lines.c_str(), stdout);
  else
    write_text_file(out_path, lines);
  return 0;
}

int run_export(const std::string& in_path, const std::string& out_table,
               const std::string& out_pca) {
  EmbeddingTable table = load_embeddings(resolve_input(in_path));
  if (!out_table.empty()) {
    std::string text;
    for (std::size_t i = 0; i < table.keys.size(); ++i) {
      text += table.keys[i];
      const Real* row = table.values.row(i);
      for (std::size_t c = 0; c < table.dim(); ++c) {
        text += '\t';
        text += format_real(static_cast<double>(row[c]));
      }
      text += '\n';
    }
    write_text_file(out_table, text);
  }
  if (!out_pca.empty()) {
    Pca2d pca = pca_2d(table.values);
    std::string text;
    for (std::size_t i = 0; i < table.keys.size(); ++i) {
      text += table.keys[i];
      text += '\t';
      text += format_real(static_cast<double>(pca.coords(i, 0)));
      text += '\t';
      text += format_real(static_cast<double>(pca.coords(i, 1)));
      text += '\n';
    }
    write_text_file(out_pca, text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contextual sarcasm detection: synthetic corpora, embedding pretraining, "
               "convolutional classifiers, and evaluation protocol"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic two-community corpus");
  std::string synth_spec, synth_out, synth_hist;
  synth->add_option("--spec", synth_spec, "Synthetic spec JSON")->required();
  synth->add_option("--out", synth_out, "Labeled messages JSONL output")->required();
  synth->add_option("--histories", synth_hist, "History posts JSONL output");

  // vocab
  auto* vocab_cmd = app.add_subcommand("vocab", "Build the vocabulary table");
  std::string vb_messages, vb_histories, vb_out;
  std::int64_t vb_min_count = 1;
  vocab_cmd->add_option("--messages", vb_messages, "Labeled messages JSONL")->required();
  vocab_cmd->add_option("--histories", vb_histories, "History posts JSONL");
  vocab_cmd->add_option("--min-count", vb_min_count, "Minimum corpus count");
  vocab_cmd->add_option("--out", vb_out, "Vocabulary TSV output")->required();

  // word2vec
  auto* w2v = app.add_subcommand("word2vec", "Pretrain word vectors (skip-gram)");
  std::string w2v_messages, w2v_histories, w2v_vocab, w2v_out, w2v_context;
  std::size_t w2v_dim = 12;
  int w2v_window = 5, w2v_negatives = 5, w2v_epochs = 10;
  std::uint64_t w2v_seed = 1;
  w2v->add_option("--messages", w2v_messages)->required();
  w2v->add_option("--histories", w2v_histories);
  w2v->add_option("--vocab", w2v_vocab)->required();
  w2v->add_option("--dim", w2v_dim, "Embedding dimension");
  w2v->add_option("--window", w2v_window, "Context window radius");
  w2v->add_option("--negatives", w2v_negatives, "Negative samples per pair");
  w2v->add_option("--epochs", w2v_epochs, "Training epochs");
  w2v->add_option("--seed", w2v_seed, "Seed");
  w2v->add_option("--out", w2v_out, "Word vector output")->required();
  w2v->add_option("--out-context", w2v_context,
                  "Context (output-side) vector table, needed by user2vec");

  // user2vec
  auto* u2v = app.add_subcommand("user2vec", "Train user vectors from author histories");
  std::string u2v_messages, u2v_histories, u2v_vocab, u2v_words, u2v_config;
  std::string u2v_neg = "unigram", u2v_out, u2v_report;
  double u2v_power = 1.0;
  int u2v_negatives = 15, u2v_epochs = 100, u2v_jobs = 1;
  std::uint64_t u2v_seed = 1;
  u2v->add_option("--messages", u2v_messages)->required();
  u2v->add_option("--histories", u2v_histories)->required();
  u2v->add_option("--vocab", u2v_vocab)->required();
  u2v->add_option("--words", u2v_words, "Pretrained word vectors")->required();
  u2v->add_option("--config", u2v_config, "User2vec JSON config");
  u2v->add_option("--neg", u2v_neg, "Negative sampling distribution")
      ->check(CLI::IsMember({"unigram", "uniform"}));
  u2v->add_option("--neg-power", u2v_power, "Exponent on unigram counts");
  auto* u2v_negatives_opt = u2v->add_option("--negatives", u2v_negatives);
  auto* u2v_epochs_opt = u2v->add_option("--epochs", u2v_epochs);
  auto* u2v_seed_opt = u2v->add_option("--seed", u2v_seed);
  u2v->add_option("--jobs", u2v_jobs, "Worker threads (results are schedule-independent)");
  u2v->add_option("--out", u2v_out, "User vector output")->required();
  u2v->add_option("--report", u2v_report, "Per-user training report JSON");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one classifier on all labeled messages");
  std::string tr_messages, tr_histories, tr_vocab, tr_words, tr_users, tr_out, tr_report;
  std::uint64_t tr_seed = 1;
  HyperFlags tr_hyper;
  OptimizerFlags tr_opt;
  train_cmd->add_option("--messages", tr_messages)->required();
  train_cmd->add_option("--histories", tr_histories);
  train_cmd->add_option("--vocab", tr_vocab)->required();
  tr_hyper.attach(train_cmd);
  tr_opt.attach(train_cmd);
  train_cmd->add_option("--words", tr_words, "Pretrained word vectors");
  train_cmd->add_option("--users", tr_users, "Pretrained user vectors");
  train_cmd->add_option("--seed", tr_seed, "Seed");
  train_cmd->add_option("--out", tr_out, "Checkpoint output")->required();
  train_cmd->add_option("--report", tr_report, "Training report JSON");

  // cv
  auto* cv_cmd = app.add_subcommand("cv", "k-fold cross-validation with random search");
  std::string cv_messages, cv_histories, cv_vocab, cv_words, cv_users, cv_space, cv_fixed,
      cv_out;
  std::size_t cv_k = 10;
  std::uint64_t cv_seed = 1;
  int cv_jobs = 1;
  bool cv_full = false;
  HyperFlags cv_hyper;
  OptimizerFlags cv_opt;
  cv_cmd->add_option("--messages", cv_messages)->required();
  cv_cmd->add_option("--histories", cv_histories);
  cv_cmd->add_option("--vocab", cv_vocab)->required();
  cv_hyper.attach(cv_cmd);
  cv_opt.attach(cv_cmd);
  cv_cmd->add_option("--words", cv_words, "Pretrained word vectors");
  cv_cmd->add_option("--users", cv_users, "Pretrained user vectors");
  cv_cmd->add_option("--k", cv_k, "Fold count");
  cv_cmd->add_option("--seed", cv_seed, "Master seed");
  cv_cmd->add_option("--jobs", cv_jobs, "Concurrent folds");
  cv_cmd->add_flag("--full-space", cv_full, "Search the full-scale hyperparameter grid");
  cv_cmd->add_option("--space", cv_space, "Search space JSON file");
  cv_cmd->add_option("--fixed-hyper", cv_fixed, "Skip search; use this config on every fold");
  cv_cmd->add_option("--out", cv_out, "CV report JSON output")->required();

  // baseline
  auto* base_cmd = app.add_subcommand("baseline", "Linear baselines under the same protocol");
  std::string bl_messages, bl_histories, bl_vocab, bl_features = "unigrams", bl_words, bl_out;
  std::size_t bl_k = 10;
  std::uint64_t bl_seed = 1;
  int bl_jobs = 1;
  base_cmd->add_option("--messages", bl_messages)->required();
  base_cmd->add_option("--histories", bl_histories);
  base_cmd->add_option("--vocab", bl_vocab)->required();
  base_cmd->add_option("--features", bl_features, "unigrams or nbow")
      ->check(CLI::IsMember({"unigrams", "nbow"}));
  base_cmd->add_option("--words", bl_words, "Word vectors (nbow features)");
  base_cmd->add_option("--k", bl_k, "Fold count");
  base_cmd->add_option("--seed", bl_seed, "Master seed");
  base_cmd->add_option("--jobs", bl_jobs, "Concurrent folds");
  base_cmd->add_option("--out", bl_out, "CV report JSON output")->required();

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Score messages with a trained model");
  std::string pr_model, pr_messages, pr_as_user, pr_out;
  predict_cmd->add_option("--model", pr_model, "Checkpoint file")->required();
  predict_cmd->add_option("--messages", pr_messages, "Messages JSONL")->required();
  predict_cmd->add_option("--as-user", pr_as_user, "Score every message as this author");
  predict_cmd->add_option("--out", pr_out, "Predictions JSONL (default: stdout)");

  // export-embeddings
  auto* export_cmd =
      app.add_subcommand("export-embeddings", "Re-export a vector table as TSV, with 2-D PCA");
  std::string ex_in, ex_table, ex_pca;
  export_cmd->add_option("--in", ex_in, "Embedding table file")->required();
  export_cmd->add_option("--out-table", ex_table, "Raw TSV output");
  export_cmd->add_option("--out-pca", ex_pca, "2-D PCA projection TSV output");

  try {
    app.parse(argc, argv);

    if (*synth) return run_synth(synth_spec, synth_out, synth_hist);
    if (*vocab_cmd) return run_vocab(vb_messages, vb_histories, vb_min_count, vb_out);
    if (*w2v)
      return run_word2vec(w2v_messages, w2v_histories, w2v_vocab, w2v_dim, w2v_window,
                          w2v_negatives, w2v_epochs, w2v_seed, w2v_out, w2v_context);
    if (*u2v)
      return run_user2vec(u2v_messages, u2v_histories, u2v_vocab, u2v_words, u2v_config,
                          u2v_neg, u2v_power, u2v_negatives_opt, u2v_negatives, u2v_epochs_opt,
                          u2v_epochs, u2v_seed_opt, u2v_seed, u2v_jobs, u2v_out, u2v_report);
    if (*train_cmd)
      return run_train(tr_messages, tr_histories, tr_vocab, tr_hyper, tr_opt, tr_words, tr_users,
                       tr_seed, tr_out, tr_report);
    if (*cv_cmd)
      return run_cv(cv_messages, cv_histories, cv_vocab, cv_hyper, cv_opt, cv_words, cv_users,
                    cv_k, cv_seed, cv_jobs, cv_full, cv_space, cv_fixed, cv_out);
    if (*base_cmd)
      return run_baseline(bl_messages, bl_histories, bl_vocab, bl_features, bl_words, bl_k,
                          bl_seed, bl_jobs, bl_out);
    if (*predict_cmd) return run_predict(pr_model, pr_messages, pr_as_user, pr_out);
    if (*export_cmd) return run_export(ex_in, ex_table, ex_pca);
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);  // 0 for --help, nonzero with a diagnostic otherwise
  } catch (const FileError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 5;
  }
}

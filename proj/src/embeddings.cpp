#include "sarcasm/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "sarcasm/errors.hpp"
#include "sarcasm/parallel.hpp"

namespace sarcasm {

EmbeddingTable EmbeddingTable::with_keys(std::vector<std::string> keys, std::size_t dim) {
  EmbeddingTable t;
  t.values = Matrix(keys.size(), dim, 0);
  t.keys = std::move(keys);
  t.rebuild_index();
  return t;
}

int EmbeddingTable::row_of(std::string_view key) const {
  auto it = index_.find(std::string(key));
  return it == index_.end() ? -1 : it->second;
}

void EmbeddingTable::rebuild_index() {
  index_.clear();
  index_.reserve(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (!index_.emplace(keys[i], static_cast<int>(i)).second)
      throw std::invalid_argument("EmbeddingTable: duplicate key " + keys[i]);
  }
}

void User2VecConfig::validate() const {
  if (negatives < 1) throw std::invalid_argument("user2vec config: negatives must be >= 1");
  if (window < 1) throw std::invalid_argument("user2vec config: window must be >= 1");
  if (!(lr_initial > 0) || !(lr_final > 0) || lr_final > lr_initial)
    throw std::invalid_argument("user2vec config: need lr_initial >= lr_final > 0");
  if (max_epochs < 0) throw std::invalid_argument("user2vec config: max_epochs must be >= 0");
  if (patience < 1) throw std::invalid_argument("user2vec config: patience must be >= 1");
  if (!(held_out_fraction > 0.0 && held_out_fraction < 1.0))
    throw std::invalid_argument("user2vec config: held_out_fraction must lie in (0, 1)");
  if (jobs < 1) throw std::invalid_argument("user2vec config: jobs must be >= 1");
}

User2VecConfig User2VecConfig::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open user2vec config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": invalid JSON: " + e.what());
  }
  User2VecConfig cfg;
  try {
    cfg.negatives = j.value("negatives", cfg.negatives);
    cfg.window = j.value("window", cfg.window);
    cfg.lr_initial = j.value("lr_initial", cfg.lr_initial);
    cfg.lr_final = j.value("lr_final", cfg.lr_final);
    cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
    cfg.patience = j.value("patience", cfg.patience);
    cfg.held_out_fraction = j.value("held_out_fraction", cfg.held_out_fraction);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.jobs = j.value("jobs", cfg.jobs);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double kEmbeddingLrInitial = 0.025;
constexpr double kEmbeddingLrFinal = 1e-4;

// sentence as real-word ids; reserved ids are dropped at the door
std::vector<int> real_ids(const Vocabulary& vocab, const std::vector<std::string>& tokens) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) {
    int id = vocab.id(t);
    if (id != kPadId && id != kUnkId) ids.push_back(id);
  }
  return ids;
}

}  // namespace

SkipGramResult train_word_embeddings(const Corpus& text, const Vocabulary& vocab,
                                     std::size_t dim, int window, int negatives, int epochs,
                                     std::uint64_t seed) {
  if (dim < 1) throw std::invalid_argument("train_word_embeddings: dim must be >= 1");
  if (window < 1) throw std::invalid_argument("train_word_embeddings: window must be >= 1");
  if (negatives < 1) throw std::invalid_argument("train_word_embeddings: negatives must be >= 1");
  if (epochs < 0) throw std::invalid_argument("train_word_embeddings: epochs must be >= 0");
  const std::size_t real_words = vocab.size() - 2;
  if (real_words < static_cast<std::size_t>(negatives) + 1)
    throw std::invalid_argument(
        "train_word_embeddings: vocabulary must hold more than `negatives` real words");

  SkipGramResult result;
  result.words = EmbeddingTable::with_keys(vocab.words(), dim);
  result.softmax.weights = Matrix(vocab.size(), dim, 0);
  result.softmax.bias.assign(vocab.size(), 0);

  Matrix& e = result.words.values;
  Matrix& w = result.softmax.weights;

  Rng init_rng(derive_seed(seed, "sgns/init"));
  const Real half = static_cast<Real>(0.5 / static_cast<double>(dim));
  for (std::size_t r = 2; r < e.rows(); ++r)
    for (std::size_t c = 0; c < dim; ++c)
      e(r, c) = static_cast<Real>(init_rng.uniform(-half, half));

  std::vector<std::vector<int>> sentences;
  for (const Message& m : text.messages) sentences.push_back(real_ids(vocab, m.tokens));
  for (const auto& [user, posts] : text.histories)
    for (const Message& m : posts) sentences.push_back(real_ids(vocab, m.tokens));

  NegativeSamplingStrategy strategy;  // unigram MLE
  NegativeSampler sampler(strategy, vocab);
  Rng rng(derive_seed(seed, "sgns/train"));
  Vector accum(dim);
  std::vector<int> negs;
  std::array<int, 1> exclude{0};

  for (int epoch = 0; epoch < epochs; ++epoch) {
    double lr = kEmbeddingLrInitial +
                (kEmbeddingLrFinal - kEmbeddingLrInitial) * epoch / std::max(1, epochs - 1);
    for (const std::vector<int>& sent : sentences) {
      const int n = static_cast<int>(sent.size());
      for (int i = 0; i < n; ++i) {
        const int center = sent[i];
        Real* ec = e.row(static_cast<std::size_t>(center));
        for (int j = std::max(0, i - window); j <= std::min(n - 1, i + window); ++j) {
          if (j == i) continue;
          const int context = sent[j];
          exclude[0] = context;
          sampler.sample(exclude, negatives, rng, negs);
          std::fill(accum.begin(), accum.end(), Real(0));
          auto update_target = [&](int target, double label) {
            Real* wt = w.row(static_cast<std::size_t>(target));
            double dot = 0;
            for (std::size_t c = 0; c < dim; ++c) dot += double(ec[c]) * double(wt[c]);
            Real g = static_cast<Real>(lr * (label - sigmoid(dot)));
            for (std::size_t c = 0; c < dim; ++c) {
              accum[c] += g * wt[c];
              wt[c] += g * ec[c];
            }
          };
          update_target(context, 1.0);
          for (int neg : negs) update_target(neg, 0.0);
          for (std::size_t c = 0; c < dim; ++c) ec[c] += accum[c];
        }
      }
    }
  }
  return result;
}

double word_log_prob(int word_id, std::span<const Real> x, const WordSoftmaxParams& params,
                     const Vocabulary& vocab) {
  if (word_id < 2 || static_cast<std::size_t>(word_id) >= vocab.size())
    throw std::invalid_argument("word_log_prob: word id is reserved or out of range");
  if (params.weights.rows() != vocab.size() || params.bias.size() != vocab.size())
    throw std::invalid_argument("word_log_prob: softmax shape does not match vocabulary");
  if (x.size() != params.weights.cols())
    throw std::invalid_argument("word_log_prob: input dimension mismatch");

  const std::size_t v = vocab.size();
  double max = -std::numeric_limits<double>::infinity();
  std::vector<double> scores(v, 0.0);
  for (std::size_t id = 2; id < v; ++id) {
    const Real* row = params.weights.row(id);
    double s = params.bias[id];
    for (std::size_t c = 0; c < x.size(); ++c) s += double(row[c]) * double(x[c]);
    scores[id] = s;
    if (s > max) max = s;
  }
  double sum = 0.0;
  for (std::size_t id = 2; id < v; ++id) sum += std::exp(scores[id] - max);
  return scores[static_cast<std::size_t>(word_id)] - max - std::log(sum);
}

HingeResult hinge_loss(int word_id, std::span<const Real> user_vec,
                       std::span<const int> negatives, const EmbeddingTable& words) {
  if (word_id < 0 || static_cast<std::size_t>(word_id) >= words.values.rows())
    throw std::invalid_argument("hinge_loss: word id out of range");
  if (user_vec.size() != words.dim())
    throw std::invalid_argument("hinge_loss: user vector dimension mismatch");
  if (negatives.empty()) throw std::invalid_argument("hinge_loss: need at least one negative");

  const std::size_t d = words.dim();
  const Real* ei = words.values.row(static_cast<std::size_t>(word_id));
  double pos_dot = 0;
  for (std::size_t c = 0; c < d; ++c) pos_dot += double(ei[c]) * double(user_vec[c]);

  HingeResult out;
  out.loss = 0;
  out.grad_user.assign(d, 0);
  for (int neg : negatives) {
    if (neg == word_id)
      throw std::invalid_argument("hinge_loss: positive word appears among the negatives");
    if (neg < 0 || static_cast<std::size_t>(neg) >= words.values.rows())
      throw std::invalid_argument("hinge_loss: negative id out of range");
    const Real* el = words.values.row(static_cast<std::size_t>(neg));
    double neg_dot = 0;
    for (std::size_t c = 0; c < d; ++c) neg_dot += double(el[c]) * double(user_vec[c]);
    double margin = 1.0 - pos_dot + neg_dot;
    if (margin > 0) {
      out.loss += static_cast<Real>(margin);
      for (std::size_t c = 0; c < d; ++c) out.grad_user[c] += el[c] - ei[c];
    }
  }
  return out;
}

namespace {

std::vector<double> sampling_weights(const NegativeSamplingStrategy& strategy,
                                     const Vocabulary& vocab) {
  if (vocab.size() <= 2)
    throw std::invalid_argument("negative sampling: vocabulary has no real words");
  std::vector<double> w(vocab.size(), 0.0);
  for (std::size_t id = 2; id < vocab.size(); ++id) {
    if (strategy.kind == NegSampleKind::uniform)
      w[id] = 1.0;
    else
      w[id] = std::pow(static_cast<double>(vocab.count(static_cast<int>(id))),
                       strategy.unigram_power);
  }
  return w;
}

}  // namespace

NegativeSampler::NegativeSampler(const NegativeSamplingStrategy& strategy,
                                 const Vocabulary& vocab)
    : weights_(sampling_weights(strategy, vocab)), sampler_(weights_) {}

void NegativeSampler::sample(std::span<const int> exclude, int k, Rng& rng,
                             std::vector<int>& out) const {
  out.clear();
  auto excluded = [&](int id) {
    return std::find(exclude.begin(), exclude.end(), id) != exclude.end();
  };
  int guard = 0;
  while (static_cast<int>(out.size()) < k) {
    int id = sampler_.sample(rng);
    if (!excluded(id)) {
      out.push_back(id);
      continue;
    }
    // long rejection streaks are almost always an empty support; check once
    if (++guard == 1000) {
      bool any = false;
      for (std::size_t cand = 2; cand < weights_.size() && !any; ++cand)
        any = weights_[cand] > 0.0 && !excluded(static_cast<int>(cand));
      if (!any)
        throw std::invalid_argument(
            "negative sampling: exclusion set covers every candidate word");
      guard = 0;
    }
  }
}

std::vector<int> sample_negatives(const NegativeSamplingStrategy& strategy,
                                  const Vocabulary& vocab, std::span<const int> exclude, int k,
                                  Rng& rng) {
  if (k < 1) throw std::invalid_argument("sample_negatives: k must be >= 1");
  NegativeSampler sampler(strategy, vocab);
  std::vector<int> out;
  sampler.sample(exclude, k, rng, out);
  return out;
}

double held_out_likelihood(std::span<const Real> user_vec,
                           const std::vector<std::vector<int>>& sentences,
                           const EmbeddingTable& words, const WordSoftmaxParams& softmax,
                           const Vocabulary& vocab) {
  if (user_vec.size() != words.dim())
    throw std::invalid_argument("held_out_likelihood: user vector dimension mismatch");
  if (words.dim() != softmax.weights.cols())
    throw std::invalid_argument("held_out_likelihood: table dimensions disagree");
  double total = 0.0;
  std::size_t tokens = 0;
  for (const std::vector<int>& sent : sentences)
    for (int id : sent) {
      total += word_log_prob(id, user_vec, softmax, vocab);
      ++tokens;
    }
  if (tokens == 0)
    throw std::invalid_argument("held_out_likelihood: no held-out tokens to score");
  return total / static_cast<double>(tokens);
}

namespace {

struct UserTask {
  std::string user;
  std::vector<std::vector<int>> sentences;
};

void train_one_user(const UserTask& task, const EmbeddingTable& words,
                    const WordSoftmaxParams& softmax, const Vocabulary& vocab,
                    const User2VecConfig& cfg, const NegativeSampler& sampler,
                    std::span<Real> row, UserTrainingInfo& info) {
  const std::size_t d = words.dim();
  Rng rng(derive_seed(cfg.seed, "user/" + task.user));
  for (std::size_t c = 0; c < d; ++c)
    row[c] = static_cast<Real>(0.1 * rng.gaussian());  // N(0, 0.01)

  info.user = task.user;
  if (task.sentences.empty()) {
    info.empty_history = true;
    return;
  }

  std::vector<std::size_t> order(task.sentences.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  // hold out at least one post whenever the user has two or more
  std::size_t held = static_cast<std::size_t>(
      cfg.held_out_fraction * static_cast<double>(order.size()));
  if (held == 0 && order.size() >= 2) held = 1;
  std::vector<std::vector<int>> held_sentences;
  std::vector<const std::vector<int>*> train_sentences;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < held)
      held_sentences.push_back(task.sentences[order[i]]);
    else
      train_sentences.push_back(&task.sentences[order[i]]);
  }

  const bool early_stop = !held_sentences.empty();
  Vector best(row.begin(), row.end());
  double best_ll = 0.0;
  if (early_stop) {
    best_ll = held_out_likelihood(row, held_sentences, words, softmax, vocab);
    info.best_likelihood = best_ll;
  }

  int patience_left = cfg.patience;
  std::vector<std::size_t> train_order(train_sentences.size());
  std::iota(train_order.begin(), train_order.end(), 0);
  std::vector<int> negs;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double lr = cfg.lr_initial + (cfg.lr_final - cfg.lr_initial) * (epoch - 1) /
                                     std::max(1, cfg.max_epochs - 1);
    rng.shuffle(train_order);
    for (std::size_t si : train_order) {
      const std::vector<int>& sent = *train_sentences[si];
      for (int word : sent) {
        sampler.sample(sent, cfg.negatives, rng, negs);
        HingeResult h = hinge_loss(word, row, negs, words);
        for (std::size_t c = 0; c < d; ++c)
          row[c] -= static_cast<Real>(lr) * h.grad_user[c];
      }
    }
    info.epochs_run = epoch;
    if (!early_stop) continue;
    double ll = held_out_likelihood(row, held_sentences, words, softmax, vocab);
    if (ll > best_ll) {
      best_ll = ll;
      best.assign(row.begin(), row.end());
      info.best_epoch = epoch;
      info.best_likelihood = ll;
      patience_left = cfg.patience;
    } else if (--patience_left == 0) {
      break;
    }
  }
  if (early_stop) std::copy(best.begin(), best.end(), row.begin());
}

}  // namespace

User2VecResult train_user_embeddings(const Corpus& histories, const EmbeddingTable& words,
                                     const Vocabulary& vocab, const User2VecConfig& cfg,
                                     const NegativeSamplingStrategy& strategy) {
  cfg.validate();
  if (words.values.rows() != vocab.size())
    throw std::invalid_argument("train_user_embeddings: word table does not match vocabulary");

  // Early stopping scores held-out words against the same table the hinge
  // ranks, so improvement in the metric tracks the training objective.
  WordSoftmaxParams softmax{words.values, Vector(vocab.size(), 0)};

  std::vector<std::string> users = user_registry(histories);
  if (users.empty()) throw std::invalid_argument("train_user_embeddings: no users in corpus");

  std::vector<UserTask> tasks(users.size());
  for (std::size_t i = 0; i < users.size(); ++i) {
    tasks[i].user = users[i];
    auto it = histories.histories.find(users[i]);
    if (it != histories.histories.end())
      for (const Message& m : it->second) {
        std::vector<int> ids = real_ids(vocab, m.tokens);
        if (!ids.empty()) tasks[i].sentences.push_back(std::move(ids));
      }
  }

  NegativeSampler sampler(strategy, vocab);

  User2VecResult result;
  result.users = EmbeddingTable::with_keys(users, words.dim());
  result.report.resize(users.size());

  parallel_for(users.size(), cfg.jobs, [&](std::size_t i) {
    train_one_user(tasks[i], words, softmax, vocab, cfg, sampler,
                   result.users.values.row_span(i), result.report[i]);
  });
  return result;
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  for (const std::string& key : table.keys) {
    if (key.empty() || key.find_first_of(" \t\n") != std::string::npos)
      throw std::invalid_argument("save_embeddings: key unrepresentable in text format: \"" +
                                  key + "\"");
  }
  std::ofstream out(path);
  if (!out) throw FileError("cannot write embedding file: " + path.string());
  out << table.keys.size() << ' ' << table.dim() << '\n';
  char buf[40];
  for (std::size_t r = 0; r < table.keys.size(); ++r) {
    out << table.keys[r];
    const Real* row = table.values.row(r);
    for (std::size_t c = 0; c < table.dim(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(row[c]));
      out << ' ' << buf;
    }
    out << '\n';
  }
  if (!out) throw FileError("write failed: " + path.string());
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open embedding file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header");
  std::istringstream header(line);
  std::size_t count = 0, dim = 0;
  if (!(header >> count >> dim) || dim == 0)
    throw FormatError(path.string() + ":1: header must be \"<count> <dim>\"");

  EmbeddingTable table;
  table.keys.reserve(count);
  table.values = Matrix(count, dim, 0);
  std::size_t row = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (row >= count)
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": more rows than the header announced");
    const char* p = line.c_str();
    const char* space = std::strchr(p, ' ');
    if (!space)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": missing vector values");
    table.keys.emplace_back(p, space);
    char* cursor = const_cast<char*>(space);
    for (std::size_t c = 0; c < dim; ++c) {
      char* end = nullptr;
      double v = std::strtod(cursor, &end);
      if (end == cursor)
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": row \"" +
                          table.keys.back() + "\" has fewer than " + std::to_string(dim) +
                          " values");
      table.values(row, c) = static_cast<Real>(v);
      cursor = end;
    }
    while (*cursor == ' ' || *cursor == '\t' || *cursor == '\r') ++cursor;
    if (*cursor != '\0')
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": row \"" +
                        table.keys.back() + "\" has more than " + std::to_string(dim) +
                        " values");
    ++row;
  }
  if (row != count)
    throw FormatError(path.string() + ": header announced " + std::to_string(count) +
                      " rows but the file holds " + std::to_string(row));
  try {
    table.rebuild_index();
  } catch (const std::invalid_argument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return table;
}

}  // namespace sarcasm

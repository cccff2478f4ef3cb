#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sarcasm/corpus.hpp"
#include "sarcasm/embeddings.hpp"
#include "sarcasm/errors.hpp"

using namespace sarcasm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("sarcasm_embed_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path file(const std::string& name) const { return path / name; }
};

Corpus corpus_of(const std::vector<std::vector<std::string>>& sentences) {
  Corpus c;
  int n = 0;
  for (const auto& tokens : sentences) {
    Message m;
    m.id = "m" + std::to_string(n++);
    m.author = "u";
    m.tokens = tokens;
    m.label = 0;
    c.messages.push_back(std::move(m));
  }
  return c;
}

double dot(std::span<const Real> a, std::span<const Real> b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += double(a[i]) * double(b[i]);
  return acc;
}

}  // namespace

TEST_CASE("embedding table keys index their rows") {
  EmbeddingTable t = EmbeddingTable::with_keys({"a", "b"}, 3);
  CHECK(t.dim() == 3);
  CHECK(t.values.rows() == 2);
  CHECK(t.row_of("b") == 1);
  CHECK(t.row_of("zz") == -1);
  for (Real v : t.values.flat()) CHECK(v == 0);
  CHECK_THROWS_WITH_AS(EmbeddingTable::with_keys({"a", "a"}, 3),
                       "EmbeddingTable: duplicate key a", std::invalid_argument);
}

TEST_CASE("skip-gram pulls co-occurring words together") {
  // a always appears with b and never with c or d; word pairs that share
  // contexts end up in the same neighborhood of the input space
  std::vector<std::vector<std::string>> sentences;
  for (int i = 0; i < 30; ++i) {
    sentences.push_back({"a", "b", "a", "b"});
    sentences.push_back({"c", "d", "c", "d"});
  }
  Corpus corpus = corpus_of(sentences);
  Vocabulary vocab = Vocabulary::build(corpus, 1);
  SkipGramResult r = train_word_embeddings(corpus, vocab, 8, 5, 2, 200, 9);

  auto row = [&](const std::string& w) { return r.words.values.row_span(vocab.id(w)); };
  CHECK(cosine_similarity(row("a"), row("b")) > cosine_similarity(row("a"), row("c")));
  CHECK(cosine_similarity(row("c"), row("d")) > cosine_similarity(row("c"), row("b")));
}

TEST_CASE("skip-gram with zero epochs returns the initialization") {
  Corpus corpus = corpus_of({{"a", "b"}, {"c", "d"}, {"e", "f"}});
  Vocabulary vocab = Vocabulary::build(corpus, 1);
  SkipGramResult r = train_word_embeddings(corpus, vocab, 4, 5, 2, 0, 7);

  const Real bound = Real(0.5 / 4.0);
  bool any_nonzero = false;
  for (std::size_t row = 2; row < r.words.values.rows(); ++row)
    for (Real v : r.words.values.row_span(row)) {
      CHECK(std::abs(v) <= bound);
      any_nonzero = any_nonzero || v != 0;
    }
  CHECK(any_nonzero);
  // reserved rows and the whole output table start at zero
  for (Real v : r.words.values.row_span(0)) CHECK(v == 0);
  for (Real v : r.words.values.row_span(1)) CHECK(v == 0);
  for (Real v : r.softmax.weights.flat()) CHECK(v == 0);
  for (Real v : r.softmax.bias) CHECK(v == 0);
}

TEST_CASE("skip-gram is deterministic in the seed") {
  Corpus corpus = corpus_of({{"a", "b", "c"}, {"b", "c", "d"}, {"d", "a"}});
  Vocabulary vocab = Vocabulary::build(corpus, 1);
  SkipGramResult r1 = train_word_embeddings(corpus, vocab, 6, 5, 2, 20, 3);
  SkipGramResult r2 = train_word_embeddings(corpus, vocab, 6, 5, 2, 20, 3);
  CHECK(r1.words.values == r2.words.values);
  CHECK(r1.softmax.weights == r2.softmax.weights);
  SkipGramResult r3 = train_word_embeddings(corpus, vocab, 6, 5, 2, 20, 4);
  CHECK(r1.words.values != r3.words.values);
  // reserved rows never move, even after training
  for (Real v : r1.words.values.row_span(0)) CHECK(v == 0);
  for (Real v : r1.words.values.row_span(1)) CHECK(v == 0);
}

TEST_CASE("skip-gram needs more real words than negatives") {
  Corpus corpus = corpus_of({{"a", "b"}});
  Vocabulary vocab = Vocabulary::build(corpus, 1);  // 2 real words
  CHECK_THROWS_AS(train_word_embeddings(corpus, vocab, 4, 5, 2, 1, 1), std::invalid_argument);
  CHECK_NOTHROW(train_word_embeddings(corpus, vocab, 4, 5, 1, 1, 1));
}

TEST_CASE("word_log_prob is uniform over identical rows") {
  Corpus corpus = corpus_of({{"a", "b"}});
  Vocabulary vocab = Vocabulary::build(corpus, 1);
  WordSoftmaxParams params;
  params.weights = Matrix(vocab.size(), 3, Real(0.7));
  params.bias.assign(vocab.size(), 0);
  Vector x{0.3, -1.2, 0.5};
  CHECK(word_log_prob(2, x, params, vocab) == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  CHECK(word_log_prob(3, x, params, vocab) == doctest::Approx(std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("word_log_prob normalizes and matches a naive oracle") {
  std::vector<std::vector<std::string>> sentences;
  for (int i = 0; i < 10; ++i) sentences.push_back({"w" + std::to_string(i)});
  Corpus corpus = corpus_of(sentences);
  Vocabulary vocab = Vocabulary::build(corpus, 1);
  REQUIRE(vocab.size() == 12);

  Rng rng(51);
  WordSoftmaxParams params;
  params.weights = Matrix(vocab.size(), 4);
  for (Real& v : params.weights.flat()) v = static_cast<Real>(rng.uniform(-1, 1));
  params.bias.resize(vocab.size());
  for (Real& v : params.bias) v = static_cast<Real>(rng.uniform(-1, 1));
  Vector x{0.2, -0.4, 1.1, 0.05};

  double sum = 0;
  for (int id = 2; id < 12; ++id) sum += std::exp(word_log_prob(id, x, params, vocab));
  CHECK(std::abs(sum - 1.0) < 1e-9);

  // naive log-softmax without the max shift; scores are small enough
  double z = 0;
  std::vector<double> scores(12, 0);
  for (int id = 2; id < 12; ++id) {
    double s = params.bias[id];
    for (std::size_t c = 0; c < 4; ++c) s += double(params.weights(id, c)) * double(x[c]);
    scores[id] = s;
    z += std::exp(s);
  }
  for (int id = 2; id < 12; ++id)
    CHECK(std::abs(word_log_prob(id, x, params, vocab) - (scores[id] - std::log(z))) < 1e-12);
}

TEST_CASE("word_log_prob rejects reserved ids and shape mismatches") {
  Corpus corpus = corpus_of({{"a", "b"}});
  Vocabulary vocab = Vocabulary::build(corpus, 1);
  WordSoftmaxParams params;
  params.weights = Matrix(vocab.size(), 2);
  params.bias.assign(vocab.size(), 0);
  Vector x{1, 2};
  CHECK_THROWS_AS(word_log_prob(kPadId, x, params, vocab), std::invalid_argument);
  CHECK_THROWS_AS(word_log_prob(kUnkId, x, params, vocab), std::invalid_argument);
  CHECK_THROWS_AS(word_log_prob(99, x, params, vocab), std::invalid_argument);
  CHECK_THROWS_AS(word_log_prob(2, Vector{1}, params, vocab), std::invalid_argument);
  WordSoftmaxParams wrong = params;
  wrong.bias.pop_back();
  CHECK_THROWS_AS(word_log_prob(2, x, wrong, vocab), std::invalid_argument);
}

TEST_CASE("hinge loss closed forms") {
  EmbeddingTable words = EmbeddingTable::with_keys({"<PAD>", "<UNK>", "i", "l"}, 2);
  words.values(2, 0) = 1;  // e_i = (1, 0)
  words.values(3, 1) = 1;  // e_l = (0, 1)

  // satisfied margin: u strongly aligned with e_i
  Vector aligned{5, 0};
  std::vector<int> negs{3};
  HingeResult sat = hinge_loss(2, aligned, negs, words);
  CHECK(sat.loss == 0);
  for (Real g : sat.grad_user) CHECK(g == 0);

  // zero user vector: every margin is exactly 1
  Vector zero{0, 0};
  HingeResult z = hinge_loss(2, zero, negs, words);
  CHECK(z.loss == doctest::Approx(1.0));
  HingeResult z3 = hinge_loss(2, zero, std::vector<int>{3, 3, 3}, words);
  CHECK(z3.loss == doctest::Approx(3.0));

  // worked example: margin 1 - 0.5 + 0.5 = 1, gradient e_l - e_i
  Vector half{0.5, 0.5};
  HingeResult h = hinge_loss(2, half, negs, words);
  CHECK(h.loss == doctest::Approx(1.0));
  CHECK(h.grad_user[0] == doctest::Approx(-1.0));
  CHECK(h.grad_user[1] == doctest::Approx(1.0));
}

TEST_CASE("hinge loss is nonnegative and matches finite differences") {
  Rng rng(67);
  EmbeddingTable words = EmbeddingTable::with_keys(
      {"<PAD>", "<UNK>", "w2", "w3", "w4", "w5", "w6"}, 3);
  for (std::size_t r = 2; r < words.values.rows(); ++r)
    for (std::size_t c = 0; c < 3; ++c)
      words.values(r, c) = static_cast<Real>(rng.gaussian());

  Vector u{0.3, -0.2, 0.4};
  std::vector<int> negs{3, 4, 5, 6};
  HingeResult base = hinge_loss(2, u, negs, words);
  CHECK(base.loss >= 0);

  // every margin sits away from the kink, so the loss is differentiable here
  double pos = dot(words.values.row_span(2), u);
  for (int l : negs) {
    double margin = 1.0 - pos + dot(words.values.row_span(l), u);
    CHECK(std::abs(margin) > 1e-3);
  }
  const double h = 1e-6;
  for (std::size_t j = 0; j < u.size(); ++j) {
    Vector up = u, down = u;
    up[j] += h;
    down[j] -= h;
    double fd = (double(hinge_loss(2, up, negs, words).loss) -
                 double(hinge_loss(2, down, negs, words).loss)) /
                (2 * h);
    CHECK(std::abs(fd - double(base.grad_user[j])) < 1e-6);
  }
}

TEST_CASE("hinge loss input validation") {
  EmbeddingTable words = EmbeddingTable::with_keys({"<PAD>", "<UNK>", "a", "b"}, 2);
  Vector u{1, 1};
  CHECK_THROWS_WITH_AS(hinge_loss(2, u, std::vector<int>{2}, words),
                       "hinge_loss: positive word appears among the negatives",
                       std::invalid_argument);
  CHECK_THROWS_AS(hinge_loss(2, u, std::vector<int>{}, words), std::invalid_argument);
  CHECK_THROWS_AS(hinge_loss(9, u, std::vector<int>{3}, words), std::invalid_argument);
  CHECK_THROWS_AS(hinge_loss(2, Vector{1}, std::vector<int>{3}, words), std::invalid_argument);
  CHECK_THROWS_AS(hinge_loss(2, u, std::vector<int>{17}, words), std::invalid_argument);
}

TEST_CASE("negative sampling respects the exclusion set") {
  Corpus corpus = corpus_of({{"a", "b", "c"}});
  Vocabulary vocab = Vocabulary::build(corpus, 1);
  NegativeSamplingStrategy uniform{NegSampleKind::uniform, 5, 1.0};
  Rng rng(5);
  std::vector<int> exclude{vocab.id("a"), vocab.id("b")};
  std::vector<int> draws = sample_negatives(uniform, vocab, exclude, 50, rng);
  REQUIRE(draws.size() == 50);
  for (int id : draws) CHECK(id == vocab.id("c"));
}

TEST_CASE("unigram sampling follows corpus frequencies") {
  std::vector<std::string> tokens(9, "hi");
  tokens.push_back("lo");
  Corpus corpus = corpus_of({tokens});
  Vocabulary vocab = Vocabulary::build(corpus, 1);

  NegativeSamplingStrategy mle{NegSampleKind::unigram_mle, 5, 1.0};
  Rng rng(6);
  std::vector<int> draws = sample_negatives(mle, vocab, std::vector<int>{}, 10000, rng);
  double hi = 0;
  for (int id : draws) hi += id == vocab.id("hi");
  CHECK(std::abs(hi / 10000.0 - 0.9) < 0.02);

  // power 0 flattens the distribution regardless of counts
  NegativeSamplingStrategy flat{NegSampleKind::unigram_mle, 5, 0.0};
  Rng rng2(6);
  draws = sample_negatives(flat, vocab, std::vector<int>{}, 10000, rng2);
  hi = 0;
  for (int id : draws) hi += id == vocab.id("hi");
  CHECK(std::abs(hi / 10000.0 - 0.5) < 0.02);

  // uniform kind ignores counts the same way
  NegativeSamplingStrategy uni{NegSampleKind::uniform, 5, 1.0};
  Rng rng3(6);
  draws = sample_negatives(uni, vocab, std::vector<int>{}, 10000, rng3);
  hi = 0;
  for (int id : draws) hi += id == vocab.id("hi");
  CHECK(std::abs(hi / 10000.0 - 0.5) < 0.02);
}

TEST_CASE("negative sampling determinism and reserved-id avoidance") {
  Corpus corpus = corpus_of({{"a", "b", "c", "d", "e"}});
  Vocabulary vocab = Vocabulary::build(corpus, 1);
  NegativeSamplingStrategy mle{NegSampleKind::unigram_mle, 5, 1.0};

  Rng r1(99), r2(99);
  std::vector<int> a = sample_negatives(mle, vocab, std::vector<int>{2}, 100, r1);
  std::vector<int> b = sample_negatives(mle, vocab, std::vector<int>{2}, 100, r2);
  CHECK(a == b);
  for (int id : a) {
    CHECK(id != kPadId);
    CHECK(id != kUnkId);
    CHECK(id != 2);
  }

  // the reusable sampler draws the same stream as the convenience wrapper
  NegativeSampler sampler(mle, vocab);
  Rng r3(99);
  std::vector<int> c;
  sampler.sample(std::vector<int>{2}, 100, r3, c);
  CHECK(c == a);
}

TEST_CASE("negative sampling error paths") {
  Corpus corpus = corpus_of({{"a", "b"}});
  Vocabulary vocab = Vocabulary::build(corpus, 1);
  NegativeSamplingStrategy uniform{NegSampleKind::uniform, 5, 1.0};
  Rng rng(1);
  std::vector<int> all{vocab.id("a"), vocab.id("b")};
  CHECK_THROWS_WITH_AS(sample_negatives(uniform, vocab, all, 1, rng),
                       "negative sampling: exclusion set covers every candidate word",
                       std::invalid_argument);
  CHECK_THROWS_AS(sample_negatives(uniform, vocab, std::vector<int>{}, 0, rng),
                  std::invalid_argument);

  // a vocabulary reduced to the reserved rows has no candidates at all
  Corpus thin = corpus_of({{"x"}});
  Vocabulary empty_vocab = Vocabulary::build(thin, 5);
  REQUIRE(empty_vocab.size() == 2);
  CHECK_THROWS_AS(sample_negatives(uniform, empty_vocab, std::vector<int>{}, 1, rng),
                  std::invalid_argument);
}

namespace {

// Vocabulary of 20 distinct words plus one user whose history repeats a
// single word; the learned vector must rank that word above every other.
struct RepeatedWordWorld {
  Corpus corpus;
  Vocabulary vocab;
  EmbeddingTable words;
  int target;

  RepeatedWordWorld() {
    std::vector<std::vector<std::string>> sentences;
    for (int i = 0; i < 20; ++i) sentences.push_back({"w" + std::to_string(i)});
    corpus = corpus_of(sentences);
    for (int j = 0; j < 12; ++j) {
      Message m;
      m.id = "h" + std::to_string(j);
      m.author = "solo";
      m.tokens = {"w7", "w7", "w7"};
      corpus.histories["solo"].push_back(std::move(m));
    }
    vocab = Vocabulary::build(corpus, 1);
    target = vocab.id("w7");
    words = EmbeddingTable::with_keys(vocab.words(), 6);
    Rng rng(13);
    for (std::size_t r = 2; r < words.values.rows(); ++r)
      for (std::size_t c = 0; c < 6; ++c)
        words.values(r, c) = static_cast<Real>(0.5 * rng.gaussian());
  }
};

}  // namespace

TEST_CASE("user2vec ranks the repeated word above every alternative") {
  RepeatedWordWorld world;
  User2VecConfig cfg;
  cfg.negatives = 3;
  cfg.max_epochs = 50;
  cfg.patience = 50;  // no early exit; let it train the full budget
  cfg.seed = 21;
  NegativeSamplingStrategy uniform{NegSampleKind::uniform, 3, 1.0};
  User2VecResult r = train_user_embeddings(world.corpus, world.words, world.vocab, cfg, uniform);

  int row = r.users.row_of("solo");
  REQUIRE(row >= 0);
  auto u = r.users.values.row_span(static_cast<std::size_t>(row));
  double best = dot(world.words.values.row_span(world.target), u);
  for (std::size_t id = 2; id < world.vocab.size(); ++id) {
    if (static_cast<int>(id) == world.target) continue;
    CHECK(best > dot(world.words.values.row_span(id), u));
  }
}

TEST_CASE("user2vec hinge steps raise the held-out likelihood epoch by epoch") {
  // Miniature replica of the per-user loop, driven through the public
  // pieces: hinge subgradient steps on the repeated word must lift the
  // frozen-table softmax score of that word monotonically at first.
  RepeatedWordWorld world;
  WordSoftmaxParams softmax{world.words.values, Vector(world.vocab.size(), 0)};
  std::vector<std::vector<int>> held{{world.target}};
  std::vector<int> sentence{world.target};

  Vector u(6, 0);
  double prev = held_out_likelihood(u, held, world.words, softmax, world.vocab);
  CHECK(prev == doctest::Approx(std::log(1.0 / 20.0)).epsilon(1e-12));

  NegativeSamplingStrategy uniform{NegSampleKind::uniform, 4, 1.0};
  NegativeSampler sampler(uniform, world.vocab);
  Rng rng(3);
  std::vector<int> negs;
  for (int epoch = 1; epoch <= 5; ++epoch) {
    for (int step = 0; step < 10; ++step) {
      sampler.sample(sentence, 4, rng, negs);
      HingeResult h = hinge_loss(world.target, u, negs, world.words);
      for (std::size_t c = 0; c < u.size(); ++c) u[c] -= Real(0.05) * h.grad_user[c];
    }
    double ll = held_out_likelihood(u, held, world.words, softmax, world.vocab);
    CHECK(ll > prev);
    prev = ll;
  }
}

TEST_CASE("user2vec zero epochs keeps the random initialization") {
  RepeatedWordWorld world;
  User2VecConfig cfg;
  cfg.max_epochs = 0;
  cfg.seed = 8;
  NegativeSamplingStrategy uniform{NegSampleKind::uniform, 3, 1.0};
  User2VecResult a = train_user_embeddings(world.corpus, world.words, world.vocab, cfg, uniform);
  User2VecResult b = train_user_embeddings(world.corpus, world.words, world.vocab, cfg, uniform);
  CHECK(a.users.values == b.users.values);
  for (const UserTrainingInfo& info : a.report) {
    CHECK(info.epochs_run == 0);
    CHECK(info.best_epoch == 0);
  }
  bool any_nonzero = false;
  for (Real v : a.users.values.flat()) any_nonzero = any_nonzero || v != 0;
  CHECK(any_nonzero);
}

TEST_CASE("user2vec is deterministic and schedule independent") {
  RepeatedWordWorld world;
  // a second user so the parallel schedule has something to interleave
  for (int j = 0; j < 6; ++j) {
    Message m;
    m.id = "g" + std::to_string(j);
    m.author = "duo";
    m.tokens = {"w3", "w4"};
    world.corpus.histories["duo"].push_back(std::move(m));
  }
  User2VecConfig cfg;
  cfg.negatives = 3;
  cfg.max_epochs = 12;
  cfg.seed = 4;
  NegativeSamplingStrategy mle{NegSampleKind::unigram_mle, 3, 1.0};

  User2VecResult serial = train_user_embeddings(world.corpus, world.words, world.vocab, cfg, mle);
  User2VecConfig par = cfg;
  par.jobs = 4;
  User2VecResult parallel = train_user_embeddings(world.corpus, world.words, world.vocab, par, mle);
  CHECK(serial.users.values == parallel.users.values);
  REQUIRE(serial.report.size() == parallel.report.size());
  for (std::size_t i = 0; i < serial.report.size(); ++i) {
    CHECK(serial.report[i].user == parallel.report[i].user);
    CHECK(serial.report[i].best_epoch == parallel.report[i].best_epoch);
    CHECK(serial.report[i].best_likelihood == parallel.report[i].best_likelihood);
  }

  User2VecConfig other = cfg;
  other.seed = 5;
  User2VecResult different = train_user_embeddings(world.corpus, world.words, world.vocab, other, mle);
  CHECK(serial.users.values != different.users.values);
}

TEST_CASE("user2vec leaves the word table untouched and flags empty histories") {
  RepeatedWordWorld world;
  Message orphan;
  orphan.id = "x";
  orphan.author = "ghost";
  orphan.tokens = {"w1"};
  orphan.label = 1;
  world.corpus.messages.push_back(orphan);  // author with no history posts

  Matrix frozen = world.words.values;
  User2VecConfig cfg;
  cfg.negatives = 3;
  cfg.max_epochs = 10;
  NegativeSamplingStrategy uniform{NegSampleKind::uniform, 3, 1.0};
  User2VecResult r = train_user_embeddings(world.corpus, world.words, world.vocab, cfg, uniform);

  CHECK(world.words.values == frozen);

  REQUIRE(r.users.keys == std::vector<std::string>{"ghost", "solo", "u"});
  bool found = false;
  for (const UserTrainingInfo& info : r.report) {
    CHECK(info.best_epoch <= info.epochs_run);
    CHECK(info.epochs_run <= cfg.max_epochs);
    if (info.user == "ghost") {
      found = true;
      CHECK(info.empty_history);
      CHECK(info.epochs_run == 0);
    }
    if (info.user == "solo") CHECK_FALSE(info.empty_history);
  }
  CHECK(found);
}

TEST_CASE("user2vec validates its inputs") {
  RepeatedWordWorld world;
  NegativeSamplingStrategy uniform{NegSampleKind::uniform, 3, 1.0};
  User2VecConfig cfg;

  EmbeddingTable wrong = EmbeddingTable::with_keys({"only", "two"}, 6);
  CHECK_THROWS_WITH_AS(train_user_embeddings(world.corpus, wrong, world.vocab, cfg, uniform),
                       "train_user_embeddings: word table does not match vocabulary",
                       std::invalid_argument);
  CHECK_THROWS_AS(train_user_embeddings(Corpus{}, world.words, world.vocab, cfg, uniform),
                  std::invalid_argument);

  User2VecConfig bad = cfg;
  bad.held_out_fraction = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.lr_final = bad.lr_initial * 2;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.patience = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.jobs = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("user2vec config round trips through json") {
  TempDir dir("cfg");
  {
    std::ofstream out(dir.file("cfg.json"));
    out << R"({"negatives": 7, "max_epochs": 33, "lr_initial": 0.01, "jobs": 2})";
  }
  User2VecConfig cfg = User2VecConfig::from_json_file(dir.file("cfg.json"));
  CHECK(cfg.negatives == 7);
  CHECK(cfg.max_epochs == 33);
  CHECK(cfg.lr_initial == doctest::Approx(0.01));
  CHECK(cfg.jobs == 2);
  CHECK(cfg.window == 5);  // untouched default

  {
    std::ofstream out(dir.file("bad.json"));
    out << "{nope";
  }
  CHECK_THROWS_AS(User2VecConfig::from_json_file(dir.file("bad.json")), FormatError);
  CHECK_THROWS_AS(User2VecConfig::from_json_file(dir.file("absent.json")), FileError);
}

TEST_CASE("held-out likelihood under identical rows is exactly uniform") {
  std::vector<std::vector<std::string>> sentences;
  for (int i = 0; i < 5; ++i) sentences.push_back({"w" + std::to_string(i)});
  Corpus corpus = corpus_of(sentences);
  Vocabulary vocab = Vocabulary::build(corpus, 1);
  EmbeddingTable words = EmbeddingTable::with_keys(vocab.words(), 3);
  WordSoftmaxParams softmax;
  softmax.weights = Matrix(vocab.size(), 3, Real(0.4));
  softmax.bias.assign(vocab.size(), 0);

  Vector u{1.0, -2.0, 0.5};
  std::vector<std::vector<int>> held{{2, 3}, {4}};
  CHECK(held_out_likelihood(u, held, words, softmax, vocab) ==
        doctest::Approx(std::log(1.0 / 5.0)).epsilon(1e-12));

  // a mean of log probabilities can never be positive
  Rng rng(71);
  for (Real& v : softmax.weights.flat()) v = static_cast<Real>(rng.uniform(-2, 2));
  CHECK(held_out_likelihood(u, held, words, softmax, vocab) <= 0);

  CHECK_THROWS_AS(held_out_likelihood(u, {}, words, softmax, vocab), std::invalid_argument);
  CHECK_THROWS_AS(held_out_likelihood(Vector{1}, held, words, softmax, vocab),
                  std::invalid_argument);
}

TEST_CASE("embedding files round trip bit for bit") {
  EmbeddingTable table = EmbeddingTable::with_keys({"alpha", "beta", "gamma"}, 4);
  Rng rng(77);
  for (Real& v : table.values.flat()) v = static_cast<Real>(rng.gaussian() * 1e3);
  table.values(0, 0) = Real(1e-17);
  table.values(1, 1) = Real(-0.1);
  table.values(2, 2) = 0;

  TempDir dir("io");
  save_embeddings(table, dir.file("t.vec"));
  EmbeddingTable back = load_embeddings(dir.file("t.vec"));
  CHECK(back.keys == table.keys);
  CHECK(back.values == table.values);
  CHECK(back.row_of("beta") == 1);
}

TEST_CASE("embedding loader reports structural problems precisely") {
  TempDir dir("io_bad");
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream out(dir.file(name));
    out << body;
    return dir.file(name);
  };

  CHECK_THROWS_AS(load_embeddings(dir.file("absent.vec")), FileError);
  CHECK_THROWS_WITH_AS(load_embeddings(write("empty.vec", "")),
                       doctest::Contains("missing header"), FormatError);
  CHECK_THROWS_WITH_AS(load_embeddings(write("header.vec", "x y\n")),
                       doctest::Contains("header must be"), FormatError);

  CHECK_THROWS_WITH_AS(load_embeddings(write("short.vec", "2 3\na 1 2 3\nb 1 2\n")),
                       doctest::Contains("fewer than 3 values"), FormatError);
  CHECK_THROWS_WITH_AS(load_embeddings(write("long.vec", "1 2\na 1 2 3\n")),
                       doctest::Contains("more than 2 values"), FormatError);
  CHECK_THROWS_WITH_AS(load_embeddings(write("count.vec", "3 2\na 1 2\nb 3 4\n")),
                       doctest::Contains("header announced 3 rows"), FormatError);
  CHECK_THROWS_WITH_AS(load_embeddings(write("dup.vec", "2 2\nsame 1 2\nsame 3 4\n")),
                       doctest::Contains("duplicate key same"), FormatError);

  EmbeddingTable bad = EmbeddingTable::with_keys({"has space"}, 2);
  CHECK_THROWS_AS(save_embeddings(bad, dir.file("bad.vec")), std::invalid_argument);
}

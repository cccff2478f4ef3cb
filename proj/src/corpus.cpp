#include "sarcasm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sarcasm/errors.hpp"
#include "sarcasm/rng.hpp"

namespace sarcasm {

using nlohmann::json;

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    if (current.size() > 1 && current[0] == '@') {
      tokens.push_back("@USER");
    } else if (current.starts_with("http://") || current.starts_with("https://") ||
               current.starts_with("www.")) {
      tokens.push_back("URL");
    } else {
      tokens.push_back(current);
    }
    current.clear();
  };
  for (char ch : text) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a')
                                             : ch);
    }
  }
  flush();
  return tokens;
}

void Vocabulary::finish() {
  index_.clear();
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) index_[words_[i]] = static_cast<int>(i);
  std::int64_t total = 0;
  for (std::size_t i = 2; i < counts_.size(); ++i) total += counts_[i];
  unigram_.assign(words_.size(), 0.0);
  if (total > 0)
    for (std::size_t i = 2; i < counts_.size(); ++i)
      unigram_[i] = static_cast<double>(counts_[i]) / static_cast<double>(total);
}

Vocabulary Vocabulary::build(const Corpus& corpus, std::int64_t min_count) {
  if (min_count < 1) throw std::invalid_argument("Vocabulary::build: min_count must be >= 1");
  std::unordered_map<std::string, std::int64_t> counts;
  auto tally = [&](const Message& m) {
    for (const std::string& t : m.tokens) ++counts[t];
  };
  for (const Message& m : corpus.messages) tally(m);
  for (const auto& [user, posts] : corpus.histories)
    for (const Message& m : posts) tally(m);
  if (counts.empty()) throw std::invalid_argument("Vocabulary::build: empty corpus");

  std::vector<std::pair<std::string, std::int64_t>> retained;
  retained.reserve(counts.size());
  for (auto& [word, count] : counts)
    if (count >= min_count) retained.emplace_back(word, count);
  std::sort(retained.begin(), retained.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  v.words_ = {std::string(kPadWord), std::string(kUnkWord)};
  v.counts_ = {0, 0};
  for (auto& [word, count] : retained) {
    v.words_.push_back(word);
    v.counts_.push_back(count);
  }
  v.finish();
  return v;
}

int Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view word) const {
  return index_.count(std::string(word)) > 0;
}

const std::string& Vocabulary::word(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size())
    throw std::invalid_argument("Vocabulary::word: id out of range");
  return words_[static_cast<std::size_t>(id)];
}

std::int64_t Vocabulary::count(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= counts_.size())
    throw std::invalid_argument("Vocabulary::count: id out of range");
  return counts_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::to_ids(std::span<const std::string> tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(id(t));
  return ids;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw FileError("cannot write vocabulary file: " + path.string());
  for (std::size_t i = 0; i < words_.size(); ++i)
    out << words_[i] << '\t' << i << '\t' << counts_[i] << '\n';
  if (!out) throw FileError("write failed: " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open vocabulary file: " + path.string());
  Vocabulary v;
  std::string line;
  std::size_t lineno = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string word, id_field, count_field;
    if (!std::getline(row, word, '\t') || !std::getline(row, id_field, '\t') ||
        !std::getline(row, count_field))
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected word<TAB>id<TAB>count");
    std::size_t id;
    std::int64_t count;
    try {
      id = std::stoul(id_field);
      count = std::stoll(count_field);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": non-numeric id or count");
    }
    if (id != v.words_.size())
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": ids must be dense and ascending from 0");
    if (count < 0)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": negative count");
    if (!seen.insert(word).second)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": duplicate word " + word);
    v.words_.push_back(word);
    v.counts_.push_back(count);
  }
  if (v.words_.size() < 2 || v.words_[0] != kPadWord || v.words_[1] != kUnkWord)
    throw FormatError(path.string() + ": rows 0 and 1 must be the reserved " +
                      std::string(kPadWord) + " and " + std::string(kUnkWord) + " entries");
  v.finish();
  return v;
}

std::uint64_t Vocabulary::hash() const {
  std::string blob;
  for (const std::string& w : words_) {
    blob += w;
    blob += '\n';
  }
  return fnv1a64(blob);
}

FoldSplit::Roles FoldSplit::roles(std::size_t split) const {
  if (split >= folds.size()) throw std::invalid_argument("FoldSplit::roles: split out of range");
  Roles r;
  std::size_t tune_fold = (split + 1) % folds.size();
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (f == split)
      r.test = folds[f];
    else if (f == tune_fold)
      r.tune = folds[f];
    else
      r.train.insert(r.train.end(), folds[f].begin(), folds[f].end());
  }
  return r;
}

FoldSplit make_folds(const Corpus& corpus, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> labeled;
  for (std::size_t i = 0, li = 0; i < corpus.messages.size(); ++i)
    if (corpus.messages[i].label.has_value()) labeled.push_back(li++);
  // Tune is the fold after test, so k of 2 would leave no training fold.
  if (k < 3) throw std::invalid_argument("make_folds: k must be at least 3");
  if (labeled.size() < k)
    throw std::invalid_argument("make_folds: fewer labeled messages than folds");
  Rng rng(derive_seed(seed, "folds"));
  rng.shuffle(labeled);
  FoldSplit split;
  split.folds.resize(k);
  for (std::size_t i = 0; i < labeled.size(); ++i) split.folds[i % k].push_back(labeled[i]);
  for (auto& fold : split.folds) std::sort(fold.begin(), fold.end());
  return split;
}

void SyntheticSpec::validate() const {
  if (num_users < 1) throw std::invalid_argument("synthetic spec: num_users must be >= 1");
  if (num_groups < 2) throw std::invalid_argument("synthetic spec: num_groups must be >= 2");
  if (num_users < num_groups)
    throw std::invalid_argument("synthetic spec: need at least one user per group");
  if (num_topics < 1) throw std::invalid_argument("synthetic spec: num_topics must be >= 1");
  if (polarity_words_per_side < 1)
    throw std::invalid_argument("synthetic spec: polarity_words_per_side must be >= 1");
  if (num_fillers < 1) throw std::invalid_argument("synthetic spec: num_fillers must be >= 1");
  if (tokens_per_message < 2)
    throw std::invalid_argument("synthetic spec: tokens_per_message must be >= 2");
  if (messages_per_user < 1)
    throw std::invalid_argument("synthetic spec: messages_per_user must be >= 1");
  if (!(sarcasm_rate > 0.0 && sarcasm_rate < 1.0))
    throw std::invalid_argument("synthetic spec: sarcasm_rate must lie in (0, 1)");
  if (!(label_noise >= 0.0 && label_noise < 0.5))
    throw std::invalid_argument("synthetic spec: label_noise must lie in [0, 0.5)");
}

int SyntheticSpec::stance(int group, int topic) const {
  // adjacent groups disagree on every topic; any two groups disagree
  // somewhere
  return ((topic + group) % num_groups) * 2 < num_groups ? 1 : -1;
}

int SyntheticSpec::users_in_group(int group) const {
  return num_users / num_groups + (group < num_users % num_groups ? 1 : 0);
}

std::string SyntheticSpec::user_name(int user) const {
  std::string digits = std::to_string(user);
  std::size_t width = std::to_string(num_users - 1).size();
  return "u" + std::string(width - digits.size(), '0') + digits;
}

SyntheticSpec SyntheticSpec::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("synthetic spec: invalid JSON: ") + e.what());
  }
  SyntheticSpec spec;
  try {
    spec.num_users = j.at("num_users").get<int>();
    spec.num_groups = j.value("num_groups", spec.num_groups);
    spec.num_topics = j.value("num_topics", spec.num_topics);
    spec.polarity_words_per_side =
        j.value("polarity_words_per_side", spec.polarity_words_per_side);
    spec.num_fillers = j.value("num_fillers", spec.num_fillers);
    spec.tokens_per_message = j.value("tokens_per_message", spec.tokens_per_message);
    spec.messages_per_user = j.value("messages_per_user", spec.messages_per_user);
    spec.sarcasm_rate = j.value("sarcasm_rate", spec.sarcasm_rate);
    spec.label_noise = j.value("label_noise", spec.label_noise);
    spec.seed = j.value("seed", spec.seed);
  } catch (const json::exception& e) {
    throw FormatError(std::string("synthetic spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

SyntheticSpec SyntheticSpec::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open synthetic spec: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

std::string SyntheticSpec::to_json() const {
  json j{{"num_users", num_users},
         {"num_groups", num_groups},
         {"num_topics", num_topics},
         {"polarity_words_per_side", polarity_words_per_side},
         {"num_fillers", num_fillers},
         {"tokens_per_message", tokens_per_message},
         {"messages_per_user", messages_per_user},
         {"sarcasm_rate", sarcasm_rate},
         {"label_noise", label_noise},
         {"seed", seed}};
  return j.dump(2);
}

namespace {

std::string topic_word(int t) { return "topic" + std::to_string(t); }
std::string filler_word(int f) { return "filler" + std::to_string(f); }
std::string polarity_word(int side, int p) {
  return (side > 0 ? "pos" : "neg") + std::to_string(p);
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SyntheticCorpus out;
  out.spec = spec;

  for (int u = 0; u < spec.num_users; ++u) {
    const std::string user = spec.user_name(u);
    const int group = spec.group_of_user(u);
    out.user_group[user] = group;

    for (int j = 0; j < spec.messages_per_user; ++j) {
      int topic = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.num_topics)));
      bool sarcastic = rng.uniform() < spec.sarcasm_rate;
      int side = spec.stance(group, topic) * (sarcastic ? -1 : 1);
      int pol = static_cast<int>(
          rng.below(static_cast<std::uint64_t>(spec.polarity_words_per_side)));
      Message m;
      m.id = user + "_m" + std::to_string(j);
      m.author = user;
      m.tokens.push_back(topic_word(topic));
      m.tokens.push_back(polarity_word(side, pol));
      for (int f = 2; f < spec.tokens_per_message; ++f)
        m.tokens.push_back(
            filler_word(static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.num_fillers)))));
      // the flip is drawn unconditionally so token streams are identical
      // across label_noise settings
      bool flip = rng.uniform() < spec.label_noise;
      m.label = static_cast<int>(sarcastic != flip);
      out.corpus.messages.push_back(std::move(m));
    }

    auto& history = out.corpus.histories[user];
    for (int j = 0; j < spec.messages_per_user; ++j) {
      int topic = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.num_topics)));
      int side = spec.stance(group, topic);
      int pol = static_cast<int>(
          rng.below(static_cast<std::uint64_t>(spec.polarity_words_per_side)));
      Message m;
      m.id = user + "_h" + std::to_string(j);
      m.author = user;
      m.tokens.push_back(topic_word(topic));
      m.tokens.push_back(polarity_word(side, pol));
      for (int f = 2; f < spec.tokens_per_message; ++f)
        m.tokens.push_back(
            filler_word(static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.num_fillers)))));
      history.push_back(std::move(m));
    }
  }
  return out;
}

double content_bayes_accuracy(const SyntheticSpec& spec) {
  spec.validate();
  // joint over (topic, polarity word) -> observed label, marginalized over
  // authors; fillers are independent of group and label and drop out
  std::map<std::tuple<int, int, int>, std::array<double, 2>> joint;
  for (int g = 0; g < spec.num_groups; ++g) {
    double pg = static_cast<double>(spec.users_in_group(g)) / spec.num_users;
    for (int t = 0; t < spec.num_topics; ++t) {
      double pt = 1.0 / spec.num_topics;
      for (int sarcastic = 0; sarcastic < 2; ++sarcastic) {
        double ps = sarcastic ? spec.sarcasm_rate : 1.0 - spec.sarcasm_rate;
        int side = spec.stance(g, t) * (sarcastic ? -1 : 1);
        for (int p = 0; p < spec.polarity_words_per_side; ++p) {
          double pp = 1.0 / spec.polarity_words_per_side;
          for (int flip = 0; flip < 2; ++flip) {
            double pf = flip ? spec.label_noise : 1.0 - spec.label_noise;
            if (pf == 0.0) continue;
            int label = static_cast<int>((sarcastic != 0) != (flip != 0));
            joint[{t, side, p}][static_cast<std::size_t>(label)] += pg * pt * ps * pp * pf;
          }
        }
      }
    }
  }
  double accuracy = 0.0;
  for (const auto& [sequence, dist] : joint) accuracy += std::max(dist[0], dist[1]);
  return accuracy;
}

namespace {

Message parse_message(const std::string& line, const std::string& file, std::size_t lineno,
                      bool labels_allowed) {
  auto where = [&] { return file + ":" + std::to_string(lineno); };
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(where() + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw FormatError(where() + ": record must be a JSON object");

  Message m;
  if (!j.contains("id") || !j["id"].is_string())
    throw FormatError(where() + ": missing string field \"id\"");
  m.id = j["id"].get<std::string>();
  if (!j.contains("user") || !j["user"].is_string())
    throw FormatError(where() + ": missing string field \"user\"");
  m.author = j["user"].get<std::string>();

  bool has_text = j.contains("text");
  bool has_tokens = j.contains("tokens");
  if (has_text == has_tokens)
    throw FormatError(where() + ": exactly one of \"text\" or \"tokens\" required");
  if (has_text) {
    if (!j["text"].is_string()) throw FormatError(where() + ": \"text\" must be a string");
    m.tokens = tokenize(j["text"].get<std::string>());
  } else {
    if (!j["tokens"].is_array()) throw FormatError(where() + ": \"tokens\" must be an array");
    for (const auto& tok : j["tokens"]) {
      if (!tok.is_string() || tok.get<std::string>().empty())
        throw FormatError(where() + ": \"tokens\" must hold non-empty strings");
      m.tokens.push_back(tok.get<std::string>());
    }
  }
  if (m.tokens.empty()) throw FormatError(where() + ": message has no tokens");

  if (j.contains("label")) {
    if (!labels_allowed) throw FormatError(where() + ": history records must not carry \"label\"");
    if (!j["label"].is_number_integer() ||
        (j["label"].get<int>() != 0 && j["label"].get<int>() != 1))
      throw FormatError(where() + ": \"label\" must be 0 or 1");
    m.label = j["label"].get<int>();
  }
  return m;
}

json message_to_json(const Message& m, bool with_label) {
  json j{{"id", m.id}, {"user", m.author}, {"tokens", m.tokens}};
  if (with_label && m.label.has_value()) j["label"] = *m.label;
  return j;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& messages_path,
                   const std::filesystem::path& histories_path) {
  Corpus corpus;
  {
    std::ifstream in(messages_path);
    if (!in) throw FileError("cannot open corpus file: " + messages_path.string());
    std::string line;
    std::size_t lineno = 0;
    std::set<std::string> ids;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      Message m = parse_message(line, messages_path.string(), lineno, /*labels_allowed=*/true);
      if (!ids.insert(m.id).second)
        throw FormatError(messages_path.string() + ":" + std::to_string(lineno) +
                          ": duplicate message id " + m.id);
      corpus.messages.push_back(std::move(m));
    }
  }
  if (!histories_path.empty()) {
    std::ifstream in(histories_path);
    if (!in) throw FileError("cannot open history file: " + histories_path.string());
    std::string line;
    std::size_t lineno = 0;
    std::set<std::string> ids;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      Message m = parse_message(line, histories_path.string(), lineno, /*labels_allowed=*/false);
      if (!ids.insert(m.id).second)
        throw FormatError(histories_path.string() + ":" + std::to_string(lineno) +
                          ": duplicate message id " + m.id);
      corpus.histories[m.author].push_back(std::move(m));
    }
  }
  for (const Message& m : corpus.messages) corpus.histories.try_emplace(m.author);
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& messages_path,
                 const std::filesystem::path& histories_path) {
  {
    std::ofstream out(messages_path);
    if (!out) throw FileError("cannot write corpus file: " + messages_path.string());
    for (const Message& m : corpus.messages) out << message_to_json(m, true).dump() << '\n';
    if (!out) throw FileError("write failed: " + messages_path.string());
  }
  if (!histories_path.empty()) {
    std::ofstream out(histories_path);
    if (!out) throw FileError("cannot write history file: " + histories_path.string());
    for (const auto& [user, posts] : corpus.histories)
      for (const Message& m : posts) out << message_to_json(m, false).dump() << '\n';
    if (!out) throw FileError("write failed: " + histories_path.string());
  }
}

std::vector<std::string> user_registry(const Corpus& corpus) {
  std::set<std::string> users;
  for (const Message& m : corpus.messages) users.insert(m.author);
  for (const auto& [user, posts] : corpus.histories) users.insert(user);
  return {users.begin(), users.end()};
}

std::uint64_t registry_hash(std::span<const std::string> users) {
  std::string blob;
  for (const std::string& u : users) {
    blob += u;
    blob += '\n';
  }
  return fnv1a64(blob);
}

}  // namespace sarcasm

#include "sarcasm/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "sarcasm/errors.hpp"
#include "sarcasm/rng.hpp"

namespace sarcasm {

using nlohmann::json;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::cnn: return "cnn";
    case Variant::shallow_cue: return "shallow-cue";
    case Variant::cue: return "cue";
  }
  throw std::invalid_argument("to_string: bad variant value");
}

Variant variant_from_string(std::string_view name) {
  if (name == "cnn") return Variant::cnn;
  if (name == "shallow-cue") return Variant::shallow_cue;
  if (name == "cue") return Variant::cue;
  throw std::invalid_argument("unknown variant \"" + std::string(name) +
                              "\" (expected cnn, shallow-cue, or cue)");
}

std::string to_string(UserInit u) {
  return u == UserInit::random ? "random" : "pretrained";
}

UserInit user_init_from_string(std::string_view name) {
  if (name == "random") return UserInit::random;
  if (name == "pretrained") return UserInit::pretrained;
  throw std::invalid_argument("unknown user-init \"" + std::string(name) +
                              "\" (expected random or pretrained)");
}

void HyperConfig::validate() const {
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw std::invalid_argument("hyper: dropout must lie in [0, 1)");
  if (filter_heights[0] < 1 || filter_heights[0] >= filter_heights[1] ||
      filter_heights[1] >= filter_heights[2])
    throw std::invalid_argument("hyper: filter heights must be strictly increasing and >= 1");
  if (feature_maps < 1) throw std::invalid_argument("hyper: feature_maps must be >= 1");
  if (embedding_dim < 1) throw std::invalid_argument("hyper: embedding_dim must be >= 1");
  if (variant == Variant::cue) {
    if (hidden_size < 1)
      throw std::invalid_argument("hyper: the cue variant needs hidden_size >= 1");
  } else if (hidden_size != 0) {
    throw std::invalid_argument("hyper: hidden_size only applies to the cue variant");
  }
}

namespace {

HyperConfig hyper_from_json(const json& j, const std::string& where) {
  HyperConfig h;
  try {
    h.dropout = j.value("dropout", h.dropout);
    if (j.contains("filter_heights")) {
      auto v = j.at("filter_heights").get<std::vector<int>>();
      if (v.size() != 3)
        throw FormatError(where + ": filter_heights must hold exactly 3 values");
      std::copy(v.begin(), v.end(), h.filter_heights.begin());
    }
    h.feature_maps = j.value("feature_maps", h.feature_maps);
    h.hidden_size = j.value("hidden_size", h.hidden_size);
    h.embedding_dim = j.value("embedding_dim", h.embedding_dim);
    if (j.contains("variant")) h.variant = variant_from_string(j.at("variant").get<std::string>());
    if (j.contains("user_init"))
      h.user_init = user_init_from_string(j.at("user_init").get<std::string>());
    h.freeze_embeddings = j.value("freeze_embeddings", h.freeze_embeddings);
  } catch (const json::exception& e) {
    throw FormatError(where + ": " + e.what());
  }
  h.validate();
  return h;
}

json hyper_to_json_obj(const HyperConfig& h) {
  json j;
  j["dropout"] = h.dropout;
  j["filter_heights"] = h.filter_heights;
  j["feature_maps"] = h.feature_maps;
  j["hidden_size"] = h.hidden_size;
  j["embedding_dim"] = h.embedding_dim;
  j["variant"] = to_string(h.variant);
  j["user_init"] = to_string(h.user_init);
  j["freeze_embeddings"] = h.freeze_embeddings;
  return j;
}

}  // namespace

HyperConfig HyperConfig::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open hyperparameter config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": invalid JSON: " + e.what());
  }
  return hyper_from_json(j, path.string());
}

std::string HyperConfig::to_json() const { return hyper_to_json_obj(*this).dump(); }

std::size_t ModelParams::concat_dim() const {
  std::size_t dim = summary_dim();
  if (hyper.variant != Variant::cnn) dim += static_cast<std::size_t>(hyper.embedding_dim);
  return dim;
}

std::size_t ModelParams::feed_dim() const {
  return hyper.variant == Variant::cue ? static_cast<std::size_t>(hyper.hidden_size)
                                       : concat_dim();
}

Gradients Gradients::like(const ModelParams& params) {
  Gradients g;
  g.embeddings = Matrix(params.embeddings.rows(), params.embeddings.cols());
  g.users = Matrix(params.users.rows(), params.users.cols());
  for (int b = 0; b < 3; ++b) {
    g.filters[b] = Matrix(params.filters[b].rows(), params.filters[b].cols());
    g.filter_bias[b] = Vector(params.filter_bias[b].size(), 0);
  }
  g.hidden_weights = Matrix(params.hidden_weights.rows(), params.hidden_weights.cols());
  g.hidden_bias = Vector(params.hidden_bias.size(), 0);
  g.output_weights = Matrix(params.output_weights.rows(), params.output_weights.cols());
  g.output_bias = Vector(params.output_bias.size(), 0);
  return g;
}

void Gradients::zero() {
  embeddings.fill(0);
  users.fill(0);
  for (int b = 0; b < 3; ++b) {
    filters[b].fill(0);
    std::fill(filter_bias[b].begin(), filter_bias[b].end(), Real(0));
  }
  hidden_weights.fill(0);
  std::fill(hidden_bias.begin(), hidden_bias.end(), Real(0));
  output_weights.fill(0);
  std::fill(output_bias.begin(), output_bias.end(), Real(0));
}

void Gradients::scale(Real factor) {
  auto scale_span = [factor](std::span<Real> xs) {
    for (Real& x : xs) x *= factor;
  };
  scale_span(embeddings.flat());
  scale_span(users.flat());
  for (int b = 0; b < 3; ++b) {
    scale_span(filters[b].flat());
    scale_span(filter_bias[b]);
  }
  scale_span(hidden_weights.flat());
  scale_span(hidden_bias);
  scale_span(output_weights.flat());
  scale_span(output_bias);
}

namespace {

// Canonical form: trailing PADs stripped, then padded back up to the tallest
// filter so every bank has at least one valid window.
std::vector<int> normalize_ids(std::span<const int> token_ids, const ModelParams& params) {
  std::size_t len = token_ids.size();
  while (len > 0 && token_ids[len - 1] == kPadId) --len;
  std::size_t min_len = static_cast<std::size_t>(params.hyper.filter_heights[2]);
  std::vector<int> ids(token_ids.begin(), token_ids.begin() + len);
  ids.resize(std::max(len, min_len), kPadId);
  const int vocab_rows = static_cast<int>(params.embeddings.rows());
  for (int id : ids)
    if (id < 0 || id >= vocab_rows)
      throw std::invalid_argument("token id " + std::to_string(id) +
                                  " outside the vocabulary table");
  return ids;
}

Matrix sentence_matrix(std::span<const int> ids, const Matrix& embeddings) {
  Matrix s(ids.size(), embeddings.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Real* src = embeddings.row(static_cast<std::size_t>(ids[i]));
    std::copy(src, src + embeddings.cols(), s.row(i));
  }
  return s;
}

}  // namespace

Vector encode_sentence(std::span<const int> token_ids, const ModelParams& params,
                       EncodeTrace* trace) {
  std::vector<int> ids = normalize_ids(token_ids, params);
  Matrix s = sentence_matrix(ids, params.embeddings);
  const int m = params.hyper.feature_maps;
  Vector summary(params.summary_dim(), 0);
  if (trace) {
    trace->ids = ids;
    trace->maps.assign(summary.size(), {0, 0});
  }
  Vector preact;
  const std::size_t d = s.cols();
  for (int b = 0; b < 3; ++b) {
    const std::size_t h = static_cast<std::size_t>(params.hyper.filter_heights[b]);
    for (int j = 0; j < m; ++j) {
      convolve_into(s, params.filters[b].row(static_cast<std::size_t>(j) * h), h, d,
                    params.filter_bias[b][static_cast<std::size_t>(j)], Activation::identity,
                    preact);
      // Pool over the activated map; ties keep the first window.
      std::size_t pos = 0;
      Real best = relu(preact[0]);
      for (std::size_t t = 1; t < preact.size(); ++t) {
        Real v = relu(preact[t]);
        if (v > best) {
          best = v;
          pos = t;
        }
      }
      std::size_t out = static_cast<std::size_t>(b) * static_cast<std::size_t>(m) +
                        static_cast<std::size_t>(j);
      summary[out] = best;
      if (trace) trace->maps[out] = {static_cast<int>(pos), preact[pos]};
    }
  }
  return summary;
}

namespace {

struct ForwardCache {
  EncodeTrace trace;
  Vector concat;      // summary, plus the user row for user variants
  Vector hidden_pre;  // H concat + h, cue only
  Vector feed;        // layer under the output weights, after dropout
  Vector scores;
  Prediction pred;
};

void run_forward(std::span<const int> token_ids, int user_row, const ModelParams& params,
                 std::span<const Real> dropout_mask, ForwardCache& cache) {
  const Variant variant = params.hyper.variant;
  if (variant != Variant::cnn &&
      (user_row < 0 || static_cast<std::size_t>(user_row) >= params.users.rows()))
    throw std::invalid_argument("unregistered user (row " + std::to_string(user_row) + " of " +
                                std::to_string(params.users.rows()) + ")");

  cache.concat = encode_sentence(token_ids, params, &cache.trace);
  if (variant != Variant::cnn) {
    std::span<const Real> u = params.users.row_span(static_cast<std::size_t>(user_row));
    cache.concat.insert(cache.concat.end(), u.begin(), u.end());
  }

  if (variant == Variant::cue) {
    const std::size_t z = params.hidden_weights.rows();
    cache.hidden_pre.assign(z, 0);
    for (std::size_t i = 0; i < z; ++i) {
      const Real* w = params.hidden_weights.row(i);
      Real acc = params.hidden_bias[i];
      for (std::size_t j = 0; j < cache.concat.size(); ++j) acc += w[j] * cache.concat[j];
      cache.hidden_pre[i] = acc;
    }
    cache.feed = relu(cache.hidden_pre);
  } else {
    cache.feed = cache.concat;
  }

  if (!dropout_mask.empty()) {
    if (dropout_mask.size() != cache.feed.size())
      throw std::invalid_argument("dropout mask size " + std::to_string(dropout_mask.size()) +
                                  " does not match layer width " +
                                  std::to_string(cache.feed.size()));
    for (std::size_t i = 0; i < cache.feed.size(); ++i) cache.feed[i] *= dropout_mask[i];
  }

  cache.scores.assign(2, 0);
  for (std::size_t k = 0; k < 2; ++k) {
    const Real* w = params.output_weights.row(k);
    Real acc = params.output_bias[k];
    for (std::size_t j = 0; j < cache.feed.size(); ++j) acc += w[j] * cache.feed[j];
    cache.scores[k] = acc;
  }
  Vector probs = softmax(cache.scores);
  cache.pred.probs = {probs[0], probs[1]};
  cache.pred.summary.assign(cache.concat.begin(),
                            cache.concat.begin() + static_cast<std::ptrdiff_t>(params.summary_dim()));
}

}  // namespace

Prediction forward(std::span<const int> token_ids, int user_row, const ModelParams& params,
                   std::span<const Real> dropout_mask) {
  ForwardCache cache;
  run_forward(token_ids, user_row, params, dropout_mask, cache);
  return cache.pred;
}

Real backward(std::span<const int> token_ids, int user_row, int gold,
              const ModelParams& params, std::span<const Real> dropout_mask, Gradients& grads) {
  if (gold != 0 && gold != 1)
    throw std::invalid_argument("gold label must be 0 or 1, got " + std::to_string(gold));
  ForwardCache cache;
  run_forward(token_ids, user_row, params, dropout_mask, cache);
  const Real loss = cross_entropy({cache.pred.probs.data(), 2}, static_cast<std::size_t>(gold));

  // Softmax + cross-entropy collapse to p - onehot at the scores.
  Real dscores[2] = {cache.pred.probs[0], cache.pred.probs[1]};
  dscores[gold] -= 1;

  Vector dfeed(cache.feed.size(), 0);
  for (std::size_t k = 0; k < 2; ++k) {
    Real* gw = grads.output_weights.row(k);
    const Real* w = params.output_weights.row(k);
    for (std::size_t j = 0; j < cache.feed.size(); ++j) {
      gw[j] += dscores[k] * cache.feed[j];
      dfeed[j] += dscores[k] * w[j];
    }
    grads.output_bias[k] += dscores[k];
  }

  if (!dropout_mask.empty())
    for (std::size_t j = 0; j < dfeed.size(); ++j) dfeed[j] *= dropout_mask[j];

  const Variant variant = params.hyper.variant;
  Vector dconcat;
  if (variant == Variant::cue) {
    dconcat.assign(cache.concat.size(), 0);
    for (std::size_t i = 0; i < cache.hidden_pre.size(); ++i) {
      if (cache.hidden_pre[i] <= 0) continue;
      const Real da = dfeed[i];
      Real* gw = grads.hidden_weights.row(i);
      const Real* w = params.hidden_weights.row(i);
      for (std::size_t j = 0; j < cache.concat.size(); ++j) {
        gw[j] += da * cache.concat[j];
        dconcat[j] += da * w[j];
      }
      grads.hidden_bias[i] += da;
    }
  } else {
    dconcat = std::move(dfeed);
  }

  const std::size_t summary = params.summary_dim();
  if (variant != Variant::cnn) {
    Real* gu = grads.users.row(static_cast<std::size_t>(user_row));
    for (std::size_t j = summary; j < dconcat.size(); ++j) gu[j - summary] += dconcat[j];
  }

  // Through each pooled map: gradient lands on the winning window only, and
  // only when its pre-activation cleared the relu.
  const int m = params.hyper.feature_maps;
  const std::size_t d = params.embeddings.cols();
  for (int b = 0; b < 3; ++b) {
    const std::size_t h = static_cast<std::size_t>(params.hyper.filter_heights[b]);
    for (int j = 0; j < m; ++j) {
      const std::size_t out = static_cast<std::size_t>(b) * static_cast<std::size_t>(m) +
                              static_cast<std::size_t>(j);
      const EncodeTrace::PooledMap& pooled = cache.trace.maps[out];
      if (pooled.preactivation <= 0) continue;
      const Real g = dconcat[out];
      if (g == 0) continue;
      grads.filter_bias[b][static_cast<std::size_t>(j)] += g;
      const std::size_t t = static_cast<std::size_t>(pooled.position);
      for (std::size_t r = 0; r < h; ++r) {
        const int id = cache.trace.ids[t + r];
        const Real* e_row = params.embeddings.row(static_cast<std::size_t>(id));
        const Real* f_row = params.filters[b].row(static_cast<std::size_t>(j) * h + r);
        Real* gf_row = grads.filters[b].row(static_cast<std::size_t>(j) * h + r);
        for (std::size_t c = 0; c < d; ++c) gf_row[c] += g * e_row[c];
        if (id == kPadId) continue;  // padding row stays pinned at zero
        Real* ge_row = grads.embeddings.row(static_cast<std::size_t>(id));
        for (std::size_t c = 0; c < d; ++c) ge_row[c] += g * f_row[c];
      }
    }
  }
  return loss;
}

namespace {

void fill_uniform(Matrix& m, Real limit, Rng& rng) {
  for (Real& x : m.flat()) x = static_cast<Real>(rng.uniform(-limit, limit));
}

Real glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  return static_cast<Real>(std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
}

void copy_pretrained_row(const EmbeddingTable& table, const std::string& key, Real* dst,
                         std::size_t dim, const char* what) {
  int row = table.row_of(key);
  if (row < 0)
    throw std::invalid_argument(std::string("pretrained ") + what + " table has no row for \"" +
                                key + "\"");
  const Real* src = table.values.row(static_cast<std::size_t>(row));
  std::copy(src, src + dim, dst);
}

}  // namespace

ModelParams init_params(const HyperConfig& hyper, const Vocabulary& vocab,
                        std::span<const std::string> users, std::uint64_t seed,
                        const EmbeddingTable* pretrained_words,
                        const EmbeddingTable* pretrained_users) {
  hyper.validate();
  const std::size_t d = static_cast<std::size_t>(hyper.embedding_dim);
  if (pretrained_words && pretrained_words->dim() != d)
    throw std::invalid_argument("pretrained word table dimension " +
                                std::to_string(pretrained_words->dim()) +
                                " does not match embedding_dim " + std::to_string(d));
  if (pretrained_users && pretrained_users->dim() != d)
    throw std::invalid_argument("pretrained user table dimension " +
                                std::to_string(pretrained_users->dim()) +
                                " does not match embedding_dim " + std::to_string(d));

  ModelParams p;
  p.hyper = hyper;
  p.vocab_words = vocab.words();
  p.init_seed = seed;

  p.embeddings = Matrix(vocab.size(), d);
  if (pretrained_words) {
    for (std::size_t id = 2; id < vocab.size(); ++id)
      copy_pretrained_row(*pretrained_words, p.vocab_words[id], p.embeddings.row(id), d, "word");
  } else {
    Rng rng(derive_seed(seed, "init/words"));
    const Real limit = static_cast<Real>(0.5 / static_cast<double>(d));
    for (std::size_t id = 2; id < vocab.size(); ++id)
      for (std::size_t c = 0; c < d; ++c)
        p.embeddings(id, c) = static_cast<Real>(rng.uniform(-limit, limit));
  }
  // PAD and UNK rows start at zero whatever the source.
  std::fill(p.embeddings.row(kPadId), p.embeddings.row(kPadId) + d, Real(0));
  std::fill(p.embeddings.row(kUnkId), p.embeddings.row(kUnkId) + d, Real(0));

  if (hyper.variant != Variant::cnn) {
    p.user_ids.assign(users.begin(), users.end());
    p.users = Matrix(p.user_ids.size(), d);
    if (hyper.user_init == UserInit::pretrained && pretrained_users) {
      for (std::size_t i = 0; i < p.user_ids.size(); ++i)
        copy_pretrained_row(*pretrained_users, p.user_ids[i], p.users.row(i), d, "user");
    } else {
      // N(0, 0.01): asking for pretrained rows without supplying a table
      // falls back to the same random draw.
      Rng rng(derive_seed(seed, "init/users"));
      for (Real& x : p.users.flat()) x = static_cast<Real>(0.1 * rng.gaussian());
    }
  }

  const std::size_t m = static_cast<std::size_t>(hyper.feature_maps);
  for (int b = 0; b < 3; ++b) {
    const std::size_t h = static_cast<std::size_t>(hyper.filter_heights[b]);
    p.filters[b] = Matrix(m * h, d);
    Rng rng(derive_seed(seed, "init/filters" + std::to_string(b)));
    fill_uniform(p.filters[b], glorot_limit(h * d, m), rng);
    p.filter_bias[b] = Vector(m, 0);
  }

  if (hyper.variant == Variant::cue) {
    const std::size_t z = static_cast<std::size_t>(hyper.hidden_size);
    p.hidden_weights = Matrix(z, p.concat_dim());
    Rng rng(derive_seed(seed, "init/hidden"));
    fill_uniform(p.hidden_weights, glorot_limit(p.concat_dim(), z), rng);
    p.hidden_bias = Vector(z, 0);
  }

  p.output_weights = Matrix(2, p.feed_dim());
  Rng rng(derive_seed(seed, "init/output"));
  fill_uniform(p.output_weights, glorot_limit(p.feed_dim(), 2), rng);
  p.output_bias = Vector(2, 0);
  return p;
}

namespace {

constexpr std::string_view kCheckpointFormat = "sarcasm-checkpoint-v1";

void write_tensor(std::ofstream& out, std::string_view name, const Matrix& m,
                  std::span<const std::string> keys) {
  out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  char buf[64];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (keys.empty())
      out << i;
    else
      out << keys[i];
    const Real* row = m.row(i);
    for (std::size_t c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(row[c]));
      out << ' ' << buf;
    }
    out << '\n';
  }
}

void write_tensor(std::ofstream& out, std::string_view name, const Vector& v) {
  Matrix m(1, v.size());
  std::copy(v.begin(), v.end(), m.row(0));
  write_tensor(out, name, m, {});
}

struct TensorBlock {
  Matrix values;
  std::vector<std::string> keys;
};

TensorBlock read_tensor(std::istream& in, const std::string& path, std::string_view name) {
  std::string line;
  if (!std::getline(in, line))
    throw FormatError(path + ": missing tensor block \"" + std::string(name) + "\"");
  std::istringstream header(line);
  std::string tag, got;
  std::size_t rows = 0, cols = 0;
  if (!(header >> tag >> got >> rows >> cols) || tag != "tensor")
    throw FormatError(path + ": malformed tensor header: " + line);
  if (got != name)
    throw FormatError(path + ": expected tensor \"" + std::string(name) + "\", found \"" + got +
                      "\"");
  TensorBlock block;
  block.values = Matrix(rows, cols);
  block.keys.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!std::getline(in, line))
      throw FormatError(path + ": tensor \"" + got + "\" truncated at row " + std::to_string(i));
    const char* cursor = line.c_str();
    while (*cursor == ' ') ++cursor;
    const char* key_end = cursor;
    while (*key_end && *key_end != ' ') ++key_end;
    block.keys.emplace_back(cursor, key_end);
    cursor = key_end;
    Real* row = block.values.row(i);
    for (std::size_t c = 0; c < cols; ++c) {
      char* next = nullptr;
      double value = std::strtod(cursor, &next);
      if (next == cursor)
        throw FormatError(path + ": tensor \"" + got + "\" row \"" + block.keys.back() +
                          "\" holds fewer than " + std::to_string(cols) + " values");
      row[c] = static_cast<Real>(value);
      cursor = next;
    }
    while (*cursor == ' ') ++cursor;
    if (*cursor != '\0')
      throw FormatError(path + ": tensor \"" + got + "\" row \"" + block.keys.back() +
                        "\" holds more than " + std::to_string(cols) + " values");
  }
  return block;
}

Vector tensor_as_vector(TensorBlock&& block, const std::string& path, std::string_view name,
                        std::size_t expect) {
  if (block.values.rows() != 1 || block.values.cols() != expect)
    throw FormatError(path + ": tensor \"" + std::string(name) + "\" must be 1 x " +
                      std::to_string(expect));
  auto flat = block.values.flat();
  return Vector(flat.begin(), flat.end());
}

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& path,
                   std::string_view name) {
  if (m.rows() != rows || m.cols() != cols)
    throw FormatError(path + ": tensor \"" + std::string(name) + "\" has shape " +
                      std::to_string(m.rows()) + " x " + std::to_string(m.cols()) +
                      ", expected " + std::to_string(rows) + " x " + std::to_string(cols));
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write checkpoint: " + path.string());
  json manifest;
  manifest["format"] = kCheckpointFormat;
  manifest["hyper"] = hyper_to_json_obj(params.hyper);
  manifest["init_seed"] = std::to_string(params.init_seed);
  manifest["vocab_hash"] = std::to_string(registry_hash(params.vocab_words));
  manifest["user_hash"] = std::to_string(registry_hash(params.user_ids));
  out << manifest.dump() << '\n';

  write_tensor(out, "embeddings", params.embeddings, params.vocab_words);
  write_tensor(out, "users", params.users, params.user_ids);
  for (int b = 0; b < 3; ++b) {
    const std::string idx = std::to_string(b);
    write_tensor(out, "filters" + idx, params.filters[b], {});
    write_tensor(out, "filter_bias" + idx, params.filter_bias[b]);
  }
  write_tensor(out, "hidden_weights", params.hidden_weights, {});
  write_tensor(out, "hidden_bias", params.hidden_bias);
  write_tensor(out, "output_weights", params.output_weights, {});
  write_tensor(out, "output_bias", params.output_bias);
  if (!out) throw FileError("failed while writing checkpoint: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path,
                            std::optional<std::uint64_t> expect_vocab_hash,
                            std::optional<std::uint64_t> expect_user_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open checkpoint: " + path.string());
  const std::string where = path.string();
  std::string line;
  if (!std::getline(in, line)) throw FormatError(where + ": empty checkpoint");
  json manifest;
  try {
    manifest = json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(where + ": invalid manifest: " + e.what());
  }
  if (manifest.value("format", std::string()) != kCheckpointFormat)
    throw FormatError(where + ": not a \"" + std::string(kCheckpointFormat) + "\" file");

  ModelParams p;
  if (!manifest.contains("hyper")) throw FormatError(where + ": manifest lacks \"hyper\"");
  p.hyper = hyper_from_json(manifest.at("hyper"), where);
  std::uint64_t stored_vocab_hash = 0, stored_user_hash = 0;
  try {
    p.init_seed = std::stoull(manifest.at("init_seed").get<std::string>());
    stored_vocab_hash = std::stoull(manifest.at("vocab_hash").get<std::string>());
    stored_user_hash = std::stoull(manifest.at("user_hash").get<std::string>());
  } catch (const std::exception& e) {
    throw FormatError(where + ": manifest: " + e.what());
  }

  const std::size_t d = static_cast<std::size_t>(p.hyper.embedding_dim);
  const std::size_t m = static_cast<std::size_t>(p.hyper.feature_maps);

  TensorBlock emb = read_tensor(in, where, "embeddings");
  if (emb.values.cols() != d)
    throw FormatError(where + ": embeddings have dimension " +
                      std::to_string(emb.values.cols()) + ", manifest says " + std::to_string(d));
  if (emb.values.rows() < 2 || emb.keys[0] != kPadWord || emb.keys[1] != kUnkWord)
    throw FormatError(where + ": embedding rows 0 and 1 must be the reserved entries");
  p.vocab_words = std::move(emb.keys);
  p.embeddings = std::move(emb.values);

  TensorBlock users = read_tensor(in, where, "users");
  p.user_ids = std::move(users.keys);
  p.users = std::move(users.values);

  for (int b = 0; b < 3; ++b) {
    const std::string idx = std::to_string(b);
    const std::size_t h = static_cast<std::size_t>(p.hyper.filter_heights[b]);
    TensorBlock f = read_tensor(in, where, "filters" + idx);
    require_shape(f.values, m * h, d, where, "filters" + idx);
    p.filters[b] = std::move(f.values);
    p.filter_bias[b] =
        tensor_as_vector(read_tensor(in, where, "filter_bias" + idx), where, "filter_bias" + idx, m);
  }

  TensorBlock hidden = read_tensor(in, where, "hidden_weights");
  if (p.hyper.variant == Variant::cue)
    require_shape(hidden.values, static_cast<std::size_t>(p.hyper.hidden_size), p.concat_dim(),
                  where, "hidden_weights");
  else
    require_shape(hidden.values, 0, 0, where, "hidden_weights");
  p.hidden_weights = std::move(hidden.values);
  const std::size_t z =
      p.hyper.variant == Variant::cue ? static_cast<std::size_t>(p.hyper.hidden_size) : 0;
  p.hidden_bias = tensor_as_vector(read_tensor(in, where, "hidden_bias"), where, "hidden_bias", z);

  TensorBlock out_w = read_tensor(in, where, "output_weights");
  require_shape(out_w.values, 2, p.feed_dim(), where, "output_weights");
  p.output_weights = std::move(out_w.values);
  p.output_bias = tensor_as_vector(read_tensor(in, where, "output_bias"), where, "output_bias", 2);

  if (p.hyper.variant == Variant::cnn) {
    if (!p.user_ids.empty())
      throw FormatError(where + ": cnn checkpoints must not carry user rows");
  } else {
    if (p.users.rows() != p.user_ids.size() || p.users.cols() != d)
      throw FormatError(where + ": user table shape does not match its key list");
  }

  // Hashes are re-derived from the stored keys; a manifest that disagrees
  // with its own body (or with the caller's tables) is refused.
  const std::uint64_t vocab_hash = registry_hash(p.vocab_words);
  const std::uint64_t user_hash = registry_hash(p.user_ids);
  if (vocab_hash != stored_vocab_hash)
    throw FormatError(where + ": vocabulary hash mismatch between manifest and stored words");
  if (user_hash != stored_user_hash)
    throw FormatError(where + ": user-registry hash mismatch between manifest and stored ids");
  if (expect_vocab_hash && *expect_vocab_hash != vocab_hash)
    throw FormatError(where + ": checkpoint was built against a different vocabulary");
  if (expect_user_hash && *expect_user_hash != user_hash)
    throw FormatError(where + ": checkpoint was built against a different user registry");
  return p;
}

}  // namespace sarcasm

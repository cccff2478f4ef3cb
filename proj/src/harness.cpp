#include "sarcasm/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "sarcasm/errors.hpp"
#include "sarcasm/parallel.hpp"

namespace sarcasm {

using nlohmann::json;

void OptimizerConfig::validate() const {
  if (!(rho >= 0.0 && rho < 1.0))
    throw std::invalid_argument("optimizer: rho must lie in [0, 1)");
  if (!(eps > 0)) throw std::invalid_argument("optimizer: eps must be positive");
  if (minibatch < 1) throw std::invalid_argument("optimizer: minibatch must be >= 1");
  if (max_epochs < 0) throw std::invalid_argument("optimizer: max_epochs must be >= 0");
  if (patience < 1) throw std::invalid_argument("optimizer: patience must be >= 1");
  if (!(early_stop_fraction > 0.0 && early_stop_fraction < 1.0))
    throw std::invalid_argument("optimizer: early_stop_fraction must lie in (0, 1)");
}

std::vector<LabeledExample> make_examples(const Corpus& corpus, const Vocabulary& vocab,
                                          std::span<const std::string> users) {
  std::unordered_map<std::string_view, int> row_of;
  row_of.reserve(users.size());
  for (std::size_t i = 0; i < users.size(); ++i) row_of.emplace(users[i], static_cast<int>(i));

  std::vector<LabeledExample> examples;
  for (const Message& m : corpus.messages) {
    if (!m.label.has_value()) continue;
    LabeledExample ex;
    ex.token_ids = vocab.to_ids(m.tokens);
    auto it = row_of.find(m.author);
    ex.user_row = it == row_of.end() ? kNoUser : it->second;
    ex.label = *m.label;
    examples.push_back(std::move(ex));
  }
  return examples;
}

Vector dropout_mask(std::size_t size, double rate, Rng& rng) {
  if (rate == 0.0) return {};
  if (!(rate > 0.0 && rate < 1.0))
    throw std::invalid_argument("dropout_mask: rate must lie in [0, 1)");
  Vector mask(size);
  const Real keep_scale = static_cast<Real>(1.0 / (1.0 - rate));
  for (Real& m : mask) m = rng.uniform() < rate ? Real(0) : keep_scale;
  return mask;
}

namespace {

double accuracy_over(const ModelParams& params, std::span<const LabeledExample> set,
                     std::span<const std::size_t> subset) {
  std::size_t correct = 0;
  for (std::size_t i : subset) {
    const LabeledExample& ex = set[i];
    correct += forward(ex.token_ids, ex.user_row, params).argmax() == ex.label;
  }
  return static_cast<double>(correct) / static_cast<double>(subset.size());
}

struct AdaDeltaStates {
  AdaDeltaState embeddings, users;
  std::array<AdaDeltaState, 3> filters, filter_bias;
  AdaDeltaState hidden_weights, hidden_bias, output_weights, output_bias;
};

void apply_updates(ModelParams& params, const Gradients& grads, AdaDeltaStates& states,
                   const OptimizerConfig& opt) {
  const Real rho = static_cast<Real>(opt.rho);
  const Real eps = static_cast<Real>(opt.eps);
  if (!params.hyper.freeze_embeddings)
    adadelta_step(params.embeddings.flat(), grads.embeddings.flat(), states.embeddings, rho, eps);
  if (!params.users.empty())
    adadelta_step(params.users.flat(), grads.users.flat(), states.users, rho, eps);
  for (int b = 0; b < 3; ++b) {
    adadelta_step(params.filters[b].flat(), grads.filters[b].flat(), states.filters[b], rho, eps);
    adadelta_step(params.filter_bias[b], grads.filter_bias[b], states.filter_bias[b], rho, eps);
  }
  if (!params.hidden_weights.empty()) {
    adadelta_step(params.hidden_weights.flat(), grads.hidden_weights.flat(),
                  states.hidden_weights, rho, eps);
    adadelta_step(params.hidden_bias, grads.hidden_bias, states.hidden_bias, rho, eps);
  }
  adadelta_step(params.output_weights.flat(), grads.output_weights.flat(),
                states.output_weights, rho, eps);
  adadelta_step(params.output_bias, grads.output_bias, states.output_bias, rho, eps);
}

}  // namespace

TrainResult train_model(std::span<const LabeledExample> train,
                        std::span<const LabeledExample> tune, const ModelParams& init,
                        const OptimizerConfig& opt, std::uint64_t seed) {
  opt.validate();
  if (train.empty()) throw std::invalid_argument("train_model: empty training split");
  const auto start_time = std::chrono::steady_clock::now();

  // Seeded early-stop reserve carved out of the training split.
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(derive_seed(seed, "earlystop"));
  split_rng.shuffle(order);
  std::size_t reserve = std::max<std::size_t>(
      1, static_cast<std::size_t>(opt.early_stop_fraction * static_cast<double>(train.size())));
  if (reserve >= train.size())
    throw std::invalid_argument("train_model: training split too small for an early-stop reserve");
  std::vector<std::size_t> held(order.begin(),
                                order.begin() + static_cast<std::ptrdiff_t>(reserve));
  std::vector<std::size_t> fit(order.begin() + static_cast<std::ptrdiff_t>(reserve), order.end());

  TrainReport report;
  report.config = init.hyper;
  report.seed = seed;

  ModelParams params = init;
  ModelParams best = params;
  double best_metric = accuracy_over(params, train, held);
  report.early_stop_accuracy.push_back(best_metric);

  Rng order_rng(derive_seed(seed, "order"));
  Rng drop_rng(derive_seed(seed, "dropout"));
  Gradients grads = Gradients::like(params);
  AdaDeltaStates states;
  const double rate = params.hyper.dropout;
  const std::size_t feed = params.feed_dim();
  const std::size_t batch_size = static_cast<std::size_t>(opt.minibatch);
  int patience_left = opt.patience;

  for (int epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    order_rng.shuffle(fit);
    double loss_sum = 0;
    for (std::size_t start = 0; start < fit.size(); start += batch_size) {
      const std::size_t end = std::min(fit.size(), start + batch_size);
      grads.zero();
      for (std::size_t i = start; i < end; ++i) {
        const LabeledExample& ex = train[fit[i]];
        Vector mask = dropout_mask(feed, rate, drop_rng);
        loss_sum += backward(ex.token_ids, ex.user_row, ex.label, params, mask, grads);
      }
      grads.scale(static_cast<Real>(1.0 / static_cast<double>(end - start)));
      apply_updates(params, grads, states, opt);
    }
    report.train_loss.push_back(loss_sum / static_cast<double>(fit.size()));
    const double metric = accuracy_over(params, train, held);
    report.early_stop_accuracy.push_back(metric);
    report.epochs_run = epoch;
    if (metric > best_metric) {
      best_metric = metric;
      best = params;
      report.best_epoch = epoch;
      patience_left = opt.patience;
    } else if (--patience_left == 0) {
      break;
    }
  }

  if (!tune.empty()) report.tune_accuracy = evaluate(best, tune);
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return {std::move(best), std::move(report)};
}

double evaluate(const ModelParams& params, std::span<const LabeledExample> test) {
  if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
  std::size_t correct = 0;
  for (const LabeledExample& ex : test)
    correct += forward(ex.token_ids, ex.user_row, params).argmax() == ex.label;
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

double evaluate(const Predictor& predict, std::span<const LabeledExample> test) {
  if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
  std::size_t correct = 0;
  for (const LabeledExample& ex : test) correct += predict(ex) == ex.label;
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

std::size_t SearchSpace::size() const {
  return dropouts.size() * filter_heights.size() * feature_maps.size() * hidden_sizes.size();
}

std::size_t SearchSpace::effective_budget() const {
  if (budget != 0) return budget;
  return std::max<std::size_t>(1, size() / 2);
}

void SearchSpace::validate() const {
  if (dropouts.empty() || filter_heights.empty() || feature_maps.empty() || hidden_sizes.empty())
    throw std::invalid_argument("search space: every axis needs at least one value");
  for (double d : dropouts)
    if (!(d >= 0.0 && d < 1.0))
      throw std::invalid_argument("search space: dropout values must lie in [0, 1)");
  for (const auto& h : filter_heights)
    if (h[0] < 1 || h[0] >= h[1] || h[1] >= h[2])
      throw std::invalid_argument("search space: filter heights must be strictly increasing");
  for (int m : feature_maps)
    if (m < 1) throw std::invalid_argument("search space: feature map counts must be >= 1");
  for (int z : hidden_sizes)
    if (z < 0) throw std::invalid_argument("search space: hidden sizes must be >= 0");
  auto unique_count = [](auto values) {
    std::sort(values.begin(), values.end());
    return static_cast<std::size_t>(std::unique(values.begin(), values.end()) - values.begin());
  };
  if (unique_count(dropouts) != dropouts.size() ||
      unique_count(filter_heights) != filter_heights.size() ||
      unique_count(feature_maps) != feature_maps.size() ||
      unique_count(hidden_sizes) != hidden_sizes.size())
    throw std::invalid_argument("search space: axis values must be unique");
  if (budget > size())
    throw std::invalid_argument("search space: budget exceeds the number of configurations");
}

SearchSpace SearchSpace::full() {
  SearchSpace s;
  s.dropouts = {0.0, 0.1, 0.3, 0.5};
  s.filter_heights = {{1, 3, 5}, {2, 4, 6}, {3, 5, 7}, {4, 6, 8}, {5, 7, 9}};
  s.feature_maps = {100, 200, 400, 600};
  s.hidden_sizes = {25, 50, 75, 100};
  s.budget = 0;  // half of 320
  return s;
}

SearchSpace SearchSpace::reduced() {
  SearchSpace s;
  s.dropouts = {0.0, 0.1};
  s.filter_heights = {{1, 2, 3}};
  s.feature_maps = {4, 8};
  s.hidden_sizes = {4, 8};
  s.budget = 0;  // half of 8
  return s;
}

SearchSpace SearchSpace::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open search space: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": invalid JSON: " + e.what());
  }
  SearchSpace s;
  try {
    s.dropouts = j.at("dropouts").get<std::vector<double>>();
    for (const auto& triple : j.at("filter_heights")) {
      auto v = triple.get<std::vector<int>>();
      if (v.size() != 3)
        throw FormatError(path.string() + ": each filter_heights entry needs 3 values");
      s.filter_heights.push_back({v[0], v[1], v[2]});
    }
    s.feature_maps = j.at("feature_maps").get<std::vector<int>>();
    s.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
    s.budget = j.value("budget", std::size_t{0});
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  s.validate();
  return s;
}

namespace {

HyperConfig config_at(const SearchSpace& space, const HyperConfig& base, std::size_t index) {
  const std::size_t nz = space.hidden_sizes.size();
  const std::size_t nm = space.feature_maps.size();
  const std::size_t nh = space.filter_heights.size();
  HyperConfig cfg = base;
  cfg.hidden_size = space.hidden_sizes[index % nz];
  index /= nz;
  cfg.feature_maps = space.feature_maps[index % nm];
  index /= nm;
  cfg.filter_heights = space.filter_heights[index % nh];
  index /= nh;
  cfg.dropout = space.dropouts[index];
  if (base.variant != Variant::cue) cfg.hidden_size = 0;
  return cfg;
}

// Ties prefer the cheaper model, then enumeration order.
bool trial_beats(const TrialOutcome& a, const TrialOutcome& b) {
  if (a.tune_accuracy != b.tune_accuracy) return a.tune_accuracy > b.tune_accuracy;
  if (a.config.feature_maps != b.config.feature_maps)
    return a.config.feature_maps < b.config.feature_maps;
  if (a.config.hidden_size != b.config.hidden_size)
    return a.config.hidden_size < b.config.hidden_size;
  if (a.config.dropout != b.config.dropout) return a.config.dropout < b.config.dropout;
  if (a.config.filter_heights != b.config.filter_heights)
    return a.config.filter_heights < b.config.filter_heights;
  return a.space_index < b.space_index;
}

}  // namespace

SearchReport random_search_core(
    const SearchSpace& space, const HyperConfig& base, std::uint64_t seed,
    const std::function<double(const HyperConfig&, std::uint64_t)>& run_trial) {
  SearchSpace active = space;
  if (base.variant != Variant::cue) {
    // The hidden axis does not exist for these variants.
    active.hidden_sizes = {0};
    active.budget = std::min(space.budget, active.size());
  }
  active.validate();

  std::vector<std::size_t> indices(active.size());
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "search"));
  rng.shuffle(indices);
  indices.resize(active.effective_budget());

  SearchReport report;
  report.trials.reserve(indices.size());
  for (std::size_t index : indices) {
    TrialOutcome trial;
    trial.config = config_at(active, base, index);
    trial.config.validate();
    trial.space_index = index;
    trial.tune_accuracy =
        run_trial(trial.config, derive_seed(seed, "trial" + std::to_string(index)));
    report.trials.push_back(std::move(trial));
  }
  report.best_trial = 0;
  for (std::size_t i = 1; i < report.trials.size(); ++i)
    if (trial_beats(report.trials[i], report.trials[report.best_trial])) report.best_trial = i;
  return report;
}

SearchOutcome random_search(const NeuralProtocol& protocol,
                            std::span<const LabeledExample> train,
                            std::span<const LabeledExample> tune, const Vocabulary& vocab,
                            std::span<const std::string> users, std::uint64_t seed) {
  if (tune.empty()) throw std::invalid_argument("random_search: empty tune split");
  auto run_trial = [&](const HyperConfig& config, std::uint64_t trial_seed) {
    ModelParams init = init_params(config, vocab, users, derive_seed(trial_seed, "init"),
                                   protocol.pretrained_words, protocol.pretrained_users);
    TrainResult fit =
        train_model(train, tune, init, protocol.optimizer, derive_seed(trial_seed, "train"));
    return fit.report.tune_accuracy;
  };
  SearchReport report = random_search_core(protocol.space, protocol.base, seed, run_trial);
  return {report.trials[report.best_trial].config, std::move(report)};
}

FoldRunner neural_runner(const NeuralProtocol& protocol, const Vocabulary& vocab,
                         std::span<const std::string> users) {
  return [&protocol, &vocab, users](const FoldContext& ctx) -> FoldResult {
    SearchOutcome search = random_search(protocol, ctx.train, ctx.tune, vocab, users,
                                         derive_seed(ctx.seed, "search"));

    std::vector<LabeledExample> merged;
    merged.reserve(ctx.train.size() + ctx.tune.size());
    merged.insert(merged.end(), ctx.train.begin(), ctx.train.end());
    merged.insert(merged.end(), ctx.tune.begin(), ctx.tune.end());
    ModelParams init =
        init_params(search.best, vocab, users, derive_seed(ctx.seed, "retrain/init"),
                    protocol.pretrained_words, protocol.pretrained_users);
    TrainResult fit =
        train_model(merged, {}, init, protocol.optimizer, derive_seed(ctx.seed, "retrain"));

    auto params = std::make_shared<ModelParams>(std::move(fit.params));
    FoldResult result;
    result.predictor = [params](const LabeledExample& ex) {
      return forward(ex.token_ids, ex.user_row, *params).argmax();
    };
    result.chosen_config = search.best.to_json();
    result.tune_accuracy = search.report.trials[search.report.best_trial].tune_accuracy;
    return result;
  };
}

CVReport cross_validate(const Corpus& corpus, const Vocabulary& vocab,
                        std::span<const std::string> users, std::size_t k,
                        std::uint64_t master_seed, const std::string& model_name,
                        const FoldRunner& runner, int jobs) {
  const std::vector<LabeledExample> examples = make_examples(corpus, vocab, users);
  const FoldSplit split = make_folds(corpus, k, master_seed);

  CVReport report;
  report.model = model_name;
  report.master_seed = master_seed;
  report.fold_accuracy.assign(k, 0);
  report.fold_tune_accuracy.assign(k, -1);
  report.chosen_config.assign(k, {});
  std::vector<std::size_t> touches(k, 0);

  auto gather = [&examples](std::span<const std::size_t> indices) {
    std::vector<LabeledExample> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(examples[i]);
    return out;
  };

  parallel_for(k, jobs, [&](std::size_t s) {
    const FoldSplit::Roles roles = split.roles(s);
    const std::vector<LabeledExample> train = gather(roles.train);
    const std::vector<LabeledExample> tune = gather(roles.tune);
    const std::vector<LabeledExample> test = gather(roles.test);

    FoldContext ctx;
    ctx.fold = s;
    ctx.seed = derive_seed(master_seed, "fold" + std::to_string(s));
    ctx.train = train;
    ctx.tune = tune;
    FoldResult fold = runner(ctx);

    // The single test-fold touch of the protocol.
    report.fold_accuracy[s] = evaluate(fold.predictor, test);
    touches[s] += 1;
    report.fold_tune_accuracy[s] = fold.tune_accuracy;
    report.chosen_config[s] = std::move(fold.chosen_config);
  });

  report.test_evaluations = std::accumulate(touches.begin(), touches.end(), std::size_t{0});
  report.mean = std::accumulate(report.fold_accuracy.begin(), report.fold_accuracy.end(), 0.0) /
                static_cast<double>(k);
  double sq = 0;
  for (double a : report.fold_accuracy) sq += (a - report.mean) * (a - report.mean);
  report.variance = sq / static_cast<double>(k);
  return report;
}

std::string CVReport::to_json() const {
  json j;
  j["model"] = model;
  j["master_seed"] = std::to_string(master_seed);
  j["mean_accuracy"] = mean;
  j["variance"] = variance;
  j["test_evaluations"] = test_evaluations;
  // One fixed early-stop reserve per (fold, configuration) pair.
  j["early_stop_split"] = "per fold and configuration";
  json folds = json::array();
  for (std::size_t s = 0; s < fold_accuracy.size(); ++s) {
    json f;
    f["fold"] = s;
    f["accuracy"] = fold_accuracy[s];
    if (s < fold_tune_accuracy.size() && fold_tune_accuracy[s] >= 0)
      f["tune_accuracy"] = fold_tune_accuracy[s];
    if (s < chosen_config.size() && !chosen_config[s].empty()) {
      try {
        f["config"] = json::parse(chosen_config[s]);
      } catch (const json::exception&) {
        f["config"] = chosen_config[s];
      }
    }
    folds.push_back(std::move(f));
  }
  j["folds"] = std::move(folds);
  return j.dump(2);
}

std::string cv_summary_text(std::span<const CVReport> reports) {
  std::string out = "model                     mean accuracy      variance\n";
  char line[128];
  for (const CVReport& r : reports) {
    std::snprintf(line, sizeof(line), "%-24s %14.4f %13.6f\n", r.model.c_str(), r.mean,
                  r.variance);
    out += line;
  }
  return out;
}

Vector unigram_features(std::span<const int> ids, std::size_t vocab_size) {
  Vector v(vocab_size, 0);
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size)
      throw std::invalid_argument("unigram_features: token id out of range");
    v[static_cast<std::size_t>(id)] = 1;
  }
  return v;
}

Vector unigram_features(std::span<const std::string> tokens, const Vocabulary& vocab) {
  return unigram_features(vocab.to_ids(tokens), vocab.size());
}

Vector nbow_features(std::span<const int> ids, const Matrix& embeddings) {
  Vector v(embeddings.cols(), 0);
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= embeddings.rows())
      throw std::invalid_argument("nbow_features: token id out of range");
    const Real* row = embeddings.row(static_cast<std::size_t>(id));
    for (std::size_t c = 0; c < v.size(); ++c) v[c] += row[c];
  }
  return v;
}

Vector nbow_features(std::span<const std::string> tokens, const Vocabulary& vocab,
                     const Matrix& embeddings) {
  return nbow_features(vocab.to_ids(tokens), embeddings);
}

Real LogisticModel::score(std::span<const Real> features) const {
  if (features.size() != weights.size())
    throw std::invalid_argument("logistic model: feature length mismatch");
  Real z = bias;
  for (std::size_t i = 0; i < weights.size(); ++i) z += weights[i] * features[i];
  return z;
}

int LogisticModel::predict(std::span<const Real> features) const {
  return score(features) > 0 ? 1 : 0;
}

namespace {

double logistic_objective(const LogisticDataset& data, const Vector& w, Real b, double c,
                          Vector* grad_w, Real* grad_b) {
  const std::size_t n = data.features.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  if (grad_w) {
    std::fill(grad_w->begin(), grad_w->end(), Real(0));
    *grad_b = 0;
  }
  double loss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vector& x = data.features[i];
    double z = b;
    for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * x[j];
    const double y = data.labels[i] ? 1.0 : -1.0;
    const double t = -y * z;
    loss += t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
    if (grad_w) {
      const double sig = t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
      const double coeff = -y * sig * inv_n;
      for (std::size_t j = 0; j < w.size(); ++j) (*grad_w)[j] += static_cast<Real>(coeff * x[j]);
      *grad_b += static_cast<Real>(coeff);
    }
  }
  loss *= inv_n;
  double w_sq = 0;
  for (Real wj : w) w_sq += static_cast<double>(wj) * static_cast<double>(wj);
  loss += w_sq / (2.0 * c * static_cast<double>(n));
  if (grad_w) {
    const double reg = 1.0 / (c * static_cast<double>(n));
    for (std::size_t j = 0; j < w.size(); ++j) (*grad_w)[j] += static_cast<Real>(reg * w[j]);
  }
  return loss;
}

double logistic_accuracy(const LogisticModel& model, const LogisticDataset& data) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.features.size(); ++i)
    correct += model.predict(data.features[i]) == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(data.features.size());
}

}  // namespace

LogisticModel fit_logistic(const LogisticDataset& train, double c, int max_iterations) {
  const std::size_t n = train.features.size();
  if (n == 0) throw std::invalid_argument("fit_logistic: empty training data");
  if (train.labels.size() != n)
    throw std::invalid_argument("fit_logistic: feature/label count mismatch");
  if (!(c > 0)) throw std::invalid_argument("fit_logistic: c must be positive");
  const std::size_t dim = train.features[0].size();
  for (const Vector& x : train.features)
    if (x.size() != dim) throw std::invalid_argument("fit_logistic: ragged feature vectors");
  bool has0 = false, has1 = false;
  for (int y : train.labels) (y ? has1 : has0) = true;
  if (!has0 || !has1)
    throw std::invalid_argument("fit_logistic: training data holds a single class");

  Vector w(dim, 0);
  Real b = 0;
  Vector grad_w(dim, 0);
  Real grad_b = 0;
  double loss = logistic_objective(train, w, b, c, &grad_w, &grad_b);
  auto grad_norm = [&] {
    double sq = static_cast<double>(grad_b) * static_cast<double>(grad_b);
    for (Real g : grad_w) sq += static_cast<double>(g) * static_cast<double>(g);
    return std::sqrt(sq);
  };
  double gnorm = grad_norm();
  int iter = 0;
  Vector w_next(dim);
  while (gnorm >= 1e-6 && iter < max_iterations) {
    // Backtracking line search along the negative gradient.
    const double sufficient = 0.5 * gnorm * gnorm;
    double step = 1.0;
    bool accepted = false;
    Real b_next = 0;
    for (int halvings = 0; halvings < 60; ++halvings) {
      for (std::size_t j = 0; j < dim; ++j)
        w_next[j] = w[j] - static_cast<Real>(step) * grad_w[j];
      b_next = b - static_cast<Real>(step) * grad_b;
      const double next_loss = logistic_objective(train, w_next, b_next, c, nullptr, nullptr);
      if (next_loss <= loss - step * sufficient) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no measurable descent left
    w = w_next;
    b = b_next;
    ++iter;
    loss = logistic_objective(train, w, b, c, &grad_w, &grad_b);
    gnorm = grad_norm();
  }

  LogisticModel model;
  model.weights = std::move(w);
  model.bias = b;
  model.c = c;
  model.final_loss = loss;
  model.gradient_norm = gnorm;
  model.iterations = iter;
  return model;
}

LogisticModel train_logistic(const LogisticDataset& train, const LogisticDataset& tune,
                             std::span<const double> c_grid) {
  if (c_grid.empty()) throw std::invalid_argument("train_logistic: empty regularization grid");
  if (tune.features.empty()) throw std::invalid_argument("train_logistic: empty tune split");
  if (tune.features.size() != tune.labels.size())
    throw std::invalid_argument("train_logistic: tune feature/label count mismatch");

  double best_c = 0, best_accuracy = -1;
  for (double c : c_grid) {
    const LogisticModel model = fit_logistic(train, c);
    const double accuracy = logistic_accuracy(model, tune);
    if (accuracy > best_accuracy || (accuracy == best_accuracy && c < best_c)) {
      best_accuracy = accuracy;
      best_c = c;
    }
  }

  LogisticDataset merged;
  merged.features.reserve(train.features.size() + tune.features.size());
  merged.labels.reserve(train.labels.size() + tune.labels.size());
  merged.features.insert(merged.features.end(), train.features.begin(), train.features.end());
  merged.features.insert(merged.features.end(), tune.features.begin(), tune.features.end());
  merged.labels.insert(merged.labels.end(), train.labels.begin(), train.labels.end());
  merged.labels.insert(merged.labels.end(), tune.labels.begin(), tune.labels.end());

  LogisticModel model = fit_logistic(merged, best_c);
  model.tune_accuracy = best_accuracy;
  return model;
}

FoldRunner logistic_runner(Featurizer featurize, std::vector<double> c_grid) {
  return [featurize = std::move(featurize), c_grid = std::move(c_grid)](
             const FoldContext& ctx) -> FoldResult {
    auto build = [&](std::span<const LabeledExample> examples) {
      LogisticDataset data;
      data.features.reserve(examples.size());
      data.labels.reserve(examples.size());
      for (const LabeledExample& ex : examples) {
        data.features.push_back(featurize(ex));
        data.labels.push_back(ex.label);
      }
      return data;
    };
    const LogisticDataset train = build(ctx.train);
    const LogisticDataset tune = build(ctx.tune);
    auto model = std::make_shared<LogisticModel>(train_logistic(train, tune, c_grid));

    FoldResult result;
    result.predictor = [model, featurize](const LabeledExample& ex) {
      return model->predict(featurize(ex));
    };
    result.tune_accuracy = model->tune_accuracy;
    json config;
    config["c"] = model->c;
    result.chosen_config = config.dump();
    return result;
  };
}

int PairedComparison::wins_a() const {
  int n = 0;
  for (const PairedRow& r : rows) n += r.a > r.b;
  return n;
}

int PairedComparison::wins_b() const {
  int n = 0;
  for (const PairedRow& r : rows) n += r.b > r.a;
  return n;
}

int PairedComparison::ties() const {
  int n = 0;
  for (const PairedRow& r : rows) n += r.a == r.b;
  return n;
}

std::string PairedComparison::to_text() const {
  std::string out = metric + ": " + label_a + " vs " + label_b + "\n";
  char line[160];
  std::snprintf(line, sizeof(line), "%-20s %14s %14s\n", "seed", label_a.c_str(),
                label_b.c_str());
  out += line;
  for (const PairedRow& r : rows) {
    std::snprintf(line, sizeof(line), "%-20llu %14.4f %14.4f\n",
                  static_cast<unsigned long long>(r.seed), r.a, r.b);
    out += line;
  }
  std::snprintf(line, sizeof(line), "%s wins %d, %s wins %d, ties %d\n", label_a.c_str(),
                wins_a(), label_b.c_str(), wins_b(), ties());
  out += line;
  if (!note.empty()) out += note + "\n";
  return out;
}

std::string PairedComparison::to_json() const {
  json j;
  j["metric"] = metric;
  j["label_a"] = label_a;
  j["label_b"] = label_b;
  if (!note.empty()) j["note"] = note;
  json rows_json = json::array();
  for (const PairedRow& r : rows) {
    json row;
    row["seed"] = std::to_string(r.seed);
    row["a"] = r.a;
    row["b"] = r.b;
    rows_json.push_back(std::move(row));
  }
  j["rows"] = std::move(rows_json);
  j["wins_a"] = wins_a();
  j["wins_b"] = wins_b();
  j["ties"] = ties();
  return j.dump(2);
}

PairedComparison paired_comparison(
    std::string metric, std::string label_a, std::string label_b,
    std::span<const std::uint64_t> seeds,
    const std::function<std::array<double, 2>(std::uint64_t)>& run) {
  PairedComparison cmp;
  cmp.metric = std::move(metric);
  cmp.label_a = std::move(label_a);
  cmp.label_b = std::move(label_b);
  cmp.rows.reserve(seeds.size());
  for (std::uint64_t seed : seeds) {
    const std::array<double, 2> result = run(seed);
    cmp.rows.push_back({seed, result[0], result[1]});
  }
  return cmp;
}

}  // namespace sarcasm

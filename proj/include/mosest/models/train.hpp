#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "mosest/core/format.hpp"
#include "mosest/models/model.hpp"
#include "mosest/nn/loss.hpp"

namespace mosest::models {

struct LabeledUtterance {
  std::string id;
  const features::FeatureMatrix* features = nullptr;
  double label = 0.0;
};

struct TrainingHistory {
  std::uint64_t seed = 0;
  std::vector<double> train_loss;
  std::vector<double> val_mse;
  std::size_t best_epoch = 0;  ///< 1-based; 0 when no epoch ran
};

struct AdamSnapshot {
  std::uint64_t steps = 0;
  std::vector<Tensor> m, v;
};

struct Checkpoint {
  MosModel model;
  TrainingHistory history;
  AdamSnapshot adam;
};

namespace detail {

/// Training samples addressed as (utterance, row) without copying mel rows.
class SampleTable {
 public:
  SampleTable(const ModelSpec& spec, std::span<const LabeledUtterance> set) : spec_(spec), width_(nn::shape_size(spec.input_shape())) {
    for (const auto& u : set) {
      if (!u.features) throw InvalidArgument("training record " + u.id + " has no features");
      if (spec.kind == ModelKind::kCqtCnn) {
        owned_.push_back(samples_of(spec, *u.features).front());
        mats_.push_back(nullptr);
        counts_.push_back(1);
      } else {
        samples_of_check(*u.features);
        owned_.emplace_back();
        mats_.push_back(u.features);
        counts_.push_back(u.features->rows);
      }
      if (counts_.back() == 0) throw NoSpeech("training utterance " + u.id + " has no speech-active windows");
    }
  }

  std::size_t utterances() const noexcept { return counts_.size(); }
  std::size_t count(std::size_t u) const { return counts_[u]; }
  std::size_t width() const noexcept { return width_; }

  const double* sample(std::size_t u, std::size_t r) const {
    return mats_[u] ? mats_[u]->values.data() + r * mats_[u]->cols : owned_[u].data();
  }

  Standardizer fit_standardizer() const {
    std::vector<double> sum(width_, 0.0), sq(width_, 0.0);
    double n = 0.0;
    for (std::size_t u = 0; u < utterances(); ++u)
      for (std::size_t r = 0; r < count(u); ++r) {
        const double* s = sample(u, r);
        for (std::size_t i = 0; i < width_; ++i) {
          sum[i] += s[i];
          sq[i] += s[i] * s[i];
        }
        n += 1.0;
      }
    Standardizer st{std::vector<double>(width_), std::vector<double>(width_)};
    for (std::size_t i = 0; i < width_; ++i) {
      st.mean[i] = sum[i] / n;
      const double var = std::max(0.0, sq[i] / n - st.mean[i] * st.mean[i]);
      st.inv_std[i] = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
    }
    return st;
  }

 private:
  void samples_of_check(const features::FeatureMatrix& f) const {
    if (f.kind != feature_kind(spec_.kind))
      throw KindMismatch(std::string("model ") + to_string(spec_.kind) + " expects " + to_string(feature_kind(spec_.kind)) +
                         " features, got " + to_string(f.kind));
    if (f.cols != width_) throw FormatError("feature width " + std::to_string(f.cols) + ", model expects " + std::to_string(width_));
  }

  const ModelSpec& spec_;
  std::size_t width_;
  std::vector<std::vector<double>> owned_;
  std::vector<const features::FeatureMatrix*> mats_;
  std::vector<std::size_t> counts_;
};

inline std::vector<std::vector<double>> snapshot(Net& net) {
  std::vector<std::vector<double>> out;
  for (auto* p : net.params()) out.push_back(p->value.data);
  return out;
}

inline void restore(Net& net, const std::vector<std::vector<double>>& values) {
  auto params = net.params();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value.data = values[i];
}

}  // namespace detail

/// Utterance-level MSE with the model's current weights (inference mode).
inline double utterance_mse(MosModel& model, std::span<const LabeledUtterance> set, Aggregation how) {
  double total = 0.0;
  for (const auto& u : set) {
    const double d = model.predict(u.id, *u.features, how == Aggregation::kElm ? Aggregation::kMean : how).mos - u.label;
    total += d * d;
  }
  return total / static_cast<double>(set.size());
}

/// Minibatch Adam on MSE with early stopping on validation MSE; the
/// returned model carries the best-validation weights.
inline Checkpoint train(const ModelSpec& spec, std::span<const LabeledUtterance> train_set,
                        std::span<const LabeledUtterance> val_set, std::uint64_t seed) {
  spec.validate();
  if (train_set.empty()) throw InvalidArgument("train: empty training set");
  Rng init_rng(derive_seed(seed, 1)), order_rng(derive_seed(seed, 2)), dropout_rng(derive_seed(seed, 3));
  Checkpoint ck{MosModel(spec, init_rng), {}, {}};
  auto& model = ck.model;
  auto& net = model.network();
  ck.history.seed = seed;
  log::info(std::string("model ") + to_string(spec.kind) + ": " + std::to_string(net.parameter_count()) + " parameters; " +
            net.describe());

  const detail::SampleTable table(spec, train_set);
  model.standardizer() = table.fit_standardizer();
  {
    // the linear output starts at the mean training label rather than 0
    double mean = 0.0;
    for (const auto& u : train_set) mean += u.label;
    auto* out_bias = net.params().back();
    if (out_bias->value.data.size() != 1) throw InvalidArgument("train: last parameter is not the output bias");
    out_bias->value.data[0] = mean / static_cast<double>(train_set.size());
  }
  nn::Adam<double> adam(net.params(), {.lr = spec.learning_rate});

  const std::size_t width = table.width();
  const auto in_shape = spec.input_shape();
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  auto best_params = detail::snapshot(net);
  std::vector<std::pair<std::size_t, std::size_t>> order;
  std::vector<std::size_t> rows;

  for (std::size_t epoch = 1; epoch <= spec.max_epochs; ++epoch) {
    order.clear();
    for (std::size_t u = 0; u < table.utterances(); ++u) {
      rows.resize(table.count(u));
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      std::size_t take = rows.size();
      if (spec.windows_per_utterance > 0 && rows.size() > spec.windows_per_utterance) {
        take = spec.windows_per_utterance;
        for (std::size_t i = 0; i < take; ++i)
          std::swap(rows[i], rows[i + static_cast<std::size_t>(order_rng.uniform_index(rows.size() - i))]);
      }
      for (std::size_t i = 0; i < take; ++i) order.emplace_back(u, rows[i]);
    }
    shuffle(std::span(order), order_rng);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += spec.batch_size) {
      const std::size_t n = std::min(spec.batch_size, order.size() - lo);
      nn::Shape shape{n};
      shape.insert(shape.end(), in_shape.begin(), in_shape.end());
      Tensor x(shape), y({n, 1});
      for (std::size_t i = 0; i < n; ++i) {
        const auto [u, r] = order[lo + i];
        const double* s = table.sample(u, r);
        std::span<double> dst(x.ptr() + i * width, width);
        std::copy(s, s + width, dst.begin());
        model.standardizer().apply(dst);
        y[i] = train_set[u].label;
      }
      net.zero_grad();
      const auto pred = net.forward(std::move(x), {true, &dropout_rng});
      const auto loss = nn::mse_loss(pred, y);
      if (!std::isfinite(loss.loss))
        throw TrainingDiverged("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(batches + 1));
      net.backward(loss.grad);
      adam.step();
      loss_sum += loss.loss;
      ++batches;
    }
    ck.history.train_loss.push_back(loss_sum / static_cast<double>(batches));
    const double score = val_set.empty() ? ck.history.train_loss.back() : utterance_mse(model, val_set, Aggregation::kMean);
    if (!std::isfinite(score)) throw TrainingDiverged("training diverged: non-finite validation MSE at epoch " + std::to_string(epoch));
    ck.history.val_mse.push_back(score);
    log::debug("epoch " + std::to_string(epoch) + " train " + fixed(ck.history.train_loss.back(), 5) + " val " + fixed(score, 5));
    if (score < best) {
      best = score;
      since_best = 0;
      ck.history.best_epoch = epoch;
      best_params = detail::snapshot(net);
    } else if (++since_best >= spec.patience) {
      break;
    }
  }
  detail::restore(net, best_params);
  ck.adam = {adam.steps(), adam.first_moments(), adam.second_moments()};
  log::info(std::string("trained ") + to_string(spec.kind) + " for " + std::to_string(ck.history.val_mse.size()) +
            " epochs; best epoch " + std::to_string(ck.history.best_epoch) + " (mse " + fixed(best, 4) + ")");
  return ck;
}

/// Candidate ridge values searched on the validation split; the first entry
/// is the configured value.
inline std::vector<double> elm_lambda_grid(double configured) {
  std::vector<double> g{configured};
  for (double v : {1e-6, 1e-4, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1e3, 1e4})
    if (v != configured) g.push_back(v);
  return g;
}

/// Fits the ELM aggregator on window-score statistics of the training split.
/// With a validation split the ridge is chosen from elm_lambda_grid().
inline void fit_elm_head(MosModel& model, std::span<const LabeledUtterance> train_set,
                         std::span<const LabeledUtterance> val_set, std::uint64_t seed) {
  if (model.spec().kind != ModelKind::kMelDnn) throw ConfigError("the ELM head applies to mel_dnn only");
  if (train_set.size() < 2) throw InvalidArgument("fit_elm_head: need at least 2 training utterances");
  auto stat_matrix = [&](std::span<const LabeledUtterance> set) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(set.size()), static_cast<Eigen::Index>(kElmStatCount));
    Eigen::VectorXd y(static_cast<Eigen::Index>(set.size()));
    for (std::size_t i = 0; i < set.size(); ++i) {
      const auto st = window_statistics(model.window_scores(*set[i].features));
      for (std::size_t j = 0; j < kElmStatCount; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = st[j];
      y(static_cast<Eigen::Index>(i)) = set[i].label - st[0];
    }
    return std::pair{x, y};
  };
  auto [xt, yt] = stat_matrix(train_set);
  Standardizer norm{std::vector<double>(kElmStatCount), std::vector<double>(kElmStatCount)};
  for (Eigen::Index j = 0; j < xt.cols(); ++j) {
    const double mean = xt.col(j).mean();
    const double var = (xt.col(j).array() - mean).square().mean();
    norm.mean[static_cast<std::size_t>(j)] = mean;
    norm.inv_std[static_cast<std::size_t>(j)] = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
  }
  auto standardize = [&](Eigen::MatrixXd& x) {
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        x(i, j) = (x(i, j) - norm.mean[static_cast<std::size_t>(j)]) * norm.inv_std[static_cast<std::size_t>(j)];
  };
  standardize(xt);
  Rng rng(derive_seed(seed, 4));
  ElmHead head{nn::make_elm(static_cast<Eigen::Index>(kElmStatCount), static_cast<Eigen::Index>(model.spec().elm_hidden), rng,
                            model.spec().elm_lambda),
               norm};
  const Eigen::MatrixXd ht = nn::elm_hidden(head.elm, xt);
  if (val_set.empty()) {
    head.elm.beta = nn::elm_fit(ht, yt, head.elm.lambda);
  } else {
    auto [xv, yv] = stat_matrix(val_set);
    standardize(xv);
    const Eigen::MatrixXd hv = nn::elm_hidden(head.elm, xv);
    double best = std::numeric_limits<double>::infinity();
    for (double lambda : elm_lambda_grid(model.spec().elm_lambda)) {
      Eigen::VectorXd beta;
      try {
        beta = nn::elm_fit(ht, yt, lambda);
      } catch (const SingularSystem&) {
        continue;
      }
      const double mse = (hv * beta - yv).squaredNorm() / static_cast<double>(yv.size());
      if (mse < best) {
        best = mse;
        head.elm.beta = beta;
        head.elm.lambda = lambda;
      }
    }
    if (!std::isfinite(best)) throw SingularSystem("fit_elm_head: no ridge value gave a solvable system");
    log::info("ELM head: ridge " + fixed(head.elm.lambda, 6) + " (validation mse " + fixed(best, 4) + ")");
  }
  model.spec().elm_lambda = head.elm.lambda;
  model.elm_head() = std::move(head);
}

}  // namespace mosest::models

#pragma once

#include <filesystem>
#include <map>
#include <sstream>

#include "mosest/io/container.hpp"
#include "mosest/models/train.hpp"

namespace mosest::models {

namespace detail {

inline std::vector<std::uint64_t> dims(const nn::Shape& s) { return {s.begin(), s.end()}; }

inline nn::Shape shape_of(const io::NamedTensor& t) { return {t.shape.begin(), t.shape.end()}; }

inline void add_vector(io::Container& c, const std::string& name, const std::vector<double>& v) {
  c.add(name, {v.size()}, v);
}

inline std::vector<double> matrix_values(const Eigen::MatrixXd& m) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
  return v;
}

inline Eigen::MatrixXd to_matrix(const io::NamedTensor& t) {
  if (t.shape.size() != 2) throw FormatError("tensor '" + t.name + "' must be rank 2");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.shape[0]), static_cast<Eigen::Index>(t.shape[1]));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t.values[static_cast<std::size_t>(r * m.cols() + c)];
  return m;
}

inline Eigen::VectorXd to_vector(const io::NamedTensor& t) {
  return Eigen::Map<const Eigen::VectorXd>(t.values.data(), static_cast<Eigen::Index>(t.values.size()));
}

}  // namespace detail

/// Metadata holds the spec text, then training facts after a "--" line.
inline io::Container to_container(Checkpoint& ck) {
  io::Container c;
  c.kind = io::ContentKind::kCheckpoint;
  std::ostringstream meta;
  meta << format_spec(ck.model.spec()) << "--\n"
       << "seed=" << ck.history.seed << '\n'
       << "epochs=" << ck.history.val_mse.size() << '\n'
       << "best_epoch=" << ck.history.best_epoch << '\n'
       << "elm=" << (ck.model.elm_head() ? 1 : 0) << '\n';
  c.metadata = meta.str();
  auto params = ck.model.network().params();
  for (std::size_t i = 0; i < params.size(); ++i)
    c.add("param." + std::to_string(i) + "." + params[i]->name, detail::dims(params[i]->value.shape), params[i]->value.data);
  detail::add_vector(c, "norm.mean", ck.model.standardizer().mean);
  detail::add_vector(c, "norm.inv_std", ck.model.standardizer().inv_std);
  detail::add_vector(c, "history.train_loss", ck.history.train_loss);
  detail::add_vector(c, "history.val_mse", ck.history.val_mse);
  c.add("adam.steps", {1}, {static_cast<double>(ck.adam.steps)});
  for (std::size_t i = 0; i < ck.adam.m.size(); ++i) {
    c.add("adam.m." + std::to_string(i), detail::dims(ck.adam.m[i].shape), ck.adam.m[i].data);
    c.add("adam.v." + std::to_string(i), detail::dims(ck.adam.v[i].shape), ck.adam.v[i].data);
  }
  if (const auto& head = ck.model.elm_head()) {
    const auto& e = head->elm;
    c.add("elm.input_weights", {static_cast<std::uint64_t>(e.input_weights.rows()), static_cast<std::uint64_t>(e.input_weights.cols())},
          detail::matrix_values(e.input_weights));
    detail::add_vector(c, "elm.input_bias", {e.input_bias.data(), e.input_bias.data() + e.input_bias.size()});
    detail::add_vector(c, "elm.beta", {e.beta.data(), e.beta.data() + e.beta.size()});
    detail::add_vector(c, "elm.norm.mean", head->stats_norm.mean);
    detail::add_vector(c, "elm.norm.inv_std", head->stats_norm.inv_std);
  }
  return c;
}

inline Checkpoint from_container(const io::Container& c) {
  if (c.kind != io::ContentKind::kCheckpoint) throw KindMismatch("container does not hold a model checkpoint");
  const auto split = c.metadata.find("--\n");
  if (split == std::string::npos) throw FormatError("checkpoint metadata is malformed");
  const ModelSpec spec = parse_spec(c.metadata.substr(0, split));
  std::map<std::string, std::string> facts;
  {
    std::istringstream in(c.metadata.substr(split + 3));
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) facts[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  Rng dummy(0);
  Checkpoint ck{MosModel(spec, dummy), {}, {}};
  auto params = ck.model.network().params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = c.at("param." + std::to_string(i) + "." + params[i]->name);
    if (detail::shape_of(t) != params[i]->value.shape)
      throw FormatError("checkpoint tensor '" + t.name + "' has shape " + nn::shape_string(detail::shape_of(t)) + ", expected " +
                        nn::shape_string(params[i]->value.shape));
    params[i]->value.data = t.values;
  }
  ck.model.standardizer() = {c.at("norm.mean").values, c.at("norm.inv_std").values};
  if (!ck.model.standardizer().empty() && ck.model.standardizer().mean.size() != nn::shape_size(spec.input_shape()))
    throw FormatError("checkpoint standardizer width mismatch");
  ck.history.train_loss = c.at("history.train_loss").values;
  ck.history.val_mse = c.at("history.val_mse").values;
  try {
    ck.history.seed = std::stoull(facts.at("seed"));
    ck.history.best_epoch = std::stoull(facts.at("best_epoch"));
  } catch (const std::exception&) {
    throw FormatError("checkpoint metadata lacks training facts");
  }
  ck.adam.steps = static_cast<std::uint64_t>(c.at("adam.steps").values.at(0));
  for (std::size_t i = 0; c.find("adam.m." + std::to_string(i)); ++i) {
    const auto& m = c.at("adam.m." + std::to_string(i));
    const auto& v = c.at("adam.v." + std::to_string(i));
    ck.adam.m.emplace_back(detail::shape_of(m), m.values);
    ck.adam.v.emplace_back(detail::shape_of(v), v.values);
  }
  if (facts["elm"] == "1") {
    ElmHead head;
    head.elm.input_weights = detail::to_matrix(c.at("elm.input_weights"));
    head.elm.input_bias = detail::to_vector(c.at("elm.input_bias"));
    head.elm.beta = detail::to_vector(c.at("elm.beta"));
    head.elm.lambda = spec.elm_lambda;
    head.stats_norm = {c.at("elm.norm.mean").values, c.at("elm.norm.inv_std").values};
    if (head.elm.beta.size() != head.elm.hidden() || head.elm.inputs() != static_cast<Eigen::Index>(kElmStatCount))
      throw FormatError("checkpoint ELM head has inconsistent shapes");
    ck.model.elm_head() = std::move(head);
  }
  return ck;
}

inline void save_checkpoint(Checkpoint& ck, const std::filesystem::path& path) { io::save(to_container(ck), path); }

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return from_container(io::load(path, io::ContentKind::kCheckpoint));
}

}  // namespace mosest::models

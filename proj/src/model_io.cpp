#include "rmtfeat/model_io.hpp"

#include <fmt/format.h>

#include "rmtfeat/error.hpp"

namespace rmtfeat {

using nlohmann::json;

namespace {

json tree_to_json(const TreeModel& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) {
    nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left},
                     {"right", n.right}, {"label", n.label}});
  }
  return nodes;
}

TreeModel tree_from_json(const json& j) {
  TreeModel t;
  for (const auto& n : j) {
    t.nodes.push_back({n.at("feature").get<int>(), n.at("threshold").get<double>(), n.at("left").get<int>(),
                       n.at("right").get<int>(), n.at("label").get<std::string>()});
  }
  const int count = static_cast<int>(t.nodes.size());
  if (count == 0) throw Error("tree has no nodes");
  for (const auto& n : t.nodes) {
    if (n.feature >= 0 && (n.left <= 0 || n.left >= count || n.right <= 0 || n.right >= count)) {
      throw Error("tree node has an out-of-range child");
    }
  }
  return t;
}

json parameters(const TrainedModel& model) {
  return std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SvmModel>) {
          json machines = json::array();
          for (const auto& b : m.machines) {
            machines.push_back({{"positive", b.positive}, {"negative", b.negative}, {"rho", b.rho},
                                {"coef", b.coef}, {"support", b.support}});
          }
          return {{"gamma", m.gamma}, {"classes", m.classes}, {"machines", machines}};
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          return {{"k", m.k}, {"rows", m.rows}, {"labels", m.labels}};
        } else if constexpr (std::is_same_v<T, GnbModel>) {
          return {{"classes", m.classes}, {"log_priors", m.log_priors}, {"means", m.means},
                  {"variances", m.variances}};
        } else if constexpr (std::is_same_v<T, TreeModel>) {
          return {{"nodes", tree_to_json(m)}};
        } else {
          json trees = json::array();
          for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
          return {{"tree_seeds", m.tree_seeds}, {"trees", trees}};
        }
      },
      model.impl());
}

}  // namespace

json model_to_json(const ModelDocument& doc) {
  json j;
  j["format"] = "rmtfeat-model";
  j["version"] = kModelFormatVersion;
  j["kind"] = model_kind_name(doc.model.kind());
  j["dim"] = doc.model.dim();
  j["features"] = doc.feature_names;
  if (doc.scaler) {
    j["scaler"] = {{"mean", doc.scaler->mean}, {"scale", doc.scaler->scale}};
  } else {
    j["scaler"] = nullptr;
  }
  j["parameters"] = parameters(doc.model);
  return j;
}

ModelDocument model_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "rmtfeat-model") throw Error("not an rmtfeat model document");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) throw Error(fmt::format("unsupported model version {}", version));
    const ModelKind kind = parse_model_kind(j.at("kind").get<std::string>());
    const auto dim = j.at("dim").get<std::size_t>();
    const json& p = j.at("parameters");
    TrainedModel::Impl impl;
    switch (kind) {
      case ModelKind::SvmRbf: {
        SvmModel m;
        m.gamma = p.at("gamma").get<double>();
        m.classes = p.at("classes").get<std::vector<std::string>>();
        for (const auto& b : p.at("machines")) {
          m.machines.push_back({b.at("positive").get<std::string>(), b.at("negative").get<std::string>(),
                                b.at("support").get<std::vector<std::vector<double>>>(),
                                b.at("coef").get<std::vector<double>>(), b.at("rho").get<double>()});
        }
        const std::size_t k = m.classes.size();
        if (m.machines.size() != k * (k - 1) / 2) throw Error("SVM model has the wrong number of machines");
        impl = std::move(m);
        break;
      }
      case ModelKind::Knn:
        impl = KnnModel{p.at("k").get<std::size_t>(), p.at("rows").get<std::vector<std::vector<double>>>(),
                        p.at("labels").get<std::vector<std::string>>()};
        break;
      case ModelKind::GaussianNb:
        impl = GnbModel{p.at("classes").get<std::vector<std::string>>(), p.at("log_priors").get<std::vector<double>>(),
                        p.at("means").get<std::vector<std::vector<double>>>(),
                        p.at("variances").get<std::vector<std::vector<double>>>()};
        break;
      case ModelKind::Tree:
        impl = tree_from_json(p.at("nodes"));
        break;
      case ModelKind::Forest: {
        ForestModel m;
        m.tree_seeds = p.at("tree_seeds").get<std::vector<std::uint64_t>>();
        for (const auto& t : p.at("trees")) m.trees.push_back(tree_from_json(t));
        impl = std::move(m);
        break;
      }
    }
    ModelDocument doc{TrainedModel(std::move(impl), dim), j.at("features").get<std::vector<std::string>>(),
                      std::nullopt};
    if (!j.at("scaler").is_null()) {
      doc.scaler = FeatureScaler{j["scaler"].at("mean").get<std::vector<double>>(),
                                 j["scaler"].at("scale").get<std::vector<double>>()};
    }
    return doc;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed model document: ") + e.what());
  }
}

}  // namespace rmtfeat

#include "gbda/model_registry.hpp"

#include <json.hpp>

#include <fstream>

namespace gbda {

using nlohmann::json;

namespace {

json matrix_to_json(const Matrix& m)
{
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            data.push_back(m(i, j));
        }
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from_json(const json& j)
{
    auto rows = j.at("rows").get<Eigen::Index>();
    auto cols = j.at("cols").get<Eigen::Index>();
    auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw ConfigError("checkpoint matrix has the wrong number of entries");
    }
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(i, c) = data[static_cast<std::size_t>(i * cols + c)];
        }
    }
    return m;
}

json params_to_json(const NamedParameters& params)
{
    json out = json::object();
    for (const auto& [name, var] : params) {
        out[name] = matrix_to_json(var.value());
    }
    return out;
}

std::pair<std::string, std::string> split_model_name(const std::string& name)
{
    auto colon = name.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == name.size()) {
        throw ConfigError("model reference '" + name + "' must look like plugin:entry");
    }
    return {name.substr(0, colon), name.substr(colon + 1)};
}

template <class Map>
auto lookup_entry(const Map& map, const std::string& entry, const char* role)
{
    auto it = map.find(entry);
    if (it == map.end()) {
        throw ConfigError(std::string("bundle has no ") + role + " named '" + entry + "'");
    }
    return it->second;
}

template <class Factories>
const auto& lookup_plugin(const Factories& factories, const std::string& plugin, const char* role)
{
    auto it = factories.find(plugin);
    if (it == factories.end()) {
        throw ConfigError(std::string("no ") + role + " plugin named '" + plugin + "'");
    }
    return it->second;
}

} // namespace

void ModelBundle::save(const std::string& path) const
{
    json doc;
    doc["format"] = "gbda-model-bundle";
    doc["version"] = kFormatVersion;
    doc["vocabulary"] = {{"tokens", vocab.tokens()}, {"special", vocab.special_ids()}};
    doc["labels"] = label_names;
    json models = json::object();
    for (const auto& [name, model] : classifiers) {
        const auto& s = model->shape();
        models[name] = {{"kind", "classifier"},
                        {"arch", to_string(s.arch)},
                        {"num_classes", s.num_classes},
                        {"dim", s.dim},
                        {"hidden", s.hidden},
                        {"max_len", s.max_len},
                        {"params", params_to_json(model->parameters())}};
    }
    for (const auto& [name, model] : lms) {
        const auto& s = model->shape();
        models[name] = {{"kind", "lm"},
                        {"dim", s.dim},
                        {"hidden", s.hidden},
                        {"max_len", s.max_len},
                        {"params", params_to_json(model->parameters())}};
    }
    doc["models"] = models;
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write model bundle '" + path + "'");
    }
    out << doc.dump() << '\n';
}

ModelBundle ModelBundle::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read model bundle '" + path + "'");
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("model bundle '" + path + "' is not valid JSON: " + e.what());
    }
    if (doc.value("format", "") != "gbda-model-bundle") {
        throw ConfigError("'" + path + "' is not a model bundle");
    }
    if (doc.value("version", 0) != kFormatVersion) {
        throw ConfigError("unsupported model bundle version in '" + path + "'");
    }
    ModelBundle bundle;
    const auto& v = doc.at("vocabulary");
    bundle.vocab = Vocabulary(v.at("tokens").get<std::vector<std::string>>(), v.at("special").get<std::set<TokenId>>());
    bundle.label_names = doc.value("labels", std::vector<std::string>{});
    Rng unused(0);
    for (const auto& [name, m] : doc.at("models").items()) {
        auto kind = m.at("kind").get<std::string>();
        if (kind == "classifier") {
            ClassifierShape shape;
            shape.arch = classifier_arch_from_string(m.at("arch").get<std::string>());
            shape.num_classes = m.at("num_classes").get<std::size_t>();
            shape.dim = m.at("dim").get<std::size_t>();
            shape.hidden = m.at("hidden").get<std::size_t>();
            shape.max_len = m.at("max_len").get<std::size_t>();
            auto model = std::make_shared<ReferenceClassifier>(bundle.vocab.size(), shape, unused);
            for (const auto& [param, value] : m.at("params").items()) {
                model->assign_parameter(param, matrix_from_json(value));
            }
            bundle.classifiers.emplace(name, std::move(model));
        } else if (kind == "lm") {
            LMShape shape;
            shape.dim = m.at("dim").get<std::size_t>();
            shape.hidden = m.at("hidden").get<std::size_t>();
            shape.max_len = m.at("max_len").get<std::size_t>();
            auto model = std::make_shared<ReferenceLM>(bundle.vocab.size(), shape, unused);
            for (const auto& [param, value] : m.at("params").items()) {
                model->assign_parameter(param, matrix_from_json(value));
            }
            bundle.lms.emplace(name, std::move(model));
        } else {
            throw ConfigError("unknown model kind '" + kind + "' in bundle");
        }
    }
    return bundle;
}

ModelRegistry ModelRegistry::with_builtins()
{
    ModelRegistry registry;
    registry.register_classifier("reference", [](const ModelBundle& b, const std::string& entry) {
        return std::shared_ptr<const Classifier>(lookup_entry(b.classifiers, entry, "classifier"));
    });
    registry.register_lm("reference", [](const ModelBundle& b, const std::string& entry) {
        return std::shared_ptr<const CausalLM>(lookup_entry(b.lms, entry, "language model"));
    });
    registry.register_embedder("reference-lm", [](const ModelBundle& b, const std::string& entry) {
        return std::shared_ptr<const ContextualEmbedder>(
            std::make_shared<LMEmbedder>(lookup_entry(b.lms, entry, "language model")));
    });
    registry.register_embedder("bag", [](const ModelBundle& b, const std::string& entry) {
        auto lm = lookup_entry(b.lms, entry, "language model");
        return std::shared_ptr<const ContextualEmbedder>(std::make_shared<BagEmbedder>(lm->embedding_table()));
    });
    return registry;
}

void ModelRegistry::register_classifier(const std::string& plugin, ClassifierFactory factory)
{
    classifiers_[plugin] = std::move(factory);
}

void ModelRegistry::register_lm(const std::string& plugin, LMFactory factory) { lms_[plugin] = std::move(factory); }

void ModelRegistry::register_embedder(const std::string& plugin, EmbedderFactory factory)
{
    embedders_[plugin] = std::move(factory);
}

std::shared_ptr<const Classifier> ModelRegistry::classifier(const std::string& name, const ModelBundle& bundle) const
{
    auto [plugin, entry] = split_model_name(name);
    return lookup_plugin(classifiers_, plugin, "classifier")(bundle, entry);
}

std::shared_ptr<const CausalLM> ModelRegistry::lm(const std::string& name, const ModelBundle& bundle) const
{
    auto [plugin, entry] = split_model_name(name);
    return lookup_plugin(lms_, plugin, "language model")(bundle, entry);
}

std::shared_ptr<const ContextualEmbedder> ModelRegistry::embedder(const std::string& name,
                                                                  const ModelBundle& bundle) const
{
    auto [plugin, entry] = split_model_name(name);
    return lookup_plugin(embedders_, plugin, "embedder")(bundle, entry);
}

} // namespace gbda

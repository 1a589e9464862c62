#pragma once

#include "gbda/reference_models.hpp"

#include <functional>
#include <map>
#include <memory>
#include <string>

namespace gbda {

/// Trained reference models plus their shared vocabulary. Serialized as a
/// self-describing JSON document carrying a format version.
struct ModelBundle {
    static constexpr int kFormatVersion = 1;

    Vocabulary vocab;
    std::vector<std::string> label_names;
    std::map<std::string, std::shared_ptr<ReferenceClassifier>> classifiers;
    std::map<std::string, std::shared_ptr<ReferenceLM>> lms;

    void save(const std::string& path) const;
    /// Throws ConfigError for unreadable files or unsupported versions.
    static ModelBundle load(const std::string& path);
};

/// Name-keyed factories for the three model roles. A model is referenced as
/// "plugin:entry", e.g. "reference:target" or "reference-lm:lm".
class ModelRegistry {
public:
    using ClassifierFactory =
        std::function<std::shared_ptr<const Classifier>(const ModelBundle&, const std::string& entry)>;
    using LMFactory = std::function<std::shared_ptr<const CausalLM>(const ModelBundle&, const std::string& entry)>;
    using EmbedderFactory =
        std::function<std::shared_ptr<const ContextualEmbedder>(const ModelBundle&, const std::string& entry)>;

    /// Registry with the built-in reference plugins.
    static ModelRegistry with_builtins();

    void register_classifier(const std::string& plugin, ClassifierFactory factory);
    void register_lm(const std::string& plugin, LMFactory factory);
    void register_embedder(const std::string& plugin, EmbedderFactory factory);

    std::shared_ptr<const Classifier> classifier(const std::string& name, const ModelBundle& bundle) const;
    std::shared_ptr<const CausalLM> lm(const std::string& name, const ModelBundle& bundle) const;
    std::shared_ptr<const ContextualEmbedder> embedder(const std::string& name, const ModelBundle& bundle) const;

private:
    std::map<std::string, ClassifierFactory> classifiers_;
    std::map<std::string, LMFactory> lms_;
    std::map<std::string, EmbedderFactory> embedders_;
};

} // namespace gbda

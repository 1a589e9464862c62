#pragma once

#include "gbda/reference_models.hpp"

#include <memory>
#include <vector>

namespace gbda {

/// Template-grammar sentences whose class is set by one class-indicative
/// keyword. Sentences start with a frozen [CLS] token.
struct SyntheticTaskOptions {
    std::size_t num_classes = 4;
    std::size_t train_size = 1600;
    std::size_t test_size = 400;
    std::size_t dim = 16;
    TrainOptions classifier_training{};
    TrainOptions lm_training{6, 16, 0.01};
    ClassifierArch arch = ClassifierArch::attention;
};

struct SyntheticTask {
    Vocabulary vocab;
    std::vector<LabeledExample> train;
    std::vector<LabeledExample> test;
    /// Unlabeled sentences for the LM and idf statistics.
    std::vector<TokenSequence> corpus;
    std::vector<std::string> label_names;
};

struct ReferenceModels {
    SyntheticTask task;
    std::shared_ptr<ReferenceClassifier> classifier;
    std::shared_ptr<ReferenceLM> lm;
    std::shared_ptr<LMEmbedder> embedder;
};

/// Fixed vocabulary of the synthetic task: [PAD] [CLS] [SEP] then words.
Vocabulary synthetic_vocabulary(std::size_t num_classes);

SyntheticTask generate_synthetic_task(const SyntheticTaskOptions& options, Rng& rng);

/// Generates the task and trains classifier, LM and the LM-derived embedder.
ReferenceModels train_synthetic_task(const SyntheticTaskOptions& options, Rng& rng);

/// A further classifier on an existing task, e.g. an independently seeded transfer target.
std::shared_ptr<ReferenceClassifier> train_task_classifier(const SyntheticTask& task,
                                                           const SyntheticTaskOptions& options, Rng& rng);

} // namespace gbda

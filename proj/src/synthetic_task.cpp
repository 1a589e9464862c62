#include "gbda/synthetic_task.hpp"

#include <algorithm>
#include <array>

namespace gbda {

namespace {

const std::vector<std::string> kDeterminers = {"the", "a", "this", "every"};
const std::vector<std::string> kAdjectives = {"big", "small", "old", "new", "quiet",
                                              "bright", "early", "late", "local", "famous"};
const std::vector<std::string> kNouns = {"people", "team",  "city",   "report", "group", "crowd",
                                         "family", "story", "season", "office", "river", "morning"};
const std::vector<std::string> kVerbs = {"saw", "likes", "visited", "praised", "joined", "watched", "found", "described"};
const std::vector<std::string> kPrepositions = {"in", "near", "about", "with"};

const std::array<std::vector<std::string>, 4> kKeywords = {{
    {"football", "tennis", "coach", "league"},
    {"stocks", "profit", "investor", "bank"},
    {"physics", "telescope", "genome", "chemist"},
    {"election", "embassy", "minister", "treaty"},
}};
const std::array<std::string, 4> kLabelNames = {"sports", "business", "science", "world"};

// D determiner, A adjective, N noun, V verb, P preposition, K class keyword.
const std::array<std::string_view, 4> kTemplates = {"DANVDKPDAN", "DKVDANPDN", "DANPDKVDN", "DNVDAK"};

template <class T>
const T& choose(const std::vector<T>& items, Rng& rng)
{
    std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);
    return items[pick(rng)];
}

TokenSequence make_sentence(const Vocabulary& vocab, ClassId label, Rng& rng)
{
    std::uniform_int_distribution<std::size_t> pick_template(0, kTemplates.size() - 1);
    std::string_view shape = kTemplates[pick_template(rng)];
    std::vector<TokenId> ids{vocab.id("[CLS]")};
    for (char slot : shape) {
        const std::vector<std::string>* pool = nullptr;
        switch (slot) {
        case 'D': pool = &kDeterminers; break;
        case 'A': pool = &kAdjectives; break;
        case 'N': pool = &kNouns; break;
        case 'V': pool = &kVerbs; break;
        case 'P': pool = &kPrepositions; break;
        default: pool = &kKeywords[label]; break;
        }
        ids.push_back(vocab.id(choose(*pool, rng)));
    }
    return TokenSequence(std::move(ids), vocab.size());
}

std::vector<LabeledExample> make_split(const Vocabulary& vocab, std::size_t count, std::size_t num_classes, Rng& rng)
{
    std::vector<LabeledExample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        ClassId label = i % num_classes;
        out.push_back({make_sentence(vocab, label, rng), label});
    }
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

} // namespace

Vocabulary synthetic_vocabulary(std::size_t num_classes)
{
    if (num_classes < 2 || num_classes > kKeywords.size()) {
        throw ConfigError("synthetic task supports 2 to 4 classes");
    }
    std::vector<std::string> tokens = {"[PAD]", "[CLS]", "[SEP]"};
    for (const auto* group : {&kDeterminers, &kAdjectives, &kNouns, &kVerbs, &kPrepositions}) {
        tokens.insert(tokens.end(), group->begin(), group->end());
    }
    for (std::size_t k = 0; k < num_classes; ++k) {
        tokens.insert(tokens.end(), kKeywords[k].begin(), kKeywords[k].end());
    }
    return Vocabulary(std::move(tokens), {0, 1, 2});
}

SyntheticTask generate_synthetic_task(const SyntheticTaskOptions& options, Rng& rng)
{
    SyntheticTask task;
    task.vocab = synthetic_vocabulary(options.num_classes);
    task.train = make_split(task.vocab, options.train_size, options.num_classes, rng);
    task.test = make_split(task.vocab, options.test_size, options.num_classes, rng);
    for (const auto& ex : task.train) {
        task.corpus.push_back(ex.tokens);
    }
    task.label_names.assign(kLabelNames.begin(), kLabelNames.begin() + static_cast<long>(options.num_classes));
    return task;
}

std::shared_ptr<ReferenceClassifier> train_task_classifier(const SyntheticTask& task,
                                                           const SyntheticTaskOptions& options, Rng& rng)
{
    auto classifier = build_reference_classifier(task.vocab, options.num_classes, options.dim, rng, options.arch);
    train_classifier(*classifier, task.train, options.classifier_training, rng);
    return classifier;
}

ReferenceModels train_synthetic_task(const SyntheticTaskOptions& options, Rng& rng)
{
    ReferenceModels models;
    models.task = generate_synthetic_task(options, rng);
    models.classifier = train_task_classifier(models.task, options, rng);
    models.lm = build_reference_lm(models.task.vocab, options.dim, rng);
    train_lm(*models.lm, models.task.corpus, options.lm_training, rng);
    models.embedder = std::make_shared<LMEmbedder>(models.lm);
    return models;
}

} // namespace gbda

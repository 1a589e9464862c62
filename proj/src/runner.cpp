#include "gbda/runner.hpp"

#include <atomic>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

namespace gbda {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- configuration -----------------------------------------------------------

namespace {

std::string format_name(DatasetFormat f) { return f == DatasetFormat::tsv ? "tsv" : "jsonl"; }
std::string segment_name(PairSegment s) { return s == PairSegment::premise ? "premise" : "hypothesis"; }

DatasetFormat parse_format(const std::string& s)
{
    if (s == "tsv") return DatasetFormat::tsv;
    if (s == "jsonl") return DatasetFormat::jsonl;
    throw ConfigError("unknown dataset format '" + s + "' (expected tsv or jsonl)");
}

PairSegment parse_segment(const std::string& s)
{
    if (s == "premise") return PairSegment::premise;
    if (s == "hypothesis") return PairSegment::hypothesis;
    throw ConfigError("unknown pair segment '" + s + "' (expected premise or hypothesis)");
}

std::uint64_t fnv1a(std::string_view text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

json RunConfig::to_json() const
{
    const auto& a = attack;
    json j = {
        {"temperature", a.temperature},
        {"final_temperature", a.final_temperature ? json(*a.final_temperature) : json(nullptr)},
        {"kappa", a.kappa},
        {"lambda_lm", a.lambda_lm},
        {"lambda_sim", a.lambda_sim},
        {"init_c", a.init_c},
        {"learning_rate", a.learning_rate},
        {"beta1", a.beta1},
        {"beta2", a.beta2},
        {"epsilon", a.epsilon},
        {"batch_size", a.batch_size},
        {"num_iterations", a.num_iterations},
        {"max_samples_whitebox", a.max_samples_whitebox},
        {"max_samples_transfer", a.max_samples_transfer},
        {"nll_per_token_mean", a.nll_per_token_mean},
        {"seed", a.rng_seed},
        {"dataset", dataset_path},
        {"dataset_format", format_name(dataset_format)},
        {"attack_segment", segment_name(attack_segment)},
        {"labels", labels},
        {"models", models_path},
        {"target_model", target_model},
        {"lm_model", lm_model},
        {"embedder_model", embedder_model},
        {"transfer_targets", transfer_targets},
        {"idf_corpus", idf_corpus_path},
        {"output_dir", output_dir},
        {"workers", workers},
        {"limit", limit},
        {"resample_until_stable", resample_until_stable},
        {"write_traces", write_traces},
    };
    return j;
}

RunConfig RunConfig::from_json(const json& j)
{
    if (!j.is_object()) {
        throw ConfigError("run configuration must be a JSON object");
    }
    RunConfig c;
    auto& a = c.attack;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "temperature") a.temperature = value.get<double>();
            else if (key == "final_temperature") {
                if (value.is_null()) a.final_temperature.reset();
                else a.final_temperature = value.get<double>();
            }
            else if (key == "kappa") a.kappa = value.get<double>();
            else if (key == "lambda_lm") a.lambda_lm = value.get<double>();
            else if (key == "lambda_sim") a.lambda_sim = value.get<double>();
            else if (key == "init_c") a.init_c = value.get<double>();
            else if (key == "learning_rate") a.learning_rate = value.get<double>();
            else if (key == "beta1") a.beta1 = value.get<double>();
            else if (key == "beta2") a.beta2 = value.get<double>();
            else if (key == "epsilon") a.epsilon = value.get<double>();
            else if (key == "batch_size") a.batch_size = value.get<std::size_t>();
            else if (key == "num_iterations") a.num_iterations = value.get<std::size_t>();
            else if (key == "max_samples_whitebox") a.max_samples_whitebox = value.get<std::size_t>();
            else if (key == "max_samples_transfer") a.max_samples_transfer = value.get<std::size_t>();
            else if (key == "nll_per_token_mean") a.nll_per_token_mean = value.get<bool>();
            else if (key == "seed") a.rng_seed = value.get<std::uint64_t>();
            else if (key == "dataset") c.dataset_path = value.get<std::string>();
            else if (key == "dataset_format") c.dataset_format = parse_format(value.get<std::string>());
            else if (key == "attack_segment") c.attack_segment = parse_segment(value.get<std::string>());
            else if (key == "labels") c.labels = value.get<std::vector<std::string>>();
            else if (key == "models") c.models_path = value.get<std::string>();
            else if (key == "target_model") c.target_model = value.get<std::string>();
            else if (key == "lm_model") c.lm_model = value.get<std::string>();
            else if (key == "embedder_model") c.embedder_model = value.get<std::string>();
            else if (key == "transfer_targets") c.transfer_targets = value.get<std::vector<std::string>>();
            else if (key == "idf_corpus") c.idf_corpus_path = value.get<std::string>();
            else if (key == "output_dir") c.output_dir = value.get<std::string>();
            else if (key == "workers") c.workers = value.get<std::size_t>();
            else if (key == "limit") c.limit = value.get<std::size_t>();
            else if (key == "resample_until_stable") c.resample_until_stable = value.get<bool>();
            else if (key == "write_traces") c.write_traces = value.get<bool>();
            else throw ConfigError("unknown configuration key '" + key + "'");
        } catch (const json::exception& e) {
            throw ConfigError("configuration key '" + key + "': " + e.what());
        }
    }
    return c;
}

void RunConfig::validate() const
{
    attack.validate();
    auto require_file = [](const std::string& path, const char* what) {
        if (path.empty()) {
            throw ConfigError(std::string(what) + " path is not set");
        }
        if (!fs::exists(path)) {
            throw ConfigError(std::string(what) + " '" + path + "' does not exist");
        }
    };
    require_file(models_path, "model bundle");
    require_file(dataset_path, "dataset");
    if (!idf_corpus_path.empty()) {
        require_file(idf_corpus_path, "idf corpus");
    }
    if (workers < 1) {
        throw ConfigError("workers must be at least 1");
    }
}

std::string RunConfig::hash() const
{
    json j = to_json();
    j.erase("output_dir");
    j.erase("workers");
    j.erase("write_traces");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
    return buf;
}

// ---- datasets ------------------------------------------------------------------

namespace {

ClassId resolve_label(const std::string& label, const std::vector<std::string>& names, std::size_t line)
{
    for (std::size_t k = 0; k < names.size(); ++k) {
        if (names[k] == label) {
            return k;
        }
    }
    std::string valid;
    for (const auto& n : names) {
        valid += (valid.empty() ? "" : ", ") + n;
    }
    throw InvalidInput("line " + std::to_string(line) + ": unknown label '" + label + "' (valid labels: " + valid
                       + ")");
}

std::vector<std::string> split_tabs(const std::string& line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    return out;
}

std::string label_text(const json& value)
{
    if (value.is_string()) return value.get<std::string>();
    if (value.is_number_integer()) return std::to_string(value.get<long long>());
    throw InvalidInput("label must be a string or integer");
}

} // namespace

std::vector<DatasetExample> ingest_dataset(std::istream& in, DatasetFormat format,
                                           const std::vector<std::string>& label_names)
{
    if (label_names.empty()) {
        throw ConfigError("no label names declared");
    }
    std::vector<DatasetExample> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        DatasetExample ex;
        ex.line = number;
        if (format == DatasetFormat::tsv) {
            auto cols = split_tabs(line);
            if (cols.size() == 2) {
                ex.text = cols[0];
            } else if (cols.size() == 3) {
                ex.text = cols[0];
                ex.second = cols[1];
            } else {
                throw InvalidInput("line " + std::to_string(number) + ": expected 2 or 3 tab-separated columns, got "
                                   + std::to_string(cols.size()));
            }
            ex.label = resolve_label(cols.back(), label_names, number);
        } else {
            json j;
            try {
                j = json::parse(line);
                if (j.contains("text")) {
                    ex.text = j.at("text").get<std::string>();
                } else {
                    ex.text = j.at("premise").get<std::string>();
                    ex.second = j.at("hypothesis").get<std::string>();
                }
                ex.label = resolve_label(label_text(j.at("label")), label_names, number);
            } catch (const json::exception& e) {
                throw InvalidInput("line " + std::to_string(number) + ": malformed record: " + e.what());
            }
        }
        if (ex.text.find_first_not_of(' ') == std::string::npos
            || (ex.second && ex.second->find_first_not_of(' ') == std::string::npos)) {
            throw InvalidInput("line " + std::to_string(number) + ": empty text");
        }
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<DatasetExample> ingest_dataset(const std::string& path, DatasetFormat format,
                                           const std::vector<std::string>& label_names)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read dataset '" + path + "'");
    }
    return ingest_dataset(in, format, label_names);
}

// ---- model loading -------------------------------------------------------------

namespace {

std::vector<TokenSequence> read_corpus(const std::string& path, const Tokenizer& tokenizer)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read idf corpus '" + path + "'");
    }
    std::vector<TokenSequence> docs;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            docs.push_back(tokenizer.encode(line));
        } catch (const InvalidInput& e) {
            throw InvalidInput("idf corpus line " + std::to_string(number) + ": " + e.what());
        }
    }
    return docs;
}

} // namespace

LoadedModels load_models(const RunConfig& config, const ModelRegistry& registry)
{
    auto bundle = ModelBundle::load(config.models_path);
    LoadedModels m;
    m.vocab = bundle.vocab;
    m.tokenizer = std::make_shared<WordTokenizer>(bundle.vocab);
    m.target = registry.classifier(config.target_model, bundle);
    m.lm = registry.lm(config.lm_model, bundle);
    m.embedder = registry.embedder(config.embedder_model, bundle);
    for (const auto& name : config.transfer_targets) {
        auto model = registry.classifier(name, bundle);
        m.transfer_targets.push_back({name, as_transfer_target(std::make_shared<const ClassifierLabeler>(model))});
    }
    m.labels = config.labels;
    if (m.labels.empty()) {
        m.labels = bundle.label_names;
    }
    if (m.labels.empty()) {
        for (std::size_t k = 0; k < m.target->num_classes(); ++k) {
            m.labels.push_back(std::to_string(k));
        }
    }
    if (m.labels.size() != m.target->num_classes()) {
        throw ConfigError("declared labels do not match the target's class count");
    }
    if (!config.idf_corpus_path.empty()) {
        auto docs = read_corpus(config.idf_corpus_path, *m.tokenizer);
        m.idf = IdfTable(docs, m.vocab.size());
    }
    return m;
}

std::vector<AttackInput> prepare_inputs(const std::vector<DatasetExample>& examples, const LoadedModels& models,
                                        PairSegment segment)
{
    auto cls = models.vocab.find("[CLS]");
    auto sep = models.vocab.find("[SEP]");
    std::vector<AttackInput> out;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i];
        std::vector<TokenId> ids;
        std::set<std::size_t> frozen;
        if (cls) ids.push_back(*cls);
        try {
            auto first = models.tokenizer->encode(ex.text).ids();
            std::size_t first_start = ids.size();
            ids.insert(ids.end(), first.begin(), first.end());
            if (ex.second) {
                if (sep) ids.push_back(*sep);
                std::size_t second_start = ids.size();
                auto second = models.tokenizer->encode(*ex.second).ids();
                ids.insert(ids.end(), second.begin(), second.end());
                auto [lo, hi] = segment == PairSegment::hypothesis ? std::pair{first_start, second_start}
                                                                   : std::pair{second_start, ids.size()};
                for (std::size_t p = lo; p < hi; ++p) frozen.insert(p);
            }
        } catch (const InvalidInput& e) {
            throw InvalidInput("line " + std::to_string(ex.line) + ": " + e.what());
        }
        out.push_back({"ex" + std::to_string(i), TokenSequence(std::move(ids), models.vocab.size()), ex.label,
                       std::move(frozen)});
    }
    return out;
}

// ---- white-box runs ------------------------------------------------------------

json ResultRecord::to_json() const
{
    return {{"id", id},
            {"clean_text", clean_text},
            {"label", label},
            {"attacked", attacked},
            {"success", success},
            {"queries", queries},
            {"similarity", similarity},
            {"adversarial_text", adversarial_text},
            {"retokenization_stable", retokenization_stable},
            {"config_hash", config_hash}};
}

json RunSummary::to_json() const
{
    return {{"total", total},
            {"clean_correct", clean_correct},
            {"attacked", attacked},
            {"successes", successes},
            {"clean_accuracy", clean_accuracy},
            {"adversarial_accuracy", adversarial_accuracy},
            {"mean_similarity", mean_similarity},
            {"mean_queries", mean_queries},
            {"token_error_rate", token_error_rate}};
}

namespace {

template <class Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn)
{
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = next++; i < count; i = next++) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

struct InputOutcome {
    ResultRecord record;
    std::optional<ThetaRecord> theta;
    OptimizeTraces traces;
    std::vector<std::pair<TokenSequence, TokenSequence>> retokenizations;
};

InputOutcome attack_one(const RunConfig& config, const LoadedModels& models, const AttackInput& input,
                        std::size_t index, const std::string& config_hash, const SentenceEncoder& scorer)
{
    const auto& tokenizer = *models.tokenizer;
    InputOutcome out;
    auto& rec = out.record;
    rec.id = input.id;
    rec.label = input.label;
    rec.config_hash = config_hash;
    rec.clean_text = tokenizer.decode(input.tokens);
    rec.adversarial_text = rec.clean_text;
    rec.similarity = 1.0;
    if (models.target->forward_tokens(input.tokens).argmax() != input.label) {
        return out;
    }
    rec.attacked = true;

    Rng rng(stream_seed(config.attack.rng_seed, 0, index));
    ObjectiveModels objective{*models.target, *models.lm, *models.embedder};
    auto theta0 = initialize_theta(input.tokens, models.vocab, config.attack.init_c, input.frozen_positions);
    auto optimized = optimize(input.tokens, input.label, objective, config.attack, rng,
                              models.idf.weights_for(input.tokens), std::move(theta0));

    ClassifierLabeler labeler(models.target);
    SamplingBudget budget;
    budget.max_samples = config.attack.max_samples_whitebox;
    budget.resample_until_stable = config.resample_until_stable;
    auto result = sample_adversarial(optimized.theta, labeler, input.label, budget, rng, &tokenizer);

    rec.success = result.success();
    rec.queries = result.queries_used;
    rec.adversarial_text = tokenizer.decode(result.final_sample());
    rec.retokenization_stable = result.adversarial_samples.back().retokenization_stable;
    rec.similarity = similarity_score(rec.clean_text, rec.adversarial_text, scorer);
    for (const auto& s : result.adversarial_samples) {
        out.retokenizations.emplace_back(s.drawn, s.tokens);
    }
    out.theta = ThetaRecord{input.id, input.tokens, input.label, std::move(optimized.theta), config_hash};
    out.traces = std::move(optimized.traces);
    return out;
}

void write_json_file(const fs::path& path, const json& j)
{
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write '" + path.string() + "'");
    }
    out << j.dump(2) << '\n';
}

} // namespace

WhiteboxRun run_whitebox(const RunConfig& config, const LoadedModels& models, const std::vector<AttackInput>& inputs)
{
    config.attack.validate();
    std::size_t count = config.limit == 0 ? inputs.size() : std::min(config.limit, inputs.size());
    std::string hash = config.hash();
    EmbedderSentenceEncoder scorer(models.tokenizer, models.embedder);

    std::vector<InputOutcome> outcomes(count);
    parallel_for(count, config.workers, [&](std::size_t i) {
        outcomes[i] = attack_one(config, models, inputs[i], i, hash, scorer);
    });

    WhiteboxRun run;
    auto& s = run.summary;
    std::size_t still_correct = 0;
    double similarity = 0.0;
    double queries = 0.0;
    std::vector<std::pair<TokenSequence, TokenSequence>> retok;
    for (auto& o : outcomes) {
        ++s.total;
        if (o.record.attacked) {
            ++s.clean_correct;
            ++s.attacked;
            if (o.record.success) {
                ++s.successes;
            } else {
                ++still_correct;
            }
            similarity += o.record.similarity;
            queries += static_cast<double>(o.record.queries);
            retok.insert(retok.end(), o.retokenizations.begin(), o.retokenizations.end());
            run.thetas.push_back(std::move(*o.theta));
            run.traces.push_back(std::move(o.traces));
        }
        run.records.push_back(std::move(o.record));
    }
    if (s.total > 0) {
        s.clean_accuracy = static_cast<double>(s.clean_correct) / static_cast<double>(s.total);
        s.adversarial_accuracy = static_cast<double>(still_correct) / static_cast<double>(s.total);
    }
    if (s.attacked > 0) {
        s.mean_similarity = similarity / static_cast<double>(s.attacked);
        s.mean_queries = queries / static_cast<double>(s.attacked);
    }
    s.token_error_rate = token_error_rate(retok);
    return run;
}

WhiteboxRun run_whitebox(const RunConfig& config, const ModelRegistry& registry)
{
    config.validate();
    auto models = load_models(config, registry);
    auto examples = ingest_dataset(config.dataset_path, config.dataset_format, models.labels);
    auto inputs = prepare_inputs(examples, models, config.attack_segment);
    auto run = run_whitebox(config, models, inputs);

    if (!config.output_dir.empty()) {
        fs::path dir(config.output_dir);
        fs::create_directories(dir);
        write_json_file(dir / "config.json", config.to_json());
        write_json_file(dir / "summary.json", run.summary.to_json());
        std::ofstream records(dir / "records.jsonl");
        for (const auto& r : run.records) {
            records << r.to_json().dump() << '\n';
        }
        write_theta_store((dir / "theta.jsonl").string(), run.thetas);
        if (config.write_traces) {
            fs::create_directories(dir / "traces");
            for (std::size_t i = 0; i < run.thetas.size(); ++i) {
                std::ofstream trace(dir / "traces" / (run.thetas[i].id + ".tsv"));
                loss_traces_summary(run.traces[i]).write_tsv(trace);
            }
        }
    }
    return run;
}

// ---- transfer runs -------------------------------------------------------------

json transfer_report_to_json(const TransferReport& report, const std::string& config_hash)
{
    json inputs = json::array();
    for (const auto& o : report.inputs) {
        inputs.push_back({{"id", o.id},
                          {"success", o.success},
                          {"queries", o.queries},
                          {"similarity", o.similarity},
                          {"retokenization_stable", o.retokenization_stable}});
    }
    return {{"target", report.target_name},
            {"config_hash", config_hash},
            {"adversarial_accuracy", report.adversarial_accuracy()},
            {"success_rate", report.success_rate()},
            {"mean_queries", report.mean_queries()},
            {"mean_similarity", report.mean_similarity()},
            {"skipped", report.skipped},
            {"inputs", inputs}};
}

TransferRun run_transfer(const RunConfig& config, const LoadedModels& models, const std::vector<AttackInput>& inputs,
                         const std::vector<ThetaRecord>& store)
{
    config.attack.validate();
    std::map<std::string, const ThetaRecord*> by_id;
    for (const auto& r : store) {
        by_id[r.id] = &r;
    }
    std::vector<TransferInput> ready;
    std::size_t skipped = 0;
    std::size_t count = config.limit == 0 ? inputs.size() : std::min(config.limit, inputs.size());
    for (std::size_t i = 0; i < count; ++i) {
        auto it = by_id.find(inputs[i].id);
        if (it == by_id.end()) {
            ++skipped;
            continue;
        }
        if (it->second->original != inputs[i].tokens) {
            std::cerr << "warning: stored theta for " << inputs[i].id << " was built for a different input\n";
            ++skipped;
            continue;
        }
        ready.push_back({inputs[i].id, inputs[i].tokens, inputs[i].label, it->second->theta});
    }
    if (skipped > 0) {
        std::cerr << "warning: " << skipped << " input(s) have no stored theta and were skipped\n";
    }
    SamplingBudget budget;
    budget.max_samples = config.attack.max_samples_transfer;
    budget.resample_until_stable = config.resample_until_stable;
    EmbedderSentenceEncoder scorer(models.tokenizer, models.embedder);
    TransferRun run;
    run.reports = transfer_attack(ready, models.transfer_targets, budget, scorer, *models.tokenizer,
                                  config.attack.rng_seed);
    for (auto& r : run.reports) {
        r.skipped = skipped;
    }
    return run;
}

TransferRun run_transfer(const RunConfig& config, const ModelRegistry& registry, const std::string& theta_store_path)
{
    config.validate();
    if (config.transfer_targets.empty()) {
        throw ConfigError("no transfer targets configured");
    }
    auto models = load_models(config, registry);
    auto store = read_theta_store(theta_store_path);
    auto examples = ingest_dataset(config.dataset_path, config.dataset_format, models.labels);
    auto inputs = prepare_inputs(examples, models, config.attack_segment);
    auto run = run_transfer(config, models, inputs, store);
    if (!config.output_dir.empty()) {
        fs::path dir(config.output_dir);
        fs::create_directories(dir);
        write_json_file(dir / "transfer_config.json", config.to_json());
        for (const auto& report : run.reports) {
            std::string name = report.target_name;
            for (char& c : name) {
                if (c == ':' || c == '/') c = '_';
            }
            write_json_file(dir / ("transfer_" + name + ".json"), transfer_report_to_json(report, config.hash()));
        }
    }
    return run;
}

// ---- sweeps --------------------------------------------------------------------

namespace {

std::string exact(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& s)
{
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) {
        throw InvalidInput("malformed number '" + s + "' in sweep table");
    }
    return v;
}

} // namespace

void SweepTable::write(std::ostream& out) const
{
    out << "lambda_sim\tkappa\tinit_c\tnum_seeds\tadversarial_accuracy\tmean_similarity\tmean_queries\n";
    for (const auto& r : rows) {
        out << exact(r.lambda_sim) << '\t' << exact(r.kappa) << '\t' << exact(r.init_c) << '\t' << r.num_seeds << '\t'
            << exact(r.adversarial_accuracy) << '\t' << exact(r.mean_similarity) << '\t' << exact(r.mean_queries)
            << '\n';
    }
}

SweepTable SweepTable::read(std::istream& in)
{
    SweepTable table;
    std::string line;
    if (!std::getline(in, line) || line.rfind("lambda_sim\t", 0) != 0) {
        throw InvalidInput("sweep table is missing its header");
    }
    std::size_t number = 1;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        auto cols = split_tabs(line);
        if (cols.size() != 7) {
            throw InvalidInput("sweep table line " + std::to_string(number) + ": expected 7 columns");
        }
        SweepRow r;
        r.lambda_sim = parse_double(cols[0]);
        r.kappa = parse_double(cols[1]);
        r.init_c = parse_double(cols[2]);
        r.num_seeds = std::stoul(cols[3]);
        r.adversarial_accuracy = parse_double(cols[4]);
        r.mean_similarity = parse_double(cols[5]);
        r.mean_queries = parse_double(cols[6]);
        table.rows.push_back(r);
    }
    return table;
}

SweepTable run_sweep(const RunConfig& config, const LoadedModels& models, const std::vector<AttackInput>& inputs,
                     const SweepGrid& grid)
{
    if (grid.lambda_sim.empty() || grid.kappa.empty() || grid.init_c.empty()) {
        throw ConfigError("sweep grid must have at least one value per axis");
    }
    std::vector<std::uint64_t> seeds = grid.seeds.empty() ? std::vector<std::uint64_t>{config.attack.rng_seed}
                                                          : grid.seeds;
    SweepTable table;
    for (double lambda_sim : grid.lambda_sim) {
        for (double kappa : grid.kappa) {
            for (double init_c : grid.init_c) {
                SweepRow row{lambda_sim, kappa, init_c, seeds.size(), 0.0, 0.0, 0.0};
                for (auto seed : seeds) {
                    RunConfig point = config;
                    point.attack.lambda_sim = lambda_sim;
                    point.attack.kappa = kappa;
                    point.attack.init_c = init_c;
                    point.attack.rng_seed = seed;
                    auto run = run_whitebox(point, models, inputs);
                    row.adversarial_accuracy += run.summary.adversarial_accuracy;
                    row.mean_similarity += run.summary.mean_similarity;
                    row.mean_queries += run.summary.mean_queries;
                }
                auto n = static_cast<double>(seeds.size());
                row.adversarial_accuracy /= n;
                row.mean_similarity /= n;
                row.mean_queries /= n;
                table.rows.push_back(row);
            }
        }
    }
    return table;
}

} // namespace gbda

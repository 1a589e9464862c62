#pragma once

// Experiment drivers behind the command-line tool: configuration, dataset
// ingestion, white-box attack runs, transfer runs and hyperparameter sweeps.

#include "gbda/attack.hpp"
#include "gbda/model_registry.hpp"
#include "gbda/sampling.hpp"

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gbda {

enum class DatasetFormat { tsv, jsonl };
enum class PairSegment { premise, hypothesis };

struct RunConfig {
    AttackConfig attack;
    std::string dataset_path;
    DatasetFormat dataset_format = DatasetFormat::tsv;
    PairSegment attack_segment = PairSegment::hypothesis;
    /// Declared label names; empty means the model bundle's names.
    std::vector<std::string> labels;
    std::string models_path;
    std::string target_model = "reference:target";
    std::string lm_model = "reference:lm";
    std::string embedder_model = "reference-lm:lm";
    std::vector<std::string> transfer_targets;
    std::string idf_corpus_path;
    std::string output_dir;
    std::size_t workers = 1;
    /// Attack at most this many inputs (0 = all).
    std::size_t limit = 0;
    bool resample_until_stable = false;
    bool write_traces = false;

    nlohmann::json to_json() const;
    /// Missing keys keep their defaults; unknown keys are rejected.
    static RunConfig from_json(const nlohmann::json& j);
    /// Checks the attack hyperparameters and that referenced input files exist.
    void validate() const;
    /// FNV-1a over the fields that influence results.
    std::string hash() const;
};

struct DatasetExample {
    std::string text;
    std::optional<std::string> second;
    ClassId label = 0;
    std::size_t line = 0;
};

/// TSV rows are "text<TAB>label" or "premise<TAB>hypothesis<TAB>label"; JSONL
/// records carry "text" or "premise"/"hypothesis" plus "label". Blank lines are
/// skipped. Errors name the offending line.
std::vector<DatasetExample> ingest_dataset(const std::string& path, DatasetFormat format,
                                           const std::vector<std::string>& label_names);
std::vector<DatasetExample> ingest_dataset(std::istream& in, DatasetFormat format,
                                           const std::vector<std::string>& label_names);

/// Everything a run needs, already resolved.
struct LoadedModels {
    Vocabulary vocab;
    std::vector<std::string> labels;
    std::shared_ptr<const Tokenizer> tokenizer;
    std::shared_ptr<const Classifier> target;
    std::shared_ptr<const CausalLM> lm;
    std::shared_ptr<const ContextualEmbedder> embedder;
    std::vector<NamedTarget> transfer_targets;
    IdfTable idf;
};

/// Loads the bundle and resolves every model through the registry. Fails
/// before any attack runs.
LoadedModels load_models(const RunConfig& config, const ModelRegistry& registry);

struct AttackInput {
    std::string id;
    TokenSequence tokens;
    ClassId label = 0;
    /// Positions outside the attacked segment.
    std::set<std::size_t> frozen_positions;
};

/// Prepends [CLS] (and joins pairs with [SEP]) when the vocabulary has them.
std::vector<AttackInput> prepare_inputs(const std::vector<DatasetExample>& examples, const LoadedModels& models,
                                        PairSegment segment);

struct ResultRecord {
    std::string id;
    std::string clean_text;
    ClassId label = 0;
    bool attacked = false;
    bool success = false;
    std::size_t queries = 0;
    double similarity = 0.0;
    std::string adversarial_text;
    bool retokenization_stable = true;
    std::string config_hash;

    nlohmann::json to_json() const;
};

struct RunSummary {
    std::size_t total = 0;
    std::size_t clean_correct = 0;
    std::size_t attacked = 0;
    std::size_t successes = 0;
    double clean_accuracy = 0.0;
    double adversarial_accuracy = 0.0;
    double mean_similarity = 0.0;
    double mean_queries = 0.0;
    double token_error_rate = 0.0;

    nlohmann::json to_json() const;
};

struct WhiteboxRun {
    RunSummary summary;
    std::vector<ResultRecord> records;
    std::vector<ThetaRecord> thetas;
    std::vector<OptimizeTraces> traces;
};

/// Attacks every correctly classified input: initialize theta, optimize,
/// then sample with the white-box budget.
WhiteboxRun run_whitebox(const RunConfig& config, const LoadedModels& models, const std::vector<AttackInput>& inputs);

/// CLI entry: loads models and data, runs, and writes config.json,
/// records.jsonl, summary.json and theta.jsonl into config.output_dir.
WhiteboxRun run_whitebox(const RunConfig& config, const ModelRegistry& registry);

struct TransferRun {
    std::vector<TransferReport> reports;
};

/// Samples stored thetas against every transfer target with the transfer
/// budget. Inputs without a stored theta are skipped and counted.
TransferRun run_transfer(const RunConfig& config, const LoadedModels& models, const std::vector<AttackInput>& inputs,
                         const std::vector<ThetaRecord>& store);

/// CLI entry: writes one transfer_<target>.json report per target.
TransferRun run_transfer(const RunConfig& config, const ModelRegistry& registry, const std::string& theta_store_path);

nlohmann::json transfer_report_to_json(const TransferReport& report, const std::string& config_hash);

struct SweepGrid {
    std::vector<double> lambda_sim;
    std::vector<double> kappa;
    std::vector<double> init_c;
    std::vector<std::uint64_t> seeds;
};

struct SweepRow {
    double lambda_sim = 0.0;
    double kappa = 0.0;
    double init_c = 0.0;
    std::size_t num_seeds = 0;
    double adversarial_accuracy = 0.0;
    double mean_similarity = 0.0;
    double mean_queries = 0.0;

    friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct SweepTable {
    std::vector<SweepRow> rows;

    /// Tab-separated with header; doubles printed with round-trip precision.
    void write(std::ostream& out) const;
    static SweepTable read(std::istream& in);
};

/// run_whitebox per grid point, averaged over the grid's seeds.
SweepTable run_sweep(const RunConfig& config, const LoadedModels& models, const std::vector<AttackInput>& inputs,
                     const SweepGrid& grid);

} // namespace gbda

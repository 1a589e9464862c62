#include "gbda/runner.hpp"
#include "gbda/synthetic_task.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Each flag writes into a JSON overlay applied on top of the config file, so
// flags and file keys share one parser.
struct Overlay {
    json values = json::object();

    template <class T>
    void add(CLI::App& app, const std::string& flag, const std::string& key, const std::string& help)
    {
        app.add_option_function<T>(flag, [this, key](const T& v) { values[key] = v; }, help);
    }

    void add_flag(CLI::App& app, const std::string& flag, const std::string& key, const std::string& help)
    {
        app.add_flag_function(flag, [this, key](std::int64_t) { values[key] = true; }, help);
    }
};

void add_run_options(CLI::App& app, Overlay& o, std::string& config_path)
{
    app.add_option("--config", config_path, "JSON file supplying any configuration field")->check(CLI::ExistingFile);
    o.add<std::string>(app, "--models", "models", "Model bundle (JSON)");
    o.add<std::string>(app, "--dataset", "dataset", "Dataset file");
    o.add<std::string>(app, "--dataset-format", "dataset_format", "tsv or jsonl");
    o.add<std::string>(app, "--attack-segment", "attack_segment", "premise or hypothesis (pair tasks)");
    o.add<std::vector<std::string>>(app, "--labels", "labels", "Declared label names, in class order");
    o.add<std::string>(app, "--target-model", "target_model", "Target classifier as plugin:entry");
    o.add<std::string>(app, "--lm-model", "lm_model", "Language model as plugin:entry");
    o.add<std::string>(app, "--embedder-model", "embedder_model", "Embedder as plugin:entry");
    o.add<std::vector<std::string>>(app, "--transfer-targets", "transfer_targets", "Transfer targets as plugin:entry");
    o.add<std::string>(app, "--idf-corpus", "idf_corpus", "One sentence per line");
    o.add<std::string>(app, "--output-dir", "output_dir", "Directory for results");
    o.add<std::size_t>(app, "--workers", "workers", "Parallel workers");
    o.add<std::size_t>(app, "--limit", "limit", "Attack at most this many inputs (0 = all)");
    o.add_flag(app, "--resample-until-stable", "resample_until_stable", "Redraw samples that change on re-tokenization");
    o.add_flag(app, "--write-traces", "write_traces", "Write per-input loss traces");
    o.add<double>(app, "--temperature", "temperature", "Gumbel-softmax temperature");
    o.add<double>(app, "--final-temperature", "final_temperature", "Anneal the temperature linearly to this value");
    o.add<double>(app, "--kappa", "kappa", "Margin");
    o.add<double>(app, "--lambda-lm", "lambda_lm", "Fluency weight");
    o.add<double>(app, "--lambda-sim", "lambda_sim", "Similarity weight");
    o.add<double>(app, "--init-c", "init_c", "Initial logit of the original tokens");
    o.add<double>(app, "--learning-rate", "learning_rate", "Adam learning rate");
    o.add<double>(app, "--beta1", "beta1", "Adam beta1");
    o.add<double>(app, "--beta2", "beta2", "Adam beta2");
    o.add<double>(app, "--epsilon", "epsilon", "Adam epsilon");
    o.add<std::size_t>(app, "--batch-size", "batch_size", "Gumbel-softmax samples per step");
    o.add<std::size_t>(app, "--num-iterations", "num_iterations", "Optimization steps");
    o.add<std::size_t>(app, "--max-samples-whitebox", "max_samples_whitebox", "White-box query budget");
    o.add<std::size_t>(app, "--max-samples-transfer", "max_samples_transfer", "Transfer query budget");
    o.add_flag(app, "--nll-per-token-mean", "nll_per_token_mean", "Average the fluency term over tokens");
    o.add<std::uint64_t>(app, "--seed", "seed", "Random seed");
}

gbda::RunConfig resolve_config(const std::string& config_path, const Overlay& overlay)
{
    json merged = json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) {
            throw gbda::ConfigError("cannot read config '" + config_path + "'");
        }
        try {
            merged = json::parse(in);
        } catch (const json::exception& e) {
            throw gbda::ConfigError("config '" + config_path + "' is not valid JSON: " + e.what());
        }
    }
    merged.update(overlay.values);
    return gbda::RunConfig::from_json(merged);
}

void print_summary(const gbda::RunSummary& s)
{
    std::cout << std::fixed << std::setprecision(4) << "inputs " << s.total << ", attacked " << s.attacked
              << ", successes " << s.successes << '\n'
              << "clean accuracy " << s.clean_accuracy << ", adversarial accuracy " << s.adversarial_accuracy << '\n'
              << "mean similarity " << s.mean_similarity << ", mean queries " << s.mean_queries << '\n';
}

std::string sentence_text(const gbda::Vocabulary& vocab, const gbda::TokenSequence& tokens)
{
    std::string text;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (vocab.is_special(tokens[i])) continue;
        if (!text.empty()) text += ' ';
        text += vocab.token(tokens[i]);
    }
    return text;
}

void write_split(const fs::path& path, const gbda::SyntheticTask& task, const std::vector<gbda::LabeledExample>& data)
{
    std::ofstream out(path);
    if (!out) {
        throw gbda::ConfigError("cannot write '" + path.string() + "'");
    }
    for (const auto& ex : data) {
        out << sentence_text(task.vocab, ex.tokens) << '\t' << task.label_names[ex.label] << '\n';
    }
}

int train_reference(const fs::path& dir, std::uint64_t seed, std::size_t classes, std::size_t train_size,
                    std::size_t test_size, const std::string& arch)
{
    gbda::SyntheticTaskOptions options;
    options.num_classes = classes;
    options.train_size = train_size;
    options.test_size = test_size;
    options.arch = gbda::classifier_arch_from_string(arch);
    gbda::Rng rng(seed);
    auto models = gbda::train_synthetic_task(options, rng);
    gbda::Rng rng_b(seed + 1);
    auto target_b = gbda::train_task_classifier(models.task, options, rng_b);

    fs::create_directories(dir);
    gbda::ModelBundle bundle;
    bundle.vocab = models.task.vocab;
    bundle.label_names = models.task.label_names;
    bundle.classifiers["target"] = models.classifier;
    bundle.classifiers["target_b"] = target_b;
    bundle.lms["lm"] = models.lm;
    bundle.save((dir / "models.json").string());
    write_split(dir / "train.tsv", models.task, models.task.train);
    write_split(dir / "test.tsv", models.task, models.task.test);
    std::ofstream corpus(dir / "corpus.txt");
    for (const auto& s : models.task.corpus) {
        corpus << sentence_text(models.task.vocab, s) << '\n';
    }
    std::cout << std::fixed << std::setprecision(4)
              << "target test accuracy " << gbda::accuracy(*models.classifier, models.task.test) << '\n'
              << "target_b test accuracy " << gbda::accuracy(*target_b, models.task.test) << '\n'
              << "wrote " << (dir / "models.json").string() << '\n';
    return 0;
}

int compute_idf_table(const std::string& models_path, const std::string& corpus_path, const std::string& out_path)
{
    auto bundle = gbda::ModelBundle::load(models_path);
    gbda::WordTokenizer tokenizer(bundle.vocab);
    std::ifstream in(corpus_path);
    if (!in) {
        throw gbda::ConfigError("cannot read corpus '" + corpus_path + "'");
    }
    std::vector<gbda::TokenSequence> docs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        docs.push_back(tokenizer.encode(line));
    }
    gbda::IdfTable table(docs, bundle.vocab.size());
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) {
            throw gbda::ConfigError("cannot write '" + out_path + "'");
        }
    }
    std::ostream& out = out_path.empty() ? std::cout : file;
    out << "token\tidf\n";
    out << std::setprecision(17);
    for (gbda::TokenId t = 0; t < bundle.vocab.size(); ++t) {
        out << bundle.vocab.token(t) << '\t' << table.idf(t) << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Gradient-based distributional adversarial attacks on text classifiers"};
    app.require_subcommand(1);

    std::string attack_config;
    Overlay attack_overlay;
    auto* attack = app.add_subcommand("attack", "White-box attack against the target classifier");
    add_run_options(*attack, attack_overlay, attack_config);

    std::string transfer_config;
    std::string theta_store;
    Overlay transfer_overlay;
    auto* transfer = app.add_subcommand("transfer", "Sample stored thetas against hard-label transfer targets");
    add_run_options(*transfer, transfer_overlay, transfer_config);
    transfer->add_option("--theta-store", theta_store, "theta.jsonl written by 'attack'")
        ->required()
        ->check(CLI::ExistingFile);

    std::string sweep_config;
    std::string sweep_out;
    Overlay sweep_overlay;
    gbda::SweepGrid grid;
    auto* sweep = app.add_subcommand("sweep", "Grid over lambda_sim, kappa and C");
    add_run_options(*sweep, sweep_overlay, sweep_config);
    sweep->add_option("--grid-lambda-sim", grid.lambda_sim, "Similarity weights")->delimiter(',');
    sweep->add_option("--grid-kappa", grid.kappa, "Margins")->delimiter(',');
    sweep->add_option("--grid-init-c", grid.init_c, "Initial logits")->delimiter(',');
    sweep->add_option("--grid-seeds", grid.seeds, "Seeds averaged per grid point")->delimiter(',');
    sweep->add_option("--table", sweep_out, "Output TSV (default: stdout)");

    std::string train_dir;
    std::uint64_t train_seed = 1;
    std::size_t train_classes = 4;
    std::size_t train_size = 1600;
    std::size_t test_size = 400;
    std::string train_arch = "attention";
    auto* train = app.add_subcommand("train-reference", "Train the desk-scale reference models on the synthetic task");
    train->add_option("--output-dir", train_dir, "Directory for models.json and the dataset splits")->required();
    train->add_option("--seed", train_seed, "Training seed (the second target uses seed + 1)");
    train->add_option("--classes", train_classes, "Number of classes (2 to 4)");
    train->add_option("--train-size", train_size, "Training examples");
    train->add_option("--test-size", test_size, "Held-out examples");
    train->add_option("--arch", train_arch, "attention or bag");

    std::string idf_models;
    std::string idf_corpus;
    std::string idf_out;
    auto* idf = app.add_subcommand("idf", "Compute the smoothed idf table of a corpus");
    idf->add_option("--models", idf_models, "Model bundle supplying the vocabulary")->required();
    idf->add_option("--corpus", idf_corpus, "One sentence per line")->required();
    idf->add_option("--output", idf_out, "Output TSV (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        auto registry = gbda::ModelRegistry::with_builtins();
        if (*attack) {
            auto config = resolve_config(attack_config, attack_overlay);
            auto run = gbda::run_whitebox(config, registry);
            print_summary(run.summary);
        } else if (*transfer) {
            auto config = resolve_config(transfer_config, transfer_overlay);
            auto run = gbda::run_transfer(config, registry, theta_store);
            for (const auto& r : run.reports) {
                std::cout << std::fixed << std::setprecision(4) << r.target_name << ": success rate "
                          << r.success_rate() << ", adversarial accuracy " << r.adversarial_accuracy()
                          << ", mean queries " << r.mean_queries() << ", skipped " << r.skipped << '\n';
            }
        } else if (*sweep) {
            auto config = resolve_config(sweep_config, sweep_overlay);
            config.validate();
            if (grid.lambda_sim.empty()) grid.lambda_sim = {config.attack.lambda_sim};
            if (grid.kappa.empty()) grid.kappa = {config.attack.kappa};
            if (grid.init_c.empty()) grid.init_c = {config.attack.init_c};
            auto models = gbda::load_models(config, registry);
            auto examples = gbda::ingest_dataset(config.dataset_path, config.dataset_format, models.labels);
            auto inputs = gbda::prepare_inputs(examples, models, config.attack_segment);
            auto table = gbda::run_sweep(config, models, inputs, grid);
            if (sweep_out.empty()) {
                table.write(std::cout);
            } else {
                std::ofstream out(sweep_out);
                if (!out) {
                    throw gbda::ConfigError("cannot write '" + sweep_out + "'");
                }
                table.write(out);
            }
        } else if (*train) {
            return train_reference(train_dir, train_seed, train_classes, train_size, test_size, train_arch);
        } else if (*idf) {
            return compute_idf_table(idf_models, idf_corpus, idf_out);
        }
    } catch (const gbda::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const gbda::InvalidInput& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 2;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

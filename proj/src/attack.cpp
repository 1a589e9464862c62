#include "gbda/attack.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <ostream>

namespace gbda {

ThetaMatrix initialize_theta(const TokenSequence& x, const Vocabulary& vocab, double init_c,
                             const std::set<std::size_t>& extra_frozen)
{
    if (x.vocab_size() != vocab.size()) {
        throw InvalidInput("input sequence was encoded against a different vocabulary");
    }
    ThetaMatrix theta;
    theta.values = Matrix::Zero(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(vocab.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        theta.values(static_cast<Eigen::Index>(i), x[i]) = init_c;
        if (vocab.is_special(x[i]) || extra_frozen.count(i) != 0) {
            theta.frozen.emplace(i, x[i]);
        }
    }
    return theta;
}

NonFiniteLoss::NonFiniteLoss(std::size_t iteration, const LossBreakdown& loss)
    : std::runtime_error("non-finite loss at iteration " + std::to_string(iteration) + " (adversarial "
                         + std::to_string(loss.adversarial) + ", fluency " + std::to_string(loss.fluency)
                         + ", similarity " + std::to_string(loss.similarity) + ")"),
      iteration_(iteration)
{
}

double temperature_at(const AttackConfig& config, std::size_t iteration)
{
    if (!config.final_temperature || config.num_iterations <= 1) {
        return config.temperature;
    }
    double t = static_cast<double>(iteration) / static_cast<double>(config.num_iterations - 1);
    return config.temperature + t * (*config.final_temperature - config.temperature);
}

OptimizeResult optimize(const TokenSequence& x, ClassId label, const ObjectiveModels& models,
                        const AttackConfig& config, Rng& rng, const IdfWeights& idf, ThetaMatrix initial_theta)
{
    config.validate();
    if (initial_theta.length() != x.size()) {
        throw InvalidInput("theta length differs from the input");
    }
    check_vocabularies(models, initial_theta.vocab_size());

    OptimizeResult result{std::move(initial_theta), {}};
    ThetaMatrix& theta = result.theta;
    OptimizerState adam(theta.values.rows(), theta.values.cols(), config.learning_rate, config.beta1, config.beta2,
                        config.epsilon);
    std::vector<GumbelSample> batch(config.batch_size);

    for (std::size_t it = 0; it < config.num_iterations; ++it) {
        double temperature = temperature_at(config, it);
        for (auto& sample : batch) {
            sample = sample_gumbel_softmax(theta, temperature, rng);
        }
        auto value = combined_objective(theta, batch, models, x, label, idf, config);
        if (!std::isfinite(value.loss.total) || !value.gradient.allFinite()) {
            throw NonFiniteLoss(it, value.loss);
        }
        for (const auto& [row, token] : theta.frozen) {
            value.gradient.row(static_cast<Eigen::Index>(row)).setZero();
        }
        Matrix before_frozen = theta.values;
        adam.apply(theta.values, value.gradient);
        for (const auto& [row, token] : theta.frozen) {
            auto r = static_cast<Eigen::Index>(row);
            theta.values.row(r) = before_frozen.row(r);
        }
        result.traces.loss.push_back(value.loss);
        result.traces.entropy.push_back(mean_entropy(theta));
    }
    return result;
}

OptimizeResult optimize(const TokenSequence& x, ClassId label, const ObjectiveModels& models, const Vocabulary& vocab,
                        const AttackConfig& config, Rng& rng)
{
    return optimize(x, label, models, config, rng, IdfWeights::uniform(x.size()),
                    initialize_theta(x, vocab, config.init_c));
}

TraceReport loss_traces_summary(const OptimizeTraces& traces)
{
    if (traces.loss.empty()) {
        throw InvalidInput("no traces recorded");
    }
    if (traces.loss.size() != traces.entropy.size()) {
        throw InvalidInput("loss and entropy traces have different lengths");
    }
    TraceReport report;
    for (std::size_t i = 0; i < traces.loss.size(); ++i) {
        report.rows.push_back({i, traces.loss[i], traces.entropy[i]});
    }
    return report;
}

void TraceReport::write_tsv(std::ostream& out) const
{
    out << "iteration\tadversarial\tfluency\tsimilarity\ttotal\tentropy\n";
    for (const auto& row : rows) {
        out << row.iteration << '\t' << row.loss.adversarial << '\t' << row.loss.fluency << '\t'
            << row.loss.similarity << '\t' << row.loss.total << '\t' << row.entropy << '\n';
    }
}

// ---- theta store ------------------------------------------------------------

namespace {
ThetaRecord parse_theta_record(const nlohmann::json& j);
}

std::string theta_record_to_json(const ThetaRecord& record)
{
    const Matrix& v = record.theta.values;
    nlohmann::json frozen = nlohmann::json::array();
    for (const auto& [row, token] : record.theta.frozen) {
        frozen.push_back({row, token});
    }
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        for (Eigen::Index j = 0; j < v.cols(); ++j) {
            values.push_back(v(i, j));
        }
    }
    nlohmann::json j = {
        {"id", record.id},
        {"n", v.rows()},
        {"V", v.cols()},
        {"frozen", frozen},
        {"config_hash", record.config_hash},
        {"label", record.label},
        {"original", record.original.ids()},
        {"values", values},
    };
    return j.dump();
}

ThetaRecord theta_record_from_json(std::string_view line)
{
    try {
        return parse_theta_record(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed theta record: ") + e.what());
    }
}

namespace {

ThetaRecord parse_theta_record(const nlohmann::json& j)
{
    ThetaRecord record;
    record.id = j.at("id").get<std::string>();
    record.config_hash = j.at("config_hash").get<std::string>();
    record.label = j.at("label").get<ClassId>();
    auto n = j.at("n").get<Eigen::Index>();
    auto vocab = j.at("V").get<Eigen::Index>();
    auto values = j.at("values").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != n * vocab) {
        throw InvalidInput("theta record '" + record.id + "' has " + std::to_string(values.size())
                           + " values, expected n * V");
    }
    record.theta.values.resize(n, vocab);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index c = 0; c < vocab; ++c) {
            record.theta.values(i, c) = values[static_cast<std::size_t>(i * vocab + c)];
        }
    }
    for (const auto& pair : j.at("frozen")) {
        record.theta.frozen.emplace(pair.at(0).get<std::size_t>(), pair.at(1).get<TokenId>());
    }
    record.original = TokenSequence(j.at("original").get<std::vector<TokenId>>(), static_cast<std::size_t>(vocab));
    return record;
}

} // namespace

void write_theta_store(const std::string& path, const std::vector<ThetaRecord>& records)
{
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write theta store '" + path + "'");
    }
    for (const auto& r : records) {
        out << theta_record_to_json(r) << '\n';
    }
}

std::vector<ThetaRecord> read_theta_store(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read theta store '" + path + "'");
    }
    std::vector<ThetaRecord> records;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        try {
            records.push_back(theta_record_from_json(line));
        } catch (const InvalidInput& e) {
            throw InvalidInput(path + " line " + std::to_string(number) + ": " + e.what());
        }
    }
    return records;
}

} // namespace gbda

#pragma once

#include "gbda/objectives.hpp"
#include "gbda/optimizer.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace gbda {

/// Theta is zero except theta(i, x_i) = init_c. Rows holding special tokens
/// (and any extra positions) are frozen to their token.
ThetaMatrix initialize_theta(const TokenSequence& x, const Vocabulary& vocab, double init_c,
                             const std::set<std::size_t>& extra_frozen = {});

struct OptimizeTraces {
    std::vector<LossBreakdown> loss;
    /// Mean row entropy of softmax(theta) after each step.
    std::vector<double> entropy;
};

struct OptimizeResult {
    ThetaMatrix theta;
    OptimizeTraces traces;
};

/// Raised when the objective turns non-finite; carries the iteration index.
class NonFiniteLoss : public std::runtime_error {
public:
    NonFiniteLoss(std::size_t iteration, const LossBreakdown& loss);
    std::size_t iteration() const { return iteration_; }

private:
    std::size_t iteration_;
};

/// Temperature used at a given iteration (linear anneal when configured).
double temperature_at(const AttackConfig& config, std::size_t iteration);

/// Runs config.num_iterations Adam steps on the combined objective, drawing a
/// fresh batch of Gumbel-softmax samples each step.
OptimizeResult optimize(const TokenSequence& x, ClassId label, const ObjectiveModels& models,
                        const AttackConfig& config, Rng& rng, const IdfWeights& idf,
                        ThetaMatrix initial_theta);

/// Convenience overload: initializes theta from x and uses uniform idf weights.
OptimizeResult optimize(const TokenSequence& x, ClassId label, const ObjectiveModels& models, const Vocabulary& vocab,
                        const AttackConfig& config, Rng& rng);

struct TraceRow {
    std::size_t iteration = 0;
    LossBreakdown loss;
    double entropy = 0.0;
};

struct TraceReport {
    std::vector<TraceRow> rows;

    /// Tab-separated with header: iteration adversarial fluency similarity total entropy.
    void write_tsv(std::ostream& out) const;
};

/// Throws InvalidInput when the traces are empty or misaligned.
TraceReport loss_traces_summary(const OptimizeTraces& traces);

// Theta checkpoints: one JSON object per line with header fields
// {id, n, V, frozen, config_hash} and a row-major "values" array.
struct ThetaRecord {
    std::string id;
    TokenSequence original;
    ClassId label = 0;
    ThetaMatrix theta;
    std::string config_hash;
};

std::string theta_record_to_json(const ThetaRecord& record);
ThetaRecord theta_record_from_json(std::string_view line);
void write_theta_store(const std::string& path, const std::vector<ThetaRecord>& records);
std::vector<ThetaRecord> read_theta_store(const std::string& path);

} // namespace gbda

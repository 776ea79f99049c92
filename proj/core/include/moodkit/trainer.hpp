#ifndef MOODKIT_TRAINER_HPP
#define MOODKIT_TRAINER_HPP

#include <array>
#include <map>
#include <optional>
#include <string>

#include "moodkit/a2d.hpp"
#include "moodkit/metrics.hpp"
#include "moodkit/model.hpp"
#include "moodkit/npmix.hpp"
#include "moodkit/types.hpp"

namespace moodkit::trainer {

enum class Mode { baseline, a2d, a2d_npmix };

const char* to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct TrainConfig {
    int epochs = 50;
    int batch_size = 16;
    double lr = 1e-4;
    a2d::A2DConfig a2d;                       // gamma, metric
    std::optional<npmix::NpMixConfig> npmix;  // engaged by mode a2d_npmix
    std::optional<double> logitnorm_tau;      // LogitNorm CE when set
    std::uint64_t seed = 7;
    int hidden_dim = 64;
    int embed_dim = 32;

    void validate() const;

    /// Copy with the loss family forced to the given mode: baseline clears
    /// gamma and outlier synthesis, a2d clears synthesis only.
    TrainConfig with_mode(Mode mode) const;
};

struct EpochLog {
    int epoch = 0;
    double total = 0.0;
    double cls = 0.0;
    double discr = 0.0;
    double discr_syn = 0.0;
    double ent = 0.0;
    double val_id_acc = 0.0;
    double wall_seconds = 0.0;  // serialized to the timestamp sidecar only
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    int best_epoch = -1;  // -1 when epochs == 0
};

struct TrainResult {
    model::MultimodalModel model;
    TrainLog log;
};

/// Seeded training loop: per-epoch shuffle, Eq.-driven loss assembly
/// (with per-epoch prototype refresh and per-batch synthesis when outlier
/// synthesis is on), Adam steps, best-validation-accuracy checkpoint
/// selection (ties keep the earlier epoch).
TrainResult train(const LabeledBatch& data, const TrainConfig& cfg);

struct ComparisonBlock {
    Mode mode = Mode::baseline;
    std::map<scores::Kind, metrics::EvalReport> reports;
    double l_id = 0.0;
    double l_ood = 0.0;
    TrainLog log;
};

struct ComparisonRecord {
    std::array<ComparisonBlock, 3> blocks;  // baseline, a2d, a2d+npmix

    const ComparisonBlock& baseline() const { return blocks[0]; }
};

/// Trains the three loss families from the same initialization seed and
/// evaluates every scorer kind on each resulting checkpoint.
ComparisonRecord train_baseline_vs_a2d(const LabeledBatch& data, const TrainConfig& base,
                                       const scores::Config& scorer_cfg);

}  // namespace moodkit::trainer

#endif  // MOODKIT_TRAINER_HPP

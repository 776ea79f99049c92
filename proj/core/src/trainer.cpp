#include "moodkit/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "moodkit/backward.hpp"
#include "moodkit/error.hpp"

namespace moodkit::trainer {

namespace {

// Fixed rng substreams so the three comparison arms share initialization and
// batch order while consuming synthesis draws independently.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kNpmixStream = 3;

std::vector<FeatureMatrix> gather_rows(const std::vector<FeatureMatrix>& mods,
                                       const std::vector<Eigen::Index>& rows, std::size_t begin, std::size_t end) {
    std::vector<FeatureMatrix> out;
    out.reserve(mods.size());
    for (const auto& m : mods) {
        FeatureMatrix sel(static_cast<Eigen::Index>(end - begin), m.cols());
        for (std::size_t i = begin; i < end; ++i) {
            sel.row(static_cast<Eigen::Index>(i - begin)) = m.row(rows[i]);
        }
        out.push_back(std::move(sel));
    }
    return out;
}

}  // namespace

const char* to_string(Mode m) {
    switch (m) {
        case Mode::baseline: return "baseline";
        case Mode::a2d: return "a2d";
        case Mode::a2d_npmix: return "a2d+npmix";
    }
    throw ArgumentError("unknown mode value");
}

Mode mode_from_string(const std::string& s) {
    if (s == "baseline") return Mode::baseline;
    if (s == "a2d") return Mode::a2d;
    if (s == "a2d+npmix" || s == "a2d_npmix") return Mode::a2d_npmix;
    throw ArgumentError("unknown mode '" + s + "' (expected baseline|a2d|a2d+npmix)");
}

void TrainConfig::validate() const {
    if (epochs < 0) throw ArgumentError("train.epochs must be nonnegative");
    if (batch_size < 1) throw ArgumentError("train.batch_size must be >= 1");
    if (!(lr > 0.0)) throw ArgumentError("train.lr must be positive");
    if (hidden_dim < 1 || embed_dim < 1) throw ArgumentError("train.model dims must be >= 1");
    if (logitnorm_tau && !(*logitnorm_tau > 0.0)) throw ArgumentError("train.logitnorm_tau must be positive");
    a2d.validate();
}

TrainConfig TrainConfig::with_mode(Mode mode) const {
    TrainConfig out = *this;
    switch (mode) {
        case Mode::baseline:
            out.a2d.gamma = 0.0;
            out.a2d.use_npmix = false;
            out.npmix.reset();
            break;
        case Mode::a2d:
            out.a2d.use_npmix = false;
            out.npmix.reset();
            break;
        case Mode::a2d_npmix:
            out.a2d.use_npmix = true;
            if (!out.npmix) out.npmix.emplace();
            break;
    }
    return out;
}

TrainResult train(const LabeledBatch& data, const TrainConfig& cfg) {
    cfg.validate();
    data.validate();
    if (data.modality_count() < 2) {
        throw ArgumentError("train: multimodal training requires at least 2 modalities");
    }

    const auto train_rows = data.rows_with_split(Split::id_train);
    const auto val_rows = data.rows_with_split(Split::id_val);
    if (train_rows.empty()) throw ArgumentError("train: split id_train is empty");
    if (val_rows.empty()) throw ArgumentError("train: split id_val is empty");

    const bool use_npmix = cfg.a2d.use_npmix || cfg.npmix.has_value();
    npmix::NpMixConfig npmix_cfg = cfg.npmix.value_or(npmix::NpMixConfig{});
    if (use_npmix) {
        npmix_cfg.validate(data.class_count);
    }

    model::ModelDims dims;
    dims.modality_dims = data.modality_dims();
    dims.hidden_dim = cfg.hidden_dim;
    dims.embed_dim = cfg.embed_dim;
    dims.class_count = data.class_count;

    SeededRng master(cfg.seed);
    SeededRng init_rng = master.derive(kInitStream);
    SeededRng shuffle_rng = master.derive(kShuffleStream);
    SeededRng npmix_rng = master.derive(kNpmixStream);

    model::MultimodalModel net = model::MultimodalModel::initialize(dims, init_rng);
    model::AdamState adam = model::AdamState::init(net);

    a2d::LossSpec spec;
    spec.a2d = cfg.a2d;
    spec.a2d.modality_count = data.modality_count();
    spec.a2d.use_npmix = use_npmix;
    spec.logitnorm_tau = cfg.logitnorm_tau;

    const LabeledBatch train_split = data.subset(train_rows);
    const LabeledBatch val_split = data.subset(val_rows);

    TrainResult result{net, {}};
    double best_acc = -1.0;

    std::vector<Eigen::Index> order(train_rows.size());
    std::iota(order.begin(), order.end(), Eigen::Index(0));

    std::vector<Eigen::Index> local(order.size());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();

        shuffle_rng.shuffle(order);
        for (std::size_t i = 0; i < order.size(); ++i) local[i] = order[i];

        // Epoch-level prototype refresh over the full ID training pool.
        npmix::PrototypeSet protos;
        FeatureMatrix pool_joint;
        npmix::SamplePool pool;
        if (use_npmix) {
            pool_joint = model::forward(net, train_split).joint_embedding();
            protos = npmix::compute_prototypes(pool_joint, train_split.labels, data.class_count);
            pool.joint = &pool_joint;
            pool.labels = &train_split.labels;
        }

        a2d::LossComponents epoch_mean;
        std::size_t batch_count = 0;

        for (std::size_t begin = 0; begin < local.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(local.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            const auto mods = gather_rows(train_split.modalities, local, begin, end);
            std::vector<int> labels;
            labels.reserve(end - begin);
            for (std::size_t i = begin; i < end; ++i) {
                labels.push_back(train_split.labels[local[i]]);
            }

            FeatureMatrix syn;
            const FeatureMatrix* syn_ptr = nullptr;
            if (use_npmix) {
                const FeatureMatrix batch_joint = model::forward(net, mods).joint_embedding();
                const int n_out = npmix_cfg.outliers_per_batch > 0 ? npmix_cfg.outliers_per_batch
                                                                   : static_cast<int>(end - begin);
                syn = npmix::npmix_synthesize(batch_joint, labels, protos, npmix_cfg, npmix_rng, &pool, n_out)
                          .joint_embeddings;
                syn_ptr = &syn;
            }

            const model::BackwardResult step = model::backward(net, mods, labels, spec, syn_ptr);
            if (!std::isfinite(step.loss.total)) {
                throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(batch_count));
            }
            model::adam_step(net, step.grads, adam, cfg.lr);

            epoch_mean.total += step.loss.total;
            epoch_mean.cls += step.loss.cls;
            epoch_mean.discr += step.loss.discr;
            epoch_mean.discr_syn += step.loss.discr_syn;
            epoch_mean.ent += step.loss.ent;
            ++batch_count;
        }

        const double inv = 1.0 / static_cast<double>(batch_count);
        EpochLog log;
        log.epoch = epoch;
        log.total = epoch_mean.total * inv;
        log.cls = epoch_mean.cls * inv;
        log.discr = epoch_mean.discr * inv;
        log.discr_syn = epoch_mean.discr_syn * inv;
        log.ent = epoch_mean.ent * inv;
        log.val_id_acc = metrics::id_accuracy(model::forward(net, val_split), val_split.labels);
        log.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
        result.log.epochs.push_back(log);

        if (log.val_id_acc > best_acc) {
            best_acc = log.val_id_acc;
            result.model = net;
            result.log.best_epoch = epoch;
        }
    }

    if (cfg.epochs == 0) {
        result.model = net;  // initialized parameters, empty log
    }
    return result;
}

ComparisonRecord train_baseline_vs_a2d(const LabeledBatch& data, const TrainConfig& base,
                                       const scores::Config& scorer_cfg) {
    ComparisonRecord record;
    const std::array<Mode, 3> modes = {Mode::baseline, Mode::a2d, Mode::a2d_npmix};

    const LabeledBatch id_train = data.subset(Split::id_train);
    const LabeledBatch id_test = data.subset(Split::id_test);
    const LabeledBatch ood_test = data.subset(Split::ood_test);
    if (id_test.rows() == 0 || ood_test.rows() == 0) {
        throw ArgumentError("train_baseline_vs_a2d: id_test and ood_test must be nonempty");
    }

    for (std::size_t b = 0; b < modes.size(); ++b) {
        const TrainConfig cfg = base.with_mode(modes[b]);  // same seed: shared initialization
        TrainResult trained = train(data, cfg);

        ComparisonBlock block;
        block.mode = modes[b];
        block.log = std::move(trained.log);

        const model::PredictionBundle train_bundle = model::forward(trained.model, id_train);
        for (scores::Kind kind : scores::all_kinds()) {
            const scores::ScorerState state = scores::fit(kind, train_bundle, id_train.labels, trained.model,
                                                          scorer_cfg);
            block.reports[kind] = metrics::evaluate(trained.model, kind, state, scorer_cfg, id_test, ood_test);
        }
        block.l_id = block.reports.begin()->second.l_id;
        block.l_ood = block.reports.begin()->second.l_ood;
        record.blocks[b] = std::move(block);
    }
    return record;
}

}  // namespace moodkit::trainer

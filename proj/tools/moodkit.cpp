#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "moodkit/backward.hpp"
#include "moodkit/checkpoint.hpp"
#include "moodkit/data_io.hpp"
#include "moodkit/error.hpp"
#include "moodkit/metrics.hpp"
#include "moodkit/npmix.hpp"
#include "moodkit/reporting.hpp"
#include "moodkit/run_config.hpp"
#include "moodkit/trainer.hpp"

namespace fs = std::filesystem;
using namespace moodkit;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string data_path;
    std::string checkpoint_path;
    std::string out_dir;
    std::string scorers;
    std::string mode;
    std::int64_t seed = -1;  // -1: keep the config seed
};

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out << content;
    if (!out) {
        throw IoError("write failed for '" + path.string() + "'");
    }
}

fs::path prepare_out_dir(const CommonArgs& args, const config::RunConfig& cfg) {
    std::string dir = args.out_dir;
    if (dir.empty() && cfg.out_dir) dir = *cfg.out_dir;
    if (dir.empty()) {
        throw ArgumentError("an output directory is required (--out or config out_dir)");
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    }
    return dir;
}

config::RunConfig load_config(const CommonArgs& args) {
    config::RunConfig cfg;
    if (!args.config_path.empty()) {
        cfg = config::load_run_config(args.config_path);
    } else {
        cfg.scorers = scores::all_kinds();
    }
    if (args.seed >= 0) {
        cfg.synth.seed = static_cast<std::uint64_t>(args.seed);
        cfg.train.seed = static_cast<std::uint64_t>(args.seed);
    }
    if (!args.mode.empty()) {
        cfg.mode = trainer::mode_from_string(args.mode);
    }
    if (!args.scorers.empty()) {
        cfg.scorers = config::parse_scorer_list(args.scorers);
    }
    return cfg;
}

/// Timestamps (and anything else that varies between identical runs) live
/// only in this sidecar so every other artifact is byte-reproducible.
void write_run_meta(const fs::path& dir, const std::string& command, const std::string& started,
                    nlohmann::json extra = {}) {
    nlohmann::json j{{"command", command}, {"started_at", started}, {"finished_at", now_iso8601()}};
    if (!extra.is_null()) {
        for (auto& [k, v] : extra.items()) j[k] = v;
    }
    write_text_file(dir / "run_meta.json", j.dump(2) + "\n");
}

int worker_threads(std::size_t jobs) {
    int threads = 1;
    if (const char* env = std::getenv("MOODKIT_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) {
            throw ArgumentError("MOODKIT_THREADS must be a positive integer, got '" + std::string(env) + "'");
        }
        threads = static_cast<int>(v);
    }
    return std::min<int>(threads, static_cast<int>(jobs));
}

LabeledBatch load_data(const CommonArgs& args) {
    if (args.data_path.empty()) {
        throw ArgumentError("--data manifest path is required");
    }
    return io::load_manifest(args.data_path);
}

int cmd_gen_data(const CommonArgs& args) {
    const config::RunConfig cfg = load_config(args);
    const fs::path out = prepare_out_dir(args, cfg);
    const std::string started = now_iso8601();

    const LabeledBatch batch = io::generate_synthetic(cfg.synth);
    io::export_manifest(batch, out);
    write_run_meta(out, "gen-data", started);

    const auto count = [&](Split s) { return batch.rows_with_split(s).size(); };
    std::printf("dataset: %lld samples, %d ID classes + %d OOD classes\n",
                static_cast<long long>(batch.rows()), cfg.synth.id_classes, cfg.synth.near_ood_classes);
    std::printf("splits: id_train=%zu id_val=%zu id_test=%zu ood_test=%zu\n", count(Split::id_train),
                count(Split::id_val), count(Split::id_test), count(Split::ood_test));
    std::printf("modalities: %d, dims:", batch.modality_count());
    for (int d : batch.modality_dims()) std::printf(" %d", d);
    std::printf("\nmanifest: %s\n", (out / "manifest.json").c_str());
    return kExitOk;
}

int cmd_train(const CommonArgs& args) {
    const config::RunConfig cfg = load_config(args);
    const fs::path out = prepare_out_dir(args, cfg);
    const std::string started = now_iso8601();

    const LabeledBatch data = load_data(args);
    const trainer::TrainConfig train_cfg = cfg.train.with_mode(cfg.mode);
    const trainer::TrainResult result = trainer::train(data, train_cfg);

    for (const auto& e : result.log.epochs) {
        std::printf("epoch %3d  total %.6f  cls %.6f  discr %.6f  discr_syn %.6f  ent %.6f  val_acc %.4f\n",
                    e.epoch, e.total, e.cls, e.discr, e.discr_syn, e.ent, e.val_id_acc);
    }
    std::printf("best epoch: %d\n", result.log.best_epoch);

    io::save_checkpoint(result.model, out / "checkpoint.json");
    write_text_file(out / "train_log.jsonl", reporting::train_log_jsonl(result.log));

    nlohmann::json wall = nlohmann::json::array();
    for (const auto& e : result.log.epochs) wall.push_back(e.wall_seconds);
    write_run_meta(out, "train", started,
                   {{"best_epoch", result.log.best_epoch}, {"wall_seconds_per_epoch", wall}});
    return kExitOk;
}

struct ScorerOutcome {
    scores::Kind kind;
    metrics::EvalReport report;
    scores::ScoreVector id_scores;
    scores::ScoreVector ood_scores;
};

int cmd_eval(const CommonArgs& args) {
    const config::RunConfig cfg = load_config(args);
    const fs::path out = prepare_out_dir(args, cfg);
    const std::string started = now_iso8601();
    if (args.checkpoint_path.empty()) {
        throw ArgumentError("--checkpoint path is required");
    }

    const model::MultimodalModel net = io::load_checkpoint(args.checkpoint_path);
    const LabeledBatch data = load_data(args);
    const LabeledBatch id_train = data.subset(Split::id_train);
    const LabeledBatch id_test = data.subset(Split::id_test);
    const LabeledBatch ood_test = data.subset(Split::ood_test);
    if (id_train.rows() == 0 || id_test.rows() == 0 || ood_test.rows() == 0) {
        throw ArgumentError("eval: id_train, id_test and ood_test splits must be nonempty");
    }

    const model::PredictionBundle train_bundle = model::forward(net, id_train);
    const model::PredictionBundle id_bundle = model::forward(net, id_test);
    const model::PredictionBundle ood_bundle = model::forward(net, ood_test);
    const double id_acc = metrics::id_accuracy(id_bundle, id_test.labels);
    const double l_id = a2d::mean_discrepancy(id_bundle);
    const double l_ood = a2d::mean_discrepancy(ood_bundle);

    std::vector<scores::Kind> kinds = cfg.scorers;
    std::vector<ScorerOutcome> outcomes(kinds.size());

    // Scorers are independent; fitting and scoring read shared const state.
    const int threads = worker_threads(kinds.size());
    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::size_t next = 0;
    std::mutex next_mutex;

    auto work = [&]() {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> lock(next_mutex);
                if (next >= kinds.size()) return;
                i = next++;
            }
            try {
                ScorerOutcome& o = outcomes[i];
                o.kind = kinds[i];
                const scores::ScorerState state =
                    scores::fit(o.kind, train_bundle, id_train.labels, net, cfg.scorer_config);
                o.id_scores = scores::score_batch(o.kind, id_bundle, state, net, cfg.scorer_config);
                o.ood_scores = scores::score_batch(o.kind, ood_bundle, state, net, cfg.scorer_config);
                o.report.scorer_kind = o.kind;
                o.report.fpr95 = metrics::fpr_at_tpr(o.id_scores.values, o.ood_scores.values);
                o.report.auroc = metrics::auroc(o.id_scores.values, o.ood_scores.values);
                o.report.id_acc = id_acc;
                o.report.l_id = l_id;
                o.report.l_ood = l_ood;
                o.report.n_id_test = static_cast<std::int64_t>(id_test.rows());
                o.report.n_ood_test = static_cast<std::int64_t>(ood_test.rows());
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    if (threads <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    std::vector<metrics::EvalReport> reports;
    for (const auto& o : outcomes) {
        const std::string name = scores::to_string(o.kind);
        write_text_file(out / ("report_" + name + ".json"), metrics::report_to_json(o.report).dump(2) + "\n");
        reporting::write_scores_csv(out / ("scores_" + name + ".csv"), id_test, ood_test, o.id_scores.values,
                                    o.ood_scores.values, o.kind);
        reporting::write_histogram_csv(out / ("hist_" + name + ".csv"), o.id_scores.values, o.ood_scores.values);
        reports.push_back(o.report);
    }
    const std::string table = reporting::eval_table_markdown(reports);
    write_text_file(out / "report_table.md", table);
    std::fputs(table.c_str(), stdout);
    std::printf("\nl_ID = %.4f, l_OOD = %.4f\n", l_id, l_ood);

    write_run_meta(out, "eval", started);
    return kExitOk;
}

int cmd_compare(const CommonArgs& args) {
    const config::RunConfig cfg = load_config(args);
    const fs::path out = prepare_out_dir(args, cfg);
    const std::string started = now_iso8601();

    const LabeledBatch data = load_data(args);
    const trainer::ComparisonRecord record = trainer::train_baseline_vs_a2d(data, cfg.train, cfg.scorer_config);

    const std::string table = reporting::compare_table_markdown(record);
    write_text_file(out / "compare_table.md", table);
    write_text_file(out / "compare.json", reporting::comparison_to_json(record).dump(2) + "\n");
    std::fputs(table.c_str(), stdout);

    write_run_meta(out, "compare", started);
    return kExitOk;
}

int cmd_synth_inspect(const CommonArgs& args) {
    const config::RunConfig cfg = load_config(args);
    const fs::path out = prepare_out_dir(args, cfg);
    const std::string started = now_iso8601();

    const LabeledBatch data = load_data(args);
    const LabeledBatch id_train = data.subset(Split::id_train);
    if (id_train.rows() == 0) {
        throw ArgumentError("synth-inspect: id_train split is empty");
    }

    // With a checkpoint the mix runs in the model's joint embedding space,
    // otherwise directly on the concatenated input features.
    FeatureMatrix joint;
    if (!args.checkpoint_path.empty()) {
        const model::MultimodalModel net = io::load_checkpoint(args.checkpoint_path);
        joint = model::forward(net, id_train).joint_embedding();
    } else {
        joint = concat_modalities(id_train);
    }

    npmix::NpMixConfig npmix_cfg = cfg.train.npmix.value_or(npmix::NpMixConfig{});
    npmix_cfg.validate(data.class_count);
    const int n_out = npmix_cfg.outliers_per_batch > 0 ? npmix_cfg.outliers_per_batch : 256;

    const npmix::PrototypeSet protos = npmix::compute_prototypes(joint, id_train.labels, data.class_count);
    SeededRng rng(cfg.train.seed);
    npmix::SamplePool pool{&joint, &id_train.labels};
    const npmix::SynthesizedBatch batch =
        npmix::npmix_synthesize(joint, id_train.labels, protos, npmix_cfg, rng, &pool, n_out);

    io::write_feature_csv(batch.joint_embeddings, out / "synth_embeddings.csv");
    std::string prov = "row,class_c,class_s,index_1,pool_1,index_2,pool_2,lambda\n";
    for (std::size_t i = 0; i < batch.sources.size(); ++i) {
        const auto& s = batch.sources[i];
        prov += std::to_string(i) + "," + std::to_string(s.class_c) + "," + std::to_string(s.class_s) + "," +
                std::to_string(s.index_1) + "," + std::to_string(s.from_pool_1 ? 1 : 0) + "," +
                std::to_string(s.index_2) + "," + std::to_string(s.from_pool_2 ? 1 : 0) + "," +
                io::format_double(s.lambda) + "\n";
    }
    write_text_file(out / "synth_provenance.csv", prov);
    write_run_meta(out, "synth-inspect", started);
    std::printf("synthesized %d outliers into %s\n", n_out, out.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"moodkit: multimodal OOD detection toolkit"};
    app.require_subcommand(1);

    CommonArgs args;
    const auto add_common = [&](CLI::App* cmd, bool data, bool checkpoint) {
        cmd->add_option("--config", args.config_path, "JSON run configuration");
        cmd->add_option("--out", args.out_dir, "output directory");
        cmd->add_option("--seed", args.seed, "override the config seed");
        if (data) cmd->add_option("--data", args.data_path, "dataset manifest.json");
        if (checkpoint) cmd->add_option("--checkpoint", args.checkpoint_path, "model checkpoint.json");
    };

    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic multimodal dataset");
    add_common(gen, false, false);

    CLI::App* train = app.add_subcommand("train", "train the multimodal classifier");
    add_common(train, true, false);
    train->add_option("--mode", args.mode, "baseline|a2d|a2d+npmix");

    CLI::App* eval = app.add_subcommand("eval", "fit scorers and evaluate OOD detection");
    add_common(eval, true, true);
    eval->add_option("--scorers", args.scorers, "comma-separated scorer list");

    CLI::App* compare = app.add_subcommand("compare", "three-way baseline / a2d / a2d+npmix comparison");
    add_common(compare, true, false);

    CLI::App* synth = app.add_subcommand("synth-inspect", "dump a synthesized outlier batch to CSV");
    add_common(synth, true, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(args);
        if (train->parsed()) return cmd_train(args);
        if (eval->parsed()) return cmd_eval(args);
        if (compare->parsed()) return cmd_compare(args);
        if (synth->parsed()) return cmd_synth_inspect(args);
        return kExitConfig;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 1;
    }
}

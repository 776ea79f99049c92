#ifndef MOODKIT_REPORTING_HPP
#define MOODKIT_REPORTING_HPP

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "moodkit/metrics.hpp"
#include "moodkit/trainer.hpp"
#include "moodkit/types.hpp"

namespace moodkit::reporting {

/// FPR95/AUROC/ID ACC columns as percent with two decimals, one row per
/// scorer, rows sorted by scorer name for diff-stability.
std::string eval_table_markdown(const std::vector<metrics::EvalReport>& reports);

/// Three blocks (baseline / a2d / a2d+npmix) with per-cell deltas against the
/// baseline block and the discrepancy means per block. Negative FPR95 deltas
/// and positive AUROC / ID ACC deltas are improvements.
std::string compare_table_markdown(const trainer::ComparisonRecord& record);

nlohmann::json comparison_to_json(const trainer::ComparisonRecord& record);

/// Cell grid of every markdown table row in the text (header rows included,
/// separator rows skipped); for golden-file round-trips.
std::vector<std::vector<std::string>> parse_markdown_tables(const std::string& text);

void write_scores_csv(const std::filesystem::path& path, const LabeledBatch& id_test,
                      const LabeledBatch& ood_test, const std::vector<double>& id_scores,
                      const std::vector<double>& ood_scores, scores::Kind kind);

/// Fixed 50-bin histogram over the pooled score range; bin counts per split
/// sum to the split sizes.
void write_histogram_csv(const std::filesystem::path& path, const std::vector<double>& id_scores,
                         const std::vector<double>& ood_scores, int bins = 50);

/// One JSON object per epoch; wall-clock times are excluded (they live in
/// the run_meta sidecar so artifacts stay byte-identical across reruns).
std::string train_log_jsonl(const trainer::TrainLog& log);

}  // namespace moodkit::reporting

#endif  // MOODKIT_REPORTING_HPP

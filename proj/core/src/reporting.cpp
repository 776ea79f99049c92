#include "moodkit/reporting.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "moodkit/data_io.hpp"
#include "moodkit/error.hpp"

namespace moodkit::reporting {

namespace {

std::string pct(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * fraction);
    return buf;
}

std::string signed_pct(double fraction_delta) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%+.2f", 100.0 * fraction_delta);
    return buf;
}

std::string block_title(trainer::Mode mode) {
    switch (mode) {
        case trainer::Mode::baseline: return "Without A2D training";
        case trainer::Mode::a2d: return "With A2D training";
        case trainer::Mode::a2d_npmix: return "With A2D training and NP-Mix outlier synthesis";
    }
    return "";
}

std::vector<metrics::EvalReport> sorted_reports(const std::map<scores::Kind, metrics::EvalReport>& reports) {
    std::vector<metrics::EvalReport> out;
    out.reserve(reports.size());
    for (const auto& [kind, report] : reports) {
        out.push_back(report);
    }
    std::sort(out.begin(), out.end(), [](const metrics::EvalReport& a, const metrics::EvalReport& b) {
        return std::string(scores::to_string(a.scorer_kind)) < scores::to_string(b.scorer_kind);
    });
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out << content;
    if (!out) {
        throw IoError("write failed for '" + path.string() + "'");
    }
}

}  // namespace

std::string eval_table_markdown(const std::vector<metrics::EvalReport>& reports) {
    std::vector<metrics::EvalReport> rows = reports;
    std::sort(rows.begin(), rows.end(), [](const metrics::EvalReport& a, const metrics::EvalReport& b) {
        return std::string(scores::to_string(a.scorer_kind)) < scores::to_string(b.scorer_kind);
    });
    std::ostringstream out;
    out << "| Scorer | FPR95↓ | AUROC↑ | ID ACC↑ |\n";
    out << "|---|---|---|---|\n";
    for (const auto& r : rows) {
        out << "| " << scores::to_string(r.scorer_kind) << " | " << pct(r.fpr95) << " | " << pct(r.auroc)
            << " | " << pct(r.id_acc) << " |\n";
    }
    return out.str();
}

std::string compare_table_markdown(const trainer::ComparisonRecord& record) {
    std::ostringstream out;
    const auto& base = record.baseline();
    out << "Deltas are against the baseline block; negative FPR95 and positive AUROC / ID ACC are improvements.\n";
    for (const auto& block : record.blocks) {
        out << "\n## " << block_title(block.mode) << "\n\n";
        out << "| Scorer | FPR95↓ | ΔFPR95 | AUROC↑ | ΔAUROC | ID ACC↑ | ΔID ACC |\n";
        out << "|---|---|---|---|---|---|---|\n";
        for (const auto& r : sorted_reports(block.reports)) {
            const auto& b = base.reports.at(r.scorer_kind);
            out << "| " << scores::to_string(r.scorer_kind) << " | " << pct(r.fpr95) << " | "
                << signed_pct(r.fpr95 - b.fpr95) << " | " << pct(r.auroc) << " | "
                << signed_pct(r.auroc - b.auroc) << " | " << pct(r.id_acc) << " | "
                << signed_pct(r.id_acc - b.id_acc) << " |\n";
        }
        char line[160];
        const double gap = block.l_ood - block.l_id;
        const double base_gap = base.l_ood - base.l_id;
        std::snprintf(line, sizeof(line),
                      "\nl_ID = %.4f, l_OOD = %.4f, l_OOD - l_ID = %.4f (Δ vs baseline %+.4f)\n", block.l_id,
                      block.l_ood, gap, gap - base_gap);
        out << line;
    }
    return out.str();
}

nlohmann::json comparison_to_json(const trainer::ComparisonRecord& record) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& block : record.blocks) {
        nlohmann::json reports;
        for (const auto& [kind, report] : block.reports) {
            reports[scores::to_string(kind)] = metrics::report_to_json(report);
        }
        blocks.push_back({
            {"mode", trainer::to_string(block.mode)},
            {"l_id", block.l_id},
            {"l_ood", block.l_ood},
            {"best_epoch", block.log.best_epoch},
            {"reports", reports},
        });
    }
    return nlohmann::json{{"blocks", blocks}};
}

std::vector<std::vector<std::string>> parse_markdown_tables(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty() || line.front() != '|') continue;
        std::vector<std::string> cells;
        std::string cell;
        // split on '|', trim spaces, drop the empty leading/trailing cells
        std::istringstream ls(line);
        bool separator = true;
        while (std::getline(ls, cell, '|')) {
            const auto begin = cell.find_first_not_of(' ');
            if (begin == std::string::npos) continue;
            const auto end = cell.find_last_not_of(' ');
            const std::string trimmed = cell.substr(begin, end - begin + 1);
            if (trimmed.find_first_not_of('-') != std::string::npos) separator = false;
            cells.push_back(trimmed);
        }
        if (!cells.empty() && !separator) {
            rows.push_back(std::move(cells));
        }
    }
    return rows;
}

void write_scores_csv(const std::filesystem::path& path, const LabeledBatch& id_test,
                      const LabeledBatch& ood_test, const std::vector<double>& id_scores,
                      const std::vector<double>& ood_scores, scores::Kind kind) {
    if (id_scores.size() != static_cast<std::size_t>(id_test.rows()) ||
        ood_scores.size() != static_cast<std::size_t>(ood_test.rows())) {
        throw StructuralError("write_scores_csv: scores do not align with batches");
    }
    std::string out = "sample_id,split,label,score,scorer_kind\n";
    const auto append = [&](const LabeledBatch& batch, const std::vector<double>& scores) {
        for (Eigen::Index i = 0; i < batch.rows(); ++i) {
            out += std::to_string(batch.sample_ids[i]);
            out += ',';
            out += to_string(batch.splits[i]);
            out += ',';
            out += std::to_string(batch.labels[i]);
            out += ',';
            out += io::format_double(scores[static_cast<std::size_t>(i)]);
            out += ',';
            out += scores::to_string(kind);
            out += '\n';
        }
    };
    append(id_test, id_scores);
    append(ood_test, ood_scores);
    write_text(path, out);
}

void write_histogram_csv(const std::filesystem::path& path, const std::vector<double>& id_scores,
                         const std::vector<double>& ood_scores, int bins) {
    if (bins < 1) {
        throw ArgumentError("write_histogram_csv: bins must be >= 1");
    }
    if (id_scores.empty() && ood_scores.empty()) {
        throw ArgumentError("write_histogram_csv: no scores");
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double s : id_scores) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    for (double s : ood_scores) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    if (hi <= lo) {
        hi = lo + 1.0;  // degenerate range: a single occupied bin
    }
    const double width = (hi - lo) / bins;
    std::vector<std::int64_t> id_count(bins, 0), ood_count(bins, 0);
    const auto bin_of = [&](double s) {
        auto b = static_cast<int>((s - lo) / width);
        if (b < 0) b = 0;
        if (b >= bins) b = bins - 1;  // the pooled maximum lands in the last bin
        return b;
    };
    for (double s : id_scores) id_count[bin_of(s)] += 1;
    for (double s : ood_scores) ood_count[bin_of(s)] += 1;

    std::string out = "bin,lo,hi,id_count,ood_count\n";
    for (int b = 0; b < bins; ++b) {
        out += std::to_string(b);
        out += ',';
        out += io::format_double(lo + b * width);
        out += ',';
        out += io::format_double(b + 1 == bins ? hi : lo + (b + 1) * width);
        out += ',';
        out += std::to_string(id_count[b]);
        out += ',';
        out += std::to_string(ood_count[b]);
        out += '\n';
    }
    write_text(path, out);
}

std::string train_log_jsonl(const trainer::TrainLog& log) {
    std::string out;
    for (const auto& e : log.epochs) {
        nlohmann::json j{
            {"epoch", e.epoch},        {"total", e.total}, {"cls", e.cls},
            {"discr", e.discr},        {"discr_syn", e.discr_syn}, {"ent", e.ent},
            {"val_id_acc", e.val_id_acc},
        };
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace moodkit::reporting

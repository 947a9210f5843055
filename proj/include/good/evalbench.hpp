#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "good/metrics.hpp"
#include "good/trainer.hpp"

namespace good {

enum class Member { Good, GoodLc, GoodLcPlus, Ablated, Siso };

std::string to_string(Member m);
// Accepts the printed names, case-insensitive; "GOOD_LC+" is an alias.
Member parse_member(const std::string& s);
std::vector<Member> default_suite();

/// Outcome of one (member, seed). Scores and labels concatenate every target
/// context so the metrics can be recomputed from the persisted row.
struct MetricsReport {
    std::string dataset;
    std::string member;
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    double roc_auc = 0.0;
    double test_loss = 0.0;
    std::size_t epochs_ran = 0;
    std::size_t best_epoch = 0;
    double wall_clock_s = 0.0;
    std::string config_hash;
    std::vector<double> coefficients;  // mixture used at inference
    std::vector<double> train_loss;
    std::vector<double> validation_loss;
    std::vector<double> validation_auc;
    std::vector<double> scores;
    std::vector<double> labels;
    std::string error;  // non-empty when the member failed

    bool ok() const noexcept { return error.empty(); }
};

nlohmann::json to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);

// Stable 16-hex-digit digest of the effective training configuration.
std::string config_hash(const TrainConfig& cfg);

// Fills the metric fields from scored test pairs.
void score_report(MetricsReport& r, std::span<const ScoredPairs> scored);

// True when accuracy and roc_auc equal their recomputation from scores.
bool report_consistent(const MetricsReport& r);

MetricsReport evaluate_checkpoint(ModelCheckpoint& ckpt, const MultiRelGraph& graph, Variant variant,
                                  const std::optional<std::vector<double>>& companion = std::nullopt);

// Trains on the target's own history only and reports on `target`.
MetricsReport run_siso_baseline(const MultiRelGraph& graph, ContextId target, TrainConfig cfg);
// GOOD with the mixture fixed to equal weights in training and inference.
MetricsReport run_ablation(const MultiRelGraph& graph, TrainConfig cfg);

struct ExperimentResult {
    std::vector<MetricsReport> reports;
};

// Every member for every seed; failures are recorded and the rest continue.
// GOOD_LC_PLUS reuses the GOOD and GOOD_LC runs of the same seed. Rows are
// appended to `jsonl` when given.
ExperimentResult run_experiment(const MultiRelGraph& graph, const std::string& dataset, std::span<const Member> suite,
                                std::span<const std::uint64_t> seeds, const TrainConfig& base,
                                const std::optional<std::filesystem::path>& jsonl = std::nullopt);
ExperimentResult run_experiment(const std::filesystem::path& dataset_dir, std::span<const Member> suite,
                                std::span<const std::uint64_t> seeds, const TrainConfig& base,
                                const std::optional<std::filesystem::path>& jsonl = std::nullopt);

void append_jsonl(const std::filesystem::path& path, const MetricsReport& r);
// Skips malformed lines, describing each in `warnings`.
std::vector<MetricsReport> read_jsonl(const std::filesystem::path& path, std::vector<std::string>& warnings);

struct SummaryRow {
    std::string member;
    std::size_t runs = 0;
    std::size_t failures = 0;
    double accuracy_median = 0.0;
    double accuracy_iqr = 0.0;
    double roc_auc_median = 0.0;
    double roc_auc_iqr = 0.0;
};

// Linear interpolation between order statistics; `p` in [0, 1].
double quantile(std::vector<double> values, double p);

// One row per member in first-seen order; failed runs only count.
std::vector<SummaryRow> summarize(std::span<const MetricsReport> reports);
std::string format_summary(std::span<const SummaryRow> rows);
std::string summary_csv(std::span<const SummaryRow> rows);

} // namespace good

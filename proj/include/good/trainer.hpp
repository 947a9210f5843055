#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "good/model.hpp"
#include "good/objective.hpp"

namespace good {

// ---- optimizer ----------------------------------------------------------------

struct AdamConfig {
    double learning_rate = 1e-4;
    double weight_decay = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::size_t step = 0;  // number of updates applied so far
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;
};

// One bias-corrected Adam update using each Parameter::grad, with coupled
// weight decay (wd * value added to the gradient). Moments are created on
// the first call.
void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamConfig& cfg);

// ---- configuration --------------------------------------------------------------

struct TrainConfig {
    Variant variant = Variant::Good;
    // Equal coefficients in training and inference, disentangler off.
    bool uniform_coefficients = false;
    // Encode only the target context's own history (in-domain baseline).
    bool in_domain = false;
    Aggregator aggregator = Aggregator::Sum;
    double learning_rate = 1e-4;
    double weight_decay = 1e-5;
    std::size_t epochs = 100;
    std::size_t patience = 15;
    // Pairs per mini-batch and target context, half of them positive.
    std::size_t batch_size = 512;
    double dropout_rate = 0.3;
    std::vector<std::size_t> schedule{2, 1, 1};
    // Empty means Architecture::default_widths(hidden_dim, ...).
    std::vector<std::size_t> widths;
    std::size_t hidden_dim = 32;
    std::size_t head_hidden = 32;
    // Empty means the dataset default (see NegStrategy::default_for).
    std::string negatives;
    std::uint64_t seed = 0;

    void validate() const;
    Architecture architecture() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

NegStrategy resolve_strategy(const TrainConfig& cfg, const MultiRelGraph& graph);

// ---- evaluation pairs -------------------------------------------------------------

/// Labeled pairs of one target context at one step.
struct PairSet {
    ContextId context = 0;
    std::vector<NodePair> pairs;
    std::vector<double> labels;
};

// Positives of each target at `step` plus as many negatives, drawn from a
// stream that depends only on (seed, stream id), so every model sees the same
// pairs.
std::vector<PairSet> frozen_pairs(const MultiRelGraph& graph, std::span<const ContextId> targets, std::size_t step,
                                  const NegStrategy& strategy, std::uint64_t seed, std::uint64_t stream);

inline constexpr std::uint64_t kValidationStream = 0x7661;
inline constexpr std::uint64_t kTestStream = 0x7465;

// ---- models and checkpoints -----------------------------------------------------

/// A trained model plus what is needed to run inference with it.
struct ModelCheckpoint {
    TrainConfig config;
    GoodModel model;
    std::size_t epoch = 0;  // epoch the weights come from (1-based)
    std::vector<double> last_coefficients;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_link_loss = 0.0;
    double train_disentangle_loss = 0.0;
    double train_loss = 0.0;
    double validation_loss = 0.0;
    double validation_auc = 0.0;
    std::vector<double> coefficients;  // q used (GOOD) or learned (GOOD_LC)
};

nlohmann::json to_json(const EpochRecord& r);

inline constexpr int kCheckpointFormatVersion = 1;

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

// ---- training -------------------------------------------------------------------

ModelSpec make_model_spec(const TrainConfig& cfg, const MultiRelGraph& graph);
SplitSpec make_splits(const TrainConfig& cfg, const MultiRelGraph& graph);

/// Resumable training run. Owns the model, optimizer state, generator and
/// best-so-far weights.
class Trainer {
public:
    Trainer(const MultiRelGraph& graph, TrainConfig cfg);

    // Runs one epoch; returns false once training is finished (epoch budget or
    // early stop). Throws DivergenceError on a non-finite loss.
    bool step_epoch();
    // Runs step_epoch until it returns false.
    void run();

    bool finished() const noexcept;
    std::size_t epochs_ran() const noexcept { return epoch_; }
    std::size_t best_epoch() const noexcept { return best_epoch_; }
    double best_validation_auc() const noexcept { return best_auc_; }
    const std::vector<EpochRecord>& history() const noexcept { return history_; }
    const TrainConfig& config() const noexcept { return cfg_; }
    GoodModel& model() noexcept { return model_; }
    const AdamState& optimizer() const noexcept { return adam_; }

    ModelCheckpoint best() const;
    ModelCheckpoint current() const;

    void save_state(const std::filesystem::path& path) const;
    static Trainer resume(const std::filesystem::path& path, const MultiRelGraph& graph);

private:
    Trainer(const MultiRelGraph& graph, TrainConfig cfg, GoodModel model);
    double validate_epoch();

    const MultiRelGraph* graph_;
    TrainConfig cfg_;
    SplitSpec splits_;
    NegStrategy strategy_;
    Rng rng_;
    GoodModel model_;
    GoodModel best_model_;
    AdamState adam_;
    std::size_t epoch_ = 0;
    std::size_t best_epoch_ = 0;
    double best_auc_ = -1.0;
    std::size_t since_best_ = 0;
    std::vector<double> last_q_;
    std::vector<double> best_q_;
    std::vector<EpochRecord> history_;
    std::vector<PairSet> validation_pairs_;
};

struct TrainResult {
    ModelCheckpoint best;
    std::vector<EpochRecord> history;
    std::size_t epochs_ran = 0;
};

TrainResult train(const MultiRelGraph& graph, const TrainConfig& cfg);

// ---- inference --------------------------------------------------------------------

/// Scores for one target context.
struct ScoredPairs {
    ContextId context = 0;
    std::vector<NodePair> pairs;
    std::vector<double> labels;
    std::vector<double> scores;
};

// Coefficients the variant uses at inference: uniform for GOOD (and equal-
// coefficient runs), the learned softmax for GOOD_LC, `companion` for
// GOOD_LC_PLUS (ConfigError when absent).
std::vector<double> inference_mixture(ModelCheckpoint& ckpt, Variant variant,
                                      const std::optional<std::vector<double>>& companion);

// Eval-mode scores of `pairs` given the input steps of `window`.
std::vector<ScoredPairs> score_pairs(GoodModel& model, const MultiRelGraph& graph, const Window& window,
                                     std::span<const double> q, std::span<const PairSet> pairs);

// Scores the split's test window. `companion` supplies GOOD_LC coefficients
// for GOOD_LC_PLUS.
std::vector<ScoredPairs> infer(ModelCheckpoint& ckpt, const MultiRelGraph& graph, Variant variant,
                               const std::optional<std::vector<double>>& companion = std::nullopt);

} // namespace good

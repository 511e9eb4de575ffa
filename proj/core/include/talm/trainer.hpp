#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "talm/dataset.hpp"
#include "talm/encoder.hpp"
#include "talm/loss.hpp"

namespace talm {

struct TrainConfig {
    std::string stages = "AB";  // "AB" or "B"
    int epochs_a = 30;
    int epochs_b = 30;
    std::size_t block_size = 16;  // n per block
    double learning_rate = 1e-4;
    std::string optimizer = "adam";  // or "sgd"
    std::uint64_t seed = 0;
    loss::Coefficients coeffs_a;  // all-unity default protocol
    loss::Coefficients coeffs_b;

    void validate() const;
};

/// Thrown when a training loss goes non-finite.
struct TrainingDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EpochStats {
    double train_loss = 0.0;    // mean per metric batch
    double holdout_loss = 0.0;  // mean per held-out metric batch
    double wall_seconds = 0.0;
};

struct StageReport {
    char stage = 'A';
    std::vector<EpochStats> epochs;  // index 0 = before any update
};

struct TrainReport {
    std::vector<StageReport> stages;
    std::string checkpoint_id;
    std::string config_fingerprint;
    double total_wall_seconds = 0.0;

    std::string to_json() const;
    std::string curves_csv() const;  // stage,epoch,train_loss,holdout_loss
};

/// Memoized frozen-path outputs. Feature extraction dominates runtime, so
/// base vectors are computed once per item and reused across epochs (and,
/// because only frozen weights feed them, across coefficient settings too).
class DataCache {
public:
    DataCache(const CorpusSpec& spec, const FeatureConfig& feat, const Vocabulary& vocab,
              const EncoderParams& params);

    const Vec& audio_base(const DatasetItem& item);
    const Vec& text_base(const Caption& caption);

    loss::StageAItems gather(const TrainingBatch& batch_a);
    loss::StageBItems gather_b(const TrainingBatch& batch_b);

private:
    CorpusSpec spec_;
    FeatureConfig feat_;
    Vocabulary vocab_;
    EncoderParams frozen_view_;  // copy; only its frozen tensors are read
    std::map<std::string, Vec> audio_cache_;
    std::map<std::string, Vec> text_cache_;
};

/// Everything a run needs besides parameters.
struct PreparedData {
    CorpusSpec spec;
    FeatureConfig feat;
    double split_ratio = 0.7;
    Vocabulary vocab;
    PairSplit split;
    std::vector<StageARow> rows_a_train, rows_a_test;
    std::vector<DatasetItem> items_b_train, items_b_test;
};

PreparedData prepare_data(const CorpusSpec& spec, const FeatureConfig& feat, double split_ratio,
                          bool one_item_per_pair = false);

/// First-order optimizers over the trainable projections. State is reset at
/// stage boundaries by constructing a fresh instance.
class Optimizer {
public:
    Optimizer(const std::string& kind, double lr, const EncoderParams& shape);
    void step(EncoderParams& params, const TrainableGrads& grads);

private:
    bool adam_ = true;
    double lr_ = 1e-4;
    long t_ = 0;
    TrainableGrads m_, v_;
};

/// Runs one stage in place: only trainable weights change; per-epoch train
/// and held-out losses are recorded (index 0 is the pre-training value).
StageReport train_stage(Stage stage, EncoderParams& params, const PreparedData& data,
                        DataCache& cache, const TrainConfig& cfg);

struct TwoStageResult {
    EncoderParams params;
    TrainReport report;
};

/// Stage A then stage B (or B alone in ablation mode). Optimizer state does
/// not carry across the stage boundary. A shared cache may be supplied when
/// several runs use the same corpus and init seed (frozen weights must match).
TwoStageResult run_two_stage(const PreparedData& data, const EncoderConfig& enc_cfg,
                             const TrainConfig& cfg, DataCache* shared_cache = nullptr);

}  // namespace talm

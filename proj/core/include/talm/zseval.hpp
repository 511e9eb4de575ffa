#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "talm/captions.hpp"
#include "talm/dataset.hpp"
#include "talm/encoder.hpp"
#include "talm/linalg.hpp"

namespace talm::zseval {

/// Candidate captions for one classification decision.
struct PromptSet {
    std::vector<Caption> prompts;
    std::set<std::size_t> correct;  // one or two indices
    std::string task_tag;
};

/// One held-out audio clip with its ground truth.
struct EvalItem {
    Waveform audio;
    AudioRelation relation = AudioRelation::Single;
    std::vector<int> classes;  // [c] or [first, second]; overlay order is arbitrary
};

/// Scoring interface: unit-norm embeddings plus the softmax scale.
class ZsModel {
public:
    virtual ~ZsModel() = default;
    virtual Vec embed_audio(const EvalItem& item) const = 0;
    virtual Vec embed_caption(const Caption& caption) const = 0;
    virtual double gamma() const = 0;
};

/// Wraps trained (or freshly initialized) encoder parameters. Embeddings are
/// memoized by item provenance / caption text, so one instance must not be
/// reused across different corpora.
class TrainedModel : public ZsModel {
public:
    TrainedModel(EncoderParams params, FeatureConfig feat, Vocabulary vocab, double gamma);
    Vec embed_audio(const EvalItem& item) const override;
    Vec embed_caption(const Caption& caption) const override;
    double gamma() const override { return gamma_; }
    const EncoderParams& params() const { return params_; }

private:
    EncoderParams params_;
    FeatureConfig feat_;
    Vocabulary vocab_;
    double gamma_;
    mutable std::map<std::string, Vec> audio_memo_;
    mutable std::map<std::string, Vec> caption_memo_;
};

/// Label-aware test double: embeds ground truth directly (class presence,
/// event order and relation features), independent of any training. Used to
/// validate the harness itself.
class OracleModel : public ZsModel {
public:
    explicit OracleModel(int num_classes) : num_classes_(num_classes) {}
    Vec embed_audio(const EvalItem& item) const override;
    Vec embed_caption(const Caption& caption) const override;
    double gamma() const override { return 10.0; }

private:
    int num_classes_;
};

/// Softmax over gamma-scaled cosine similarities; sums to 1, ties in any
/// later argmax break toward the lowest index.
Vec zs_classify(const EvalItem& item, const PromptSet& prompts, const ZsModel& model);

struct EvalOptions {
    std::string task1_prompt = "The sound of a {class}";
    int task5b_distractors = 48;
    std::uint64_t seed = 0;
    bool swap_task3_prompt_classes = false;  // permutation check hook
};

/// Held-out evaluation audio: reserved clip instances, test-side pairs only.
struct EvalContext {
    CorpusSpec spec;
    PairSplit split;
    std::vector<EvalItem> singles;   // one per class
    std::vector<EvalItem> concats;   // both orderings per test pair
    std::vector<EvalItem> overlays;  // one per test pair
};

EvalContext build_eval_context(const CorpusSpec& spec, double split_ratio);

struct Task2Result {
    double acc_2a = 0, acc_2b = 0, acc_2c = 0, acc_2d = 0;
};
struct SubtaskPair {
    double a = 0, b = 0;
};

double task1(const EvalContext& ctx, const ZsModel& model, const EvalOptions& opts);
Task2Result task2(const EvalContext& ctx, const ZsModel& model, const EvalOptions& opts);
SubtaskPair task3(const EvalContext& ctx, const ZsModel& model, const EvalOptions& opts);
SubtaskPair task4(const EvalContext& ctx, const ZsModel& model, const EvalOptions& opts);
SubtaskPair task5(const EvalContext& ctx, const ZsModel& model, const EvalOptions& opts);

/// Per-task accuracies with decision counts, seed and model provenance.
struct EvalReport {
    std::map<std::string, double> acc;  // 1A, 2A..2D, 3A, 3B, 4A, 4B, 5A, 5B
    std::map<std::string, int> counts;
    std::uint64_t seed = 0;
    std::string checkpoint_id;
    std::string config_fingerprint;
    std::string subtask_mapping = "3A=concat,3B=overlay";

    static const std::vector<std::string>& expected_keys();
    void validate_complete() const;  // throws if any task result is missing

    std::string to_json() const;
    static EvalReport from_json(const std::string& text);
    std::string to_csv() const;
};

/// Runs every task and assembles the canonical report.
EvalReport run_all(const EvalContext& ctx, const ZsModel& model, const EvalOptions& opts);

// --- calibration helpers ----------------------------------------------------

struct Interval {
    double lo = 0, hi = 1;
    bool contains(double x) const { return x >= lo && x <= hi; }
};

/// 99% normal-approximation binomial interval around chance level p0 with
/// n_eff independent decisions.
Interval binomial_ci99(double p0, std::size_t n_eff);

/// Monte-Carlo chance level for "top-2 equals the true pair" among K
/// uniformly ranked prompts (analytically 1 / C(K,2)).
double mc_chance_top2_both(int num_classes, std::size_t trials, std::uint64_t seed);

}  // namespace talm::zseval

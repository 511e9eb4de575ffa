#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "talm/audio.hpp"
#include "talm/encoder.hpp"
#include "talm/loss.hpp"
#include "talm/trainer.hpp"
#include "talm/zseval.hpp"

namespace talm {

/// Raised for malformed, mistyped or unknown configuration content.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One JSON document drives every command. Validation is strict: unknown
/// keys are rejected, and the shipped configs/config.schema.json documents
/// the same shape.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "runs/default";

    // corpus (the corpus sub-seed is derived from the global seed)
    int num_classes = 10;
    double clip_duration = 1.0;
    int sample_rate = 8000;
    int clips_per_class = 4;

    FeatureConfig features;
    EncoderConfig encoder;

    double split_ratio = 0.7;
    bool one_item_per_pair = false;

    loss::Coefficients coeffs;

    std::string stages = "AB";
    int epochs_a = 30;
    int epochs_b = 30;
    std::size_t block_size = 16;
    double learning_rate = 1e-4;
    std::string optimizer = "adam";

    std::vector<int> tasks = {1, 2, 3, 4, 5};
    std::string task1_prompt = "The sound of a {class}";
    int task5b_distractors = 48;

    static RunConfig defaults() { return {}; }
    static RunConfig from_json_text(const std::string& text);
    static RunConfig from_file(const std::string& path);
    std::string to_json() const;

    /// FNV-1a over the canonical JSON dump.
    std::string fingerprint() const;

    // Named sub-seed views (corpus, train, eval draw independent streams).
    CorpusSpec corpus_spec() const;
    TrainConfig train_config() const;
    zseval::EvalOptions eval_options() const;

    /// Encoder dims with the band count kept in lockstep with the features.
    EncoderConfig encoder_config() const {
        EncoderConfig e = encoder;
        e.num_bands = features.num_bands;
        return e;
    }

    void validate() const;
};

}  // namespace talm

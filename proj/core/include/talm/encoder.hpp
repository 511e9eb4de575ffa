#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "talm/audio.hpp"
#include "talm/linalg.hpp"

namespace talm {

/// Short-time analysis settings. Frame size must be a power of two.
struct FeatureConfig {
    int frame_size = 512;
    int hop = 256;
    int num_bands = 24;     // F
    double fmin = 200.0;
    double fmax = 3800.0;

    void validate() const;
};

/// F x T band-energy matrix. Columns (frames) are z-scored across bands so
/// the temporal mean pool keeps the spectral shape while discarding loudness.
struct FeatureMatrix {
    Mat values;  // num_bands rows, T columns
};

/// Raw (un-normalized) band energies; exposed separately for tests and
/// filterbank diagnostics.
Mat band_energies(const Waveform& w, const FeatureConfig& cfg);

FeatureMatrix extract_features(const Waveform& w, const FeatureConfig& cfg);

/// Center frequency of band k (the filter peak).
double band_center(const FeatureConfig& cfg, int k);

struct EncoderConfig {
    int embed_dim = 32;        // d
    int base_dim = 64;         // width of the frozen base output
    int hidden_dim = 256;      // frozen audio mixing width
    int vocab_capacity = 1024; // frozen token table rows (>= live vocabulary)
    int num_bands = 24;        // must match FeatureConfig::num_bands

    void validate() const;
};

struct TrainableGrads {
    Mat d_text_proj;
    Vec d_text_bias;
    Mat d_audio_proj;
    Vec d_audio_bias;

    void scale(double a);
    void add_scaled(const TrainableGrads& other, double a);
};

/// Frozen feature/base weights plus trainable projections. The frozen block
/// is reachable only through const accessors; optimizers touch the four
/// trainable tensors exclusively.
class EncoderParams {
public:
    static EncoderParams init(std::uint64_t seed, const EncoderConfig& cfg);

    const EncoderConfig& config() const { return cfg_; }
    std::uint64_t init_seed() const { return seed_; }

    // frozen
    const Mat& token_table() const { return token_table_; }
    const Mat& audio_mix1() const { return audio_mix1_; }
    const Mat& audio_mix2() const { return audio_mix2_; }

    // trainable (theta = text projection, phi = audio projection)
    Mat& text_proj() { return text_proj_; }
    const Mat& text_proj() const { return text_proj_; }
    Vec& text_bias() { return text_bias_; }
    const Vec& text_bias() const { return text_bias_; }
    Mat& audio_proj() { return audio_proj_; }
    const Mat& audio_proj() const { return audio_proj_; }
    Vec& audio_bias() { return audio_bias_; }
    const Vec& audio_bias() const { return audio_bias_; }

    std::size_t frozen_parameter_count() const;
    std::size_t trainable_parameter_count() const;
    double trainable_fraction() const;
    double text_trainable_fraction() const;
    double audio_trainable_fraction() const;

    TrainableGrads zero_grads() const;
    void apply_update(const TrainableGrads& step);  // adds step to trainables

    /// Stable content hash of every tensor (frozen + trainable) and dims.
    std::string fingerprint() const;

    void save(const std::string& path) const;
    static EncoderParams load(const std::string& path);

    bool operator==(const EncoderParams& o) const;

private:
    EncoderConfig cfg_;
    std::uint64_t seed_ = 0;
    Mat token_table_;  // vocab_capacity x base_dim
    Mat audio_mix1_;   // hidden_dim x num_bands
    Mat audio_mix2_;   // base_dim x hidden_dim
    Mat text_proj_;    // embed_dim x (2 * base_dim)
    Vec text_bias_;    // embed_dim
    Mat audio_proj_;   // embed_dim x base_dim
    Vec audio_bias_;   // embed_dim
};

/// Frozen audio path: temporal mean pool -> mix1 -> tanh -> mix2.
Vec audio_base_vector(const FeatureMatrix& x, const EncoderParams& p);

/// Frozen text path: concat(mean of token embeddings, sum_k (k/L) * emb_k).
/// The position-weighted half makes the map order-sensitive; a pure bag of
/// tokens could not represent temporal order. Tokens must be non-empty.
Vec text_base_vector(const std::vector<int>& tokens, const EncoderParams& p);

/// Trainable projection + L2 normalization. Throws std::domain_error on a
/// zero-norm pre-normalization vector instead of clamping.
Vec audio_embed_from_base(const Vec& base, const EncoderParams& p);
Vec text_embed_from_base(const Vec& base, const EncoderParams& p);

Vec encode_audio(const FeatureMatrix& x, const EncoderParams& p);
Vec encode_text(const std::vector<int>& tokens, const EncoderParams& p);

}  // namespace talm

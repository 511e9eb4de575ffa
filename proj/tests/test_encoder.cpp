#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <stdexcept>

#include "talm/captions.hpp"
#include "talm/encoder.hpp"
#include "talm/rng.hpp"

using namespace talm;

namespace {

Waveform sine_wave(double freq, int rate = 8000, double duration = 1.0, double amp = 0.5) {
    Waveform w;
    w.sample_rate = rate;
    w.class_ids = {0};
    const auto n = static_cast<std::size_t>(rate * duration);
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        w.samples[i] = amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate);
    return w;
}

Vocabulary toy_vocab() {
    std::vector<std::string> names;
    for (int k = 0; k < 10; ++k) names.push_back(class_name(k));
    return Vocabulary::build(names);
}

}  // namespace

TEST_CASE("silence produces all-zero band energies before normalization") {
    Waveform w = sine_wave(440.0);
    for (double& s : w.samples) s = 0.0;
    const FeatureConfig cfg;
    const Mat raw = band_energies(w, cfg);
    for (double x : raw.data) CHECK(x == 0.0);
    // normalized features of silence stay zero (guarded zero-variance frames)
    const FeatureMatrix f = extract_features(w, cfg);
    for (double x : f.values.data) CHECK(x == 0.0);
}

TEST_CASE("a sinusoid at a band center peaks in that band") {
    const FeatureConfig cfg;
    for (int k : {0, 4, 9, 15, 21, 23}) {
        const Waveform w = sine_wave(band_center(cfg, k));
        const Mat raw = band_energies(w, cfg);
        Vec pooled(raw.rows, 0.0);
        for (std::size_t b = 0; b < raw.rows; ++b)
            for (std::size_t t = 0; t < raw.cols; ++t) pooled[b] += raw.at(b, t);
        std::size_t argmax = 0;
        for (std::size_t b = 1; b < pooled.size(); ++b)
            if (pooled[b] > pooled[argmax]) argmax = b;
        CHECK(argmax == static_cast<std::size_t>(k));
    }
}

TEST_CASE("feature extraction is deterministic and rejects short clips") {
    const FeatureConfig cfg;
    const Waveform w = sine_wave(700.0);
    const FeatureMatrix a = extract_features(w, cfg);
    const FeatureMatrix b = extract_features(w, cfg);
    CHECK(a.values.data == b.values.data);
    CHECK(a.values.rows == 24);
    CHECK(a.values.cols == 1 + (8000 - 512) / 256);

    Waveform tiny = w;
    tiny.samples.resize(100);
    CHECK_THROWS_AS(extract_features(tiny, cfg), std::invalid_argument);
}

TEST_CASE("embeddings are unit-norm and deterministic") {
    const EncoderConfig cfg;
    const EncoderParams p = EncoderParams::init(17, cfg);
    const FeatureConfig fc;
    const FeatureMatrix f = extract_features(sine_wave(900.0), fc);

    const Vec za = encode_audio(f, p);
    CHECK(std::fabs(l2_norm(za) - 1.0) <= 1e-9);
    CHECK(encode_audio(f, p) == za);

    const Vocabulary vocab = toy_vocab();
    const Vec zc = encode_text(tokenize("dog before rain", vocab), p);
    CHECK(std::fabs(l2_norm(zc) - 1.0) <= 1e-9);
    CHECK(encode_text(tokenize("dog before rain", vocab), p) == zc);
}

TEST_CASE("zero-norm pre-normalization input raises instead of NaN") {
    const EncoderConfig cfg;
    const EncoderParams p = EncoderParams::init(17, cfg);
    // biases start at zero, so silence reaches the projection as a zero vector
    Waveform w = sine_wave(440.0);
    for (double& s : w.samples) s = 0.0;
    const FeatureMatrix f = extract_features(w, FeatureConfig{});
    CHECK_THROWS_AS(encode_audio(f, p), std::domain_error);
}

TEST_CASE("text encoder distinguishes token order") {
    const EncoderConfig cfg;
    const EncoderParams p = EncoderParams::init(17, cfg);
    const Vocabulary vocab = toy_vocab();
    const Vec fwd = encode_text(tokenize("dog before rain", vocab), p);
    const Vec rev = encode_text(tokenize("rain before dog", vocab), p);
    // same token bag, different order: the position-weighted half must differ
    CHECK(fwd != rev);
    double diff = 0.0;
    for (std::size_t i = 0; i < fwd.size(); ++i) diff += std::fabs(fwd[i] - rev[i]);
    CHECK(diff > 1e-6);

    CHECK_THROWS_AS(encode_text({}, p), std::invalid_argument);
}

TEST_CASE("trainable fraction lands near the ten percent target") {
    const EncoderConfig cfg;
    const EncoderParams p = EncoderParams::init(0, cfg);
    CHECK(p.trainable_fraction() >= 0.05);
    CHECK(p.trainable_fraction() <= 0.15);
    CHECK(p.text_trainable_fraction() >= 0.05);
    CHECK(p.text_trainable_fraction() <= 0.15);
    CHECK(p.audio_trainable_fraction() >= 0.05);
    CHECK(p.audio_trainable_fraction() <= 0.15);
}

TEST_CASE("init is seed-deterministic") {
    const EncoderConfig cfg;
    const EncoderParams a = EncoderParams::init(123, cfg);
    const EncoderParams b = EncoderParams::init(123, cfg);
    const EncoderParams c = EncoderParams::init(124, cfg);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    CHECK(a.fingerprint() == b.fingerprint());
    CHECK(a.fingerprint() != c.fingerprint());
}

TEST_CASE("checkpoints reload bit-exactly") {
    const EncoderConfig cfg;
    EncoderParams p = EncoderParams::init(9, cfg);
    p.text_proj().data[5] = 0.123456789012345678;  // exercise full precision
    p.audio_bias()[3] = -1e-17;

    const std::string path =
        (std::filesystem::temp_directory_path() / "talm_ckpt_test.bin").string();
    p.save(path);
    const EncoderParams r = EncoderParams::load(path);
    CHECK(r == p);
    CHECK(r.fingerprint() == p.fingerprint());
    CHECK(r.config().embed_dim == cfg.embed_dim);
    std::remove(path.c_str());

    CHECK_THROWS_AS(EncoderParams::load("/nonexistent/talm.bin"), std::runtime_error);
}

TEST_CASE("config validation rejects bad dims") {
    EncoderConfig cfg;
    cfg.embed_dim = 0;
    CHECK_THROWS_AS(EncoderParams::init(0, cfg), std::invalid_argument);
    FeatureConfig fc;
    fc.frame_size = 300;  // not a power of two
    CHECK_THROWS_AS(fc.validate(), std::invalid_argument);
}

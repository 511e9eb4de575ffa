#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace talm {

/// How a clip was assembled from source events.
enum class AudioRelation { Single, Concat, Overlay };

const char* to_string(AudioRelation r);

/// Fixed-sample-rate mono PCM in [-1, 1] plus class provenance.
struct Waveform {
    std::vector<double> samples;
    int sample_rate = 0;
    std::vector<int> class_ids;  // length 1 for Single, 2 otherwise
    AudioRelation relation = AudioRelation::Single;

    double duration() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

/// Parameters of the procedurally generated corpus.
struct CorpusSpec {
    int num_classes = 10;       // K
    double clip_duration = 1.0; // seconds, uniform across all singles
    int sample_rate = 8000;
    std::uint64_t seed = 0;
    int clips_per_class = 4;    // last instance per class is held out for eval

    void validate() const;  // throws std::invalid_argument on bad values
};

/// Human-readable name for class k. The first 50 indices use a fixed table of
/// environmental-sound words; higher indices fall back to "soundN".
std::string class_name(int k);

/// Deterministic synthetic clip for one class. Each class has a distinct
/// spectral signature (three sinusoids, a narrow noise band and an amplitude
/// envelope) so a linear model on spectral features can separate classes.
/// Peak amplitude is normalized to 0.8.
Waveform synth_clip(int class_id, std::uint64_t instance_seed, const CorpusSpec& spec);

/// a_i followed by a_j. Requires equal sample rates and Single inputs.
Waveform concat_clips(const Waveform& a, const Waveform& b);

/// Elementwise mean of two equal-length singles, peak-limited to 0.9.
Waveform overlay_clips(const Waveform& a, const Waveform& b);

/// Event-order inversion at the audio level: returns concat(b, a).
/// No sample-level reversal takes place.
Waveform apply_time_inversion(const Waveform& a, const Waveform& b);

/// Mono 16-bit PCM RIFF writer/reader. Round trip is exact up to one
/// quantization step (max abs error <= 2^-15).
void write_wav(const std::string& path, const Waveform& w);
Waveform read_wav(const std::string& path);

}  // namespace talm

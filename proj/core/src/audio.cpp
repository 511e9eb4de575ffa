#include "talm/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "talm/rng.hpp"

namespace talm {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

const char* kClassNames[50] = {
    "dog",      "rain",     "wind",      "thunder",  "crow",      "frog",
    "cat",      "hen",      "insects",   "sheep",    "rooster",   "pig",
    "cow",      "crickets", "sparrow",   "water",    "waves",     "fire",
    "footsteps","laughter", "coughing",  "breathing","sneezing",  "clapping",
    "heartbeat","snoring",  "drinking",  "doorbell", "siren",     "engine",
    "train",    "helicopter","airplane", "fireworks","hammer",    "saw",
    "clock",    "keyboard", "typewriter","canopener","washer",    "vacuum",
    "alarm",    "church",   "bells",     "drums",    "guitar",    "piano",
    "violin",   "whistle",
};

void require_single(const Waveform& w, const char* op) {
    if (w.relation != AudioRelation::Single)
        throw std::invalid_argument(std::string(op) + ": inputs must be single clips");
}

}  // namespace

const char* to_string(AudioRelation r) {
    switch (r) {
        case AudioRelation::Single: return "single";
        case AudioRelation::Concat: return "concat";
        case AudioRelation::Overlay: return "overlay";
    }
    return "?";
}

void CorpusSpec::validate() const {
    if (num_classes < 2) throw std::invalid_argument("CorpusSpec: num_classes must be >= 2");
    if (clips_per_class < 2)
        throw std::invalid_argument("CorpusSpec: clips_per_class must be >= 2");
    if (sample_rate <= 0) throw std::invalid_argument("CorpusSpec: sample_rate must be positive");
    if (clip_duration <= 0.0) throw std::invalid_argument("CorpusSpec: clip_duration must be positive");
}

std::string class_name(int k) {
    if (k >= 0 && k < 50) return kClassNames[k];
    return "sound" + std::to_string(k);
}

Waveform synth_clip(int class_id, std::uint64_t instance_seed, const CorpusSpec& spec) {
    spec.validate();
    if (class_id < 0 || class_id >= spec.num_classes)
        throw std::out_of_range("synth_clip: class_id out of range");

    const std::size_t n = static_cast<std::size_t>(
        std::llround(spec.clip_duration * spec.sample_rate));
    const double dt = 1.0 / spec.sample_rate;

    // Class signature: fixed given (spec.seed, class_id).
    Rng class_rng(mix_seed(sub_seed(spec.seed, "class-signature"),
                           static_cast<std::uint64_t>(class_id)));
    double freq[3], amp[3];
    for (int m = 0; m < 3; ++m) {
        freq[m] = class_rng.uniform(250.0, 3500.0);
        amp[m] = class_rng.uniform(0.5, 1.0);
    }
    const double noise_center = class_rng.uniform(300.0, 3400.0);
    const double noise_bw = 150.0;

    // Instance variation: phases, small frequency jitter, noise realization
    // and envelope shape.
    Rng inst_rng(mix_seed(mix_seed(sub_seed(spec.seed, "clip-instance"),
                                   static_cast<std::uint64_t>(class_id)),
                          instance_seed));
    double phase[3], jitter[3];
    for (int m = 0; m < 3; ++m) {
        phase[m] = inst_rng.uniform(0.0, kTwoPi);
        jitter[m] = 1.0 + inst_rng.uniform(-0.01, 0.01);
    }

    constexpr int kNoiseTones = 32;
    double nfreq[kNoiseTones], nphase[kNoiseTones];
    for (int q = 0; q < kNoiseTones; ++q) {
        nfreq[q] = inst_rng.uniform(noise_center - noise_bw / 2, noise_center + noise_bw / 2);
        nphase[q] = inst_rng.uniform(0.0, kTwoPi);
    }

    const double attack = inst_rng.uniform(0.05, 0.15) * spec.clip_duration;
    const double release = inst_rng.uniform(0.10, 0.25) * spec.clip_duration;

    Waveform w;
    w.sample_rate = spec.sample_rate;
    w.class_ids = {class_id};
    w.relation = AudioRelation::Single;
    w.samples.resize(n);

    const double noise_gain = 0.3 / std::sqrt(static_cast<double>(kNoiseTones));
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * dt;
        double s = 0.0;
        for (int m = 0; m < 3; ++m)
            s += amp[m] * std::sin(kTwoPi * freq[m] * jitter[m] * t + phase[m]);
        double nz = 0.0;
        for (int q = 0; q < kNoiseTones; ++q)
            nz += std::sin(kTwoPi * nfreq[q] * t + nphase[q]);
        s += noise_gain * nz;

        double env = 1.0;
        if (t < attack) env = t / attack;
        const double tail = spec.clip_duration - t;
        if (tail < release) env = std::min(env, tail / release);
        w.samples[i] = env * s;
    }

    double peak = 0.0;
    for (double s : w.samples) peak = std::max(peak, std::fabs(s));
    if (peak > 0.0) {
        const double g = 0.8 / peak;
        for (double& s : w.samples) s *= g;
    }
    return w;
}

Waveform concat_clips(const Waveform& a, const Waveform& b) {
    require_single(a, "concat");
    require_single(b, "concat");
    if (a.sample_rate != b.sample_rate)
        throw std::invalid_argument("concat: mismatched sample rates");

    Waveform out;
    out.sample_rate = a.sample_rate;
    out.relation = AudioRelation::Concat;
    out.class_ids = {a.class_ids.at(0), b.class_ids.at(0)};
    out.samples.reserve(a.samples.size() + b.samples.size());
    out.samples.insert(out.samples.end(), a.samples.begin(), a.samples.end());
    out.samples.insert(out.samples.end(), b.samples.begin(), b.samples.end());
    return out;
}

Waveform overlay_clips(const Waveform& a, const Waveform& b) {
    require_single(a, "overlay");
    require_single(b, "overlay");
    if (a.sample_rate != b.sample_rate)
        throw std::invalid_argument("overlay: mismatched sample rates");
    if (a.samples.size() != b.samples.size())
        throw std::invalid_argument("overlay: length mismatch");

    Waveform out;
    out.sample_rate = a.sample_rate;
    out.relation = AudioRelation::Overlay;
    out.class_ids = {a.class_ids.at(0), b.class_ids.at(0)};
    out.samples.resize(a.samples.size());
    double peak = 0.0;
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        out.samples[i] = 0.5 * (a.samples[i] + b.samples[i]);
        peak = std::max(peak, std::fabs(out.samples[i]));
    }
    if (peak > 0.9) {
        const double g = 0.9 / peak;
        for (double& s : out.samples) s *= g;
    }
    return out;
}

Waveform apply_time_inversion(const Waveform& a, const Waveform& b) {
    return concat_clips(b, a);
}

// ---------------------------------------------------------------------------
// WAV I/O: RIFF, mono, 16-bit signed PCM, little-endian.
// ---------------------------------------------------------------------------

namespace {

void put_u32(std::string& s, std::uint32_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
    s.push_back(static_cast<char>((v >> 16) & 0xff));
    s.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& s, std::uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
}

std::uint32_t get_u32(const std::string& s, std::size_t off) {
    return static_cast<std::uint8_t>(s[off]) | (static_cast<std::uint8_t>(s[off + 1]) << 8) |
           (static_cast<std::uint8_t>(s[off + 2]) << 16) |
           (static_cast<std::uint32_t>(static_cast<std::uint8_t>(s[off + 3])) << 24);
}

std::uint16_t get_u16(const std::string& s, std::size_t off) {
    return static_cast<std::uint16_t>(static_cast<std::uint8_t>(s[off]) |
                                      (static_cast<std::uint8_t>(s[off + 1]) << 8));
}

}  // namespace

void write_wav(const std::string& path, const Waveform& w) {
    if (w.sample_rate <= 0) throw std::invalid_argument("write_wav: invalid sample rate");

    const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
    std::string buf;
    buf.reserve(44 + data_bytes);
    buf += "RIFF";
    put_u32(buf, 36 + data_bytes);
    buf += "WAVE";
    buf += "fmt ";
    put_u32(buf, 16);
    put_u16(buf, 1);  // PCM
    put_u16(buf, 1);  // mono
    put_u32(buf, static_cast<std::uint32_t>(w.sample_rate));
    put_u32(buf, static_cast<std::uint32_t>(w.sample_rate * 2));
    put_u16(buf, 2);   // block align
    put_u16(buf, 16);  // bits per sample
    buf += "data";
    put_u32(buf, data_bytes);
    for (double s : w.samples) {
        double clamped = std::clamp(s, -1.0, 1.0);
        auto q = static_cast<std::int16_t>(std::lround(clamped * 32767.0));
        put_u16(buf, static_cast<std::uint16_t>(q));
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("write_wav: cannot open " + path);
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw std::runtime_error("write_wav: write failed for " + path);
}

Waveform read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_wav: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (buf.size() < 12 || buf.compare(0, 4, "RIFF") != 0 || buf.compare(8, 4, "WAVE") != 0)
        throw std::runtime_error("read_wav: malformed RIFF header in " + path);

    bool have_fmt = false;
    int sample_rate = 0;
    std::size_t pos = 12;
    while (pos + 8 <= buf.size()) {
        const std::string id = buf.substr(pos, 4);
        const std::uint32_t len = get_u32(buf, pos + 4);
        pos += 8;
        if (pos + len > buf.size())
            throw std::runtime_error("read_wav: truncated chunk in " + path);
        if (id == "fmt ") {
            if (len < 16) throw std::runtime_error("read_wav: short fmt chunk in " + path);
            const std::uint16_t format = get_u16(buf, pos);
            const std::uint16_t channels = get_u16(buf, pos + 2);
            sample_rate = static_cast<int>(get_u32(buf, pos + 4));
            const std::uint16_t bits = get_u16(buf, pos + 14);
            if (format != 1) throw std::runtime_error("read_wav: not PCM: " + path);
            if (channels != 1)
                throw std::runtime_error("read_wav: unsupported channel count in " + path);
            if (bits != 16) throw std::runtime_error("read_wav: unsupported bit depth in " + path);
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) throw std::runtime_error("read_wav: data before fmt in " + path);
            Waveform w;
            w.sample_rate = sample_rate;
            w.relation = AudioRelation::Single;
            w.class_ids = {0};  // provenance is not stored in the file
            w.samples.resize(len / 2);
            for (std::size_t i = 0; i < w.samples.size(); ++i) {
                auto q = static_cast<std::int16_t>(get_u16(buf, pos + 2 * i));
                w.samples[i] = static_cast<double>(q) / 32767.0;
            }
            return w;
        }
        pos += len + (len & 1);  // chunks are word-aligned
    }
    throw std::runtime_error("read_wav: no data chunk in " + path);
}

}  // namespace talm

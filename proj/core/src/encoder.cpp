#include "talm/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "talm/rng.hpp"

namespace talm {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 FFT.
void fft(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -kTwoPi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                auto u = a[i + k];
                auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

/// Triangular filters on log-spaced edges over [fmin, fmax].
struct Filterbank {
    int bands;
    std::vector<double> edges;  // bands + 2 entries

    explicit Filterbank(const FeatureConfig& cfg) : bands(cfg.num_bands) {
        edges.resize(static_cast<std::size_t>(bands) + 2);
        const double ratio = cfg.fmax / cfg.fmin;
        for (int t = 0; t < bands + 2; ++t)
            edges[t] = cfg.fmin * std::pow(ratio, static_cast<double>(t) / (bands + 1));
    }

    double weight(int band, double freq) const {
        const double lo = edges[band], mid = edges[band + 1], hi = edges[band + 2];
        if (freq <= lo || freq >= hi) return 0.0;
        return freq <= mid ? (freq - lo) / (mid - lo) : (hi - freq) / (hi - mid);
    }
};

}  // namespace

void FeatureConfig::validate() const {
    if (!is_pow2(frame_size)) throw std::invalid_argument("FeatureConfig: frame_size must be a power of two");
    if (hop <= 0 || hop > frame_size) throw std::invalid_argument("FeatureConfig: bad hop");
    if (num_bands < 2) throw std::invalid_argument("FeatureConfig: need at least 2 bands");
    if (!(fmin > 0.0 && fmax > fmin)) throw std::invalid_argument("FeatureConfig: bad band range");
}

double band_center(const FeatureConfig& cfg, int k) {
    cfg.validate();
    const double ratio = cfg.fmax / cfg.fmin;
    return cfg.fmin * std::pow(ratio, static_cast<double>(k + 1) / (cfg.num_bands + 1));
}

Mat band_energies(const Waveform& w, const FeatureConfig& cfg) {
    cfg.validate();
    const auto n = w.samples.size();
    const auto frame = static_cast<std::size_t>(cfg.frame_size);
    if (n < frame) throw std::invalid_argument("band_energies: clip shorter than one frame");
    const std::size_t frames = 1 + (n - frame) / static_cast<std::size_t>(cfg.hop);

    std::vector<double> window(frame);
    for (std::size_t i = 0; i < frame; ++i)
        window[i] = 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(i) /
                                          static_cast<double>(frame - 1)));

    const std::size_t bins = frame / 2 + 1;
    const double bin_hz = static_cast<double>(w.sample_rate) / static_cast<double>(frame);
    Filterbank fb(cfg);
    // Per-bin filter weights (sparse in practice, dense storage is fine here).
    Mat weights(static_cast<std::size_t>(cfg.num_bands), bins, 0.0);
    for (int b = 0; b < cfg.num_bands; ++b)
        for (std::size_t r = 0; r < bins; ++r)
            weights.at(static_cast<std::size_t>(b), r) = fb.weight(b, bin_hz * static_cast<double>(r));

    Mat out(static_cast<std::size_t>(cfg.num_bands), frames, 0.0);
    std::vector<std::complex<double>> buf(frame);
    for (std::size_t t = 0; t < frames; ++t) {
        const std::size_t off = t * static_cast<std::size_t>(cfg.hop);
        for (std::size_t i = 0; i < frame; ++i)
            buf[i] = {w.samples[off + i] * window[i], 0.0};
        fft(buf);
        for (int b = 0; b < cfg.num_bands; ++b) {
            double e = 0.0;
            const double* wm = weights.row(static_cast<std::size_t>(b));
            for (std::size_t r = 0; r < bins; ++r) {
                if (wm[r] != 0.0) e += wm[r] * std::abs(buf[r]);
            }
            out.at(static_cast<std::size_t>(b), t) = e;
        }
    }
    return out;
}

FeatureMatrix extract_features(const Waveform& w, const FeatureConfig& cfg) {
    Mat raw = band_energies(w, cfg);
    const std::size_t F = raw.rows, T = raw.cols;
    // z-score each frame across bands; silent frames stay zero
    for (std::size_t t = 0; t < T; ++t) {
        double mean = 0.0;
        for (std::size_t b = 0; b < F; ++b) mean += raw.at(b, t);
        mean /= static_cast<double>(F);
        double var = 0.0;
        for (std::size_t b = 0; b < F; ++b) {
            const double d = raw.at(b, t) - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / static_cast<double>(F));
        for (std::size_t b = 0; b < F; ++b)
            raw.at(b, t) = sd < 1e-12 ? 0.0 : (raw.at(b, t) - mean) / sd;
    }
    return FeatureMatrix{std::move(raw)};
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

void EncoderConfig::validate() const {
    if (embed_dim < 1 || base_dim < 1 || hidden_dim < 1 || num_bands < 1)
        throw std::invalid_argument("EncoderConfig: dims must be positive");
    if (vocab_capacity < 1) throw std::invalid_argument("EncoderConfig: vocab_capacity must be positive");
}

namespace {

void fill_uniform(Mat& m, Rng& rng, double scale) {
    for (double& x : m.data) x = rng.uniform(-scale, scale);
}

}  // namespace

EncoderParams EncoderParams::init(std::uint64_t seed, const EncoderConfig& cfg) {
    cfg.validate();
    EncoderParams p;
    p.cfg_ = cfg;
    p.seed_ = seed;

    const auto d = static_cast<std::size_t>(cfg.embed_dim);
    const auto db = static_cast<std::size_t>(cfg.base_dim);
    const auto h = static_cast<std::size_t>(cfg.hidden_dim);
    const auto F = static_cast<std::size_t>(cfg.num_bands);

    Rng frozen_rng(sub_seed(seed, "frozen-init"));
    p.token_table_ = Mat(static_cast<std::size_t>(cfg.vocab_capacity), db);
    fill_uniform(p.token_table_, frozen_rng, 1.0 / std::sqrt(static_cast<double>(db)));
    p.audio_mix1_ = Mat(h, F);
    fill_uniform(p.audio_mix1_, frozen_rng, 1.0 / std::sqrt(static_cast<double>(F)));
    p.audio_mix2_ = Mat(db, h);
    fill_uniform(p.audio_mix2_, frozen_rng, 1.0 / std::sqrt(static_cast<double>(h)));

    // Small projection init: post-training moves only these weights, so a
    // small scale lets few optimizer steps reorient the embedding directions.
    Rng train_rng(sub_seed(seed, "trainable-init"));
    p.text_proj_ = Mat(d, 2 * db);
    fill_uniform(p.text_proj_, train_rng, 0.02);
    p.text_bias_ = Vec(d, 0.0);
    p.audio_proj_ = Mat(d, db);
    fill_uniform(p.audio_proj_, train_rng, 0.02);
    p.audio_bias_ = Vec(d, 0.0);
    return p;
}

std::size_t EncoderParams::frozen_parameter_count() const {
    return token_table_.size() + audio_mix1_.size() + audio_mix2_.size();
}

std::size_t EncoderParams::trainable_parameter_count() const {
    return text_proj_.size() + text_bias_.size() + audio_proj_.size() + audio_bias_.size();
}

double EncoderParams::trainable_fraction() const {
    const double t = static_cast<double>(trainable_parameter_count());
    return t / (t + static_cast<double>(frozen_parameter_count()));
}

double EncoderParams::text_trainable_fraction() const {
    const double t = static_cast<double>(text_proj_.size() + text_bias_.size());
    return t / (t + static_cast<double>(token_table_.size()));
}

double EncoderParams::audio_trainable_fraction() const {
    const double t = static_cast<double>(audio_proj_.size() + audio_bias_.size());
    return t / (t + static_cast<double>(audio_mix1_.size() + audio_mix2_.size()));
}

void TrainableGrads::scale(double a) {
    for (double& x : d_text_proj.data) x *= a;
    for (double& x : d_text_bias) x *= a;
    for (double& x : d_audio_proj.data) x *= a;
    for (double& x : d_audio_bias) x *= a;
}

void TrainableGrads::add_scaled(const TrainableGrads& other, double a) {
    axpy(a, other.d_text_proj.data.data(), d_text_proj.data.data(), d_text_proj.size());
    axpy(a, other.d_text_bias.data(), d_text_bias.data(), d_text_bias.size());
    axpy(a, other.d_audio_proj.data.data(), d_audio_proj.data.data(), d_audio_proj.size());
    axpy(a, other.d_audio_bias.data(), d_audio_bias.data(), d_audio_bias.size());
}

TrainableGrads EncoderParams::zero_grads() const {
    TrainableGrads g;
    g.d_text_proj = Mat(text_proj_.rows, text_proj_.cols, 0.0);
    g.d_text_bias = Vec(text_bias_.size(), 0.0);
    g.d_audio_proj = Mat(audio_proj_.rows, audio_proj_.cols, 0.0);
    g.d_audio_bias = Vec(audio_bias_.size(), 0.0);
    return g;
}

void EncoderParams::apply_update(const TrainableGrads& step) {
    axpy(1.0, step.d_text_proj.data.data(), text_proj_.data.data(), text_proj_.size());
    axpy(1.0, step.d_text_bias.data(), text_bias_.data(), text_bias_.size());
    axpy(1.0, step.d_audio_proj.data.data(), audio_proj_.data.data(), audio_proj_.size());
    axpy(1.0, step.d_audio_bias.data(), audio_bias_.data(), audio_bias_.size());
}

// ---------------------------------------------------------------------------
// Forward paths
// ---------------------------------------------------------------------------

Vec audio_base_vector(const FeatureMatrix& x, const EncoderParams& p) {
    const Mat& m = x.values;
    if (m.rows != static_cast<std::size_t>(p.config().num_bands))
        throw std::invalid_argument("audio_base_vector: band count mismatch");
    if (m.cols == 0) throw std::invalid_argument("audio_base_vector: empty feature matrix");

    Vec pooled(m.rows, 0.0);
    for (std::size_t b = 0; b < m.rows; ++b) {
        double s = 0.0;
        for (std::size_t t = 0; t < m.cols; ++t) s += m.at(b, t);
        pooled[b] = s / static_cast<double>(m.cols);
    }
    Vec hidden = matvec(p.audio_mix1(), pooled);
    for (double& v : hidden) v = std::tanh(v);
    return matvec(p.audio_mix2(), hidden);
}

Vec text_base_vector(const std::vector<int>& tokens, const EncoderParams& p) {
    if (tokens.empty()) throw std::invalid_argument("text_base_vector: empty token sequence");
    const auto db = static_cast<std::size_t>(p.config().base_dim);
    const Mat& table = p.token_table();

    Vec base(2 * db, 0.0);
    const double L = static_cast<double>(tokens.size());
    for (std::size_t k = 0; k < tokens.size(); ++k) {
        const int id = tokens[k];
        if (id < 0 || static_cast<std::size_t>(id) >= table.rows)
            throw std::out_of_range("text_base_vector: token id outside table capacity");
        const double* emb = table.row(static_cast<std::size_t>(id));
        const double pos_w = static_cast<double>(k + 1) / L;
        for (std::size_t c = 0; c < db; ++c) {
            base[c] += emb[c] / L;           // bag-of-tokens mean
            base[db + c] += pos_w * emb[c];  // position-weighted sum
        }
    }
    return base;
}

namespace {

Vec project_normalize(const Mat& proj, const Vec& bias, const Vec& base, const char* who) {
    if (base.size() != proj.cols) throw std::invalid_argument(std::string(who) + ": shape mismatch");
    Vec e = matvec(proj, base);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += bias[i];
    const double n = l2_norm(e);
    if (!(n > 1e-12))
        throw std::domain_error(std::string(who) + ": zero-norm vector before normalization");
    for (double& v : e) v /= n;
    return e;
}

}  // namespace

Vec audio_embed_from_base(const Vec& base, const EncoderParams& p) {
    return project_normalize(p.audio_proj(), p.audio_bias(), base, "encode_audio");
}

Vec text_embed_from_base(const Vec& base, const EncoderParams& p) {
    return project_normalize(p.text_proj(), p.text_bias(), base, "encode_text");
}

Vec encode_audio(const FeatureMatrix& x, const EncoderParams& p) {
    return audio_embed_from_base(audio_base_vector(x, p), p);
}

Vec encode_text(const std::vector<int>& tokens, const EncoderParams& p) {
    return text_embed_from_base(text_base_vector(tokens, p), p);
}

// ---------------------------------------------------------------------------
// Checkpoints: little-endian binary, versioned, bit-exact round trip.
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'T', 'A', 'L', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void put_tensor(std::ostream& out, const double* data, std::size_t n) {
    put_u64(out, n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &data[i], 8);
        put_u64(out, bits);
    }
}

void get_tensor(std::istream& in, double* data, std::size_t n) {
    const std::uint64_t stored = get_u64(in);
    if (stored != n) throw std::runtime_error("checkpoint: tensor size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t bits = get_u64(in);
        std::memcpy(&data[i], &bits, 8);
    }
}

}  // namespace

void EncoderParams::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint save: cannot open " + path);
    out.write(kMagic, 4);
    put_u64(out, kVersion);
    put_u64(out, seed_);
    put_u64(out, static_cast<std::uint64_t>(cfg_.embed_dim));
    put_u64(out, static_cast<std::uint64_t>(cfg_.base_dim));
    put_u64(out, static_cast<std::uint64_t>(cfg_.hidden_dim));
    put_u64(out, static_cast<std::uint64_t>(cfg_.vocab_capacity));
    put_u64(out, static_cast<std::uint64_t>(cfg_.num_bands));
    // one flag word per tensor: 0 = frozen, 1 = trainable
    const std::uint64_t flags[7] = {0, 0, 0, 1, 1, 1, 1};
    for (std::uint64_t f : flags) put_u64(out, f);
    put_tensor(out, token_table_.data.data(), token_table_.size());
    put_tensor(out, audio_mix1_.data.data(), audio_mix1_.size());
    put_tensor(out, audio_mix2_.data.data(), audio_mix2_.size());
    put_tensor(out, text_proj_.data.data(), text_proj_.size());
    put_tensor(out, text_bias_.data(), text_bias_.size());
    put_tensor(out, audio_proj_.data.data(), audio_proj_.size());
    put_tensor(out, audio_bias_.data(), audio_bias_.size());
    if (!out) throw std::runtime_error("checkpoint save: write failed for " + path);
}

EncoderParams EncoderParams::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint load: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint load: bad magic in " + path);
    if (get_u64(in) != kVersion) throw std::runtime_error("checkpoint load: unsupported version");

    const std::uint64_t seed = get_u64(in);
    EncoderConfig cfg;
    cfg.embed_dim = static_cast<int>(get_u64(in));
    cfg.base_dim = static_cast<int>(get_u64(in));
    cfg.hidden_dim = static_cast<int>(get_u64(in));
    cfg.vocab_capacity = static_cast<int>(get_u64(in));
    cfg.num_bands = static_cast<int>(get_u64(in));
    for (int i = 0; i < 7; ++i) (void)get_u64(in);  // per-tensor flags

    EncoderParams p = EncoderParams::init(seed, cfg);
    get_tensor(in, p.token_table_.data.data(), p.token_table_.size());
    get_tensor(in, p.audio_mix1_.data.data(), p.audio_mix1_.size());
    get_tensor(in, p.audio_mix2_.data.data(), p.audio_mix2_.size());
    get_tensor(in, p.text_proj_.data.data(), p.text_proj_.size());
    get_tensor(in, p.text_bias_.data(), p.text_bias_.size());
    get_tensor(in, p.audio_proj_.data.data(), p.audio_proj_.size());
    get_tensor(in, p.audio_bias_.data(), p.audio_bias_.size());
    if (!in) throw std::runtime_error("checkpoint load: truncated file " + path);
    return p;
}

std::string EncoderParams::fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](const double* data, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            std::uint64_t bits;
            std::memcpy(&bits, &data[i], 8);
            for (int b = 0; b < 8; ++b) {
                h ^= (bits >> (8 * b)) & 0xff;
                h *= 0x100000001b3ull;
            }
        }
    };
    mix(token_table_.data.data(), token_table_.size());
    mix(audio_mix1_.data.data(), audio_mix1_.size());
    mix(audio_mix2_.data.data(), audio_mix2_.size());
    mix(text_proj_.data.data(), text_proj_.size());
    mix(text_bias_.data(), text_bias_.size());
    mix(audio_proj_.data.data(), audio_proj_.size());
    mix(audio_bias_.data(), audio_bias_.size());
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

bool EncoderParams::operator==(const EncoderParams& o) const {
    return token_table_.data == o.token_table_.data && audio_mix1_.data == o.audio_mix1_.data &&
           audio_mix2_.data == o.audio_mix2_.data && text_proj_.data == o.text_proj_.data &&
           text_bias_ == o.text_bias_ && audio_proj_.data == o.audio_proj_.data &&
           audio_bias_ == o.audio_bias_;
}

}  // namespace talm

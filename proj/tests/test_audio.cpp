#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "talm/audio.hpp"
#include "talm/encoder.hpp"
#include "talm/rng.hpp"

using namespace talm;

namespace {

CorpusSpec toy_spec(int classes = 10, std::uint64_t seed = 7) {
    CorpusSpec spec;
    spec.num_classes = classes;
    spec.clip_duration = 1.0;
    spec.sample_rate = 8000;
    spec.seed = seed;
    spec.clips_per_class = 4;
    return spec;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("synth_clip is deterministic and bounded") {
    const CorpusSpec spec = toy_spec();
    const Waveform a = synth_clip(3, 1, spec);
    const Waveform b = synth_clip(3, 1, spec);
    CHECK(a.samples == b.samples);  // bitwise
    CHECK(a.samples.size() == 8000);
    CHECK(a.class_ids == std::vector<int>{3});
    double peak = 0.0;
    for (double s : a.samples) peak = std::max(peak, std::fabs(s));
    CHECK(peak <= 0.9);
    CHECK(peak > 0.1);
}

TEST_CASE("synth_clip property: every instance stays in [-1, 1]") {
    const CorpusSpec spec = toy_spec();
    Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        const int cls = static_cast<int>(rng.below(spec.num_classes));
        const Waveform w = synth_clip(cls, rng.next_u64(), spec);
        for (double s : w.samples) {
            REQUIRE(s <= 1.0);
            REQUIRE(s >= -1.0);
        }
    }
}

TEST_CASE("classes have distinct spectral signatures") {
    const CorpusSpec spec = toy_spec();
    const FeatureConfig feat;
    const Mat e0 = band_energies(synth_clip(0, 0, spec), feat);
    const Mat e1 = band_energies(synth_clip(1, 0, spec), feat);
    double dist = 0.0;
    for (std::size_t i = 0; i < e0.data.size(); ++i) {
        const double d = e0.data[i] - e1.data[i];
        dist += d * d;
    }
    CHECK(dist > 0.0);
}

TEST_CASE("classes are separable by a nearest-centroid probe on features") {
    const CorpusSpec spec = toy_spec();
    const FeatureConfig feat;
    auto pooled = [&](int cls, int inst) {
        const Mat e = band_energies(synth_clip(cls, static_cast<std::uint64_t>(inst), spec), feat);
        Vec v(e.rows, 0.0);
        for (std::size_t b = 0; b < e.rows; ++b)
            for (std::size_t t = 0; t < e.cols; ++t) v[b] += e.at(b, t) / static_cast<double>(e.cols);
        return v;
    };
    std::vector<Vec> centroids;
    for (int k = 0; k < spec.num_classes; ++k) {
        Vec c(static_cast<std::size_t>(feat.num_bands), 0.0);
        for (int inst = 0; inst < 3; ++inst) {
            const Vec v = pooled(k, inst);
            for (std::size_t i = 0; i < c.size(); ++i) c[i] += v[i] / 3.0;
        }
        centroids.push_back(c);
    }
    int hits = 0;
    for (int k = 0; k < spec.num_classes; ++k) {
        const Vec v = pooled(k, 3);  // held-out instance
        int best = -1;
        double best_dist = 1e300;
        for (int c = 0; c < spec.num_classes; ++c) {
            double d = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i)
                d += (v[i] - centroids[static_cast<std::size_t>(c)][i]) *
                     (v[i] - centroids[static_cast<std::size_t>(c)][i]);
            if (d < best_dist) {
                best_dist = d;
                best = c;
            }
        }
        if (best == k) ++hits;
    }
    CHECK(hits >= 9);  // linear probe separates the toy classes
}

TEST_CASE("concat preserves halves and order") {
    const CorpusSpec spec = toy_spec();
    const Waveform a = synth_clip(0, 0, spec);
    const Waveform b = synth_clip(1, 0, spec);
    const Waveform ab = concat_clips(a, b);
    CHECK(ab.samples.size() == 16000);
    CHECK(ab.class_ids == std::vector<int>{0, 1});
    CHECK(ab.relation == AudioRelation::Concat);

    const std::vector<double> first(ab.samples.begin(), ab.samples.begin() + 8000);
    const std::vector<double> second(ab.samples.begin() + 8000, ab.samples.end());
    CHECK(first == a.samples);
    CHECK(second == b.samples);

    const Waveform ba = concat_clips(b, a);
    CHECK(ab.samples != ba.samples);
}

TEST_CASE("concat rejects mismatched inputs") {
    const CorpusSpec spec = toy_spec();
    Waveform a = synth_clip(0, 0, spec);
    Waveform b = synth_clip(1, 0, spec);
    b.sample_rate = 16000;
    CHECK_THROWS_AS(concat_clips(a, b), std::invalid_argument);
    Waveform c = synth_clip(1, 0, spec);
    Waveform ab = concat_clips(a, c);
    CHECK_THROWS_AS(concat_clips(ab, a), std::invalid_argument);
}

TEST_CASE("overlay is a commutative mean with bounded peak") {
    const CorpusSpec spec = toy_spec();
    const Waveform a = synth_clip(0, 0, spec);
    const Waveform b = synth_clip(1, 0, spec);

    const Waveform ab = overlay_clips(a, b);
    const Waveform ba = overlay_clips(b, a);
    CHECK(ab.samples == ba.samples);  // bitwise commutativity
    CHECK(ab.samples.size() == a.samples.size());

    const Waveform aa = overlay_clips(a, a);
    CHECK(aa.samples == a.samples);  // mean of identical signals

    // two clips rescaled to 0.9 peak still mix within the limit
    Waveform a9 = a, b9 = b;
    auto rescale = [](Waveform& w) {
        double peak = 0.0;
        for (double s : w.samples) peak = std::max(peak, std::fabs(s));
        for (double& s : w.samples) s *= 0.9 / peak;
    };
    rescale(a9);
    rescale(b9);
    const Waveform mixed = overlay_clips(a9, b9);
    double peak = 0.0;
    for (double s : mixed.samples) peak = std::max(peak, std::fabs(s));
    CHECK(peak <= 0.9 + 1e-12);

    Waveform shorter = a;
    shorter.samples.resize(4000);
    CHECK_THROWS_AS(overlay_clips(shorter, b), std::invalid_argument);
}

TEST_CASE("time inversion is an involution that swaps event order only") {
    const CorpusSpec spec = toy_spec();
    const Waveform a = synth_clip(2, 0, spec);
    const Waveform b = synth_clip(5, 0, spec);

    const Waveform inv = apply_time_inversion(a, b);
    CHECK(inv.class_ids == std::vector<int>{5, 2});

    // each half keeps its per-sample content
    const std::vector<double> first(inv.samples.begin(), inv.samples.begin() + 8000);
    const std::vector<double> second(inv.samples.begin() + 8000, inv.samples.end());
    CHECK(first == b.samples);
    CHECK(second == a.samples);

    // applying the inversion to the swapped pair restores concat(a, b)
    const Waveform restored = apply_time_inversion(b, a);
    CHECK(restored.samples == concat_clips(a, b).samples);
    CHECK(restored.class_ids == concat_clips(a, b).class_ids);
}

TEST_CASE("wav round trip stays within one quantization step") {
    const CorpusSpec spec = toy_spec();
    const Waveform w = synth_clip(4, 2, spec);
    const std::string path = temp_path("talm_roundtrip.wav");
    write_wav(path, w);
    const Waveform r = read_wav(path);

    CHECK(r.sample_rate == w.sample_rate);
    REQUIRE(r.samples.size() == w.samples.size());
    double max_err = 0.0;
    for (std::size_t i = 0; i < w.samples.size(); ++i)
        max_err = std::max(max_err, std::fabs(w.samples[i] - r.samples[i]));
    CHECK(max_err <= std::pow(2.0, -15.0));
    std::remove(path.c_str());
}

TEST_CASE("wav reader rejects malformed input") {
    const std::string path = temp_path("talm_broken.wav");
    {
        const CorpusSpec spec = toy_spec();
        write_wav(path, synth_clip(0, 0, spec));
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));  // truncate
    }
    CHECK_THROWS_AS(read_wav(path), std::runtime_error);
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "NOTAWAVFILE";
    }
    CHECK_THROWS_AS(read_wav(path), std::runtime_error);
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_wav(temp_path("talm_missing_file.wav")), std::runtime_error);
}

TEST_CASE("synth_clip validates the class index") {
    const CorpusSpec spec = toy_spec(5);
    CHECK_THROWS_AS(synth_clip(5, 0, spec), std::out_of_range);
    CHECK_THROWS_AS(synth_clip(-1, 0, spec), std::out_of_range);
}

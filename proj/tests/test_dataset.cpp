#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "talm/dataset.hpp"
#include "talm/rng.hpp"

using namespace talm;

namespace {

CorpusSpec toy_spec(int classes = 10, std::uint64_t seed = 3) {
    CorpusSpec spec;
    spec.num_classes = classes;
    spec.clip_duration = 1.0;
    spec.sample_rate = 8000;
    spec.seed = seed;
    spec.clips_per_class = 4;
    return spec;
}

}  // namespace

TEST_CASE("pair enumeration counts") {
    CHECK(enumerate_pairs(50).size() == 2450);
    CHECK(enumerate_pairs(10).size() == 90);
    CHECK(enumerate_pairs(2) == std::vector<std::pair<int, int>>{{0, 1}, {1, 0}});
    CHECK_THROWS_AS(enumerate_pairs(1), std::invalid_argument);
}

TEST_CASE("item set sizes follow the pair counts") {
    CHECK(build_stage_a_items(toy_spec(10)).size() == 90);
    CHECK(build_stage_b_items(toy_spec(10)).size() == 270);

    CorpusSpec big = toy_spec(50);
    CHECK(build_stage_a_items(big).size() == 2450);
    CHECK(build_stage_b_items(big).size() == 7350);
}

TEST_CASE("stage B items carry all three relations per ordered pair") {
    const auto items = build_stage_b_items(toy_spec(4));
    std::map<std::pair<int, int>, std::set<CaptionRelation>> seen;
    for (const auto& item : items) seen[item.ordered_pair()].insert(item.relation);
    CHECK(seen.size() == 12);
    for (const auto& [pair, rels] : seen) {
        CHECK(rels == std::set<CaptionRelation>{CaptionRelation::Before, CaptionRelation::After,
                                                CaptionRelation::While});
    }
}

TEST_CASE("dual audio is twice the clip length, overlay audio once") {
    const CorpusSpec spec = toy_spec(4);
    for (const StageARow& row : build_stage_a_items(spec)) {
        CHECK(materialize_audio(row.dual, spec).samples.size() == 16000);
        CHECK(materialize_audio(row.single, spec).samples.size() == 8000);
        break;
    }
    for (const DatasetItem& item : build_stage_b_items(spec)) {
        const auto n = materialize_audio(item, spec).samples.size();
        if (item.relation == CaptionRelation::While)
            CHECK(n == 8000);
        else
            CHECK(n == 16000);
    }
}

TEST_CASE("after-items place the first-named class second in the audio") {
    const CorpusSpec spec = toy_spec(4);
    for (const DatasetItem& item : build_stage_b_items(spec)) {
        const Waveform w = materialize_audio(item, spec);
        if (item.relation == CaptionRelation::Before)
            CHECK(w.class_ids == std::vector<int>{item.class_i, item.class_j});
        if (item.relation == CaptionRelation::After)
            CHECK(w.class_ids == std::vector<int>{item.class_j, item.class_i});
    }
}

TEST_CASE("split partitions unordered pairs deterministically") {
    const PairSplit s1 = split_pairs(10, 0.7, 99);
    const PairSplit s2 = split_pairs(10, 0.7, 99);
    CHECK(s1.train == s2.train);
    CHECK(s1.test == s2.test);

    CHECK(s1.train.size() == 31);  // floor(0.7 * 45)
    CHECK(s1.test.size() == 14);
    for (const auto& p : s1.train) CHECK(s1.test.count(p) == 0);

    const PairSplit s3 = split_pairs(10, 0.7, 100);
    CHECK(s1.train != s3.train);  // different seed, different shuffle

    CHECK_THROWS_AS(split_pairs(10, 0.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(split_pairs(2, 0.1, 0), std::invalid_argument);  // empty train side
}

TEST_CASE("stage B batches are index-aligned across blocks") {
    const CorpusSpec spec = toy_spec(10);
    const auto items = build_stage_b_items(spec);
    const TrainingBatch batch = make_stage_b_batch(items, 8, 123);

    REQUIRE(batch.forward.size() == 8);
    REQUIRE(batch.reversed.size() == 8);
    REQUIRE(batch.overlaid.size() == 8);

    std::set<std::pair<int, int>> used;
    for (std::size_t i = 0; i < 8; ++i) {
        const auto& f = batch.forward[i];
        const auto& r = batch.reversed[i];
        const auto& o = batch.overlaid[i];
        // reversed row is the order inversion of the forward row's pair
        CHECK(r.class_i == f.class_j);
        CHECK(r.class_j == f.class_i);
        CHECK(r.relation == f.relation);
        // overlaid row shares the forward row's pair
        CHECK(o.relation == CaptionRelation::While);
        CHECK(o.unordered_pair() == f.unordered_pair());
        // no duplicate underlying pair within the block
        CHECK(used.insert(f.unordered_pair()).second);
    }

    const TrainingBatch again = make_stage_b_batch(items, 8, 123);
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(again.forward[i].ordered_pair() == batch.forward[i].ordered_pair());
        CHECK(again.forward[i].relation == batch.forward[i].relation);
    }

    CHECK_THROWS_AS(make_stage_b_batch(items, 100, 1), std::runtime_error);
}

TEST_CASE("stage A batches hold n singles plus n duals") {
    const CorpusSpec spec = toy_spec(10);
    const auto rows = build_stage_a_items(spec);
    const TrainingBatch batch = make_stage_a_batch(rows, 16, 5);
    CHECK(batch.singles.size() == 16);
    CHECK(batch.duals.size() == 16);
    std::set<std::pair<int, int>> dual_pairs;
    for (const auto& d : batch.duals) CHECK(dual_pairs.insert(d.unordered_pair()).second);
    CHECK_THROWS_AS(make_stage_a_batch(rows, 500, 5), std::runtime_error);
}

TEST_CASE("epoch plans cover items without duplicated pairs per batch") {
    const CorpusSpec spec = toy_spec(10);
    const auto items = build_stage_b_items(spec);
    const PairSplit split = split_pairs(10, 0.7, spec.seed);
    std::vector<DatasetItem> train;
    for (const auto& it : items)
        if (split.in_train(it)) train.push_back(it);

    const auto plan = plan_stage_b_epoch(train, 16, 77);
    CHECK(plan.size() >= 6);  // 124 anchors in batches of <= 16
    std::size_t total = 0;
    for (const auto& b : plan) {
        std::set<std::pair<int, int>> used;
        for (const auto& f : b.forward) CHECK(used.insert(f.unordered_pair()).second);
        total += b.forward.size();
    }
    CHECK(total >= 110);

    const auto plan2 = plan_stage_b_epoch(train, 16, 77);
    CHECK(plan2.size() == plan.size());
    const auto plan3 = plan_stage_b_epoch(train, 16, 78);
    bool differs = plan3.size() != plan.size();
    if (!differs)
        differs = plan3[0].forward[0].ordered_pair() != plan[0].forward[0].ordered_pair() ||
                  plan3[0].forward[0].relation != plan[0].forward[0].relation;
    CHECK(differs);
}

TEST_CASE("one_item_per_pair mode emits a single xor a dual per row") {
    const auto rows = build_stage_a_items(toy_spec(10), true);
    CHECK(rows.size() == 90);
    std::size_t singles = 0, duals = 0;
    for (const auto& row : rows) {
        CHECK(row.has_single != row.has_dual);
        singles += row.has_single ? 1 : 0;
        duals += row.has_dual ? 1 : 0;
    }
    CHECK(singles + duals == 90);
    CHECK(singles > 20);
    CHECK(duals > 20);
}

TEST_CASE("corpus emission is idempotent and counts add up") {
    namespace fs = std::filesystem;
    const CorpusSpec spec = toy_spec(4, 21);
    const fs::path dir = fs::temp_directory_path() / "talm_corpus_test";
    fs::remove_all(dir);

    const ManifestPaths paths = write_corpus(spec, 0.7, dir.string(), false);

    auto slurp = [](const std::string& p) {
        std::ifstream in(p);
        return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };
    const std::string manifest1 = slurp(paths.manifest_json);
    const std::string items1 = slurp(paths.items_jsonl);

    write_corpus(spec, 0.7, dir.string(), false);
    CHECK(slurp(paths.manifest_json) == manifest1);
    CHECK(slurp(paths.items_jsonl) == items1);

    // rows: K*(K-1) stage-A singles + K*(K-1) duals + 3*K*(K-1) composites
    std::size_t lines = 0;
    for (char ch : items1)
        if (ch == '\n') ++lines;
    CHECK(lines == 12 + 12 + 36);

    CHECK(fs::exists(dir / "vocabulary.json"));
    std::size_t wavs = 0;
    for (const auto& entry : fs::directory_iterator(dir / "wavs")) {
        (void)entry;
        ++wavs;
    }
    CHECK(wavs == 4 * 4);  // singles only when composite wavs are disabled
    fs::remove_all(dir);
}

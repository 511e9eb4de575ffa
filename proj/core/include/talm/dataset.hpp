#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "talm/audio.hpp"
#include "talm/captions.hpp"

namespace talm {

/// One training item: a caption plus the recipe for its audio. Audio is
/// materialized on demand so large item lists stay cheap.
struct DatasetItem {
    CaptionRelation relation = CaptionRelation::Single;
    int class_i = -1;  // first class named in the caption
    int class_j = -1;  // second class, or -1 for singles
    Caption caption;
    int inst_i = 0;  // clip instance per class, in [0, clips_per_class)
    int inst_j = 0;

    std::pair<int, int> ordered_pair() const { return {class_i, class_j}; }
    std::pair<int, int> unordered_pair() const {
        return class_i <= class_j ? std::pair{class_i, class_j} : std::pair{class_j, class_i};
    }
};

/// Row of the first-stage item set: one single and one dual item per ordered
/// class pair. A flag selects the alternative reading where each ordered pair
/// contributes a single XOR a dual.
struct StageARow {
    DatasetItem single;
    DatasetItem dual;
    bool has_single = true;
    bool has_dual = true;
};

/// All ordered pairs (i, j), i != j; count = K*(K-1).
std::vector<std::pair<int, int>> enumerate_pairs(int num_classes);

std::vector<StageARow> build_stage_a_items(const CorpusSpec& spec, bool one_item_per_pair = false);

/// Three items per ordered pair: before (i then j), after (j then i, caption
/// names the later event first) and while (overlay). Count = 3*K*(K-1).
std::vector<DatasetItem> build_stage_b_items(const CorpusSpec& spec);

/// Compose the item's audio from deterministic source clips.
Waveform materialize_audio(const DatasetItem& item, const CorpusSpec& spec);

/// Train/test partition over unordered class pairs: both orderings and all
/// relations of a pair land on the same side. Train size = floor(ratio * n).
struct PairSplit {
    std::set<std::pair<int, int>> train;
    std::set<std::pair<int, int>> test;

    bool in_train(const DatasetItem& item) const { return train.count(item.unordered_pair()) > 0; }
};

PairSplit split_pairs(int num_classes, double ratio, std::uint64_t seed);

enum class Stage { A, B };

/// Block-structured batch. Stage A: singles + duals. Stage B: index-aligned
/// forward / reversed / overlaid blocks sharing one class pair per row.
struct TrainingBatch {
    Stage stage = Stage::A;
    // stage A
    std::vector<DatasetItem> singles;
    std::vector<DatasetItem> duals;
    // stage B
    std::vector<DatasetItem> forward;
    std::vector<DatasetItem> reversed;
    std::vector<DatasetItem> overlaid;
};

TrainingBatch make_stage_a_batch(const std::vector<StageARow>& rows, std::size_t n,
                                 std::uint64_t seed);

TrainingBatch make_stage_b_batch(const std::vector<DatasetItem>& items, std::size_t n,
                                 std::uint64_t seed);

/// Deterministic full pass over the item pool: seeded shuffle, then greedy
/// packing into batches of at most n rows with distinct unordered pairs per
/// block. Final short batches are kept if they have at least 2 rows.
std::vector<TrainingBatch> plan_stage_a_epoch(const std::vector<StageARow>& rows, std::size_t n,
                                              std::uint64_t seed);
std::vector<TrainingBatch> plan_stage_b_epoch(const std::vector<DatasetItem>& items, std::size_t n,
                                              std::uint64_t seed);

/// Corpus-on-disk description: manifest.json (spec, class names, wav files)
/// plus items.jsonl (one JSON object per item).
struct ManifestPaths {
    std::string manifest_json;
    std::string items_jsonl;
};

ManifestPaths write_corpus(const CorpusSpec& spec, double split_ratio, const std::string& out_dir,
                           bool write_composite_wavs = true);

}  // namespace talm

#include "talm/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "talm/rng.hpp"

namespace talm {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Training items draw clip instances from [0, clips_per_class - 1); the last
/// instance of every class is reserved for held-out evaluation audio.
int pick_train_instance(Rng& rng, const CorpusSpec& spec) {
    const int pool = spec.clips_per_class - 1;
    return pool <= 1 ? 0 : static_cast<int>(rng.below(static_cast<std::uint64_t>(pool)));
}

Rng item_rng(const CorpusSpec& spec, const char* tag, int i, int j) {
    std::uint64_t s = sub_seed(spec.seed, tag);
    s = mix_seed(s, static_cast<std::uint64_t>(i));
    s = mix_seed(s, static_cast<std::uint64_t>(j));
    return Rng(s);
}

const char* relation_wav_tag(CaptionRelation r) {
    switch (r) {
        case CaptionRelation::Before: return "before";
        case CaptionRelation::After: return "after";
        case CaptionRelation::While: return "while";
        default: return "other";
    }
}

}  // namespace

std::vector<std::pair<int, int>> enumerate_pairs(int num_classes) {
    if (num_classes < 2) throw std::invalid_argument("enumerate_pairs: need at least 2 classes");
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(num_classes) * (num_classes - 1));
    for (int i = 0; i < num_classes; ++i)
        for (int j = 0; j < num_classes; ++j)
            if (i != j) pairs.emplace_back(i, j);
    return pairs;
}

std::vector<StageARow> build_stage_a_items(const CorpusSpec& spec, bool one_item_per_pair) {
    spec.validate();
    std::vector<StageARow> rows;
    for (auto [i, j] : enumerate_pairs(spec.num_classes)) {
        Rng rng = item_rng(spec, "item-stage-a", i, j);

        StageARow row;
        row.single.relation = CaptionRelation::Single;
        row.single.class_i = i;
        row.single.caption = single_caption(i);
        row.single.inst_i = pick_train_instance(rng, spec);

        row.dual.relation = CaptionRelation::Dual;
        row.dual.class_i = i;
        row.dual.class_j = j;
        row.dual.caption = dual_caption(i, j);
        row.dual.inst_i = pick_train_instance(rng, spec);
        row.dual.inst_j = pick_train_instance(rng, spec);

        if (one_item_per_pair) {
            if (rng.below(2) == 0)
                row.has_dual = false;
            else
                row.has_single = false;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<DatasetItem> build_stage_b_items(const CorpusSpec& spec) {
    spec.validate();
    std::vector<DatasetItem> items;
    const CaptionRelation relations[3] = {CaptionRelation::Before, CaptionRelation::After,
                                          CaptionRelation::While};
    for (auto [i, j] : enumerate_pairs(spec.num_classes)) {
        for (CaptionRelation rel : relations) {
            Rng rng = item_rng(spec, relation_wav_tag(rel), i, j);
            DatasetItem item;
            item.relation = rel;
            item.class_i = i;
            item.class_j = j;
            item.caption = temporal_caption(i, j, rel);
            item.inst_i = pick_train_instance(rng, spec);
            item.inst_j = pick_train_instance(rng, spec);
            items.push_back(std::move(item));
        }
    }
    return items;
}

Waveform materialize_audio(const DatasetItem& item, const CorpusSpec& spec) {
    auto clip = [&](int cls, int inst) {
        return synth_clip(cls, static_cast<std::uint64_t>(inst), spec);
    };
    switch (item.relation) {
        case CaptionRelation::Single:
            return clip(item.class_i, item.inst_i);
        case CaptionRelation::Dual:
        case CaptionRelation::Before:
            return concat_clips(clip(item.class_i, item.inst_i), clip(item.class_j, item.inst_j));
        case CaptionRelation::After:
            // The event named first in the caption occurs second in the audio.
            return concat_clips(clip(item.class_j, item.inst_j), clip(item.class_i, item.inst_i));
        case CaptionRelation::While:
            return overlay_clips(clip(item.class_i, item.inst_i), clip(item.class_j, item.inst_j));
        case CaptionRelation::Prompt:
            break;
    }
    throw std::invalid_argument("materialize_audio: prompt items carry no audio");
}

PairSplit split_pairs(int num_classes, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw std::invalid_argument("split_pairs: ratio must lie in (0, 1)");
    std::vector<std::pair<int, int>> keys;
    for (int i = 0; i < num_classes; ++i)
        for (int j = i + 1; j < num_classes; ++j) keys.emplace_back(i, j);

    Rng rng(sub_seed(seed, "pair-split"));
    seeded_shuffle(keys, rng);

    const auto n_train = static_cast<std::size_t>(ratio * static_cast<double>(keys.size()));
    if (n_train == 0 || n_train == keys.size())
        throw std::invalid_argument("split_pairs: degenerate split (empty side)");

    PairSplit split;
    for (std::size_t k = 0; k < keys.size(); ++k)
        (k < n_train ? split.train : split.test).insert(keys[k]);
    return split;
}

namespace {

/// Greedy selection of up to n entries with pairwise-distinct unordered pairs,
/// in the order given. Returns the chosen indices; chosen entries are marked.
template <typename GetPair>
std::vector<std::size_t> pick_distinct(const std::vector<std::size_t>& order,
                                       std::vector<bool>& taken, std::size_t n,
                                       GetPair&& unordered_of) {
    std::vector<std::size_t> chosen;
    std::set<std::pair<int, int>> used;
    for (std::size_t idx : order) {
        if (chosen.size() == n) break;
        if (taken[idx]) continue;
        auto key = unordered_of(idx);
        if (used.count(key)) continue;
        used.insert(key);
        taken[idx] = true;
        chosen.push_back(idx);
    }
    return chosen;
}

}  // namespace

TrainingBatch make_stage_a_batch(const std::vector<StageARow>& rows, std::size_t n,
                                 std::uint64_t seed) {
    std::vector<std::size_t> single_idx, dual_idx;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k].has_single) single_idx.push_back(k);
        if (rows[k].has_dual) dual_idx.push_back(k);
    }
    Rng rng(sub_seed(seed, "stage-a-batch"));
    seeded_shuffle(single_idx, rng);
    seeded_shuffle(dual_idx, rng);

    std::vector<bool> taken_s(rows.size(), false), taken_d(rows.size(), false);
    // distinctness is keyed on the row's underlying class pair (the dual
    // recipe keeps it even in one-item mode); singles may repeat classes
    // whenever n exceeds K
    auto s_pick = pick_distinct(single_idx, taken_s, n,
                                [&](std::size_t k) { return rows[k].dual.unordered_pair(); });
    auto d_pick = pick_distinct(dual_idx, taken_d, n,
                                [&](std::size_t k) { return rows[k].dual.unordered_pair(); });
    if (s_pick.size() < n || d_pick.size() < n)
        throw std::runtime_error("make_stage_a_batch: insufficient items for block size");

    TrainingBatch batch;
    batch.stage = Stage::A;
    for (std::size_t k : s_pick) batch.singles.push_back(rows[k].single);
    for (std::size_t k : d_pick) batch.duals.push_back(rows[k].dual);
    return batch;
}

namespace {

struct StageBIndex {
    std::map<std::tuple<int, int, int>, std::size_t> by_key;  // (relation, i, j)

    explicit StageBIndex(const std::vector<DatasetItem>& items) {
        for (std::size_t k = 0; k < items.size(); ++k)
            by_key[{static_cast<int>(items[k].relation), items[k].class_i, items[k].class_j}] = k;
    }

    std::size_t lookup(CaptionRelation rel, int i, int j) const {
        auto it = by_key.find({static_cast<int>(rel), i, j});
        if (it == by_key.end())
            throw std::runtime_error("stage B batch: missing counterpart item");
        return it->second;
    }
};

TrainingBatch assemble_stage_b(const std::vector<DatasetItem>& items,
                               const StageBIndex& index,
                               const std::vector<std::size_t>& anchors) {
    TrainingBatch batch;
    batch.stage = Stage::B;
    for (std::size_t k : anchors) {
        const DatasetItem& f = items[k];
        batch.forward.push_back(f);
        batch.reversed.push_back(items[index.lookup(f.relation, f.class_j, f.class_i)]);
        batch.overlaid.push_back(items[index.lookup(CaptionRelation::While, f.class_i, f.class_j)]);
    }
    return batch;
}

}  // namespace

TrainingBatch make_stage_b_batch(const std::vector<DatasetItem>& items, std::size_t n,
                                 std::uint64_t seed) {
    StageBIndex index(items);
    std::vector<std::size_t> anchor_idx;
    for (std::size_t k = 0; k < items.size(); ++k)
        if (items[k].relation == CaptionRelation::Before ||
            items[k].relation == CaptionRelation::After)
            anchor_idx.push_back(k);

    Rng rng(sub_seed(seed, "stage-b-batch"));
    seeded_shuffle(anchor_idx, rng);
    std::vector<bool> taken(items.size(), false);
    auto picked = pick_distinct(anchor_idx, taken, n,
                                [&](std::size_t k) { return items[k].unordered_pair(); });
    if (picked.size() < n)
        throw std::runtime_error("make_stage_b_batch: insufficient items for block size");
    return assemble_stage_b(items, index, picked);
}

std::vector<TrainingBatch> plan_stage_a_epoch(const std::vector<StageARow>& rows, std::size_t n,
                                              std::uint64_t seed) {
    std::vector<std::size_t> single_idx, dual_idx;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k].has_single) single_idx.push_back(k);
        if (rows[k].has_dual) dual_idx.push_back(k);
    }
    Rng rng(sub_seed(seed, "stage-a-epoch"));
    seeded_shuffle(single_idx, rng);
    seeded_shuffle(dual_idx, rng);

    std::vector<bool> taken_s(rows.size(), false), taken_d(rows.size(), false);
    std::vector<TrainingBatch> plan;
    while (true) {
        auto s_pick = pick_distinct(single_idx, taken_s, n,
                                    [&](std::size_t k) { return rows[k].dual.unordered_pair(); });
        auto d_pick = pick_distinct(dual_idx, taken_d, n,
                                    [&](std::size_t k) { return rows[k].dual.unordered_pair(); });
        const std::size_t m = std::min(s_pick.size(), d_pick.size());
        if (m < 2) break;
        TrainingBatch batch;
        batch.stage = Stage::A;
        for (std::size_t t = 0; t < m; ++t) {
            batch.singles.push_back(rows[s_pick[t]].single);
            batch.duals.push_back(rows[d_pick[t]].dual);
        }
        plan.push_back(std::move(batch));
    }
    return plan;
}

std::vector<TrainingBatch> plan_stage_b_epoch(const std::vector<DatasetItem>& items, std::size_t n,
                                              std::uint64_t seed) {
    StageBIndex index(items);
    std::vector<std::size_t> anchor_idx;
    for (std::size_t k = 0; k < items.size(); ++k)
        if (items[k].relation == CaptionRelation::Before ||
            items[k].relation == CaptionRelation::After)
            anchor_idx.push_back(k);

    Rng rng(sub_seed(seed, "stage-b-epoch"));
    seeded_shuffle(anchor_idx, rng);
    std::vector<bool> taken(items.size(), false);
    std::vector<TrainingBatch> plan;
    while (true) {
        auto picked = pick_distinct(anchor_idx, taken, n,
                                    [&](std::size_t k) { return items[k].unordered_pair(); });
        if (picked.size() < 2) break;
        plan.push_back(assemble_stage_b(items, index, picked));
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Corpus emission
// ---------------------------------------------------------------------------

ManifestPaths write_corpus(const CorpusSpec& spec, double split_ratio, const std::string& out_dir,
                           bool write_composite_wavs) {
    spec.validate();
    const fs::path root(out_dir);
    const fs::path wav_dir = root / "wavs";
    fs::create_directories(wav_dir);

    const PairSplit split = split_pairs(spec.num_classes, split_ratio, spec.seed);

    json manifest;
    manifest["num_classes"] = spec.num_classes;
    manifest["clip_duration"] = spec.clip_duration;
    manifest["sample_rate"] = spec.sample_rate;
    manifest["clips_per_class"] = spec.clips_per_class;
    manifest["seed"] = spec.seed;
    manifest["split_ratio"] = split_ratio;

    json names = json::array();
    for (int k = 0; k < spec.num_classes; ++k) names.push_back(class_name(k));
    manifest["class_names"] = names;

    json singles = json::array();
    for (int k = 0; k < spec.num_classes; ++k) {
        for (int m = 0; m < spec.clips_per_class; ++m) {
            const std::string rel_path =
                "wavs/single_c" + std::to_string(k) + "_i" + std::to_string(m) + ".wav";
            write_wav((root / rel_path).string(), synth_clip(k, m, spec));
            json row;
            row["class"] = k;
            row["instance"] = m;
            row["held_out"] = (m == spec.clips_per_class - 1);
            row["wav_path"] = rel_path;
            singles.push_back(row);
        }
    }
    manifest["singles"] = singles;

    std::ofstream items_out(root / "items.jsonl", std::ios::trunc);
    if (!items_out) throw std::runtime_error("write_corpus: cannot open items.jsonl");

    auto emit_item = [&](const DatasetItem& item, const char* kind, const std::string& wav_rel) {
        if (write_composite_wavs) write_wav((root / wav_rel).string(), materialize_audio(item, spec));
        json row;
        row["kind"] = kind;
        row["pair"] = item.class_j >= 0 ? json::array({item.class_i, item.class_j})
                                        : json::array({item.class_i});
        row["relation"] = to_string(item.relation);
        row["wav_path"] = wav_rel;
        row["caption"] = item.caption.text;
        row["split"] = (item.class_j < 0 || split.in_train(item)) ? "train" : "test";
        items_out << row.dump() << "\n";
    };

    for (const StageARow& row : build_stage_a_items(spec)) {
        if (row.has_single) {
            const std::string rel_path = "wavs/single_c" + std::to_string(row.single.class_i) +
                                         "_i" + std::to_string(row.single.inst_i) + ".wav";
            emit_item(row.single, "stage_a_single", rel_path);
        }
        if (row.has_dual)
            emit_item(row.dual, "stage_a_dual",
                      "wavs/dual_" + std::to_string(row.dual.class_i) + "_" +
                          std::to_string(row.dual.class_j) + ".wav");
    }
    for (const DatasetItem& item : build_stage_b_items(spec))
        emit_item(item, "stage_b",
                  std::string("wavs/") + relation_wav_tag(item.relation) + "_" +
                      std::to_string(item.class_i) + "_" + std::to_string(item.class_j) + ".wav");

    std::vector<std::string> name_list;
    for (int k = 0; k < spec.num_classes; ++k) name_list.push_back(class_name(k));
    {
        std::ofstream vocab_out(root / "vocabulary.json", std::ios::trunc);
        vocab_out << Vocabulary::build(name_list).to_json() << "\n";
    }
    {
        std::ofstream manifest_out(root / "manifest.json", std::ios::trunc);
        manifest_out << manifest.dump(2) << "\n";
    }

    return {(root / "manifest.json").string(), (root / "items.jsonl").string()};
}

}  // namespace talm

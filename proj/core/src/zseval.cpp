#include "talm/zseval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "talm/rng.hpp"

namespace talm::zseval {

namespace {

std::string substitute(const std::string& tmpl, const std::string& name) {
    const std::string key = "{class}";
    const auto pos = tmpl.find(key);
    if (pos == std::string::npos) return tmpl + " " + name;
    return tmpl.substr(0, pos) + name + tmpl.substr(pos + key.size());
}

Caption prompt_caption(const std::string& text, std::vector<int> classes) {
    Caption c;
    c.text = text;
    c.relation = CaptionRelation::Prompt;
    c.class_ids = std::move(classes);
    return c;
}

std::size_t argmax_lowest(const Vec& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

std::pair<std::size_t, std::size_t> top2_lowest(const Vec& v) {
    const std::size_t first = argmax_lowest(v);
    std::size_t second = first == 0 ? 1 : 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i == first) continue;
        if (v[i] > v[second]) second = i;
    }
    return {first, second};
}

bool contains_word(const std::string& text, const std::string& word) {
    std::string lower;
    lower.reserve(text.size());
    for (char ch : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    const auto pos = lower.find(word);
    return pos != std::string::npos;
}

}  // namespace

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

TrainedModel::TrainedModel(EncoderParams params, FeatureConfig feat, Vocabulary vocab, double gamma)
    : params_(std::move(params)), feat_(feat), vocab_(std::move(vocab)), gamma_(gamma) {}

Vec TrainedModel::embed_audio(const EvalItem& item) const {
    std::ostringstream key;
    key << static_cast<int>(item.relation);
    for (int c : item.classes) key << ':' << c;
    auto it = audio_memo_.find(key.str());
    if (it != audio_memo_.end()) return it->second;
    Vec z = encode_audio(extract_features(item.audio, feat_), params_);
    return audio_memo_.emplace(key.str(), std::move(z)).first->second;
}

Vec TrainedModel::embed_caption(const Caption& caption) const {
    auto it = caption_memo_.find(caption.text);
    if (it != caption_memo_.end()) return it->second;
    Vec z = encode_text(tokenize(caption.text, vocab_), params_);
    return caption_memo_.emplace(caption.text, std::move(z)).first->second;
}

Vec OracleModel::embed_audio(const EvalItem& item) const {
    const int K = num_classes_;
    Vec v(static_cast<std::size_t>(3 * K + 3), 0.0);
    for (int c : item.classes) v[static_cast<std::size_t>(c)] = 1.0;
    switch (item.relation) {
        case AudioRelation::Single:
            v[static_cast<std::size_t>(3 * K)] = 1.0;
            break;
        case AudioRelation::Concat:
            v[static_cast<std::size_t>(K + item.classes.at(0))] = 1.0;        // first event
            v[static_cast<std::size_t>(2 * K + item.classes.at(1))] = 1.0;    // second event
            v[static_cast<std::size_t>(3 * K + 1)] = 1.0;
            break;
        case AudioRelation::Overlay:
            v[static_cast<std::size_t>(3 * K + 2)] = 1.0;
            break;
    }
    const double n = l2_norm(v);
    for (double& x : v) x /= n;
    return v;
}

Vec OracleModel::embed_caption(const Caption& caption) const {
    const int K = num_classes_;
    Vec v(static_cast<std::size_t>(3 * K + 3), 0.0);
    const auto& ids = caption.class_ids;
    auto presence = [&](int c) { v[static_cast<std::size_t>(c)] = 1.0; };
    auto first = [&](int c) { v[static_cast<std::size_t>(K + c)] = 1.0; };
    auto second = [&](int c) { v[static_cast<std::size_t>(2 * K + c)] = 1.0; };
    auto rel = [&](int r) { v[static_cast<std::size_t>(3 * K + r)] = 1.0; };

    const std::string& t = caption.text;
    if (contains_word(t, "before")) {
        presence(ids.at(0));
        presence(ids.at(1));
        first(ids.at(0));
        second(ids.at(1));
        rel(1);
    } else if (contains_word(t, "after")) {
        presence(ids.at(0));
        presence(ids.at(1));
        first(ids.at(1));
        second(ids.at(0));
        rel(1);
    } else if (contains_word(t, "while") || contains_word(t, "simultaneous")) {
        for (int c : ids) presence(c);
        rel(2);
    } else if (contains_word(t, "first")) {
        presence(ids.at(0));
        first(ids.at(0));
        rel(1);
    } else if (contains_word(t, "second")) {
        presence(ids.at(0));
        second(ids.at(0));
        rel(1);
    } else if (contains_word(t, "combined")) {
        for (int c : ids) presence(c);
        rel(1);
    } else {  // "single sound of X", "The sound of a X"
        for (int c : ids) presence(c);
        rel(0);
    }
    const double n = l2_norm(v);
    for (double& x : v) x /= n;
    return v;
}

Vec zs_classify(const EvalItem& item, const PromptSet& prompts, const ZsModel& model) {
    if (prompts.prompts.empty()) throw std::invalid_argument("zs_classify: empty prompt set");
    const Vec za = model.embed_audio(item);
    Vec logits(prompts.prompts.size());
    for (std::size_t j = 0; j < prompts.prompts.size(); ++j)
        logits[j] = model.gamma() * dot(za, model.embed_caption(prompts.prompts[j]));

    const double m = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double& l : logits) {
        l = std::exp(l - m);
        denom += l;
    }
    for (double& l : logits) l /= denom;
    return logits;
}

// ---------------------------------------------------------------------------
// Evaluation data
// ---------------------------------------------------------------------------

EvalContext build_eval_context(const CorpusSpec& spec, double split_ratio) {
    spec.validate();
    EvalContext ctx;
    ctx.spec = spec;
    ctx.split = split_pairs(spec.num_classes, split_ratio, spec.seed);

    const auto held_out = static_cast<std::uint64_t>(spec.clips_per_class - 1);
    auto clip = [&](int cls) { return synth_clip(cls, held_out, spec); };

    for (int k = 0; k < spec.num_classes; ++k) {
        EvalItem item;
        item.audio = clip(k);
        item.relation = AudioRelation::Single;
        item.classes = {k};
        ctx.singles.push_back(std::move(item));
    }
    for (const auto& [i, j] : ctx.split.test) {
        EvalItem fwd;
        fwd.audio = concat_clips(clip(i), clip(j));
        fwd.relation = AudioRelation::Concat;
        fwd.classes = {i, j};
        ctx.concats.push_back(std::move(fwd));

        EvalItem rev;
        rev.audio = concat_clips(clip(j), clip(i));
        rev.relation = AudioRelation::Concat;
        rev.classes = {j, i};
        ctx.concats.push_back(std::move(rev));

        EvalItem ovl;
        ovl.audio = overlay_clips(clip(i), clip(j));
        ovl.relation = AudioRelation::Overlay;
        ovl.classes = {i, j};
        ctx.overlays.push_back(std::move(ovl));
    }
    return ctx;
}

// ---------------------------------------------------------------------------
// Tasks
// ---------------------------------------------------------------------------

namespace {

PromptSet class_prompts(const EvalContext& ctx, const EvalOptions& opts) {
    PromptSet ps;
    ps.task_tag = "single-class";
    for (int k = 0; k < ctx.spec.num_classes; ++k)
        ps.prompts.push_back(prompt_caption(substitute(opts.task1_prompt, class_name(k)), {k}));
    return ps;
}

}  // namespace

double task1(const EvalContext& ctx, const ZsModel& model, const EvalOptions& opts) {
    const PromptSet ps = class_prompts(ctx, opts);
    std::size_t hits = 0;
    for (const EvalItem& item : ctx.singles) {
        const Vec p = zs_classify(item, ps, model);
        if (static_cast<int>(argmax_lowest(p)) == item.classes.at(0)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(ctx.singles.size());
}

Task2Result task2(const EvalContext& ctx, const ZsModel& model, const EvalOptions& opts) {
    const PromptSet ps = class_prompts(ctx, opts);
    auto run = [&](const std::vector<EvalItem>& items, double& both_acc, double& any_acc) {
        std::size_t both = 0, any = 0;
        for (const EvalItem& item : items) {
            const Vec p = zs_classify(item, ps, model);
            const auto [t1, t2] = top2_lowest(p);
            const std::set<int> picked = {static_cast<int>(t1), static_cast<int>(t2)};
            const std::set<int> truth = {item.classes.at(0), item.classes.at(1)};
            if (picked == truth) ++both;
            if (picked.count(item.classes.at(0)) || picked.count(item.classes.at(1))) ++any;
        }
        both_acc = static_cast<double>(both) / static_cast<double>(items.size());
        any_acc = static_cast<double>(any) / static_cast<double>(items.size());
    };
    Task2Result r;
    run(ctx.concats, r.acc_2a, r.acc_2b);
    run(ctx.overlays, r.acc_2c, r.acc_2d);
    return r;
}

namespace {

/// The three temporal candidates for an unordered pair, in canonical order.
std::vector<Caption> temporal_prompts(int i, int j, bool swapped) {
    if (swapped) std::swap(i, j);
    return {temporal_caption(i, j, CaptionRelation::Before),
            temporal_caption(j, i, CaptionRelation::Before),
            temporal_caption(i, j, CaptionRelation::While)};
}

}  // namespace

SubtaskPair task3(const EvalContext& ctx, const ZsModel& model, const EvalOptions& opts) {
    auto run = [&](const std::vector<EvalItem>& items, bool concat_side) {
        std::size_t hits = 0;
        for (const EvalItem& item : items) {
            const auto [i, j] = std::minmax(item.classes.at(0), item.classes.at(1));
            PromptSet ps;
            ps.task_tag = "temporal";
            ps.prompts = temporal_prompts(i, j, opts.swap_task3_prompt_classes);
            const Vec p = zs_classify(item, ps, model);
            const std::size_t pick = argmax_lowest(p);
            const Caption& chosen = ps.prompts[pick];
            bool correct;
            if (concat_side)
                correct = chosen.relation == CaptionRelation::Before &&
                          chosen.class_ids[0] == item.classes.at(0) &&
                          chosen.class_ids[1] == item.classes.at(1);
            else
                correct = chosen.relation == CaptionRelation::While;
            if (correct) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(items.size());
    };
    return {run(ctx.concats, true), run(ctx.overlays, false)};
}

SubtaskPair task4(const EvalContext& ctx, const ZsModel& model, const EvalOptions& opts) {
    const int K = ctx.spec.num_classes;
    if (K < 4) throw std::invalid_argument("task4: need at least 4 classes for distractors");

    std::size_t hits_a = 0, hits_b = 0;
    std::size_t index = 0;
    for (const EvalItem& item : ctx.concats) {
        const auto [i, j] = std::minmax(item.classes.at(0), item.classes.at(1));
        PromptSet ps;
        ps.task_tag = "distractor";
        ps.prompts = temporal_prompts(i, j, false);

        Rng rng(mix_seed(sub_seed(opts.seed, "task4-distractors"), index++));
        auto fresh_distractor = [&]() {
            int d = static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
            while (d == i || d == j) d = static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
            return d;
        };
        for (int base = 0; base < 3; ++base) {
            const Caption& src = ps.prompts[static_cast<std::size_t>(base)];
            const int d = fresh_distractor();
            const bool replace_first = rng.below(2) == 0;
            const int a = replace_first ? d : src.class_ids[0];
            const int b = replace_first ? src.class_ids[1] : d;
            ps.prompts.push_back(temporal_caption(a, b, src.relation));
        }

        const Vec p = zs_classify(item, ps, model);
        const Caption& chosen = ps.prompts[argmax_lowest(p)];
        const bool full = chosen.relation == CaptionRelation::Before &&
                          chosen.class_ids[0] == item.classes.at(0) &&
                          chosen.class_ids[1] == item.classes.at(1);
        const bool partial = chosen.class_ids[0] == i || chosen.class_ids[0] == j ||
                             chosen.class_ids[1] == i || chosen.class_ids[1] == j;
        if (full) ++hits_a;
        if (partial) ++hits_b;
    }
    const auto n = static_cast<double>(ctx.concats.size());
    return {static_cast<double>(hits_a) / n, static_cast<double>(hits_b) / n};
}

SubtaskPair task5(const EvalContext& ctx, const ZsModel& model, const EvalOptions& opts) {
    // 5A: unseen "first/second" phrasing over concatenated clips.
    double score_a = 0.0;
    for (const EvalItem& item : ctx.concats) {
        const auto [i, j] = std::minmax(item.classes.at(0), item.classes.at(1));
        auto part_prompt = [&](const char* part, int cls) {
            return prompt_caption(
                "In this concatenated sound, the " + std::string(part) + " sound is " +
                    class_name(cls),
                {cls});
        };
        PromptSet ps;
        ps.task_tag = "first-second";
        ps.prompts = {part_prompt("first", i), part_prompt("second", i), part_prompt("first", j),
                      part_prompt("second", j)};
        const int f = item.classes.at(0);
        const std::set<std::size_t> correct =
            f == i ? std::set<std::size_t>{0, 3} : std::set<std::size_t>{2, 1};

        const Vec p = zs_classify(item, ps, model);
        const auto [t1, t2] = top2_lowest(p);
        const int overlap = static_cast<int>(correct.count(t1)) + static_cast<int>(correct.count(t2));
        score_a += overlap == 2 ? 1.0 : (overlap == 1 ? 0.5 : 0.0);
    }
    score_a /= static_cast<double>(ctx.concats.size());

    // 5B: "Simultaneous sound of X and Y" with seeded distractor pairs.
    const int K = ctx.spec.num_classes;
    double score_b = 0.0;
    std::size_t index = 0;
    for (const EvalItem& item : ctx.overlays) {
        const int i = item.classes.at(0), j = item.classes.at(1);
        auto sim_prompt = [&](int x, int y) {
            return prompt_caption(
                "Simultaneous sound of " + class_name(x) + " and " + class_name(y), {x, y});
        };
        std::vector<Caption> prompts = {sim_prompt(i, j), sim_prompt(j, i)};

        Rng rng(mix_seed(sub_seed(opts.seed, "task5b-distractors"), index++));
        std::set<std::pair<int, int>> used = {{i, j}, {j, i}};
        const std::size_t want = std::min<std::size_t>(
            static_cast<std::size_t>(opts.task5b_distractors),
            static_cast<std::size_t>(K) * (K - 1) - 2);
        while (prompts.size() < 2 + want) {
            const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
            int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(K - 1)));
            if (y >= x) ++y;
            if ((x == i && y == j) || (x == j && y == i)) continue;
            if (!used.insert({x, y}).second) continue;
            prompts.push_back(sim_prompt(x, y));
        }

        // Seeded shuffle so the correct prompts hold no positional privilege.
        std::vector<std::size_t> order(prompts.size());
        for (std::size_t t = 0; t < order.size(); ++t) order[t] = t;
        seeded_shuffle(order, rng);
        PromptSet ps;
        ps.task_tag = "simultaneous";
        std::set<std::size_t> correct;
        for (std::size_t t = 0; t < order.size(); ++t) {
            ps.prompts.push_back(prompts[order[t]]);
            if (order[t] < 2) correct.insert(t);
        }

        const Vec p = zs_classify(item, ps, model);
        const auto [t1, t2] = top2_lowest(p);
        const int overlap = static_cast<int>(correct.count(t1)) + static_cast<int>(correct.count(t2));
        score_b += overlap == 2 ? 1.0 : (overlap == 1 ? 0.5 : 0.0);
    }
    score_b /= static_cast<double>(ctx.overlays.size());
    return {score_a, score_b};
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

const std::vector<std::string>& EvalReport::expected_keys() {
    static const std::vector<std::string> keys = {"1A", "2A", "2B", "2C", "2D", "3A",
                                                  "3B", "4A", "4B", "5A", "5B"};
    return keys;
}

void EvalReport::validate_complete() const {
    for (const auto& key : expected_keys())
        if (!acc.count(key)) throw std::runtime_error("EvalReport: missing task result " + key);
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["acc"] = acc;
    j["counts"] = counts;
    j["seed"] = seed;
    j["checkpoint_id"] = checkpoint_id;
    j["config_fingerprint"] = config_fingerprint;
    j["subtask_mapping"] = subtask_mapping;
    return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    EvalReport r;
    r.acc = j.at("acc").get<std::map<std::string, double>>();
    r.counts = j.at("counts").get<std::map<std::string, int>>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.checkpoint_id = j.at("checkpoint_id").get<std::string>();
    r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    r.subtask_mapping = j.at("subtask_mapping").get<std::string>();
    return r;
}

std::string EvalReport::to_csv() const {
    std::ostringstream os;
    os << "metric,accuracy,count\n";
    for (const auto& key : expected_keys()) {
        os << key << ',';
        if (acc.count(key)) os << acc.at(key);
        os << ',';
        if (counts.count(key)) os << counts.at(key);
        os << '\n';
    }
    return os.str();
}

EvalReport run_all(const EvalContext& ctx, const ZsModel& model, const EvalOptions& opts) {
    EvalReport r;
    r.seed = opts.seed;

    const auto n_single = static_cast<int>(ctx.singles.size());
    const auto n_concat = static_cast<int>(ctx.concats.size());
    const auto n_overlay = static_cast<int>(ctx.overlays.size());

    r.acc["1A"] = task1(ctx, model, opts);
    r.counts["1A"] = n_single;

    const Task2Result t2 = task2(ctx, model, opts);
    r.acc["2A"] = t2.acc_2a;
    r.acc["2B"] = t2.acc_2b;
    r.acc["2C"] = t2.acc_2c;
    r.acc["2D"] = t2.acc_2d;
    r.counts["2A"] = r.counts["2B"] = n_concat;
    r.counts["2C"] = r.counts["2D"] = n_overlay;

    const SubtaskPair t3 = task3(ctx, model, opts);
    r.acc["3A"] = t3.a;
    r.acc["3B"] = t3.b;
    r.counts["3A"] = n_concat;
    r.counts["3B"] = n_overlay;

    const SubtaskPair t4 = task4(ctx, model, opts);
    r.acc["4A"] = t4.a;
    r.acc["4B"] = t4.b;
    r.counts["4A"] = r.counts["4B"] = n_concat;

    const SubtaskPair t5 = task5(ctx, model, opts);
    r.acc["5A"] = t5.a;
    r.acc["5B"] = t5.b;
    r.counts["5A"] = n_concat;
    r.counts["5B"] = n_overlay;

    r.validate_complete();
    return r;
}

Interval binomial_ci99(double p0, std::size_t n_eff) {
    constexpr double z = 2.5758293035489004;  // 99% two-sided normal quantile
    const double half = z * std::sqrt(p0 * (1.0 - p0) / static_cast<double>(n_eff));
    return {std::max(0.0, p0 - half), std::min(1.0, p0 + half)};
}

double mc_chance_top2_both(int num_classes, std::size_t trials, std::uint64_t seed) {
    Rng rng(sub_seed(seed, "mc-top2"));
    std::size_t hits = 0;
    Vec scores(static_cast<std::size_t>(num_classes));
    for (std::size_t t = 0; t < trials; ++t) {
        for (double& s : scores) s = rng.uniform();
        const auto [t1, t2] = top2_lowest(scores);
        if ((t1 == 0 && t2 == 1) || (t1 == 1 && t2 == 0)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(trials);
}

}  // namespace talm::zseval

#include "talm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "talm/rng.hpp"

namespace talm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string item_key(const DatasetItem& item) {
    std::ostringstream os;
    os << static_cast<int>(item.relation) << ':' << item.class_i << ':' << item.class_j << ':'
       << item.inst_i << ':' << item.inst_j;
    return os.str();
}

}  // namespace

void TrainConfig::validate() const {
    if (stages != "AB" && stages != "B")
        throw std::invalid_argument("TrainConfig: stages must be AB or B");
    if (epochs_a < 1 || epochs_b < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (!(learning_rate > 0.0) && learning_rate != 0.0)
        throw std::invalid_argument("TrainConfig: learning rate must be non-negative");
    if (block_size < 2) throw std::invalid_argument("TrainConfig: block size must be >= 2");
    if (optimizer != "adam" && optimizer != "sgd")
        throw std::invalid_argument("TrainConfig: optimizer must be adam or sgd");
    coeffs_a.validate();
    coeffs_b.validate();
}

DataCache::DataCache(const CorpusSpec& spec, const FeatureConfig& feat, const Vocabulary& vocab,
                     const EncoderParams& params)
    : spec_(spec), feat_(feat), vocab_(vocab), frozen_view_(params) {}

const Vec& DataCache::audio_base(const DatasetItem& item) {
    const std::string key = item_key(item);
    auto it = audio_cache_.find(key);
    if (it != audio_cache_.end()) return it->second;
    const Waveform w = materialize_audio(item, spec_);
    Vec base = audio_base_vector(extract_features(w, feat_), frozen_view_);
    return audio_cache_.emplace(key, std::move(base)).first->second;
}

const Vec& DataCache::text_base(const Caption& caption) {
    auto it = text_cache_.find(caption.text);
    if (it != text_cache_.end()) return it->second;
    Vec base = text_base_vector(tokenize(caption.text, vocab_), frozen_view_);
    return text_cache_.emplace(caption.text, std::move(base)).first->second;
}

loss::StageAItems DataCache::gather(const TrainingBatch& batch) {
    loss::StageAItems items;
    for (const DatasetItem& s : batch.singles) {
        items.a_singles.push_back(audio_base(s));
        items.c_singles.push_back(text_base(s.caption));
        items.single_classes.push_back(s.class_i);
    }
    for (const DatasetItem& d : batch.duals) {
        items.a_duals.push_back(audio_base(d));
        items.c_duals.push_back(text_base(d.caption));
        items.dual_pairs.push_back({d.class_i, d.class_j});
    }
    return items;
}

loss::StageBItems DataCache::gather_b(const TrainingBatch& batch) {
    loss::StageBItems items;
    for (const DatasetItem& f : batch.forward) {
        items.a_forward.push_back(audio_base(f));
        items.c_forward.push_back(text_base(f.caption));
    }
    for (const DatasetItem& r : batch.reversed) {
        items.a_reversed.push_back(audio_base(r));
        items.c_reversed.push_back(text_base(r.caption));
    }
    for (const DatasetItem& o : batch.overlaid) {
        items.a_overlaid.push_back(audio_base(o));
        items.c_overlaid.push_back(text_base(o.caption));
    }
    return items;
}

PreparedData prepare_data(const CorpusSpec& spec, const FeatureConfig& feat, double split_ratio,
                          bool one_item_per_pair) {
    spec.validate();
    feat.validate();

    PreparedData data;
    data.spec = spec;
    data.feat = feat;
    data.split_ratio = split_ratio;

    std::vector<std::string> names;
    for (int k = 0; k < spec.num_classes; ++k) names.push_back(class_name(k));
    data.vocab = Vocabulary::build(names);
    data.split = split_pairs(spec.num_classes, split_ratio, spec.seed);

    for (const StageARow& row : build_stage_a_items(spec, one_item_per_pair)) {
        // A row follows its dual's pair; pure-single rows follow the ordered
        // pair they were built from, recovered via the dual recipe.
        const auto key = row.dual.unordered_pair();
        (data.split.train.count(key) ? data.rows_a_train : data.rows_a_test).push_back(row);
    }
    for (const DatasetItem& item : build_stage_b_items(spec))
        (data.split.in_train(item) ? data.items_b_train : data.items_b_test).push_back(item);
    return data;
}

Optimizer::Optimizer(const std::string& kind, double lr, const EncoderParams& shape)
    : adam_(kind == "adam"), lr_(lr), m_(shape.zero_grads()), v_(shape.zero_grads()) {
    if (kind != "adam" && kind != "sgd") throw std::invalid_argument("Optimizer: unknown kind " + kind);
}

void Optimizer::step(EncoderParams& params, const TrainableGrads& grads) {
    if (lr_ == 0.0) return;  // explicit no-op: params stay bit-identical
    TrainableGrads update = params.zero_grads();
    if (!adam_) {
        update.add_scaled(grads, -lr_);
        params.apply_update(update);
        return;
    }
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++t_;
    auto adam_tensor = [&](std::vector<double>& m, std::vector<double>& v,
                           const std::vector<double>& g, std::vector<double>& out) {
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        for (std::size_t i = 0; i < g.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            out[i] = -lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    };
    adam_tensor(m_.d_text_proj.data, v_.d_text_proj.data, grads.d_text_proj.data,
                update.d_text_proj.data);
    adam_tensor(m_.d_text_bias, v_.d_text_bias, grads.d_text_bias, update.d_text_bias);
    adam_tensor(m_.d_audio_proj.data, v_.d_audio_proj.data, grads.d_audio_proj.data,
                update.d_audio_proj.data);
    adam_tensor(m_.d_audio_bias, v_.d_audio_bias, grads.d_audio_bias, update.d_audio_bias);
    params.apply_update(update);
}

namespace {

struct MetricPlan {
    std::vector<TrainingBatch> train;
    std::vector<TrainingBatch> holdout;
};

MetricPlan metric_plan(Stage stage, const PreparedData& data, const TrainConfig& cfg) {
    MetricPlan plan;
    const std::uint64_t ms = sub_seed(cfg.seed, "metric-plan");
    if (stage == Stage::A) {
        plan.train = plan_stage_a_epoch(data.rows_a_train, cfg.block_size, ms);
        const std::size_t n_test = std::min(cfg.block_size, data.rows_a_test.size());
        plan.holdout = plan_stage_a_epoch(data.rows_a_test, n_test, ms);
    } else {
        plan.train = plan_stage_b_epoch(data.items_b_train, cfg.block_size, ms);
        std::set<std::pair<int, int>> pairs;
        for (const auto& it : data.items_b_test) pairs.insert(it.unordered_pair());
        const std::size_t n_test = std::min(cfg.block_size, pairs.size());
        plan.holdout = plan_stage_b_epoch(data.items_b_test, n_test, ms);
    }
    if (plan.train.empty() || plan.holdout.empty())
        throw std::runtime_error("train_stage: not enough data for metric batches");
    return plan;
}

double mean_loss(Stage stage, const std::vector<TrainingBatch>& batches, DataCache& cache,
                 const EncoderParams& params, const loss::Coefficients& coeffs) {
    double total = 0.0;
    for (const TrainingBatch& b : batches) {
        total += stage == Stage::A ? loss::stage_a_loss_value(cache.gather(b), params, coeffs)
                                   : loss::stage_b_loss_value(cache.gather_b(b), params, coeffs);
    }
    return total / static_cast<double>(batches.size());
}

}  // namespace

StageReport train_stage(Stage stage, EncoderParams& params, const PreparedData& data,
                        DataCache& cache, const TrainConfig& cfg) {
    cfg.validate();
    const loss::Coefficients& coeffs = stage == Stage::A ? cfg.coeffs_a : cfg.coeffs_b;
    const int epochs = stage == Stage::A ? cfg.epochs_a : cfg.epochs_b;
    const char stage_ch = stage == Stage::A ? 'A' : 'B';

    MetricPlan metrics = metric_plan(stage, data, cfg);
    Optimizer opt(cfg.optimizer, cfg.learning_rate, params);

    StageReport report;
    report.stage = stage_ch;
    const auto t0 = Clock::now();
    EpochStats init;
    init.train_loss = mean_loss(stage, metrics.train, cache, params, coeffs);
    init.holdout_loss = mean_loss(stage, metrics.holdout, cache, params, coeffs);
    init.wall_seconds = seconds_since(t0);
    report.epochs.push_back(init);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        const auto te = Clock::now();
        const std::uint64_t es =
            mix_seed(sub_seed(cfg.seed, stage == Stage::A ? "epoch-a" : "epoch-b"),
                     static_cast<std::uint64_t>(epoch));
        const std::vector<TrainingBatch> batches =
            stage == Stage::A ? plan_stage_a_epoch(data.rows_a_train, cfg.block_size, es)
                              : plan_stage_b_epoch(data.items_b_train, cfg.block_size, es);
        for (const TrainingBatch& batch : batches) {
            TrainableGrads grads = params.zero_grads();
            const double value =
                stage == Stage::A ? loss::stage_a_grad(cache.gather(batch), params, coeffs, grads)
                                  : loss::stage_b_grad(cache.gather_b(batch), params, coeffs, grads);
            if (!std::isfinite(value))
                throw TrainingDivergence(std::string("stage ") + stage_ch +
                                         ": non-finite training loss at epoch " +
                                         std::to_string(epoch));
            opt.step(params, grads);
        }
        EpochStats stats;
        stats.train_loss = mean_loss(stage, metrics.train, cache, params, coeffs);
        stats.holdout_loss = mean_loss(stage, metrics.holdout, cache, params, coeffs);
        stats.wall_seconds = seconds_since(te);
        if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.holdout_loss))
            throw TrainingDivergence(std::string("stage ") + stage_ch + ": non-finite metric loss");
        report.epochs.push_back(stats);
    }
    return report;
}

TwoStageResult run_two_stage(const PreparedData& data, const EncoderConfig& enc_cfg,
                             const TrainConfig& cfg, DataCache* shared_cache) {
    cfg.validate();
    TwoStageResult result{EncoderParams::init(sub_seed(cfg.seed, "encoder-init"), enc_cfg), {}};
    std::unique_ptr<DataCache> own;
    DataCache* cache = shared_cache;
    if (cache == nullptr) {
        own = std::make_unique<DataCache>(data.spec, data.feat, data.vocab, result.params);
        cache = own.get();
    }

    const auto t0 = Clock::now();
    if (cfg.stages == "AB")
        result.report.stages.push_back(train_stage(Stage::A, result.params, data, *cache, cfg));
    result.report.stages.push_back(train_stage(Stage::B, result.params, data, *cache, cfg));
    result.report.total_wall_seconds = seconds_since(t0);
    result.report.checkpoint_id = result.params.fingerprint();
    return result;
}

std::string TrainReport::to_json() const {
    nlohmann::json j;
    j["checkpoint_id"] = checkpoint_id;
    j["config_fingerprint"] = config_fingerprint;
    j["total_wall_seconds"] = total_wall_seconds;
    j["stages"] = nlohmann::json::array();
    for (const StageReport& s : stages) {
        nlohmann::json js;
        js["stage"] = std::string(1, s.stage);
        js["train_loss"] = nlohmann::json::array();
        js["holdout_loss"] = nlohmann::json::array();
        js["wall_seconds"] = nlohmann::json::array();
        for (const EpochStats& e : s.epochs) {
            js["train_loss"].push_back(e.train_loss);
            js["holdout_loss"].push_back(e.holdout_loss);
            js["wall_seconds"].push_back(e.wall_seconds);
        }
        j["stages"].push_back(js);
    }
    return j.dump(2);
}

std::string TrainReport::curves_csv() const {
    std::ostringstream os;
    os << "stage,epoch,train_loss,holdout_loss\n";
    for (const StageReport& s : stages)
        for (std::size_t e = 0; e < s.epochs.size(); ++e)
            os << s.stage << ',' << e << ',' << s.epochs[e].train_loss << ','
               << s.epochs[e].holdout_loss << '\n';
    return os.str();
}

}  // namespace talm

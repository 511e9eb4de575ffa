#include "talm/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "talm/rng.hpp"

namespace talm {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& path) {
    if (!obj.is_object()) throw ConfigError("config: " + path + " must be an object");
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!allowed.count(key)) throw ConfigError("config: unknown key " + path + "." + key);
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& path) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: bad type for " + path + "." + std::string(key));
    }
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: parse failure: ") + e.what());
    }

    RunConfig c;
    reject_unknown(j, {"seed", "out_dir", "corpus", "features", "encoder", "data", "loss",
                       "train", "eval"},
                   "$");
    read(j, "seed", c.seed, "$");
    read(j, "out_dir", c.out_dir, "$");

    if (j.contains("corpus")) {
        const json& o = j["corpus"];
        reject_unknown(o, {"num_classes", "clip_duration", "sample_rate", "clips_per_class"},
                       "corpus");
        read(o, "num_classes", c.num_classes, "corpus");
        read(o, "clip_duration", c.clip_duration, "corpus");
        read(o, "sample_rate", c.sample_rate, "corpus");
        read(o, "clips_per_class", c.clips_per_class, "corpus");
    }
    if (j.contains("features")) {
        const json& o = j["features"];
        reject_unknown(o, {"frame_size", "hop", "num_bands", "fmin", "fmax"}, "features");
        read(o, "frame_size", c.features.frame_size, "features");
        read(o, "hop", c.features.hop, "features");
        read(o, "num_bands", c.features.num_bands, "features");
        read(o, "fmin", c.features.fmin, "features");
        read(o, "fmax", c.features.fmax, "features");
    }
    if (j.contains("encoder")) {
        const json& o = j["encoder"];
        reject_unknown(o, {"embed_dim", "base_dim", "hidden_dim", "vocab_capacity"}, "encoder");
        read(o, "embed_dim", c.encoder.embed_dim, "encoder");
        read(o, "base_dim", c.encoder.base_dim, "encoder");
        read(o, "hidden_dim", c.encoder.hidden_dim, "encoder");
        read(o, "vocab_capacity", c.encoder.vocab_capacity, "encoder");
    }
    if (j.contains("data")) {
        const json& o = j["data"];
        reject_unknown(o, {"split_ratio", "one_item_per_pair"}, "data");
        read(o, "split_ratio", c.split_ratio, "data");
        read(o, "one_item_per_pair", c.one_item_per_pair, "data");
    }
    if (j.contains("loss")) {
        const json& o = j["loss"];
        reject_unknown(o, {"alpha_st", "alpha_ct", "alpha_so", "alpha_co", "beta", "beta_A",
                           "alpha_same", "alpha_diff", "gamma", "appendix_a5_form",
                           "cross_blocks"},
                       "loss");
        read(o, "alpha_st", c.coeffs.alpha_st, "loss");
        read(o, "alpha_ct", c.coeffs.alpha_ct, "loss");
        read(o, "alpha_so", c.coeffs.alpha_so, "loss");
        read(o, "alpha_co", c.coeffs.alpha_co, "loss");
        read(o, "beta", c.coeffs.beta, "loss");
        read(o, "beta_A", c.coeffs.beta_a, "loss");
        read(o, "alpha_same", c.coeffs.alpha_same, "loss");
        read(o, "alpha_diff", c.coeffs.alpha_diff, "loss");
        read(o, "gamma", c.coeffs.gamma, "loss");
        read(o, "appendix_a5_form", c.coeffs.appendix_a5_form, "loss");
        read(o, "cross_blocks", c.coeffs.cross_blocks, "loss");
    }
    if (j.contains("train")) {
        const json& o = j["train"];
        reject_unknown(o, {"stages", "epochs_a", "epochs_b", "block_size", "learning_rate",
                           "optimizer"},
                       "train");
        read(o, "stages", c.stages, "train");
        read(o, "epochs_a", c.epochs_a, "train");
        read(o, "epochs_b", c.epochs_b, "train");
        read(o, "block_size", c.block_size, "train");
        read(o, "learning_rate", c.learning_rate, "train");
        read(o, "optimizer", c.optimizer, "train");
    }
    if (j.contains("eval")) {
        const json& o = j["eval"];
        reject_unknown(o, {"tasks", "task1_prompt", "task5b_distractors"}, "eval");
        read(o, "tasks", c.tasks, "eval");
        read(o, "task1_prompt", c.task1_prompt, "eval");
        read(o, "task5b_distractors", c.task5b_distractors, "eval");
    }
    c.validate();
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return from_json_text(os.str());
}

std::string RunConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["corpus"] = {{"num_classes", num_classes},
                   {"clip_duration", clip_duration},
                   {"sample_rate", sample_rate},
                   {"clips_per_class", clips_per_class}};
    j["features"] = {{"frame_size", features.frame_size},
                     {"hop", features.hop},
                     {"num_bands", features.num_bands},
                     {"fmin", features.fmin},
                     {"fmax", features.fmax}};
    j["encoder"] = {{"embed_dim", encoder.embed_dim},
                    {"base_dim", encoder.base_dim},
                    {"hidden_dim", encoder.hidden_dim},
                    {"vocab_capacity", encoder.vocab_capacity}};
    j["data"] = {{"split_ratio", split_ratio}, {"one_item_per_pair", one_item_per_pair}};
    j["loss"] = {{"alpha_st", coeffs.alpha_st},
                 {"alpha_ct", coeffs.alpha_ct},
                 {"alpha_so", coeffs.alpha_so},
                 {"alpha_co", coeffs.alpha_co},
                 {"beta", coeffs.beta},
                 {"beta_A", coeffs.beta_a},
                 {"alpha_same", coeffs.alpha_same},
                 {"alpha_diff", coeffs.alpha_diff},
                 {"gamma", coeffs.gamma},
                 {"appendix_a5_form", coeffs.appendix_a5_form},
                 {"cross_blocks", coeffs.cross_blocks}};
    j["train"] = {{"stages", stages},         {"epochs_a", epochs_a},
                  {"epochs_b", epochs_b},     {"block_size", block_size},
                  {"learning_rate", learning_rate}, {"optimizer", optimizer}};
    j["eval"] = {{"tasks", tasks},
                 {"task1_prompt", task1_prompt},
                 {"task5b_distractors", task5b_distractors}};
    return j.dump(2);
}

std::string RunConfig::fingerprint() const {
    std::ostringstream os;
    os << std::hex << fnv1a64(to_json());
    return os.str();
}

CorpusSpec RunConfig::corpus_spec() const {
    CorpusSpec spec;
    spec.num_classes = num_classes;
    spec.clip_duration = clip_duration;
    spec.sample_rate = sample_rate;
    spec.clips_per_class = clips_per_class;
    spec.seed = sub_seed(seed, "corpus");
    return spec;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.stages = stages;
    t.epochs_a = epochs_a;
    t.epochs_b = epochs_b;
    t.block_size = block_size;
    t.learning_rate = learning_rate;
    t.optimizer = optimizer;
    t.seed = sub_seed(seed, "train");
    t.coeffs_a = coeffs;
    t.coeffs_b = coeffs;
    return t;
}

zseval::EvalOptions RunConfig::eval_options() const {
    zseval::EvalOptions o;
    o.task1_prompt = task1_prompt;
    o.task5b_distractors = task5b_distractors;
    o.seed = sub_seed(seed, "eval");
    return o;
}

void RunConfig::validate() const {
    corpus_spec().validate();
    features.validate();
    encoder_config().validate();
    coeffs.validate();
    if (!(split_ratio > 0.0 && split_ratio < 1.0))
        throw ConfigError("config: data.split_ratio must lie in (0, 1)");
    if (stages != "AB" && stages != "B") throw ConfigError("config: train.stages must be AB or B");
    if (epochs_a < 1 || epochs_b < 1) throw ConfigError("config: train.epochs must be >= 1");
    if (block_size < 2) throw ConfigError("config: train.block_size must be >= 2");
    if (optimizer != "adam" && optimizer != "sgd")
        throw ConfigError("config: train.optimizer must be adam or sgd");
    if (learning_rate < 0.0) throw ConfigError("config: train.learning_rate must be >= 0");
    for (int t : tasks)
        if (t < 1 || t > 5) throw ConfigError("config: eval.tasks entries must be 1..5");
    if (task5b_distractors < 0) throw ConfigError("config: eval.task5b_distractors must be >= 0");
}

}  // namespace talm

#include "talm/captions.hpp"

#include <cctype>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "talm/audio.hpp"

namespace talm {

namespace {

const char* kTemplateWords[] = {
    "single", "sound", "of", "combined", "and", "before", "after", "while",
    "the", "a", "in", "this", "concatenated", "first", "second", "is",
    "simultaneous",
};

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string w;
    while (in >> w) {
        std::size_t b = 0, e = w.size();
        while (b < e && !std::isalnum(static_cast<unsigned char>(w[b]))) ++b;
        while (e > b && !std::isalnum(static_cast<unsigned char>(w[e - 1]))) --e;
        if (e > b) out.push_back(lower(w.substr(b, e - b)));
    }
    return out;
}

}  // namespace

const char* to_string(CaptionRelation r) {
    switch (r) {
        case CaptionRelation::Single: return "single";
        case CaptionRelation::Dual: return "dual";
        case CaptionRelation::Before: return "before";
        case CaptionRelation::After: return "after";
        case CaptionRelation::While: return "while";
        case CaptionRelation::Prompt: return "prompt";
    }
    return "?";
}

Caption single_caption(int class_id) {
    Caption c;
    c.text = "single sound of " + class_name(class_id);
    c.relation = CaptionRelation::Single;
    c.class_ids = {class_id};
    return c;
}

Caption dual_caption(int class_i, int class_j) {
    if (class_i == class_j)
        throw std::invalid_argument("dual_caption: classes must differ");
    Caption c;
    c.text = "combined sound of " + class_name(class_i) + " and " + class_name(class_j);
    c.relation = CaptionRelation::Dual;
    c.class_ids = {class_i, class_j};
    return c;
}

Caption temporal_caption(int class_i, int class_j, CaptionRelation tau) {
    if (class_i == class_j)
        throw std::invalid_argument("temporal_caption: classes must differ");
    const char* kw = nullptr;
    switch (tau) {
        case CaptionRelation::Before: kw = "before"; break;
        case CaptionRelation::After: kw = "after"; break;
        case CaptionRelation::While: kw = "while"; break;
        default: throw std::invalid_argument("temporal_caption: tau must be before/after/while");
    }
    Caption c;
    c.text = class_name(class_i) + " " + kw + " " + class_name(class_j);
    c.relation = tau;
    c.class_ids = {class_i, class_j};
    return c;
}

Caption invert_caption(const Caption& cap) {
    if (cap.relation != CaptionRelation::Before && cap.relation != CaptionRelation::After)
        throw std::invalid_argument("invert_caption: relation must be before or after");
    return temporal_caption(cap.class_ids.at(1), cap.class_ids.at(0), cap.relation);
}

std::optional<Caption> parse_caption(const std::string& text) {
    const auto words = split_words(text);

    auto lookup = [](const std::string& name) -> int {
        for (int k = 0; k < 50; ++k)
            if (class_name(k) == name) return k;
        if (name.rfind("sound", 0) == 0 && name.size() > 5) {
            try {
                return std::stoi(name.substr(5));
            } catch (...) {
            }
        }
        return -1;
    };

    // "single sound of X"
    if (words.size() == 4 && words[0] == "single" && words[1] == "sound" && words[2] == "of") {
        int k = lookup(words[3]);
        if (k >= 0) return single_caption(k);
    }
    // "combined sound of X and Y"
    if (words.size() == 6 && words[0] == "combined" && words[1] == "sound" && words[2] == "of" &&
        words[4] == "and") {
        int i = lookup(words[3]), j = lookup(words[5]);
        if (i >= 0 && j >= 0) return dual_caption(i, j);
    }
    // "X before|after|while Y"
    if (words.size() == 3) {
        CaptionRelation tau;
        if (words[1] == "before")
            tau = CaptionRelation::Before;
        else if (words[1] == "after")
            tau = CaptionRelation::After;
        else if (words[1] == "while")
            tau = CaptionRelation::While;
        else
            return std::nullopt;
        int i = lookup(words[0]), j = lookup(words[2]);
        if (i >= 0 && j >= 0) return temporal_caption(i, j, tau);
    }
    return std::nullopt;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& class_names) {
    Vocabulary v;
    int next = 0;
    for (const auto& name : class_names) {
        if (v.token_to_id_.emplace(lower(name), next).second) ++next;
    }
    for (const char* w : kTemplateWords) {
        if (v.token_to_id_.emplace(w, next).second) ++next;
    }
    v.unknown_id_ = next;
    return v;
}

int Vocabulary::id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? unknown_id_ : it->second;
}

std::string Vocabulary::to_json() const {
    nlohmann::json j;
    j["tokens"] = token_to_id_;
    j["unknown_id"] = unknown_id_;
    return j.dump(2);
}

Vocabulary Vocabulary::from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    Vocabulary v;
    v.token_to_id_ = j.at("tokens").get<std::map<std::string, int>>();
    v.unknown_id_ = j.at("unknown_id").get<int>();
    return v;
}

std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab) {
    std::vector<int> ids;
    for (const auto& w : split_words(text)) ids.push_back(vocab.id_of(w));
    return ids;
}

}  // namespace talm

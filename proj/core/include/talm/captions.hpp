#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace talm {

enum class CaptionRelation { Single, Dual, Before, After, While, Prompt };

const char* to_string(CaptionRelation r);

/// A caption string plus the structured facts it was rendered from.
struct Caption {
    std::string text;
    CaptionRelation relation = CaptionRelation::Single;
    std::vector<int> class_ids;  // length 1 for Single, 2 for the pair relations
};

/// "single sound of {name}"
Caption single_caption(int class_id);

/// "combined sound of {i} and {j}"; the two classes must differ.
Caption dual_caption(int class_i, int class_j);

/// "{i} before {j}" / "{i} after {j}" / "{i} while {j}".
Caption temporal_caption(int class_i, int class_j, CaptionRelation tau);

/// Order inversion on a temporal caption: "i before j" -> "j before i".
/// Only defined for Before/After; While captions take the overlay path.
Caption invert_caption(const Caption& cap);

/// Recover (relation, class_ids) from a training caption by template
/// matching. Returns nullopt for free-form prompt text.
std::optional<Caption> parse_caption(const std::string& text);

/// Closed token->id map over the class names and template words.
/// Ids are dense in [0, size()); the unknown token takes the last id.
class Vocabulary {
public:
    Vocabulary() = default;

    /// Deterministic given the class-name list: class names first (in order),
    /// then the fixed template words, then the unknown token.
    static Vocabulary build(const std::vector<std::string>& class_names);

    int id_of(const std::string& token) const;  // unknown id if absent
    int unknown_id() const { return unknown_id_; }
    std::size_t size() const { return token_to_id_.size() + 1; }

    std::string to_json() const;
    static Vocabulary from_json(const std::string& json_text);

    const std::map<std::string, int>& tokens() const { return token_to_id_; }

private:
    std::map<std::string, int> token_to_id_;
    int unknown_id_ = 0;
};

/// Lowercase, split on whitespace, strip punctuation at token edges, map to
/// ids. Unknown words map to the unknown id; the function is total.
std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab);

}  // namespace talm

#include <doctest.h>

#include <stdexcept>

#include "talm/audio.hpp"
#include "talm/captions.hpp"
#include "talm/rng.hpp"

using namespace talm;

namespace {

Vocabulary toy_vocab(int classes = 10) {
    std::vector<std::string> names;
    for (int k = 0; k < classes; ++k) names.push_back(class_name(k));
    return Vocabulary::build(names);
}

}  // namespace

TEST_CASE("caption templates match the fixed wording") {
    CHECK(single_caption(0).text == "single sound of dog");
    CHECK(single_caption(0).relation == CaptionRelation::Single);
    CHECK(dual_caption(0, 1).text == "combined sound of dog and rain");
    CHECK(dual_caption(0, 1).class_ids == std::vector<int>{0, 1});
    CHECK(temporal_caption(0, 1, CaptionRelation::Before).text == "dog before rain");
    CHECK(temporal_caption(0, 1, CaptionRelation::After).text == "dog after rain");
    CHECK(temporal_caption(0, 1, CaptionRelation::While).text == "dog while rain");
    CHECK(single_caption(0).text == single_caption(0).text);
}

TEST_CASE("dual and temporal captions reject identical classes") {
    CHECK_THROWS_AS(dual_caption(2, 2), std::invalid_argument);
    CHECK_THROWS_AS(temporal_caption(3, 3, CaptionRelation::Before), std::invalid_argument);
    CHECK_THROWS_AS(temporal_caption(0, 1, CaptionRelation::Dual), std::invalid_argument);
}

TEST_CASE("invert_caption swaps class order and is an involution") {
    const Caption c = temporal_caption(0, 1, CaptionRelation::Before);
    const Caption inv = invert_caption(c);
    CHECK(inv.text == "rain before dog");
    CHECK(inv.class_ids == std::vector<int>{1, 0});
    const Caption back = invert_caption(inv);
    CHECK(back.text == c.text);
    CHECK(back.class_ids == c.class_ids);

    CHECK_THROWS_AS(invert_caption(temporal_caption(0, 1, CaptionRelation::While)),
                    std::invalid_argument);
    CHECK_THROWS_AS(invert_caption(single_caption(0)), std::invalid_argument);
}

TEST_CASE("training captions parse back to their classes") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int i = static_cast<int>(rng.below(10));
        int j = static_cast<int>(rng.below(9));
        if (j >= i) ++j;
        Caption c;
        switch (rng.below(5)) {
            case 0: c = single_caption(i); break;
            case 1: c = dual_caption(i, j); break;
            case 2: c = temporal_caption(i, j, CaptionRelation::Before); break;
            case 3: c = temporal_caption(i, j, CaptionRelation::After); break;
            default: c = temporal_caption(i, j, CaptionRelation::While); break;
        }
        const auto parsed = parse_caption(c.text);
        REQUIRE(parsed.has_value());
        CHECK(parsed->relation == c.relation);
        CHECK(parsed->class_ids == c.class_ids);
    }
    CHECK_FALSE(parse_caption("totally free-form text").has_value());
}

TEST_CASE("tokenize is total, deterministic and punctuation-tolerant") {
    const Vocabulary vocab = toy_vocab();
    const auto ids = tokenize("dog before rain", vocab);
    REQUIRE(ids.size() == 3);
    for (int id : ids) CHECK(id != vocab.unknown_id());

    CHECK(tokenize("", vocab).empty());
    CHECK(tokenize("qwertyzzz", vocab) == std::vector<int>{vocab.unknown_id()});
    CHECK(tokenize("dog before rain", vocab) == tokenize("Dog  BEFORE rain", vocab));
    // template with a comma tokenizes to known words
    const auto ids2 = tokenize("In this concatenated sound, the first sound is dog", vocab);
    for (int id : ids2) CHECK(id != vocab.unknown_id());
}

TEST_CASE("vocabulary ids are dense, deterministic and serializable") {
    const Vocabulary v1 = toy_vocab();
    const Vocabulary v2 = toy_vocab();
    CHECK(v1.size() == v2.size());
    for (const auto& [tok, id] : v1.tokens()) CHECK(v2.id_of(tok) == id);

    std::vector<bool> seen(v1.size(), false);
    for (const auto& [tok, id] : v1.tokens()) {
        REQUIRE(id >= 0);
        REQUIRE(static_cast<std::size_t>(id) < v1.size());
        CHECK_FALSE(seen[static_cast<std::size_t>(id)]);
        seen[static_cast<std::size_t>(id)] = true;
    }
    CHECK(v1.unknown_id() == static_cast<int>(v1.size()) - 1);

    const Vocabulary v3 = Vocabulary::from_json(v1.to_json());
    CHECK(v3.tokens() == v1.tokens());
    CHECK(v3.unknown_id() == v1.unknown_id());
}

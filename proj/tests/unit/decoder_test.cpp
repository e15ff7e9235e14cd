#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "octofunc/decoder.hpp"
#include "octofunc/error.hpp"
#include "octofunc/rng.hpp"
#include "octofunc/schema.hpp"
#include "octofunc/tokenizer.hpp"
#include "support/call_gen.hpp"

using namespace octofunc;
using namespace octofunc::testsupport;

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Fixture {
    Vocabulary vocab = extend_with_functional_tokens(Vocabulary::base(), 10);
    Registry registry;
    Fixture() {
        auto text = read_file(std::filesystem::path(OCTOFUNC_DATA_DIR) / "demo_functions.txt");
        registry = build_registry(parse_declarations(text), vocab);
    }
};

// feed a full token stream; returns the terminal event
Event feed_all(DecoderState& st, const std::vector<int>& ids) {
    Event last;
    for (int id : ids) {
        last = st.feed(id);
        if (last.kind == EventKind::ParseError) return last;
    }
    return last;
}

}  // namespace

TEST_CASE("table-style calls parse with typed arguments") {
    Fixture fx;
    auto ids = encode(fx.vocab, "<nexa_4>('plastic water bottles', 'plastic')<nexa_end>");
    FunctionalCall call = parse_complete(ids, fx.vocab, fx.registry);
    CHECK(call.schema->name == "smart_recycle");
    REQUIRE(call.args.size() == 2);
    CHECK(std::get<std::string>(call.args[0]) == "plastic water bottles");
    CHECK(std::get<std::string>(call.args[1]) == "plastic");

    auto ids2 = encode(fx.vocab, "<nexa_7>('pineapple', 2)<nexa_end>");
    FunctionalCall c2 = parse_complete(ids2, fx.vocab, fx.registry);
    CHECK(c2.schema->name == "instacart_shopping");
    CHECK(std::get<int64_t>(c2.args[1]) == 2);

    auto ids3 = encode(fx.vocab, "<nexa_9>('dog', 'grooming')<nexa_end>");
    FunctionalCall c3 = parse_complete(ids3, fx.vocab, fx.registry);
    CHECK(c3.schema->name == "animal_care");
    CHECK(std::get<std::string>(c3.args[0]) == "dog");
}

TEST_CASE("cjk string literals survive the stream") {
    Fixture fx;
    auto ids = encode(fx.vocab, "<nexa_8>('Plate of food', '同济大学')<nexa_end>");
    FunctionalCall call = parse_complete(ids, fx.vocab, fx.registry);
    CHECK(std::get<std::string>(call.args[1]) == "同济大学");
}

TEST_CASE("grammar start rule and incompleteness") {
    Fixture fx;
    // byte first
    DecoderState st(fx.vocab);
    Event ev = st.feed('x');
    CHECK(ev.kind == EventKind::ParseError);
    CHECK(ev.position == 0);

    // missing terminator
    auto ids = encode(fx.vocab, "<nexa_7>('pineapple', 2)");
    DecoderState st2(fx.vocab);
    Event last = feed_all(st2, ids);
    CHECK(last.kind != EventKind::CallComplete);
    CHECK_FALSE(st2.done());
    try {
        (void)parse_complete(ids, fx.vocab, fx.registry);
        FAIL("expected ParseFailure");
    } catch (const ParseFailureError& e) {
        CHECK(e.position() == static_cast<int>(ids.size()));
    }
}

TEST_CASE("validation collects every violation") {
    Fixture fx;
    // enum violation surfaces at validation, not parse
    auto ids = encode(fx.vocab, "<nexa_4>('bottle', 'metal')<nexa_end>");
    try {
        (void)parse_complete(ids, fx.vocab, fx.registry);
        FAIL("expected ValidationFailure");
    } catch (const ValidationFailureError& e) {
        REQUIRE(e.report().violations.size() == 1);
        CHECK(e.report().violations[0].kind == ViolationKind::EnumViolation);
        CHECK(e.report().violations[0].param_index == 1);
    }

    // arity
    RawCall one_arg;
    one_arg.token_index = 4;
    one_arg.args = {ArgValue{std::string("bottle")}};
    ValidationReport rep = validate(one_arg, fx.registry);
    CHECK_FALSE(rep.ok);
    REQUIRE(rep.violations.size() == 1);
    CHECK(rep.violations[0].kind == ViolationKind::ArityMismatch);

    // type mismatch with param index
    RawCall wrong_kind;
    wrong_kind.token_index = 7;  // instacart_shopping(str, int)
    wrong_kind.args = {ArgValue{int64_t{3}}, ArgValue{std::string("x")}};
    rep = validate(wrong_kind, fx.registry);
    REQUIRE(rep.violations.size() == 2);
    CHECK(rep.violations[0].kind == ViolationKind::TypeMismatch);
    CHECK(rep.violations[0].param_index == 0);
    CHECK(rep.violations[1].param_index == 1);

    // independent defects count: wrong arity + enum violation on the prefix
    RawCall multi;
    multi.token_index = 9;  // animal_care(str, enum)
    multi.args = {ArgValue{int64_t{1}}, ArgValue{std::string("sleeping")},
                  ArgValue{std::string("extra")}};
    rep = validate(multi, fx.registry);
    CHECK(rep.violations.size() == 3);  // arity + type(param0) + enum(param1)

    RawCall unknown;
    unknown.function_name = "no_such_fn";
    rep = validate(unknown, fx.registry);
    REQUIRE(rep.violations.size() == 1);
    CHECK(rep.violations[0].kind == ViolationKind::UnknownFunction);
}

TEST_CASE("name-form text ingestion") {
    Fixture fx;
    FunctionalCall c =
        parse_text("instacart_shopping('pineapple', 2)<nexa_end>", fx.vocab, fx.registry);
    CHECK(c.token_index == 7);

    // terminator optional in name form only
    FunctionalCall c2 = parse_text("animal_care('dog', 'grooming')", fx.vocab, fx.registry);
    CHECK(c2.schema->name == "animal_care");

    CHECK_THROWS_AS((void)parse_text("<nexa_9>('dog', 'grooming')", fx.vocab, fx.registry),
                    ParseFailureError);

    FunctionalCall c3 = parse_text("<nexa_9>('dog', 'grooming')<nexa_end>", fx.vocab, fx.registry);
    CHECK(c3 == c2);

    // double quotes are not part of the grammar
    CHECK_THROWS_AS((void)parse_text("google_search(\"query\")", fx.vocab, fx.registry),
                    ParseFailureError);

    try {
        (void)parse_text("mystery_fn('x')", fx.vocab, fx.registry);
        FAIL("expected ValidationFailure");
    } catch (const ValidationFailureError& e) {
        CHECK(e.report().violations[0].kind == ViolationKind::UnknownFunction);
    }
}

TEST_CASE("integer literals cover the 64-bit range exactly") {
    Fixture fx;
    auto parse_int = [&](const std::string& lit) {
        auto ids = encode(fx.vocab, "<nexa_7>('x', " + lit + ")<nexa_end>");
        return std::get<int64_t>(parse_complete(ids, fx.vocab, fx.registry).args[1]);
    };
    CHECK(parse_int("0") == 0);
    CHECK(parse_int("007") == 7);
    CHECK(parse_int("-12") == -12);
    CHECK(parse_int("9223372036854775807") == INT64_MAX);
    CHECK(parse_int("-9223372036854775808") == INT64_MIN);

    auto overflow = encode(fx.vocab, "<nexa_7>('x', 9223372036854775808)<nexa_end>");
    CHECK_THROWS_AS((void)parse_complete(overflow, fx.vocab, fx.registry), ParseFailureError);
}

TEST_CASE("mask basics") {
    Fixture fx;
    DecoderState st(fx.vocab, &fx.registry);
    auto mask = st.allowed_next();
    int on = 0;
    for (size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) {
            ++on;
            CHECK(fx.vocab.is_functional(static_cast<int>(i)));
        }
    CHECK(on == 10);

    // after ')' only <nexa_end>
    for (int id : encode(fx.vocab, "<nexa_9>('dog', 'grooming')")) st.feed(id);
    mask = st.allowed_next();
    for (size_t i = 0; i < mask.size(); ++i)
        CHECK(mask[i] == (static_cast<int>(i) == Vocabulary::kEnd));

    // enum prefix restriction: in smart_recycle param 2 after "pl", only 'a' continues
    DecoderState st2(fx.vocab, &fx.registry);
    for (int id : encode(fx.vocab, "<nexa_4>('b', 'pl")) st2.feed(id);
    mask = st2.allowed_next();
    for (size_t i = 0; i < mask.size(); ++i)
        CHECK(mask[i] == (i == static_cast<size_t>('a')));
}

TEST_CASE("render -> parse round trip on demo and stress registries") {
    Fixture fx;
    Vocabulary stress_vocab = extend_with_functional_tokens(Vocabulary::base(), 3);
    Registry stress = build_registry(stress_schemas(), stress_vocab);

    Rng rng(1234);
    for (int i = 0; i < 1500; ++i) {
        const bool use_stress = i % 3 == 0;
        const Registry& reg = use_stress ? stress : fx.registry;
        const Vocabulary& voc = use_stress ? stress_vocab : fx.vocab;
        FunctionalCall call = random_valid_call(rng, reg);
        std::string token_text = render_call(call, RenderStyle::token_form);
        FunctionalCall back = parse_complete(encode(voc, token_text), voc, reg);
        CHECK(back == call);
        // name form through the text entry, with token substitution
        FunctionalCall back2 = parse_text(render_call(call, RenderStyle::name_form), voc, reg);
        CHECK(back2 == call);
    }
}

TEST_CASE("mask matches feed exactly, lenient and strict") {
    Fixture fx;
    Vocabulary stress_vocab = extend_with_functional_tokens(Vocabulary::base(), 3);
    Registry stress = build_registry(stress_schemas(), stress_vocab);

    Rng rng(99);
    for (int iter = 0; iter < 120; ++iter) {
        const bool use_stress = iter % 2 == 0;
        const Registry& reg = use_stress ? stress : fx.registry;
        const Vocabulary& voc = use_stress ? stress_vocab : fx.vocab;
        const bool strict = iter % 4 < 2;
        DecoderState st(voc, strict ? &reg : nullptr);
        int steps = 0;
        while (!st.done() && !st.failed() && steps < 120) {
            auto mask = st.allowed_next();
            std::vector<int> allowed;
            for (int id = 0; id < voc.size(); ++id) {
                DecoderState probe = st;
                Event ev = probe.feed(id);
                bool ok = ev.kind != EventKind::ParseError;
                REQUIRE(mask[static_cast<size_t>(id)] == ok);
                if (ok) allowed.push_back(id);
            }
            REQUIRE_FALSE(allowed.empty());
            int pick = allowed[static_cast<size_t>(rng.uniform_int(
                0, static_cast<int>(allowed.size()) - 1))];
            st.feed(pick);
            ++steps;
        }
        if (st.done() && strict) {
            // strict completion implies clean validation
            CHECK(validate(st.raw_call(), reg).ok);
        }
    }
}

TEST_CASE("mutation at a masked position fails exactly there") {
    Fixture fx;
    Rng rng(321);
    for (int i = 0; i < 800; ++i) {
        FunctionalCall call = random_valid_call(rng, fx.registry);
        auto ids = encode(fx.vocab, render_call(call, RenderStyle::token_form));
        int cut = rng.uniform_int(0, static_cast<int>(ids.size()) - 1);
        DecoderState st(fx.vocab);
        for (int j = 0; j < cut; ++j) REQUIRE(st.feed(ids[j]).kind == EventKind::None);
        auto mask = st.allowed_next();
        int bad = -1;
        for (int probe = 0; probe < 50; ++probe) {
            int cand = rng.uniform_int(0, fx.vocab.size() - 1);
            if (!mask[static_cast<size_t>(cand)]) {
                bad = cand;
                break;
            }
        }
        if (bad < 0) continue;
        Event ev = st.feed(bad);
        REQUIRE(ev.kind == EventKind::ParseError);
        REQUIRE(ev.position == cut);
    }
}

TEST_CASE("feed consumes each token once and rejects use after finish") {
    Fixture fx;
    DecoderState st(fx.vocab);
    auto ids = encode(fx.vocab, "<nexa_2>('q')<nexa_end>");
    Event last = feed_all(st, ids);
    CHECK(last.kind == EventKind::CallComplete);
    CHECK(st.position() == static_cast<int>(ids.size()));
    CHECK_THROWS_AS((void)st.feed(ids[0]), std::logic_error);
}
